#include "quadassist/server.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "quadassist/errors.hpp"
#include "quadassist/session.hpp"

namespace quadassist {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

constexpr std::size_t kMaxQueuedMessages = 2048;  // a client this far behind is dropped

class Client;

}  // namespace

struct TeleopServer::Impl {
  Impl(TaskScenario s, ServerOptions o)
      : options(std::move(o)),
        core(std::move(s), SessionOptions{options.seed, options.record, options.scenario_path}),
        acceptor(ioc) {}

  ServerOptions options;
  SessionCore core;
  mutable std::mutex sim_mutex;  // guards core against concurrent readers
  std::atomic<double> sim_time{0.0};
  std::atomic<std::uint64_t> received{0};
  std::atomic<std::size_t> clients_open{0};
  std::atomic<bool> stopping{false};
  bool score_sent = false;

  asio::io_context ioc;
  tcp::acceptor acceptor;
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
  std::thread io_thread;
  std::uint16_t bound_port = 0;

  // io thread only
  std::set<std::shared_ptr<Client>> clients;
  Client* pilot = nullptr;

  void accept();
  void broadcast(std::vector<std::shared_ptr<const std::string>> messages);
  void step_once();
  void attach(const std::shared_ptr<Client>& c);
  void detach(const std::shared_ptr<Client>& c);
};

namespace {

class Client : public std::enable_shared_from_this<Client> {
 public:
  Client(tcp::socket socket, TeleopServer::Impl& server)
      : ws_(std::move(socket)), server_(server) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->server_.attach(self);
      self->read();
    });
  }

  void send(std::shared_ptr<const std::string> text) {
    if (closed_) return;
    if (queue_.size() >= kMaxQueuedMessages) {
      close();
      return;
    }
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) write();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    beast::get_lowest_layer(ws_).socket().close();
  }

  bool is_pilot = false;

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        self->server_.detach(self);
        return;
      }
      self->handle(beast::buffers_to_string(self->buffer_.data()));
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void handle(const std::string& text) {
    const double t = server_.sim_time.load();
    ClientMessage m;
    try {
      m = parse_client_message(text);
    } catch (const ProtocolError& e) {
      reply(error_message(t, "bad_message", e.what()));
      return;
    }
    if (!is_pilot) {
      reply(error_message(t, "not_pilot", "spectators cannot send inputs"));
      return;
    }
    if (m.frame) {
      server_.core.push_frame(*m.frame);
    } else {
      server_.core.push_transcript(m.transcript);
    }
    ++server_.received;
  }

  void reply(const nlohmann::json& j) { send(std::make_shared<const std::string>(j.dump())); }

  void write() {
    ws_.text(true);
    ws_.async_write(asio::buffer(*queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->close();
                        return;
                      }
                      if (self->queue_.empty()) return;
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->write();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  TeleopServer::Impl& server_;
  bool closed_ = false;
};

std::shared_ptr<const std::string> share(const nlohmann::json& j) {
  return std::make_shared<const std::string>(j.dump());
}

}  // namespace

void TeleopServer::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    beast::error_code opt_ec;
    socket.set_option(tcp::no_delay(true), opt_ec);  // frames are small and latency-bound
    std::make_shared<Client>(std::move(socket), *this)->start();
    accept();
  });
}

void TeleopServer::Impl::attach(const std::shared_ptr<Client>& c) {
  clients.insert(c);
  ++clients_open;
  if (!pilot) {
    pilot = c.get();
    c->is_pilot = true;
    core.set_pilot_connected(true);
  }
  nlohmann::json snapshot;
  {
    std::lock_guard lock(sim_mutex);
    snapshot = core.world().snapshot();
  }
  c->send(share(config_message(core.world().scenario(), c->is_pilot ? "pilot" : "spectator",
                               options.snapshot_hz)));
  c->send(share(state_message(snapshot)));
}

void TeleopServer::Impl::detach(const std::shared_ptr<Client>& c) {
  if (clients.erase(c) == 0) return;
  --clients_open;
  if (pilot == c.get()) {
    pilot = nullptr;
    core.set_pilot_connected(false);
  }
}

void TeleopServer::Impl::broadcast(std::vector<std::shared_ptr<const std::string>> messages) {
  asio::post(ioc, [this, messages = std::move(messages)] {
    for (const auto& c : clients) {
      for (const auto& m : messages) c->send(m);
    }
  });
}

void TeleopServer::Impl::step_once() {
  std::vector<std::shared_ptr<const std::string>> out;
  {
    std::lock_guard lock(sim_mutex);
    if (core.finished()) return;
    const auto& world = core.world();
    const double dt = world.scenario().dt;
    const std::int64_t tick = world.state().tick_index;
    const double t = static_cast<double>(tick) * dt;
    const auto result = core.tick();
    for (const auto& e : result.events) out.push_back(share(event_message(tick, t, e)));

    const double hz = options.snapshot_hz;
    const auto slot = [&](std::int64_t n) {
      return std::floor(static_cast<double>(n) * dt * hz + 1e-9);
    };
    if (slot(tick + 1) > slot(tick) || core.finished()) {
      out.push_back(share(state_message(world.snapshot())));
    }
    if (core.finished() && !score_sent) {
      score_sent = true;
      std::istringstream in(core.log_text());
      const auto score = score_run(read_event_log(in));
      out.push_back(share(make_message(
          MessageType::Event, world.state().sim_time,
          {{"tick", tick}, {"kind", "score"}, {"payload", score.to_json()}})));
    }
    sim_time = world.state().sim_time;
  }
  broadcast(std::move(out));
}

TeleopServer::TeleopServer(TaskScenario scenario, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(scenario), std::move(options))) {
  if (!(impl_->options.snapshot_hz > 0.0)) {
    throw ConfigError("snapshot_hz must be positive");
  }
}

TeleopServer::~TeleopServer() { stop(); }

std::uint16_t TeleopServer::start() {
  auto& m = *impl_;
  const tcp::endpoint endpoint(asio::ip::make_address(m.options.address), m.options.port);
  m.acceptor.open(endpoint.protocol());
  m.acceptor.set_option(asio::socket_base::reuse_address(true));
  m.acceptor.bind(endpoint);
  m.acceptor.listen();
  m.bound_port = m.acceptor.local_endpoint().port();
  m.work.emplace(m.ioc.get_executor());
  m.accept();
  m.io_thread = std::thread([&m] { m.ioc.run(); });
  return m.bound_port;
}

void TeleopServer::run() {
  auto& m = *impl_;
  if (m.options.clock != ServerClock::Realtime) {
    throw ContractError("run() needs the realtime clock; use advance()");
  }
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(m.core.world().scenario().dt));
  auto next = clock::now();
  while (!m.stopping && !finished()) {
    m.step_once();
    next += period;
    std::this_thread::sleep_until(next);
  }
}

std::int64_t TeleopServer::advance(std::int64_t n) {
  std::int64_t done = 0;
  for (; done < n && !finished(); ++done) impl_->step_once();
  return done;
}

void TeleopServer::stop() {
  if (!impl_ || impl_->stopping.exchange(true)) return;
  auto& m = *impl_;
  if (m.io_thread.joinable()) {
    asio::post(m.ioc, [&m] {
      beast::error_code ec;
      m.acceptor.close(ec);
      for (const auto& c : m.clients) c->close();
      m.clients.clear();
      m.work.reset();
    });
    // Give queued writes a moment, then force the loop down.
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(250);
    while (!m.ioc.stopped() && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    m.ioc.stop();
    m.io_thread.join();
  }
}

std::uint16_t TeleopServer::port() const noexcept { return impl_->bound_port; }

bool TeleopServer::finished() const {
  std::lock_guard lock(impl_->sim_mutex);
  return impl_->core.finished();
}

std::int64_t TeleopServer::tick() const {
  std::lock_guard lock(impl_->sim_mutex);
  return impl_->core.world().state().tick_index;
}

std::string TeleopServer::digest() const {
  std::lock_guard lock(impl_->sim_mutex);
  return impl_->core.world().digest();
}

std::uint64_t TeleopServer::messages_received() const { return impl_->received.load(); }

std::size_t TeleopServer::client_count() const { return impl_->clients_open.load(); }

RaceScore TeleopServer::score() const {
  std::istringstream in(log_text());
  return score_run(read_event_log(in));
}

std::string TeleopServer::log_text() const {
  std::lock_guard lock(impl_->sim_mutex);
  return impl_->core.log_text();
}

}  // namespace quadassist
