#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadassist/safety.hpp"

namespace quadassist {

/// Declared in priority order: Stop wins over everything.
enum class VoiceCommand : std::uint8_t { Stop, RetreatFaceTouch, StartFaceTouch };

inline constexpr std::array<VoiceCommand, 3> kVoiceCommandsByPriority{
    VoiceCommand::Stop, VoiceCommand::RetreatFaceTouch, VoiceCommand::StartFaceTouch};

std::string_view to_string(VoiceCommand c) noexcept;

class KeywordTable {
 public:
  /// Stop = {stop, halt}; Retreat = {retreat, back, away}; Start = {start, brush, face}.
  static KeywordTable defaults();
  /// Keys "stop", "retreat", "start"; each a list of words. Throws ConfigError.
  static KeywordTable from_json(const nlohmann::json& j);

  KeywordTable(std::set<std::string> stop, std::set<std::string> retreat,
               std::set<std::string> start);

  const std::set<std::string>& keywords(VoiceCommand c) const {
    return sets_[static_cast<std::size_t>(c)];
  }
  nlohmann::json to_json() const;

 private:
  std::array<std::set<std::string>, 3> sets_;
};

/// Lowercase tokens split on non-alphanumeric characters.
std::vector<std::string> tokenize_transcript(std::string_view text);

/// Highest-priority command whose keyword appears as a whole token.
std::optional<VoiceCommand> parse_transcript(std::string_view text, const KeywordTable& table);

/// What a voice command can act on. The simulation implements this by
/// latching requests that are consumed at the next tick boundary.
class CommandSink {
 public:
  virtual ~CommandSink() = default;
  virtual void emergency_stop() = 0;
  virtual void request_face_touch_abort(std::string_view reason) = 0;
  virtual bool request_face_touch_start() = 0;
  virtual FaceTouchPhase face_touch_phase() const = 0;
};

struct DispatchEffect {
  VoiceCommand command = VoiceCommand::Stop;
  bool applied = false;
  std::string note;
};

DispatchEffect dispatch(VoiceCommand cmd, CommandSink& sink);

}  // namespace quadassist
