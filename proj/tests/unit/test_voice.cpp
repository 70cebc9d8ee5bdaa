#include <string>
#include <vector>

#include "doctest.h"
#include "quadassist/errors.hpp"
#include "quadassist/voice.hpp"

using namespace quadassist;

namespace {

struct RecordingSink : CommandSink {
  FaceTouchPhase phase = FaceTouchPhase::Idle;
  int stops = 0;
  std::vector<std::string> aborts;
  int starts = 0;

  void emergency_stop() override { ++stops; }
  void request_face_touch_abort(std::string_view reason) override {
    aborts.emplace_back(reason);
  }
  bool request_face_touch_start() override {
    if (is_active(phase)) return false;
    ++starts;
    phase = FaceTouchPhase::Acquiring;
    return true;
  }
  FaceTouchPhase face_touch_phase() const override { return phase; }
};

}  // namespace

TEST_CASE("parse_transcript: examples") {
  const auto table = KeywordTable::defaults();
  CHECK(parse_transcript("please STOP now", table) == VoiceCommand::Stop);
  CHECK(parse_transcript("start brushing", table) == VoiceCommand::StartFaceTouch);
  CHECK(parse_transcript("back off, retreat!", table) == VoiceCommand::RetreatFaceTouch);
  CHECK_FALSE(parse_transcript("unstoppable", table));
  CHECK_FALSE(parse_transcript("", table));
  CHECK(parse_transcript("stop, start", table) == VoiceCommand::Stop);
  CHECK(parse_transcript("start and retreat", table) == VoiceCommand::RetreatFaceTouch);
}

TEST_CASE("tokenize_transcript: lowercase alphanumeric tokens") {
  CHECK(tokenize_transcript("Hey,robot--STOP2 now") ==
        std::vector<std::string>{"hey", "robot", "stop2", "now"});
}

TEST_CASE("parse_transcript: priority over every keyword-presence combination") {
  const auto table = KeywordTable::defaults();
  const std::vector<VoiceCommand> cmds{VoiceCommand::Stop, VoiceCommand::RetreatFaceTouch,
                                       VoiceCommand::StartFaceTouch};
  for (int mask = 0; mask < 8; ++mask) {
    for (int word = 0; word < 3; ++word) {
      for (int wrap = 0; wrap < 3; ++wrap) {
        std::string text = "well";
        std::optional<VoiceCommand> expect;
        for (int c = 2; c >= 0; --c) {
          if (!(mask & (1 << c))) continue;
          const auto& words = table.keywords(cmds[c]);
          auto it = words.begin();
          std::advance(it, word % words.size());
          std::string w = *it;
          if (wrap == 1) w = "(" + w + ")";
          if (wrap == 2) w[0] = static_cast<char>(std::toupper(w[0]));
          text += " " + w;
          expect = cmds[c];
        }
        // Embedded keywords never match: they only appear inside longer tokens.
        text += " xstopx brushing awayward";
        const auto got = parse_transcript(text, table);
        REQUIRE(got == expect);
      }
    }
  }
}

TEST_CASE("keyword table: validation and json round trip") {
  CHECK_THROWS_AS(KeywordTable({"stop"}, {"stop"}, {"go"}), ConfigError);
  CHECK_THROWS_AS(KeywordTable({}, {"back"}, {"go"}), ConfigError);
  CHECK_THROWS_AS(KeywordTable({"Stop"}, {"back"}, {"go"}), ConfigError);
  CHECK_THROWS_AS(KeywordTable({"st op"}, {"back"}, {"go"}), ConfigError);
  const auto t = KeywordTable::defaults();
  const auto back = KeywordTable::from_json(t.to_json());
  CHECK(back.keywords(VoiceCommand::Stop) == t.keywords(VoiceCommand::Stop));
  CHECK_THROWS_AS(KeywordTable::from_json(nlohmann::json{{"stop", {"halt"}}}), ConfigError);
}

TEST_CASE("dispatch: effects depend on the face-touch phase") {
  RecordingSink sink;
  auto e = dispatch(VoiceCommand::RetreatFaceTouch, sink);
  CHECK_FALSE(e.applied);
  CHECK(sink.aborts.empty());

  e = dispatch(VoiceCommand::StartFaceTouch, sink);
  CHECK(e.applied);
  CHECK(sink.starts == 1);
  e = dispatch(VoiceCommand::StartFaceTouch, sink);
  CHECK_FALSE(e.applied);
  CHECK(sink.starts == 1);

  e = dispatch(VoiceCommand::RetreatFaceTouch, sink);
  CHECK(e.applied);
  CHECK(sink.aborts == std::vector<std::string>{"voice"});

  e = dispatch(VoiceCommand::Stop, sink);
  CHECK(e.applied);
  CHECK(sink.stops == 1);
}
