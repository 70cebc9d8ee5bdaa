#include "quadassist/voice.hpp"

#include <cctype>

#include "quadassist/errors.hpp"

namespace quadassist {

std::string_view to_string(VoiceCommand c) noexcept {
  switch (c) {
    case VoiceCommand::Stop:
      return "Stop";
    case VoiceCommand::RetreatFaceTouch:
      return "RetreatFaceTouch";
    case VoiceCommand::StartFaceTouch:
      return "StartFaceTouch";
  }
  return "?";
}

KeywordTable::KeywordTable(std::set<std::string> stop, std::set<std::string> retreat,
                           std::set<std::string> start)
    : sets_{std::move(stop), std::move(retreat), std::move(start)} {
  for (const auto& s : sets_) {
    if (s.empty()) throw ConfigError("keyword table: every command needs a keyword");
    for (const auto& word : s) {
      if (word.empty()) throw ConfigError("keyword table: empty keyword");
      for (unsigned char ch : word) {
        if (!std::isalnum(ch) || std::isupper(ch)) {
          throw ConfigError("keyword table: '" + word + "' must be a lowercase alphanumeric token");
        }
      }
    }
  }
  for (std::size_t i = 0; i < sets_.size(); ++i) {
    for (std::size_t k = i + 1; k < sets_.size(); ++k) {
      for (const auto& word : sets_[i]) {
        if (sets_[k].count(word)) {
          throw ConfigError("keyword table: '" + word + "' is bound to two commands");
        }
      }
    }
  }
}

KeywordTable KeywordTable::defaults() {
  return KeywordTable({"stop", "halt"}, {"retreat", "back", "away"}, {"start", "brush", "face"});
}

KeywordTable KeywordTable::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("voice keywords: expected an object");
  auto words = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_array()) {
      throw ConfigError(std::string("voice keywords: '") + key + "' must be a list");
    }
    std::set<std::string> out;
    for (const auto& w : *it) {
      if (!w.is_string()) throw ConfigError(std::string("voice keywords: '") + key + "' entries must be strings");
      out.insert(w.get<std::string>());
    }
    return out;
  };
  return KeywordTable(words("stop"), words("retreat"), words("start"));
}

nlohmann::json KeywordTable::to_json() const {
  return {{"stop", sets_[0]}, {"retreat", sets_[1]}, {"start", sets_[2]}};
}

std::vector<std::string> tokenize_transcript(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      current.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::optional<VoiceCommand> parse_transcript(std::string_view text, const KeywordTable& table) {
  const auto tokens = tokenize_transcript(text);
  for (VoiceCommand c : kVoiceCommandsByPriority) {
    const auto& words = table.keywords(c);
    for (const auto& t : tokens) {
      if (words.count(t)) return c;
    }
  }
  return std::nullopt;
}

DispatchEffect dispatch(VoiceCommand cmd, CommandSink& sink) {
  DispatchEffect effect;
  effect.command = cmd;
  switch (cmd) {
    case VoiceCommand::Stop:
      sink.emergency_stop();
      effect.applied = true;
      effect.note = "emergency stop";
      break;
    case VoiceCommand::RetreatFaceTouch:
      if (is_active(sink.face_touch_phase())) {
        sink.request_face_touch_abort("voice");
        effect.applied = true;
        effect.note = "face touch retreat requested";
      } else {
        effect.note = "no face touch in progress";
      }
      break;
    case VoiceCommand::StartFaceTouch:
      effect.applied = sink.request_face_touch_start();
      effect.note = effect.applied ? "face touch started"
                                   : "face touch already running; start ignored";
      break;
  }
  return effect;
}

}  // namespace quadassist
