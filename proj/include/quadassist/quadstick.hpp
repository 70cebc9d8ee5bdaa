#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace quadassist {

/// State of one sip-and-puff channel at a sample.
enum class BreathState : std::uint8_t { Neutral, Blow, Suck };

inline constexpr std::size_t kChannelCount = 4;

// Channel roles on the mouthpiece, left to right.
inline constexpr std::size_t kModeSwitchChannel = 0;
inline constexpr std::size_t kThirdAxisChannel = 1;
inline constexpr std::size_t kGripperChannel = 2;
inline constexpr std::size_t kMappingSwitchChannel = 3;

/// One sampled state of the mouth joystick.
struct QuadstickFrame {
  double joystick_h = 0.0;
  double joystick_v = 0.0;
  std::array<BreathState, kChannelCount> channels{};
  bool push_button = false;
  double timestamp = 0.0;

  bool operator==(const QuadstickFrame&) const = default;
};

/// Untyped record as it arrives from a pilot console, a script or a log.
/// Field counts are not trusted; decode_frame checks them.
struct RawReport {
  std::vector<double> axes;            // h, v
  std::vector<std::string> channels;   // "n" | "b" | "s"
  std::optional<bool> button;
  std::optional<double> timestamp;
};

enum class MappingMode : std::uint8_t { Primary, Secondary };

struct MappingModeState {
  MappingMode current = MappingMode::Primary;
  std::optional<double> transition_started_at;
  std::optional<MappingMode> pending;
  // Last observed value of the switch channel, for edge detection.
  BreathState last_switch_channel = BreathState::Neutral;

  bool transition_pending() const noexcept { return pending.has_value(); }
  bool operator==(const MappingModeState&) const = default;
};

struct QuadstickConfig {
  double deadzone = 0.08;
  double switch_latency = 2.0;  // seconds
};

/// Validates a raw report and clamps both axes to [-1, 1].
/// Throws DecodeError naming the offending field.
QuadstickFrame decode_frame(const RawReport& raw);

/// Reads the wire schema {h, v, ch[4], btn, t} into a RawReport.
RawReport raw_report_from_json(const nlohmann::json& message);
/// Convenience: raw_report_from_json followed by decode_frame.
QuadstickFrame decode_frame(const nlohmann::json& message);
nlohmann::json frame_to_json(const QuadstickFrame& frame);

/// Zeroes |axis| < deadzone and rescales the rest so the output still spans
/// [-1, 1] continuously. Throws ConfigError for deadzone outside [0, 1).
QuadstickFrame apply_deadzone(const QuadstickFrame& frame, double deadzone);

/// Advances the latched primary/secondary switch. A Neutral->Blow edge on the
/// mapping channel starts a transition; it completes once switch_latency has
/// elapsed. Suck on that channel is ignored, as are edges while pending.
MappingModeState update_mapping_mode(const MappingModeState& state,
                                     const QuadstickFrame& frame, double now,
                                     double switch_latency);

char breath_code(BreathState s) noexcept;
BreathState breath_from_code(std::string_view code);  // throws DecodeError
std::string_view to_string(BreathState s) noexcept;
std::string_view to_string(MappingMode m) noexcept;

/// Checks that frame timestamps never go backwards across a stream.
class FrameStreamValidator {
 public:
  /// Returns false (and leaves state untouched) if frame is out of order.
  bool accept(const QuadstickFrame& frame);
  std::optional<double> last_timestamp() const noexcept { return last_; }

 private:
  std::optional<double> last_;
};

}  // namespace quadassist
