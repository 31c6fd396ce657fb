#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace wafer::synth {

enum class WaferClass : int {
  Good = 0,
  LowLevel = 1,
  Circle = 2,
  Crack = 3,
  Displaced = 4,
  WaferOnPin = 5,
  Splinter = 6,
  Scratch = 7,
};

inline constexpr std::size_t kNumClasses = 8;
inline constexpr std::array<WaferClass, kNumClasses> kAllClasses = {
    WaferClass::Good,      WaferClass::LowLevel,   WaferClass::Circle,   WaferClass::Crack,
    WaferClass::Displaced, WaferClass::WaferOnPin, WaferClass::Splinter, WaferClass::Scratch};

/// Table of per-class sample counts of the reference dataset, indexed by code.
inline constexpr std::array<int, kNumClasses> kDefaultCounts = {1096, 420, 351, 577, 993, 256, 79, 569};

constexpr int code(WaferClass c) noexcept { return static_cast<int>(c); }

/// Throws ConfigError for codes outside 0..7.
WaferClass class_from_code(int code);

/// Lower-case snake name used in manifests and file names ("wafer_on_pin").
std::string_view class_name(WaferClass c);

/// Case-insensitive; accepts the snake name or the CamelCase enum name.
/// Throws ParseError for unknown names.
WaferClass parse_class(std::string_view name);

/// Classes of the 3-, 5- and 8-class tasks, in code order. ConfigError otherwise.
std::vector<WaferClass> task_classes(int task);

/// Classes whose defect is a local region and therefore carries a mask.
constexpr bool has_local_defect(WaferClass c) noexcept {
  return c == WaferClass::Circle || c == WaferClass::Crack || c == WaferClass::Splinter ||
         c == WaferClass::Scratch;
}

}  // namespace wafer::synth
