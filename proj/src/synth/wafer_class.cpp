#include "wafer/synth/wafer_class.hpp"

#include <algorithm>
#include <cctype>

#include "wafer/errors.hpp"

namespace wafer::synth {

namespace {

constexpr std::array<std::string_view, kNumClasses> kNames = {
    "good", "low_level", "circle", "crack", "displaced", "wafer_on_pin", "splinter", "scratch"};

std::string fold(std::string_view s) {
  std::string out;
  for (char ch : s) {
    if (ch == '_' || ch == '-' || ch == ' ') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

}  // namespace

WaferClass class_from_code(int c) {
  if (c < 0 || c >= static_cast<int>(kNumClasses)) {
    throw ConfigError("wafer class code out of range: " + std::to_string(c));
  }
  return static_cast<WaferClass>(c);
}

std::string_view class_name(WaferClass c) { return kNames.at(static_cast<std::size_t>(code(c))); }

WaferClass parse_class(std::string_view name) {
  const std::string key = fold(name);
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (!key.empty() && fold(kNames[i]) == key) return kAllClasses[i];
  }
  throw ParseError("unknown wafer class '" + std::string(name) + "'");
}

std::vector<WaferClass> task_classes(int task) {
  switch (task) {
    case 3: return {WaferClass::Good, WaferClass::LowLevel, WaferClass::Circle};
    case 5:
      return {WaferClass::Good, WaferClass::LowLevel, WaferClass::Circle, WaferClass::Crack,
              WaferClass::Displaced};
    case 8: return {kAllClasses.begin(), kAllClasses.end()};
    default: throw ConfigError("task must be 3, 5 or 8 classes, got " + std::to_string(task));
  }
}

}  // namespace wafer::synth
