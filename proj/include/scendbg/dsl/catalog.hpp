#pragma once

#include <string>
#include <vector>

namespace scendbg::dsl {

/// Default car model catalog; used when an object declaration omits `model`.
inline const std::vector<std::string>& default_car_models() {
  static const std::vector<std::string> models = {
      "BLISTA", "BUS",      "NINEF",     "ASEA",    "BALLER", "BISON",   "BUFFALO",
      "BOBCATXL", "DOMINATOR", "GRANGER", "JACKAL",  "ORACLE", "PATRIOT", "PRANGER"};
  return models;
}

/// Weather catalog for `param weather = choice(...)` convenience in bundled
/// scenarios; the language itself treats weather as an ordinary categorical.
inline const std::vector<std::string>& weather_catalog() {
  static const std::vector<std::string> conditions = {
      "Neutral", "Clear",    "Extrasunny", "Smog",     "Clouds",   "Overcast", "Rain",
      "Thunder", "Clearing", "Xmas",       "Foggy",    "Snowlight", "Blizzard", "Snow"};
  return conditions;
}

}  // namespace scendbg::dsl
