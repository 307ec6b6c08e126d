#pragma once

#include <random>
#include <string>
#include <vector>

#include "histgeo/gazetteer.hpp"
#include "histgeo/text.hpp"

namespace histgeo::testing {

struct SmallWorld {
  GazetteerRegistry registry;
  SourceId atlas;
  ProcessId manual;
  GazetteerId numbers;
  GazetteerId streets;

  SmallWorld() {
    atlas = registry.register_source({{}, "Jacoubet atlas", "Paris atlas", parse_fuzzy_date("1827-1836"), 5.0});
    manual = registry.register_process({{}, "manual digitization", "vectorized by hand", 5.0});
    numbers = registry.create_gazetteer("jacoubet_numbers", ScaleClass::precise);
    streets = registry.create_gazetteer("alphand_streets", ScaleClass::rough);
  }

  GeoHistoricalObject point_object(const std::string& name, Point p, ScaleClass cls = ScaleClass::precise) const {
    GeoHistoricalObject o;
    o.historical_name = name;
    o.normalized_name = normalize(name).normalized;
    o.source = atlas;
    o.process = manual;
    o.geometry = Geometry::point(p);
    o.scale_class = cls;
    return o;
  }

  GeoHistoricalObject street_object(const std::string& name, Geometry::Path line) const {
    GeoHistoricalObject o;
    o.historical_name = name;
    o.normalized_name = normalize(name).normalized;
    o.source = atlas;
    o.process = manual;
    o.geometry = Geometry::polyline(std::move(line));
    o.scale_class = ScaleClass::rough;
    return o;
  }
};

/// Street-like names from a small syllable set so that near-duplicates and
/// shared trigrams are common.
inline std::string random_street(std::mt19937_64& rng) {
  static const std::vector<std::string> types = {"rue", "boulevard", "place", "avenue", "quai", "impasse"};
  static const std::vector<std::string> joins = {"du", "de la", "des", "de l", "saint"};
  static const std::vector<std::string> syllables = {"tem", "ple", "van", "ne", "rie", "ta", "mar", "ais", "bac",
                                                     "pa",  "ix",  "or", "fe", "vre", "gre", "nel", "mon", "tor"};
  std::uniform_int_distribution<std::size_t> t(0, types.size() - 1), j(0, joins.size() - 1),
      s(0, syllables.size() - 1);
  std::uniform_int_distribution<int> n(2, 3);
  std::string word;
  for (int k = n(rng); k > 0; --k) word += syllables[s(rng)];
  return types[t(rng)] + " " + joins[j(rng)] + " " + word;
}

}  // namespace histgeo::testing
