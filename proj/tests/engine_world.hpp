#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "histgeo/engine.hpp"
#include "histgeo/text.hpp"

namespace histgeo::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("histgeo-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

/// Catalog entries registered through an Engine so they reach the journal.
struct EngineCatalog {
  SourceId atlas;
  ProcessId manual;
  GazetteerId numbers;
  GazetteerId streets;

  explicit EngineCatalog(Engine& e) {
    atlas = e.register_source({{}, "Jacoubet atlas", "Paris atlas", parse_fuzzy_date("1827-1836"), 5.0});
    manual = e.register_process({{}, "manual digitization", "vectorized by hand", 5.0});
    numbers = e.create_gazetteer("jacoubet_numbers", ScaleClass::precise);
    streets = e.create_gazetteer("alphand_streets", ScaleClass::rough);
  }

  GeoHistoricalObject point(const std::string& name, Point p) const {
    GeoHistoricalObject o;
    o.historical_name = name;
    o.normalized_name = normalize(name).normalized;
    o.source = atlas;
    o.process = manual;
    o.geometry = Geometry::point(p);
    return o;
  }
};

}  // namespace histgeo::testing
