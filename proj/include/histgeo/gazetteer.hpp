#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "histgeo/fuzzy_time.hpp"
#include "histgeo/geometry.hpp"
#include "histgeo/text.hpp"

namespace histgeo {

template <typename Tag>
struct Id {
  std::uint64_t value = 0;
  friend auto operator<=>(const Id&, const Id&) = default;
};

using SourceId = Id<struct SourceTag>;
using ProcessId = Id<struct ProcessTag>;
using GazetteerId = Id<struct GazetteerTag>;
using ObjectId = Id<struct ObjectTag>;

enum class ScaleClass { precise, rough };
enum class ScaleFilter { precise, rough, both };

const char* to_string(ScaleClass c);
ScaleClass parse_scale_class(std::string_view text);

/// A primary historical document (map, directory) and its defaults.
struct HistoricalSource {
  SourceId id;
  std::string name;
  std::string description;
  FuzzyPeriod default_period;
  double default_accuracy = 1.0;  // meters, > 0
};

/// How a source was turned into vector data (digitizing, OCR, edit...).
struct NumericalOriginProcess {
  ProcessId id;
  std::string name;
  std::string description;
  double digitizing_precision = 0.0;  // meters, >= 0
};

struct GeoHistoricalObject {
  ObjectId id;
  std::string historical_name;
  std::string normalized_name;
  SourceId source;
  ProcessId process;
  std::optional<FuzzyPeriod> period;  // overrides the source default
  Geometry geometry;
  std::optional<double> accuracy;  // overrides the source default
  ScaleClass scale_class = ScaleClass::precise;

  friend bool operator==(const GeoHistoricalObject&, const GeoHistoricalObject&) = default;
};

struct Gazetteer {
  GazetteerId id;
  std::string name;
  ScaleClass scale_class = ScaleClass::precise;
  // Mixed gazetteers accept objects of either class.
  bool mixed = false;
};

/// An inserted object with everything derived from it at insert time.
/// Immutable once published.
struct StoredObject {
  GeoHistoricalObject object;
  GazetteerId gazetteer;
  FuzzyPeriod effective_period;
  double effective_accuracy = 0.0;
  std::optional<std::int64_t> building_number;
  std::vector<Trigram> trigrams;
  BBox bounds;
  /// sqrt(area(buffer(geometry, effective_accuracy))).
  double footprint = 0.0;
};

struct Candidate {
  std::shared_ptr<const StoredObject> stored;
  double string_distance = 0.0;
};

class RegistryError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};
class DuplicateNameError : public RegistryError {
public:
  using RegistryError::RegistryError;
};
class IntegrityError : public RegistryError {
public:
  using RegistryError::RegistryError;
};

/// (accuracy override or source default) + digitizing precision.
double effective_accuracy(const GeoHistoricalObject& obj, const HistoricalSource& source,
                          const NumericalOriginProcess& process);
FuzzyPeriod effective_period(const GeoHistoricalObject& obj, const HistoricalSource& source);

/// All gazetteers behind one query surface.
///
/// Objects live in named gazetteers; queries see every gazetteer at once and
/// filter by each object's scale class. Many readers may query concurrently
/// with a single writer: each insert batch becomes visible atomically. Stored
/// objects are never modified after insertion.
class GazetteerRegistry {
public:
  explicit GazetteerRegistry(std::string crs = "local");
  ~GazetteerRegistry();
  GazetteerRegistry(const GazetteerRegistry&) = delete;
  GazetteerRegistry& operator=(const GazetteerRegistry&) = delete;

  const std::string& crs() const { return crs_; }

  SourceId register_source(HistoricalSource source);
  ProcessId register_process(NumericalOriginProcess process);
  GazetteerId create_gazetteer(std::string name, ScaleClass scale_class);
  GazetteerId create_mixed_gazetteer(std::string name);

  /// Throws IntegrityError naming the object when it cannot be inserted.
  void validate(GazetteerId gazetteer, const GeoHistoricalObject& obj) const;

  /// All-or-nothing: every object is validated before any is published.
  /// Incoming ids are ignored; assigned ids are returned in input order.
  std::vector<ObjectId> insert_objects(GazetteerId gazetteer, std::vector<GeoHistoricalObject> objects);

  /// Objects whose trigram distance to `text` is <= max_string_distance, in
  /// insertion order, restricted to `filter` and (when given) to objects whose
  /// bounding box intersects `window`. No ranking.
  std::vector<Candidate> query_candidates(std::string_view text, double max_string_distance, ScaleFilter filter,
                                          const std::optional<BBox>& window = std::nullopt) const;

  std::shared_ptr<const StoredObject> find_object(ObjectId id) const;
  std::optional<HistoricalSource> source(SourceId id) const;
  std::optional<NumericalOriginProcess> process(ProcessId id) const;
  std::optional<Gazetteer> gazetteer(GazetteerId id) const;
  std::optional<HistoricalSource> find_source(std::string_view name) const;
  std::optional<NumericalOriginProcess> find_process(std::string_view name) const;
  std::optional<Gazetteer> find_gazetteer(std::string_view name) const;

  std::vector<HistoricalSource> sources() const;
  std::vector<NumericalOriginProcess> processes() const;
  std::vector<Gazetteer> gazetteers() const;
  /// Consistent snapshot of every stored object in insertion order.
  std::vector<std::shared_ptr<const StoredObject>> objects() const;
  std::size_t object_count() const;

private:
  struct SpatialIndex;

  std::shared_ptr<const StoredObject> prepare(GazetteerId gazetteer, GeoHistoricalObject obj, ObjectId id) const;
  void validate_locked(GazetteerId gazetteer, const GeoHistoricalObject& obj) const;

  std::string crs_;
  mutable std::shared_mutex mutex_;
  std::vector<HistoricalSource> sources_;
  std::vector<NumericalOriginProcess> processes_;
  std::vector<Gazetteer> gazetteers_;
  std::vector<std::shared_ptr<const StoredObject>> objects_;
  std::unordered_map<Trigram, std::vector<std::uint32_t>> postings_;
  std::vector<std::uint32_t> without_trigrams_;
  std::unique_ptr<SpatialIndex> spatial_;
};

}  // namespace histgeo
