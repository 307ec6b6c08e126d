#include "histgeo/gazetteer.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

namespace histgeo {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

const char* to_string(ScaleClass c) { return c == ScaleClass::precise ? "precise" : "rough"; }

ScaleClass parse_scale_class(std::string_view text) {
  if (text == "precise") return ScaleClass::precise;
  if (text == "rough") return ScaleClass::rough;
  throw std::invalid_argument("scale class must be 'precise' or 'rough', got '" + std::string(text) + "'");
}

double effective_accuracy(const GeoHistoricalObject& obj, const HistoricalSource& source,
                          const NumericalOriginProcess& process) {
  return obj.accuracy.value_or(source.default_accuracy) + process.digitizing_precision;
}

FuzzyPeriod effective_period(const GeoHistoricalObject& obj, const HistoricalSource& source) {
  return obj.period.value_or(source.default_period);
}

struct GazetteerRegistry::SpatialIndex {
  using Box = bg::model::box<bg::model::point<double, 2, bg::cs::cartesian>>;
  using Entry = std::pair<Box, std::uint32_t>;
  bgi::rtree<Entry, bgi::quadratic<16>> tree;

  static Box box_of(const BBox& b) { return Box({b.min_x, b.min_y}, {b.max_x, b.max_y}); }
};

GazetteerRegistry::GazetteerRegistry(std::string crs)
    : crs_(std::move(crs)), spatial_(std::make_unique<SpatialIndex>()) {}

GazetteerRegistry::~GazetteerRegistry() = default;

SourceId GazetteerRegistry::register_source(HistoricalSource source) {
  if (source.name.empty()) throw IntegrityError("historical source name must not be empty");
  if (!(source.default_accuracy > 0.0) || !std::isfinite(source.default_accuracy)) {
    throw IntegrityError("historical source '" + source.name + "' needs a positive default accuracy");
  }
  std::unique_lock lock(mutex_);
  for (const auto& s : sources_) {
    if (s.name == source.name) throw DuplicateNameError("historical source '" + source.name + "' already exists");
  }
  source.id = SourceId{sources_.size() + 1};
  sources_.push_back(std::move(source));
  return sources_.back().id;
}

ProcessId GazetteerRegistry::register_process(NumericalOriginProcess process) {
  if (process.name.empty()) throw IntegrityError("numerical origin process name must not be empty");
  if (!(process.digitizing_precision >= 0.0) || !std::isfinite(process.digitizing_precision)) {
    throw IntegrityError("process '" + process.name + "' needs a digitizing precision >= 0");
  }
  std::unique_lock lock(mutex_);
  for (const auto& p : processes_) {
    if (p.name == process.name) throw DuplicateNameError("numerical origin process '" + process.name + "' already exists");
  }
  process.id = ProcessId{processes_.size() + 1};
  processes_.push_back(std::move(process));
  return processes_.back().id;
}

GazetteerId GazetteerRegistry::create_gazetteer(std::string name, ScaleClass scale_class) {
  if (name.empty()) throw IntegrityError("gazetteer name must not be empty");
  std::unique_lock lock(mutex_);
  for (const auto& g : gazetteers_) {
    if (g.name == name) throw DuplicateNameError("gazetteer '" + name + "' already exists");
  }
  gazetteers_.push_back(Gazetteer{GazetteerId{gazetteers_.size() + 1}, std::move(name), scale_class, false});
  return gazetteers_.back().id;
}

GazetteerId GazetteerRegistry::create_mixed_gazetteer(std::string name) {
  const GazetteerId id = create_gazetteer(std::move(name), ScaleClass::precise);
  std::unique_lock lock(mutex_);
  gazetteers_[id.value - 1].mixed = true;
  return id;
}

void GazetteerRegistry::validate(GazetteerId gazetteer, const GeoHistoricalObject& obj) const {
  std::shared_lock lock(mutex_);
  validate_locked(gazetteer, obj);
}

void GazetteerRegistry::validate_locked(GazetteerId gazetteer, const GeoHistoricalObject& obj) const {
  const std::string who = "object '" + obj.historical_name + "'";
  if (gazetteer.value == 0 || gazetteer.value > gazetteers_.size()) {
    throw IntegrityError(who + ": unknown gazetteer id " + std::to_string(gazetteer.value));
  }
  const Gazetteer& g = gazetteers_[gazetteer.value - 1];
  if (obj.normalized_name.empty()) throw IntegrityError(who + ": normalized name must not be empty");
  if (obj.source.value == 0 || obj.source.value > sources_.size()) {
    throw IntegrityError(who + ": unknown historical source id " + std::to_string(obj.source.value));
  }
  if (obj.process.value == 0 || obj.process.value > processes_.size()) {
    throw IntegrityError(who + ": unknown numerical origin process id " + std::to_string(obj.process.value));
  }
  if (obj.geometry.empty()) throw IntegrityError(who + ": missing geometry");
  if (!obj.geometry.crs().empty() && obj.geometry.crs() != crs_) {
    throw IntegrityError(who + ": geometry reference system '" + obj.geometry.crs() + "' differs from registry '" +
                         crs_ + "'");
  }
  if (obj.accuracy && (!(*obj.accuracy >= 0.0) || !std::isfinite(*obj.accuracy))) {
    throw IntegrityError(who + ": accuracy must be a finite value >= 0");
  }
  if (!g.mixed && obj.scale_class != g.scale_class) {
    throw IntegrityError(who + ": scale class " + to_string(obj.scale_class) + " does not match gazetteer '" + g.name +
                         "' (" + to_string(g.scale_class) + ")");
  }
}

std::shared_ptr<const StoredObject> GazetteerRegistry::prepare(GazetteerId gazetteer, GeoHistoricalObject obj,
                                                               ObjectId id) const {
  auto stored = std::make_shared<StoredObject>();
  const HistoricalSource& source = sources_[obj.source.value - 1];
  const NumericalOriginProcess& process = processes_[obj.process.value - 1];
  obj.id = id;
  if (obj.geometry.crs().empty()) obj.geometry = obj.geometry.with_crs(crs_);
  stored->gazetteer = gazetteer;
  stored->effective_period = effective_period(obj, source);
  stored->effective_accuracy = effective_accuracy(obj, source, process);
  stored->building_number = leading_number(obj.normalized_name);
  stored->trigrams = trigram_set(obj.normalized_name);
  stored->bounds = bbox(obj.geometry);
  stored->footprint = std::sqrt(area(buffer(obj.geometry, stored->effective_accuracy)));
  stored->object = std::move(obj);
  return stored;
}

std::vector<ObjectId> GazetteerRegistry::insert_objects(GazetteerId gazetteer, std::vector<GeoHistoricalObject> objects) {
  std::unique_lock lock(mutex_);
  for (const auto& obj : objects) validate_locked(gazetteer, obj);

  std::vector<std::shared_ptr<const StoredObject>> prepared;
  prepared.reserve(objects.size());
  std::vector<ObjectId> ids;
  ids.reserve(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const ObjectId id{objects_.size() + i + 1};
    prepared.push_back(prepare(gazetteer, std::move(objects[i]), id));
    ids.push_back(id);
  }

  // Nothing below throws except allocation; publish the whole batch.
  for (auto& stored : prepared) {
    const auto index = static_cast<std::uint32_t>(objects_.size());
    for (const Trigram t : stored->trigrams) postings_[t].push_back(index);
    if (stored->trigrams.empty()) without_trigrams_.push_back(index);
    spatial_->tree.insert({SpatialIndex::box_of(stored->bounds), index});
    objects_.push_back(std::move(stored));
  }
  return ids;
}

namespace {

bool passes_scale(const StoredObject& s, ScaleFilter filter) {
  switch (filter) {
    case ScaleFilter::both: return true;
    case ScaleFilter::precise: return s.object.scale_class == ScaleClass::precise;
    case ScaleFilter::rough: return s.object.scale_class == ScaleClass::rough;
  }
  return false;
}

}  // namespace

std::vector<Candidate> GazetteerRegistry::query_candidates(std::string_view text, double max_string_distance,
                                                           ScaleFilter filter, const std::optional<BBox>& window) const {
  const std::vector<Trigram> query = trigram_set(text);
  std::vector<Candidate> out;
  std::shared_lock lock(mutex_);

  auto consider = [&](std::uint32_t index, double d) {
    const auto& stored = objects_[index];
    if (!passes_scale(*stored, filter)) return;
    if (window && !stored->bounds.intersects(*window)) return;
    out.push_back({stored, d});
  };

  if (max_string_distance >= 1.0) {
    // Every object is within distance 1 of anything.
    if (window) {
      std::vector<SpatialIndex::Entry> hits;
      spatial_->tree.query(bgi::intersects(SpatialIndex::box_of(*window)), std::back_inserter(hits));
      std::vector<std::uint32_t> indexes;
      indexes.reserve(hits.size());
      for (const auto& h : hits) indexes.push_back(h.second);
      std::sort(indexes.begin(), indexes.end());
      for (const auto i : indexes) consider(i, trigram_distance(query, objects_[i]->trigrams));
    } else {
      for (std::uint32_t i = 0; i < objects_.size(); ++i) consider(i, trigram_distance(query, objects_[i]->trigrams));
    }
    return out;
  }

  if (query.empty()) {
    // Only trigram-less names are at distance 0; everything else is at 1.
    if (max_string_distance >= 0.0) {
      for (const auto i : without_trigrams_) consider(i, 0.0);
    }
    return out;
  }

  std::vector<std::uint32_t> shared(objects_.size(), 0);
  std::vector<std::uint32_t> touched;
  for (const Trigram t : query) {
    const auto it = postings_.find(t);
    if (it == postings_.end()) continue;
    for (const auto index : it->second) {
      if (shared[index]++ == 0) touched.push_back(index);
    }
  }
  std::sort(touched.begin(), touched.end());
  for (const auto index : touched) {
    const double d = trigram_distance_from_counts(shared[index], query.size(), objects_[index]->trigrams.size());
    if (d <= max_string_distance) consider(index, d);
  }
  return out;
}

std::shared_ptr<const StoredObject> GazetteerRegistry::find_object(ObjectId id) const {
  std::shared_lock lock(mutex_);
  if (id.value == 0 || id.value > objects_.size()) return nullptr;
  return objects_[id.value - 1];
}

std::optional<HistoricalSource> GazetteerRegistry::source(SourceId id) const {
  std::shared_lock lock(mutex_);
  if (id.value == 0 || id.value > sources_.size()) return std::nullopt;
  return sources_[id.value - 1];
}

std::optional<NumericalOriginProcess> GazetteerRegistry::process(ProcessId id) const {
  std::shared_lock lock(mutex_);
  if (id.value == 0 || id.value > processes_.size()) return std::nullopt;
  return processes_[id.value - 1];
}

std::optional<Gazetteer> GazetteerRegistry::gazetteer(GazetteerId id) const {
  std::shared_lock lock(mutex_);
  if (id.value == 0 || id.value > gazetteers_.size()) return std::nullopt;
  return gazetteers_[id.value - 1];
}

std::optional<HistoricalSource> GazetteerRegistry::find_source(std::string_view name) const {
  std::shared_lock lock(mutex_);
  for (const auto& s : sources_) {
    if (s.name == name) return s;
  }
  return std::nullopt;
}

std::optional<NumericalOriginProcess> GazetteerRegistry::find_process(std::string_view name) const {
  std::shared_lock lock(mutex_);
  for (const auto& p : processes_) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

std::optional<Gazetteer> GazetteerRegistry::find_gazetteer(std::string_view name) const {
  std::shared_lock lock(mutex_);
  for (const auto& g : gazetteers_) {
    if (g.name == name) return g;
  }
  return std::nullopt;
}

std::vector<HistoricalSource> GazetteerRegistry::sources() const {
  std::shared_lock lock(mutex_);
  return sources_;
}

std::vector<NumericalOriginProcess> GazetteerRegistry::processes() const {
  std::shared_lock lock(mutex_);
  return processes_;
}

std::vector<Gazetteer> GazetteerRegistry::gazetteers() const {
  std::shared_lock lock(mutex_);
  return gazetteers_;
}

std::vector<std::shared_ptr<const StoredObject>> GazetteerRegistry::objects() const {
  std::shared_lock lock(mutex_);
  return objects_;
}

std::size_t GazetteerRegistry::object_count() const {
  std::shared_lock lock(mutex_);
  return objects_.size();
}

}  // namespace histgeo
