#include "histgeo/engine.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>

#include <boost/crc.hpp>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include "histgeo/geometry_json.hpp"
#include "histgeo/ingest.hpp"
#include "histgeo/serialization.hpp"

namespace histgeo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kJournalFile = "journal.log";
constexpr const char* kSnapshotFile = "snapshot.json";

std::string to_hex(const unsigned char* bytes, std::size_t n) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(digits[bytes[i] >> 4]);
    out.push_back(digits[bytes[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(std::string_view text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  return to_hex(digest, len);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string crc_hex(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

json record_to_json(const ResultRecord& r) {
  json j = {{"id", r.id},       {"ruid", r.ruid},           {"row_index", r.row_index},
            {"query", r.query}, {"created_at", r.created_at}, {"edited", r.edited}};
  j["result"] = r.result;
  j["object"] = r.object ? json(r.object->value) : json();
  return j;
}

ResultRecord record_from_json(const json& j) {
  ResultRecord r;
  r.id = j.at("id").get<std::uint64_t>();
  r.ruid = j.at("ruid").get<std::string>();
  r.row_index = j.at("row_index").get<std::size_t>();
  r.query = j.at("query");
  r.created_at = j.at("created_at").get<std::string>();
  r.edited = j.value("edited", false);
  r.result = j.at("result");
  if (!j.at("object").is_null()) r.object = ObjectId{j["object"].get<std::uint64_t>()};
  return r;
}

}  // namespace

std::uint32_t crc32(std::string_view text) {
  boost::crc_32_type crc;
  crc.process_bytes(text.data(), text.size());
  return crc.checksum();
}

std::string make_ruid() {
  unsigned char bytes[16];
  if (RAND_bytes(bytes, sizeof bytes) != 1) throw std::runtime_error("random generator unavailable");
  return to_hex(bytes, sizeof bytes);
}

std::string object_hash(const GeoHistoricalObject& o) { return sha256_hex(object_to_json(o).dump()); }

EditRequest EditRequest::from_json(const nlohmann::json& j, const std::string& default_crs) {
  if (!j.is_object()) throw std::invalid_argument("edit body must be a JSON object");
  EditRequest e;
  try {
    if (j.contains("geometry") && !j["geometry"].is_null()) e.geometry = geometry_from_json(j["geometry"], default_crs);
    if (j.contains("period") && !j["period"].is_null()) e.period = period_from_json(j["period"]);
    if (j.contains("name_historical") && !j["name_historical"].is_null())
      e.historical_name = j["name_historical"].get<std::string>();
    if (j.contains("name_normalized") && !j["name_normalized"].is_null())
      e.normalized_name = j["name_normalized"].get<std::string>();
    if (j.contains("note") && !j["note"].is_null()) e.note = j["note"].get<std::string>();
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& ex) {
    throw std::invalid_argument(ex.what());
  }
  return e;
}

Engine::Engine(std::string crs) : registry_(std::move(crs)) { bootstrap(); }

Engine::~Engine() = default;

void Engine::bootstrap() {
  edit_process_ = registry_.register_process(
      {{}, kEditProcessName, "correction made by a user on a geocoding result", 0.0});
  edit_gazetteer_ = registry_.create_mixed_gazetteer(kEditGazetteerName);
}

std::unique_ptr<Engine> Engine::open(const fs::path& data_dir, std::string crs, ReplayReport* report) {
  fs::create_directories(data_dir);
  std::optional<json> snapshot;
  if (fs::exists(data_dir / kSnapshotFile)) {
    try {
      snapshot = json::parse(read_text_file(data_dir / kSnapshotFile));
    } catch (const json::exception& e) {
      throw JournalError(std::string("unreadable snapshot: ") + e.what());
    }
    crs = snapshot->at("crs").get<std::string>();
  }
  auto engine = std::make_unique<Engine>(crs);
  engine->replaying_ = true;
  if (snapshot) engine->load_state(*snapshot);

  ReplayReport rep;
  const fs::path journal_path = data_dir / kJournalFile;
  std::string text = fs::exists(journal_path) ? read_text_file(journal_path) : std::string();
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const auto nl = text.find('\n', pos);
    std::string reason;
    if (nl == std::string::npos) {
      reason = "truncated entry";
    } else {
      const std::string_view line(text.data() + pos, nl - pos);
      if (line.size() < 10 || line[8] != ' ') {
        reason = "malformed entry";
      } else {
        const std::string_view body = line.substr(9);
        if (crc_hex(crc32(body)) != line.substr(0, 8)) {
          reason = "checksum mismatch";
        } else {
          try {
            engine->apply(json::parse(body));
          } catch (const std::exception& e) {
            reason = std::string("entry rejected: ") + e.what();
          }
        }
      }
    }
    if (!reason.empty()) {
      rep.complete = false;
      rep.stopped_at_line = line_no;
      rep.reason = reason;
      // Keep the damaged tail aside and continue from the valid prefix.
      std::ofstream(data_dir / "journal.rejected", std::ios::binary | std::ios::app) << text.substr(pos);
      text.resize(pos);
      std::ofstream(journal_path, std::ios::binary | std::ios::trunc) << text;
      break;
    }
    ++rep.applied;
    pos = nl + 1;
  }
  engine->replaying_ = false;
  engine->journal_entries_ = rep.applied;
  engine->attach(data_dir);
  if (report) *report = rep;
  return engine;
}

void Engine::attach(const fs::path& data_dir) {
  data_dir_ = data_dir;
  journal_.open(data_dir / kJournalFile, std::ios::binary | std::ios::app);
  if (!journal_) throw JournalError("cannot open journal in " + data_dir.string());
}

void Engine::append(const json& entry) {
  if (replaying_ || !data_dir_) return;
  const std::string body = entry.dump();
  journal_ << crc_hex(crc32(body)) << ' ' << body << '\n';
  journal_.flush();
  if (!journal_) throw JournalError("journal write failed");
  ++journal_entries_;
}

void Engine::apply(const json& entry) {
  const std::string op = entry.at("op").get<std::string>();
  if (op == "register_source") {
    registry_.register_source(source_from_json(entry.at("source")));
  } else if (op == "register_process") {
    registry_.register_process(process_from_json(entry.at("process")));
  } else if (op == "create_gazetteer") {
    registry_.create_gazetteer(entry.at("name").get<std::string>(),
                               parse_scale_class(entry.at("scale_class").get<std::string>()));
  } else if (op == "insert") {
    std::vector<GeoHistoricalObject> objects;
    for (const auto& o : entry.at("objects")) objects.push_back(object_from_json(o, registry_.crs()));
    registry_.insert_objects(GazetteerId{entry.at("gazetteer").get<std::uint64_t>()}, std::move(objects));
  } else if (op == "persist") {
    std::unique_lock lock(results_mutex_);
    auto& ids = by_ruid_[entry.at("ruid").get<std::string>()];
    for (const auto& rj : entry.at("records")) {
      ResultRecord r = record_from_json(rj);
      if (records_.count(r.id)) throw JournalError("duplicate result id " + std::to_string(r.id));
      next_result_id_ = std::max(next_result_id_, r.id + 1);
      ids.push_back(r.id);
      records_.emplace(r.id, std::move(r));
    }
  } else if (op == "edit") {
    apply_edit(entry);
  } else {
    throw JournalError("unknown operation '" + op + "'");
  }
}

ObjectId Engine::apply_edit(const json& entry) {
  const std::string ruid = entry.at("ruid").get<std::string>();
  const auto result_id = entry.at("result_id").get<std::uint64_t>();
  {
    std::shared_lock lock(results_mutex_);
    auto it = records_.find(result_id);
    if (it == records_.end() || it->second.ruid != ruid) throw JournalError("edit of an unknown result");
  }
  const ObjectId id = registry_.insert_objects(edit_gazetteer_, {object_from_json(entry.at("object"), registry_.crs())})[0];
  std::unique_lock lock(results_mutex_);
  records_[result_id].edited = true;
  edits_.push_back({ruid, result_id, id, entry.value("note", ""), entry.at("created_at").get<std::string>()});
  return id;
}

SourceId Engine::register_source(HistoricalSource s) {
  std::lock_guard lock(write_mutex_);
  const SourceId id = registry_.register_source(s);
  s.id = id;
  append({{"op", "register_source"}, {"source", source_to_json(s)}});
  return id;
}

ProcessId Engine::register_process(NumericalOriginProcess p) {
  std::lock_guard lock(write_mutex_);
  const ProcessId id = registry_.register_process(p);
  p.id = id;
  append({{"op", "register_process"}, {"process", process_to_json(p)}});
  return id;
}

GazetteerId Engine::create_gazetteer(std::string name, ScaleClass scale_class) {
  std::lock_guard lock(write_mutex_);
  const GazetteerId id = registry_.create_gazetteer(name, scale_class);
  append({{"op", "create_gazetteer"}, {"name", name}, {"scale_class", to_string(scale_class)}});
  return id;
}

std::vector<ObjectId> Engine::insert_objects(GazetteerId gazetteer, std::vector<GeoHistoricalObject> objects) {
  std::lock_guard lock(write_mutex_);
  json list = json::array();
  for (const auto& o : objects) list.push_back(object_to_json(o));
  auto ids = registry_.insert_objects(gazetteer, std::move(objects));
  append({{"op", "insert"}, {"gazetteer", gazetteer.value}, {"objects", std::move(list)}});
  return ids;
}

std::string Engine::persist_results(const std::vector<PersistRow>& rows) {
  std::lock_guard lock(write_mutex_);
  std::string ruid = make_ruid();
  {
    std::shared_lock rlock(results_mutex_);
    while (by_ruid_.count(ruid)) ruid = make_ruid();
  }
  const std::string now = utc_now();
  std::uint64_t next = next_result_id_;
  json records = json::array();
  for (const auto& row : rows) {
    auto add = [&](const GeocodeResult* r) {
      ResultRecord rec;
      rec.id = next++;
      rec.ruid = ruid;
      rec.row_index = row.row_index;
      rec.query = row.query;
      rec.created_at = now;
      if (r) {
        rec.result = result_to_json(*r);
        rec.object = r->object.id;
        rec.result["result_id"] = rec.id;
      }
      records.push_back(record_to_json(rec));
    };
    if (row.results.empty()) add(nullptr);
    for (const auto& r : row.results) add(&r);
  }
  json entry = {{"op", "persist"}, {"ruid", ruid}, {"created_at", now}, {"records", std::move(records)}};
  apply(entry);
  append(entry);
  return ruid;
}

std::optional<std::vector<ResultRecord>> Engine::results(const std::string& ruid) const {
  std::shared_lock lock(results_mutex_);
  auto it = by_ruid_.find(ruid);
  if (it == by_ruid_.end()) return std::nullopt;
  std::vector<ResultRecord> out;
  out.reserve(it->second.size());
  for (auto id : it->second) out.push_back(records_.at(id));
  return out;
}

ObjectId Engine::edit_result(const std::string& ruid, std::uint64_t result_id, const EditRequest& edit) {
  std::lock_guard lock(write_mutex_);
  std::optional<ObjectId> target;
  {
    std::shared_lock rlock(results_mutex_);
    auto it = records_.find(result_id);
    if (it == records_.end()) throw EditRejected(404, "unknown result id " + std::to_string(result_id));
    if (it->second.ruid != ruid) throw EditRejected(403, "result " + std::to_string(result_id) + " is not in " + ruid);
    target = it->second.object;
  }
  if (!target) throw EditRejected(400, "result has no geocoded object to edit");
  if (!edit.geometry && !edit.period && !edit.historical_name && !edit.normalized_name) {
    throw EditRejected(400, "edit changes nothing");
  }
  const auto stored = registry_.find_object(*target);
  if (!stored) throw EditRejected(404, "object " + std::to_string(target->value) + " not found");

  GeoHistoricalObject o = stored->object;
  o.id = {};
  o.process = edit_process_;
  if (edit.geometry) o.geometry = *edit.geometry;
  if (edit.period) o.period = *edit.period;
  if (edit.historical_name) {
    o.historical_name = *edit.historical_name;
    if (!edit.normalized_name) o.normalized_name = normalize(o.historical_name).normalized;
  }
  if (edit.normalized_name) o.normalized_name = *edit.normalized_name;
  if (o.geometry.crs().empty()) o.geometry = o.geometry.with_crs(registry_.crs());
  try {
    registry_.validate(edit_gazetteer_, o);
  } catch (const RegistryError& e) {
    throw EditRejected(400, e.what());
  }
  const json entry = {{"op", "edit"},
                      {"ruid", ruid},
                      {"result_id", result_id},
                      {"object", object_to_json(o)},
                      {"note", edit.note.value_or("")},
                      {"created_at", utc_now()}};
  const ObjectId id = apply_edit(entry);
  append(entry);
  return id;
}

json Engine::canonical_state() const {
  json sources = json::array();
  for (const auto& s : registry_.sources()) sources.push_back(source_to_json(s));
  json processes = json::array();
  for (const auto& p : registry_.processes()) processes.push_back(process_to_json(p));
  json gazetteers = json::array();
  for (const auto& g : registry_.gazetteers()) gazetteers.push_back(gazetteer_to_json(g));
  json objects = json::array();
  for (const auto& s : registry_.objects()) {
    objects.push_back({{"gazetteer", s->gazetteer.value}, {"object", object_to_json(s->object)}});
  }
  json results = json::array();
  json edits = json::array();
  std::uint64_t next = 0;
  {
    std::shared_lock lock(results_mutex_);
    for (const auto& [id, r] : records_) results.push_back(record_to_json(r));
    for (const auto& e : edits_) {
      edits.push_back({{"ruid", e.ruid},
                       {"result_id", e.result_id},
                       {"object", e.object.value},
                       {"note", e.note},
                       {"created_at", e.created_at}});
    }
    next = next_result_id_;
  }
  return {{"crs", registry_.crs()},       {"sources", sources}, {"processes", processes},
          {"gazetteers", gazetteers},     {"objects", objects}, {"results", results},
          {"edits", edits},               {"next_result_id", next}};
}

std::string Engine::state_hash() const { return sha256_hex(canonical_state().dump()); }

void Engine::load_state(const json& state) {
  for (const auto& sj : state.at("sources")) {
    const auto s = source_from_json(sj);
    if (registry_.register_source(s) != s.id) throw JournalError("snapshot source ids are not sequential");
  }
  for (const auto& pj : state.at("processes")) {
    const auto p = process_from_json(pj);
    if (registry_.process(p.id) && p.name == kEditProcessName) continue;
    if (registry_.register_process(p) != p.id) throw JournalError("snapshot process ids are not sequential");
  }
  for (const auto& gj : state.at("gazetteers")) {
    const GazetteerId id{gj.at("id").get<std::uint64_t>()};
    const auto name = gj.at("name").get<std::string>();
    if (name == kEditGazetteerName) continue;
    const auto cls = parse_scale_class(gj.at("scale_class").get<std::string>());
    const GazetteerId got =
        gj.value("mixed", false) ? registry_.create_mixed_gazetteer(name) : registry_.create_gazetteer(name, cls);
    if (got != id) throw JournalError("snapshot gazetteer ids are not sequential");
  }
  // Consecutive objects of one gazetteer go in as one batch.
  const auto& objs = state.at("objects");
  std::size_t i = 0;
  while (i < objs.size()) {
    const GazetteerId g{objs[i].at("gazetteer").get<std::uint64_t>()};
    std::vector<GeoHistoricalObject> batch;
    std::vector<ObjectId> expected;
    for (; i < objs.size() && objs[i].at("gazetteer").get<std::uint64_t>() == g.value; ++i) {
      batch.push_back(object_from_json(objs[i].at("object"), registry_.crs()));
      expected.push_back(batch.back().id);
    }
    if (registry_.insert_objects(g, std::move(batch)) != expected) {
      throw JournalError("snapshot object ids are not sequential");
    }
  }
  std::unique_lock lock(results_mutex_);
  for (const auto& rj : state.at("results")) {
    ResultRecord r = record_from_json(rj);
    by_ruid_[r.ruid].push_back(r.id);
    records_.emplace(r.id, std::move(r));
  }
  for (const auto& ej : state.at("edits")) {
    edits_.push_back({ej.at("ruid").get<std::string>(), ej.at("result_id").get<std::uint64_t>(),
                      ObjectId{ej.at("object").get<std::uint64_t>()}, ej.at("note").get<std::string>(),
                      ej.at("created_at").get<std::string>()});
  }
  next_result_id_ = state.at("next_result_id").get<std::uint64_t>();
}

void Engine::save_snapshot() {
  std::lock_guard lock(write_mutex_);
  if (!data_dir_) throw JournalError("engine has no data directory");
  const fs::path tmp = *data_dir_ / (std::string(kSnapshotFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << canonical_state().dump();
    out.flush();
    if (!out) throw JournalError("snapshot write failed");
  }
  fs::rename(tmp, *data_dir_ / kSnapshotFile);
  journal_.close();
  journal_.open(*data_dir_ / kJournalFile, std::ios::binary | std::ios::trunc);
  if (!journal_) throw JournalError("cannot reopen journal");
  journal_entries_ = 0;
}

std::size_t Engine::journal_entries() const { return journal_entries_; }

void Engine::flush() {
  std::lock_guard lock(write_mutex_);
  if (journal_.is_open()) journal_.flush();
}

}  // namespace histgeo
