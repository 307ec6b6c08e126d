#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "histgeo/gazetteer.hpp"
#include "histgeo/geocoder.hpp"

namespace histgeo {

inline constexpr const char* kEditProcessName = "collaborative edit";
inline constexpr const char* kEditGazetteerName = "user_edit_added_to_geocoding";

/// One persisted geocoding result (or an unmatched row, with no result).
struct ResultRecord {
  std::uint64_t id = 0;  // unique across all ruids
  std::string ruid;
  std::size_t row_index = 0;
  nlohmann::json query;
  nlohmann::json result;                 // result_to_json snapshot, null when unmatched
  std::optional<ObjectId> object;        // the geocoded object
  std::string created_at;
  bool edited = false;
};

/// What to persist for one input row.
struct PersistRow {
  std::size_t row_index = 0;
  nlohmann::json query;
  std::vector<GeocodeResult> results;
};

struct EditRequest {
  std::optional<Geometry> geometry;
  std::optional<FuzzyPeriod> period;
  std::optional<std::string> historical_name;
  std::optional<std::string> normalized_name;
  std::optional<std::string> note;

  /// Parses the REST edit body; throws std::invalid_argument.
  static EditRequest from_json(const nlohmann::json& j, const std::string& default_crs);
};

/// Refused edit carrying the HTTP status it maps to (400, 403 or 404).
class EditRejected : public std::runtime_error {
public:
  EditRejected(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
  int status() const { return status_; }

private:
  int status_;
};

class JournalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ReplayReport {
  std::size_t applied = 0;
  bool complete = true;
  std::size_t stopped_at_line = 0;  // 1-based, when !complete
  std::string reason;
};

/// Registry plus result store behind a snapshot + append-only journal.
///
/// Every mutation is applied and then appended to <data_dir>/journal.log as
/// "<crc32 hex> <json>\n". Opening a data directory loads snapshot.json and
/// replays the journal up to the first damaged entry. Without a data
/// directory the engine keeps everything in memory.
class Engine {
public:
  explicit Engine(std::string crs = "local");
  /// Loads and replays; the report says where replay stopped, if it did.
  static std::unique_ptr<Engine> open(const std::filesystem::path& data_dir, std::string crs = "local",
                                      ReplayReport* report = nullptr);
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const GazetteerRegistry& registry() const { return registry_; }
  ProcessId edit_process() const { return edit_process_; }
  GazetteerId edit_gazetteer() const { return edit_gazetteer_; }

  SourceId register_source(HistoricalSource s);
  ProcessId register_process(NumericalOriginProcess p);
  GazetteerId create_gazetteer(std::string name, ScaleClass scale_class);
  std::vector<ObjectId> insert_objects(GazetteerId gazetteer, std::vector<GeoHistoricalObject> objects);

  /// Stores rows under a fresh random ruid and returns it.
  std::string persist_results(const std::vector<PersistRow>& rows);
  std::optional<std::vector<ResultRecord>> results(const std::string& ruid) const;

  /// Appends an edited copy of the result's object to the edit gazetteer.
  /// Throws EditRejected: 404 unknown result id, 403 result held by another
  /// ruid, 400 nothing to edit or an invalid edit.
  ObjectId edit_result(const std::string& ruid, std::uint64_t result_id, const EditRequest& edit);

  /// Canonical JSON of the whole state; equal states dump identically.
  nlohmann::json canonical_state() const;
  /// SHA-256 hex of canonical_state().dump().
  std::string state_hash() const;

  /// Writes snapshot.json atomically and empties the journal.
  void save_snapshot();
  std::size_t journal_entries() const;
  void flush();

private:
  struct EditLog {
    std::string ruid;
    std::uint64_t result_id = 0;
    ObjectId object;
    std::string note;
    std::string created_at;
  };

  void bootstrap();
  void attach(const std::filesystem::path& data_dir);
  void append(const nlohmann::json& entry);
  void apply(const nlohmann::json& entry);
  void load_state(const nlohmann::json& state);
  ObjectId apply_edit(const nlohmann::json& entry);

  GazetteerRegistry registry_;
  ProcessId edit_process_;
  GazetteerId edit_gazetteer_;

  mutable std::shared_mutex results_mutex_;
  std::map<std::string, std::vector<std::uint64_t>> by_ruid_;
  std::map<std::uint64_t, ResultRecord> records_;
  std::uint64_t next_result_id_ = 1;
  std::vector<EditLog> edits_;

  std::mutex write_mutex_;  // serializes mutations and journal appends
  std::optional<std::filesystem::path> data_dir_;
  std::ofstream journal_;
  std::size_t journal_entries_ = 0;
  bool replaying_ = false;
};

/// SHA-256 hex of object_to_json(o).dump().
std::string object_hash(const GeoHistoricalObject& o);

/// 128 random bits as 32 lowercase hex characters.
std::string make_ruid();

/// CRC-32 (IEEE) of `text`.
std::uint32_t crc32(std::string_view text);

}  // namespace histgeo
