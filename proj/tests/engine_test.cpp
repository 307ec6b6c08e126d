#include "histgeo/engine.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "engine_world.hpp"
#include "histgeo/ingest.hpp"

namespace histgeo {
namespace {

using testing::EngineCatalog;
using testing::TempDir;

GeocodeQuery query(const std::string& address, std::size_t k = 1) {
  GeocodeQuery q;
  q.raw_address = address;
  q.max_results = k;
  return q;
}

std::string persist_query(Engine& e, const std::string& address, std::size_t k = 1) {
  const auto q = query(address, k);
  return e.persist_results({{0, {{"address", address}}, geocode(q, e.registry())}});
}

std::vector<std::string> journal_lines(const std::filesystem::path& dir) {
  std::istringstream in(read_text_file(dir / "journal.log"));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

void write_journal(const std::filesystem::path& dir, const std::vector<std::string>& lines, std::size_t n,
                   const std::string& tail = {}) {
  std::ofstream out(dir / "journal.log", std::ios::binary | std::ios::trunc);
  for (std::size_t i = 0; i < n; ++i) out << lines[i] << '\n';
  out << tail;
}

TEST(Engine, BuiltinsExist) {
  Engine e;
  EXPECT_EQ(e.registry().process(e.edit_process())->name, "collaborative edit");
  const auto g = e.registry().gazetteer(e.edit_gazetteer());
  EXPECT_EQ(g->name, "user_edit_added_to_geocoding");
  EXPECT_TRUE(g->mixed);
  EXPECT_EQ(e.registry().object_count(), 0u);
}

TEST(Engine, RuidsAreRandomHex) {
  std::set<std::string> seen;
  for (int i = 0; i < 200; ++i) {
    const auto r = make_ruid();
    ASSERT_EQ(r.size(), 32u);
    EXPECT_EQ(r.find_first_not_of("0123456789abcdef"), std::string::npos);
    seen.insert(r);
  }
  EXPECT_EQ(seen.size(), 200u);
}

TEST(Engine, PersistTwiceGivesDistinctRuids) {
  Engine e;
  EngineCatalog c(e);
  e.insert_objects(c.numbers, {c.point("12 rue du temple", {1, 2})});
  const auto a = persist_query(e, "12 rue du temple");
  const auto b = persist_query(e, "12 rue du temple");
  EXPECT_NE(a, b);
  const auto ra = e.results(a);
  ASSERT_TRUE(ra);
  ASSERT_EQ(ra->size(), 1u);
  EXPECT_EQ((*ra)[0].ruid, a);
  EXPECT_TRUE((*ra)[0].result.is_object());
  EXPECT_NE((*ra)[0].id, (*e.results(b))[0].id);
  EXPECT_FALSE(e.results("0123"));
}

TEST(Engine, UnmatchedRowIsRecordedWithoutResult) {
  Engine e;
  EngineCatalog c(e);
  const auto ruid = e.persist_results({{0, {{"address", "nowhere"}}, {}}});
  const auto r = *e.results(ruid);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_TRUE(r[0].result.is_null());
  EXPECT_FALSE(r[0].object);
  EditRequest edit;
  edit.geometry = Geometry::point({0, 0});
  try {
    e.edit_result(ruid, r[0].id, edit);
    FAIL();
  } catch (const EditRejected& ex) {
    EXPECT_EQ(ex.status(), 400);
  }
}

TEST(Engine, EditCreatesCopyInEditGazetteer) {
  Engine e;
  EngineCatalog c(e);
  const auto original = e.insert_objects(c.numbers, {c.point("12 rue du temple", {1, 2})})[0];
  const auto before = object_hash(e.registry().find_object(original)->object);
  const auto ruid = persist_query(e, "12 rue du temple");
  const auto rec = (*e.results(ruid))[0];

  EditRequest edit;
  edit.geometry = Geometry::point({40, 50});
  edit.note = "moved to the corner";
  const ObjectId created = e.edit_result(ruid, rec.id, edit);

  EXPECT_EQ(object_hash(e.registry().find_object(original)->object), before);
  const auto stored = e.registry().find_object(created);
  ASSERT_TRUE(stored);
  EXPECT_EQ(stored->gazetteer, e.edit_gazetteer());
  EXPECT_EQ(stored->object.process, e.edit_process());
  EXPECT_EQ(stored->object.source, c.atlas);
  EXPECT_EQ(stored->object.historical_name, "12 rue du temple");
  EXPECT_EQ(stored->object.geometry.components()[0][0][0].x, 40.0);
  EXPECT_TRUE((*e.results(ruid))[0].edited);

  // Both versions come back as distinct candidates.
  const auto again = geocode(query("12 rue du temple", 5), e.registry());
  std::set<std::uint64_t> ids;
  for (const auto& r : again) ids.insert(r.object.id.value);
  EXPECT_TRUE(ids.count(original.value));
  EXPECT_TRUE(ids.count(created.value));
}

TEST(Engine, EditNameRenormalizes) {
  Engine e;
  EngineCatalog c(e);
  e.insert_objects(c.numbers, {c.point("12 rue du temple", {1, 2})});
  const auto ruid = persist_query(e, "12 rue du temple");
  EditRequest edit;
  edit.historical_name = "12 R. du Temple";
  const auto id = e.edit_result(ruid, (*e.results(ruid))[0].id, edit);
  EXPECT_EQ(e.registry().find_object(id)->object.normalized_name, "12 rue du temple");
}

TEST(Engine, EditRefusals) {
  Engine e;
  EngineCatalog c(e);
  e.insert_objects(c.numbers, {c.point("12 rue du temple", {1, 2})});
  const auto ruid = persist_query(e, "12 rue du temple");
  const auto other = persist_query(e, "12 rue du temple");
  const auto id = (*e.results(ruid))[0].id;
  const auto hash = e.state_hash();
  const auto count = e.registry().object_count();

  EditRequest edit;
  edit.geometry = Geometry::point({0, 0});
  auto status = [&](const std::string& r, std::uint64_t i, const EditRequest& ed) {
    try {
      e.edit_result(r, i, ed);
    } catch (const EditRejected& ex) {
      return ex.status();
    }
    return 200;
  };
  EXPECT_EQ(status(other, id, edit), 403);
  EXPECT_EQ(status("ffffffffffffffffffffffffffffffff", id, edit), 403);
  EXPECT_EQ(status(ruid, 999, edit), 404);
  EXPECT_EQ(status(ruid, id, EditRequest{}), 400);
  EditRequest bad;
  bad.geometry = Geometry::point({0, 0}, "EPSG:2154");
  EXPECT_EQ(status(ruid, id, bad), 400);
  EXPECT_EQ(e.state_hash(), hash);
  EXPECT_EQ(e.registry().object_count(), count);
}

TEST(Engine, EditRequestFromJson) {
  const auto e = EditRequest::from_json(
      {{"geometry", {{"type", "Point"}, {"coordinates", {1, 2}}}}, {"period", "1850"}, {"note", "n"}}, "local");
  ASSERT_TRUE(e.geometry);
  ASSERT_TRUE(e.period);
  EXPECT_EQ(e.period->a(), 1850);
  EXPECT_EQ(*e.note, "n");
  EXPECT_FALSE(e.historical_name);
  EXPECT_THROW(EditRequest::from_json(nlohmann::json::array(), "local"), std::invalid_argument);
  EXPECT_THROW(EditRequest::from_json({{"period", "not a date"}}, "local"), std::invalid_argument);
  EXPECT_THROW(EditRequest::from_json({{"geometry", {{"type", "Blob"}}}}, "local"), std::invalid_argument);
}

TEST(Persistence, EmptyDirectoryGivesEmptyRegistry) {
  TempDir dir;
  ReplayReport rep;
  auto e = Engine::open(dir.path(), "local", &rep);
  EXPECT_TRUE(rep.complete);
  EXPECT_EQ(rep.applied, 0u);
  EXPECT_EQ(e->registry().object_count(), 0u);
  EXPECT_EQ(e->registry().sources().size(), 0u);
  EXPECT_EQ(e->state_hash(), Engine().state_hash());

  // Empty files behave the same.
  e.reset();
  std::ofstream(dir.path() / "journal.log").close();
  e = Engine::open(dir.path(), "local", &rep);
  EXPECT_TRUE(rep.complete);
  EXPECT_EQ(e->state_hash(), Engine().state_hash());
}

TEST(Persistence, SaveMutateReplay) {
  TempDir dir;
  std::string hash;
  {
    auto e = Engine::open(dir.path());
    EngineCatalog c(*e);
    e->insert_objects(c.numbers, {c.point("12 rue du temple", {1, 2}), c.point("3 rue du bac", {5, 5})});
    const auto ruid = persist_query(*e, "12 rue du temple");
    e->save_snapshot();
    EXPECT_EQ(e->journal_entries(), 0u);
    e->insert_objects(c.numbers, {c.point("7 quai voltaire", {9, 9})});
    EditRequest edit;
    edit.geometry = Geometry::point({3, 3});
    e->edit_result(ruid, (*e->results(ruid))[0].id, edit);
    persist_query(*e, "3 rue du bac");
    hash = e->state_hash();
  }
  ReplayReport rep;
  auto e = Engine::open(dir.path(), "local", &rep);
  EXPECT_TRUE(rep.complete);
  EXPECT_EQ(rep.applied, 3u);
  EXPECT_EQ(e->state_hash(), hash);
  EXPECT_EQ(e->canonical_state().dump(), Engine::open(dir.path())->canonical_state().dump());

  // Snapshotting the replayed engine changes nothing.
  e->save_snapshot();
  e.reset();
  EXPECT_EQ(Engine::open(dir.path())->state_hash(), hash);
}

TEST(Persistence, TruncatedLastEntry) {
  TempDir dir;
  std::string hash_before_last;
  {
    auto e = Engine::open(dir.path());
    EngineCatalog c(*e);
    e->insert_objects(c.numbers, {c.point("12 rue du temple", {1, 2})});
    hash_before_last = e->state_hash();
    e->insert_objects(c.numbers, {c.point("3 rue du bac", {5, 5})});
  }
  const auto lines = journal_lines(dir.path());
  ASSERT_EQ(lines.size(), 6u);
  write_journal(dir.path(), lines, 5, lines[5].substr(0, lines[5].size() / 2));

  ReplayReport rep;
  auto e = Engine::open(dir.path(), "local", &rep);
  EXPECT_FALSE(rep.complete);
  EXPECT_EQ(rep.applied, 5u);
  EXPECT_EQ(rep.stopped_at_line, 6u);
  EXPECT_EQ(rep.reason, "truncated entry");
  EXPECT_EQ(e->state_hash(), hash_before_last);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "journal.rejected"));

  // The damaged tail is gone, so later entries replay.
  e->register_source({{}, "Verniquet plan", "", parse_fuzzy_date("1790"), 10.0});
  const auto hash = e->state_hash();
  e.reset();
  e = Engine::open(dir.path(), "local", &rep);
  EXPECT_TRUE(rep.complete);
  EXPECT_EQ(e->state_hash(), hash);
}

TEST(Persistence, ChecksumMismatchStopsReplay) {
  TempDir dir;
  {
    auto e = Engine::open(dir.path());
    EngineCatalog c(*e);
    e->insert_objects(c.numbers, {c.point("12 rue du temple", {1, 2})});
  }
  auto lines = journal_lines(dir.path());
  const auto pos = lines[1].find("manual");
  ASSERT_NE(pos, std::string::npos);
  lines[1][pos] = 'M';
  write_journal(dir.path(), lines, lines.size());
  ReplayReport rep;
  auto e = Engine::open(dir.path(), "local", &rep);
  EXPECT_FALSE(rep.complete);
  EXPECT_EQ(rep.stopped_at_line, 2u);
  EXPECT_EQ(rep.reason, "checksum mismatch");
  EXPECT_EQ(rep.applied, 1u);
  EXPECT_EQ(e->registry().sources().size(), 1u);
  EXPECT_EQ(e->registry().object_count(), 0u);
}

TEST(Persistence, EntryWithValidChecksumButBadContent) {
  TempDir dir;
  const std::string body = R"({"op":"rename","gazetteer":1})";
  std::ofstream(dir.path() / "journal.log") << std::hex << std::setw(8) << std::setfill('0') << crc32(body) << ' '
                                            << body << '\n';
  ReplayReport rep;
  Engine::open(dir.path(), "local", &rep);
  EXPECT_FALSE(rep.complete);
  EXPECT_EQ(rep.stopped_at_line, 1u);
  EXPECT_EQ(rep.reason.rfind("entry rejected", 0), 0u);
}

TEST(Persistence, Crc32KnownValue) { EXPECT_EQ(crc32("123456789"), 0xCBF43926u); }

// Replaying any prefix of the journal gives the state at that prefix.
TEST(Persistence, EveryPrefixReplaysToItsState) {
  TempDir dir;
  std::vector<std::string> hashes;
  std::mt19937_64 rng(11);
  {
    auto e = Engine::open(dir.path());
    hashes.push_back(e->state_hash());
    EngineCatalog c(*e);
    for (int i = 0; i < 4; ++i) hashes.push_back("");  // catalog entries, checked below
    std::vector<std::string> ruids;
    for (int step = 0; step < 30; ++step) {
      const int op = static_cast<int>(rng() % 3);
      if (op == 0 || ruids.empty()) {
        const std::string name = std::to_string(rng() % 40) + " rue du temple";
        e->insert_objects(c.numbers, {c.point(name, {double(rng() % 100), double(rng() % 100)})});
      } else if (op == 1) {
        ruids.push_back(persist_query(*e, std::to_string(rng() % 40) + " rue du temple", 2));
      } else {
        const auto& ruid = ruids[rng() % ruids.size()];
        const auto recs = *e->results(ruid);
        const auto& rec = recs[rng() % recs.size()];
        if (!rec.object) continue;
        EditRequest edit;
        edit.geometry = Geometry::point({double(rng() % 100), double(rng() % 100)});
        e->edit_result(ruid, rec.id, edit);
      }
      hashes.push_back(e->state_hash());
    }
  }
  const auto lines = journal_lines(dir.path());
  ASSERT_EQ(lines.size() + 1, hashes.size());
  for (std::size_t k = 0; k <= lines.size(); ++k) {
    TempDir copy;
    write_journal(copy.path(), lines, k);
    ReplayReport rep;
    auto e = Engine::open(copy.path(), "local", &rep);
    ASSERT_TRUE(rep.complete);
    if (!hashes[k].empty()) EXPECT_EQ(e->state_hash(), hashes[k]) << "prefix " << k;
  }
}

}  // namespace
}  // namespace histgeo
