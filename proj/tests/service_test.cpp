#include "histgeo/service.hpp"

#include <fstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "engine_world.hpp"
#include "histgeo/csv.hpp"

namespace histgeo {
namespace {

using nlohmann::json;
using testing::EngineCatalog;
using testing::TempDir;

int status_of(const Params& p) {
  try {
    parse_geocode_params(p, GeocodeQuery{});
  } catch (const RequestError& e) {
    return e.status();
  }
  return 200;
}

TEST(GeocodeParams, MapOntoQuery) {
  const auto r = parse_geocode_params(
      {{"address", "12 rue du temple"}, {"date", "1850"}, {"precision", "true"}, {"maxresults", "3"},
       {"maxdist", "0.5"}, {"scoring", "100*w_d"}, {"persist", "true"}},
      GeocodeQuery{});
  EXPECT_EQ(r.query.raw_address, "12 rue du temple");
  EXPECT_EQ(r.query.period->a(), 1850);
  EXPECT_FALSE(r.query.allow_rough_fallback);
  EXPECT_EQ(r.query.max_results, 3u);
  EXPECT_EQ(r.query.max_string_distance, 0.5);
  EXPECT_TRUE(r.query.scoring);
  EXPECT_TRUE(r.persist);

  const auto d = parse_geocode_params({{"address", "x"}, {"precision", "false"}}, GeocodeQuery{});
  EXPECT_TRUE(d.query.allow_rough_fallback);
  EXPECT_FALSE(d.query.period);
  EXPECT_FALSE(d.persist);
  EXPECT_EQ(d.query.max_string_distance, 0.3);
}

TEST(GeocodeParams, Errors) {
  EXPECT_EQ(status_of({}), 400);
  EXPECT_EQ(status_of({{"address", "  "}}), 400);
  EXPECT_EQ(status_of({{"address", "x"}, {"date", "185O"}}), 400);
  EXPECT_EQ(status_of({{"address", "x"}, {"maxresults", "0"}}), 400);
  EXPECT_EQ(status_of({{"address", "x"}, {"maxdist", "1.5"}}), 400);
  EXPECT_EQ(status_of({{"address", "x"}, {"maxdist", "abc"}}), 400);
  EXPECT_EQ(status_of({{"address", "x"}, {"precision", "maybe"}}), 400);
  try {
    parse_geocode_params({{"address", "x"}, {"scoring", "w_d + * 2"}}, GeocodeQuery{});
    FAIL();
  } catch (const RequestError& e) {
    EXPECT_EQ(e.status(), 400);
    ASSERT_TRUE(e.position());
    EXPECT_EQ(*e.position(), 6u);
    EXPECT_EQ(e.body()["position"], 6);
  }
}

TEST(Config, FromJsonAndEnv) {
  const auto c = Config::from_json({{"port", 9000}, {"maxdist", 0.5}, {"scoring", "100*w_d"}, {"scale_low", 2}});
  EXPECT_EQ(c.port, 9000);
  EXPECT_EQ(c.maxdist, 0.5);
  EXPECT_EQ(*c.scale_low, 2.0);
  EXPECT_EQ(c.listen, "127.0.0.1");
  EXPECT_TRUE(c.query_defaults().scoring);
  EXPECT_EQ(c.query_defaults().max_string_distance, 0.5);

  Config e = c;
  const std::map<std::string, std::string> env = {
      {"HISTGEO_PORT", "8181"}, {"HISTGEO_DATA_DIR", "/tmp/x"}, {"HISTGEO_MAXDIST", "0.4"}, {"HISTGEO_BATCH_JOBS", "4"}};
  e.apply_env([&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  EXPECT_EQ(e.port, 8181);
  EXPECT_EQ(e.data_dir, "/tmp/x");
  EXPECT_EQ(e.maxdist, 0.4);
  EXPECT_EQ(e.batch_jobs, 4u);
  EXPECT_EQ(e.scoring, "100*w_d");
  EXPECT_EQ(Config::from_json(e.to_json()).to_json(), e.to_json());
}

TEST(Config, Errors) {
  EXPECT_THROW(Config::from_json({{"prot", 1}}), ConfigError);
  EXPECT_THROW(Config::from_json({{"port", "x"}}), ConfigError);
  EXPECT_THROW(Config::from_json({{"maxdist", 2}}), ConfigError);
  EXPECT_THROW(Config::from_json({{"scoring", "w_d +"}}).query_defaults(), ConfigError);
  Config c;
  EXPECT_THROW(c.apply_env([](const char* n) -> const char* { return std::string(n) == "HISTGEO_PORT" ? "80a" : nullptr; }),
               ConfigError);
  EXPECT_THROW(
      c.apply_env([](const char* n) -> const char* { return std::string(n) == "HISTGEO_MAXRESULTS" ? "2.5" : nullptr; }),
      ConfigError);
}

struct World {
  Engine engine;
  EngineCatalog catalog{engine};
  ObjectId temple;
  ObjectId bac;

  World() {
    const auto ids = engine.insert_objects(
        catalog.numbers, {catalog.point("12 rue du temple", {100, 200}), catalog.point("3 rue du bac", {10, 20})});
    temple = ids[0];
    bac = ids[1];
  }
};

TEST(BatchCsv, PreservesInputAndAppendsColumns) {
  World w;
  const std::string input =
      "id,address,date,note\r\n"
      "1,12 rue du temple,1850,\"a, \"\"quoted\"\" note\"\r\n"
      "2,zzzz qqqq,,\r\n"
      "3,3 Rue du Bac,bad date,x\r\n";
  const auto out = run_batch_csv(input, {}, GeocodeQuery{}, w.engine);
  const auto in_rows = parse_csv(input);
  const auto out_rows = parse_csv(out.csv);
  ASSERT_EQ(out_rows.size(), 4u);
  const auto& cols = batch_output_columns();
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(out_rows[i].raw.substr(0, in_rows[i].raw.size()), in_rows[i].raw);
    ASSERT_EQ(out_rows[i].fields.size(), in_rows[i].fields.size() + cols.size());
    for (std::size_t f = 0; f < in_rows[i].fields.size(); ++f) EXPECT_EQ(out_rows[i].fields[f], in_rows[i].fields[f]);
  }
  auto field = [&](std::size_t row, const std::string& name) {
    const auto at = std::find(cols.begin(), cols.end(), name) - cols.begin();
    return out_rows[row].fields[4 + at];
  };
  EXPECT_EQ(field(1, "matched_name"), "12 rue du temple");
  EXPECT_EQ(field(1, "x"), "100");
  EXPECT_EQ(field(1, "status"), "matched_precise");
  EXPECT_EQ(field(1, "gazetteer"), "jacoubet_numbers");
  EXPECT_EQ(field(2, "status"), "unmatched");
  EXPECT_EQ(field(2, "x"), "");
  EXPECT_EQ(field(2, "score"), "");
  EXPECT_EQ(field(3, "status").rfind("error: ", 0), 0u);
  EXPECT_EQ(out.report.rows, 3u);
  EXPECT_EQ(out.report.errors, 1u);

  ASSERT_TRUE(out.ruid);
  const auto recs = *w.engine.results(*out.ruid);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].object, w.temple);
  EXPECT_TRUE(recs[1].result.is_null());
  EXPECT_EQ(recs[2].row_index, 2u);
}

TEST(BatchCsv, ReRunOnOutputGivesSameScores) {
  World w;
  const std::string input = "address,date\n12 rue du temple,1850\n3 rue du bac,1830\n";
  const auto first = run_batch_csv(input, {}, GeocodeQuery{}, w.engine);
  // The output itself is a valid batch input; appended columns get a suffix.
  std::string again = first.csv;
  const auto nl = again.find('\n');
  std::string header = again.substr(0, nl);
  for (const auto& c : batch_output_columns()) {
    const auto pos = header.find("," + c);
    header.replace(pos, c.size() + 1, "," + c + "_0");
  }
  again = header + again.substr(nl);
  const auto second = run_batch_csv(again, {}, GeocodeQuery{}, w.engine);
  const auto a = parse_csv_table(first.csv);
  const auto b = parse_csv_table(second.csv);
  const auto sa = *a.column("score");
  const auto sb = *b.column("score");
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].fields[sa], b.rows[i].fields[sb]);
}

TEST(BatchCsv, OptionsAndErrors) {
  World w;
  EXPECT_THROW(run_batch_csv("street\nx\n", {}, GeocodeQuery{}, w.engine), RequestError);
  EXPECT_THROW(run_batch_csv("", {}, GeocodeQuery{}, w.engine), RequestError);
  BatchCsvOptions o;
  o.address_column = "street";
  o.delimiter = ';';
  o.persist = false;
  const auto out = run_batch_csv("street;year\n3 rue du bac;1830\n", o, GeocodeQuery{}, w.engine);
  EXPECT_FALSE(out.ruid);
  EXPECT_EQ(out.csv.substr(0, out.csv.find('\n')), "street;year;matched_name;x;y;score;w_d;t_d;b_d;s_p;s_d;g_d;gazetteer;"
                                                   "precision_class;status");
  EXPECT_NE(out.csv.find("3 rue du bac;1830;3 rue du bac;10;20;"), std::string::npos);
}

// Live HTTP service on a free port.
struct LiveService {
  World world;
  TempDir static_dir;
  std::unique_ptr<Service> service;
  std::thread thread;
  int port = 0;

  LiveService() {
    std::ofstream(static_dir.path() / "index.html") << "<html>ui</html>";
    Config c;
    c.port = 0;
    c.static_dir = static_dir.path().string();
    service = std::make_unique<Service>(world.engine, c);
    port = service->bind();
    thread = std::thread([this] { service->run(); });
  }
  ~LiveService() {
    service->stop();
    thread.join();
    service->shutdown();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_connection_timeout(5);
    return c;
  }
};

TEST(Rest, HealthAndStatic) {
  LiveService s;
  auto c = s.client();
  auto h = c.Get("/health");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(json::parse(h->body)["objects"], 2);
  auto page = c.Get("/index.html");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->status, 200);
  EXPECT_EQ(page->body, "<html>ui</html>");
}

TEST(Rest, Geocoding) {
  LiveService s;
  auto c = s.client();
  auto r = c.Get("/geocoding?address=12%20rue%20du%20temple&date=1850&precision=true&maxresults=1");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const auto body = json::parse(r->body);
  ASSERT_TRUE(body.is_array());
  ASSERT_EQ(body.size(), 1u);
  const auto& res = body[0];
  for (const char* key : {"name_historical", "name_normalized", "geometry", "point", "score", "metrics", "flags",
                          "gazetteer", "source", "period", "accuracy_m", "precision_class"}) {
    EXPECT_TRUE(res.contains(key)) << key;
  }
  EXPECT_EQ(res["name_historical"], "12 rue du temple");
  EXPECT_EQ(res["period"].size(), 4u);
  EXPECT_EQ(res["source"], "Jacoubet atlas");
  EXPECT_TRUE(res["flags"]["t_d_available"].get<bool>());

  auto undated = json::parse(c.Get("/geocoding?address=12%20rue%20du%20temple")->body);
  EXPECT_FALSE(undated[0]["flags"]["t_d_available"].get<bool>());

  auto empty = c.Get("/geocoding?address=");
  EXPECT_EQ(empty->status, 400);
  EXPECT_TRUE(json::parse(empty->body).contains("error"));
  auto bad = c.Get("/geocoding?address=x&scoring=w_d%20%2B%20*%202");
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["position"], 6);
  EXPECT_EQ(c.Get("/results/00000000000000000000000000000000")->status, 404);
}

TEST(Rest, ScoringOverrideChangesOrder) {
  Engine e;
  EngineCatalog cat(e);
  auto exact_but_old = cat.point("rue du temple", {0, 0});
  exact_but_old.period = FuzzyPeriod::interval(1500, 1501);
  auto close_and_current = cat.point("rue du temples", {50, 0});
  close_and_current.period = FuzzyPeriod::interval(1850, 1851);
  const auto ids = e.insert_objects(cat.numbers, {exact_but_old, close_and_current});
  GeocodeQuery base;
  auto run = [&](Params p) {
    p["address"] = "rue du temple";
    p["date"] = "1850";
    return geocode(parse_geocode_params(p, base).query, e.registry())[0].object.id;
  };
  EXPECT_EQ(run({}), ids[1]);
  EXPECT_EQ(run({{"scoring", "100*w_d"}}), ids[0]);
}

TEST(Rest, PersistAndEdit) {
  LiveService s;
  auto c = s.client();
  const auto a = json::parse(c.Get("/geocoding?address=12%20rue%20du%20temple&persist=true")->body);
  const auto b = json::parse(c.Get("/geocoding?address=12%20rue%20du%20temple&persist=true")->body);
  ASSERT_TRUE(a.contains("ruid")) << a.dump();
  ASSERT_EQ(a["results"].size(), 1u) << a.dump();
  EXPECT_NE(a["ruid"], b["ruid"]);
  const std::string ruid = a["ruid"];
  const auto id = a["results"][0]["result_id"].get<std::uint64_t>();

  auto listing = c.Get(("/results/" + ruid).c_str());
  ASSERT_EQ(listing->status, 200);
  EXPECT_EQ(json::parse(listing->body)["records"][0]["result_id"], id);

  const std::string edit = R"({"geometry":{"type":"Point","coordinates":[111,222]},"note":"corner"})";
  const auto path = "/results/" + ruid + "/" + std::to_string(id) + "/edit";
  const std::size_t objects_before = s.world.engine.registry().object_count();
  EXPECT_EQ(c.Post(("/results/" + b["ruid"].get<std::string>() + "/" + std::to_string(id) + "/edit").c_str(), edit,
                   "application/json")
                ->status,
            403);
  EXPECT_EQ(c.Post(("/results/" + ruid + "/987654/edit").c_str(), edit, "application/json")->status, 404);
  EXPECT_EQ(c.Post(path.c_str(), "{}", "application/json")->status, 400);
  EXPECT_EQ(c.Post(path.c_str(), "not json", "application/json")->status, 400);
  EXPECT_EQ(s.world.engine.registry().object_count(), objects_before);

  auto ok = c.Post(path.c_str(), edit, "application/json");
  ASSERT_EQ(ok->status, 201);
  const auto created = json::parse(ok->body)["object_id"].get<std::uint64_t>();
  EXPECT_EQ(s.world.engine.registry().object_count(), objects_before + 1);

  const auto again = json::parse(c.Get("/geocoding?address=12%20rue%20du%20temple&maxresults=5")->body);
  bool saw_edit = false;
  for (const auto& r : again) {
    if (r["id"] == created) {
      saw_edit = true;
      EXPECT_EQ(r["gazetteer"], "user_edit_added_to_geocoding");
      EXPECT_EQ(r["point"][0], 111);
    }
  }
  EXPECT_TRUE(saw_edit);
}

TEST(Rest, Batch) {
  LiveService s;
  auto c = s.client();
  const std::string input = "address,date\n12 rue du temple,1850\nqqqq zzzz,\n3 rue du bac,1830\n";
  auto r = c.Post("/batch?maxdist=0.5", input, "text/csv");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  ASSERT_TRUE(r->has_header("X-RUID"));
  const auto ruid = r->get_header_value("X-RUID");
  const auto table = parse_csv_table(r->body);
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_EQ(table.rows[1].fields[*table.column("status")], "unmatched");
  auto listing = json::parse(c.Get(("/results/" + ruid).c_str())->body);
  EXPECT_EQ(listing["records"].size(), 3u);

  EXPECT_EQ(c.Post("/batch", "street\nx\n", "text/csv")->status, 400);

  httplib::MultipartFormDataItems items = {{"file", input, "in.csv", "text/csv"}};
  auto m = c.Post("/batch", items);
  ASSERT_EQ(m->status, 200);
  EXPECT_EQ(parse_csv_table(m->body).rows.size(), 3u);
}

}  // namespace
}  // namespace histgeo
