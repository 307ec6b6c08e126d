// histgeo: command-line front end (ingest, geocode, batch, evaluate, georef,
// serve, export, snapshot).

#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "histgeo/config.hpp"
#include "histgeo/csv.hpp"
#include "histgeo/engine.hpp"
#include "histgeo/georef.hpp"
#include "histgeo/ingest.hpp"
#include "histgeo/serialization.hpp"
#include "histgeo/service.hpp"

using namespace histgeo;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::string data_dir;
  std::string crs;

  Config config() const {
    Config c = Config::load(config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path));
    if (!data_dir.empty()) c.data_dir = data_dir;
    if (!crs.empty()) c.crs = crs;
    return c;
  }
};

struct QueryFlags {
  std::optional<std::string> date;
  std::optional<std::size_t> maxresults;
  std::optional<double> maxdist;
  std::optional<std::string> scoring;
  bool precision = false;

  void add(CLI::App* app) {
    app->add_option("--maxresults", maxresults, "Results per query");
    app->add_option("--maxdist", maxdist, "Trigram distance threshold in [0, 1]");
    app->add_option("--scoring", scoring, "Scoring expression over w_d t_d b_d s_p s_d g_d");
    app->add_flag("--precision", precision, "Precise objects only (no rough fallback)");
  }

  Params params() const {
    Params p;
    if (maxresults) p["maxresults"] = std::to_string(*maxresults);
    if (maxdist) p["maxdist"] = format_double(*maxdist);
    if (scoring) p["scoring"] = *scoring;
    if (precision) p["precision"] = "true";
    if (date) p["date"] = *date;
    return p;
  }
};

AbbreviationTable abbreviations_for(const Config& c) {
  return c.abbreviations.empty() ? AbbreviationTable::defaults() : AbbreviationTable::load(c.abbreviations);
}

std::unique_ptr<Engine> open_engine(const Config& c) {
  if (c.data_dir.empty()) throw std::runtime_error("no data directory (use --data-dir or the config file)");
  ReplayReport rep;
  auto e = Engine::open(c.data_dir, c.crs, &rep);
  if (!rep.complete) {
    std::cerr << "warning: journal replay stopped at line " << rep.stopped_at_line << " (" << rep.reason << "), "
              << rep.applied << " entries applied; the damaged tail was moved to journal.rejected\n";
  }
  return e;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct IngestFlags {
  std::string file;
  std::string format = "delimited";
  std::string mapping;
  std::string mode = "objects";
  std::string gazetteer;
  std::string scale = "precise";
  std::string source;
  std::string source_period;
  double source_accuracy = 5.0;
  std::string source_description;
  std::string process;
  double process_precision = 0.0;
  std::string rejects;
  double road_width = 10.0;
  double lon0 = 0.0;
  double lat0 = 0.0;
  std::string period;
  double accuracy = 5.0;
};

int run_ingest(const Common& common, const IngestFlags& f) {
  const Config c = common.config();
  auto engine = open_engine(c);
  const auto abbreviations = abbreviations_for(c);
  const auto& reg = engine->registry();
  const ScaleClass cls = parse_scale_class(f.scale);

  LoadTarget target;
  target.scale_class = cls;
  if (auto s = reg.find_source(f.source)) {
    target.source = s->id;
  } else {
    if (f.source_period.empty()) throw std::runtime_error("new source '" + f.source + "' needs --source-period");
    target.source = engine->register_source(
        {{}, f.source, f.source_description, parse_fuzzy_date(f.source_period), f.source_accuracy});
  }
  if (auto p = reg.find_process(f.process)) {
    target.process = p->id;
  } else {
    target.process = engine->register_process({{}, f.process, "", f.process_precision});
  }
  if (auto g = reg.find_gazetteer(f.gazetteer)) {
    if (!g->mixed && g->scale_class != cls) {
      throw std::runtime_error("gazetteer '" + f.gazetteer + "' holds " + to_string(g->scale_class) + " objects");
    }
    target.gazetteer = g->id;
  } else {
    target.gazetteer = engine->create_gazetteer(f.gazetteer, cls);
  }

  const ObjectSink sink = [&](GazetteerId g, std::vector<GeoHistoricalObject> objs) {
    return engine->insert_objects(g, std::move(objs));
  };
  const std::string text = read_text_file(f.file);
  const FileFormat format = parse_file_format(f.format);
  const FieldMapping mapping = f.mapping.empty() ? FieldMapping::standard() : FieldMapping::load(f.mapping);
  LoadReport report;
  if (f.mode == "objects") {
    report = load_objects(text, format, mapping, target, reg, sink, abbreviations);
  } else if (f.mode == "street-numbers") {
    report = load_street_numbers(text, target, reg, sink, f.road_width, abbreviations);
  } else {
    ModernImport m;
    m.projection = {f.lon0, f.lat0};
    if (f.period.empty()) throw std::runtime_error("modern import needs --period");
    m.period = parse_fuzzy_date(f.period);
    m.accuracy = f.accuracy;
    report = import_modern_addresses(text, format, mapping, m, target, reg, sink, abbreviations);
  }
  std::cout << "rows " << report.rows << ", inserted " << report.inserted.size() << ", rejected "
            << report.rejects.size() << "\n";
  if (!report.rejects.empty()) {
    if (!f.rejects.empty()) {
      write_output(f.rejects, format_rejects(report, mapping.delimiter));
    } else {
      for (const auto& r : report.rejects) std::cerr << "row " << r.row << ": " << r.reason << "\n";
    }
  }
  return 0;
}

int run_geocode(const Common& common, const std::string& address, const QueryFlags& q, bool pooled) {
  const Config c = common.config();
  auto engine = open_engine(c);
  Params p = q.params();
  p["address"] = address;
  GeocodeRequest r = parse_geocode_params(p, c.query_defaults());
  r.query.pooled_ranking = pooled;
  json out = json::array();
  for (const auto& g : geocode(r.query, engine->registry(), abbreviations_for(c))) out.push_back(result_to_json(g));
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct BatchFlags {
  std::string in;
  std::string out;
  std::string address_column = "address";
  std::string date_column = "date";
  std::string delimiter = ",";
  std::optional<unsigned> jobs;
  std::string dataset = "batch";
  bool no_persist = false;
};

int run_batch(const Common& common, const BatchFlags& f, const QueryFlags& q) {
  const Config c = common.config();
  auto engine = open_engine(c);
  if (f.delimiter.size() != 1) throw std::runtime_error("--delimiter must be one character");
  BatchCsvOptions o;
  o.address_column = f.address_column;
  o.date_column = f.date_column;
  o.delimiter = f.delimiter[0];
  o.jobs = f.jobs.value_or(c.batch_jobs);
  o.persist = !f.no_persist;
  const GeocodeQuery defaults = apply_query_params(q.params(), c.query_defaults());
  const auto result = run_batch_csv(read_text_file(f.in), o, defaults, *engine, abbreviations_for(c));
  write_output(f.out, result.csv);
  std::cerr << format_report_row(f.dataset, result.report) << "\n";
  if (result.ruid) std::cerr << "ruid " << *result.ruid << "\n";
  return 0;
}

int run_evaluate(const std::string& results_path, const std::string& truth_path, const std::string& id_column) {
  const CsvTable results = parse_csv_table(read_text_file(results_path));
  const CsvTable truth = parse_csv_table(read_text_file(truth_path));
  auto need = [](const CsvTable& t, const std::string& name, const std::string& file) {
    const auto c = t.column(name);
    if (!c) throw std::runtime_error(file + ": missing column '" + name + "'");
    return *c;
  };
  auto number = [](const std::string& text, const std::string& what) {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::runtime_error("bad " + what + " '" + text + "'");
    return v;
  };
  const auto rid = need(results, id_column, results_path), rx = need(results, "x", results_path),
             ry = need(results, "y", results_path);
  const auto rw = results.column("w_d"), rt = results.column("t_d");
  std::vector<EvaluatedRow> rows;
  for (const auto& r : results.rows) {
    EvaluatedRow e;
    e.id = r.fields.at(rid);
    if (!r.fields.at(rx).empty() && !r.fields.at(ry).empty()) {
      e.point = Point{number(r.fields[rx], "x"), number(r.fields[ry], "y")};
      if (rw && !r.fields.at(*rw).empty()) e.w_d = number(r.fields[*rw], "w_d");
      if (rt && !r.fields.at(*rt).empty()) e.t_d = number(r.fields[*rt], "t_d");
    }
    rows.push_back(std::move(e));
  }
  const auto tid = need(truth, id_column, truth_path), tx = need(truth, "x", truth_path),
             ty = need(truth, "y", truth_path);
  std::vector<TruthRow> truth_rows;
  for (const auto& r : truth.rows) {
    truth_rows.push_back({r.fields.at(tid), {number(r.fields.at(tx), "x"), number(r.fields.at(ty), "y")}});
  }
  std::cout << format_histogram(evaluate_against_ground_truth(rows, truth_rows));
  return 0;
}

int run_georef(const std::string& gcps_path, const std::string& method, int order, double lambda,
               const std::string& apply_path, const std::string& out) {
  const auto gcps = georef::parse_gcps(read_text_file(gcps_path));
  georef::Transform t;
  if (method == "affine") {
    t = georef::fit_affine(gcps);
  } else if (method == "polynomial") {
    t = georef::fit_polynomial(gcps, order);
  } else if (method == "tps") {
    t = georef::fit_tps(gcps, lambda);
  } else {
    throw std::runtime_error("unknown method '" + method + "' (affine, polynomial, tps)");
  }
  if (apply_path.empty()) {
    const json report = {{"transform", georef::to_json(t)}, {"residuals", georef::to_json(georef::residuals(t, gcps))}};
    write_output(out, report.dump(2) + "\n");
    return 0;
  }
  // Points file: x and y columns replaced by transformed values, others kept.
  const CsvTable table = parse_csv_table(read_text_file(apply_path));
  const auto cx = table.column("x"), cy = table.column("y");
  if (!cx || !cy) throw std::runtime_error(apply_path + ": needs x and y columns");
  std::string text = csv_join(table.header.fields) + "\n";
  for (const auto& r : table.rows) {
    auto fields = r.fields;
    const Eigen::Vector2d p = t(Eigen::Vector2d(std::stod(fields.at(*cx)), std::stod(fields.at(*cy))));
    fields[*cx] = format_double(p.x());
    fields[*cy] = format_double(p.y());
    text += csv_join(fields) + "\n";
  }
  write_output(out, text);
  std::cerr << "rmse " << format_double(georef::residuals(t, gcps).rmse) << "\n";
  return 0;
}

int run_serve(const Common& common, const std::optional<std::string>& listen, const std::optional<int>& port,
              const std::optional<std::string>& static_dir, bool snapshot_on_exit) {
  Config c = common.config();
  if (listen) c.listen = *listen;
  if (port) c.port = *port;
  if (static_dir) c.static_dir = *static_dir;

  // Signals are taken by a dedicated thread so shutdown runs outside a handler.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  auto engine = open_engine(c);
  Service service(*engine, c, abbreviations_for(c));
  const int bound = service.bind();
  std::cerr << "listening on " << c.listen << ":" << bound << " (" << engine->registry().object_count()
            << " objects)\n";
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  });
  service.run();
  service.shutdown();
  if (snapshot_on_exit) engine->save_snapshot();
  // Wake the waiter when the server stopped for another reason.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

int run_export(const Common& common, const std::string& gazetteer, const std::string& out) {
  auto engine = open_engine(common.config());
  const auto g = engine->registry().find_gazetteer(gazetteer);
  if (!g) throw std::runtime_error("unknown gazetteer '" + gazetteer + "'");
  write_output(out, export_objects(engine->registry(), g->id));
  return 0;
}

int run_snapshot(const Common& common) {
  auto engine = open_engine(common.config());
  engine->save_snapshot();
  std::cout << "snapshot written, state " << engine->state_hash() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Historical geocoder"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "JSON config file (HISTGEO_* variables override it)");
  app.add_option("--data-dir", common.data_dir, "Snapshot and journal directory");
  app.add_option("--crs", common.crs, "Reference system for a new data directory");

  IngestFlags ingest;
  auto* ing = app.add_subcommand("ingest", "Load a gazetteer file");
  ing->add_option("--file", ingest.file)->required();
  ing->add_option("--format", ingest.format, "delimited or json-features");
  ing->add_option("--mapping", ingest.mapping, "key=value field mapping file");
  ing->add_option("--mode", ingest.mode)->check(CLI::IsMember({"objects", "street-numbers", "modern"}));
  ing->add_option("--gazetteer", ingest.gazetteer)->required();
  ing->add_option("--scale", ingest.scale)->check(CLI::IsMember({"precise", "rough"}));
  ing->add_option("--source", ingest.source)->required();
  ing->add_option("--source-period", ingest.source_period, "Default period of a new source");
  ing->add_option("--source-accuracy", ingest.source_accuracy, "Default accuracy of a new source, m");
  ing->add_option("--source-description", ingest.source_description);
  ing->add_option("--process", ingest.process)->required();
  ing->add_option("--process-precision", ingest.process_precision, "Digitizing precision of a new process, m");
  ing->add_option("--rejects", ingest.rejects, "Write rejected rows here");
  ing->add_option("--road-width", ingest.road_width, "Default road width for street-numbers, m");
  ing->add_option("--lon0", ingest.lon0);
  ing->add_option("--lat0", ingest.lat0);
  ing->add_option("--period", ingest.period, "Period given to modern addresses");
  ing->add_option("--accuracy", ingest.accuracy, "Accuracy given to modern addresses, m");

  std::string address;
  QueryFlags geo_q;
  bool pooled = false;
  auto* geo = app.add_subcommand("geocode", "Geocode one address and print ranked JSON");
  geo->add_option("--address", address)->required();
  geo->add_option("--date", geo_q.date);
  geo_q.add(geo);
  geo->add_flag("--pooled", pooled, "Rank precise and rough candidates together");

  BatchFlags batch;
  QueryFlags batch_q;
  auto* bat = app.add_subcommand("batch", "Geocode a CSV file");
  bat->add_option("--in", batch.in)->required();
  bat->add_option("--out", batch.out, "Output CSV (default stdout)");
  bat->add_option("--address-column", batch.address_column);
  bat->add_option("--date-column", batch.date_column);
  bat->add_option("--delimiter", batch.delimiter);
  bat->add_option("--jobs", batch.jobs);
  bat->add_option("--dataset", batch.dataset, "Label of the report row");
  bat->add_flag("--no-persist", batch.no_persist, "Do not store results under a ruid");
  batch_q.add(bat);

  std::string results_path, truth_path, id_column = "id";
  auto* eva = app.add_subcommand("evaluate", "Distance histogram against ground truth");
  eva->add_option("--results", results_path)->required();
  eva->add_option("--truth", truth_path)->required();
  eva->add_option("--id-column", id_column);

  std::string gcps, method = "affine", apply_path, georef_out;
  int order = 2;
  double lambda = 0.0;
  auto* geo_ref = app.add_subcommand("georef", "Fit a transform from ground control points");
  geo_ref->add_option("--gcps", gcps, "CSV with src_x, src_y, dst_x, dst_y")->required();
  geo_ref->add_option("--method", method)->check(CLI::IsMember({"affine", "polynomial", "tps"}));
  geo_ref->add_option("--order", order);
  geo_ref->add_option("--lambda", lambda);
  geo_ref->add_option("--apply", apply_path, "Transform the x, y columns of this CSV");
  geo_ref->add_option("--out", georef_out);

  std::optional<std::string> listen, static_dir;
  std::optional<int> port;
  bool snapshot_on_exit = false;
  auto* srv = app.add_subcommand("serve", "Run the HTTP service");
  srv->add_option("--listen", listen);
  srv->add_option("--port", port);
  srv->add_option("--static-dir", static_dir);
  srv->add_flag("--snapshot-on-exit", snapshot_on_exit);

  std::string export_gazetteer, export_out;
  auto* exp = app.add_subcommand("export", "Write one gazetteer as CSV");
  exp->add_option("--gazetteer", export_gazetteer)->required();
  exp->add_option("--out", export_out);

  auto* snap = app.add_subcommand("snapshot", "Write a snapshot and empty the journal");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*ing) return run_ingest(common, ingest);
    if (*geo) return run_geocode(common, address, geo_q, pooled);
    if (*bat) return run_batch(common, batch, batch_q);
    if (*eva) return run_evaluate(results_path, truth_path, id_column);
    if (*geo_ref) return run_georef(gcps, method, order, lambda, apply_path, georef_out);
    if (*srv) return run_serve(common, listen, port, static_dir, snapshot_on_exit);
    if (*exp) return run_export(common, export_gazetteer, export_out);
    if (*snap) return run_snapshot(common);
  } catch (const RequestError& e) {
    std::cerr << "error: " << e.what();
    if (e.position()) std::cerr << " (at " << *e.position() << ")";
    std::cerr << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
