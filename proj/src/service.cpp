#include "histgeo/service.hpp"

#include <charconv>
#include <cmath>

#include <httplib.h>

#include "histgeo/csv.hpp"
#include "histgeo/serialization.hpp"

namespace histgeo {

using nlohmann::json;

namespace {

const std::string* find_param(const Params& params, const char* name) {
  auto it = params.find(name);
  return it == params.end() ? nullptr : &it->second;
}

bool parse_bool(const std::string& name, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw RequestError(400, name + " must be true or false, got '" + v + "'");
}

double parse_number(const std::string& name, const std::string& v) {
  double d = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || end != v.data() + v.size() || !std::isfinite(d)) {
    throw RequestError(400, name + " is not a number: '" + v + "'");
  }
  return d;
}

std::size_t parse_count(const std::string& name, const std::string& v) {
  std::size_t n = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc() || end != v.data() + v.size() || n == 0) {
    throw RequestError(400, name + " must be a positive integer, got '" + v + "'");
  }
  return n;
}

std::string metric_text(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

}  // namespace

nlohmann::json RequestError::body() const {
  json j = {{"error", what()}, {"status", status_}};
  if (position_) j["position"] = *position_;
  return j;
}

GeocodeQuery apply_query_params(const Params& params, GeocodeQuery q) {
  if (auto v = find_param(params, "precision")) q.allow_rough_fallback = !parse_bool("precision", *v);
  if (auto v = find_param(params, "maxresults")) q.max_results = parse_count("maxresults", *v);
  if (auto v = find_param(params, "maxdist")) {
    q.max_string_distance = parse_number("maxdist", *v);
    if (q.max_string_distance < 0.0 || q.max_string_distance > 1.0) {
      throw RequestError(400, "maxdist must be in [0, 1]");
    }
  }
  if (auto v = find_param(params, "scoring"); v && !v->empty()) {
    try {
      q.scoring = ScoringExpression::parse(*v);
    } catch (const ExpressionError& e) {
      throw RequestError(400, std::string("scoring: ") + e.what(), e.position());
    }
  }
  return q;
}

GeocodeRequest parse_geocode_params(const Params& params, const GeocodeQuery& defaults) {
  GeocodeRequest r;
  r.query = apply_query_params(params, defaults);
  const std::string* address = find_param(params, "address");
  if (!address || address->find_first_not_of(" \t\r\n") == std::string::npos) {
    throw RequestError(400, "address is required");
  }
  r.query.raw_address = *address;
  if (auto v = find_param(params, "date"); v && !v->empty()) {
    try {
      r.query.period = parse_fuzzy_date(*v);
    } catch (const DateParseError& e) {
      throw RequestError(400, std::string("date: ") + e.what());
    }
  }
  if (auto v = find_param(params, "persist")) r.persist = parse_bool("persist", *v);
  return r;
}

const std::vector<std::string>& batch_output_columns() {
  static const std::vector<std::string> columns = {"matched_name", "x",   "y",   "score",     "w_d",
                                                   "t_d",          "b_d", "s_p", "s_d",       "g_d",
                                                   "gazetteer",    "precision_class", "status"};
  return columns;
}

BatchCsvResult run_batch_csv(std::string_view text, const BatchCsvOptions& options, const GeocodeQuery& defaults,
                             Engine& engine, const AbbreviationTable& abbreviations) {
  CsvTable table;
  try {
    table = parse_csv_table(text, options.delimiter);
  } catch (const CsvError& e) {
    throw RequestError(400, e.what());
  }
  const auto address_col = table.column(options.address_column);
  if (!address_col) throw RequestError(400, "missing address column '" + options.address_column + "'");
  const auto date_col = table.column(options.date_column);

  std::vector<BatchInput> inputs;
  inputs.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    BatchInput in;
    if (*address_col < row.fields.size()) in.address = row.fields[*address_col];
    if (date_col && *date_col < row.fields.size() && !row.fields[*date_col].empty()) in.date = row.fields[*date_col];
    inputs.push_back(std::move(in));
  }

  BatchOutcome outcome = batch_geocode(inputs, defaults, engine.registry(), options.jobs, abbreviations);

  const char d = options.delimiter;
  BatchCsvResult out;
  out.report = outcome.report;
  out.csv = table.header.raw;
  for (const auto& c : batch_output_columns()) out.csv += d + csv_escape(c, d);
  out.csv += '\n';

  std::vector<PersistRow> persisted;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = outcome.rows[i];
    std::vector<std::string> extra(batch_output_columns().size());
    if (!row.results.empty()) {
      const GeocodeResult& top = row.results.front();
      extra[0] = top.object.historical_name;
      extra[1] = format_double(top.point.x);
      extra[2] = format_double(top.point.y);
      extra[3] = metric_text(top.score);
      extra[4] = format_double(top.metrics.w_d);
      extra[5] = format_double(top.metrics.t_d);
      extra[6] = format_double(top.metrics.b_d);
      extra[7] = format_double(top.metrics.s_p);
      extra[8] = format_double(top.metrics.s_d);
      extra[9] = format_double(top.metrics.g_d);
      extra[10] = top.gazetteer;
      extra[11] = to_string(top.precision_class);
    }
    extra[12] = to_string(row.status);
    if (row.status == BatchStatus::error) extra[12] += ": " + row.error;
    out.csv += table.rows[i].raw;
    for (const auto& e : extra) out.csv += d + csv_escape(e, d);
    out.csv += '\n';

    if (options.persist) {
      json query = {{"address", inputs[i].address}, {"status", extra[12]}, {"line", table.rows[i].line}};
      query["date"] = inputs[i].date ? json(*inputs[i].date) : json();
      persisted.push_back({i, std::move(query), row.results});
    }
  }
  if (options.persist) out.ruid = engine.persist_results(persisted);
  return out;
}

nlohmann::json results_to_json(const std::string& ruid, const std::vector<ResultRecord>& records) {
  json list = json::array();
  for (const auto& r : records) {
    list.push_back({{"result_id", r.id},
                    {"row_index", r.row_index},
                    {"query", r.query},
                    {"result", r.result},
                    {"created_at", r.created_at},
                    {"edited", r.edited}});
  }
  return {{"ruid", ruid}, {"records", std::move(list)}};
}

struct Service::Impl {
  Engine& engine;
  Config config;
  AbbreviationTable abbreviations;
  GeocodeQuery defaults;
  httplib::Server server;

  Impl(Engine& e, Config c, AbbreviationTable a)
      : engine(e), config(std::move(c)), abbreviations(std::move(a)), defaults(config.query_defaults()) {}

  static Params params_of(const httplib::Request& req) {
    Params p;
    for (const auto& [k, v] : req.params) p[k] = v;
    return p;
  }

  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  // Runs a handler, turning refusals into JSON error responses.
  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const RequestError& e) {
      send_json(res, e.status(), e.body());
    } catch (const EditRejected& e) {
      send_json(res, e.status(), {{"error", e.what()}, {"status", e.status()}});
    } catch (const QueryError& e) {
      send_json(res, 400, {{"error", e.what()}, {"status", 400}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", e.what()}, {"status", 500}});
    }
  }

  void routes() {
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200,
                {{"status", "ok"},
                 {"objects", engine.registry().object_count()},
                 {"gazetteers", engine.registry().gazetteers().size()},
                 {"journal_entries", engine.journal_entries()}});
    });

    server.Get("/geocoding", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const GeocodeRequest r = parse_geocode_params(params_of(req), defaults);
        const auto results = geocode(r.query, engine.registry(), abbreviations);
        if (!r.persist) {
          json list = json::array();
          for (const auto& g : results) list.push_back(result_to_json(g));
          send_json(res, 200, list);
          return;
        }
        json query = {{"address", r.query.raw_address}};
        query["date"] = req.has_param("date") ? json(req.get_param_value("date")) : json();
        const std::string ruid = engine.persist_results({{0, query, results}});
        json list = json::array();
        const auto records = engine.results(ruid);
        for (const auto& rec : *records) {
          if (!rec.result.is_null()) list.push_back(rec.result);
        }
        send_json(res, 200, {{"ruid", ruid}, {"results", list}});
      });
    });

    server.Post("/batch", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Params p = params_of(req);
        BatchCsvOptions opt;
        opt.jobs = config.batch_jobs;
        if (auto it = p.find("address_column"); it != p.end()) opt.address_column = it->second;
        if (auto it = p.find("date_column"); it != p.end()) opt.date_column = it->second;
        if (auto it = p.find("delimiter"); it != p.end()) {
          if (it->second.size() != 1) throw RequestError(400, "delimiter must be one character");
          opt.delimiter = it->second[0];
        }
        if (auto it = p.find("persist"); it != p.end()) opt.persist = parse_bool("persist", it->second);
        const GeocodeQuery q = apply_query_params(p, defaults);
        const std::string& body = req.has_file("file") ? req.get_file_value("file").content : req.body;
        const BatchCsvResult out = run_batch_csv(body, opt, q, engine, abbreviations);
        if (out.ruid) res.set_header("X-RUID", *out.ruid);
        res.status = 200;
        res.set_content(out.csv, "text/csv");
      });
    });

    server.Get("/results/:ruid", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string ruid = req.path_params.at("ruid");
      const auto records = engine.results(ruid);
      if (!records) {
        send_json(res, 404, {{"error", "unknown ruid"}, {"status", 404}});
        return;
      }
      send_json(res, 200, results_to_json(ruid, *records));
    });

    server.Post("/results/:ruid/:id/edit", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string ruid = req.path_params.at("ruid");
        const std::string& id_text = req.path_params.at("id");
        std::uint64_t id = 0;
        const auto [end, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
        if (ec != std::errc() || end != id_text.data() + id_text.size()) {
          throw RequestError(404, "unknown result id '" + id_text + "'");
        }
        json body;
        try {
          body = json::parse(req.body);
        } catch (const json::exception& e) {
          throw RequestError(400, std::string("edit body is not JSON: ") + e.what());
        }
        EditRequest edit;
        try {
          edit = EditRequest::from_json(body, engine.registry().crs());
        } catch (const std::invalid_argument& e) {
          throw RequestError(400, e.what());
        }
        const ObjectId created = engine.edit_result(ruid, id, edit);
        send_json(res, 201, {{"object_id", created.value}, {"gazetteer", kEditGazetteerName}});
      });
    });

    if (!config.static_dir.empty() && !server.set_mount_point("/", config.static_dir)) {
      throw std::runtime_error("static_dir does not exist: " + config.static_dir);
    }
  }
};

Service::Service(Engine& engine, Config config, AbbreviationTable abbreviations)
    : impl_(std::make_unique<Impl>(engine, std::move(config), std::move(abbreviations))) {
  impl_->routes();
}

Service::~Service() = default;

int Service::bind() {
  auto& s = impl_->server;
  const auto& c = impl_->config;
  if (c.port == 0) {
    const int port = s.bind_to_any_port(c.listen);
    if (port <= 0) throw std::runtime_error("cannot bind " + c.listen);
    return port;
  }
  if (!s.bind_to_port(c.listen, c.port)) {
    throw std::runtime_error("cannot bind " + c.listen + ":" + std::to_string(c.port));
  }
  return c.port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

void Service::shutdown() { impl_->engine.flush(); }

}  // namespace histgeo
