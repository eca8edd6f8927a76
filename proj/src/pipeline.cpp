#include "roadres/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <thread>

#include <json.hpp>

#include "roadres/csvio.hpp"
#include "roadres/errors.hpp"
#include "roadres/severity.hpp"
#include "roadres/stats.hpp"

namespace roadres {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

void PipelineConfig::validate() const {
  if (workspace.empty()) throw ConfigError("workspace path required");
  if (time_zone.empty()) throw ConfigError("time zone required");
  if (links_path.empty() || speeds_path.empty() || reports_path.empty())
    throw ConfigError("links, speeds and reports inputs are all required");
  if (!(threshold_pct < 0)) throw ConfigError("threshold must be negative");
  if (gap_tolerance_hours < 0) throw ConfigError("gap_tolerance_hours must be >= 0");
  if (lookback_days <= 0) throw ConfigError("lookback_days must be > 0");
  if (search_pad_hours < 0) throw ConfigError("search_pad_hours must be >= 0");
  if (!(match.max_distance_m > 0)) throw ConfigError("match distance must be > 0");
  if (jobs < 0) throw ConfigError("jobs must be >= 0");
  std::set<std::string> names;
  for (const auto& e : events) {
    if (e.name.empty()) throw ConfigError("event name required");
    if (!names.insert(e.name).second) throw ConfigError("duplicate event name '" + e.name + "'");
    if (e.span.end < e.span.start) throw ConfigError("event '" + e.name + "' span end before start");
  }
  for (const auto& m : models) {
    if (m.response != "duration" && m.response != "change" && m.response != "auc")
      throw ConfigError("model response must be duration|change|auc, got '" + m.response + "'");
    if (!names.count(m.event)) throw ConfigError("model references unknown event '" + m.event + "'");
    for (double g : m.lambda_grid)
      if (!(g > 0)) throw ConfigError("lambda grid values must be positive");
  }
}

EventWindowConfig PipelineConfig::window_config(const EventConfig& event) const {
  EventWindowConfig w;
  w.event_span = event.span;
  w.threshold_pct = threshold_pct;
  w.gap_tolerance_hours = gap_tolerance_hours;
  w.lookback_days = lookback_days;
  w.search_pad_hours = search_pad_hours;
  return w;
}

const EventConfig& PipelineConfig::event_by_name(const std::string& name) const {
  for (const auto& e : events)
    if (e.name == name) return e;
  throw ConfigError("unknown event '" + name + "'");
}

namespace {

gam::Family family_from_string(const std::string& s) {
  if (s == "gaussian") return gam::Family::GaussianIdentity;
  if (s == "nb" || s == "negative_binomial") return gam::Family::NegBinLog;
  throw ConfigError("unknown family '" + s + "' (expected gaussian|nb)");
}

std::string family_to_string(gam::Family f) {
  return f == gam::Family::GaussianIdentity ? "gaussian" : "nb";
}

}  // namespace

PipelineConfig PipelineConfig::from_json_file(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  try {
    PipelineConfig cfg;
    cfg.workspace = doc.at("workspace").get<std::string>();
    cfg.time_zone = doc.value("time_zone", std::string("America/Chicago"));
    const json& inputs = doc.at("inputs");
    cfg.links_path = inputs.at("links").get<std::string>();
    cfg.links_format =
        inputs.value("links_format", std::string("geojson")) == "csv" ? LinkFormat::Csv
                                                                      : LinkFormat::GeoJson;
    cfg.speeds_path = inputs.at("speeds").get<std::string>();
    cfg.reports_path = inputs.at("reports").get<std::string>();
    cfg.threshold_pct = doc.value("threshold_pct", -1.0);
    cfg.gap_tolerance_hours = doc.value("gap_tolerance_hours", 2);
    cfg.lookback_days = doc.value("lookback_days", 30);
    cfg.search_pad_hours = doc.value("search_pad_hours", 48);
    cfg.jobs = doc.value("jobs", 1);
    cfg.conflate = doc.value("conflate", true);
    if (doc.contains("match")) {
      cfg.match.max_distance_m = doc["match"].value("max_distance_m", 10.0);
      cfg.match.bearing_tolerance_deg = doc["match"].value("bearing_tolerance_deg", 30.0);
    }
    for (const auto& e : doc.value("events", json::array())) {
      EventConfig event;
      event.name = e.at("name").get<std::string>();
      event.type = event_type_from_string(e.at("type").get<std::string>());
      event.span = {Timestamp::parse(e.at("start").get<std::string>()),
                    Timestamp::parse(e.at("end").get<std::string>())};
      cfg.events.push_back(std::move(event));
    }
    for (const auto& m : doc.value("models", json::array())) {
      ModelConfig model;
      model.response = m.at("response").get<std::string>();
      model.event = m.at("event").get<std::string>();
      model.family = family_from_string(m.value(
          "family", model.response == "duration" ? std::string("nb") : std::string("gaussian")));
      for (const auto& v : m.value("linear_terms", json::array()))
        model.linear_terms.push_back(v.get<std::string>());
      for (const auto& s : m.value("smooth_terms", json::array()))
        model.smooth_terms.push_back({s.at("var").get<std::string>(), s.value("k", 10)});
      if (m.contains("tensor")) {
        const json& t = m["tensor"];
        model.tensor_term = gam::TensorTermSpec{t.value("var1", std::string("lat")),
                                                t.value("var2", std::string("lon")),
                                                t.value("k1", 5), t.value("k2", 5)};
      }
      for (const auto& g : m.value("lambda_grid", json::array()))
        model.lambda_grid.push_back(g.get<double>());
      model.stepwise = m.value("stepwise", false);
      model.vif_threshold = m.value("vif_threshold", 5.0);
      cfg.models.push_back(std::move(model));
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string PipelineConfig::to_json() const {
  json doc;
  doc["workspace"] = workspace.string();
  doc["time_zone"] = time_zone;
  doc["inputs"] = {{"links", links_path.string()},
                   {"links_format", links_format == LinkFormat::Csv ? "csv" : "geojson"},
                   {"speeds", speeds_path.string()},
                   {"reports", reports_path.string()}};
  doc["threshold_pct"] = threshold_pct;
  doc["gap_tolerance_hours"] = gap_tolerance_hours;
  doc["lookback_days"] = lookback_days;
  doc["search_pad_hours"] = search_pad_hours;
  doc["jobs"] = jobs;
  doc["conflate"] = conflate;
  doc["match"] = {{"max_distance_m", match.max_distance_m},
                  {"bearing_tolerance_deg", match.bearing_tolerance_deg}};
  json evs = json::array();
  for (const auto& e : events)
    evs.push_back({{"name", e.name},
                   {"type", std::string(to_string(e.type))},
                   {"start", e.span.start.to_string()},
                   {"end", e.span.end.to_string()}});
  doc["events"] = evs;
  json mods = json::array();
  for (const auto& m : models) {
    json mj;
    mj["response"] = m.response;
    mj["event"] = m.event;
    mj["family"] = family_to_string(m.family);
    mj["linear_terms"] = m.linear_terms;
    json smooths = json::array();
    for (const auto& s : m.smooth_terms) smooths.push_back({{"var", s.var}, {"k", s.k}});
    mj["smooth_terms"] = smooths;
    if (m.tensor_term)
      mj["tensor"] = {{"var1", m.tensor_term->var1},
                      {"var2", m.tensor_term->var2},
                      {"k1", m.tensor_term->k1},
                      {"k2", m.tensor_term->k2}};
    if (!m.lambda_grid.empty()) mj["lambda_grid"] = m.lambda_grid;
    mj["stepwise"] = m.stepwise;
    mj["vif_threshold"] = m.vif_threshold;
    mods.push_back(std::move(mj));
  }
  doc["models"] = mods;
  return doc.dump(2) + "\n";
}

void PipelineConfig::save_json(const std::filesystem::path& path) const {
  write_file(path, to_json());
}

// ---------------------------------------------------------------------------
// artifact helpers
// ---------------------------------------------------------------------------

namespace {

std::string opt_str(const std::optional<std::string>& v) { return v ? *v : ""; }
std::string bool_str(bool v) { return v ? "true" : "false"; }

std::string params_hash(const json& j) { return hash_hex(fnv1a64(j.dump())); }

std::string wkt_of(const std::vector<LatLon>& geometry) {
  std::string wkt = "LINESTRING (";
  for (std::size_t i = 0; i < geometry.size(); ++i) {
    if (i) wkt += ", ";
    wkt += format_double(geometry[i].lon) + " " + format_double(geometry[i].lat);
  }
  return wkt + ")";
}

const std::vector<std::string> kLinkColumns = {
    "id",       "tmc",         "fclass",  "lanes", "divider", "intersection", "frontage",
    "min_alt_km", "slope",     "name",    "direction", "exclude", "length_miles", "wkt"};

void write_links_artifact(const std::vector<RoadLink>& links, const std::filesystem::path& path) {
  CsvWriter writer(path, "links", 1, kLinkColumns);
  for (const auto& link : links)
    writer.row({link.link_id, opt_str(link.tmc_code), std::string(to_string(link.functional_class)),
                std::string(to_string(link.lane_category)), std::string(to_string(link.divider)),
                bool_str(link.is_intersection), bool_str(link.is_frontage),
                format_double(link.min_altitude_km), format_double(link.slope), link.road_name,
                opt_str(link.direction_tag), "false", format_double(link.length_miles),
                wkt_of(link.geometry)});
  writer.close();
}

std::vector<RoadLink> read_links_artifact(const std::filesystem::path& path) {
  return parse_links(path, LinkFormat::Csv);
}

void write_reports_artifact(const std::vector<EventReport>& reports,
                            const std::filesystem::path& path) {
  CsvWriter writer(path, "reports", 1,
                   {"id", "type", "subtype", "lat", "lon", "start", "end", "road_name",
                    "direction", "reliability"});
  for (const auto& r : reports)
    writer.row({r.report_id, std::string(to_string(r.event_type)), r.raw_subtype,
                format_double(r.location.lat), format_double(r.location.lon),
                r.start_time.to_string(), r.end_time.to_string(), r.road_name,
                opt_str(r.direction_tag), format_double(r.reliability)});
  writer.close();
}

std::vector<EventReport> read_reports_artifact(const std::filesystem::path& path) {
  CsvReader reader(path);
  reader.require_columns({"id", "type", "subtype", "lat", "lon", "start", "end", "road_name",
                          "direction", "reliability"});
  std::vector<EventReport> reports;
  while (auto row = reader.next()) {
    const auto& r = *row;
    EventReport rep;
    rep.report_id = r[0];
    rep.event_type = event_type_from_string(r[1]);
    rep.raw_subtype = r[2];
    rep.location = {parse_double(r[3], "reports"), parse_double(r[4], "reports")};
    rep.start_time = Timestamp::parse(r[5]);
    rep.end_time = Timestamp::parse(r[6]);
    rep.road_name = r[7];
    if (!r[8].empty()) rep.direction_tag = r[8];
    rep.reliability = parse_double(r[9], "reports");
    reports.push_back(std::move(rep));
  }
  return reports;
}

void write_speeds_artifact(const std::vector<SpeedSeries>& series,
                           const std::filesystem::path& path, const SpeedParseStats& stats) {
  CsvWriter writer(path, "speeds", 1, {"segment_id", "timestamp", "speed_mph"});
  writer.comment("duplicates_last_write_wins", std::to_string(stats.duplicates));
  writer.comment("dropped_nonpositive", std::to_string(stats.dropped_nonpositive));
  for (const auto& s : series)
    for (const auto& sample : s.samples)
      writer.row({s.link_id, sample.t.to_string(), format_double(sample.speed_mph)});
  writer.close();
}

void write_baselines_artifact(const std::map<std::string, BaselineProfile>& baselines,
                              const std::filesystem::path& path) {
  CsvWriter writer(path, "baselines", 1,
                   {"link_id", "cell_kind", "cell_index", "mean_speed", "n_obs", "insufficient"});
  for (const auto& [id, profile] : baselines) {
    writer.row({id, "total", "", "", std::to_string(profile.eligible_samples),
                bool_str(profile.insufficient)});
    for (int i = 0; i < 168; ++i)
      if (profile.hour_of_week_cells[i].n_obs > 0)
        writer.row({id, "how", std::to_string(i),
                    format_double(profile.hour_of_week_cells[i].mean_speed),
                    std::to_string(profile.hour_of_week_cells[i].n_obs), ""});
    for (int i = 0; i < 24; ++i)
      if (profile.hour_of_day_fallback[i].n_obs > 0)
        writer.row({id, "hod", std::to_string(i),
                    format_double(profile.hour_of_day_fallback[i].mean_speed),
                    std::to_string(profile.hour_of_day_fallback[i].n_obs), ""});
  }
  writer.close();
}

std::map<std::string, BaselineProfile> read_baselines_artifact(
    const std::filesystem::path& path) {
  CsvReader reader(path);
  reader.require_columns(
      {"link_id", "cell_kind", "cell_index", "mean_speed", "n_obs", "insufficient"});
  std::map<std::string, BaselineProfile> out;
  while (auto row = reader.next()) {
    const auto& r = *row;
    BaselineProfile& profile = out[r[0]];
    profile.link_id = r[0];
    if (r[1] == "total") {
      profile.eligible_samples = static_cast<int>(parse_int(r[4], "baselines"));
      profile.insufficient = r[5] == "true";
    } else {
      int idx = static_cast<int>(parse_int(r[2], "baselines"));
      BaselineProfile::Cell cell{parse_double(r[3], "baselines"),
                                 static_cast<int>(parse_int(r[4], "baselines"))};
      if (r[1] == "how")
        profile.hour_of_week_cells[static_cast<std::size_t>(idx)] = cell;
      else
        profile.hour_of_day_fallback[static_cast<std::size_t>(idx)] = cell;
    }
  }
  return out;
}

const std::vector<std::string> kMetricsColumns = {
    "link_id", "a",       "b",           "duration_h",         "change_pct",
    "auc_pct_h", "affected", "low_coverage", "baseline_insufficient"};

void write_metrics_artifact(const std::vector<MetricsArtifactRow>& rows,
                            const std::filesystem::path& path, const EventWindowConfig& cfg) {
  CsvWriter writer(path, "metrics", 1, kMetricsColumns);
  writer.comment("threshold_pct", format_double(cfg.threshold_pct));
  writer.comment("gap_tolerance_hours", std::to_string(cfg.gap_tolerance_hours));
  writer.comment("lookback_days", std::to_string(cfg.lookback_days));
  writer.comment("search_pad_hours", std::to_string(cfg.search_pad_hours));
  for (const auto& m : rows)
    writer.row({m.link_id, m.window ? m.window->a.to_string() : "",
                m.window ? m.window->b.to_string() : "", format_double(m.duration_h),
                format_double(m.change_pct), format_double(m.auc_pct_h), bool_str(m.affected),
                bool_str(m.low_coverage), bool_str(m.baseline_insufficient)});
  writer.close();
}

std::vector<MetricsArtifactRow> read_metrics_artifact(const std::filesystem::path& path) {
  CsvReader reader(path);
  reader.require_columns(kMetricsColumns);
  std::vector<MetricsArtifactRow> rows;
  while (auto row = reader.next()) {
    const auto& r = *row;
    MetricsArtifactRow m;
    m.link_id = r[0];
    if (!r[1].empty()) m.window = EventWindow{Timestamp::parse(r[1]), Timestamp::parse(r[2])};
    m.duration_h = parse_double(r[3], "metrics");
    m.change_pct = parse_double(r[4], "metrics");
    m.auc_pct_h = parse_double(r[5], "metrics");
    m.affected = r[6] == "true";
    m.low_coverage = r[7] == "true";
    m.baseline_insufficient = r[8] == "true";
    rows.push_back(std::move(m));
  }
  return rows;
}

}  // namespace

std::map<std::string, MetricsArtifactRow> read_metrics_rows(const std::filesystem::path& path) {
  std::map<std::string, MetricsArtifactRow> out;
  for (auto& row : read_metrics_artifact(path)) out.emplace(row.link_id, std::move(row));
  return out;
}

namespace {

LatLon link_centroid(const RoadLink& link) {
  double lat = 0, lon = 0;
  for (const auto& p : link.geometry) {
    lat += p.lat;
    lon += p.lon;
  }
  double n = static_cast<double>(link.geometry.size());
  return {lat / n, lon / n};
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (jobs == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::size_t chunk = (count + jobs - 1) / static_cast<std::size_t>(jobs);
  for (int w = 0; w < jobs; ++w) {
    std::size_t lo = static_cast<std::size_t>(w) * chunk;
    std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([&fn, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

template <typename Fn>
void guarded(Workspace& ws, const std::string& stage, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    ws.mark_stale(stage);
    throw ConfigError("stage " + stage + ": " + e.what());
  } catch (const ParseError& e) {
    ws.mark_stale(stage);
    throw ParseError("stage " + stage + ": " + e.what());
  } catch (const std::exception& e) {
    ws.mark_stale(stage);
    throw ComputeError("stage " + stage + ": " + e.what());
  }
}

std::string links_final_name(const PipelineConfig&) { return "links_final.csv"; }

ChangeSeries change_series_for(const SpeedSeries& series, const BaselineProfile& baseline,
                               const EventWindowConfig& wcfg) {
  ChangeSeries change = relative_change(series, baseline);
  Timestamp lo = wcfg.event_span.start.add_hours(-wcfg.search_pad_hours);
  Timestamp hi = wcfg.event_span.end.add_hours(wcfg.search_pad_hours);
  ChangeSeries clipped;
  clipped.link_id = change.link_id;
  for (const auto& s : change.samples)
    if (lo <= s.t && s.t <= hi) clipped.samples.push_back(s);
  double span_hours = hours_between(lo, hi) + 1.0;
  clipped.coverage = static_cast<double>(clipped.samples.size()) / span_hours;
  return clipped;
}

}  // namespace

// ---------------------------------------------------------------------------
// stages
// ---------------------------------------------------------------------------

void stage_ingest(Workspace& ws, const PipelineConfig& cfg) {
  const std::string stage = "ingest";
  json params = {{"format", cfg.links_format == LinkFormat::Csv ? "csv" : "geojson"},
                 {"time_zone", cfg.time_zone}};
  std::vector<std::filesystem::path> inputs = {cfg.links_path, cfg.speeds_path, cfg.reports_path};
  std::vector<std::filesystem::path> outputs = {ws.artifact("links_ingested.csv"),
                                                ws.artifact("speeds_ingested.csv"),
                                                ws.artifact("reports_ingested.csv")};
  if (ws.stage_current(stage, params_hash(params), inputs)) return;
  guarded(ws, stage, [&] {
    LinkParseStats link_stats;
    auto links = parse_links(cfg.links_path, cfg.links_format, &link_stats);
    std::sort(links.begin(), links.end(),
              [](const RoadLink& a, const RoadLink& b) { return a.link_id < b.link_id; });
    for (std::size_t i = 1; i < links.size(); ++i)
      if (links[i].link_id == links[i - 1].link_id)
        throw ParseError("duplicate link id '" + links[i].link_id + "'");
    SpeedParseStats speed_stats;
    auto speeds = parse_speeds(cfg.speeds_path, &speed_stats);
    auto reports = parse_reports(cfg.reports_path);
    std::sort(reports.begin(), reports.end(),
              [](const EventReport& a, const EventReport& b) { return a.report_id < b.report_id; });

    write_links_artifact(links, outputs[0]);
    write_speeds_artifact(speeds, outputs[1], speed_stats);
    write_reports_artifact(reports, outputs[2]);
    ws.record_stage(stage, params_hash(params), inputs, outputs,
                    {{"links", links.size()},
                     {"links_excluded", link_stats.excluded},
                     {"speed_rows", speed_stats.rows},
                     {"speed_duplicates", speed_stats.duplicates},
                     {"speed_dropped_nonpositive", speed_stats.dropped_nonpositive},
                     {"reports", reports.size()}});
  });
}

void stage_conflate(Workspace& ws, const PipelineConfig& cfg) {
  const std::string stage = "conflate";
  json params = {{"conflate", cfg.conflate}};
  std::vector<std::filesystem::path> inputs = {ws.artifact("links_ingested.csv")};
  std::vector<std::filesystem::path> outputs = {ws.artifact(links_final_name(cfg))};
  if (ws.stage_current(stage, params_hash(params), inputs)) return;
  guarded(ws, stage, [&] {
    auto links = read_links_artifact(inputs[0]);
    ConflateStats stats;
    if (cfg.conflate) links = conflate_by_tmc(links, &stats);
    std::sort(links.begin(), links.end(),
              [](const RoadLink& a, const RoadLink& b) { return a.link_id < b.link_id; });
    write_links_artifact(links, outputs[0]);
    ws.record_stage(stage, params_hash(params), inputs, outputs,
                    {{"links", links.size()},
                     {"groups", stats.groups},
                     {"direction_conflicts", stats.direction_conflicts}});
  });
}

void stage_match(Workspace& ws, const PipelineConfig& cfg) {
  const std::string stage = "match";
  json params = {{"max_distance_m", cfg.match.max_distance_m},
                 {"bearing_tolerance_deg", cfg.match.bearing_tolerance_deg}};
  std::vector<std::filesystem::path> inputs = {ws.artifact(links_final_name(cfg)),
                                               ws.artifact("reports_ingested.csv")};
  std::vector<std::filesystem::path> outputs = {ws.artifact("matches.csv")};
  if (ws.stage_current(stage, params_hash(params), inputs)) return;
  guarded(ws, stage, [&] {
    auto links = read_links_artifact(inputs[0]);
    auto reports = read_reports_artifact(inputs[1]);
    auto summary = match_all(reports, links, cfg.match, cfg.jobs);
    CsvWriter writer(outputs[0], "matches", 1,
                     {"report_id", "link_id", "distance_m", "failure_reason"});
    writer.comment("match_rate",
                   summary.match_rate ? format_double(*summary.match_rate) : "null");
    std::size_t matched = 0;
    for (const auto& r : summary.results) {
      matched += r.link_id.has_value();
      writer.row({r.report_id, opt_str(r.link_id),
                  std::isfinite(r.distance_m) ? format_double(r.distance_m) : "",
                  r.failure ? std::string(to_string(*r.failure)) : ""});
    }
    writer.close();
    ws.record_stage(stage, params_hash(params), inputs, outputs,
                    {{"reports", summary.results.size()}, {"matched", matched}});
  });
}

void stage_baseline(Workspace& ws, const PipelineConfig& cfg) {
  const std::string stage = "baseline";
  json spans = json::array();
  for (const auto& e : cfg.events)
    spans.push_back({{"name", e.name},
                     {"start", e.span.start.to_string()},
                     {"end", e.span.end.to_string()}});
  json params = {{"lookback_days", cfg.lookback_days}, {"events", spans}};
  std::vector<std::filesystem::path> inputs = {ws.artifact("speeds_ingested.csv")};
  std::vector<std::filesystem::path> outputs;
  for (const auto& e : cfg.events) outputs.push_back(ws.artifact("baselines_" + e.name + ".csv"));
  if (ws.stage_current(stage, params_hash(params), inputs)) return;
  guarded(ws, stage, [&] {
    auto speeds = parse_speeds(inputs[0]);
    std::vector<TimeSpan> all_spans;
    for (const auto& e : cfg.events) all_spans.push_back(e.span);
    std::map<std::string, std::size_t> counts;
    for (std::size_t ei = 0; ei < cfg.events.size(); ++ei) {
      const auto& event = cfg.events[ei];
      std::map<std::string, BaselineProfile> baselines;
      std::size_t insufficient = 0;
      for (const auto& series : speeds) {
        BaselineProfile profile =
            build_baseline(series, event.span, cfg.lookback_days, all_spans);
        insufficient += profile.insufficient;
        baselines.emplace(series.link_id, std::move(profile));
      }
      write_baselines_artifact(baselines, outputs[ei]);
      counts["links_" + event.name] = baselines.size();
      counts["insufficient_" + event.name] = insufficient;
    }
    ws.record_stage(stage, params_hash(params), inputs, outputs, counts);
  });
}

void stage_metrics(Workspace& ws, const PipelineConfig& cfg) {
  const std::string stage = "metrics";
  json spans = json::array();
  for (const auto& e : cfg.events)
    spans.push_back({{"name", e.name},
                     {"start", e.span.start.to_string()},
                     {"end", e.span.end.to_string()}});
  json params = {{"threshold_pct", cfg.threshold_pct},
                 {"gap_tolerance_hours", cfg.gap_tolerance_hours},
                 {"search_pad_hours", cfg.search_pad_hours},
                 {"events", spans}};
  std::vector<std::filesystem::path> inputs = {ws.artifact("speeds_ingested.csv")};
  for (const auto& e : cfg.events) inputs.push_back(ws.artifact("baselines_" + e.name + ".csv"));
  std::vector<std::filesystem::path> outputs;
  for (const auto& e : cfg.events) outputs.push_back(ws.artifact("metrics_" + e.name + ".csv"));
  if (ws.stage_current(stage, params_hash(params), inputs)) return;
  guarded(ws, stage, [&] {
    auto speeds = parse_speeds(inputs[0]);
    std::map<std::string, std::size_t> counts;
    for (std::size_t ei = 0; ei < cfg.events.size(); ++ei) {
      const auto& event = cfg.events[ei];
      auto baselines = read_baselines_artifact(inputs[1 + ei]);
      EventWindowConfig wcfg = cfg.window_config(event);
      std::vector<MetricsArtifactRow> rows(speeds.size());
      std::vector<std::string> errors(speeds.size());
      parallel_for(speeds.size(), cfg.jobs, [&](std::size_t i) {
        try {
          const SpeedSeries& series = speeds[i];
          MetricsArtifactRow& row = rows[i];
          row.link_id = series.link_id;
          auto it = baselines.find(series.link_id);
          if (it == baselines.end() || it->second.insufficient) {
            row.baseline_insufficient = true;
            return;
          }
          ChangeSeries change = change_series_for(series, it->second, wcfg);
          WindowDetection detection = detect_window(change, wcfg);
          ResilienceMetrics metrics = compute_metrics(change, detection, wcfg);
          row.window = metrics.window;
          row.duration_h = metrics.duration_hours;
          row.change_pct = metrics.change_pct;
          row.auc_pct_h = metrics.auc_pct_hours;
          row.affected = metrics.affected;
          row.low_coverage = metrics.low_coverage;
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      });
      for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
          throw ComputeError("link '" + speeds[i].link_id + "': " + errors[i]);
      write_metrics_artifact(rows, outputs[ei], wcfg);
      std::size_t affected = 0;
      for (const auto& r : rows) affected += r.affected;
      counts["links_" + event.name] = rows.size();
      counts["affected_" + event.name] = affected;
    }
    ws.record_stage(stage, params_hash(params), inputs, outputs, counts);
  });
}

void stage_severity(Workspace& ws, const PipelineConfig& cfg) {
  const std::string stage = "severity";
  json spans = json::array();
  for (const auto& e : cfg.events)
    spans.push_back({{"name", e.name},
                     {"type", std::string(to_string(e.type))},
                     {"start", e.span.start.to_string()},
                     {"end", e.span.end.to_string()}});
  json params = {{"events", spans}, {"search_pad_hours", cfg.search_pad_hours}};
  std::vector<std::filesystem::path> inputs = {ws.artifact(links_final_name(cfg)),
                                               ws.artifact("reports_ingested.csv"),
                                               ws.artifact("matches.csv"),
                                               ws.artifact("speeds_ingested.csv")};
  for (const auto& e : cfg.events) inputs.push_back(ws.artifact("baselines_" + e.name + ".csv"));
  std::vector<std::filesystem::path> outputs;
  for (const auto& e : cfg.events) {
    outputs.push_back(ws.artifact("ups_" + e.name + ".csv"));
    outputs.push_back(ws.artifact("intensity_" + e.name + ".csv"));
  }
  outputs.push_back(ws.artifact("window_summary.csv"));
  outputs.push_back(ws.artifact("network_series.csv"));
  if (ws.stage_current(stage, params_hash(params), inputs)) return;
  guarded(ws, stage, [&] {
    auto links = read_links_artifact(inputs[0]);
    auto reports = read_reports_artifact(inputs[1]);
    auto speeds = parse_speeds(inputs[3]);

    // report_id -> link_id for matched reports
    std::map<std::string, std::string> matched;
    {
      CsvReader reader(inputs[2]);
      reader.require_columns({"report_id", "link_id", "distance_m", "failure_reason"});
      while (auto row = reader.next())
        if (!(*row)[1].empty()) matched[(*row)[0]] = (*row)[1];
    }
    std::map<std::string, std::vector<EventReport>> per_link;
    for (const auto& r : reports) {
      auto it = matched.find(r.report_id);
      if (it != matched.end()) per_link[it->second].push_back(r);
    }

    CsvWriter window_writer(ws.artifact("window_summary.csv"), "window_summary", 1,
                            {"event", "event_type", "first", "last", "count", "duration_h"});
    CsvWriter series_writer(ws.artifact("network_series.csv"), "network_series", 1,
                            {"event", "timestamp", "mean_change_pct", "contributors"});
    std::map<std::string, std::size_t> counts;

    for (std::size_t ei = 0; ei < cfg.events.size(); ++ei) {
      const auto& event = cfg.events[ei];
      EventWindowConfig wcfg = cfg.window_config(event);
      TimeSpan padded{event.span.start.add_hours(-cfg.search_pad_hours),
                      event.span.end.add_hours(cfg.search_pad_hours)};

      // reliability-weighted severity over matched reports of this event's type
      CsvWriter ups_writer(ws.artifact("ups_" + event.name + ".csv"), "ups", 1,
                           {"link_id", "event_type", "report_count", "ups"});
      for (const auto& link : links) {
        auto it = per_link.find(link.link_id);
        UpsRecord record = ups(
            link, event.type,
            it == per_link.end() ? std::span<const EventReport>{} : std::span(it->second));
        ups_writer.row({record.link_id, std::string(to_string(record.event_type)),
                        std::to_string(record.report_count), format_double(record.ups)});
      }
      ups_writer.close();

      // region-wide hourly intensity over the padded span (all reports)
      CsvWriter intensity_writer(ws.artifact("intensity_" + event.name + ".csv"), "intensity", 1,
                                 {"timestamp", "event_type", "report_count", "label"});
      for (const auto& label : classify_hours(reports, event.type, padded))
        intensity_writer.row({label.hour.to_string(), std::string(to_string(label.event_type)),
                              std::to_string(label.report_count),
                              std::string(to_string(label.label))});
      intensity_writer.close();

      // report-window summary: reports of this type touching the span
      std::vector<EventReport> event_reports;
      for (const auto& r : reports)
        if (r.event_type == event.type && r.start_time <= event.span.end &&
            event.span.start <= r.end_time)
          event_reports.push_back(r);
      auto window = report_window(event_reports);
      window_writer.row({event.name, std::string(to_string(event.type)),
                         window ? window->first.to_string() : "",
                         window ? window->last.to_string() : "",
                         std::to_string(event_reports.size()),
                         window ? format_double(window->duration_hours) : ""});
      counts["reports_" + event.name] = event_reports.size();

      // network-aggregate change series over the padded span
      auto baselines = read_baselines_artifact(inputs[4 + ei]);
      std::vector<ChangeSeries> change_series;
      for (const auto& series : speeds) {
        auto it = baselines.find(series.link_id);
        if (it == baselines.end() || it->second.insufficient) continue;
        change_series.push_back(change_series_for(series, it->second, wcfg));
      }
      for (const auto& point : network_aggregate(change_series))
        series_writer.row({event.name, point.hour.to_string(),
                           format_double(point.mean_change_pct),
                           std::to_string(point.contributors)});
    }
    window_writer.close();
    series_writer.close();
    ws.record_stage(stage, params_hash(params), inputs, outputs, counts);
  });
}

void stage_ttest(Workspace& ws, const PipelineConfig& cfg) {
  const std::string stage = "ttest";
  json params = {{"events", json::array()}};
  for (const auto& e : cfg.events) params["events"].push_back(e.name);
  std::vector<std::filesystem::path> inputs = {ws.artifact("network_series.csv")};
  for (const auto& e : cfg.events) inputs.push_back(ws.artifact("intensity_" + e.name + ".csv"));
  std::vector<std::filesystem::path> outputs;
  for (const auto& e : cfg.events) outputs.push_back(ws.artifact("ttest_" + e.name + ".csv"));
  if (ws.stage_current(stage, params_hash(params), inputs)) return;
  guarded(ws, stage, [&] {
    // event -> hour -> mean change
    std::map<std::string, std::map<std::int64_t, double>> series;
    {
      CsvReader reader(inputs[0]);
      reader.require_columns({"event", "timestamp", "mean_change_pct", "contributors"});
      while (auto row = reader.next())
        series[(*row)[0]][Timestamp::parse((*row)[1]).hour_index()] =
            parse_double((*row)[2], "network_series");
    }
    for (std::size_t ei = 0; ei < cfg.events.size(); ++ei) {
      const auto& event = cfg.events[ei];
      std::map<std::string, std::vector<double>> groups;  // none/light/heavy
      CsvReader reader(inputs[1 + ei]);
      reader.require_columns({"timestamp", "event_type", "report_count", "label"});
      while (auto row = reader.next()) {
        auto hour = Timestamp::parse((*row)[0]).hour_index();
        auto it = series[event.name].find(hour);
        if (it != series[event.name].end()) groups[(*row)[3]].push_back(it->second);
      }
      CsvWriter writer(outputs[ei], "ttest", 1,
                       {"event", "event_type", "level", "n", "mean", "sd", "diff", "ci_lo",
                        "ci_hi", "t", "df", "p_value", "significance"});
      auto summarize = [](const std::vector<double>& v) {
        double mean = 0;
        for (double x : v) mean += x;
        mean /= v.empty() ? 1.0 : static_cast<double>(v.size());
        double ss = 0;
        for (double x : v) ss += (x - mean) * (x - mean);
        double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        return std::pair<double, double>{mean, sd};
      };
      const std::vector<double>& none = groups["none"];
      auto [none_mean, none_sd] = summarize(none);
      writer.row({event.name, std::string(to_string(event.type)), "none",
                  std::to_string(none.size()), none.empty() ? "" : format_double(none_mean),
                  none.empty() ? "" : format_double(none_sd), "", "", "", "", "", "", ""});
      for (const std::string level : {"light", "heavy"}) {
        const std::vector<double>& sample = groups[level];
        auto [mean, sd] = summarize(sample);
        std::vector<std::string> row = {event.name, std::string(to_string(event.type)), level,
                                        std::to_string(sample.size()),
                                        sample.empty() ? "" : format_double(mean),
                                        sample.empty() ? "" : format_double(sd),
                                        "", "", "", "", "", "", ""};
        if (sample.size() >= 2 && none.size() >= 2) {
          try {
            auto test = stats::welch_ttest(sample, none);
            row[6] = format_double(test.diff);
            row[7] = format_double(test.ci_lo);
            row[8] = format_double(test.ci_hi);
            row[9] = format_double(test.t_stat);
            row[10] = format_double(test.df);
            row[11] = format_double(test.p_value);
            row[12] = test.significance;
          } catch (const ComputeError&) {
            // degenerate variance: leave the test columns empty
          }
        }
        writer.row(row);
      }
      writer.close();
    }
    ws.record_stage(stage, params_hash(params), inputs, outputs, {});
  });
}

namespace {

struct ModelData {
  gam::DataTable table;
  std::vector<std::string> link_ids;
};

ModelData assemble_model_data(const std::vector<RoadLink>& links,
                              const std::vector<MetricsArtifactRow>& metrics,
                              const std::map<std::string, double>& ups_by_link,
                              const std::map<std::string, BaselineProfile>& baselines) {
  std::map<std::string, const RoadLink*> by_id;
  for (const auto& link : links) by_id[link.link_id] = &link;

  ModelData data;
  std::vector<double> duration, change, auc, min_alt, slope, severity, lat, lon, avg_speed,
      length;
  gam::CategoricalColumn fclass{{}, {"freeway", "arterial", "collector", "local_street"}, 0};
  gam::CategoricalColumn lanes{{}, {"1", "2-3", ">3"}, 0};
  gam::CategoricalColumn divider{{}, {"none", "legal", "physical"}, 0};
  gam::CategoricalColumn intersection{{}, {"false", "true"}, 0};
  gam::CategoricalColumn frontage{{}, {"false", "true"}, 0};

  for (const auto& m : metrics) {
    if (m.baseline_insufficient) continue;  // flagged upstream, excluded here
    auto link_it = by_id.find(m.link_id);
    if (link_it == by_id.end()) continue;
    const RoadLink& link = *link_it->second;
    data.link_ids.push_back(m.link_id);
    duration.push_back(m.duration_h);
    change.push_back(m.change_pct);
    auc.push_back(m.auc_pct_h);
    min_alt.push_back(link.min_altitude_km);
    slope.push_back(link.slope);
    auto ups_it = ups_by_link.find(m.link_id);
    severity.push_back(ups_it == ups_by_link.end() ? 0.0 : ups_it->second);
    LatLon c = link_centroid(link);
    lat.push_back(c.lat);
    lon.push_back(c.lon);
    length.push_back(link.length_miles);
    double speed_sum = 0;
    double speed_n = 0;
    auto b = baselines.find(m.link_id);
    if (b != baselines.end())
      for (const auto& cell : b->second.hour_of_day_fallback) {
        speed_sum += cell.mean_speed * cell.n_obs;
        speed_n += cell.n_obs;
      }
    avg_speed.push_back(speed_n > 0 ? speed_sum / speed_n
                                    : std::numeric_limits<double>::quiet_NaN());
    fclass.codes.push_back(static_cast<int>(link.functional_class));
    lanes.codes.push_back(static_cast<int>(link.lane_category));
    divider.codes.push_back(static_cast<int>(link.divider));
    intersection.codes.push_back(link.is_intersection ? 1 : 0);
    frontage.codes.push_back(link.is_frontage ? 1 : 0);
  }

  auto vec = [](const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))
        .eval();
  };
  data.table.n = data.link_ids.size();
  data.table.numeric["duration"] = vec(duration);
  data.table.numeric["change"] = vec(change);
  data.table.numeric["auc"] = vec(auc);
  data.table.numeric["min_alt_km"] = vec(min_alt);
  data.table.numeric["slope"] = vec(slope);
  data.table.numeric["severity"] = vec(severity);
  data.table.numeric["lat"] = vec(lat);
  data.table.numeric["lon"] = vec(lon);
  data.table.numeric["avg_speed"] = vec(avg_speed);
  data.table.numeric["length_miles"] = vec(length);
  data.table.categorical["fclass"] = std::move(fclass);
  data.table.categorical["lanes"] = std::move(lanes);
  data.table.categorical["divider"] = std::move(divider);
  data.table.categorical["intersection"] = std::move(intersection);
  data.table.categorical["frontage"] = std::move(frontage);
  return data;
}

// iterative VIF screen at the term level: drop the term owning the worst
// offending column until all VIFs <= threshold
std::pair<std::vector<std::string>, std::vector<std::string>> vif_screen(
    const gam::DataTable& table, std::vector<std::string> terms, double threshold) {
  std::vector<std::string> dropped;
  while (terms.size() >= 2) {
    std::vector<std::string> owner;
    std::vector<Eigen::VectorXd> cols;
    for (const auto& term : terms) {
      auto cat = table.categorical.find(term);
      if (cat != table.categorical.end()) {
        for (int level = 0; level < static_cast<int>(cat->second.levels.size()); ++level) {
          if (level == cat->second.reference) continue;
          Eigen::VectorXd dummy(static_cast<Eigen::Index>(table.n));
          for (std::size_t i = 0; i < table.n; ++i)
            dummy(static_cast<Eigen::Index>(i)) = cat->second.codes[i] == level ? 1.0 : 0.0;
          if (dummy.sum() == 0) continue;  // level absent from the data
          cols.push_back(std::move(dummy));
          owner.push_back(term);
        }
      } else {
        cols.push_back(table.numeric.at(term));
        owner.push_back(term);
      }
    }
    if (cols.size() < 2) break;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(table.n),
                      static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = cols[c];
    auto vifs = stats::vif(m);
    double worst = 0;
    std::string worst_term;
    for (std::size_t c = 0; c < vifs.size(); ++c)
      if (vifs[c] > worst) {
        worst = vifs[c];
        worst_term = owner[c];
      }
    if (!(worst > threshold)) break;
    dropped.push_back(worst_term);
    terms.erase(std::find(terms.begin(), terms.end(), worst_term));
  }
  return {terms, dropped};
}

}  // namespace

void stage_gam(Workspace& ws, const PipelineConfig& cfg) {
  const std::string stage = "gam";
  json params = json::array();
  for (const auto& m : cfg.models) {
    json mj = {{"response", m.response},
               {"event", m.event},
               {"family", family_to_string(m.family)},
               {"linear_terms", m.linear_terms},
               {"stepwise", m.stepwise},
               {"vif_threshold", m.vif_threshold},
               {"lambda_grid", m.lambda_grid}};
    for (const auto& s : m.smooth_terms) mj["smooths"].push_back({{"var", s.var}, {"k", s.k}});
    if (m.tensor_term)
      mj["tensor"] = {{"var1", m.tensor_term->var1},
                      {"var2", m.tensor_term->var2},
                      {"k1", m.tensor_term->k1},
                      {"k2", m.tensor_term->k2}};
    params.push_back(std::move(mj));
  }
  std::vector<std::filesystem::path> inputs = {ws.artifact(links_final_name(cfg))};
  std::set<std::string> used_events;
  for (const auto& m : cfg.models) used_events.insert(m.event);
  for (const auto& e : used_events) {
    inputs.push_back(ws.artifact("metrics_" + e + ".csv"));
    inputs.push_back(ws.artifact("ups_" + e + ".csv"));
    inputs.push_back(ws.artifact("baselines_" + e + ".csv"));
  }
  std::vector<std::filesystem::path> outputs;
  for (const auto& m : cfg.models) {
    outputs.push_back(ws.artifact("gam_" + m.response + "_" + m.event + ".csv"));
    outputs.push_back(ws.artifact("gam_" + m.response + "_" + m.event + "_smooth.csv"));
  }
  if (cfg.models.empty()) return;
  if (ws.stage_current(stage, params_hash(params), inputs)) return;
  guarded(ws, stage, [&] {
    auto links = read_links_artifact(inputs[0]);
    std::map<std::string, ModelData> data_by_event;
    for (const auto& e : used_events) {
      auto metrics = read_metrics_artifact(ws.artifact("metrics_" + e + ".csv"));
      std::map<std::string, double> ups_by_link;
      {
        CsvReader reader(ws.artifact("ups_" + e + ".csv"));
        reader.require_columns({"link_id", "event_type", "report_count", "ups"});
        while (auto row = reader.next())
          ups_by_link[(*row)[0]] = parse_double((*row)[3], "ups");
      }
      auto baselines = read_baselines_artifact(ws.artifact("baselines_" + e + ".csv"));
      data_by_event.emplace(e, assemble_model_data(links, metrics, ups_by_link, baselines));
    }

    for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
      const ModelConfig& model = cfg.models[mi];
      const ModelData& data = data_by_event.at(model.event);

      auto [kept, dropped] = vif_screen(data.table, model.linear_terms, model.vif_threshold);
      std::vector<std::string> stepwise_log;
      if (model.stepwise) {
        gam::GamSpec probe;
        probe.response = model.response;
        probe.family = model.family;
        auto fitter = [&](const std::vector<std::string>& selected) -> std::optional<double> {
          gam::GamSpec s = probe;
          s.linear_terms = selected;
          try {
            return gam::fit_gam(s, data.table).aic;
          } catch (const std::exception&) {
            return std::nullopt;
          }
        };
        auto result = stats::forward_stepwise_aic(kept, fitter);
        kept = result.selected;
        stepwise_log = result.log;
      }

      gam::GamSpec spec;
      spec.response = model.response;
      spec.family = model.family;
      spec.linear_terms = kept;
      spec.smooth_terms = model.smooth_terms;
      spec.tensor_term = model.tensor_term;
      if (!model.lambda_grid.empty()) spec.lambda_grid = model.lambda_grid;
      gam::GamFit fit = gam::fit_gam(spec, data.table);

      auto table = gam::summarize_fit(fit);
      CsvWriter writer(outputs[2 * mi], "gam_summary", 1, table.columns);
      writer.comment("family", family_to_string(model.family));
      writer.comment("event", model.event);
      writer.comment("response", model.response);
      {
        std::string ls;
        for (double l : fit.lambdas) ls += (ls.empty() ? "" : " ") + format_double(l);
        writer.comment("lambdas", ls.empty() ? "none" : ls);
      }
      if (model.family == gam::Family::NegBinLog)
        writer.comment("theta", format_double(fit.theta));
      writer.comment("ci_kind", "model-based (penalized-fit covariance)");
      if (!dropped.empty()) {
        std::string ds;
        for (const auto& d : dropped) ds += (ds.empty() ? "" : " ") + d;
        writer.comment("vif_dropped", ds);
      }
      for (const auto& line : stepwise_log) writer.comment("stepwise", line);
      for (const auto& row : table.rows) writer.row(row);
      writer.close();

      CsvWriter curve_writer(outputs[2 * mi + 1], "gam_smooth", 1,
                             {"term", "x1", "x2", "fit", "se", "ci_lo", "ci_hi"});
      for (const auto& p : gam::smooth_curves(fit)) {
        double crit = 1.959963984540054;
        curve_writer.row({p.term, format_double(p.x1), format_double(p.x2),
                          format_double(p.fit), format_double(p.se),
                          format_double(p.fit - crit * p.se),
                          format_double(p.fit + crit * p.se)});
      }
      curve_writer.close();
    }
    ws.record_stage(stage, params_hash(params), inputs, outputs, {});
  });
}

void stage_report(Workspace& ws, const PipelineConfig& cfg) {
  const std::string stage = "report";
  json params = {{"events", json::array()}, {"models", json::array()}};
  std::vector<std::filesystem::path> inputs;
  inputs.push_back(ws.artifact("matches.csv"));
  if (!cfg.events.empty()) inputs.push_back(ws.artifact("window_summary.csv"));
  for (const auto& e : cfg.events) {
    params["events"].push_back(e.name);
    inputs.push_back(ws.artifact("ttest_" + e.name + ".csv"));
    inputs.push_back(ws.artifact("metrics_" + e.name + ".csv"));
  }
  for (const auto& m : cfg.models) {
    params["models"].push_back(m.response + "_" + m.event);
    inputs.push_back(ws.artifact("gam_" + m.response + "_" + m.event + ".csv"));
  }
  std::vector<std::filesystem::path> outputs = {ws.artifact("report.txt")};
  if (ws.stage_current(stage, params_hash(params), inputs)) return;
  guarded(ws, stage, [&] {
    std::string text;
    text += "road traffic resilience report\n";
    text += "==============================\n\n";
    {
      CsvReader reader(ws.artifact("matches.csv"));
      auto rate = reader.comment_value("match_rate");
      text += "report-to-link match rate: " + (rate ? *rate : std::string("n/a")) + "\n\n";
    }
    if (!cfg.events.empty()) {
      text += "report windows per event\n";
      text += "  event | type | first | last | count | duration_h\n";
      CsvReader reader(ws.artifact("window_summary.csv"));
      while (auto row = reader.next()) {
        const auto& r = *row;
        text += "  " + r[0] + " | " + r[1] + " | " + r[2] + " | " + r[3] + " | " + r[4] + " | " +
                r[5] + "\n";
      }
      text += "\n";
    }
    for (const auto& e : cfg.events) {
      auto metrics = read_metrics_artifact(ws.artifact("metrics_" + e.name + ".csv"));
      std::size_t affected = 0;
      double dur = 0, chg = 0, auc = 0;
      for (const auto& m : metrics)
        if (m.affected) {
          ++affected;
          dur += m.duration_h;
          chg += m.change_pct;
          auc += m.auc_pct_h;
        }
      auto round2 = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
      };
      text += "event " + e.name + ": " + std::to_string(affected) + "/" +
              std::to_string(metrics.size()) + " links affected";
      if (affected > 0) {
        double n = static_cast<double>(affected);
        text += "; mean duration " + round2(dur / n) + " h, mean change " + round2(chg / n) +
                " %, mean AUC " + round2(auc / n) + " %.h";
      }
      text += "\n";
      text += "  t-tests (hourly network speed change vs normal hours)\n";
      CsvReader reader(ws.artifact("ttest_" + e.name + ".csv"));
      while (auto row = reader.next()) {
        const auto& r = *row;
        text += "    " + r[2] + ": n=" + r[3] + " mean=" + (r[4].empty() ? "-" : r[4]);
        if (!r[6].empty())
          text += " diff=" + r[6] + r[12] + " (" + r[7] + ", " + r[8] + ")";
        text += "\n";
      }
      text += "\n";
    }
    for (const auto& m : cfg.models) {
      text += "gam " + m.response + " ~ " + m.event + " (" + family_to_string(m.family) + ")\n";
      CsvReader reader(ws.artifact("gam_" + m.response + "_" + m.event + ".csv"));
      while (auto row = reader.next()) {
        const auto& r = *row;
        if (r[0] == "linear")
          text += "  " + r[1] + " = " + r[2] + r[7] + " (" + r[3] + ", " + r[4] + ")\n";
        else if (r[0] == "smooth")
          text += "  " + r[1] + " edf=" + r[5] + r[7] + "\n";
        else
          text += "  " + r[1] + ": " + r[2] + "\n";
      }
      text += "\n";
    }
    write_file(outputs[0], text);
    ws.record_stage(stage, params_hash(params), inputs, outputs, {});
  });
}

void run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  Workspace ws(cfg.workspace, cfg.time_zone);
  stage_ingest(ws, cfg);
  stage_conflate(ws, cfg);
  stage_match(ws, cfg);
  if (!cfg.events.empty()) {
    stage_baseline(ws, cfg);
    stage_metrics(ws, cfg);
    stage_severity(ws, cfg);
    stage_ttest(ws, cfg);
  }
  stage_gam(ws, cfg);
  stage_report(ws, cfg);
}

void run_stage(const std::string& stage, const PipelineConfig& cfg) {
  cfg.validate();
  Workspace ws(cfg.workspace, cfg.time_zone);
  if (stage == "ingest")
    stage_ingest(ws, cfg);
  else if (stage == "conflate")
    stage_conflate(ws, cfg);
  else if (stage == "match")
    stage_match(ws, cfg);
  else if (stage == "baseline")
    stage_baseline(ws, cfg);
  else if (stage == "metrics")
    stage_metrics(ws, cfg);
  else if (stage == "severity")
    stage_severity(ws, cfg);
  else if (stage == "ttest")
    stage_ttest(ws, cfg);
  else if (stage == "gam")
    stage_gam(ws, cfg);
  else if (stage == "report")
    stage_report(ws, cfg);
  else
    throw ConfigError("unknown stage '" + stage + "'");
}

}  // namespace roadres
