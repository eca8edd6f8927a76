#include "roadres/synthetic.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

#include "roadres/csvio.hpp"
#include "roadres/errors.hpp"

namespace roadres {

using json = nlohmann::json;

namespace {

// distribution-free helpers: std::mt19937_64 is bit-portable, the std
// distributions are not
double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * u01(rng); }

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(u01(rng) * (hi - lo + 1.0)) % (hi - lo + 1);
}

int poisson(std::mt19937_64& rng, double mean) {
  double limit = std::exp(-mean);
  double prod = u01(rng);
  int n = 0;
  while (prod > limit && n < 1000) {
    prod *= u01(rng);
    ++n;
  }
  return n;
}

std::string id_tag(const char* prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%s%04d", prefix, i);
  return buf;
}

}  // namespace

void SyntheticScenario::validate() const {
  if (link_count <= 0) throw ConfigError("synthetic: link_count must be > 0");
  if (history_days < 2) throw ConfigError("synthetic: history_days must be >= 2");
  if (inject_impact) {
    if (!(min_depth_pct > 0 && max_depth_pct < 100 && min_depth_pct <= max_depth_pct))
      throw ConfigError("synthetic: depth range must lie inside (0, 100)");
    if (min_duration_hours < 1 || max_duration_hours < min_duration_hours)
      throw ConfigError("synthetic: bad duration range");
    if (max_duration_hours + 6 > event_span_hours)
      throw ConfigError("synthetic: event span too short for the maximum duration");
  }
  if (noise_sigma_mph < 0) throw ConfigError("synthetic: noise sigma must be >= 0");
  if (reliability_min < 0 || reliability_max > 10 || reliability_min > reliability_max)
    throw ConfigError("synthetic: reliability range must lie inside [0, 10]");
  if (!(threshold_pct < 0)) throw ConfigError("synthetic: threshold must be negative");
}

SyntheticOutput gen_synthetic(const SyntheticScenario& sc, const std::filesystem::path& dir) {
  sc.validate();
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(sc.seed);

  SyntheticOutput out;
  out.links_path = dir / "links.geojson";
  out.speeds_path = dir / "speeds.csv";
  out.reports_path = dir / "reports.ndjson";
  out.truth_path = dir / "truth.csv";
  out.config_path = dir / "config.json";

  const Timestamp event_start = sc.event_start;
  const Timestamp event_end = event_start.add_hours(sc.event_span_hours);

  static const char* kClasses[] = {"freeway", "arterial", "collector", "local_street"};
  static const char* kLanes[] = {"1", "2-3", ">3"};
  static const char* kDividers[] = {"none", "legal", "physical"};

  struct LinkDraw {
    std::string id, tmc, name;
    double lat0, lon0, lon1;
    double base_speed;
    double depth;
    int onset_offset_h;
    int duration_h;
    double length_miles;
  };
  std::vector<LinkDraw> draws;

  json features = json::array();
  for (int i = 0; i < sc.link_count; ++i) {
    LinkDraw d;
    d.id = id_tag("L", i);
    d.tmc = id_tag("T", i);
    d.name = "synthetic road " + std::to_string(i);
    // one link per 0.02-degree grid slot, jittered so coordinates stay distinct
    d.lat0 = 32.5 + 0.02 * (i / 40) + uniform(rng, 0.0, 0.004);
    d.lon0 = -97.5 + 0.02 * (i % 40);
    d.lon1 = d.lon0 + uniform(rng, 0.004, 0.009);
    d.base_speed = uniform(rng, 90.0, 98.0);
    d.depth = uniform(rng, sc.min_depth_pct, sc.max_depth_pct);
    d.duration_h = uniform_int(rng, sc.min_duration_hours, sc.max_duration_hours);
    d.onset_offset_h = uniform_int(rng, 2, sc.event_span_hours - d.duration_h - 3);
    d.length_miles =
        polyline_length_miles(std::vector<LatLon>{{d.lat0, d.lon0}, {d.lat0, d.lon1}});

    json props;
    props["id"] = d.id;
    props["tmc"] = d.tmc;
    props["fclass"] = kClasses[static_cast<int>(u01(rng) * 4) % 4];
    props["lanes"] = kLanes[static_cast<int>(u01(rng) * 3) % 3];
    props["divider"] = kDividers[static_cast<int>(u01(rng) * 3) % 3];
    props["intersection"] = u01(rng) < 0.3;
    props["frontage"] = u01(rng) < 0.1;
    props["min_alt_km"] = uniform(rng, 0.1, 0.4);
    props["slope"] = uniform(rng, 0.0, 4.0);
    props["name"] = d.name;
    props["direction"] = "E";
    json f;
    f["type"] = "Feature";
    f["properties"] = props;
    f["geometry"] = {{"type", "LineString"},
                     {"coordinates", json::array({json::array({d.lon0, d.lat0}),
                                                  json::array({d.lon1, d.lat0})})}};
    features.push_back(std::move(f));
    draws.push_back(std::move(d));
  }
  json collection = {{"type", "FeatureCollection"}, {"features", features}};
  write_file(out.links_path, collection.dump(1) + "\n");

  // hour-of-day-periodic clean profile + bounded noise + rectangular drop
  {
    CsvWriter speeds(out.speeds_path, "speeds", 1,
                     {"segment_id", "timestamp", "speed_mph"});
    const Timestamp first = event_start.add_days(-sc.history_days);
    const Timestamp last = event_end.add_days(sc.post_event_days);
    for (const auto& d : draws) {
      std::array<double, 24> profile;
      for (int h = 0; h < 24; ++h)
        profile[h] = d.base_speed + 6.0 * std::sin(2.0 * 3.14159265358979323846 * h / 24.0);
      const Timestamp onset = event_start.add_hours(d.onset_offset_h);
      const Timestamp drop_end = onset.add_hours(d.duration_h);  // exclusive
      for (Timestamp t = first; t <= last; t = t.add_hours(1)) {
        double clean = profile[static_cast<std::size_t>(t.hour_of_day())];
        if (sc.inject_impact && onset <= t && t < drop_end) clean *= (1.0 - d.depth / 100.0);
        double noise =
            sc.noise_sigma_mph > 0 ? uniform(rng, -sc.noise_sigma_mph, sc.noise_sigma_mph) : 0.0;
        speeds.row({d.tmc, t.to_string(), format_double(clean + noise)});
      }
    }
    speeds.close();
  }

  // matched-by-construction reports at the link midpoint
  std::string report_lines;
  int report_seq = 0;
  out.truth.reserve(draws.size());
  for (const auto& d : draws) {
    SyntheticTruth truth;
    truth.link_id = d.tmc;
    truth.onset = event_start.add_hours(d.onset_offset_h);
    if (sc.inject_impact) {
      truth.depth_pct = d.depth;
      truth.duration_hours = d.duration_h;
      truth.change_pct = -d.depth;
      truth.auc_pct_hours = -d.depth * (static_cast<double>(d.duration_h) - 0.5);
    }
    int count = poisson(rng, sc.reports_per_link_mean);
    double weight_sum = 0;
    for (int r = 0; r < count; ++r) {
      double reliability =
          static_cast<double>(uniform_int(rng, sc.reliability_min, sc.reliability_max));
      weight_sum += reliability;
      int start_h = uniform_int(rng, 0, sc.event_span_hours - 2);
      Timestamp start = event_start.add_hours(start_h);
      Timestamp end = start.add_hours(uniform_int(rng, 1, 2));
      json rep;
      rep["id"] = id_tag("R", report_seq++);
      rep["subtype"] = sc.event_type == EventType::Flood        ? "Heavy Rain"
                       : sc.event_type == EventType::WinterStorm ? "Road Icy"
                       : sc.event_type == EventType::Fog         ? "Fog"
                                                                  : "Unknown";
      rep["lat"] = d.lat0;
      rep["lon"] = 0.5 * (d.lon0 + d.lon1);
      rep["start"] = start.to_string();
      rep["end"] = end.to_string();
      rep["road_name"] = d.name;
      rep["direction"] = "E";
      rep["reliability"] = reliability;
      report_lines += rep.dump() + "\n";
    }
    truth.ups = weight_sum / (10.0 * d.length_miles);
    out.truth.push_back(truth);
  }
  write_file(out.reports_path, report_lines);

  {
    CsvWriter truth_csv(out.truth_path, "synthetic_truth", 1,
                        {"link_id", "depth_pct", "onset", "duration_h", "change_pct",
                         "auc_pct_h", "ups"});
    for (const auto& t : out.truth)
      truth_csv.row({t.link_id, format_double(t.depth_pct), t.onset.to_string(),
                     std::to_string(t.duration_hours), format_double(t.change_pct),
                     format_double(t.auc_pct_hours), format_double(t.ups)});
    truth_csv.close();
  }

  PipelineConfig cfg;
  cfg.workspace = dir / "workspace";
  cfg.time_zone = "America/Chicago";
  cfg.links_path = out.links_path;
  cfg.links_format = LinkFormat::GeoJson;
  cfg.speeds_path = out.speeds_path;
  cfg.reports_path = out.reports_path;
  cfg.threshold_pct = sc.threshold_pct;
  cfg.gap_tolerance_hours = 2;
  cfg.lookback_days = 30;
  cfg.search_pad_hours = 48;
  cfg.conflate = true;
  cfg.jobs = 1;
  EventConfig event;
  event.name = sc.event_name;
  event.type = sc.event_type;
  event.span = {event_start, event_end};
  cfg.events.push_back(event);
  cfg.save_json(out.config_path);
  out.config = cfg;
  return out;
}

std::vector<SyntheticTruth> read_truth(const std::filesystem::path& path) {
  CsvReader reader(path);
  reader.require_columns(
      {"link_id", "depth_pct", "onset", "duration_h", "change_pct", "auc_pct_h", "ups"});
  std::vector<SyntheticTruth> out;
  while (auto row = reader.next()) {
    const auto& r = *row;
    SyntheticTruth t;
    t.link_id = r[0];
    t.depth_pct = parse_double(r[1], "truth");
    t.onset = Timestamp::parse(r[2]);
    t.duration_hours = static_cast<int>(parse_int(r[3], "truth"));
    t.change_pct = parse_double(r[4], "truth");
    t.auc_pct_hours = parse_double(r[5], "truth");
    t.ups = parse_double(r[6], "truth");
    out.push_back(t);
  }
  return out;
}

}  // namespace roadres
