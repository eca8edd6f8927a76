#include "roadres/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "roadres/csvio.hpp"
#include "roadres/errors.hpp"

namespace roadres {

using json = nlohmann::json;

namespace {

bool parse_bool(std::string_view s, const std::string& context) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ParseError(context + ": bad boolean '" + std::string(s) + "'");
}

std::vector<LatLon> parse_wkt_linestring(std::string_view wkt, const std::string& context) {
  // LINESTRING (lon lat, lon lat, ...)
  auto open = wkt.find('(');
  auto close = wkt.rfind(')');
  if (wkt.substr(0, 10) != "LINESTRING" || open == std::string_view::npos ||
      close == std::string_view::npos || close < open)
    throw ParseError(context + ": bad WKT '" + std::string(wkt) + "'");
  std::vector<LatLon> pts;
  std::string_view body = wkt.substr(open + 1, close - open - 1);
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto comma = body.find(',', pos);
    std::string_view pair = body.substr(pos, comma == std::string_view::npos ? body.size() - pos
                                                                             : comma - pos);
    while (!pair.empty() && pair.front() == ' ') pair.remove_prefix(1);
    while (!pair.empty() && pair.back() == ' ') pair.remove_suffix(1);
    auto space = pair.find(' ');
    if (space == std::string_view::npos) throw ParseError(context + ": bad WKT point");
    pts.push_back({parse_double(pair.substr(space + 1), context),
                   parse_double(pair.substr(0, space), context)});
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return pts;
}

const json& require_prop(const json& props, const char* key, const std::string& context) {
  auto it = props.find(key);
  if (it == props.end() || it->is_null())
    throw ParseError(context + ": missing required attribute '" + key + "'");
  return *it;
}

RoadLink finish_link(RoadLink link, bool has_length, const std::string& context) {
  if (!has_length) link.length_miles = polyline_length_miles(link.geometry);
  if (link.geometry.size() >= 2 &&
      !(link.geometry.front().lat == link.geometry.back().lat &&
        link.geometry.front().lon == link.geometry.back().lon))
    link.bearing_deg = derive_bearing(link.geometry);
  link.road_name = normalize_road_name(link.road_name);
  validate_link(link, context);
  return link;
}

std::vector<RoadLink> parse_links_geojson(const std::filesystem::path& path,
                                          LinkParseStats* stats) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features"))
    throw ParseError(path.string() + ": not a GeoJSON FeatureCollection");

  std::vector<RoadLink> links;
  std::size_t index = 0;
  for (const auto& feature : doc["features"]) {
    std::string context = path.string() + ": feature " + std::to_string(index);
    ++index;
    if (stats) ++stats->features;
    const json& props = feature.at("properties");
    if (props.value("exclude", false)) {
      if (stats) ++stats->excluded;
      continue;
    }
    const json& geom = feature.at("geometry");
    if (geom.value("type", "") != "LineString")
      throw ParseError(context + ": geometry must be LineString");
    RoadLink link;
    for (const auto& c : geom.at("coordinates")) {
      if (!c.is_array() || c.size() < 2) throw ParseError(context + ": bad coordinate");
      link.geometry.push_back({c[1].get<double>(), c[0].get<double>()});
    }
    link.link_id = require_prop(props, "id", context).get<std::string>();
    if (props.contains("tmc") && !props["tmc"].is_null())
      link.tmc_code = props["tmc"].get<std::string>();
    link.functional_class =
        functional_class_from_string(require_prop(props, "fclass", context).get<std::string>());
    link.lane_category =
        lane_category_from_string(require_prop(props, "lanes", context).get<std::string>());
    link.divider =
        divider_type_from_string(require_prop(props, "divider", context).get<std::string>());
    link.is_intersection = require_prop(props, "intersection", context).get<bool>();
    link.is_frontage = require_prop(props, "frontage", context).get<bool>();
    link.min_altitude_km = require_prop(props, "min_alt_km", context).get<double>();
    link.slope = require_prop(props, "slope", context).get<double>();
    link.road_name = require_prop(props, "name", context).get<std::string>();
    if (props.contains("direction") && !props["direction"].is_null())
      link.direction_tag = props["direction"].get<std::string>();
    bool has_length = props.contains("length_miles") && !props["length_miles"].is_null();
    if (has_length) link.length_miles = props["length_miles"].get<double>();
    try {
      links.push_back(finish_link(std::move(link), has_length, context));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(context + ": " + e.what());
    }
  }
  return links;
}

std::vector<RoadLink> parse_links_csv(const std::filesystem::path& path, LinkParseStats* stats) {
  CsvReader reader(path);
  static const std::vector<std::string> cols = {"id",       "tmc",       "fclass", "lanes",
                                                "divider",  "intersection", "frontage",
                                                "min_alt_km", "slope",   "name",   "direction",
                                                "exclude",  "length_miles", "wkt"};
  reader.require_columns(cols);
  std::vector<RoadLink> links;
  while (auto row = reader.next()) {
    std::string context = path.string() + ": row " + std::to_string(reader.line_number());
    if (stats) ++stats->features;
    const auto& r = *row;
    if (!r[11].empty() && parse_bool(r[11], context)) {
      if (stats) ++stats->excluded;
      continue;
    }
    for (std::size_t i : {0u, 2u, 3u, 4u, 5u, 6u, 7u, 8u, 9u})
      if (r[i].empty()) throw ParseError(context + ": missing required attribute '" + cols[i] + "'");
    RoadLink link;
    link.link_id = r[0];
    if (!r[1].empty()) link.tmc_code = r[1];
    link.functional_class = functional_class_from_string(r[2]);
    link.lane_category = lane_category_from_string(r[3]);
    link.divider = divider_type_from_string(r[4]);
    link.is_intersection = parse_bool(r[5], context);
    link.is_frontage = parse_bool(r[6], context);
    link.min_altitude_km = parse_double(r[7], context);
    link.slope = parse_double(r[8], context);
    link.road_name = r[9];
    if (!r[10].empty()) link.direction_tag = r[10];
    bool has_length = !r[12].empty();
    if (has_length) link.length_miles = parse_double(r[12], context);
    link.geometry = parse_wkt_linestring(r[13], context);
    links.push_back(finish_link(std::move(link), has_length, context));
  }
  return links;
}

}  // namespace

std::vector<RoadLink> parse_links(const std::filesystem::path& path, LinkFormat format,
                                  LinkParseStats* stats) {
  return format == LinkFormat::GeoJson ? parse_links_geojson(path, stats)
                                       : parse_links_csv(path, stats);
}

std::vector<SpeedSeries> parse_speeds(const std::filesystem::path& path, SpeedParseStats* stats) {
  CsvReader reader(path);
  reader.require_columns({"segment_id", "timestamp", "speed_mph"});
  // map link -> (hour -> speed), last write wins
  std::map<std::string, std::map<std::int64_t, double>> grid;
  while (auto row = reader.next()) {
    std::string context = path.string() + ": row " + std::to_string(reader.line_number());
    const auto& r = *row;
    if (stats) ++stats->rows;
    Timestamp t = Timestamp::parse(r[1]);
    if (!t.hour_aligned()) throw ParseError(context + ": timestamp not hour-aligned '" + r[1] + "'");
    double speed = parse_double(r[2], context);
    if (!(speed > 0)) {
      if (stats) ++stats->dropped_nonpositive;
      continue;
    }
    auto& cells = grid[r[0]];
    auto [it, inserted] = cells.insert_or_assign(t.hour_index(), speed);
    (void)it;
    if (!inserted && stats) ++stats->duplicates;
  }
  std::vector<SpeedSeries> out;
  out.reserve(grid.size());
  for (auto& [id, cells] : grid) {
    SpeedSeries series;
    series.link_id = id;
    series.samples.reserve(cells.size());
    for (auto& [hour, speed] : cells) series.samples.push_back({Timestamp{hour * 60}, speed});
    out.push_back(std::move(series));
  }
  return out;
}

std::vector<EventReport> parse_reports(const std::filesystem::path& path) {
  std::string content = read_file(path);
  std::vector<EventReport> reports;
  std::size_t pos = 0, line_no = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    std::string_view line(content.data() + pos,
                          (nl == std::string::npos ? content.size() : nl) - pos);
    pos = (nl == std::string::npos) ? content.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::string context = path.string() + ": line " + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(context + ": invalid JSON: " + e.what());
    }
    try {
      EventReport rep;
      rep.report_id = obj.at("id").get<std::string>();
      rep.raw_subtype = obj.at("subtype").get<std::string>();
      rep.event_type = event_type_from_subtype(rep.raw_subtype);
      rep.location = {obj.at("lat").get<double>(), obj.at("lon").get<double>()};
      if (!valid_coordinate(rep.location)) throw ParseError(context + ": coordinate out of range");
      rep.start_time = Timestamp::parse(obj.at("start").get<std::string>());
      rep.end_time = Timestamp::parse(obj.at("end").get<std::string>());
      if (rep.end_time < rep.start_time) throw ParseError(context + ": end before start");
      rep.road_name = normalize_road_name(obj.at("road_name").get<std::string>());
      if (obj.contains("direction") && !obj["direction"].is_null())
        rep.direction_tag = obj["direction"].get<std::string>();
      rep.reliability = obj.at("reliability").get<double>();
      if (!(rep.reliability >= 0.0 && rep.reliability <= 10.0))
        throw ParseError(context + ": reliability outside [0,10]");
      reports.push_back(std::move(rep));
    } catch (const ParseError&) {
      throw;
    } catch (const json::exception& e) {
      throw ParseError(context + ": " + e.what());
    }
  }
  return reports;
}

namespace {

// Length-weighted mode; ties broken by lexicographically smallest key.
class WeightedMode {
 public:
  void add(std::string_view key, double weight) { weights_[std::string(key)] += weight; }
  const std::string& winner() const {
    const std::string* best = nullptr;
    double best_w = -1;
    for (const auto& [k, w] : weights_) {
      if (w > best_w || (w == best_w && best && k < *best)) {
        best = &k;
        best_w = w;
      }
    }
    return *best;
  }
  std::size_t distinct() const { return weights_.size(); }

 private:
  std::map<std::string, double> weights_;
};

}  // namespace

std::vector<RoadLink> conflate_by_tmc(const std::vector<RoadLink>& links, ConflateStats* stats) {
  std::map<std::string, std::vector<const RoadLink*>> groups;
  for (const auto& link : links) {
    if (!link.tmc_code)
      throw ComputeError("conflate_by_tmc: link '" + link.link_id + "' has no tmc_code");
    if (!(link.length_miles > 0))
      throw ComputeError("conflate_by_tmc: link '" + link.link_id + "' has non-positive length");
    groups[*link.tmc_code].push_back(&link);
  }
  std::vector<RoadLink> out;
  out.reserve(groups.size());
  for (const auto& [tmc, members] : groups) {
    if (stats) ++stats->groups;
    WeightedMode fclass, lanes, divider, intersection, frontage, name, direction;
    double total_length = 0, alt_sum = 0, slope_sum = 0;
    RoadLink merged;
    for (const RoadLink* m : members) {
      double w = m->length_miles;
      total_length += w;
      alt_sum += w * m->min_altitude_km;
      slope_sum += w * m->slope;
      fclass.add(to_string(m->functional_class), w);
      lanes.add(to_string(m->lane_category), w);
      divider.add(to_string(m->divider), w);
      intersection.add(m->is_intersection ? "true" : "false", w);
      frontage.add(m->is_frontage ? "true" : "false", w);
      name.add(m->road_name, w);
      if (m->direction_tag) direction.add(*m->direction_tag, w);
      merged.geometry.insert(merged.geometry.end(), m->geometry.begin(), m->geometry.end());
    }
    merged.link_id = tmc;
    merged.tmc_code = tmc;
    merged.length_miles = total_length;
    merged.functional_class = functional_class_from_string(fclass.winner());
    merged.lane_category = lane_category_from_string(lanes.winner());
    merged.divider = divider_type_from_string(divider.winner());
    merged.is_intersection = intersection.winner() == "true";
    merged.is_frontage = frontage.winner() == "true";
    merged.min_altitude_km = alt_sum / total_length;
    merged.slope = slope_sum / total_length;
    merged.road_name = name.winner();
    if (direction.distinct() > 0) {
      merged.direction_tag = direction.winner();
      if (direction.distinct() > 1 && stats) ++stats->direction_conflicts;
    }
    // closed loops cannot carry an endpoint bearing; fall back to the longest member
    if (merged.geometry.front().lat == merged.geometry.back().lat &&
        merged.geometry.front().lon == merged.geometry.back().lon) {
      const RoadLink* longest = members.front();
      for (const RoadLink* m : members)
        if (m->length_miles > longest->length_miles) longest = m;
      merged.bearing_deg = longest->bearing_deg;
    } else {
      merged.bearing_deg = derive_bearing(merged.geometry);
    }
    out.push_back(std::move(merged));
  }
  return out;
}

Workspace::Workspace(std::filesystem::path root, std::string time_zone)
    : root_(std::move(root)), time_zone_(std::move(time_zone)) {
  if (time_zone_.empty()) throw ConfigError("workspace time zone must be declared");
  std::filesystem::create_directories(root_);
  load();
}

void Workspace::load() {
  if (std::filesystem::exists(manifest_path()))
    manifest_json_ = read_file(manifest_path());
  else
    manifest_json_ = json{{"time_zone", time_zone_}, {"stages", json::object()}}.dump(2);
}

void Workspace::save() const { write_file(manifest_path(), manifest_json_ + "\n"); }

namespace {
json hash_map(const std::vector<std::filesystem::path>& files) {
  json m = json::object();
  for (const auto& f : files) m[f.string()] = hash_hex(fnv1a64_file(f));
  return m;
}
}  // namespace

bool Workspace::stage_current(const std::string& stage, const std::string& params_hash,
                              const std::vector<std::filesystem::path>& inputs) const {
  json manifest = json::parse(manifest_json_);
  const auto& stages = manifest["stages"];
  if (!stages.contains(stage)) return false;
  const json& entry = stages[stage];
  if (entry.value("status", "") != "ok") return false;
  if (entry.value("params", "") != params_hash) return false;
  json current_inputs;
  try {
    current_inputs = hash_map(inputs);
  } catch (const ParseError&) {
    return false;  // an input disappeared
  }
  if (entry.value("inputs", json::object()) != current_inputs) return false;
  const json outputs = entry.value("outputs", json::object());
  for (const auto& [path, hash] : outputs.items()) {
    if (!std::filesystem::exists(path)) return false;
    if (hash_hex(fnv1a64_file(path)) != hash.get<std::string>()) return false;
  }
  return true;
}

void Workspace::record_stage(const std::string& stage, const std::string& params_hash,
                             const std::vector<std::filesystem::path>& inputs,
                             const std::vector<std::filesystem::path>& outputs,
                             const std::map<std::string, std::size_t>& row_counts) {
  json manifest = json::parse(manifest_json_);
  json entry;
  entry["status"] = "ok";
  entry["params"] = params_hash;
  entry["inputs"] = hash_map(inputs);
  entry["outputs"] = hash_map(outputs);
  json rows = json::object();
  for (const auto& [k, v] : row_counts) rows[k] = v;
  entry["rows"] = rows;
  manifest["stages"][stage] = entry;
  manifest["time_zone"] = time_zone_;
  manifest_json_ = manifest.dump(2);
  save();
}

void Workspace::mark_stale(const std::string& stage) {
  json manifest = json::parse(manifest_json_);
  if (manifest["stages"].contains(stage)) {
    manifest["stages"][stage]["status"] = "stale";
    manifest_json_ = manifest.dump(2);
    save();
  }
}

}  // namespace roadres
