#include <doctest.h>

#include <cmath>

#include "roadres/core.hpp"
#include "roadres/errors.hpp"
#include "roadres/ingest.hpp"
#include "test_util.hpp"

using namespace roadres;

namespace {

const char* kGeoJson = R"({"type":"FeatureCollection","features":[
{"type":"Feature","properties":{"id":"L1","tmc":"T1","fclass":"freeway","lanes":"2-3","divider":"none","intersection":false,"frontage":false,"min_alt_km":0.2,"slope":1.5,"name":"Main St","direction":"N"},"geometry":{"type":"LineString","coordinates":[[-97.0,32.8],[-97.0,32.81]]}},
{"type":"Feature","properties":{"id":"L2","tmc":"T1","fclass":"arterial","lanes":"1","divider":"legal","intersection":true,"frontage":false,"min_alt_km":0.3,"slope":0.5,"name":"Main St"},"geometry":{"type":"LineString","coordinates":[[-97.0,32.81],[-97.0,32.83]]}},
{"type":"Feature","properties":{"id":"L3","tmc":"T2","fclass":"local_street","lanes":">3","divider":"physical","intersection":false,"frontage":true,"min_alt_km":0.1,"slope":2.0,"name":"Oak Ave","length_miles":0.5},"geometry":{"type":"LineString","coordinates":[[-96.9,32.7],[-96.89,32.7]]}}
]})";

RoadLink make_link(const std::string& id, const std::string& tmc, double length,
                   LaneCategory lanes, double alt) {
  RoadLink link;
  link.link_id = id;
  link.tmc_code = tmc;
  link.geometry = {{32.0, -97.0}, {32.0 + 0.001 * length, -97.0}};
  link.length_miles = length;
  link.bearing_deg = 0;
  link.lane_category = lanes;
  link.min_altitude_km = alt;
  link.road_name = "main st";
  return link;
}

}  // namespace

TEST_CASE("parse_links geojson fixture") {
  auto dir = testutil::temp_dir("links");
  testutil::write(dir / "links.geojson", kGeoJson);
  LinkParseStats stats;
  auto links = parse_links(dir / "links.geojson", LinkFormat::GeoJson, &stats);
  REQUIRE(links.size() == 3);
  CHECK(stats.features == 3);
  CHECK(links[0].link_id == "L1");
  CHECK(links[0].functional_class == FunctionalClass::Freeway);
  CHECK(links[0].lane_category == LaneCategory::TwoThree);
  CHECK(links[0].divider == DividerType::NoDivider);
  CHECK(links[0].road_name == "main st");
  CHECK(links[0].direction_tag == "N");
  CHECK(links[0].bearing_deg == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(links[1].is_intersection);
  CHECK(links[2].is_frontage);
  CHECK(links[2].length_miles == 0.5);  // taken from the file, not recomputed
  CHECK(links[0].length_miles > 0.0);
}

TEST_CASE("parse_links computes great-circle length when absent") {
  auto dir = testutil::temp_dir("linklen");
  std::string gj = R"({"type":"FeatureCollection","features":[
{"type":"Feature","properties":{"id":"EQ","fclass":"freeway","lanes":"1","divider":"none","intersection":false,"frontage":false,"min_alt_km":0.0,"slope":0.0,"name":"equator"},"geometry":{"type":"LineString","coordinates":[[0.0,0.0],[0.1,0.0]]}}
]})";
  testutil::write(dir / "eq.geojson", gj);
  auto links = parse_links(dir / "eq.geojson", LinkFormat::GeoJson);
  REQUIRE(links.size() == 1);
  // independent haversine oracle for 0.1 deg of longitude on the equator
  double oracle_m = haversine_m({0.0, 0.0}, {0.0, 0.1});
  double oracle_miles = oracle_m / kMetersPerMile;
  CHECK(oracle_miles == doctest::Approx(6.9093).epsilon(2e-4));  // frozen oracle value
  CHECK(links[0].length_miles == doctest::Approx(oracle_miles).epsilon(1e-12));
}

TEST_CASE("parse_links error paths cite the feature") {
  auto dir = testutil::temp_dir("linkerr");
  std::string missing = R"({"type":"FeatureCollection","features":[
{"type":"Feature","properties":{"id":"A","fclass":"freeway","lanes":"1","divider":"none","intersection":false,"frontage":false,"min_alt_km":0.0,"slope":0.0,"name":"a"},"geometry":{"type":"LineString","coordinates":[[0,0],[0.1,0]]}},
{"type":"Feature","properties":{"id":"B","lanes":"1","divider":"none","intersection":false,"frontage":false,"min_alt_km":0.0,"slope":0.0,"name":"b"},"geometry":{"type":"LineString","coordinates":[[0,0],[0.1,0]]}}
]})";
  testutil::write(dir / "missing.geojson", missing);
  CHECK_THROWS_WITH_AS(parse_links(dir / "missing.geojson", LinkFormat::GeoJson),
                       doctest::Contains("feature 1"), ParseError);

  std::string bad_enum = R"({"type":"FeatureCollection","features":[
{"type":"Feature","properties":{"id":"A","fclass":"motorway","lanes":"1","divider":"none","intersection":false,"frontage":false,"min_alt_km":0.0,"slope":0.0,"name":"a"},"geometry":{"type":"LineString","coordinates":[[0,0],[0.1,0]]}}
]})";
  testutil::write(dir / "badenum.geojson", bad_enum);
  CHECK_THROWS_WITH_AS(parse_links(dir / "badenum.geojson", LinkFormat::GeoJson),
                       doctest::Contains("motorway"), ParseError);
}

TEST_CASE("parse_links csv with WKT geometry and exclusion flag") {
  auto dir = testutil::temp_dir("linkcsv");
  std::string csv =
      "id,tmc,fclass,lanes,divider,intersection,frontage,min_alt_km,slope,name,direction,exclude,"
      "length_miles,wkt\n"
      "L1,T1,collector,2-3,none,false,false,0.2,1,\"Elm St\",E,false,,\"LINESTRING (-97.0 32.8, "
      "-96.99 32.8)\"\n"
      "RAMP,T9,freeway,1,none,false,false,0.2,1,ramp,,true,,\"LINESTRING (-97.0 32.9, -96.99 "
      "32.9)\"\n";
  testutil::write(dir / "links.csv", csv);
  LinkParseStats stats;
  auto links = parse_links(dir / "links.csv", LinkFormat::Csv, &stats);
  REQUIRE(links.size() == 1);  // the flagged row is filtered
  CHECK(stats.excluded == 1);
  CHECK(links[0].link_id == "L1");
  CHECK(links[0].road_name == "elm st");
  CHECK(links[0].geometry.size() == 2);
  CHECK(links[0].bearing_deg == doctest::Approx(90.0).epsilon(1e-6));
}

TEST_CASE("parse_speeds grouping, duplicates and drops") {
  auto dir = testutil::temp_dir("speeds");
  std::string csv = "segment_id,timestamp,speed_mph\n";
  for (int h = 0; h < 48; ++h) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "S1,2022-03-0%dT%02d:00,%d\n", 1 + h / 24, h % 24, 40 + h % 5);
    csv += buf;
  }
  testutil::write(dir / "speeds.csv", csv);
  SpeedParseStats stats;
  auto series = parse_speeds(dir / "speeds.csv", &stats);
  REQUIRE(series.size() == 1);
  CHECK(series[0].samples.size() == 48);
  CHECK(stats.rows == 48);
  for (std::size_t i = 1; i < series[0].samples.size(); ++i)
    CHECK(series[0].samples[i].t.minutes > series[0].samples[i - 1].t.minutes);

  // duplicate hour keeps the last value; zero speed is dropped with a count
  std::string dup =
      "segment_id,timestamp,speed_mph\n"
      "S1,2022-03-01T10:00,50\n"
      "S1,2022-03-01T10:00,55\n"
      "S1,2022-03-01T11:00,0\n";
  testutil::write(dir / "dup.csv", dup);
  SpeedParseStats dup_stats;
  auto dup_series = parse_speeds(dir / "dup.csv", &dup_stats);
  REQUIRE(dup_series.size() == 1);
  REQUIRE(dup_series[0].samples.size() == 1);
  CHECK(dup_series[0].samples[0].speed_mph == 55.0);
  CHECK(dup_stats.duplicates == 1);
  CHECK(dup_stats.dropped_nonpositive == 1);

  std::string bad = "segment_id,timestamp,speed_mph\nS1,yesterday,50\n";
  testutil::write(dir / "bad.csv", bad);
  CHECK_THROWS_AS(parse_speeds(dir / "bad.csv"), ParseError);

  std::string misaligned = "segment_id,timestamp,speed_mph\nS1,2022-03-01T10:30,50\n";
  testutil::write(dir / "misaligned.csv", misaligned);
  CHECK_THROWS_AS(parse_speeds(dir / "misaligned.csv"), ParseError);
}

TEST_CASE("parse_reports ndjson") {
  auto dir = testutil::temp_dir("reports");
  std::string nd =
      R"({"id":"R1","subtype":"Heavy Rain","lat":32.8,"lon":-97.0,"start":"2022-08-21T15:00","end":"2022-08-21T16:00","road_name":"Main St","direction":"N","reliability":7})"
      "\n"
      R"({"id":"R2","subtype":"Road Icy","lat":32.9,"lon":-97.1,"start":"2022-02-02T16:00","end":"2022-02-02T18:30","road_name":"Oak Ave","reliability":9.5})"
      "\n";
  testutil::write(dir / "r.ndjson", nd);
  auto reports = parse_reports(dir / "r.ndjson");
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].event_type == EventType::Flood);
  CHECK(reports[0].road_name == "main st");
  CHECK(reports[0].reliability == 7.0);
  CHECK(reports[1].event_type == EventType::WinterStorm);
  CHECK(!reports[1].direction_tag.has_value());

  testutil::write(dir / "bad_rel.ndjson",
                  R"({"id":"R1","subtype":"Fog","lat":1,"lon":1,"start":"2022-01-01T00:00","end":"2022-01-01T01:00","road_name":"x","reliability":11})"
                  "\n");
  CHECK_THROWS_WITH_AS(parse_reports(dir / "bad_rel.ndjson"), doctest::Contains("reliability"),
                       ParseError);

  testutil::write(dir / "bad_span.ndjson",
                  R"({"id":"R1","subtype":"Fog","lat":1,"lon":1,"start":"2022-01-02T00:00","end":"2022-01-01T01:00","road_name":"x","reliability":5})"
                  "\n");
  CHECK_THROWS_WITH_AS(parse_reports(dir / "bad_span.ndjson"),
                       doctest::Contains("end before start"), ParseError);
}

TEST_CASE("conflate_by_tmc weighted mode and mean") {
  auto a = make_link("L1", "T1", 1.0, LaneCategory::One, 10.0);
  auto b = make_link("L2", "T1", 3.0, LaneCategory::TwoThree, 20.0);
  ConflateStats stats;
  auto merged = conflate_by_tmc({a, b}, &stats);
  REQUIRE(merged.size() == 1);
  CHECK(stats.groups == 1);
  CHECK(merged[0].link_id == "T1");
  CHECK(merged[0].lane_category == LaneCategory::TwoThree);  // weight 3 beats 1
  CHECK(merged[0].min_altitude_km == doctest::Approx(17.5).epsilon(1e-12));
  CHECK(merged[0].length_miles == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(merged[0].geometry.size() == 4);

  // single-link group passes through
  auto single = conflate_by_tmc({a});
  REQUIRE(single.size() == 1);
  CHECK(single[0].lane_category == a.lane_category);
  CHECK(single[0].length_miles == a.length_miles);
  CHECK(single[0].min_altitude_km == a.min_altitude_km);

  // missing tmc is a hard error
  RoadLink no_tmc = a;
  no_tmc.tmc_code.reset();
  CHECK_THROWS_AS(conflate_by_tmc({no_tmc}), ComputeError);
}

TEST_CASE("conflate conserves length and is reorder-invariant") {
  std::vector<RoadLink> links;
  double total = 0;
  for (int i = 0; i < 7; ++i) {
    double len = 0.3 + 0.17 * i;
    total += len;
    auto link = make_link("L" + std::to_string(i), "T1", len,
                          i % 2 ? LaneCategory::One : LaneCategory::FourPlus, 5.0 + i);
    links.push_back(link);
  }
  auto merged = conflate_by_tmc(links);
  REQUIRE(merged.size() == 1);
  CHECK(std::fabs(merged[0].length_miles - total) < 1e-9);

  std::vector<RoadLink> reversed(links.rbegin(), links.rend());
  auto merged2 = conflate_by_tmc(reversed);
  CHECK(std::fabs(merged[0].min_altitude_km - merged2[0].min_altitude_km) < 1e-9);
  CHECK(merged[0].lane_category == merged2[0].lane_category);
  CHECK(std::fabs(merged[0].length_miles - merged2[0].length_miles) < 1e-9);
}

TEST_CASE("conflate ties break to the lexicographically smallest category") {
  auto a = make_link("L1", "T1", 2.0, LaneCategory::FourPlus, 1.0);  // ">3"
  auto b = make_link("L2", "T1", 2.0, LaneCategory::TwoThree, 1.0);  // "2-3"
  auto merged = conflate_by_tmc({a, b});
  // equal weights: "2-3" < ">3" in byte order ('2' is 0x32, '>' is 0x3e)
  CHECK(merged[0].lane_category == LaneCategory::TwoThree);
  auto swapped = conflate_by_tmc({b, a});
  CHECK(swapped[0].lane_category == LaneCategory::TwoThree);
}

#ifdef ROADRES_FIXTURES_DIR
TEST_CASE("bundled sample fixtures parse cleanly") {
  std::filesystem::path fixtures(ROADRES_FIXTURES_DIR);
  LinkParseStats stats;
  auto geo = parse_links(fixtures / "sample_links.geojson", LinkFormat::GeoJson, &stats);
  CHECK(geo.size() == 3);  // the flagged ramp is excluded
  CHECK(stats.excluded == 1);
  auto csv = parse_links(fixtures / "sample_links.csv", LinkFormat::Csv);
  CHECK(csv.size() == 3);
  auto speeds = parse_speeds(fixtures / "sample_speeds.csv");
  CHECK(speeds.size() == 2);
  auto reports = parse_reports(fixtures / "sample_reports.ndjson");
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].event_type == EventType::Flood);
  CHECK(reports[2].event_type == EventType::WinterStorm);
  auto merged = conflate_by_tmc(geo);
  CHECK(merged.size() == 2);  // T0001 (two links) + T0002
}
#endif

TEST_CASE("workspace manifest records and detects staleness") {
  auto dir = testutil::temp_dir("ws");
  testutil::write(dir / "in.txt", "hello");
  Workspace ws(dir / "work", "America/Chicago");
  testutil::write(dir / "work" / "out.txt", "artifact");
  CHECK(!ws.stage_current("demo", "p1", {dir / "in.txt"}));
  ws.record_stage("demo", "p1", {dir / "in.txt"}, {dir / "work" / "out.txt"}, {{"rows", 1}});
  CHECK(ws.stage_current("demo", "p1", {dir / "in.txt"}));
  CHECK(!ws.stage_current("demo", "p2", {dir / "in.txt"}));  // params changed
  testutil::write(dir / "in.txt", "changed");
  CHECK(!ws.stage_current("demo", "p1", {dir / "in.txt"}));  // input changed
  testutil::write(dir / "in.txt", "hello");
  CHECK(ws.stage_current("demo", "p1", {dir / "in.txt"}));
  std::filesystem::remove(dir / "work" / "out.txt");
  CHECK(!ws.stage_current("demo", "p1", {dir / "in.txt"}));  // output missing
  CHECK_THROWS_AS(Workspace(dir / "w2", ""), ConfigError);   // zone must be declared
}
