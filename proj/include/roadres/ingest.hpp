#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "roadres/core.hpp"

namespace roadres {

enum class LinkFormat { GeoJson, Csv };

struct LinkParseStats {
  std::size_t features = 0;
  std::size_t excluded = 0;  // ramp/bridge/tunnel exclusion flag
};

struct SpeedParseStats {
  std::size_t rows = 0;
  std::size_t duplicates = 0;          // same (id, hour), last write wins
  std::size_t dropped_nonpositive = 0; // speed <= 0
};

struct ConflateStats {
  std::size_t groups = 0;
  std::size_t direction_conflicts = 0;
};

/// Parse a road network file. GeoJSON FeatureCollection with LineString
/// geometries, or CSV with a WKT LINESTRING column; see README for the
/// property/column schema. Links flagged `exclude` are dropped and counted.
/// Link length is taken from the file when present, otherwise computed as the
/// summed great-circle segment length.
std::vector<RoadLink> parse_links(const std::filesystem::path& path, LinkFormat format,
                                  LinkParseStats* stats = nullptr);

/// CSV `segment_id,timestamp,speed_mph`, timestamps local `YYYY-MM-DDTHH:00`.
/// Rows are grouped by id and sorted; duplicate (id, hour) keeps the last
/// value; non-positive speeds are dropped. Output is ordered by link_id.
std::vector<SpeedSeries> parse_speeds(const std::filesystem::path& path,
                                      SpeedParseStats* stats = nullptr);

/// Newline-delimited JSON, one report object per line. Reliability outside
/// [0, 10] or end < start is a row error, never clamped.
std::vector<EventReport> parse_reports(const std::filesystem::path& path);

/// Merge links sharing a tmc_code into one link per TMC: length-weighted mode
/// for categorical fields (ties broken by lexicographically smallest
/// serialized category), length-weighted mean for numeric fields, summed
/// length, geometry concatenated in input order. Every input must carry a
/// tmc_code.
std::vector<RoadLink> conflate_by_tmc(const std::vector<RoadLink>& links,
                                      ConflateStats* stats = nullptr);

/// A directory of pipeline artifacts plus a manifest recording parameters and
/// content hashes per stage. Re-running a stage with identical inputs,
/// parameters and intact outputs is a no-op.
class Workspace {
 public:
  Workspace(std::filesystem::path root, std::string time_zone);

  const std::filesystem::path& root() const { return root_; }
  const std::string& time_zone() const { return time_zone_; }
  std::filesystem::path artifact(const std::string& name) const { return root_ / name; }

  /// True when the manifest records this exact stage run and all recorded
  /// input/output hashes still match the files on disk.
  bool stage_current(const std::string& stage, const std::string& params_hash,
                     const std::vector<std::filesystem::path>& inputs) const;

  void record_stage(const std::string& stage, const std::string& params_hash,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::vector<std::filesystem::path>& outputs,
                    const std::map<std::string, std::size_t>& row_counts);

  /// Marks a stage's outputs stale (partial run); they will be regenerated.
  void mark_stale(const std::string& stage);

  void save() const;

 private:
  std::filesystem::path root_;
  std::string time_zone_;
  std::string manifest_json_;  // serialized manifest state
  std::filesystem::path manifest_path() const { return root_ / "manifest.json"; }
  void load();
};

}  // namespace roadres
