#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "clouddelta/descriptor.hpp"
#include "clouddelta/detection.hpp"
#include "clouddelta/types.hpp"

namespace clouddelta {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Point clouds

enum class CloudFormat {
  ply_ascii,
  ply_binary,  // binary_little_endian
  xyz,         // bare "x y z" lines
  ply_any,     // either PLY flavour, decided by the file header
  auto_detect  // by extension: .xyz -> xyz, anything else -> ply_any
};

// Reads vertex x/y/z (float32 or float64). Other properties and elements
// are skipped with a warning on stderr. Malformed, truncated, or non-finite
// data raises ParseError with the file position.
PointCloud read_point_cloud(const std::string& path,
                            CloudFormat format = CloudFormat::auto_detect);

// ply_ascii writes 9 significant digits; ply_binary writes float64 and
// round-trips bit-exactly. auto_detect/ply_any resolve to ply_binary unless
// the path ends in .xyz.
void write_point_cloud(const PointCloud& cloud, const std::string& path,
                       CloudFormat format = CloudFormat::auto_detect);

// ---------------------------------------------------------------------------
// Trajectories: CSV rows "k,x,y,z" with k counting from 1 without gaps.

Trajectory read_trajectory(const std::string& path);
void write_trajectory(const Trajectory& trajectory, const std::string& path);

// ---------------------------------------------------------------------------
// Descriptor sets

enum class DescriptorFileFormat {
  csv,    // rows "k,q1,...,q64"
  binary  // "CDQ1", u32 record count, then {u32 k, 64 x f32} little-endian
};

// Format is detected from the file itself (binary magic vs text).
DescriptorSet read_descriptor_set(const std::string& path);
void write_descriptor_set(const DescriptorSet& set, const std::string& path,
                          DescriptorFileFormat format);

// ---------------------------------------------------------------------------
// Transforms: 16 whitespace-separated reals, row-major 4x4, bottom row
// exactly "0 0 0 1", rotation block validated on read.

RigidTransform read_transform(const std::string& path);
void write_transform(const RigidTransform& t, const std::string& path);

// ---------------------------------------------------------------------------
// Detection dumps

void write_regions_csv(const std::vector<RegionPair>& regions,
                       const std::string& path);
std::vector<RegionPair> read_regions_csv(const std::string& path);

void write_scores_csv(const std::vector<ChangeScore>& scores,
                      const std::string& path);
std::vector<ChangeScore> read_scores_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Report

struct InputRecord {
  std::string role;  // e.g. "map_t", "trajectory_t1"
  std::string path;
  uint64_t bytes = 0;
  uint64_t fnv1a64 = 0;
};

// Everything the run knew about one selected region. Times are wall-clock
// milliseconds; the merge and detection phases run once per session pair, so
// their cost repeats on every row. t_total = t_merge + t_CD + t_OE.
struct RegionReportEntry {
  int rank = 0;
  ChangeScore score;
  Point3 center_t = Point3::Zero();
  Point3 center_t1 = Point3::Zero();
  double radius = 0.0;

  double t_merge = 0.0;
  double t_cd = 0.0;
  double t_oe = 0.0;
  double t_total = 0.0;

  double v_sphere = 0.0;
  double v_oe = 0.0;
  long s_points = 0;
  long oe_points = 0;  // added_points + removed_points, after filtering

  long added_points = 0;
  long added_points_raw = 0;
  double v_added = 0.0;
  long removed_points = 0;
  long removed_points_raw = 0;
  double v_removed = 0.0;
};

struct Report {
  json parameters = json::object();  // every knob of the producing run
  std::vector<InputRecord> inputs;
  std::vector<RegionReportEntry> regions;
  json metrics;  // filled for synthetic runs with ground truth, else null
};

// Throws FormatError when any row breaks the structural guarantees
// (negative counts or times, OE_points > S_points, t_total < t_CD, ...).
void validate_report(const Report& report);

// Validates, then writes atomically: the file appears complete or not at all.
void write_report_json(const Report& report, const std::string& path);
Report read_report_json(const std::string& path);

// Companion table, one row per region:
// rank,j,nn_i,distance,t_merge,t_CD,t_OE,t_total,V_sphere,V_OE,S_points,
// OE_points,added_points,removed_points
void write_report_csv(const Report& report, const std::string& path);

// ---------------------------------------------------------------------------
// Helpers

uint64_t fnv1a64(const void* data, size_t size);

// Stats + content hash of a file on disk, for the report's input block.
InputRecord describe_input(const std::string& role, const std::string& path);

// Write-to-temporary-then-rename, shared by every writer that must never
// leave a half-written file behind.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace clouddelta
