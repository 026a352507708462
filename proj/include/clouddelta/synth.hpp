#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clouddelta/detection.hpp"
#include "clouddelta/extraction.hpp"
#include "clouddelta/io.hpp"
#include "clouddelta/types.hpp"

namespace clouddelta {

// Deterministic generator state. SplitMix64 is tiny, passes BigCrush, and
// unlike the std engines its output is pinned by its published algorithm, so
// the same seed gives the same scene on every platform. Derived quantities
// stick to arithmetic the IEEE-754 rules make exact or correctly rounded
// (no libm trig), which keeps generated files byte-identical across hosts.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Irwin-Hall approximation of a standard normal: the sum of 12 uniforms
  // minus 6. Bounded to [-6, 6] and free of transcendental calls, which is
  // exactly what a reproducible jitter source needs.
  double normal(double mu = 0.0, double sigma = 1.0) {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) s += uniform();
    return mu + sigma * (s - 6.0);
  }

  // Independent stream for a subsystem; changing how many draws one
  // consumer makes then never shifts another consumer's sequence.
  SplitMix64 fork(uint64_t tag) {
    return SplitMix64(next() ^ (0x632be59bd9b4e019ull * (tag + 1)));
  }

 private:
  uint64_t state_;
};

enum class ChangeKind { add_box, remove_box, move_box, add_mound };

// One scripted difference between the sessions. Boxes are axis-aligned with
// points sampled on their faces; mounds are upper half-ellipsoid shells.
struct ChangeSpec {
  ChangeKind kind = ChangeKind::add_box;
  Point3 center = Point3::Zero();      // object centre at session t
  Point3 dims = Point3::Constant(1.0);  // full extents per axis
  Point3 displacement = Point3::Zero(); // move_box only: centre shift for t+1
  double density = 500.0;               // surface points per square metre
};

// A straight tunnel along +x: floor, ceiling, two walls, and end caps, with
// the width and height gently modulated along the way so different spots
// look different. The later session sees the scripted changes and lives in
// its own frame, offset from the first by a random yaw and translation.
struct SceneSpec {
  uint64_t seed = 1;

  double length = 60.0;
  double width = 6.0;
  double height = 4.0;
  double point_spacing = 0.15;   // grid step of the surface sampling
  double noise_sigma = 0.02;     // jitter along each surface normal

  double trajectory_step = 1.0;  // pose spacing along the centreline
  double trajectory_height = 1.0;

  double max_yaw_deg = 10.0;     // |yaw| of the inter-session offset
  double max_translation = 1.0;  // |translation| of the inter-session offset

  double modulation_amplitude = 0.12;  // relative width/height variation
  double modulation_spacing = 6.0;     // distance between modulation knots

  // Boxes placed along the walls and present in both sessions. Bare tunnel
  // shells are nearly invariant under a shift down the axis; fixtures with
  // axis-facing surfaces pin registration and make places distinguishable.
  // -1 picks one piece per 12 m of tunnel.
  int furniture_count = -1;
  double furniture_density = 150.0;  // surface points per square metre

  std::vector<ChangeSpec> changes;

  // Throws FormatError when dimensions are unusable or a change does not
  // fit inside the tunnel.
  void validate() const;
};

SceneSpec read_scene_spec(const std::string& path);
void write_scene_spec(const SceneSpec& spec, const std::string& path);

struct ChangeTruth {
  ChangeKind kind = ChangeKind::add_box;
  Point3 center = Point3::Zero();       // where the difference is, session-t frame
  PointCloud added;                     // in the t frame (transform applied)
  PointCloud removed;
  std::vector<int> poses_t, poses_t1;   // poses near the change, diagnostics
};

struct GroundTruth {
  std::vector<ChangeTruth> changes;
  PointCloud all_added;    // union over changes, in the t frame
  PointCloud all_removed;
};

struct SceneData {
  PointCloud m_t;
  PointCloud m_t1;        // in the t+1 session frame
  Trajectory tr_t;
  Trajectory tr_t1;       // in the t+1 session frame
  RigidTransform t_true;  // maps the t+1 frame into the t frame
  GroundTruth truth;
};

SceneData generate(const SceneSpec& spec);

struct Metrics {
  double region_recall = 0.0;     // truth changes with a detected centre nearby
  double region_precision = 0.0;  // detected regions near any truth change
  double point_recall = 0.0;      // truth points recovered by extraction
  double point_precision = 0.0;   // extracted points that are truth points
};

// Compares detector and extractor output against the script. A region
// counts as hitting a change when the change centre lies within the
// region's radius of its centre. Extracted points count as correct when a
// truth point of the same direction lies within point_match_dist.
Metrics score(const GroundTruth& truth, const std::vector<RegionPair>& regions,
              const std::vector<RegionExtraction>& extractions,
              double point_match_dist = 0.1);

json metrics_to_json(const Metrics& m);

}  // namespace clouddelta
