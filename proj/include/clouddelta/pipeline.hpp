#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clouddelta/alignment.hpp"
#include "clouddelta/descriptor.hpp"
#include "clouddelta/detection.hpp"
#include "clouddelta/extraction.hpp"
#include "clouddelta/io.hpp"
#include "clouddelta/types.hpp"

namespace clouddelta {

// Every knob of an end-to-end run. Zeros on the two radii mean
// "2 * radius", resolved at run time and echoed resolved in the report.
struct PipelineConfig {
  double radius = 4.5;
  double voxel_size = 0.65;
  int min_points_per_voxel = 1;
  SORConfig sor;
  double volume_resolution = 0.25;

  SelectionMode mode = SelectionMode::threshold;
  int top_k = 3;
  double lambda_d = 2.0;
  double nms_radius = 0.0;
  double spatial_pairing_max = 0.0;

  int descriptor_radial_bins = 8;
  int descriptor_height_bins = 8;
  double descriptor_height_extent = 4.0;

  IcpOptions icp;
  int threads = 0;  // 0 = CLOUD_DELTA_THREADS or hardware default

  DescriptorConfig descriptor_config() const;
  SelectionOptions selection_options() const;
  ExtractionParams extraction_params() const;

  json to_json() const;
};

struct PipelineInputs {
  PointCloud m_t;
  PointCloud m_t1;
  Trajectory tr_t;
  Trajectory tr_t1;

  // Either a known session-to-session transform or ICP estimation.
  std::optional<RigidTransform> transform;

  // Precomputed descriptor files override on-the-fly computation.
  std::optional<DescriptorSet> q_t;
  std::optional<DescriptorSet> q_t1;

  std::vector<InputRecord> input_records;  // provenance for the report
};

struct PipelineResult {
  RigidTransform transform;                 // t+1 frame -> t frame
  std::optional<AlignmentResult> alignment; // set when ICP produced it
  PointCloud merged;

  DescriptorSet q_t;
  DescriptorSet q_t1;
  std::vector<ChangeScore> scores;
  std::vector<RegionPair> regions;
  std::vector<RegionExtraction> extractions;

  double t_merge_ms = 0.0;
  double t_cd_ms = 0.0;
  std::vector<double> t_oe_ms;  // one entry per region

  Report report;
};

// Align, merge, detect, extract, and assemble the report.
PipelineResult run_pipeline(PipelineInputs inputs, const PipelineConfig& config);

}  // namespace clouddelta
