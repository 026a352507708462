#include "clouddelta/pipeline.hpp"

#include <chrono>

namespace clouddelta {

DescriptorConfig PipelineConfig::descriptor_config() const {
  DescriptorConfig cfg;
  cfg.radius = radius;
  cfg.radial_bins = descriptor_radial_bins;
  cfg.height_bins = descriptor_height_bins;
  cfg.height_extent = descriptor_height_extent;
  return cfg;
}

SelectionOptions PipelineConfig::selection_options() const {
  SelectionOptions opts;
  opts.mode = mode;
  opts.top_k = top_k;
  opts.lambda_d = lambda_d;
  opts.radius = radius;
  opts.nms_radius = nms_radius;
  opts.spatial_pairing_max = spatial_pairing_max;
  return opts;
}

ExtractionParams PipelineConfig::extraction_params() const {
  ExtractionParams params;
  params.voxel_size = voxel_size;
  params.min_points_per_voxel = min_points_per_voxel;
  params.sor = sor;
  params.volume_resolution = volume_resolution;
  return params;
}

json PipelineConfig::to_json() const {
  SelectionOptions sel = selection_options();
  json j;
  j["radius"] = radius;
  j["voxel_size"] = voxel_size;
  j["min_points_per_voxel"] = min_points_per_voxel;
  j["sor_k_neighbors"] = sor.k_neighbors;
  j["sor_lambda"] = sor.lambda;
  j["volume_resolution"] = volume_resolution;
  j["selection_mode"] = mode == SelectionMode::top_k ? "top_k" : "threshold";
  j["top_k"] = top_k;
  j["lambda_d"] = lambda_d;
  j["nms_radius"] = sel.effective_nms_radius();
  j["spatial_pairing_max"] = sel.effective_pairing_max();
  j["descriptor_radial_bins"] = descriptor_radial_bins;
  j["descriptor_height_bins"] = descriptor_height_bins;
  j["descriptor_height_extent"] = descriptor_height_extent;
  j["icp_max_iterations"] = icp.max_iterations;
  j["icp_convergence_eps"] = icp.convergence_eps;
  j["icp_max_corr_dist"] = icp.max_corr_dist;
  j["icp_max_source_points"] = icp.max_source_points;
  j["threads"] = threads;
  return j;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

PipelineResult run_pipeline(PipelineInputs inputs, const PipelineConfig& config) {
  PipelineResult result;

  // Phase 1: bring the later session into the earlier frame.
  Clock::time_point start = Clock::now();
  if (inputs.transform) {
    result.transform = *inputs.transform;
  } else {
    AlignmentResult icp = estimate_transform_icp(inputs.m_t1, inputs.m_t, config.icp);
    result.alignment = icp;
    result.transform = icp.transform;
  }
  result.merged = merge_maps(inputs.m_t, inputs.m_t1, result.transform);
  result.t_merge_ms = ms_since(start);

  // Phase 2: place descriptors and ranking. Descriptors live in each
  // session's own frame; yaw invariance makes them comparable.
  start = Clock::now();
  DescriptorConfig desc_cfg = config.descriptor_config();
  result.q_t = inputs.q_t ? std::move(*inputs.q_t)
                          : compute_descriptor_set(inputs.m_t, inputs.tr_t,
                                                   desc_cfg, config.threads);
  result.q_t1 = inputs.q_t1 ? std::move(*inputs.q_t1)
                            : compute_descriptor_set(inputs.m_t1, inputs.tr_t1,
                                                     desc_cfg, config.threads);

  Trajectory tr_t1_aligned = apply_transform(inputs.tr_t1, result.transform);
  if (!result.q_t1.records.empty()) {
    NNIndex index(result.q_t);
    result.scores = score_changes(index, result.q_t1);
  }
  result.regions = select_regions(result.scores, inputs.tr_t, tr_t1_aligned,
                                  config.selection_options());
  result.t_cd_ms = ms_since(start);

  // Phase 3: per-region comparison in the common frame.
  ExtractionParams params = config.extraction_params();
  if (!result.regions.empty()) {
    PointCloud m_t1_aligned = apply_transform(inputs.m_t1, result.transform);
    double cell = config.radius + params.reference_padding();
    SphereSampler sampler_t(inputs.m_t, cell);
    SphereSampler sampler_t1(m_t1_aligned, cell);
    for (const RegionPair& pair : result.regions) {
      start = Clock::now();
      result.extractions.push_back(extract_all(pair, sampler_t, sampler_t1, params));
      result.t_oe_ms.push_back(ms_since(start));
    }
  }

  // Report assembly.
  result.report.parameters = config.to_json();
  result.report.inputs = std::move(inputs.input_records);
  for (size_t i = 0; i < result.extractions.size(); ++i) {
    const RegionExtraction& ex = result.extractions[i];
    RegionReportEntry entry;
    entry.rank = static_cast<int>(i) + 1;
    entry.score = ex.region.score;
    entry.center_t = ex.region.center_t;
    entry.center_t1 = ex.region.center_t1;
    entry.radius = ex.region.radius;
    entry.t_merge = result.t_merge_ms;
    entry.t_cd = result.t_cd_ms;
    entry.t_oe = result.t_oe_ms[i];
    entry.t_total = result.t_merge_ms + result.t_cd_ms + result.t_oe_ms[i];
    entry.v_sphere = ex.sphere_volume;
    entry.v_oe = ex.change_volume;
    entry.s_points = ex.sphere_points;
    entry.oe_points = static_cast<long>(ex.added.points.size()) +
                      static_cast<long>(ex.removed.points.size());
    entry.added_points = static_cast<long>(ex.added.points.size());
    entry.added_points_raw = ex.added.pre_filter_count;
    entry.v_added = ex.added.volume_estimate;
    entry.removed_points = static_cast<long>(ex.removed.points.size());
    entry.removed_points_raw = ex.removed.pre_filter_count;
    entry.v_removed = ex.removed.volume_estimate;
    result.report.regions.push_back(entry);
  }
  validate_report(result.report);
  return result;
}

}  // namespace clouddelta
