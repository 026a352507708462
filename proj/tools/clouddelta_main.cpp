// clouddelta: bi-temporal point cloud change detection and object extraction.
//
// Subcommands cover the stages of the pipeline individually (describe,
// align, detect, extract) and end to end (pipeline), including synthetic
// scene evaluation. Exit codes: 0 success, 2 usage, 3 unreadable or invalid
// input data, 4 degenerate geometry.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "clouddelta/alignment.hpp"
#include "clouddelta/descriptor.hpp"
#include "clouddelta/detection.hpp"
#include "clouddelta/extraction.hpp"
#include "clouddelta/io.hpp"
#include "clouddelta/pipeline.hpp"
#include "clouddelta/synth.hpp"

namespace fs = std::filesystem;
using namespace clouddelta;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(dir + ": cannot create directory: " + ec.message());
}

// ---------------------------------------------------------------------------
// Option bundles shared between subcommands

struct DescriptorFlags {
  double radius = 4.5;
  int radial_bins = 8;
  int height_bins = 8;
  double height_extent = 4.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--radius", radius, "Submap sampling radius in metres")
        ->capture_default_str();
    cmd->add_option("--radial-bins", radial_bins, "Radial rings in the descriptor")
        ->capture_default_str();
    cmd->add_option("--height-bins", height_bins, "Height slabs in the descriptor")
        ->capture_default_str();
    cmd->add_option("--height-extent", height_extent,
                    "Half height covered by the slabs, metres")
        ->capture_default_str();
  }
};

struct SelectionFlags {
  std::string mode = "threshold";
  int top_k = 3;
  double lambda_d = 2.0;
  double nms_radius = 0.0;
  double spatial_pairing_max = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--mode", mode, "Region selection mode")
        ->check(CLI::IsMember({"top_k", "threshold"}))
        ->capture_default_str();
    cmd->add_option("--top-k", top_k, "Regions to keep in top_k mode")
        ->capture_default_str();
    cmd->add_option("--lambda-d", lambda_d,
                    "Threshold mode: keep distance >= mean + lambda * stddev")
        ->capture_default_str();
    cmd->add_option("--nms-radius", nms_radius,
                    "Suppression radius between selected centres (default 2*radius)");
    cmd->add_option("--spatial-pairing-max", spatial_pairing_max,
                    "Max distance to the paired earlier pose (default 2*radius)");
  }

  SelectionMode parsed_mode() const {
    return mode == "top_k" ? SelectionMode::top_k : SelectionMode::threshold;
  }
};

struct ExtractionFlags {
  double voxel_size = 0.65;
  int min_points_per_voxel = 1;
  int sor_k = 10;
  double sor_lambda = 1.0;
  double volume_resolution = 0.25;

  void attach(CLI::App* cmd) {
    cmd->add_option("--voxel-size", voxel_size, "Occupancy voxel edge, metres")
        ->capture_default_str();
    cmd->add_option("--min-points-per-voxel", min_points_per_voxel,
                    "Points needed before a voxel counts as occupied")
        ->capture_default_str();
    cmd->add_option("--sor-k", sor_k, "Outlier filter neighbour count")
        ->capture_default_str();
    cmd->add_option("--sor-lambda", sor_lambda, "Outlier filter sigma multiplier")
        ->capture_default_str();
    cmd->add_option("--volume-resolution", volume_resolution,
                    "Voxel edge of the volume estimate, metres")
        ->capture_default_str();
  }
};

struct IcpFlags {
  int max_iterations = 50;
  double eps = 1e-4;
  double max_corr_dist = 2.0;
  int max_source_points = 20000;

  void attach(CLI::App* cmd) {
    cmd->add_option("--icp-max-iterations", max_iterations, "ICP iteration cap")
        ->capture_default_str();
    cmd->add_option("--icp-eps", eps, "ICP convergence threshold on rmse change")
        ->capture_default_str();
    cmd->add_option("--icp-max-corr-dist", max_corr_dist,
                    "Reject correspondences farther than this, metres")
        ->capture_default_str();
    cmd->add_option("--icp-max-source-points", max_source_points,
                    "Stride-subsample the source cloud down to about this many "
                    "points (0 = no cap)")
        ->capture_default_str();
  }

  IcpOptions options() const {
    IcpOptions opts;
    opts.max_iterations = max_iterations;
    opts.convergence_eps = eps;
    opts.max_corr_dist = max_corr_dist;
    opts.max_source_points = max_source_points;
    return opts;
  }
};

// ---------------------------------------------------------------------------
// describe

struct DescribeArgs {
  std::string map_path, trajectory_path, out_path;
  std::string format = "binary";
  DescriptorFlags desc;
  int threads = 0;
};

void run_describe(const DescribeArgs& args) {
  PointCloud map = read_point_cloud(args.map_path);
  Trajectory traj = read_trajectory(args.trajectory_path);

  DescriptorConfig cfg;
  cfg.radius = args.desc.radius;
  cfg.radial_bins = args.desc.radial_bins;
  cfg.height_bins = args.desc.height_bins;
  cfg.height_extent = args.desc.height_extent;

  DescriptorSet set = compute_descriptor_set(map, traj, cfg, args.threads);
  write_descriptor_set(set, args.out_path,
                       args.format == "csv" ? DescriptorFileFormat::csv
                                            : DescriptorFileFormat::binary);
  std::cout << "wrote " << set.count() << " descriptors (" << traj.count()
            << " poses) to " << args.out_path << "\n";
}

// ---------------------------------------------------------------------------
// align

struct AlignArgs {
  std::string map_t_path, map_t1_path, transform_path, out_dir;
  bool use_icp = false;
  IcpFlags icp;
};

void run_align(const AlignArgs& args) {
  if (args.transform_path.empty() && !args.use_icp) {
    throw UsageError("align needs either --transform FILE or --icp");
  }
  ensure_dir(args.out_dir);

  PointCloud m_t = read_point_cloud(args.map_t_path);
  PointCloud m_t1 = read_point_cloud(args.map_t1_path);

  Clock::time_point start = Clock::now();
  RigidTransform t;
  std::optional<AlignmentResult> icp;
  if (!args.transform_path.empty()) {
    t = read_transform(args.transform_path);
  } else {
    icp = estimate_transform_icp(m_t1, m_t, args.icp.options());
    t = icp->transform;
  }
  PointCloud merged = merge_maps(m_t, m_t1, t);
  double t_merge = ms_since(start);

  write_point_cloud(merged, join_path(args.out_dir, "merged.ply"),
                    CloudFormat::ply_binary);
  write_transform(t, join_path(args.out_dir, "transform.txt"));

  json fragment;
  fragment["t_merge"] = t_merge;
  fragment["merged_points"] = merged.size();
  if (icp) {
    fragment["icp"]["iterations"] = icp->iterations;
    fragment["icp"]["residual_rmse"] = icp->residual_rmse;
    fragment["icp"]["converged"] = icp->converged;
  }
  write_file_atomic(join_path(args.out_dir, "align.json"), fragment.dump(2) + "\n");

  std::cout << "merged " << m_t.size() << " + " << m_t1.size() << " points in "
            << t_merge << " ms\n";
}

// ---------------------------------------------------------------------------
// detect

struct DetectArgs {
  std::string desc_t_path, desc_t1_path;
  std::string traj_t_path, traj_t1_path;
  std::string transform_path, out_dir;
  double radius = 4.5;
  SelectionFlags select;
};

void run_detect(const DetectArgs& args) {
  ensure_dir(args.out_dir);

  DescriptorSet q_t = read_descriptor_set(args.desc_t_path);
  DescriptorSet q_t1 = read_descriptor_set(args.desc_t1_path);
  Trajectory tr_t = read_trajectory(args.traj_t_path);
  Trajectory tr_t1 = read_trajectory(args.traj_t1_path);
  RigidTransform t = args.transform_path.empty()
                         ? RigidTransform::identity()
                         : read_transform(args.transform_path);

  Clock::time_point start = Clock::now();
  NNIndex index(q_t);
  std::vector<ChangeScore> scores = score_changes(index, q_t1);

  SelectionOptions opts;
  opts.mode = args.select.parsed_mode();
  opts.top_k = args.select.top_k;
  opts.lambda_d = args.select.lambda_d;
  opts.radius = args.radius;
  opts.nms_radius = args.select.nms_radius;
  opts.spatial_pairing_max = args.select.spatial_pairing_max;

  Trajectory tr_t1_aligned = apply_transform(tr_t1, t);
  std::vector<RegionPair> regions = select_regions(scores, tr_t, tr_t1_aligned, opts);
  double t_cd = ms_since(start);

  write_scores_csv(scores, join_path(args.out_dir, "scores.csv"));
  write_regions_csv(regions, join_path(args.out_dir, "regions.csv"));

  json fragment;
  fragment["t_CD"] = t_cd;
  write_file_atomic(join_path(args.out_dir, "detect.json"), fragment.dump(2) + "\n");

  std::cout << "scored " << scores.size() << " poses, selected " << regions.size()
            << " regions in " << t_cd << " ms\n";
}

// ---------------------------------------------------------------------------
// extract

struct ExtractArgs {
  std::string map_t_path, map_t1_path, transform_path, regions_path, out_dir;
  std::string report_csv_path;
  ExtractionFlags extract;
};

// Timing fragments written by earlier align/detect runs in the same
// directory; absent fragments contribute zero.
double fragment_value(const std::string& dir, const std::string& file,
                      const std::string& key) {
  std::string path = join_path(dir, file);
  if (!fs::exists(path)) {
    std::cerr << "warning: " << path << " not found, " << key << " set to 0\n";
    return 0.0;
  }
  std::ifstream in(path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains(key)) {
    std::cerr << "warning: " << path << " lacks " << key << ", set to 0\n";
    return 0.0;
  }
  return j[key].get<double>();
}

void run_extract(const ExtractArgs& args) {
  ensure_dir(args.out_dir);

  PointCloud m_t = read_point_cloud(args.map_t_path);
  PointCloud m_t1 = read_point_cloud(args.map_t1_path);
  RigidTransform t = read_transform(args.transform_path);
  std::vector<RegionPair> regions = read_regions_csv(args.regions_path);

  ExtractionParams params;
  params.voxel_size = args.extract.voxel_size;
  params.min_points_per_voxel = args.extract.min_points_per_voxel;
  params.sor.k_neighbors = args.extract.sor_k;
  params.sor.lambda = args.extract.sor_lambda;
  params.volume_resolution = args.extract.volume_resolution;

  double t_merge = fragment_value(args.out_dir, "align.json", "t_merge");
  double t_cd = fragment_value(args.out_dir, "detect.json", "t_CD");

  PointCloud m_t1_aligned = apply_transform(m_t1, t);

  Report report;
  report.parameters["voxel_size"] = params.voxel_size;
  report.parameters["min_points_per_voxel"] = params.min_points_per_voxel;
  report.parameters["sor_k_neighbors"] = params.sor.k_neighbors;
  report.parameters["sor_lambda"] = params.sor.lambda;
  report.parameters["volume_resolution"] = params.volume_resolution;
  report.inputs.push_back(describe_input("map_t", args.map_t_path));
  report.inputs.push_back(describe_input("map_t1", args.map_t1_path));
  report.inputs.push_back(describe_input("transform", args.transform_path));
  report.inputs.push_back(describe_input("regions", args.regions_path));

  int rank = 0;
  for (const RegionPair& pair : regions) {
    ++rank;
    Clock::time_point start = Clock::now();
    RegionExtraction ex = extract_all(pair, m_t, m_t1_aligned, params);
    double t_oe = ms_since(start);

    char name[64];
    std::snprintf(name, sizeof(name), "region_%02d_added.ply", rank);
    write_point_cloud(ex.added.points, join_path(args.out_dir, name),
                      CloudFormat::ply_binary);
    std::snprintf(name, sizeof(name), "region_%02d_removed.ply", rank);
    write_point_cloud(ex.removed.points, join_path(args.out_dir, name),
                      CloudFormat::ply_binary);

    RegionReportEntry entry;
    entry.rank = rank;
    entry.score = pair.score;
    entry.center_t = pair.center_t;
    entry.center_t1 = pair.center_t1;
    entry.radius = pair.radius;
    entry.t_merge = t_merge;
    entry.t_cd = t_cd;
    entry.t_oe = t_oe;
    entry.t_total = t_merge + t_cd + t_oe;
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
    report.regions.push_back(entry);

    std::cout << "region " << rank << ": added " << entry.added_points
              << ", removed " << entry.removed_points << " points in " << t_oe
              << " ms\n";
  }

  write_report_json(report, join_path(args.out_dir, "report.json"));
  if (!args.report_csv_path.empty()) {
    write_report_csv(report, args.report_csv_path);
  }
  std::cout << "report written to " << join_path(args.out_dir, "report.json")
            << "\n";
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineArgs {
  std::string scene_path;
  std::string map_t_path, map_t1_path, traj_t_path, traj_t1_path;
  std::string desc_t_path, desc_t1_path;
  std::string transform_path, out_dir;
  std::string report_csv_path;
  bool use_icp = false;
  bool use_true_transform = false;
  bool dump_inputs = false;
  int threads = 0;

  DescriptorFlags desc;
  SelectionFlags select;
  ExtractionFlags extract;
  IcpFlags icp;
};

PipelineConfig build_config(const PipelineArgs& args) {
  PipelineConfig config;
  config.radius = args.desc.radius;
  config.voxel_size = args.extract.voxel_size;
  config.min_points_per_voxel = args.extract.min_points_per_voxel;
  config.sor.k_neighbors = args.extract.sor_k;
  config.sor.lambda = args.extract.sor_lambda;
  config.volume_resolution = args.extract.volume_resolution;
  config.mode = args.select.parsed_mode();
  config.top_k = args.select.top_k;
  config.lambda_d = args.select.lambda_d;
  config.nms_radius = args.select.nms_radius;
  config.spatial_pairing_max = args.select.spatial_pairing_max;
  config.descriptor_radial_bins = args.desc.radial_bins;
  config.descriptor_height_bins = args.desc.height_bins;
  config.descriptor_height_extent = args.desc.height_extent;
  config.icp = args.icp.options();
  config.threads = args.threads;
  return config;
}

void run_pipeline_cmd(const PipelineArgs& args) {
  bool synth_mode = !args.scene_path.empty();
  bool file_mode = !args.map_t_path.empty();
  if (synth_mode == file_mode) {
    throw UsageError("pipeline needs either --synth SCENE or --map-t/--map-t1/"
                     "--trajectory-t/--trajectory-t1");
  }
  if (file_mode &&
      (args.map_t1_path.empty() || args.traj_t_path.empty() || args.traj_t1_path.empty())) {
    throw UsageError("pipeline file mode needs --map-t, --map-t1, "
                     "--trajectory-t and --trajectory-t1");
  }
  if (file_mode && args.transform_path.empty() && !args.use_icp) {
    throw UsageError("pipeline file mode needs either --transform FILE or --icp");
  }
  if (args.use_true_transform && !synth_mode) {
    throw UsageError("--true-transform only applies to --synth runs");
  }
  ensure_dir(args.out_dir);

  PipelineConfig config = build_config(args);
  PipelineInputs inputs;
  std::optional<SceneData> scene;

  if (synth_mode) {
    SceneSpec spec = read_scene_spec(args.scene_path);
    scene = generate(spec);
    inputs.m_t = scene->m_t;
    inputs.m_t1 = scene->m_t1;
    inputs.tr_t = scene->tr_t;
    inputs.tr_t1 = scene->tr_t1;
    if (args.use_true_transform) {
      inputs.transform = scene->t_true;
    } else if (!args.use_icp && !args.transform_path.empty()) {
      inputs.transform = read_transform(args.transform_path);
    }
    // Neither flag: fall through to ICP, the realistic default.
    inputs.input_records.push_back(describe_input("scene_spec", args.scene_path));

    if (args.dump_inputs) {
      write_point_cloud(inputs.m_t, join_path(args.out_dir, "map_t.ply"),
                        CloudFormat::ply_binary);
      write_point_cloud(inputs.m_t1, join_path(args.out_dir, "map_t1.ply"),
                        CloudFormat::ply_binary);
      write_trajectory(inputs.tr_t, join_path(args.out_dir, "trajectory_t.csv"));
      write_trajectory(inputs.tr_t1, join_path(args.out_dir, "trajectory_t1.csv"));
      write_transform(scene->t_true, join_path(args.out_dir, "transform_true.txt"));
    }
  } else {
    inputs.m_t = read_point_cloud(args.map_t_path);
    inputs.m_t1 = read_point_cloud(args.map_t1_path);
    inputs.tr_t = read_trajectory(args.traj_t_path);
    inputs.tr_t1 = read_trajectory(args.traj_t1_path);
    if (!args.transform_path.empty()) {
      inputs.transform = read_transform(args.transform_path);
      inputs.input_records.push_back(describe_input("transform", args.transform_path));
    }
    inputs.input_records.push_back(describe_input("map_t", args.map_t_path));
    inputs.input_records.push_back(describe_input("map_t1", args.map_t1_path));
    inputs.input_records.push_back(describe_input("trajectory_t", args.traj_t_path));
    inputs.input_records.push_back(describe_input("trajectory_t1", args.traj_t1_path));
  }

  if (!args.desc_t_path.empty()) {
    inputs.q_t = read_descriptor_set(args.desc_t_path);
    inputs.input_records.push_back(describe_input("descriptors_t", args.desc_t_path));
  }
  if (!args.desc_t1_path.empty()) {
    inputs.q_t1 = read_descriptor_set(args.desc_t1_path);
    inputs.input_records.push_back(describe_input("descriptors_t1", args.desc_t1_path));
  }

  PipelineResult result = run_pipeline(std::move(inputs), config);

  if (scene) {
    Metrics metrics = score(scene->truth, result.regions, result.extractions);
    result.report.metrics = metrics_to_json(metrics);
    std::cout << "region_recall " << metrics.region_recall << "\n"
              << "region_precision " << metrics.region_precision << "\n"
              << "point_recall " << metrics.point_recall << "\n"
              << "point_precision " << metrics.point_precision << "\n";
  }

  write_transform(result.transform, join_path(args.out_dir, "transform.txt"));
  write_scores_csv(result.scores, join_path(args.out_dir, "scores.csv"));
  write_regions_csv(result.regions, join_path(args.out_dir, "regions.csv"));
  for (size_t i = 0; i < result.extractions.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "region_%02zu_added.ply", i + 1);
    write_point_cloud(result.extractions[i].added.points,
                      join_path(args.out_dir, name), CloudFormat::ply_binary);
    std::snprintf(name, sizeof(name), "region_%02zu_removed.ply", i + 1);
    write_point_cloud(result.extractions[i].removed.points,
                      join_path(args.out_dir, name), CloudFormat::ply_binary);
  }
  write_report_json(result.report, join_path(args.out_dir, "report.json"));
  if (!args.report_csv_path.empty()) {
    write_report_csv(result.report, args.report_csv_path);
  }

  std::cout << "selected " << result.regions.size() << " regions, report written to "
            << join_path(args.out_dir, "report.json") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bi-temporal point cloud change detection and object extraction"};
  app.require_subcommand(1);

  DescribeArgs describe_args;
  CLI::App* describe = app.add_subcommand(
      "describe", "Compute place descriptors along a trajectory");
  describe->add_option("--map", describe_args.map_path, "Point cloud (PLY or .xyz)")
      ->required()->check(CLI::ExistingFile);
  describe->add_option("--trajectory", describe_args.trajectory_path,
                       "Trajectory CSV (k,x,y,z)")
      ->required()->check(CLI::ExistingFile);
  describe->add_option("--out", describe_args.out_path, "Output descriptor file")
      ->required();
  describe->add_option("--format", describe_args.format, "Output format")
      ->check(CLI::IsMember({"csv", "binary"}))->capture_default_str();
  describe->add_option("--threads", describe_args.threads,
                       "Worker threads (0 = CLOUD_DELTA_THREADS or hardware)");
  describe_args.desc.attach(describe);

  AlignArgs align_args;
  CLI::App* align = app.add_subcommand(
      "align", "Estimate or apply a transform and merge two maps");
  align->add_option("--map-t", align_args.map_t_path, "Earlier session map")
      ->required()->check(CLI::ExistingFile);
  align->add_option("--map-t1", align_args.map_t1_path, "Later session map")
      ->required()->check(CLI::ExistingFile);
  align->add_option("--transform", align_args.transform_path,
                    "Known t+1 -> t transform (16 numbers, row-major)")
      ->check(CLI::ExistingFile);
  align->add_flag("--icp", align_args.use_icp, "Estimate the transform with ICP");
  align->add_option("--out-dir", align_args.out_dir, "Output directory")->required();
  align_args.icp.attach(align);

  DetectArgs detect_args;
  CLI::App* detect = app.add_subcommand(
      "detect", "Rank changed regions from two descriptor sets");
  detect->add_option("--descriptors-t", detect_args.desc_t_path, "Earlier descriptors")
      ->required()->check(CLI::ExistingFile);
  detect->add_option("--descriptors-t1", detect_args.desc_t1_path, "Later descriptors")
      ->required()->check(CLI::ExistingFile);
  detect->add_option("--trajectory-t", detect_args.traj_t_path, "Earlier trajectory")
      ->required()->check(CLI::ExistingFile);
  detect->add_option("--trajectory-t1", detect_args.traj_t1_path, "Later trajectory")
      ->required()->check(CLI::ExistingFile);
  detect->add_option("--transform", detect_args.transform_path,
                     "t+1 -> t transform applied to the later trajectory")
      ->check(CLI::ExistingFile);
  detect->add_option("--out-dir", detect_args.out_dir, "Output directory")->required();
  detect->add_option("--radius", detect_args.radius, "Region radius, metres")
      ->capture_default_str();
  detect_args.select.attach(detect);

  ExtractArgs extract_args;
  CLI::App* extract = app.add_subcommand(
      "extract", "Extract changed objects inside selected regions");
  extract->add_option("--map-t", extract_args.map_t_path, "Earlier session map")
      ->required()->check(CLI::ExistingFile);
  extract->add_option("--map-t1", extract_args.map_t1_path, "Later session map")
      ->required()->check(CLI::ExistingFile);
  extract->add_option("--transform", extract_args.transform_path,
                      "t+1 -> t transform file")
      ->required()->check(CLI::ExistingFile);
  extract->add_option("--regions", extract_args.regions_path,
                      "regions.csv from the detect step")
      ->required()->check(CLI::ExistingFile);
  extract->add_option("--out-dir", extract_args.out_dir, "Output directory")
      ->required();
  extract->add_option("--report-csv", extract_args.report_csv_path,
                      "Also write the report table as CSV here");
  extract_args.extract.attach(extract);

  PipelineArgs pipeline_args;
  CLI::App* pipeline = app.add_subcommand(
      "pipeline", "Full run: align, detect, extract, report");
  pipeline->add_option("--synth", pipeline_args.scene_path,
                       "Generate the input sessions from a scene spec JSON")
      ->check(CLI::ExistingFile);
  pipeline->add_option("--map-t", pipeline_args.map_t_path, "Earlier session map")
      ->check(CLI::ExistingFile);
  pipeline->add_option("--map-t1", pipeline_args.map_t1_path, "Later session map")
      ->check(CLI::ExistingFile);
  pipeline->add_option("--trajectory-t", pipeline_args.traj_t_path, "Earlier trajectory")
      ->check(CLI::ExistingFile);
  pipeline->add_option("--trajectory-t1", pipeline_args.traj_t1_path, "Later trajectory")
      ->check(CLI::ExistingFile);
  pipeline->add_option("--descriptors-t", pipeline_args.desc_t_path,
                       "Precomputed earlier descriptors")
      ->check(CLI::ExistingFile);
  pipeline->add_option("--descriptors-t1", pipeline_args.desc_t1_path,
                       "Precomputed later descriptors")
      ->check(CLI::ExistingFile);
  pipeline->add_option("--transform", pipeline_args.transform_path,
                       "Known t+1 -> t transform file")
      ->check(CLI::ExistingFile);
  pipeline->add_flag("--icp", pipeline_args.use_icp,
                     "Estimate the transform with ICP");
  pipeline->add_flag("--true-transform", pipeline_args.use_true_transform,
                     "Synthetic runs: use the generator's exact transform");
  pipeline->add_flag("--dump-inputs", pipeline_args.dump_inputs,
                     "Synthetic runs: also write the generated inputs");
  pipeline->add_option("--out-dir", pipeline_args.out_dir, "Output directory")
      ->required();
  pipeline->add_option("--report-csv", pipeline_args.report_csv_path,
                       "Also write the report table as CSV here");
  pipeline->add_option("--threads", pipeline_args.threads,
                       "Worker threads (0 = CLOUD_DELTA_THREADS or hardware)");
  pipeline_args.desc.attach(pipeline);
  pipeline_args.select.attach(pipeline);
  pipeline_args.extract.attach(pipeline);
  pipeline_args.icp.attach(pipeline);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(describe)) run_describe(describe_args);
    else if (app.got_subcommand(align)) run_align(align_args);
    else if (app.got_subcommand(detect)) run_detect(detect_args);
    else if (app.got_subcommand(extract)) run_extract(extract_args);
    else if (app.got_subcommand(pipeline)) run_pipeline_cmd(pipeline_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DegenerateGeometryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const EmptyRegionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const EmptyDescriptorSetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
