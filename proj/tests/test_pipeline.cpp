#include <doctest.h>

#include <cmath>
#include <cstring>

#include "clouddelta/pipeline.hpp"
#include "clouddelta/synth.hpp"
#include "oracles.hpp"

using namespace clouddelta;

namespace {

PipelineInputs inputs_from(const SceneData& data, bool with_transform = true) {
  PipelineInputs in;
  in.m_t = data.m_t;
  in.m_t1 = data.m_t1;
  in.tr_t = data.tr_t;
  in.tr_t1 = data.tr_t1;
  if (with_transform) in.transform = data.t_true;
  return in;
}

SceneSpec dense_box_scene(uint64_t seed, ChangeKind kind) {
  SceneSpec spec;
  spec.seed = seed;
  spec.length = 30;
  spec.point_spacing = 0.13;
  spec.noise_sigma = 0.12;
  ChangeSpec change;
  change.kind = kind;
  change.center = Point3(15, 0, 1.3);
  change.dims = Point3(1.2, 1.2, 1.2);
  change.density = 450;
  spec.changes.push_back(change);
  return spec;
}

}  // namespace

TEST_CASE("a null scene runs to an empty report") {
  SceneSpec spec;
  spec.seed = 113;
  spec.length = 24;
  spec.point_spacing = 0.25;
  SceneData data = generate(spec);

  PipelineConfig config;  // threshold mode by default
  PipelineResult result = run_pipeline(inputs_from(data), config);

  CHECK(result.regions.empty());
  CHECK(result.extractions.empty());
  CHECK(result.report.regions.empty());
  CHECK(result.merged.size() == data.m_t.size() + data.m_t1.size());
  CHECK(result.scores.size() == size_t(result.q_t1.count()));
  CHECK(!result.alignment.has_value());
}

TEST_CASE("identical sessions yield no regions") {
  SceneSpec spec;
  spec.seed = 127;
  spec.length = 24;
  spec.point_spacing = 0.25;
  SceneData data = generate(spec);

  PipelineInputs in;
  in.m_t = data.m_t;
  in.m_t1 = data.m_t;
  in.tr_t = data.tr_t;
  in.tr_t1 = data.tr_t;
  in.transform = RigidTransform::identity();

  PipelineResult result = run_pipeline(std::move(in), PipelineConfig{});
  for (const ChangeScore& s : result.scores) CHECK(s.distance == 0.0);
  CHECK(result.regions.empty());
}

TEST_CASE("an inserted box is detected and extracted end to end") {
  SceneData data = generate(dense_box_scene(131, ChangeKind::add_box));

  PipelineConfig config;
  config.mode = SelectionMode::top_k;
  config.top_k = 1;
  config.sor.lambda = 2.5;
  PipelineResult result = run_pipeline(inputs_from(data), config);

  REQUIRE(result.regions.size() == 1);
  CHECK((result.regions[0].center_t1 - data.truth.changes[0].center).norm() <=
        result.regions[0].radius);

  Metrics m = score(data.truth, result.regions, result.extractions);
  CHECK(m.region_recall == 1.0);
  CHECK(m.point_recall >= 0.9);
  CHECK(m.point_precision >= 0.8);

  REQUIRE(result.report.regions.size() == 1);
  const RegionReportEntry& row = result.report.regions[0];
  CHECK(row.added_points > 0);
  CHECK(row.removed_points <= row.added_points);
  CHECK(row.v_added > 0.0);
  CHECK(row.s_points > 0);
}

TEST_CASE("a removed box shows up as removed points") {
  SceneData data = generate(dense_box_scene(137, ChangeKind::remove_box));

  PipelineConfig config;
  config.mode = SelectionMode::top_k;
  config.top_k = 1;
  config.sor.lambda = 2.5;
  PipelineResult result = run_pipeline(inputs_from(data), config);

  REQUIRE(result.regions.size() == 1);
  REQUIRE(result.extractions.size() == 1);
  CHECK(result.extractions[0].removed.points.size() >
        result.extractions[0].added.points.size());
  Metrics m = score(data.truth, result.regions, result.extractions);
  CHECK(m.region_recall == 1.0);
  CHECK(m.point_recall >= 0.9);
}

TEST_CASE("a mound is detected like any other insertion") {
  SceneSpec spec;
  spec.seed = 139;
  spec.length = 30;
  spec.point_spacing = 0.13;
  spec.noise_sigma = 0.12;
  ChangeSpec mound;
  mound.kind = ChangeKind::add_mound;
  mound.center = Point3(15, 0, 0.5);
  mound.dims = Point3(2.4, 1.8, 1.0);
  mound.density = 450;
  spec.changes.push_back(mound);
  SceneData data = generate(spec);

  PipelineConfig config;
  config.mode = SelectionMode::top_k;
  config.top_k = 1;
  config.sor.lambda = 2.5;
  PipelineResult result = run_pipeline(inputs_from(data), config);

  REQUIRE(result.regions.size() == 1);
  CHECK((result.regions[0].center_t1 - data.truth.changes[0].center).norm() <=
        result.regions[0].radius);
  REQUIRE(result.extractions.size() == 1);
  CHECK(!result.extractions[0].added.points.empty());
}

TEST_CASE("the icp path recovers the frame offset") {
  SceneSpec spec;
  spec.seed = 149;
  spec.length = 36;
  spec.point_spacing = 0.22;
  SceneData data = generate(spec);

  PipelineResult result =
      run_pipeline(inputs_from(data, /*with_transform=*/false),
                   PipelineConfig{});
  REQUIRE(result.alignment.has_value());

  RigidTransform err = result.transform * data.t_true.inverse();
  double angle = std::acos(std::clamp((err.rotation.trace() - 1.0) / 2.0,
                                       -1.0, 1.0)) * 180.0 / M_PI;
  CHECK(angle <= 0.5);
  CHECK(err.translation.norm() <= 0.05);
  CHECK(result.merged.size() == data.m_t.size() + data.m_t1.size());
}

TEST_CASE("provided descriptor sets are used verbatim") {
  SceneSpec spec;
  spec.seed = 151;
  spec.length = 24;
  spec.point_spacing = 0.25;
  SceneData data = generate(spec);

  PipelineConfig config;
  DescriptorSet q_t = compute_descriptor_set(data.m_t, data.tr_t,
                                             config.descriptor_config());
  DescriptorSet q_t1 = compute_descriptor_set(data.m_t1, data.tr_t1,
                                              config.descriptor_config());

  PipelineInputs in = inputs_from(data);
  in.q_t = q_t;
  in.q_t1 = q_t1;
  PipelineResult result = run_pipeline(std::move(in), config);

  REQUIRE(result.q_t.count() == q_t.count());
  for (int i = 0; i < q_t.count(); ++i) {
    CHECK(result.q_t.records[i].k == q_t.records[i].k);
    CHECK(std::memcmp(result.q_t.records[i].q.data(), q_t.records[i].q.data(),
                      kDescriptorDim * sizeof(double)) == 0);
  }
}

TEST_CASE("reruns on the same inputs reproduce every output") {
  SceneData data = generate(dense_box_scene(157, ChangeKind::add_box));
  PipelineConfig config;
  config.mode = SelectionMode::top_k;
  config.top_k = 2;
  config.sor.lambda = 2.5;

  PipelineResult a = run_pipeline(inputs_from(data), config);
  PipelineResult b = run_pipeline(inputs_from(data), config);

  REQUIRE(a.scores.size() == b.scores.size());
  for (size_t i = 0; i < a.scores.size(); ++i) {
    CHECK(a.scores[i].j == b.scores[i].j);
    CHECK(a.scores[i].nn_i == b.scores[i].nn_i);
    CHECK(a.scores[i].distance == b.scores[i].distance);
  }
  REQUIRE(a.regions.size() == b.regions.size());
  REQUIRE(a.extractions.size() == b.extractions.size());
  for (size_t r = 0; r < a.extractions.size(); ++r) {
    const PointCloud& pa = a.extractions[r].added.points;
    const PointCloud& pb = b.extractions[r].added.points;
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
      CHECK(std::memcmp(pa[i].data(), pb[i].data(), 3 * sizeof(double)) == 0);
    }
  }
}

TEST_CASE("report rows carry consistent timings and parameters") {
  SceneData data = generate(dense_box_scene(163, ChangeKind::add_box));
  PipelineConfig config;
  config.mode = SelectionMode::top_k;
  config.top_k = 1;
  config.sor.lambda = 2.5;
  PipelineResult result = run_pipeline(inputs_from(data), config);

  REQUIRE(result.report.regions.size() == 1);
  const RegionReportEntry& row = result.report.regions[0];
  CHECK(row.t_merge == result.t_merge_ms);
  CHECK(row.t_cd == result.t_cd_ms);
  CHECK(row.t_oe == result.t_oe_ms[0]);
  CHECK(row.t_total == result.t_merge_ms + result.t_cd_ms + result.t_oe_ms[0]);
  CHECK(row.t_merge >= 0.0);
  CHECK(row.rank == 1);

  const json& params = result.report.parameters;
  CHECK(params.at("radius").get<double>() == 4.5);
  CHECK(params.at("voxel_size").get<double>() == 0.65);
  CHECK(params.at("selection_mode").get<std::string>() == "top_k");
  CHECK(params.at("top_k").get<int>() == 1);
  CHECK(params.at("sor_lambda").get<double>() == 2.5);
  CHECK(params.at("nms_radius").get<double>() == 9.0);           // resolved 2r
  CHECK(params.at("spatial_pairing_max").get<double>() == 9.0);  // resolved 2r
  CHECK(params.at("descriptor_radial_bins").get<int>() == 8);
  CHECK(params.contains("icp_max_iterations"));
  CHECK(params.contains("threads"));

  // The assembled report must satisfy its own validation contract.
  CHECK_NOTHROW(validate_report(result.report));
}
