#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "clouddelta/detection.hpp"
#include "clouddelta/synth.hpp"
#include "oracles.hpp"

using namespace clouddelta;

namespace {

Descriptor random_descriptor(std::mt19937_64& rng) {
  Descriptor q;
  for (int d = 0; d < kDescriptorDim; ++d) q[d] = oracle::uniform(rng, 0, 1);
  return q;
}

DescriptorSet make_set(const std::vector<Descriptor>& vectors) {
  DescriptorSet set;
  for (size_t i = 0; i < vectors.size(); ++i) {
    set.records.push_back({int(i) + 1, vectors[i]});
  }
  return set;
}

// Straight line of poses along +x, one metre apart, starting at x = 1.
Trajectory line_trajectory(int count, double spacing = 1.0) {
  Trajectory tr;
  for (int k = 1; k <= count; ++k) {
    tr.poses.push_back(Point3(k * spacing, 0, 0));
  }
  return tr;
}

ChangeScore score_at(int j, double distance) { return {j, j, distance}; }

}  // namespace

TEST_CASE("index rejects an empty descriptor set") {
  CHECK_THROWS_AS(NNIndex(DescriptorSet{}), EmptyDescriptorSetError);
}

TEST_CASE("nearest hit matches a first-wins linear scan") {
  std::mt19937_64 rng(167);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Descriptor> vectors;
    int n = 1 + int(rng() % 80);
    for (int i = 0; i < n; ++i) vectors.push_back(random_descriptor(rng));
    DescriptorSet set = make_set(vectors);
    NNIndex index(set);
    CHECK(!index.uses_tree());

    for (int q = 0; q < 20; ++q) {
      Descriptor query = random_descriptor(rng);
      double expected_dist = 0.0;
      int expected =
          oracle::nearest_linear(vectors, query, &expected_dist);
      NNIndex::Hit hit = index.nearest(query);
      CHECK(hit.k == expected + 1);
      CHECK(hit.distance == expected_dist);
    }
  }
}

TEST_CASE("tree and linear paths agree, duplicates included") {
  std::mt19937_64 rng(173);
  std::vector<Descriptor> vectors;
  for (int i = 0; i < 120; ++i) {
    if (i >= 40 && i % 3 == 0) {
      vectors.push_back(vectors[size_t(i) / 2]);  // exact duplicate
    } else {
      vectors.push_back(random_descriptor(rng));
    }
  }
  DescriptorSet set = make_set(vectors);
  NNIndex linear(set, 1 << 20);
  NNIndex tree(set, 1);
  CHECK(!linear.uses_tree());
  CHECK(tree.uses_tree());

  // Random queries plus the duplicated vectors themselves, which force
  // exact distance ties that both paths must break the same way.
  std::vector<Descriptor> queries;
  for (int q = 0; q < 40; ++q) queries.push_back(random_descriptor(rng));
  for (size_t i = 40; i < vectors.size(); i += 3) queries.push_back(vectors[i]);

  for (const Descriptor& query : queries) {
    NNIndex::Hit a = linear.nearest(query);
    NNIndex::Hit b = tree.nearest(query);
    CHECK(a.k == b.k);
    CHECK(a.distance == b.distance);
  }
}

TEST_CASE("scores come back one per later record, in pose order") {
  std::mt19937_64 rng(179);
  std::vector<Descriptor> earlier, later;
  for (int i = 0; i < 30; ++i) earlier.push_back(random_descriptor(rng));
  for (int i = 0; i < 45; ++i) later.push_back(random_descriptor(rng));
  DescriptorSet set_t = make_set(earlier);
  DescriptorSet set_t1 = make_set(later);

  NNIndex index(set_t);
  std::vector<ChangeScore> scores = score_changes(index, set_t1);
  REQUIRE(scores.size() == later.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    CHECK(scores[i].j == int(i) + 1);
    double expected_dist = 0.0;
    int expected = oracle::nearest_linear(earlier, later[i], &expected_dist);
    CHECK(scores[i].nn_i == expected + 1);
    CHECK(scores[i].distance == expected_dist);
  }
}

TEST_CASE("identical sessions score zero everywhere") {
  std::mt19937_64 rng(181);
  std::vector<Descriptor> vectors;
  for (int i = 0; i < 25; ++i) vectors.push_back(random_descriptor(rng));
  DescriptorSet set = make_set(vectors);

  std::vector<ChangeScore> scores = score_changes(NNIndex(set), set);
  for (const ChangeScore& s : scores) {
    CHECK(s.distance == 0.0);
    CHECK(s.nn_i == s.j);
  }
}

TEST_CASE("selection does not depend on score order") {
  std::mt19937_64 rng(191);
  Trajectory tr = line_trajectory(40, 30.0);  // far apart, no suppression
  std::vector<ChangeScore> scores;
  for (int j = 1; j <= 40; ++j) {
    scores.push_back(score_at(j, oracle::uniform(rng, 0, 1)));
  }

  SelectionOptions options;
  options.mode = SelectionMode::top_k;
  options.top_k = 5;
  std::vector<RegionPair> a = select_regions(scores, tr, tr, options);

  std::shuffle(scores.begin(), scores.end(), rng);
  std::vector<RegionPair> b = select_regions(scores, tr, tr, options);

  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].score.j == b[i].score.j);
    CHECK(a[i].center_t1 == b[i].center_t1);
  }
}

TEST_CASE("uniform scores select nothing in threshold mode") {
  Trajectory tr = line_trajectory(20);
  std::vector<ChangeScore> scores;
  for (int j = 1; j <= 20; ++j) scores.push_back(score_at(j, 0.7));

  SelectionOptions options;
  options.mode = SelectionMode::threshold;
  CHECK(select_regions(scores, tr, tr, options).empty());
}

TEST_CASE("threshold mode keeps exactly the scores above the cutoff") {
  std::mt19937_64 rng(193);
  Trajectory tr = line_trajectory(50, 30.0);  // no suppression between poses
  std::vector<ChangeScore> scores;
  for (int j = 1; j <= 50; ++j) {
    scores.push_back(score_at(j, oracle::uniform(rng, 0, 1)));
  }

  SelectionOptions options;
  options.mode = SelectionMode::threshold;
  options.lambda_d = 1.0;

  double mean = 0.0;
  for (const ChangeScore& s : scores) mean += s.distance;
  mean /= 50;
  double var = 0.0;
  for (const ChangeScore& s : scores) {
    var += (s.distance - mean) * (s.distance - mean);
  }
  double cutoff = mean + options.lambda_d * std::sqrt(var / 50);

  std::vector<RegionPair> regions = select_regions(scores, tr, tr, options);
  std::vector<int> expected;
  for (const ChangeScore& s : scores) {
    if (s.distance >= cutoff) expected.push_back(s.j);
  }
  REQUIRE(regions.size() == expected.size());
  for (const RegionPair& r : regions) {
    CHECK(std::find(expected.begin(), expected.end(), r.score.j) !=
          expected.end());
  }
}

TEST_CASE("top-k ranks by distance and suppresses nearby centres") {
  Trajectory tr = line_trajectory(40);
  std::vector<ChangeScore> scores;
  for (int j = 1; j <= 40; ++j) scores.push_back(score_at(j, 0.01 * j));
  scores[9].distance = 1.0;   // j = 10, strongest
  scores[11].distance = 0.9;  // j = 12, within 9 m of j = 10, suppressed
  scores[29].distance = 0.8;  // j = 30, second region

  SelectionOptions options;
  options.mode = SelectionMode::top_k;
  options.top_k = 2;
  options.radius = 4.5;  // NMS radius defaults to 9

  std::vector<RegionPair> regions = select_regions(scores, tr, tr, options);
  REQUIRE(regions.size() == 2);
  CHECK(regions[0].score.j == 10);
  CHECK(regions[1].score.j == 30);
  CHECK(regions[0].radius == 4.5);
  CHECK(regions[0].center_t1 == tr.pose(10));
  CHECK(regions[0].center_t == tr.pose(10));
}

TEST_CASE("suppressed candidates do not consume top-k slots") {
  Trajectory tr = line_trajectory(40);
  std::vector<ChangeScore> scores;
  for (int j = 1; j <= 40; ++j) scores.push_back(score_at(j, 0.0));
  scores[9].distance = 1.0;   // kept
  scores[10].distance = 0.9;  // suppressed by j = 10
  scores[11].distance = 0.8;  // suppressed by j = 10
  scores[29].distance = 0.7;  // must still make the cut
  scores[0].distance = 0.6;   // kept, 9 m from j = 10

  SelectionOptions options;
  options.mode = SelectionMode::top_k;
  options.top_k = 3;

  std::vector<RegionPair> regions = select_regions(scores, tr, tr, options);
  REQUIRE(regions.size() == 3);
  CHECK(regions[0].score.j == 10);
  CHECK(regions[1].score.j == 30);
  CHECK(regions[2].score.j == 1);
}

TEST_CASE("candidates with no nearby earlier pose are dropped") {
  Trajectory tr_t = line_trajectory(20);
  Trajectory tr_t1 = tr_t;
  tr_t1.poses.push_back(Point3(200, 0, 0));  // pose 21, far off the old route

  std::vector<ChangeScore> scores;
  for (int j = 1; j <= 21; ++j) scores.push_back(score_at(j, 0.0));
  scores[20].distance = 1.0;  // strongest, but unpaired
  scores[4].distance = 0.5;

  SelectionOptions options;
  options.mode = SelectionMode::top_k;
  options.top_k = 1;

  std::vector<RegionPair> regions =
      select_regions(scores, tr_t, tr_t1, options);
  REQUIRE(regions.size() == 1);
  CHECK(regions[0].score.j == 5);
  CHECK(regions[0].center_t == tr_t.pose(5));
}

TEST_CASE("pairing picks the nearest earlier pose") {
  Trajectory tr_t = line_trajectory(10);
  Trajectory tr_t1;
  tr_t1.poses.push_back(Point3(3.4, 0.5, 0));  // nearest earlier pose: x = 3

  std::vector<ChangeScore> scores = {score_at(1, 1.0), };
  SelectionOptions options;
  options.mode = SelectionMode::top_k;
  options.top_k = 1;

  std::vector<RegionPair> regions =
      select_regions(scores, tr_t, tr_t1, options);
  REQUIRE(regions.size() == 1);
  CHECK(regions[0].center_t == Point3(3, 0, 0));
  CHECK(regions[0].center_t1 == tr_t1.pose(1));
}

TEST_CASE("a score referencing a missing pose is rejected") {
  Trajectory tr = line_trajectory(3);
  std::vector<ChangeScore> scores = {score_at(7, 1.0)};
  SelectionOptions options;
  options.mode = SelectionMode::top_k;
  std::string msg;
  try {
    select_regions(scores, tr, tr, options);
  } catch (const FormatError& e) {
    msg = e.what();
  }
  CHECK(msg.find("pose 7") != std::string::npos);
}

TEST_CASE("empty inputs select nothing") {
  Trajectory tr = line_trajectory(5);
  SelectionOptions options;
  CHECK(select_regions({}, tr, tr, options).empty());
  CHECK(select_regions({score_at(1, 1.0)}, Trajectory{}, tr, options).empty());
}

TEST_CASE("two inserted boxes emerge as the top two regions") {
  SceneSpec spec;
  spec.seed = 17;
  spec.length = 50;
  spec.point_spacing = 0.3;
  ChangeSpec box;
  box.kind = ChangeKind::add_box;
  box.center = Point3(12, 0, 1.5);
  box.dims = Point3(1.2, 1.2, 1.2);
  spec.changes.push_back(box);
  box.center = Point3(38, -0.5, 1.5);
  spec.changes.push_back(box);
  SceneData data = generate(spec);

  // Bring the later session into the earlier frame, as the pipeline's
  // alignment stage would.
  PointCloud m_t1 = data.m_t1;
  for (Point3& p : m_t1) p = data.t_true.apply(p);
  Trajectory tr_t1 = data.tr_t1;
  for (Point3& p : tr_t1.poses) p = data.t_true.apply(p);

  DescriptorConfig config;
  DescriptorSet set_t = compute_descriptor_set(data.m_t, data.tr_t, config);
  DescriptorSet set_t1 = compute_descriptor_set(m_t1, tr_t1, config);
  std::vector<ChangeScore> scores =
      score_changes(NNIndex(set_t), set_t1);

  SelectionOptions options;
  options.mode = SelectionMode::top_k;
  options.top_k = 2;
  options.radius = config.radius;
  std::vector<RegionPair> regions =
      select_regions(scores, data.tr_t, tr_t1, options);

  REQUIRE(regions.size() == 2);
  for (const ChangeTruth& change : data.truth.changes) {
    bool hit = false;
    for (const RegionPair& r : regions) {
      if ((r.center_t1 - change.center).norm() <= r.radius) hit = true;
    }
    CHECK(hit);
  }
}
