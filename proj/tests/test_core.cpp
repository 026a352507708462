#include <doctest.h>

#include <random>

#include "clouddelta/core.hpp"
#include "oracles.hpp"

using namespace clouddelta;

TEST_CASE("identity transform leaves points alone") {
  RigidTransform id = RigidTransform::identity();
  Point3 p(1.5, -2.0, 3.25);
  CHECK(id.apply(p) == p);
}

TEST_CASE("pure translation shifts every coordinate") {
  RigidTransform t = RigidTransform::from_parts(Eigen::Matrix3d::Identity(),
                                                Point3(1.0, 2.0, 3.0));
  Point3 moved = t.apply(Point3(0.5, 0.5, 0.5));
  CHECK(moved == Point3(1.5, 2.5, 3.5));
}

TEST_CASE("apply_transform matches homogeneous matrix multiplication") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    RigidTransform t = oracle::random_transform(rng);
    Eigen::Matrix4d m = t.matrix();
    PointCloud cloud = oracle::random_cloud(rng, 100);
    PointCloud out = apply_transform(cloud, t);
    REQUIRE(out.size() == cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
      Point3 expected = oracle::transform_point(m, cloud[i]);
      CHECK((out[i] - expected).norm() <= 1e-9);
    }
  }
}

TEST_CASE("inverse undoes the transform") {
  std::mt19937_64 rng(7);
  RigidTransform t = oracle::random_transform(rng);
  PointCloud cloud = oracle::random_cloud(rng, 50);
  PointCloud roundtrip = apply_transform(apply_transform(cloud, t), t.inverse());
  for (size_t i = 0; i < cloud.size(); ++i) {
    CHECK((roundtrip[i] - cloud[i]).norm() <= 1e-9);
  }
}

TEST_CASE("composition laws") {
  std::mt19937_64 rng(11);
  RigidTransform a = oracle::random_transform(rng);
  RigidTransform b = oracle::random_transform(rng);
  RigidTransform c = oracle::random_transform(rng);
  RigidTransform id = RigidTransform::identity();

  Point3 p(0.3, -1.2, 2.0);
  CHECK((compose(a, id).apply(p) - a.apply(p)).norm() <= 1e-12);
  CHECK((compose(id, a).apply(p) - a.apply(p)).norm() <= 1e-12);

  // Associativity and agreement with sequential application.
  Point3 via_compose = compose(compose(a, b), c).apply(p);
  Point3 via_compose2 = compose(a, compose(b, c)).apply(p);
  Point3 sequential = a.apply(b.apply(c.apply(p)));
  CHECK((via_compose - sequential).norm() <= 1e-9);
  CHECK((via_compose2 - sequential).norm() <= 1e-9);

  // Inverse composes to identity.
  RigidTransform should_be_id = compose(a, inverse(a));
  CHECK(rotation_defect(should_be_id.rotation) <= 1e-12);
  CHECK(should_be_id.translation.norm() <= 1e-12);
}

TEST_CASE("rigid transforms preserve distances") {
  std::mt19937_64 rng(13);
  RigidTransform t = oracle::random_transform(rng);
  PointCloud cloud = oracle::random_cloud(rng, 30);
  PointCloud moved = apply_transform(cloud, t);
  for (size_t i = 1; i < cloud.size(); ++i) {
    double before = (cloud[i] - cloud[0]).norm();
    double after = (moved[i] - moved[0]).norm();
    CHECK(std::abs(before - after) <= 1e-9);
  }
}

TEST_CASE("composition and inverse stay rigid") {
  std::mt19937_64 rng(17);
  RigidTransform t = oracle::random_transform(rng);
  for (int i = 0; i < 50; ++i) {
    t = compose(t, oracle::random_transform(rng));
  }
  CHECK(rotation_defect(t.rotation) <= 1e-9);
  CHECK(rotation_defect(t.inverse().rotation) <= 1e-9);
}

TEST_CASE("transform construction rejects non-rotations") {
  Eigen::Matrix3d scaled = 2.0 * Eigen::Matrix3d::Identity();
  CHECK_THROWS_AS(RigidTransform::from_parts(scaled, Point3::Zero()), FormatError);

  Eigen::Matrix3d reflection = Eigen::Matrix3d::Identity();
  reflection(2, 2) = -1.0;  // orthonormal but det = -1
  CHECK_THROWS_AS(RigidTransform::from_parts(reflection, Point3::Zero()), FormatError);

  Eigen::Matrix4d bad_bottom = Eigen::Matrix4d::Identity();
  bad_bottom(3, 0) = 0.5;
  CHECK_THROWS_AS(RigidTransform::from_matrix(bad_bottom), FormatError);
}

TEST_CASE("sample_sphere on an empty map") {
  SphereRegion region = sample_sphere({}, Point3::Zero(), 1.0);
  CHECK(region.points.empty());
  CHECK(region.radius == 1.0);
}

TEST_CASE("sample_sphere boundary is closed") {
  PointCloud map = {Point3(0.5, 0, 0), Point3(2.0, 0, 0)};
  SphereRegion r1 = sample_sphere(map, Point3::Zero(), 1.0);
  REQUIRE(r1.points.size() == 1);
  CHECK(r1.points[0] == map[0]);

  SphereRegion r2 = sample_sphere(map, Point3::Zero(), 2.0);
  CHECK(r2.points.size() == 2);  // distance exactly 2 is inside
}

TEST_CASE("sample_sphere matches the membership oracle") {
  std::mt19937_64 rng(23);
  PointCloud map = oracle::random_cloud(rng, 10000, 10.0);
  for (int trial = 0; trial < 10; ++trial) {
    Point3 center(oracle::uniform(rng, -8, 8), oracle::uniform(rng, -8, 8),
                  oracle::uniform(rng, -8, 8));
    double radius = oracle::uniform(rng, 0.5, 4.5);
    SphereRegion region = sample_sphere(map, center, radius);
    std::vector<int> expected = oracle::sphere_members(map, center, radius);
    REQUIRE(region.points.size() == expected.size());
    for (size_t i = 0; i < expected.size(); ++i) {
      CHECK(region.points[i] == map[static_cast<size_t>(expected[i])]);
    }
  }
}

TEST_CASE("SphereSampler agrees with sample_sphere exactly") {
  std::mt19937_64 rng(29);
  PointCloud map = oracle::random_cloud(rng, 20000, 12.0);

  for (double cell : {1.0, 4.5, 7.0}) {
    SphereSampler sampler(map, cell);
    for (int trial = 0; trial < 8; ++trial) {
      Point3 center(oracle::uniform(rng, -10, 10), oracle::uniform(rng, -10, 10),
                    oracle::uniform(rng, -10, 10));
      double radius = oracle::uniform(rng, 0.3, 6.0);
      SphereRegion fast = sampler.sample(center, radius);
      SphereRegion slow = sample_sphere(map, center, radius);
      REQUIRE(fast.points.size() == slow.points.size());
      for (size_t i = 0; i < slow.points.size(); ++i) {
        CHECK(fast.points[i] == slow.points[i]);
      }
    }
  }
}

TEST_CASE("smaller radius gives a subset") {
  std::mt19937_64 rng(31);
  PointCloud map = oracle::random_cloud(rng, 5000, 8.0);
  Point3 center(1.0, -2.0, 0.5);
  SphereRegion small = sample_sphere(map, center, 2.0);
  SphereRegion big = sample_sphere(map, center, 3.5);
  CHECK(small.points.size() <= big.points.size());

  size_t si = 0;
  for (const Point3& p : big.points) {
    if (si < small.points.size() && p == small.points[si]) ++si;
  }
  CHECK(si == small.points.size());  // small appears in order inside big
}

TEST_CASE("sampling a sampled region again is a no-op") {
  std::mt19937_64 rng(37);
  PointCloud map = oracle::random_cloud(rng, 3000, 6.0);
  Point3 center(0.5, 0.5, -1.0);
  SphereRegion once = sample_sphere(map, center, 3.0);
  SphereRegion twice = sample_sphere(once.points, center, 3.0);
  CHECK(once.points.size() == twice.points.size());
}
