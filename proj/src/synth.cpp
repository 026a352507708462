#include "clouddelta/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "clouddelta/core.hpp"
#include "clouddelta/kdtree.hpp"

namespace clouddelta {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Piecewise smoothstep through evenly spaced knots. C1-continuous and free
// of trig, so the profile is reproducible bit for bit.
double interpolate_knots(const std::vector<double>& knots, double spacing,
                         double x) {
  double u = x / spacing;
  int i = static_cast<int>(std::floor(u));
  i = std::clamp(i, 0, static_cast<int>(knots.size()) - 2);
  double t = std::clamp(u - static_cast<double>(i), 0.0, 1.0);
  double s = t * t * (3.0 - 2.0 * t);
  return knots[static_cast<size_t>(i)] +
         (knots[static_cast<size_t>(i + 1)] - knots[static_cast<size_t>(i)]) * s;
}

struct TunnelProfile {
  std::vector<double> width_knots;
  std::vector<double> height_knots;
  double spacing = 1.0;
  double half_width = 1.0;
  double height = 1.0;

  double half_width_at(double x) const {
    return half_width * (1.0 + interpolate_knots(width_knots, spacing, x));
  }
  double height_at(double x) const {
    return height * (1.0 + interpolate_knots(height_knots, spacing, x));
  }
};

TunnelProfile make_profile(const SceneSpec& spec, SplitMix64 rng) {
  TunnelProfile profile;
  profile.spacing = spec.modulation_spacing;
  profile.half_width = spec.width / 2.0;
  profile.height = spec.height;
  int knots = static_cast<int>(std::floor(spec.length / spec.modulation_spacing)) + 2;
  for (int i = 0; i < knots; ++i) {
    profile.width_knots.push_back(rng.uniform(-1.0, 1.0) * spec.modulation_amplitude);
  }
  for (int i = 0; i < knots; ++i) {
    profile.height_knots.push_back(rng.uniform(-1.0, 1.0) * spec.modulation_amplitude);
  }
  return profile;
}

// Surface shell of the tunnel. Sample positions are grid cells dithered
// uniformly in-plane, plus Gaussian jitter along the face normal. The
// dither matters: a strictly regular grid is nearly invariant under a
// one-cell shift, which gives registration a family of false optima.
PointCloud sample_tunnel(const SceneSpec& spec, const TunnelProfile& profile,
                         SplitMix64& rng) {
  PointCloud cloud;
  double s = spec.point_spacing;
  double sigma = spec.noise_sigma;
  int nx = static_cast<int>(std::floor(spec.length / s));

  // Floor and ceiling.
  for (int xi = 0; xi <= nx; ++xi) {
    double x = xi * s;
    double hw = profile.half_width_at(x);
    double h = profile.height_at(x);
    int ny = static_cast<int>(std::floor(2.0 * hw / s));
    for (int yi = 0; yi <= ny; ++yi) {
      double y = -hw + yi * s;
      cloud.emplace_back(x + rng.uniform(-0.5, 0.5) * s, y + rng.uniform(-0.5, 0.5) * s,
                         rng.normal(0.0, sigma));
      cloud.emplace_back(x + rng.uniform(-0.5, 0.5) * s, y + rng.uniform(-0.5, 0.5) * s,
                         h + rng.normal(0.0, sigma));
    }
  }

  // Side walls.
  for (int xi = 0; xi <= nx; ++xi) {
    double x = xi * s;
    double hw = profile.half_width_at(x);
    double h = profile.height_at(x);
    int nz = static_cast<int>(std::floor(h / s));
    for (int zi = 0; zi <= nz; ++zi) {
      double z = zi * s;
      cloud.emplace_back(x + rng.uniform(-0.5, 0.5) * s, -hw + rng.normal(0.0, sigma),
                         z + rng.uniform(-0.5, 0.5) * s);
      cloud.emplace_back(x + rng.uniform(-0.5, 0.5) * s, hw + rng.normal(0.0, sigma),
                         z + rng.uniform(-0.5, 0.5) * s);
    }
  }

  // End caps; they pin the tunnel along x, otherwise two sessions of a
  // modulation-free tunnel could align at any shift.
  for (double x : {0.0, static_cast<double>(nx) * s}) {
    double hw = profile.half_width_at(x);
    double h = profile.height_at(x);
    int ny = static_cast<int>(std::floor(2.0 * hw / s));
    int nz = static_cast<int>(std::floor(h / s));
    for (int yi = 0; yi <= ny; ++yi) {
      for (int zi = 0; zi <= nz; ++zi) {
        cloud.emplace_back(x + rng.normal(0.0, sigma),
                           -hw + yi * s + rng.uniform(-0.5, 0.5) * s,
                           zi * s + rng.uniform(-0.5, 0.5) * s);
      }
    }
  }
  return cloud;
}

// Points on the six faces of an axis-aligned box, density per unit area.
PointCloud sample_box(const Point3& center, const Point3& dims, double density,
                      SplitMix64& rng) {
  PointCloud pts;
  Point3 half = dims / 2.0;
  for (int axis = 0; axis < 3; ++axis) {
    int b = (axis + 1) % 3;
    int c = (axis + 2) % 3;
    double area = dims[b] * dims[c];
    long n = std::lround(density * area);
    for (int side = -1; side <= 1; side += 2) {
      for (long i = 0; i < n; ++i) {
        Point3 p = center;
        p[axis] += side * half[axis];
        p[b] += rng.uniform(-half[b], half[b]);
        p[c] += rng.uniform(-half[c], half[c]);
        pts.push_back(p);
      }
    }
  }
  return pts;
}

// Upper half-ellipsoid shell. The count uses a crude area estimate; mounds
// are scenery, not a calibration target.
PointCloud sample_mound(const Point3& center, const Point3& dims, double density,
                        SplitMix64& rng) {
  PointCloud pts;
  Point3 semi = dims / 2.0;
  double mean_r = (semi.x() + semi.y() + semi.z()) / 3.0;
  long n = std::lround(density * 2.0 * kPi * mean_r * mean_r);
  for (long i = 0; i < n; ++i) {
    Point3 dir(rng.normal(), rng.normal(), std::abs(rng.normal()));
    double norm = dir.norm();
    if (norm < 1e-9) {
      dir = Point3(0, 0, 1);
      norm = 1.0;
    }
    dir /= norm;
    pts.push_back(center + semi.cwiseProduct(dir));
  }
  return pts;
}

// Wall-side boxes shared by both sessions. Placement avoids the scripted
// change sites so fixture geometry never mixes into a change's ground
// truth. Pieces that cannot be placed after a bounded number of attempts
// are skipped; the draw sequence stays deterministic either way.
PointCloud sample_furniture(const SceneSpec& spec, const TunnelProfile& profile,
                            SplitMix64& rng) {
  PointCloud cloud;
  int count = spec.furniture_count >= 0
                  ? spec.furniture_count
                  : static_cast<int>(std::floor(spec.length / 12.0));
  for (int i = 0; i < count; ++i) {
    Point3 dims(rng.uniform(0.5, 1.4), rng.uniform(0.4, 1.0), rng.uniform(0.6, 1.8));
    bool placed = false;
    Point3 center = Point3::Zero();
    for (int attempt = 0; attempt < 24 && !placed; ++attempt) {
      double x = rng.uniform(2.0, spec.length - 2.0);
      double hw = profile.half_width_at(x);
      double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      double y = side * (hw - 0.35 - dims.y() / 2.0);
      center = Point3(x, y, dims.z() / 2.0);
      placed = true;
      for (const ChangeSpec& ch : spec.changes) {
        double clearance = (ch.dims.norm() + dims.norm()) / 2.0 + 1.0;
        Point3 c1 = ch.kind == ChangeKind::move_box
                        ? Point3(ch.center + ch.displacement)
                        : ch.center;
        if ((center - ch.center).head<2>().norm() < clearance ||
            (center - c1).head<2>().norm() < clearance) {
          placed = false;
          break;
        }
      }
    }
    if (!placed) continue;
    PointCloud piece = sample_box(center, dims, spec.furniture_density, rng);
    cloud.insert(cloud.end(), piece.begin(), piece.end());
  }
  return cloud;
}

Point3 json_point(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) {
    throw FormatError(what + " must be a 3-element array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ChangeKind kind_from_string(const std::string& s) {
  if (s == "add_box") return ChangeKind::add_box;
  if (s == "remove_box") return ChangeKind::remove_box;
  if (s == "move_box") return ChangeKind::move_box;
  if (s == "add_mound") return ChangeKind::add_mound;
  throw FormatError("unknown change kind '" + s + "'");
}

std::string kind_to_string(ChangeKind k) {
  switch (k) {
    case ChangeKind::add_box: return "add_box";
    case ChangeKind::remove_box: return "remove_box";
    case ChangeKind::move_box: return "move_box";
    case ChangeKind::add_mound: return "add_mound";
  }
  return "add_box";
}

}  // namespace

void SceneSpec::validate() const {
  auto req = [](bool ok, const std::string& msg) {
    if (!ok) throw FormatError("scene spec: " + msg);
  };
  req(length > 0 && width > 0 && height > 0, "tunnel dimensions must be positive");
  req(point_spacing > 0 && point_spacing <= std::min({length, width, height}),
      "point spacing must be positive and smaller than the tunnel");
  req(noise_sigma >= 0, "noise sigma must be non-negative");
  req(trajectory_step > 0 && trajectory_step < length,
      "trajectory step must be positive and smaller than the tunnel length");
  req(trajectory_height > 0 && trajectory_height < height,
      "trajectory height must sit inside the tunnel");
  req(max_yaw_deg >= 0 && max_yaw_deg <= 45, "max yaw must be within [0, 45] degrees");
  req(max_translation >= 0, "max translation must be non-negative");
  req(modulation_amplitude >= 0 && modulation_amplitude <= 0.4,
      "modulation amplitude must be within [0, 0.4]");
  req(modulation_spacing > 0, "modulation spacing must be positive");
  req(furniture_count >= -1, "furniture count must be -1 (auto) or non-negative");
  req(furniture_density > 0, "furniture density must be positive");

  double margin = 0.1 + 3.0 * noise_sigma;
  double usable_half_width = width / 2.0 * (1.0 - modulation_amplitude) - margin;
  double usable_height = height * (1.0 - modulation_amplitude) - margin;

  auto check_center = [&](const Point3& c, const Point3& dims, size_t idx) {
    bool ok = c.x() - dims.x() / 2 >= margin &&
              c.x() + dims.x() / 2 <= length - margin &&
              std::abs(c.y()) + dims.y() / 2 <= usable_half_width &&
              c.z() - dims.z() / 2 >= 0.0 &&
              c.z() + dims.z() / 2 <= usable_height;
    if (!ok) {
      throw FormatError("scene spec: change " + std::to_string(idx + 1) +
                        " does not fit inside the tunnel");
    }
  };

  for (size_t i = 0; i < changes.size(); ++i) {
    const ChangeSpec& ch = changes[i];
    req(ch.density > 0, "change density must be positive");
    req((ch.dims.array() > 0).all(), "change dims must be positive");
    check_center(ch.center, ch.dims, i);
    if (ch.kind == ChangeKind::move_box) {
      check_center(ch.center + ch.displacement, ch.dims, i);
    }
  }
}

SceneData generate(const SceneSpec& spec) {
  spec.validate();

  SplitMix64 root(spec.seed);
  SplitMix64 profile_rng = root.fork(1);
  SplitMix64 offset_rng = root.fork(2);
  SplitMix64 surface_rng = root.fork(3);
  SplitMix64 furniture_rng = root.fork(4);

  TunnelProfile profile = make_profile(spec, profile_rng);

  // Both sessions observe the same base surface samples; session-level
  // differences come only from the scripted changes and the frame offset.
  PointCloud base = sample_tunnel(spec, profile, surface_rng);
  PointCloud furniture = sample_furniture(spec, profile, furniture_rng);
  base.insert(base.end(), furniture.begin(), furniture.end());

  SceneData data;
  PointCloud m_t1_world = base;
  data.m_t = std::move(base);

  // Frame offset of the later session. Yaw is drawn through its half-angle
  // tangent w: cos = (1-w^2)/(1+w^2), sin = 2w/(1+w^2) is exactly a unit
  // rotation, and |2*atan(w)| <= 2|w| keeps the angle within the bound
  // without calling any trig function.
  double w = offset_rng.uniform(-1.0, 1.0) * (spec.max_yaw_deg * kPi / 360.0);
  double denom = 1.0 + w * w;
  double cos_yaw = (1.0 - w * w) / denom;
  double sin_yaw = 2.0 * w / denom;
  Eigen::Matrix3d rot;
  rot << cos_yaw, -sin_yaw, 0.0, sin_yaw, cos_yaw, 0.0, 0.0, 0.0, 1.0;

  Point3 dir;
  do {
    dir = Point3(offset_rng.uniform(-1.0, 1.0), offset_rng.uniform(-1.0, 1.0),
                 offset_rng.uniform(-1.0, 1.0));
  } while (dir.squaredNorm() > 1.0);
  data.t_true = RigidTransform{rot, dir * spec.max_translation};
  RigidTransform t_inv = data.t_true.inverse();

  // World-frame trajectory along the centreline, poses 1..K.
  Trajectory world_traj;
  int pose_count = std::max(
      1, static_cast<int>(std::floor((spec.length - spec.trajectory_step / 2.0) /
                                     spec.trajectory_step)));
  for (int k = 1; k <= pose_count; ++k) {
    world_traj.poses.emplace_back(k * spec.trajectory_step, 0.0,
                                  spec.trajectory_height);
  }

  for (size_t ci = 0; ci < spec.changes.size(); ++ci) {
    const ChangeSpec& ch = spec.changes[ci];
    SplitMix64 change_rng = root.fork(100 + ci);

    ChangeTruth truth;
    truth.kind = ch.kind;
    truth.center = ch.center;

    PointCloud t_side, t1_side;
    switch (ch.kind) {
      case ChangeKind::add_box:
        t1_side = sample_box(ch.center, ch.dims, ch.density, change_rng);
        break;
      case ChangeKind::remove_box:
        t_side = sample_box(ch.center, ch.dims, ch.density, change_rng);
        break;
      case ChangeKind::move_box: {
        t_side = sample_box(ch.center, ch.dims, ch.density, change_rng);
        t1_side.reserve(t_side.size());
        for (const Point3& p : t_side) t1_side.push_back(p + ch.displacement);
        truth.center = ch.center + ch.displacement / 2.0;
        break;
      }
      case ChangeKind::add_mound:
        t1_side = sample_mound(ch.center, ch.dims, ch.density, change_rng);
        break;
    }

    data.m_t.insert(data.m_t.end(), t_side.begin(), t_side.end());
    m_t1_world.insert(m_t1_world.end(), t1_side.begin(), t1_side.end());

    truth.removed = t_side;

    // The added points are recorded exactly as the pipeline will see them:
    // mapped into the t+1 frame and back. The round trip is not a no-op in
    // floating point, and recording the round-tripped values keeps
    // "truth.added is a subset of the aligned map" true bit for bit.
    truth.added.reserve(t1_side.size());
    for (const Point3& p : t1_side) {
      truth.added.push_back(data.t_true.apply(t_inv.apply(p)));
    }

    double reach = ch.dims.norm() / 2.0 + 2.0 * spec.trajectory_step;
    for (int k = 1; k <= world_traj.count(); ++k) {
      if ((world_traj.pose(k) - ch.center).norm() <= reach) {
        truth.poses_t.push_back(k);
      }
      Point3 c1 = ch.kind == ChangeKind::move_box ? Point3(ch.center + ch.displacement)
                                                  : ch.center;
      if ((world_traj.pose(k) - c1).norm() <= reach) {
        truth.poses_t1.push_back(k);
      }
    }

    data.truth.all_added.insert(data.truth.all_added.end(), truth.added.begin(),
                                truth.added.end());
    data.truth.all_removed.insert(data.truth.all_removed.end(),
                                  truth.removed.begin(), truth.removed.end());
    data.truth.changes.push_back(std::move(truth));
  }

  data.m_t1 = apply_transform(m_t1_world, t_inv);
  data.tr_t = world_traj;
  data.tr_t1 = apply_transform(world_traj, t_inv);
  return data;
}

// ---------------------------------------------------------------------------
// Scene spec JSON

SceneSpec read_scene_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }

  SceneSpec spec;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "seed") spec.seed = value.get<uint64_t>();
      else if (key == "length") spec.length = value.get<double>();
      else if (key == "width") spec.width = value.get<double>();
      else if (key == "height") spec.height = value.get<double>();
      else if (key == "point_spacing") spec.point_spacing = value.get<double>();
      else if (key == "noise_sigma") spec.noise_sigma = value.get<double>();
      else if (key == "trajectory_step") spec.trajectory_step = value.get<double>();
      else if (key == "trajectory_height") spec.trajectory_height = value.get<double>();
      else if (key == "max_yaw_deg") spec.max_yaw_deg = value.get<double>();
      else if (key == "max_translation") spec.max_translation = value.get<double>();
      else if (key == "modulation_amplitude") spec.modulation_amplitude = value.get<double>();
      else if (key == "modulation_spacing") spec.modulation_spacing = value.get<double>();
      else if (key == "furniture_count") spec.furniture_count = value.get<int>();
      else if (key == "furniture_density") spec.furniture_density = value.get<double>();
      else if (key == "changes") {
        for (const json& cj : value) {
          ChangeSpec ch;
          if (!cj.contains("kind")) throw FormatError("change entry lacks 'kind'");
          for (const auto& [ck, cv] : cj.items()) {
            if (ck == "kind") ch.kind = kind_from_string(cv.get<std::string>());
            else if (ck == "center") ch.center = json_point(cv, "center");
            else if (ck == "dims") ch.dims = json_point(cv, "dims");
            else if (ck == "displacement") ch.displacement = json_point(cv, "displacement");
            else if (ck == "density") ch.density = cv.get<double>();
            else throw FormatError("unknown change key '" + ck + "'");
          }
          spec.changes.push_back(ch);
        }
      } else {
        throw FormatError("unknown scene key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const FormatError& e) {
    throw ParseError(path + ": " + e.what());
  }
  spec.validate();
  return spec;
}

void write_scene_spec(const SceneSpec& spec, const std::string& path) {
  json j;
  j["seed"] = spec.seed;
  j["length"] = spec.length;
  j["width"] = spec.width;
  j["height"] = spec.height;
  j["point_spacing"] = spec.point_spacing;
  j["noise_sigma"] = spec.noise_sigma;
  j["trajectory_step"] = spec.trajectory_step;
  j["trajectory_height"] = spec.trajectory_height;
  j["max_yaw_deg"] = spec.max_yaw_deg;
  j["max_translation"] = spec.max_translation;
  j["modulation_amplitude"] = spec.modulation_amplitude;
  j["modulation_spacing"] = spec.modulation_spacing;
  j["furniture_count"] = spec.furniture_count;
  j["furniture_density"] = spec.furniture_density;
  json changes = json::array();
  for (const ChangeSpec& ch : spec.changes) {
    json cj;
    cj["kind"] = kind_to_string(ch.kind);
    cj["center"] = json::array({ch.center.x(), ch.center.y(), ch.center.z()});
    cj["dims"] = json::array({ch.dims.x(), ch.dims.y(), ch.dims.z()});
    if (ch.kind == ChangeKind::move_box) {
      cj["displacement"] = json::array(
          {ch.displacement.x(), ch.displacement.y(), ch.displacement.z()});
    }
    cj["density"] = ch.density;
    changes.push_back(cj);
  }
  j["changes"] = changes;
  write_file_atomic(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Scoring

namespace {

// Fraction of `queries` with a point of `pool` within `dist`. Empty query
// set counts as a perfect 1.
double matched_fraction(const PointCloud& queries, const PointCloud& pool,
                        double dist) {
  if (queries.empty()) return 1.0;
  if (pool.empty()) return 0.0;
  KdTree<3> tree(pool);
  size_t hit = 0;
  for (const Point3& q : queries) {
    if (tree.nearest(q).distance <= dist) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(queries.size());
}

}  // namespace

Metrics score(const GroundTruth& truth, const std::vector<RegionPair>& regions,
              const std::vector<RegionExtraction>& extractions,
              double point_match_dist) {
  Metrics m;

  size_t changes_hit = 0;
  for (const ChangeTruth& ch : truth.changes) {
    for (const RegionPair& r : regions) {
      if ((r.center_t1 - ch.center).norm() <= r.radius) {
        ++changes_hit;
        break;
      }
    }
  }
  m.region_recall = truth.changes.empty()
                        ? 1.0
                        : static_cast<double>(changes_hit) /
                              static_cast<double>(truth.changes.size());

  size_t regions_hit = 0;
  for (const RegionPair& r : regions) {
    for (const ChangeTruth& ch : truth.changes) {
      if ((r.center_t1 - ch.center).norm() <= r.radius) {
        ++regions_hit;
        break;
      }
    }
  }
  m.region_precision = regions.empty()
                           ? 1.0
                           : static_cast<double>(regions_hit) /
                                 static_cast<double>(regions.size());

  PointCloud extracted_added, extracted_removed;
  for (const RegionExtraction& ex : extractions) {
    extracted_added.insert(extracted_added.end(), ex.added.points.begin(),
                           ex.added.points.end());
    extracted_removed.insert(extracted_removed.end(), ex.removed.points.begin(),
                             ex.removed.points.end());
  }

  // Recall: every truth point should be rediscovered somewhere.
  double rec_added = matched_fraction(truth.all_added, extracted_added, point_match_dist);
  double rec_removed =
      matched_fraction(truth.all_removed, extracted_removed, point_match_dist);
  size_t truth_n = truth.all_added.size() + truth.all_removed.size();
  m.point_recall =
      truth_n == 0
          ? 1.0
          : (rec_added * static_cast<double>(truth.all_added.size()) +
             rec_removed * static_cast<double>(truth.all_removed.size())) /
                static_cast<double>(truth_n);

  // Precision: extracted points should be real changes.
  double prec_added = matched_fraction(extracted_added, truth.all_added, point_match_dist);
  double prec_removed =
      matched_fraction(extracted_removed, truth.all_removed, point_match_dist);
  size_t ext_n = extracted_added.size() + extracted_removed.size();
  m.point_precision =
      ext_n == 0 ? 1.0
                 : (prec_added * static_cast<double>(extracted_added.size()) +
                    prec_removed * static_cast<double>(extracted_removed.size())) /
                       static_cast<double>(ext_n);
  return m;
}

json metrics_to_json(const Metrics& m) {
  json j;
  j["region_recall"] = m.region_recall;
  j["region_precision"] = m.region_precision;
  j["point_recall"] = m.point_recall;
  j["point_precision"] = m.point_precision;
  return j;
}

}  // namespace clouddelta
