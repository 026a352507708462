#pragma once

#include <vector>

#include "clouddelta/types.hpp"

namespace clouddelta {

// Later map brought into the earlier frame and appended:
// m_t followed by t * m_t1, sizes add up exactly.
PointCloud merge_maps(const PointCloud& m_t, const PointCloud& m_t1,
                      const RigidTransform& t);

struct IcpOptions {
  int max_iterations = 50;
  double convergence_eps = 1e-4;   // stop when rmse improves by less than this
  double max_corr_dist = 2.0;      // correspondences farther than this are ignored
  RigidTransform initial = RigidTransform::identity();
  // Source clouds above this size are strided down to about this many
  // points before matching. 0 disables the cap.
  int max_source_points = 20000;
  // After the untrimmed fit settles, a refinement pass re-solves using only
  // correspondences within this multiple of the median residual. Points
  // present in a single session have no true counterpart; the gate drops
  // their forced matches instead of letting them bias the estimate. Zero
  // disables the refinement.
  double refine_gate = 5.0;
};

struct AlignmentResult {
  RigidTransform transform;   // maps source into the target frame
  double residual_rmse = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> rmse_trace;  // rmse after each iteration
};

// Point-to-point ICP, absolute pose re-estimated each iteration via the
// SVD orthogonal-Procrustes solution. Throws DegenerateGeometryError when
// either cloud has fewer than 3 points or the correspondences are
// (near-)collinear.
AlignmentResult estimate_transform_icp(const PointCloud& source,
                                       const PointCloud& target,
                                       const IcpOptions& options = {});

}  // namespace clouddelta
