#pragma once

#include <map>
#include <optional>
#include <vector>

#include "grounding/parser.hpp"
#include "grounding/scene.hpp"

namespace grounding {

/// Directional preference: a von Mises-Fisher-style log density over the
/// bearing from the anchor to the evaluation point,
///   log f(x) = concentration * dot(R_anchor * mean_dir, (x - t) / |x - t|),
/// with the normalizer dropped (it cancels when the grid is normalized).
/// The mean direction is spherical in the anchor's local frame:
///   m = (cos(el)cos(az), cos(el)sin(az), sin(el)).
struct DirectionalKernel {
  Pose anchor;
  double mean_azimuth_rad = 0.0;
  double mean_elevation_rad = 0.0;
  double concentration = 4.0;  // > 0

  /// Unit mean direction in the anchor's local frame.
  Vec3 local_mean_direction() const;
  /// Unit mean direction rotated into the world frame.
  Vec3 world_mean_direction() const;
};

/// Radial distance preference: a Gaussian over the offset length,
///   log f(x) = -(|x - t| - mean_offset)^2 / (2 tolerance^2).
/// mean_offset = 0 gives a plain Gaussian centered on the anchor point
/// (used for Between, anchored at the midpoint).
struct MetricKernel {
  Vec3 anchor_position = Vec3::Zero();
  double mean_offset = 1.0;  // >= 0, meters
  double tolerance = 0.5;    // > 0, meters
};

struct KernelSet {
  std::vector<DirectionalKernel> directional;
  std::vector<MetricKernel> metric;

  bool empty() const { return directional.empty() && metric.empty(); }
  void append(const KernelSet& other);
};

/// Frame used to interpret left/right/front directional language.
/// Intrinsic uses the anchor object's own axes (+X front, +Y left, +Z up);
/// ViewerRelative derives directions from the observer's vantage and is the
/// forced fallback when the anchor's orientation is unknown.
enum class FramePolicy { Intrinsic, ViewerRelative };

struct KernelParams {
  double concentration = 4.0;                       // default vMF kappa
  std::map<Predicate, double> concentration_by_predicate;
  double sigma_fraction = 0.1;   // explicit metric: tolerance = max(fraction*d, floor)
  double sigma_floor = 0.15;     // meters
  double default_offset = 1.0;   // directional predicates without a metric
  double default_sigma = 0.5;
  double near_offset = 1.0;      // Near without a metric
  double near_sigma = 0.5;
  double vertical_clearance = 0.3;  // Above/Below: offset = half height + this
  FramePolicy frame_policy = FramePolicy::Intrinsic;

  double concentration_for(Predicate p) const;
  void validate() const;  // throws KernelError on nonpositive parameters
};

double vmf_log_density(const DirectionalKernel& k, const Vec3& x);
double metric_log_density(const MetricKernel& k, const Vec3& x);

/// Builds the kernels realizing one clause against its resolved anchor(s).
/// anchor2 is required for Between; observer is required whenever the
/// viewer-relative frame is used (by policy or unknown anchor orientation).
/// Throws KernelError (MissingSecondAnchor, MissingObserver).
KernelSet clause_to_kernels(const SdcClause& clause, const ObjectNode& anchor,
                            const ObjectNode* anchor2, const ObserverPose* observer,
                            FramePolicy policy, const KernelParams& params);

}  // namespace grounding
