#include "grounding/kernels.hpp"

#include <cmath>

#include "grounding/errors.hpp"

namespace grounding {

namespace {

constexpr double kSingularRadius = 1e-6;

/// Object-local directions: +X front, +Y left, +Z up.
Vec3 intrinsic_direction(Predicate p) {
  switch (p) {
    case Predicate::FrontOf: return Vec3(1, 0, 0);
    case Predicate::Behind: return Vec3(-1, 0, 0);
    case Predicate::LeftOf: return Vec3(0, 1, 0);
    case Predicate::RightOf: return Vec3(0, -1, 0);
    case Predicate::Above: return Vec3(0, 0, 1);
    case Predicate::Below: return Vec3(0, 0, -1);
    default: break;
  }
  throw KernelError(KernelError::Kind::BadParameter,
                    std::string("predicate '") + predicate_name(p) + "' has no direction");
}

/// World-frame direction for viewer-relative language: "front of X" is the
/// side of X facing the observer (horizontal), left/right come from the
/// observer's heading, and vertical predicates stay world-vertical.
Vec3 viewer_direction(Predicate p, const Vec3& anchor_position, const ObserverPose& observer) {
  switch (p) {
    case Predicate::Above: return Vec3(0, 0, 1);
    case Predicate::Below: return Vec3(0, 0, -1);
    default: break;
  }
  const double yaw = deg_to_rad(observer.yaw_deg);
  const Vec3 heading(std::cos(yaw), std::sin(yaw), 0.0);
  const Vec3 left(-std::sin(yaw), std::cos(yaw), 0.0);
  switch (p) {
    case Predicate::LeftOf: return left;
    case Predicate::RightOf: return -left;
    case Predicate::FrontOf:
    case Predicate::Behind: {
      Vec3 toward_observer = observer.position - anchor_position;
      toward_observer.z() = 0.0;
      if (toward_observer.norm() < kSingularRadius) {
        // Observer directly over the anchor: fall back to the heading.
        toward_observer = -heading;
      }
      toward_observer.normalize();
      return p == Predicate::FrontOf ? toward_observer : Vec3(-toward_observer);
    }
    default: break;
  }
  throw KernelError(KernelError::Kind::BadParameter,
                    std::string("predicate '") + predicate_name(p) + "' has no direction");
}

DirectionalKernel directional_from_world(const Vec3& anchor_position, const Vec3& world_dir,
                                         double concentration) {
  DirectionalKernel k;
  k.anchor.position = anchor_position;
  k.anchor.rotation = Mat3::Identity();
  k.anchor.known_orientation = true;
  k.mean_azimuth_rad = std::atan2(world_dir.y(), world_dir.x());
  k.mean_elevation_rad = std::asin(std::clamp(world_dir.z(), -1.0, 1.0));
  k.concentration = concentration;
  return k;
}

}  // namespace

Vec3 DirectionalKernel::local_mean_direction() const {
  const double caz = std::cos(mean_azimuth_rad), saz = std::sin(mean_azimuth_rad);
  const double cel = std::cos(mean_elevation_rad), sel = std::sin(mean_elevation_rad);
  return Vec3(cel * caz, cel * saz, sel);
}

Vec3 DirectionalKernel::world_mean_direction() const {
  return anchor.rotation * local_mean_direction();
}

void KernelSet::append(const KernelSet& other) {
  directional.insert(directional.end(), other.directional.begin(), other.directional.end());
  metric.insert(metric.end(), other.metric.begin(), other.metric.end());
}

double KernelParams::concentration_for(Predicate p) const {
  auto it = concentration_by_predicate.find(p);
  return it == concentration_by_predicate.end() ? concentration : it->second;
}

void KernelParams::validate() const {
  if (concentration <= 0.0)
    throw KernelError(KernelError::Kind::BadParameter, "concentration must be > 0");
  for (const auto& [p, c] : concentration_by_predicate)
    if (c <= 0.0)
      throw KernelError(KernelError::Kind::BadParameter,
                        std::string("concentration for '") + predicate_name(p) +
                            "' must be > 0");
  if (sigma_fraction <= 0.0 || sigma_floor <= 0.0 || default_sigma <= 0.0 || near_sigma <= 0.0)
    throw KernelError(KernelError::Kind::BadParameter, "tolerances must be > 0");
  if (default_offset < 0.0 || near_offset < 0.0 || vertical_clearance < 0.0)
    throw KernelError(KernelError::Kind::BadParameter, "offsets must be >= 0");
}

double vmf_log_density(const DirectionalKernel& k, const Vec3& x) {
  const Vec3 offset = x - k.anchor.position;
  const double r = offset.norm();
  if (r < kSingularRadius) return 0.0;  // bearing undefined at the anchor point
  return k.concentration * k.world_mean_direction().dot(offset / r);
}

double metric_log_density(const MetricKernel& k, const Vec3& x) {
  const double r = (x - k.anchor_position).norm();
  const double dev = r - k.mean_offset;
  return -(dev * dev) / (2.0 * k.tolerance * k.tolerance);
}

KernelSet clause_to_kernels(const SdcClause& clause, const ObjectNode& anchor,
                            const ObjectNode* anchor2, const ObserverPose* observer,
                            FramePolicy policy, const KernelParams& params) {
  params.validate();
  KernelSet set;

  if (clause.predicate == Predicate::Between) {
    if (!anchor2)
      throw KernelError(KernelError::Kind::MissingSecondAnchor,
                        "'between' needs a second resolved anchor");
    const Vec3 a = anchor.pose.position;
    const Vec3 b = anchor2->pose.position;
    MetricKernel k;
    k.anchor_position = 0.5 * (a + b);
    k.mean_offset = 0.0;  // plain Gaussian pulled toward the midpoint
    k.tolerance = std::max((a - b).norm() / 4.0, params.sigma_floor);
    set.metric.push_back(k);
    return set;
  }

  if (clause.predicate == Predicate::Near) {
    MetricKernel k;
    k.anchor_position = anchor.pose.position;
    if (clause.metric) {
      k.mean_offset = clause.metric->distance_m;
      k.tolerance = std::max(params.sigma_fraction * k.mean_offset, params.sigma_floor);
    } else {
      k.mean_offset = params.near_offset;
      k.tolerance = params.near_sigma;
    }
    set.metric.push_back(k);
    return set;
  }

  // Directional predicate: one bearing kernel plus one radial kernel.
  const bool viewer_frame =
      policy == FramePolicy::ViewerRelative || !anchor.pose.known_orientation;
  const double concentration = params.concentration_for(clause.predicate);
  if (viewer_frame) {
    if (!observer)
      throw KernelError(KernelError::Kind::MissingObserver,
                        std::string("viewer-relative '") + predicate_name(clause.predicate) +
                            "' needs an observer pose");
    const Vec3 dir = viewer_direction(clause.predicate, anchor.pose.position, *observer);
    set.directional.push_back(
        directional_from_world(anchor.pose.position, dir, concentration));
  } else {
    const Vec3 local = intrinsic_direction(clause.predicate);
    DirectionalKernel k;
    k.anchor = anchor.pose;
    k.mean_azimuth_rad = std::atan2(local.y(), local.x());
    k.mean_elevation_rad = std::asin(std::clamp(local.z(), -1.0, 1.0));
    k.concentration = concentration;
    set.directional.push_back(k);
  }

  MetricKernel radial;
  radial.anchor_position = anchor.pose.position;
  if (clause.metric) {
    radial.mean_offset = clause.metric->distance_m;
    radial.tolerance = std::max(params.sigma_fraction * radial.mean_offset, params.sigma_floor);
  } else if (clause.predicate == Predicate::Above || clause.predicate == Predicate::Below) {
    radial.mean_offset = anchor.box.half_extents.z() + params.vertical_clearance;
    radial.tolerance = params.default_sigma;
  } else {
    radial.mean_offset = params.default_offset;
    radial.tolerance = params.default_sigma;
  }
  set.metric.push_back(radial);
  return set;
}

}  // namespace grounding
