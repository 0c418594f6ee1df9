#include "grounding/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "grounding/errors.hpp"
#include "grounding/rng.hpp"

namespace grounding {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

DensityGrid::DensityGrid(const GridGeometry& geom) : geom_(geom) {
  geom_.validate();
  log_values_.assign(geom_.size(), kNegInf);
}

double DensityGrid::probability(std::size_t idx) const { return std::exp(log_values_[idx]); }

DensityGrid rasterize(const KernelSet& kernels, const GridGeometry& geom,
                      const std::vector<std::uint8_t>& usable_mask) {
  if (usable_mask.size() != geom.size())
    throw DensityError(DensityError::Kind::BadArgument,
                       "mask size does not match the grid size");
  if (std::find(usable_mask.begin(), usable_mask.end(), 1) == usable_mask.end())
    throw DensityError(DensityError::Kind::EmptyFreeSpace,
                       "no usable cells: free space is empty");

  DensityGrid grid(geom);
  const int nx = geom.dims[0], ny = geom.dims[1], nz = geom.dims[2];
  std::size_t idx = 0;
  for (int iz = 0; iz < nz; ++iz) {
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix, ++idx) {
        if (!usable_mask[idx]) continue;
        const Vec3 x = geom.cell_center(ix, iy, iz);
        double acc = 0.0;
        for (const DirectionalKernel& k : kernels.directional) acc += vmf_log_density(k, x);
        for (const MetricKernel& k : kernels.metric) acc += metric_log_density(k, x);
        grid.set_log_value(idx, acc);
      }
    }
  }
  return grid;
}

DensityGrid normalize(DensityGrid grid) {
  const std::vector<double>& v = grid.log_values();
  double peak = kNegInf;
  for (double x : v) peak = std::max(peak, x);
  if (!std::isfinite(peak))
    throw DensityError(DensityError::Kind::AllMasked,
                       "cannot normalize: every cell is masked");
  double sum = 0.0;
  for (double x : v)
    if (std::isfinite(x)) sum += std::exp(x - peak);
  const double lse = peak + std::log(sum);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (std::isfinite(v[i])) grid.set_log_value(i, v[i] - lse);
  grid.mark_normalized(true);
  return grid;
}

namespace {

void require_normalized(const DensityGrid& grid, const char* who) {
  if (!grid.normalized())
    throw DensityError(DensityError::Kind::NotNormalized,
                       std::string(who) + " requires a normalized grid");
}

}  // namespace

GoalSample argmax_goal(const DensityGrid& grid) {
  require_normalized(grid, "argmax_goal");
  const std::vector<double>& v = grid.log_values();
  std::size_t best = v.size();
  double best_value = kNegInf;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i]) && v[i] > best_value) {
      best_value = v[i];
      best = i;
    }
  }
  if (best == v.size())
    throw DensityError(DensityError::Kind::AllMasked, "argmax over an all-masked grid");
  return {grid.geometry().cell_center(best), grid.probability(best), best};
}

std::vector<GoalSample> topk_goals(const DensityGrid& grid, int k, double nms_radius) {
  require_normalized(grid, "topk_goals");
  if (k < 1)
    throw DensityError(DensityError::Kind::BadArgument, "topk_goals requires k >= 1");
  if (nms_radius < 0.0)
    throw DensityError(DensityError::Kind::BadArgument, "suppression radius must be >= 0");

  const std::vector<double>& v = grid.log_values();
  std::vector<GoalSample> picked;
  std::vector<Vec3> centers;
  while (static_cast<int>(picked.size()) < k) {
    std::size_t best = v.size();
    double best_value = kNegInf;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i]) || v[i] <= best_value) continue;
      const Vec3 c = grid.geometry().cell_center(i);
      bool suppressed = false;
      for (const Vec3& p : centers) {
        if ((c - p).norm() < nms_radius) {
          suppressed = true;
          break;
        }
      }
      if (suppressed) continue;
      // Already-picked cells are within radius 0 of themselves only when
      // nms_radius == 0; exclude them explicitly.
      bool already = false;
      for (const GoalSample& s : picked)
        if (s.cell_index == i) {
          already = true;
          break;
        }
      if (already) continue;
      best_value = v[i];
      best = i;
    }
    if (best == v.size()) break;
    picked.push_back({grid.geometry().cell_center(best), grid.probability(best), best});
    centers.push_back(picked.back().point);
  }
  if (picked.empty())
    throw DensityError(DensityError::Kind::AllMasked, "topk over an all-masked grid");
  return picked;
}

std::vector<GoalSample> importance_sample(const DensityGrid& grid, int n, std::uint64_t seed) {
  require_normalized(grid, "importance_sample");
  if (n < 1)
    throw DensityError(DensityError::Kind::BadArgument, "importance_sample requires n >= 1");

  const std::vector<double>& v = grid.log_values();
  std::vector<double> cumulative(v.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i])) acc += std::exp(v[i]);
    cumulative[i] = acc;
  }
  if (acc <= 0.0)
    throw DensityError(DensityError::Kind::AllMasked, "sampling an all-masked grid");

  CounterRng rng(seed);
  std::vector<GoalSample> samples;
  samples.reserve(n);
  for (int s = 0; s < n; ++s) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    std::size_t idx =
        it == cumulative.end() ? v.size() - 1 : static_cast<std::size_t>(it - cumulative.begin());
    while (idx > 0 && !std::isfinite(v[idx])) --idx;  // never land on a masked cell
    samples.push_back({grid.geometry().cell_center(idx), grid.probability(idx), idx});
  }
  return samples;
}

OffsetAngles offset_angles(const Vec3& goal, const Vec3& anchor) {
  const Vec3 d = goal - anchor;
  if (d.norm() < 1e-6)
    throw DensityError(DensityError::Kind::ZeroOffset,
                       "goal coincides with the anchor: bearing undefined");
  OffsetAngles a;
  a.yaw_deg = wrap_deg_signed(rad_to_deg(std::atan2(d.y(), d.x())));
  a.pitch_deg = rad_to_deg(std::atan2(d.z(), std::hypot(d.x(), d.y())));
  return a;
}

int count_modes(const DensityGrid& grid, double frac) {
  require_normalized(grid, "count_modes");
  if (frac <= 0.0 || frac > 1.0)
    throw DensityError(DensityError::Kind::BadArgument, "mode fraction must lie in (0, 1]");

  const std::vector<double>& v = grid.log_values();
  const GridGeometry& geom = grid.geometry();
  double peak = kNegInf;
  for (double x : v) peak = std::max(peak, x);
  if (!std::isfinite(peak))
    throw DensityError(DensityError::Kind::AllMasked, "count_modes over an all-masked grid");
  const double log_threshold = peak + std::log(frac);

  std::vector<std::uint8_t> in_set(v.size(), 0);
  for (std::size_t i = 0; i < v.size(); ++i)
    in_set[i] = (std::isfinite(v[i]) && v[i] >= log_threshold) ? 1 : 0;

  std::vector<std::uint8_t> visited(v.size(), 0);
  std::vector<std::size_t> stack;
  int components = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!in_set[i] || visited[i]) continue;
    ++components;
    visited[i] = 1;
    stack.assign(1, i);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const auto [cx, cy, cz] = geom.unflatten(cur);
      for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0 && dz == 0) continue;
            const int nx = cx + dx, ny = cy + dy, nz = cz + dz;
            if (!geom.in_bounds(nx, ny, nz)) continue;
            const std::size_t ni = geom.flat_index(nx, ny, nz);
            if (!in_set[ni] || visited[ni]) continue;
            visited[ni] = 1;
            stack.push_back(ni);
          }
        }
      }
    }
  }
  return components;
}

void export_density_csv(const DensityGrid& grid, std::ostream& out, double threshold) {
  require_normalized(grid, "export_density_csv");
  out << "ix,iy,iz,probability\n";
  const std::vector<double>& v = grid.log_values();
  char buf[64];
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) continue;
    const double p = grid.probability(i);
    if (p <= threshold) continue;
    const auto [ix, iy, iz] = grid.geometry().unflatten(i);
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g\n", ix, iy, iz, p);
    out << buf;
  }
}

void export_slice_pgm(const DensityGrid& grid, int z_index, std::ostream& out) {
  require_normalized(grid, "export_slice_pgm");
  const GridGeometry& geom = grid.geometry();
  if (z_index < 0 || z_index >= geom.dims[2])
    throw DensityError(DensityError::Kind::BadArgument,
                       "slice index " + std::to_string(z_index) + " out of range");

  double slice_max = 0.0;
  for (int iy = 0; iy < geom.dims[1]; ++iy)
    for (int ix = 0; ix < geom.dims[0]; ++ix) {
      const double lv = grid.log_value(geom.flat_index(ix, iy, z_index));
      if (std::isfinite(lv)) slice_max = std::max(slice_max, std::exp(lv));
    }

  out << "P2\n" << geom.dims[0] << " " << geom.dims[1] << "\n255\n";
  for (int iy = geom.dims[1] - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < geom.dims[0]; ++ix) {
      int value = 0;
      const double lv = grid.log_value(geom.flat_index(ix, iy, z_index));
      if (slice_max > 0.0 && std::isfinite(lv))
        value = static_cast<int>(std::lround(255.0 * std::exp(lv) / slice_max));
      out << value << (ix + 1 == geom.dims[0] ? "" : " ");
    }
    out << "\n";
  }
}

}  // namespace grounding
