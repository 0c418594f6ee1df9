#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "grounding/kernels.hpp"
#include "grounding/scene.hpp"

namespace grounding {

/// Log-domain scalar field over a voxel lattice. Cells outside the free-
/// space mask hold -infinity. After normalize(), exp of the values sums
/// to 1 over the lattice (a discrete probability distribution).
class DensityGrid {
 public:
  explicit DensityGrid(const GridGeometry& geom);

  const GridGeometry& geometry() const { return geom_; }
  const std::vector<double>& log_values() const { return log_values_; }
  double log_value(std::size_t idx) const { return log_values_[idx]; }
  void set_log_value(std::size_t idx, double v) { log_values_[idx] = v; }

  /// exp(log value); a probability once normalized.
  double probability(std::size_t idx) const;

  bool normalized() const { return normalized_; }
  void mark_normalized(bool v) { normalized_ = v; }

 private:
  GridGeometry geom_;
  std::vector<double> log_values_;
  bool normalized_ = false;
};

struct GoalSample {
  Vec3 point = Vec3::Zero();
  double weight = 0.0;  // probability mass of the cell
  std::size_t cell_index = 0;
};

/// Evaluates the product of experts over the lattice: each unmasked cell
/// center receives the sum of all kernel log densities; masked cells get
/// -infinity. The mask must have one entry per cell (1 = usable).
/// Throws DensityError(EmptyFreeSpace) when the mask admits no cell.
DensityGrid rasterize(const KernelSet& kernels, const GridGeometry& geom,
                      const std::vector<std::uint8_t>& usable_mask);

/// Shift-invariant discrete normalization via max-shifted log-sum-exp.
/// Throws DensityError(AllMasked) when no cell is finite.
DensityGrid normalize(DensityGrid grid);

/// Highest-probability cell; ties break toward the smallest flat index.
GoalSample argmax_goal(const DensityGrid& grid);

/// Greedy non-maximum suppression: repeatedly take the best remaining cell
/// at least `nms_radius` away from all cells already taken. Returns up to k
/// samples in descending weight order.
std::vector<GoalSample> topk_goals(const DensityGrid& grid, int k, double nms_radius);

/// n independent draws from the cell distribution (counter-based RNG, so
/// the result depends only on (grid, n, seed)).
std::vector<GoalSample> importance_sample(const DensityGrid& grid, int n, std::uint64_t seed);

struct OffsetAngles {
  double yaw_deg = 0.0;    // in (-180, 180]
  double pitch_deg = 0.0;  // in [-90, 90]
};

/// Bearing of `goal` as seen from `anchor`.
/// Throws DensityError(ZeroOffset) when they are closer than 1e-6 m.
OffsetAngles offset_angles(const Vec3& goal, const Vec3& anchor);

/// Number of 26-connected components of the superlevel set
/// { cells with probability >= frac * peak probability }.
int count_modes(const DensityGrid& grid, double frac = 0.5);

/// "ix,iy,iz,probability" rows for cells with probability > threshold.
void export_density_csv(const DensityGrid& grid, std::ostream& out, double threshold = 0.0);

/// Plain-text PGM (P2, 255 levels) of one z slice, scaled linearly so the
/// slice maximum maps to 255. Rows run from high y to low y.
void export_slice_pgm(const DensityGrid& grid, int z_index, std::ostream& out);

}  // namespace grounding
