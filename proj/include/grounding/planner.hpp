#pragma once

#include <cstdint>
#include <vector>

#include "grounding/scene.hpp"

namespace grounding {

struct PlannerConfig {
  double step_size = 0.25;     // meters, > 0
  double goal_bias = 0.1;      // in [0, 1]
  double rewire_radius = 1.0;  // meters, > 0
  int max_iterations = 5000;   // > 0
  double goal_tolerance = 0.25;  // meters, > 0
  std::uint64_t seed = 1;

  void validate() const;  // throws PlannerError on out-of-range values
};

struct Path {
  std::vector<Vec3> waypoints;  // z fixed to the slice height; spacing <= step_size
  double total_length = 0.0;
};

double path_length(const std::vector<Vec3>& waypoints);

/// z-slice index containing height z; throws PlannerError(BadSlice) outside.
int slice_index_for(const OccupancyGrid& grid, double z);

/// Exact 2D voxel traversal (Amanatides-Woo): true iff every slice cell the
/// segment passes through is Free. Endpoints outside the lattice fail.
bool segment_free(const OccupancyGrid& grid, int slice_z, const Vec3& a, const Vec3& b);

/// RRT* over one horizontal occupancy slice. Both endpoints are projected
/// onto the slice height; a goal whose cell is not free is moved to the
/// nearest free cell center within 1.0 m horizontally (else GoalOccupied).
/// When `best_cost_trace` is given, it receives the best known solution
/// cost after every iteration (+inf until a solution exists).
/// Throws PlannerError (StartOccupied, GoalOccupied, NoPathFound, BadSlice).
Path plan(const OccupancyGrid& grid, int slice_z, const Vec3& start, const Vec3& goal,
          const PlannerConfig& cfg, std::vector<double>* best_cost_trace = nullptr);

}  // namespace grounding
