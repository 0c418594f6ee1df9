#include "grounding/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "grounding/errors.hpp"
#include "grounding/rng.hpp"

namespace grounding {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGoalProjectionRadius = 1.0;  // meters

double dist2d(const Vec3& a, const Vec3& b) {
  return std::hypot(a.x() - b.x(), a.y() - b.y());
}

struct TreeNode {
  Vec3 position;
  int parent = -1;
  double cost = 0.0;
  std::vector<int> children;
};

}  // namespace

void PlannerConfig::validate() const {
  const auto bad = [](const char* msg) {
    return PlannerError(PlannerError::Kind::BadParameter, msg);
  };
  if (step_size <= 0.0) throw bad("step_size must be > 0");
  if (goal_bias < 0.0 || goal_bias > 1.0) throw bad("goal_bias must lie in [0, 1]");
  if (rewire_radius <= 0.0) throw bad("rewire_radius must be > 0");
  if (max_iterations <= 0) throw bad("max_iterations must be > 0");
  if (goal_tolerance <= 0.0) throw bad("goal_tolerance must be > 0");
}

double path_length(const std::vector<Vec3>& waypoints) {
  double total = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i)
    total += (waypoints[i] - waypoints[i - 1]).norm();
  return total;
}

int slice_index_for(const OccupancyGrid& grid, double z) {
  const GridGeometry& geom = grid.geometry();
  const int iz = static_cast<int>(std::floor((z - geom.origin.z()) / geom.resolution));
  if (iz < 0 || iz >= geom.dims[2])
    throw PlannerError(PlannerError::Kind::BadSlice,
                       "height " + std::to_string(z) + " lies outside the grid");
  return iz;
}

bool segment_free(const OccupancyGrid& grid, int slice_z, const Vec3& a, const Vec3& b) {
  const GridGeometry& geom = grid.geometry();
  if (slice_z < 0 || slice_z >= geom.dims[2]) return false;

  const double ax = (a.x() - geom.origin.x()) / geom.resolution;
  const double ay = (a.y() - geom.origin.y()) / geom.resolution;
  const double bx = (b.x() - geom.origin.x()) / geom.resolution;
  const double by = (b.y() - geom.origin.y()) / geom.resolution;

  int ix = static_cast<int>(std::floor(ax));
  int iy = static_cast<int>(std::floor(ay));
  const int ex = static_cast<int>(std::floor(bx));
  const int ey = static_cast<int>(std::floor(by));
  if (!geom.in_bounds(ix, iy, slice_z) || !geom.in_bounds(ex, ey, slice_z)) return false;

  const double dx = bx - ax;
  const double dy = by - ay;
  const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  double t_max_x = kInf, t_delta_x = kInf;
  double t_max_y = kInf, t_delta_y = kInf;
  if (step_x != 0) {
    const double next_x = step_x > 0 ? (ix + 1.0) : ix;
    t_max_x = (next_x - ax) / dx;
    t_delta_x = 1.0 / std::abs(dx);
  }
  if (step_y != 0) {
    const double next_y = step_y > 0 ? (iy + 1.0) : iy;
    t_max_y = (next_y - ay) / dy;
    t_delta_y = 1.0 / std::abs(dy);
  }

  if (!grid.is_free(ix, iy, slice_z)) return false;
  // Visit every cell the segment crosses until reaching the end cell.
  while (ix != ex || iy != ey) {
    if (t_max_x < t_max_y) {
      ix += step_x;
      t_max_x += t_delta_x;
    } else {
      iy += step_y;
      t_max_y += t_delta_y;
    }
    if (!geom.in_bounds(ix, iy, slice_z)) return false;
    if (!grid.is_free(ix, iy, slice_z)) return false;
  }
  return true;
}

namespace {

/// Appends `to` to the waypoint list, inserting evenly spaced intermediate
/// points so consecutive waypoints stay within step_size of each other.
void append_subdivided(std::vector<Vec3>* waypoints, const Vec3& to, double step_size) {
  const Vec3 from = waypoints->back();
  const double len = (to - from).norm();
  if (len <= 1e-12) return;
  const int pieces = std::max(1, static_cast<int>(std::ceil(len / step_size - 1e-9)));
  for (int i = 1; i <= pieces; ++i)
    waypoints->push_back(from + (to - from) * (static_cast<double>(i) / pieces));
}

void propagate_cost_delta(std::vector<TreeNode>& nodes, int root, double delta) {
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    nodes[cur].cost += delta;
    for (int child : nodes[cur].children) stack.push_back(child);
  }
}

}  // namespace

Path plan(const OccupancyGrid& grid, int slice_z, const Vec3& start, const Vec3& goal,
          const PlannerConfig& cfg, std::vector<double>* best_cost_trace) {
  cfg.validate();
  const GridGeometry& geom = grid.geometry();
  if (slice_z < 0 || slice_z >= geom.dims[2])
    throw PlannerError(PlannerError::Kind::BadSlice,
                       "slice " + std::to_string(slice_z) + " out of range");
  const double slice_height = geom.origin.z() + (slice_z + 0.5) * geom.resolution;

  const Vec3 start2(start.x(), start.y(), slice_height);
  Vec3 goal2(goal.x(), goal.y(), slice_height);

  const auto start_cell = geom.cell_of(start2);
  if (!start_cell || !grid.is_free((*start_cell)[0], (*start_cell)[1], slice_z))
    throw PlannerError(PlannerError::Kind::StartOccupied,
                       "start cell is not free on the planning slice");

  const auto goal_cell = geom.cell_of(goal2);
  const bool goal_ok =
      goal_cell && grid.is_free((*goal_cell)[0], (*goal_cell)[1], slice_z) &&
      std::abs(goal.z() - slice_height) <= geom.resolution * 0.5 + 1e-12;
  if (!goal_ok) {
    // Project to the nearest free cell center within a fixed horizontal radius.
    double best_d = kInf;
    Vec3 best_center = goal2;
    for (int iy = 0; iy < geom.dims[1]; ++iy) {
      for (int ix = 0; ix < geom.dims[0]; ++ix) {
        if (!grid.is_free(ix, iy, slice_z)) continue;
        const Vec3 c = geom.cell_center(ix, iy, slice_z);
        const double d = dist2d(c, goal2);
        if (d < best_d - 1e-12) {
          best_d = d;
          best_center = c;
        }
      }
    }
    if (!std::isfinite(best_d) || best_d > kGoalProjectionRadius)
      throw PlannerError(PlannerError::Kind::GoalOccupied,
                         "no free slice cell within " + std::to_string(kGoalProjectionRadius) +
                             " m of the goal");
    goal2 = best_center;
  }

  if (dist2d(start2, goal2) <= cfg.goal_tolerance) {
    if (best_cost_trace) best_cost_trace->assign(1, 0.0);
    return {{start2}, 0.0};
  }

  CounterRng rng(cfg.seed);
  std::vector<TreeNode> nodes;
  nodes.push_back({start2, -1, 0.0, {}});

  const double min_x = geom.origin.x(), max_x = geom.origin.x() + geom.dims[0] * geom.resolution;
  const double min_y = geom.origin.y(), max_y = geom.origin.y() + geom.dims[1] * geom.resolution;

  // Best known solution: a tree node within goal_tolerance of the goal,
  // scored by cost-to-node plus the final hop to the exact goal.
  const auto solution_cost = [&](int i) {
    return nodes[i].cost + dist2d(nodes[i].position, goal2);
  };
  int best_goal_node = -1;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    Vec3 sample = goal2;
    if (rng.uniform() >= cfg.goal_bias) {
      sample = Vec3(rng.uniform(min_x, max_x), rng.uniform(min_y, max_y), slice_height);
    }

    int nearest = 0;
    double nearest_d = kInf;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d = dist2d(nodes[i].position, sample);
      if (d < nearest_d) {
        nearest_d = d;
        nearest = static_cast<int>(i);
      }
    }
    if (nearest_d < 1e-9) {
      if (best_cost_trace)
        best_cost_trace->push_back(best_goal_node >= 0 ? solution_cost(best_goal_node) : kInf);
      continue;
    }

    const Vec3 from = nodes[nearest].position;
    const double reach = std::min(cfg.step_size, nearest_d);
    const Vec3 new_pos = from + (sample - from) * (reach / nearest_d);

    if (!segment_free(grid, slice_z, from, new_pos)) {
      if (best_cost_trace)
        best_cost_trace->push_back(best_goal_node >= 0 ? solution_cost(best_goal_node) : kInf);
      continue;
    }

    // Choose the cheapest valid parent among the neighborhood and nearest.
    std::vector<int> neighbors;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (dist2d(nodes[i].position, new_pos) <= cfg.rewire_radius)
        neighbors.push_back(static_cast<int>(i));
    if (std::find(neighbors.begin(), neighbors.end(), nearest) == neighbors.end())
      neighbors.push_back(nearest);

    int parent = nearest;
    double new_cost = nodes[nearest].cost + dist2d(from, new_pos);
    for (int i : neighbors) {
      const double c = nodes[i].cost + dist2d(nodes[i].position, new_pos);
      if (c < new_cost - 1e-12 && segment_free(grid, slice_z, nodes[i].position, new_pos)) {
        new_cost = c;
        parent = i;
      }
    }

    const int new_index = static_cast<int>(nodes.size());
    nodes.push_back({new_pos, parent, new_cost, {}});
    nodes[parent].children.push_back(new_index);

    // Rewire: adopt neighbors that become cheaper through the new node.
    for (int i : neighbors) {
      if (i == parent) continue;
      const double through_new = new_cost + dist2d(new_pos, nodes[i].position);
      if (through_new < nodes[i].cost - 1e-12 &&
          segment_free(grid, slice_z, new_pos, nodes[i].position)) {
        auto& old_children = nodes[nodes[i].parent].children;
        old_children.erase(std::remove(old_children.begin(), old_children.end(), i),
                           old_children.end());
        const double delta = through_new - nodes[i].cost;
        nodes[i].parent = new_index;
        nodes[new_index].children.push_back(i);
        propagate_cost_delta(nodes, i, delta);
      }
    }

    if (dist2d(new_pos, goal2) <= cfg.goal_tolerance) {
      if (best_goal_node < 0 || solution_cost(new_index) < solution_cost(best_goal_node))
        best_goal_node = new_index;
    }
    if (best_cost_trace)
      best_cost_trace->push_back(best_goal_node >= 0 ? solution_cost(best_goal_node) : kInf);
  }

  if (best_goal_node < 0)
    throw PlannerError(PlannerError::Kind::NoPathFound,
                       "no path after " + std::to_string(cfg.max_iterations) + " iterations");

  // After rewiring, some other goal-tolerant node may have become cheaper.
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (dist2d(nodes[i].position, goal2) <= cfg.goal_tolerance &&
        solution_cost(static_cast<int>(i)) < solution_cost(best_goal_node))
      best_goal_node = static_cast<int>(i);

  std::vector<int> chain;
  for (int i = best_goal_node; i >= 0; i = nodes[i].parent) chain.push_back(i);
  std::reverse(chain.begin(), chain.end());

  Path path;
  path.waypoints.push_back(nodes[chain.front()].position);
  for (std::size_t i = 1; i < chain.size(); ++i)
    append_subdivided(&path.waypoints, nodes[chain[i]].position, cfg.step_size);
  const Vec3 last = path.waypoints.back();
  if ((goal2 - last).norm() > 1e-9 && segment_free(grid, slice_z, last, goal2))
    append_subdivided(&path.waypoints, goal2, cfg.step_size);
  path.total_length = path_length(path.waypoints);
  return path;
}

}  // namespace grounding
