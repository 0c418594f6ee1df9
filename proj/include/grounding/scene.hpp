#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "grounding/geometry.hpp"

namespace grounding {

struct Pose {
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  bool known_orientation = true;
};

/// Box centered at `center`, axes given by the columns of `rotation`,
/// half side lengths in `half_extents` (all strictly positive).
struct OrientedBox {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();
  Mat3 rotation = Mat3::Identity();
};

struct ObjectNode {
  std::string id;
  std::string label;  // lowercase, nonempty
  Pose pose;
  OrientedBox box;
  double detection_confidence = 1.0;  // in [0, 1]
};

/// Optional semantic relation between two nodes; carried through
/// serialization but not interpreted by the grounding pipeline.
struct RelationEdge {
  std::string source;
  std::string target;
  std::string relation;
};

class SceneGraph {
 public:
  SceneGraph() = default;

  /// Adds a node; throws SceneError on duplicate id or invalid fields.
  void add_node(const ObjectNode& node);
  void add_edge(const RelationEdge& edge);

  const std::vector<ObjectNode>& nodes() const { return nodes_; }
  const std::vector<RelationEdge>& edges() const { return edges_; }

  const ObjectNode* find(const std::string& id) const;
  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<ObjectNode> nodes_;
  std::vector<RelationEdge> edges_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class CellState : std::uint8_t { Free = 0, Occupied = 1, Unknown = 2 };

/// Axis-aligned voxel lattice: cell (ix,iy,iz) spans
/// origin + resolution * [ix, ix+1) x [iy, iy+1) x [iz, iz+1).
/// Flat index = ix + nx*(iy + ny*iz).
struct GridGeometry {
  Vec3 origin = Vec3::Zero();
  double resolution = 0.1;
  std::array<int, 3> dims = {1, 1, 1};

  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t flat_index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(iy) + static_cast<std::size_t>(dims[1]) * iz);
  }
  std::array<int, 3> unflatten(std::size_t idx) const {
    const int ix = static_cast<int>(idx % dims[0]);
    const int iy = static_cast<int>((idx / dims[0]) % dims[1]);
    const int iz = static_cast<int>(idx / (static_cast<std::size_t>(dims[0]) * dims[1]));
    return {ix, iy, iz};
  }
  Vec3 cell_center(int ix, int iy, int iz) const {
    return origin + resolution * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
  }
  Vec3 cell_center(std::size_t idx) const {
    const auto c = unflatten(idx);
    return cell_center(c[0], c[1], c[2]);
  }
  bool in_bounds(int ix, int iy, int iz) const {
    return ix >= 0 && ix < dims[0] && iy >= 0 && iy < dims[1] && iz >= 0 && iz < dims[2];
  }
  /// Cell containing a point, or nullopt outside the lattice.
  std::optional<std::array<int, 3>> cell_of(const Vec3& p) const;

  void validate() const;  // throws SceneError on nonpositive dims/resolution

  bool operator==(const GridGeometry& other) const;
};

class OccupancyGrid {
 public:
  OccupancyGrid() { cells_.resize(geom_.size(), CellState::Free); }
  explicit OccupancyGrid(const GridGeometry& geom);

  const GridGeometry& geometry() const { return geom_; }
  CellState state(int ix, int iy, int iz) const { return cells_[geom_.flat_index(ix, iy, iz)]; }
  CellState state(std::size_t idx) const { return cells_[idx]; }
  void set_state(int ix, int iy, int iz, CellState s) { cells_[geom_.flat_index(ix, iy, iz)] = s; }
  void set_state(std::size_t idx, CellState s) { cells_[idx] = s; }

  /// True only for Free cells; Unknown is conservatively non-free.
  bool is_free(std::size_t idx) const { return cells_[idx] == CellState::Free; }
  bool is_free(int ix, int iy, int iz) const { return state(ix, iy, iz) == CellState::Free; }

  const std::vector<CellState>& cells() const { return cells_; }

 private:
  GridGeometry geom_;
  std::vector<CellState> cells_;
};

/// One byte per cell, 1 iff the cell is Free.
std::vector<std::uint8_t> free_mask(const OccupancyGrid& grid);

struct ObserverPose {
  Vec3 position = Vec3::Zero();
  double yaw_deg = 0.0;    // heading about +Z, 0 = +X
  double pitch_deg = 0.0;  // elevation, positive up

  /// Unit vector the observer is facing.
  Vec3 facing() const;
};

struct Scene {
  SceneGraph graph;
  OccupancyGrid grid;
};

/// Rotates a unit direction from an object's local frame into the world
/// frame. Throws SceneError when `local_dir` is not unit length (1e-9).
Vec3 local_dir_to_world(const Pose& pose, const Vec3& local_dir);

Scene scene_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json scene_to_json(const Scene& scene);

/// Parses a scene file; JSON syntax errors are reported with the line
/// they occur on, schema errors with the offending object id/field.
Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, const std::filesystem::path& path);

}  // namespace grounding
