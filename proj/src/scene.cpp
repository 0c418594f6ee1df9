#include "grounding/scene.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "grounding/errors.hpp"

namespace grounding {

namespace {

using json = nlohmann::ordered_json;

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Vec3 vec3_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw SceneError(where + ": expected an array of 3 numbers");
  for (const auto& v : j)
    if (!v.is_number()) throw SceneError(where + ": expected an array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Mat3 mat3_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 9)
    throw SceneError(where + ": expected a row-major array of 9 numbers");
  Mat3 m;
  for (int i = 0; i < 9; ++i) {
    if (!j[i].is_number()) throw SceneError(where + ": expected a row-major array of 9 numbers");
    m(i / 3, i % 3) = j[i].get<double>();
  }
  return m;
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json mat3_to_json(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

int line_of_byte(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace

void SceneGraph::add_node(const ObjectNode& node) {
  if (node.id.empty()) throw SceneError("object id must be nonempty");
  if (index_.count(node.id))
    throw SceneError("duplicate object id '" + node.id + "'");
  if (node.label.empty())
    throw SceneError("object '" + node.id + "': label must be nonempty");
  if (node.detection_confidence < 0.0 || node.detection_confidence > 1.0)
    throw SceneError("object '" + node.id + "': confidence must be in [0, 1]");
  if ((node.box.half_extents.array() <= 0.0).any())
    throw SceneError("object '" + node.id + "': half_extents must be strictly positive");
  if (!is_rotation(node.pose.rotation))
    throw SceneError("object '" + node.id +
                     "': rotation is not orthonormal with determinant +1 (tol 1e-6)");
  if (!node.pose.known_orientation &&
      (node.pose.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw SceneError("object '" + node.id +
                     "': rotation must be identity when known_orientation is false");
  index_.emplace(node.id, nodes_.size());
  ObjectNode stored = node;
  stored.label = lowercase(stored.label);
  nodes_.push_back(std::move(stored));
}

void SceneGraph::add_edge(const RelationEdge& edge) {
  if (!index_.count(edge.source) || !index_.count(edge.target))
    throw SceneError("edge '" + edge.source + "' -> '" + edge.target +
                     "' references a missing node id");
  edges_.push_back(edge);
}

const ObjectNode* SceneGraph::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

std::optional<std::array<int, 3>> GridGeometry::cell_of(const Vec3& p) const {
  const Vec3 rel = (p - origin) / resolution;
  const int ix = static_cast<int>(std::floor(rel.x()));
  const int iy = static_cast<int>(std::floor(rel.y()));
  const int iz = static_cast<int>(std::floor(rel.z()));
  if (!in_bounds(ix, iy, iz)) return std::nullopt;
  return std::array<int, 3>{ix, iy, iz};
}

void GridGeometry::validate() const {
  if (resolution <= 0.0) throw SceneError("grid: resolution must be > 0");
  if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
    throw SceneError("grid: dims must each be >= 1");
}

bool GridGeometry::operator==(const GridGeometry& other) const {
  return origin == other.origin && resolution == other.resolution && dims == other.dims;
}

OccupancyGrid::OccupancyGrid(const GridGeometry& geom) : geom_(geom) {
  geom_.validate();
  cells_.resize(geom_.size(), CellState::Free);
}

std::vector<std::uint8_t> free_mask(const OccupancyGrid& grid) {
  std::vector<std::uint8_t> mask(grid.cells().size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = grid.cells()[i] == CellState::Free ? 1 : 0;
  return mask;
}

Vec3 ObserverPose::facing() const {
  const double yaw = deg_to_rad(yaw_deg);
  const double pitch = deg_to_rad(pitch_deg);
  return Vec3(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw),
              std::sin(pitch));
}

Vec3 local_dir_to_world(const Pose& pose, const Vec3& local_dir) {
  if (std::abs(local_dir.norm() - 1.0) > 1e-9)
    throw SceneError("local_dir_to_world: direction must be unit length");
  return pose.rotation * local_dir;
}

Scene scene_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw SceneError("scene: top level must be a JSON object");
  if (!j.contains("objects") || !j["objects"].is_array())
    throw SceneError("scene: missing 'objects' array");
  if (!j.contains("grid") || !j["grid"].is_object())
    throw SceneError("scene: missing 'grid' object");

  Scene scene;
  for (std::size_t i = 0; i < j["objects"].size(); ++i) {
    const json& o = j["objects"][i];
    const std::string where = "objects[" + std::to_string(i) + "]";
    if (!o.is_object()) throw SceneError(where + ": expected an object");
    for (const char* field : {"id", "label", "position", "rotation", "known_orientation",
                              "half_extents", "confidence"})
      if (!o.contains(field)) throw SceneError(where + ": missing field '" + field + "'");

    ObjectNode node;
    node.id = o["id"].get<std::string>();
    node.label = o["label"].get<std::string>();
    node.pose.position = vec3_from_json(o["position"], where + ".position");
    node.pose.rotation = mat3_from_json(o["rotation"], where + ".rotation");
    node.pose.known_orientation = o["known_orientation"].get<bool>();
    node.box.half_extents = vec3_from_json(o["half_extents"], where + ".half_extents");
    node.detection_confidence = o["confidence"].get<double>();
    node.box.center = node.pose.position;
    node.box.rotation = node.pose.rotation;
    scene.graph.add_node(node);
  }

  const json& g = j["grid"];
  for (const char* field : {"origin", "resolution", "dims"})
    if (!g.contains(field))
      throw SceneError(std::string("grid: missing field '") + field + "'");
  GridGeometry geom;
  geom.origin = vec3_from_json(g["origin"], "grid.origin");
  geom.resolution = g["resolution"].get<double>();
  const json& dims = g["dims"];
  if (!dims.is_array() || dims.size() != 3)
    throw SceneError("grid.dims: expected an array of 3 integers");
  for (int k = 0; k < 3; ++k) {
    if (!dims[k].is_number_integer() && !dims[k].is_number_unsigned())
      throw SceneError("grid.dims: expected an array of 3 integers");
    geom.dims[k] = dims[k].get<int>();
  }
  geom.validate();

  OccupancyGrid grid(geom);
  auto apply_cells = [&](const char* key, CellState s) {
    if (!g.contains(key)) return;
    if (!g[key].is_array()) throw SceneError(std::string("grid.") + key + ": expected an array");
    for (const auto& v : g[key]) {
      if (!v.is_number_integer() && !v.is_number_unsigned())
        throw SceneError(std::string("grid.") + key + ": indices must be integers");
      const auto raw = v.get<long long>();
      if (raw < 0 || static_cast<std::size_t>(raw) >= geom.size())
        throw SceneError(std::string("grid.") + key + ": index " + std::to_string(raw) +
                         " out of range [0, " + std::to_string(geom.size()) + ")");
      const auto idx = static_cast<std::size_t>(raw);
      if (grid.state(idx) != CellState::Free && grid.state(idx) != s)
        throw SceneError("grid: cell " + std::to_string(idx) +
                         " listed as both occupied and unknown");
      grid.set_state(idx, s);
    }
  };
  apply_cells("occupied", CellState::Occupied);
  apply_cells("unknown", CellState::Unknown);
  scene.grid = std::move(grid);

  if (j.contains("edges")) {
    if (!j["edges"].is_array()) throw SceneError("scene: 'edges' must be an array");
    for (const auto& e : j["edges"]) {
      for (const char* field : {"source", "target", "relation"})
        if (!e.contains(field)) throw SceneError("edges: missing field '" + std::string(field) + "'");
      scene.graph.add_edge({e["source"].get<std::string>(), e["target"].get<std::string>(),
                            e["relation"].get<std::string>()});
    }
  }

  return scene;
}

nlohmann::ordered_json scene_to_json(const Scene& scene) {
  json j;
  j["objects"] = json::array();
  for (const ObjectNode& n : scene.graph.nodes()) {
    json o;
    o["id"] = n.id;
    o["label"] = n.label;
    o["position"] = vec3_to_json(n.pose.position);
    o["rotation"] = mat3_to_json(n.pose.rotation);
    o["known_orientation"] = n.pose.known_orientation;
    o["half_extents"] = vec3_to_json(n.box.half_extents);
    o["confidence"] = n.detection_confidence;
    j["objects"].push_back(std::move(o));
  }

  const GridGeometry& geom = scene.grid.geometry();
  json g;
  g["origin"] = vec3_to_json(geom.origin);
  g["resolution"] = geom.resolution;
  g["dims"] = json::array({geom.dims[0], geom.dims[1], geom.dims[2]});
  json occupied = json::array();
  json unknown = json::array();
  for (std::size_t i = 0; i < scene.grid.cells().size(); ++i) {
    if (scene.grid.cells()[i] == CellState::Occupied) occupied.push_back(i);
    if (scene.grid.cells()[i] == CellState::Unknown) unknown.push_back(i);
  }
  g["occupied"] = std::move(occupied);
  g["unknown"] = std::move(unknown);
  j["grid"] = std::move(g);

  if (!scene.graph.edges().empty()) {
    json edges = json::array();
    for (const RelationEdge& e : scene.graph.edges())
      edges.push_back(json{{"source", e.source}, {"target", e.target}, {"relation", e.relation}});
    j["edges"] = std::move(edges);
  }
  return j;
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SceneError("cannot open scene file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SceneError(path.filename().string() + ": JSON syntax error at line " +
                     std::to_string(line_of_byte(text, e.byte)) + ": " + e.what());
  }
  try {
    return scene_from_json(j);
  } catch (const SceneError& e) {
    throw SceneError(path.filename().string() + ": " + e.what());
  }
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw SceneError("cannot write scene file: " + path.string());
  out << scene_to_json(scene).dump(2) << "\n";
}

}  // namespace grounding
