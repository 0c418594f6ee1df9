#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "grounding/errors.hpp"
#include "grounding/scene.hpp"

using namespace grounding;
using nlohmann::ordered_json;

namespace {

std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(FIXTURE_DIR) / name;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

ordered_json minimal_scene_json() {
  return ordered_json{
      {"objects",
       {{{"id", "box_0"},
         {"label", "Box"},
         {"position", {1.0, 2.0, 0.5}},
         {"rotation", {1, 0, 0, 0, 1, 0, 0, 0, 1}},
         {"known_orientation", true},
         {"half_extents", {0.2, 0.3, 0.5}},
         {"confidence", 0.9}}}},
      {"grid",
       {{"origin", {0.0, 0.0, 0.0}},
        {"resolution", 0.5},
        {"dims", {4, 3, 2}},
        {"occupied", {0, 5}},
        {"unknown", {7}}}},
  };
}

}  // namespace

TEST_CASE("grid geometry flat index and unflatten are inverses") {
  GridGeometry g;
  g.origin = Vec3(1.0, -2.0, 0.5);
  g.resolution = 0.25;
  g.dims = {7, 5, 3};
  CHECK(g.size() == 105);
  std::size_t expected = 0;
  for (int iz = 0; iz < 3; ++iz) {
    for (int iy = 0; iy < 5; ++iy) {
      for (int ix = 0; ix < 7; ++ix) {
        const std::size_t f = g.flat_index(ix, iy, iz);
        CHECK(f == expected);
        const auto back = g.unflatten(f);
        CHECK(back[0] == ix);
        CHECK(back[1] == iy);
        CHECK(back[2] == iz);
        ++expected;
      }
    }
  }
}

TEST_CASE("grid cell centers and point lookup agree") {
  GridGeometry g;
  g.origin = Vec3(1.0, -2.0, 0.5);
  g.resolution = 0.25;
  g.dims = {7, 5, 3};

  const Vec3 c = g.cell_center(2, 4, 1);
  CHECK(c.x() == doctest::Approx(1.0 + 0.25 * 2.5).epsilon(1e-12));
  CHECK(c.y() == doctest::Approx(-2.0 + 0.25 * 4.5).epsilon(1e-12));
  CHECK(c.z() == doctest::Approx(0.5 + 0.25 * 1.5).epsilon(1e-12));

  for (std::size_t idx : {std::size_t{0}, std::size_t{17}, std::size_t{104}}) {
    const auto cell = g.cell_of(g.cell_center(idx));
    REQUIRE(cell.has_value());
    const auto want = g.unflatten(idx);
    CHECK((*cell)[0] == want[0]);
    CHECK((*cell)[1] == want[1]);
    CHECK((*cell)[2] == want[2]);
  }

  // cells are half-open: the low corner belongs to the cell, the high corner
  // to its neighbor
  const auto low = g.cell_of(Vec3(1.0, -2.0, 0.5));
  REQUIRE(low.has_value());
  CHECK((*low)[0] == 0);
  CHECK(!g.cell_of(Vec3(0.99, -2.0, 0.5)).has_value());
  CHECK(!g.cell_of(Vec3(1.0 + 0.25 * 7, -2.0, 0.5)).has_value());

  CHECK(g.in_bounds(0, 0, 0));
  CHECK(g.in_bounds(6, 4, 2));
  CHECK(!g.in_bounds(7, 0, 0));
  CHECK(!g.in_bounds(0, -1, 0));
}

TEST_CASE("grid geometry validation rejects degenerate lattices") {
  GridGeometry g;
  g.resolution = 0.0;
  CHECK_THROWS_AS(g.validate(), SceneError);
  g.resolution = 0.1;
  g.dims = {0, 1, 1};
  CHECK_THROWS_AS(g.validate(), SceneError);
  g.dims = {1, 1, 1};
  CHECK_NOTHROW(g.validate());
}

TEST_CASE("scene json round trips objects, grid states, and edges") {
  auto j = minimal_scene_json();
  j["edges"] = ordered_json::array(
      {{{"source", "box_0"}, {"target", "box_0"}, {"relation", "on"}}});
  const Scene scene = scene_from_json(j);

  REQUIRE(scene.graph.size() == 1);
  const ObjectNode* box = scene.graph.find("box_0");
  REQUIRE(box != nullptr);
  CHECK(box->label == "box");  // labels are lowercased on load
  CHECK(box->pose.position.isApprox(Vec3(1.0, 2.0, 0.5)));
  CHECK(box->box.center.isApprox(box->pose.position));
  CHECK(box->box.half_extents.isApprox(Vec3(0.2, 0.3, 0.5)));
  CHECK(box->detection_confidence == doctest::Approx(0.9));

  CHECK(scene.grid.geometry().dims == std::array<int, 3>{4, 3, 2});
  CHECK(scene.grid.state(std::size_t{0}) == CellState::Occupied);
  CHECK(scene.grid.state(std::size_t{5}) == CellState::Occupied);
  CHECK(scene.grid.state(std::size_t{7}) == CellState::Unknown);
  CHECK(scene.grid.state(std::size_t{1}) == CellState::Free);

  REQUIRE(scene.graph.edges().size() == 1);
  CHECK(scene.graph.edges()[0].relation == "on");

  const ordered_json back = scene_to_json(scene);
  const Scene again = scene_from_json(back);
  CHECK(again.graph.size() == scene.graph.size());
  CHECK(again.graph.edges().size() == 1);
  CHECK(again.grid.geometry() == scene.grid.geometry());
  CHECK(again.grid.cells() == scene.grid.cells());
}

TEST_CASE("kitchen fixture loads with expected structure") {
  const Scene scene = load_scene(fixture("kitchen.json"));
  CHECK(scene.graph.size() == 9);
  const ObjectNode* fridge = scene.graph.find("fridge_0");
  REQUIRE(fridge != nullptr);
  CHECK(fridge->pose.position.isApprox(Vec3(2.05, 4.05, 0.85)));

  const auto& g = scene.grid.geometry();
  CHECK(g.dims == std::array<int, 3>{80, 80, 20});
  CHECK(g.resolution == doctest::Approx(0.1));

  // fridge interior is occupied, the goal region to its right is free
  CHECK(scene.grid.state(g.flat_index(20, 40, 8)) == CellState::Occupied);
  CHECK(scene.grid.state(g.flat_index(20, 20, 8)) == CellState::Free);

  std::size_t occupied = 0;
  for (CellState s : scene.grid.cells())
    if (s == CellState::Occupied) ++occupied;
  CHECK(occupied == 3661);
}

TEST_CASE("save and reload preserve a scene byte-for-byte semantically") {
  const Scene scene = load_scene(fixture("kitchen.json"));
  const auto path = temp_file("scene_roundtrip.json");
  save_scene(scene, path);
  const Scene again = load_scene(path);
  REQUIRE(again.graph.size() == scene.graph.size());
  for (std::size_t i = 0; i < scene.graph.size(); ++i) {
    const auto& a = scene.graph.nodes()[i];
    const auto& b = again.graph.nodes()[i];
    CHECK(a.id == b.id);
    CHECK(a.label == b.label);
    CHECK(a.pose.position.isApprox(b.pose.position));
    CHECK(a.box.half_extents.isApprox(b.box.half_extents));
  }
  CHECK(again.grid.cells() == scene.grid.cells());
  std::filesystem::remove(path);
}

TEST_CASE("schema violations are rejected with the offending context") {
  SUBCASE("duplicate object id") {
    auto j = minimal_scene_json();
    j["objects"].push_back(j["objects"][0]);
    CHECK_THROWS_WITH_AS(scene_from_json(j), doctest::Contains("duplicate object id"),
                         SceneError);
  }
  SUBCASE("missing required field") {
    auto j = minimal_scene_json();
    j["objects"][0].erase("position");
    CHECK_THROWS_WITH_AS(scene_from_json(j), doctest::Contains("missing field 'position'"),
                         SceneError);
  }
  SUBCASE("rotation must be orthonormal") {
    auto j = minimal_scene_json();
    j["objects"][0]["rotation"] = {2, 0, 0, 0, 1, 0, 0, 0, 1};
    CHECK_THROWS_WITH_AS(scene_from_json(j), doctest::Contains("orthonormal"), SceneError);
  }
  SUBCASE("unknown orientation forces the identity rotation") {
    auto j = minimal_scene_json();
    j["objects"][0]["known_orientation"] = false;
    j["objects"][0]["rotation"] = {0, -1, 0, 1, 0, 0, 0, 0, 1};
    CHECK_THROWS_WITH_AS(scene_from_json(j),
                         doctest::Contains("known_orientation"), SceneError);
  }
  SUBCASE("confidence outside [0, 1]") {
    auto j = minimal_scene_json();
    j["objects"][0]["confidence"] = 1.5;
    CHECK_THROWS_WITH_AS(scene_from_json(j), doctest::Contains("confidence"), SceneError);
  }
  SUBCASE("half extents must be positive") {
    auto j = minimal_scene_json();
    j["objects"][0]["half_extents"] = {0.0, 0.3, 0.5};
    CHECK_THROWS_WITH_AS(scene_from_json(j), doctest::Contains("half_extents"), SceneError);
  }
  SUBCASE("occupied index out of range") {
    auto j = minimal_scene_json();
    j["grid"]["occupied"].push_back(24);  // grid has 4*3*2 = 24 cells
    CHECK_THROWS_WITH_AS(scene_from_json(j), doctest::Contains("out of range"), SceneError);
  }
  SUBCASE("a cell cannot be both occupied and unknown") {
    auto j = minimal_scene_json();
    j["grid"]["unknown"].push_back(5);  // 5 is already occupied
    CHECK_THROWS_WITH_AS(scene_from_json(j),
                         doctest::Contains("both occupied and unknown"), SceneError);
  }
  SUBCASE("nonpositive resolution") {
    auto j = minimal_scene_json();
    j["grid"]["resolution"] = -0.1;
    CHECK_THROWS_WITH_AS(scene_from_json(j), doctest::Contains("resolution"), SceneError);
  }
  SUBCASE("edges must reference existing nodes") {
    auto j = minimal_scene_json();
    j["edges"] = ordered_json::array(
        {{{"source", "box_0"}, {"target", "ghost_9"}, {"relation", "on"}}});
    CHECK_THROWS_WITH_AS(scene_from_json(j), doctest::Contains("missing node id"),
                         SceneError);
  }
}

TEST_CASE("json syntax errors report the line they occur on") {
  const auto path = temp_file("broken_scene.json");
  {
    std::ofstream out(path);
    out << "{\n  \"objects\": [],\n  \"grid\": {,}\n}\n";  // line 3 is broken
  }
  CHECK_THROWS_WITH_AS(load_scene(path), doctest::Contains("line 3"), SceneError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_scene(temp_file("does_not_exist.json")), SceneError);
}

TEST_CASE("free mask marks exactly the free cells") {
  auto j = minimal_scene_json();
  const Scene scene = scene_from_json(j);
  const auto mask = free_mask(scene.grid);
  REQUIRE(mask.size() == 24);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool occupied_or_unknown = (i == 0 || i == 5 || i == 7);
    CHECK(mask[i] == (occupied_or_unknown ? 0 : 1));
  }
}

TEST_CASE("observer facing covers yaw and pitch") {
  ObserverPose obs;
  CHECK(obs.facing().isApprox(Vec3(1, 0, 0), 1e-12));
  obs.yaw_deg = 90.0;
  CHECK(obs.facing().isApprox(Vec3(0, 1, 0), 1e-12));
  obs.yaw_deg = 180.0;
  CHECK(obs.facing().isApprox(Vec3(-1, 0, 0), 1e-12));
  obs.yaw_deg = 0.0;
  obs.pitch_deg = 90.0;
  CHECK(obs.facing().isApprox(Vec3(0, 0, 1), 1e-12));
  obs.yaw_deg = 90.0;
  obs.pitch_deg = 45.0;
  const double s = std::sqrt(0.5);
  CHECK(obs.facing().isApprox(Vec3(0, s, s), 1e-12));
}

TEST_CASE("local directions rotate into the world frame") {
  Pose pose;
  pose.rotation << 0, -1, 0, 1, 0, 0, 0, 0, 1;  // +90 degrees about z
  CHECK(local_dir_to_world(pose, Vec3(1, 0, 0)).isApprox(Vec3(0, 1, 0), 1e-12));
  CHECK(local_dir_to_world(pose, Vec3(0, -1, 0)).isApprox(Vec3(1, 0, 0), 1e-12));
  CHECK_THROWS_AS(local_dir_to_world(pose, Vec3(1, 1, 0)), SceneError);
}
