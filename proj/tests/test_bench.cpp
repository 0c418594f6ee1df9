#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grounding/bench.hpp"
#include "grounding/errors.hpp"

using namespace grounding;
using json = nlohmann::ordered_json;

namespace {

const std::string kFixtures = FIXTURE_DIR;

std::filesystem::path write_temp_dataset(const std::string& stem,
                                         const std::vector<std::string>& lines) {
  const auto path = std::filesystem::temp_directory_path() / (stem + ".jsonl");
  std::ofstream out(path);
  for (const std::string& line : lines) out << line << "\n";
  return path;
}

PipelineConfig no_planner_config() {
  PipelineConfig cfg;
  cfg.planner_enabled = false;
  return cfg;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("the bundled three-query dataset reproduces hand-computed metrics") {
  const MetricsReport report =
      run_bench(kFixtures + "/mini_dataset.jsonl", no_planner_config());

  REQUIRE(report.n == 3);
  CHECK(report.dataset_error_count == 0);
  CHECK(report.failure_tags.empty());
  REQUIRE(report.records.size() == 3);
  CHECK(report.records[0].id == "ow-exact");
  CHECK(report.records[1].id == "ow-wrap");
  CHECK(report.records[2].id == "which-near");

  const QueryRecord& exact = report.records[0];
  CHECK(exact.kind == "where");
  CHECK(!exact.failed);
  REQUIRE(exact.d_err_ow.has_value());
  CHECK(*exact.d_err_ow <= 1e-12);  // goal cell center equals the ground truth
  REQUIRE(exact.yaw_err_deg.has_value());
  CHECK(*exact.yaw_err_deg <= 1e-12);
  REQUIRE(exact.pitch_err_deg.has_value());
  CHECK(*exact.pitch_err_deg <= 1e-12);
  CHECK(exact.tsr_ok);
  REQUIRE(exact.anchor_pick_ok.has_value());
  CHECK(*exact.anchor_pick_ok);
  CHECK(!exact.traj_len.has_value());  // planning disabled
  REQUIRE(exact.goal_point.has_value());
  CHECK((*exact.goal_point - Vec3(3.05, 1.05, 0.45)).norm() <= 1e-9);

  const QueryRecord& wrap = report.records[1];
  REQUIRE(wrap.d_err_ow.has_value());
  CHECK(*wrap.d_err_ow == doctest::Approx(0.03490614199349597).epsilon(1e-12));
  REQUIRE(wrap.yaw_err_deg.has_value());
  CHECK(*wrap.yaw_err_deg == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(wrap.tsr_ok);

  const QueryRecord& which = report.records[2];
  CHECK(which.kind == "which");
  CHECK(!which.failed);
  REQUIRE(which.predicted_object.has_value());
  CHECK(*which.predicted_object == "box_0");
  REQUIRE(which.d_err_oo.has_value());
  CHECK(*which.d_err_oo == 0.0);
  REQUIRE(which.obj_sel_ok.has_value());
  CHECK(*which.obj_sel_ok);
  CHECK(which.tsr_ok);

  REQUIRE(report.d_err_ow_mean.has_value());
  CHECK(*report.d_err_ow_mean == doctest::Approx(0.017453070996748206).epsilon(1e-12));
  REQUIRE(report.yaw_err_mean_deg.has_value());
  CHECK(*report.yaw_err_mean_deg == doctest::Approx(0.5000000000000071).epsilon(1e-12));
  REQUIRE(report.yaw_err_median_deg.has_value());
  CHECK(*report.yaw_err_median_deg == doctest::Approx(0.5000000000000071).epsilon(1e-12));
  REQUIRE(report.pitch_err_mean_deg.has_value());
  CHECK(*report.pitch_err_mean_deg <= 1e-12);
  REQUIRE(report.d_err_oo_mean.has_value());
  CHECK(*report.d_err_oo_mean == 0.0);
  REQUIRE(report.obj_sel_acc.has_value());
  CHECK(*report.obj_sel_acc == 1.0);
  REQUIRE(report.anchor_pick_sr.has_value());
  CHECK(*report.anchor_pick_sr == 1.0);
  REQUIRE(report.tsr.has_value());
  CHECK(*report.tsr == 1.0);
  CHECK(!report.avg_traj_len.has_value());
}

TEST_CASE("two identical runs serialize to identical reports") {
  const PipelineConfig cfg = no_planner_config();
  const MetricsReport a = run_bench(kFixtures + "/mini_dataset.jsonl", cfg);
  const MetricsReport b = run_bench(kFixtures + "/mini_dataset.jsonl", cfg);
  CHECK(report_to_json(a).dump(2) == report_to_json(b).dump(2));
  CHECK(report_to_csv(a) == report_to_csv(b));
}

TEST_CASE("an effectively empty dataset yields an empty report") {
  const auto path = write_temp_dataset("grounding_bench_empty", {"", "   ", "\t"});
  const MetricsReport report = run_bench(path, no_planner_config());
  CHECK(report.n == 0);
  CHECK(report.records.empty());
  CHECK(!report.d_err_ow_mean.has_value());
  CHECK(!report.tsr.has_value());
  CHECK(!report.obj_sel_acc.has_value());
  CHECK(report.dataset_error_count == 0);
}

TEST_CASE("malformed dataset records are tagged and do not stop the run") {
  const std::string scene = kFixtures + "/mini_scene.json";
  const auto path = write_temp_dataset(
      "grounding_bench_bad",
      {
          "this is not json",
          R"({"id":"no-text","scene_path":")" + scene +
              R"(","kind":"where","gt_anchor_id":"box_0","observer":{"position":[0,0,0]}})",
          R"({"id":"bad-kind","scene_path":")" + scene +
              R"(","text":"Where is 1 meter behind the box?","kind":"sideways",)" +
              R"("gt_anchor_id":"box_0","observer":{"position":[0,0,0]}})",
          R"({"id":"mixed-gt","scene_path":")" + scene +
              R"(","text":"Where is 1 meter behind the box?","kind":"where",)" +
              R"("gt_point":[1,1,1],"gt_object_id":"box_0","gt_anchor_id":"box_0",)" +
              R"("observer":{"position":[0,0,0]}})",
          std::string(
              R"({"id":"no-scene","scene_path":"/nope/missing.json","text":"Where is 1 meter behind the box?",)") +
              R"("kind":"where","gt_point":[1,1,1],"gt_anchor_id":"box_0","observer":{"position":[0,0,0]}})",
          R"({"id":"bad-anchor","scene_path":")" + scene +
              R"(","text":"Where is 1 meter behind the box?","kind":"where",)" +
              R"("gt_point":[1,1,1],"gt_anchor_id":"nope_0","observer":{"position":[0,0,0]}})",
          R"({"id":"good","scene_path":")" + scene +
              R"(","text":"Which object is near the ball?","kind":"which",)" +
              R"("gt_object_id":"box_0","gt_anchor_id":"ball_0","observer":{"position":[0.55,0.55,0.45]}})",
      });

  const MetricsReport report = run_bench(path, no_planner_config());
  REQUIRE(report.n == 7);
  CHECK(report.dataset_error_count == 6);
  CHECK(report.failure_tags.at("dataset") == 6);
  int good = 0;
  for (const QueryRecord& r : report.records) {
    if (r.id == "good") {
      ++good;
      CHECK(!r.failed);
      CHECK(r.obj_sel_ok.has_value());
    } else {
      CHECK(r.failed);
      CHECK(r.failure_stage == "dataset");
      CHECK(!r.failure_reason.empty());
    }
  }
  CHECK(good == 1);
  // the unparseable line falls back to a line-number id
  bool line_id = false;
  for (const QueryRecord& r : report.records) line_id |= (r.id == "line-1");
  CHECK(line_id);

  CHECK_THROWS_AS(run_bench("/nonexistent/dataset.jsonl", no_planner_config()), BenchError);
}

TEST_CASE("pipeline failures carry their stage into the report tags") {
  const std::string scene = kFixtures + "/kitchen.json";
  const auto path = write_temp_dataset(
      "grounding_bench_stage",
      {
          R"({"id":"defer","scene_path":")" + scene +
              R"(","text":"Where is the spot near the zzz?","kind":"where",)" +
              R"("gt_point":[1,1,1],"gt_anchor_id":"sink_0","observer":{"position":[0.55,0.55,0.85]}})",
          R"({"id":"noparse","scene_path":")" + scene +
              R"(","text":"hello there","kind":"where",)" +
              R"("gt_point":[1,1,1],"gt_anchor_id":"sink_0","observer":{"position":[0.55,0.55,0.85]}})",
      });

  const MetricsReport report = run_bench(path, no_planner_config());
  REQUIRE(report.n == 2);
  CHECK(report.dataset_error_count == 0);
  CHECK(report.failure_tags.at("resolve") == 1);
  CHECK(report.failure_tags.at("parse") == 1);
  for (const QueryRecord& r : report.records) {
    CHECK(r.failed);
    CHECK(!r.tsr_ok);
    CHECK(!r.d_err_ow.has_value());
  }
  REQUIRE(report.tsr.has_value());
  CHECK(*report.tsr == 0.0);
  // the deferred run still reports the anchor pick as a miss
  const QueryRecord& defer = report.records[0];
  REQUIRE(defer.anchor_pick_ok.has_value());
  CHECK(!*defer.anchor_pick_ok);
}

TEST_CASE("label matching accepts normalized equality and listed synonyms") {
  const LabelMatcher matcher({{"sofa", "couch"}, {"refrigerator", "fridge"}});
  CHECK(matcher.match("couch", "couch"));
  CHECK(matcher.match("  Couch ", "couch"));
  CHECK(matcher.match("sofa", "couch"));
  CHECK(matcher.match("couch", "sofa"));  // symmetric
  CHECK(matcher.match("Refrigerator", "fridge"));
  CHECK(!matcher.match("sofa", "fridge"));
  CHECK(!matcher.match("table", "couch"));
}

TEST_CASE("top-2 acceptance rescues a near-miss ranking") {
  const std::string scene = kFixtures + "/kitchen.json";
  // the top-ranked object is the counter; the plate is ranked second
  const auto path = write_temp_dataset(
      "grounding_bench_top2",
      {R"({"id":"plate-gt","scene_path":")" + scene +
       R"(","text":"Which object is near the sink?","kind":"which",)" +
       R"("gt_object_id":"plate_0","gt_anchor_id":"sink_0","observer":{"position":[0.55,0.55,0.85]}})"});

  PipelineConfig strict = no_planner_config();
  const MetricsReport miss = run_bench(path, strict);
  REQUIRE(miss.n == 1);
  REQUIRE(miss.records[0].obj_sel_ok.has_value());
  CHECK(!*miss.records[0].obj_sel_ok);
  CHECK(*miss.records[0].predicted_object == "counter_0");
  CHECK(miss.records[0].d_err_oo.has_value());  // distance counter -> plate

  PipelineConfig lenient = no_planner_config();
  lenient.bench.top2 = true;
  const MetricsReport hit = run_bench(path, lenient);
  REQUIRE(hit.records[0].obj_sel_ok.has_value());
  CHECK(*hit.records[0].obj_sel_ok);
  CHECK(hit.records[0].tsr_ok);
}

TEST_CASE("csv export has one row per record plus a trailing aggregate row") {
  const MetricsReport report =
      run_bench(kFixtures + "/mini_dataset.jsonl", no_planner_config());
  const std::string csv = report_to_csv(report);

  std::istringstream in(csv);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 5);  // header + three records + aggregate
  CHECK(lines[0] ==
        "id,kind,failed,failure_stage,d_err_oo,d_err_ow,yaw_err_deg,pitch_err_deg,"
        "obj_sel_ok,anchor_pick_ok,tsr_ok,traj_len");
  CHECK(lines[1].rfind("ow-exact,where,0,", 0) == 0);
  CHECK(lines[4].rfind("AGGREGATE,", 0) == 0);
  // every row has the same number of columns
  for (const std::string& l : lines) {
    CHECK(std::count(l.begin(), l.end(), ',') == 11);
  }
}

TEST_CASE("json export mirrors the report and survives a round trip") {
  const MetricsReport report =
      run_bench(kFixtures + "/mini_dataset.jsonl", no_planner_config());
  const json j = report_to_json(report);

  CHECK(j["n"] == 3);
  CHECK(j["dataset_errors"] == 0);
  CHECK(j["aggregates"]["avg_traj_len"].is_null());
  CHECK(j["aggregates"]["d_err_ow_mean"].get<double>() ==
        doctest::Approx(0.017453070996748206).epsilon(1e-12));
  CHECK(j["aggregates"]["yaw_err_median_deg"].get<double>() ==
        doctest::Approx(0.5000000000000071).epsilon(1e-12));
  REQUIRE(j["records"].size() == 3);
  CHECK(j["records"][0]["id"] == "ow-exact");
  CHECK(j["records"][2]["predicted_object"] == "box_0");
  CHECK(json::parse(j.dump()) == j);  // stable serialization

  const auto json_path = std::filesystem::temp_directory_path() / "grounding_report.json";
  const auto csv_path = std::filesystem::temp_directory_path() / "grounding_report.csv";
  export_report(report, json_path, ReportFormat::Json);
  export_report(report, csv_path, ReportFormat::Csv);
  CHECK(json::parse(slurp(json_path)) == j);
  CHECK(slurp(csv_path) == report_to_csv(report));
  CHECK_THROWS_AS(export_report(report, "/nonexistent/dir/report.json", ReportFormat::Json),
                  BenchError);
}
