#include "grounding/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "grounding/bench.hpp"
#include "grounding/errors.hpp"
#include "grounding/pipeline.hpp"

namespace grounding {

namespace {

using json = nlohmann::ordered_json;

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  bool json_output = false;
};

PipelineConfig load_config(const GlobalFlags& flags) {
  PipelineConfig config =
      flags.config_path.empty() ? PipelineConfig::defaults() : PipelineConfig::load(flags.config_path);
  if (flags.seed) config.override_seed(*flags.seed);
  return config;
}

json clause_to_json(const SdcClause& clause) {
  json c;
  c["canonical"] = to_canonical(clause);
  c["predicate"] = predicate_name(clause.predicate);
  c["anchor"] = clause.anchor_text;
  if (clause.anchor_text_2) c["anchor_2"] = *clause.anchor_text_2;
  if (clause.metric) c["distance_m"] = clause.metric->distance_m;
  c["span"] = json::array({clause.span.begin, clause.span.end});
  return c;
}

json sample_to_json(const GoalSample& s) {
  return json{{"point", json::array({s.point.x(), s.point.y(), s.point.z()})},
              {"probability", s.weight},
              {"cell_index", s.cell_index}};
}

int cmd_parse(const std::string& text, const GlobalFlags& flags, std::ostream& out,
              std::ostream& err) {
  SdcQuery query;
  try {
    query = parse_query(text);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 2;
  }
  if (flags.json_output) {
    json j;
    j["kind"] = query.kind == QueryKind::Where ? "where" : "which";
    j["clauses"] = json::array();
    for (const SdcClause& c : query.clauses) j["clauses"].push_back(clause_to_json(c));
    out << j.dump(2) << "\n";
  } else {
    for (const SdcClause& c : query.clauses) out << to_canonical(c) << "\n";
  }
  return 0;
}

void write_path_file(const Path& path, const std::string& file) {
  json j;
  j["waypoints"] = json::array();
  for (const Vec3& w : path.waypoints)
    j["waypoints"].push_back(json::array({w.x(), w.y(), w.z()}));
  j["total_length"] = path.total_length;
  std::ofstream out(file);
  if (!out) throw Error("cannot write path file: " + file);
  out << j.dump(2) << "\n";
}

int cmd_ground(const std::string& scene_path, const std::string& text,
               const ObserverPose& observer, const GlobalFlags& flags,
               const std::string& emit_path, const std::string& emit_density,
               std::ostream& out, std::ostream& err) {
  const PipelineConfig config = load_config(flags);
  const auto scene = std::make_shared<const Scene>(load_scene(scene_path));
  const GroundingRun run = ground_run(text, scene, observer, config);

  if (flags.verbose) {
    for (const VerifierCheck& c : run.verification.checks)
      err << "verify " << c.name << ": " << (c.passed ? "pass" : "FAIL") << " (" << c.detail
          << ")\n";
  }

  if (!emit_density.empty() && run.ledger.density) {
    std::ofstream density_out(emit_density);
    if (!density_out) throw Error("cannot write density file: " + emit_density);
    export_density_csv(*run.ledger.density, density_out);
  }

  if (const auto* failed = std::get_if<FailedResult>(&run.outcome)) {
    if (flags.json_output) {
      json j;
      j["outcome"] = "failed";
      j["stage"] = stage_name(failed->stage);
      j["reason"] = failed->reason;
      out << j.dump(2) << "\n";
    } else {
      out << "failed at " << stage_name(failed->stage) << ": " << failed->reason << "\n";
    }
    return 1;
  }

  if (const auto* which = std::get_if<WhichResult>(&run.outcome)) {
    if (flags.json_output) {
      json j;
      j["outcome"] = "which";
      j["query"] = to_canonical(run.ledger.query);
      j["attempts"] = run.ledger.attempts;
      j["ranked"] = json::array();
      for (const auto& [id, score] : which->ranked)
        j["ranked"].push_back(json{{"id", id}, {"log_density", score}});
      out << j.dump(2) << "\n";
    } else {
      out << "query: " << to_canonical(run.ledger.query) << "\n";
      for (const auto& [id, score] : which->ranked)
        out << id << "  log-density " << score << "\n";
    }
    return 0;
  }

  const auto& where = std::get<WhereResult>(run.outcome);
  if (!emit_path.empty() && where.path) write_path_file(*where.path, emit_path);

  if (flags.json_output) {
    json j;
    j["outcome"] = "where";
    j["query"] = to_canonical(run.ledger.query);
    j["attempts"] = run.ledger.attempts;
    j["goal"] = sample_to_json(where.goal);
    j["angles"] = json{{"yaw_deg", where.angles.yaw_deg}, {"pitch_deg", where.angles.pitch_deg}};
    j["alternatives"] = json::array();
    for (const GoalSample& s : where.alternatives) j["alternatives"].push_back(sample_to_json(s));
    if (where.path) {
      j["path"] = json{{"waypoints", where.path->waypoints.size()},
                       {"total_length", where.path->total_length}};
    }
    out << j.dump(2) << "\n";
  } else {
    out << "query: " << to_canonical(run.ledger.query) << "\n";
    out << "goal: (" << where.goal.point.x() << ", " << where.goal.point.y() << ", "
        << where.goal.point.z() << ")  probability " << where.goal.weight << "\n";
    out << "angles: yaw " << where.angles.yaw_deg << " deg, pitch " << where.angles.pitch_deg
        << " deg\n";
    for (const GoalSample& s : where.alternatives)
      out << "alternative: (" << s.point.x() << ", " << s.point.y() << ", " << s.point.z()
          << ")  probability " << s.weight << "\n";
    if (where.path)
      out << "path: " << where.path->waypoints.size() << " waypoints, length "
          << where.path->total_length << " m\n";
    if (run.ledger.attempts > 0) out << "relaxation retries: " << run.ledger.attempts << "\n";
  }
  return 0;
}

int cmd_bench(const std::string& dataset, const std::string& out_file, const std::string& format,
              bool top2, const GlobalFlags& flags, std::ostream& out, std::ostream& err) {
  PipelineConfig config = load_config(flags);
  if (top2) config.bench.top2 = true;
  const MetricsReport report = run_bench(dataset, config);
  const ReportFormat fmt = format == "csv" ? ReportFormat::Csv : ReportFormat::Json;
  export_report(report, out_file, fmt);
  out << "wrote " << (fmt == ReportFormat::Csv ? "csv" : "json") << " report for " << report.n
      << " queries to " << out_file << "\n";
  if (report.dataset_error_count > 0) {
    err << report.dataset_error_count << " dataset record(s) failed validation\n";
    return 1;
  }
  return 0;
}

int cmd_render_density(const std::string& scene_path, const std::string& text,
                       const ObserverPose& observer, int slice_z, const std::string& out_file,
                       const std::string& csv_file, double threshold, const GlobalFlags& flags,
                       std::ostream& out, std::ostream& err) {
  const PipelineConfig config = load_config(flags);
  const auto scene = std::make_shared<const Scene>(load_scene(scene_path));
  const GroundingRun run = ground_run(text, scene, observer, config);
  if (!run.ledger.density) {
    const auto* failed = std::get_if<FailedResult>(&run.outcome);
    err << "no density composed"
        << (failed ? std::string(": failed at ") + stage_name(failed->stage) + ": " +
                         failed->reason
                   : std::string())
        << "\n";
    return 1;
  }
  {
    std::ofstream pgm(out_file);
    if (!pgm) throw Error("cannot write PGM file: " + out_file);
    export_slice_pgm(*run.ledger.density, slice_z, pgm);
  }
  if (!csv_file.empty()) {
    std::ofstream csv(csv_file);
    if (!csv) throw Error("cannot write CSV file: " + csv_file);
    export_density_csv(*run.ledger.density, csv, threshold);
  }
  out << "wrote slice " << slice_z << " heatmap to " << out_file << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"grounder: metric-semantic language grounding over 3D scene graphs"};
  app.name("grounder");
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "pipeline config JSON")->expected(1);
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "override every configured seed");
  app.add_flag("--verbose", flags.verbose, "diagnostics on the error stream");

  std::string parse_text;
  auto* parse_cmd = app.add_subcommand("parse", "parse a query into canonical clauses");
  parse_cmd->add_option("text", parse_text, "query text")->required();
  parse_cmd->add_flag("--json", flags.json_output, "JSON output");
  parse_cmd->fallthrough();

  std::string scene_path, query_text, emit_path, emit_density;
  std::vector<double> observer_xyz{0.0, 0.0, 0.0};
  double observer_yaw = 0.0, observer_pitch = 0.0;
  auto* ground_cmd = app.add_subcommand("ground", "ground a query against a scene");
  ground_cmd->add_option("--scene", scene_path, "scene JSON file")->required();
  ground_cmd->add_option("--query", query_text, "query text")->required();
  ground_cmd->add_option("--observer", observer_xyz, "observer position x y z")->expected(3);
  ground_cmd->add_option("--observer-yaw", observer_yaw, "observer yaw (degrees)");
  ground_cmd->add_option("--observer-pitch", observer_pitch, "observer pitch (degrees)");
  ground_cmd->add_option("--emit-path", emit_path, "write planned path JSON here");
  ground_cmd->add_option("--emit-density", emit_density, "write density CSV here");
  ground_cmd->add_flag("--json", flags.json_output, "JSON output");
  ground_cmd->fallthrough();

  std::string dataset_path, report_path, report_format = "json";
  bool top2 = false;
  auto* bench_cmd = app.add_subcommand("bench", "run a benchmark dataset");
  bench_cmd->add_option("--dataset", dataset_path, "JSONL dataset")->required();
  bench_cmd->add_option("--out", report_path, "report output file")->required();
  bench_cmd->add_option("--format", report_format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  bench_cmd->add_flag("--top2", top2, "accept the gt label within the top-2 ranked objects");
  bench_cmd->fallthrough();

  std::string rd_scene, rd_query, rd_out, rd_csv;
  std::vector<double> rd_observer{0.0, 0.0, 0.0};
  double rd_yaw = 0.0, rd_pitch = 0.0, rd_threshold = 0.0;
  int slice_z = 0;
  auto* render_cmd = app.add_subcommand("render-density", "emit a density slice heatmap (PGM)");
  render_cmd->add_option("--scene", rd_scene, "scene JSON file")->required();
  render_cmd->add_option("--query", rd_query, "query text")->required();
  render_cmd->add_option("--observer", rd_observer, "observer position x y z")->expected(3);
  render_cmd->add_option("--observer-yaw", rd_yaw, "observer yaw (degrees)");
  render_cmd->add_option("--observer-pitch", rd_pitch, "observer pitch (degrees)");
  render_cmd->add_option("--slice-z", slice_z, "z slice index")->required();
  render_cmd->add_option("--out", rd_out, "PGM output file")->required();
  render_cmd->add_option("--csv", rd_csv, "also write density CSV here");
  render_cmd->add_option("--threshold", rd_threshold, "CSV probability threshold");
  render_cmd->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    err << app.help();
    return 2;
  }
  if (seed_opt->count() > 0) flags.seed = seed_value;

  try {
    if (parse_cmd->parsed()) return cmd_parse(parse_text, flags, out, err);
    if (ground_cmd->parsed()) {
      ObserverPose observer;
      observer.position = Vec3(observer_xyz[0], observer_xyz[1], observer_xyz[2]);
      observer.yaw_deg = observer_yaw;
      observer.pitch_deg = observer_pitch;
      return cmd_ground(scene_path, query_text, observer, flags, emit_path, emit_density, out,
                        err);
    }
    if (bench_cmd->parsed())
      return cmd_bench(dataset_path, report_path, report_format, top2, flags, out, err);
    if (render_cmd->parsed()) {
      ObserverPose observer;
      observer.position = Vec3(rd_observer[0], rd_observer[1], rd_observer[2]);
      observer.yaw_deg = rd_yaw;
      observer.pitch_deg = rd_pitch;
      return cmd_render_density(rd_scene, rd_query, observer, slice_z, rd_out, rd_csv,
                                rd_threshold, flags, out, err);
    }
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace grounding
