#include "grounding/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "grounding/errors.hpp"

namespace grounding {

namespace {

using json = nlohmann::ordered_json;

Vec3 vec3_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw BenchError(where + ": expected an array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

BenchQuery query_from_json(const json& j, const std::filesystem::path& base_dir) {
  for (const char* field : {"id", "scene_path", "text", "kind", "gt_anchor_id", "observer"})
    if (!j.contains(field)) throw BenchError(std::string("missing field '") + field + "'");
  BenchQuery q;
  q.id = j["id"].get<std::string>();
  std::filesystem::path scene = j["scene_path"].get<std::string>();
  q.scene_path = (scene.is_absolute() ? scene : base_dir / scene).string();
  q.text = j["text"].get<std::string>();
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "where" || kind == "WhereQuery")
    q.kind = QueryKind::Where;
  else if (kind == "which" || kind == "WhichObjectQuery")
    q.kind = QueryKind::WhichObject;
  else
    throw BenchError("unknown kind '" + kind + "'");
  if (j.contains("gt_point")) q.gt_point = vec3_from_json(j["gt_point"], "gt_point");
  if (j.contains("gt_object_id")) q.gt_object_id = j["gt_object_id"].get<std::string>();
  if (q.kind == QueryKind::Where && (!q.gt_point || q.gt_object_id))
    throw BenchError("a 'where' query needs gt_point and no gt_object_id");
  if (q.kind == QueryKind::WhichObject && (!q.gt_object_id || q.gt_point))
    throw BenchError("a 'which' query needs gt_object_id and no gt_point");
  q.gt_anchor_id = j["gt_anchor_id"].get<std::string>();
  const json& obs = j["observer"];
  if (!obs.contains("position"))
    throw BenchError("observer: missing 'position'");
  q.observer.position = vec3_from_json(obs["position"], "observer.position");
  q.observer.yaw_deg = obs.value("yaw_deg", 0.0);
  q.observer.pitch_deg = obs.value("pitch_deg", 0.0);
  return q;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string csv_cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", *v);
  return buf;
}

std::string csv_cell(const std::optional<bool>& v) {
  if (!v) return "";
  return *v ? "1" : "0";
}

}  // namespace

LabelMatcher::LabelMatcher(const std::vector<std::pair<std::string, std::string>>& synonyms) {
  for (const auto& [a, b] : synonyms) {
    const std::string na = normalize_text(a), nb = normalize_text(b);
    synonyms_.insert({na, nb});
    synonyms_.insert({nb, na});
  }
}

bool LabelMatcher::match(const std::string& predicted_label, const std::string& gt_label) const {
  const std::string p = normalize_text(predicted_label);
  const std::string g = normalize_text(gt_label);
  return p == g || synonyms_.count({p, g}) > 0;
}

MetricsReport run_bench(const std::filesystem::path& dataset_path,
                        const PipelineConfig& config) {
  std::ifstream in(dataset_path);
  if (!in) throw BenchError("cannot open dataset: " + dataset_path.string());
  const std::filesystem::path base_dir = dataset_path.parent_path();

  const LabelMatcher matcher(config.bench.label_synonyms);
  std::map<std::string, std::shared_ptr<const Scene>> scene_cache;
  const auto load_cached = [&](const std::string& path) {
    auto it = scene_cache.find(path);
    if (it != scene_cache.end()) return it->second;
    auto scene = std::make_shared<const Scene>(load_scene(path));
    scene_cache.emplace(path, scene);
    return std::shared_ptr<const Scene>(scene);
  };

  MetricsReport report;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    QueryRecord record;
    record.id = "line-" + std::to_string(line_no);
    BenchQuery query;
    std::shared_ptr<const Scene> scene;
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw BenchError(std::string("bad JSON: ") + e.what());
      }
      if (j.contains("id") && j["id"].is_string()) record.id = j["id"].get<std::string>();
      query = query_from_json(j, base_dir);
      record.kind = query.kind == QueryKind::Where ? "where" : "which";
      scene = load_cached(query.scene_path);
      if (!scene->graph.find(query.gt_anchor_id))
        throw BenchError("gt_anchor_id '" + query.gt_anchor_id + "' not in scene");
      if (query.gt_object_id && !scene->graph.find(*query.gt_object_id))
        throw BenchError("gt_object_id '" + *query.gt_object_id + "' not in scene");
    } catch (const Error& e) {
      record.failed = true;
      record.failure_stage = "dataset";
      record.failure_reason = e.what();
      ++report.dataset_error_count;
      report.records.push_back(std::move(record));
      continue;
    }

    const GroundingRun run = ground_run(query.text, scene, query.observer, config);

    // The anchor pick compares the first clause's committed object against
    // the ground truth; a run that never committed counts as a miss.
    const auto first_commit =
        run.ledger.beliefs.empty()
            ? std::nullopt
            : committed_anchor(run.ledger, run.ledger.beliefs.begin()->first, config);
    record.anchor_pick_ok = first_commit && *first_commit == query.gt_anchor_id;

    if (const auto* failed = std::get_if<FailedResult>(&run.outcome)) {
      record.failed = true;
      record.failure_stage = stage_name(failed->stage);
      record.failure_reason = failed->reason;
      if (query.kind == QueryKind::WhichObject) record.obj_sel_ok = false;
      record.tsr_ok = false;
    } else if (query.kind == QueryKind::Where) {
      const auto& where = std::get<WhereResult>(run.outcome);
      record.goal_point = where.goal.point;
      record.d_err_ow = (where.goal.point - *query.gt_point).norm();
      const ObjectNode* anchor = scene->graph.find(query.gt_anchor_id);
      try {
        const OffsetAngles predicted = offset_angles(where.goal.point, anchor->pose.position);
        const OffsetAngles truth = offset_angles(*query.gt_point, anchor->pose.position);
        record.yaw_err_deg = angular_distance_deg(predicted.yaw_deg, truth.yaw_deg);
        record.pitch_err_deg = std::abs(predicted.pitch_deg - truth.pitch_deg);
      } catch (const DensityError&) {
        // gt or goal coincides with the anchor: bearing errors undefined
      }
      if (where.path) record.traj_len = where.path->total_length;
      record.tsr_ok = *record.d_err_ow <= config.bench.where_success_radius;
    } else {
      const auto& which = std::get<WhichResult>(run.outcome);
      const ObjectNode* gt_object = scene->graph.find(*query.gt_object_id);
      record.predicted_object = which.ranked.front().first;
      const ObjectNode* top1 = scene->graph.find(which.ranked.front().first);
      record.d_err_oo = (top1->pose.position - gt_object->pose.position).norm();
      bool accepted = matcher.match(top1->label, gt_object->label);
      if (!accepted && config.bench.top2 && which.ranked.size() > 1) {
        const ObjectNode* top2 = scene->graph.find(which.ranked[1].first);
        accepted = matcher.match(top2->label, gt_object->label);
      }
      record.obj_sel_ok = accepted;
      record.tsr_ok = accepted;
    }
    report.records.push_back(std::move(record));
  }

  std::sort(report.records.begin(), report.records.end(),
            [](const QueryRecord& a, const QueryRecord& b) { return a.id < b.id; });
  report.n = static_cast<int>(report.records.size());

  std::vector<double> oo, ow, yaw, pitch, traj;
  int obj_applicable = 0, obj_ok = 0;
  int anchor_applicable = 0, anchor_ok = 0;
  int tsr_ok_count = 0;
  for (const QueryRecord& r : report.records) {
    if (r.d_err_oo) oo.push_back(*r.d_err_oo);
    if (r.d_err_ow) ow.push_back(*r.d_err_ow);
    if (r.yaw_err_deg) yaw.push_back(*r.yaw_err_deg);
    if (r.pitch_err_deg) pitch.push_back(*r.pitch_err_deg);
    if (r.traj_len) traj.push_back(*r.traj_len);
    if (r.obj_sel_ok.has_value()) {
      ++obj_applicable;
      if (*r.obj_sel_ok) ++obj_ok;
    }
    if (r.anchor_pick_ok.has_value()) {
      ++anchor_applicable;
      if (*r.anchor_pick_ok) ++anchor_ok;
    }
    if (r.tsr_ok) ++tsr_ok_count;
    if (r.failed) ++report.failure_tags[r.failure_stage];
  }
  if (!oo.empty()) report.d_err_oo_mean = mean_of(oo);
  if (!ow.empty()) report.d_err_ow_mean = mean_of(ow);
  if (!yaw.empty()) {
    report.yaw_err_mean_deg = mean_of(yaw);
    report.yaw_err_median_deg = median_of(yaw);
  }
  if (!pitch.empty()) {
    report.pitch_err_mean_deg = mean_of(pitch);
    report.pitch_err_median_deg = median_of(pitch);
  }
  if (obj_applicable > 0)
    report.obj_sel_acc = static_cast<double>(obj_ok) / obj_applicable;
  if (anchor_applicable > 0)
    report.anchor_pick_sr = static_cast<double>(anchor_ok) / anchor_applicable;
  if (report.n > 0) report.tsr = static_cast<double>(tsr_ok_count) / report.n;
  if (!traj.empty()) report.avg_traj_len = mean_of(traj);
  return report;
}

nlohmann::ordered_json report_to_json(const MetricsReport& report) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  json j;
  j["n"] = report.n;
  j["dataset_errors"] = report.dataset_error_count;
  j["aggregates"] = {{"d_err_oo_mean", opt(report.d_err_oo_mean)},
                     {"d_err_ow_mean", opt(report.d_err_ow_mean)},
                     {"yaw_err_mean_deg", opt(report.yaw_err_mean_deg)},
                     {"yaw_err_median_deg", opt(report.yaw_err_median_deg)},
                     {"pitch_err_mean_deg", opt(report.pitch_err_mean_deg)},
                     {"pitch_err_median_deg", opt(report.pitch_err_median_deg)},
                     {"obj_sel_acc", opt(report.obj_sel_acc)},
                     {"anchor_pick_sr", opt(report.anchor_pick_sr)},
                     {"tsr", opt(report.tsr)},
                     {"avg_traj_len", opt(report.avg_traj_len)}};
  json tags = json::object();
  for (const auto& [stage, count] : report.failure_tags) tags[stage] = count;
  j["failure_tags"] = std::move(tags);
  json records = json::array();
  for (const QueryRecord& r : report.records) {
    json rec;
    rec["id"] = r.id;
    rec["kind"] = r.kind;
    rec["failed"] = r.failed;
    if (r.failed) {
      rec["failure_stage"] = r.failure_stage;
      rec["failure_reason"] = r.failure_reason;
    }
    if (r.d_err_oo) rec["d_err_oo"] = *r.d_err_oo;
    if (r.d_err_ow) rec["d_err_ow"] = *r.d_err_ow;
    if (r.yaw_err_deg) rec["yaw_err_deg"] = *r.yaw_err_deg;
    if (r.pitch_err_deg) rec["pitch_err_deg"] = *r.pitch_err_deg;
    if (r.obj_sel_ok.has_value()) rec["obj_sel_ok"] = *r.obj_sel_ok;
    if (r.anchor_pick_ok.has_value()) rec["anchor_pick_ok"] = *r.anchor_pick_ok;
    rec["tsr_ok"] = r.tsr_ok;
    if (r.traj_len) rec["traj_len"] = *r.traj_len;
    if (r.predicted_object) rec["predicted_object"] = *r.predicted_object;
    if (r.goal_point)
      rec["goal_point"] = json::array({r.goal_point->x(), r.goal_point->y(), r.goal_point->z()});
    records.push_back(std::move(rec));
  }
  j["records"] = std::move(records);
  return j;
}

std::string report_to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "id,kind,failed,failure_stage,d_err_oo,d_err_ow,yaw_err_deg,pitch_err_deg,"
         "obj_sel_ok,anchor_pick_ok,tsr_ok,traj_len\n";
  for (const QueryRecord& r : report.records) {
    out << r.id << ',' << r.kind << ',' << (r.failed ? "1" : "0") << ',' << r.failure_stage
        << ',' << csv_cell(r.d_err_oo) << ',' << csv_cell(r.d_err_ow) << ','
        << csv_cell(r.yaw_err_deg) << ',' << csv_cell(r.pitch_err_deg) << ','
        << csv_cell(r.obj_sel_ok) << ',' << csv_cell(r.anchor_pick_ok) << ','
        << (r.tsr_ok ? "1" : "0") << ',' << csv_cell(r.traj_len) << "\n";
  }
  out << "AGGREGATE,,," << ',' << csv_cell(report.d_err_oo_mean) << ','
      << csv_cell(report.d_err_ow_mean) << ',' << csv_cell(report.yaw_err_mean_deg) << ','
      << csv_cell(report.pitch_err_mean_deg) << ',' << csv_cell(report.obj_sel_acc) << ','
      << csv_cell(report.anchor_pick_sr) << ',' << csv_cell(report.tsr) << ','
      << csv_cell(report.avg_traj_len) << "\n";
  return out.str();
}

void export_report(const MetricsReport& report, const std::filesystem::path& path,
                   ReportFormat format) {
  std::ofstream out(path);
  if (!out) throw BenchError("cannot write report: " + path.string());
  if (format == ReportFormat::Json)
    out << report_to_json(report).dump(2) << "\n";
  else
    out << report_to_csv(report);
}

}  // namespace grounding
