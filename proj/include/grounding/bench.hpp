#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "grounding/pipeline.hpp"

namespace grounding {

struct BenchQuery {
  std::string id;
  std::string scene_path;  // relative paths resolve against the dataset file
  std::string text;
  QueryKind kind = QueryKind::Where;
  std::optional<Vec3> gt_point;            // Where ground truth
  std::optional<std::string> gt_object_id; // Which ground truth
  std::string gt_anchor_id;
  ObserverPose observer;
};

/// Deterministic label acceptance: normalized equality or a listed synonym.
class LabelMatcher {
 public:
  explicit LabelMatcher(const std::vector<std::pair<std::string, std::string>>& synonyms);
  bool match(const std::string& predicted_label, const std::string& gt_label) const;

 private:
  std::set<std::pair<std::string, std::string>> synonyms_;
};

struct QueryRecord {
  std::string id;
  std::string kind;  // "where" | "which" | "" when the record never parsed
  bool failed = false;
  std::string failure_stage;  // pipeline stage, or "dataset" for bad records
  std::string failure_reason;

  std::optional<double> d_err_oo;       // meters, Which
  std::optional<double> d_err_ow;       // meters, Where
  std::optional<double> yaw_err_deg;    // [0, 180]
  std::optional<double> pitch_err_deg;
  std::optional<bool> obj_sel_ok;       // Which only
  std::optional<bool> anchor_pick_ok;
  bool tsr_ok = false;
  std::optional<double> traj_len;       // meters, when a path was planned

  std::optional<std::string> predicted_object;
  std::optional<Vec3> goal_point;
};

struct MetricsReport {
  std::vector<QueryRecord> records;  // sorted by query id
  int n = 0;

  std::optional<double> d_err_oo_mean;
  std::optional<double> d_err_ow_mean;
  std::optional<double> yaw_err_mean_deg;
  std::optional<double> yaw_err_median_deg;
  std::optional<double> pitch_err_mean_deg;
  std::optional<double> pitch_err_median_deg;
  std::optional<double> obj_sel_acc;
  std::optional<double> anchor_pick_sr;
  std::optional<double> tsr;
  std::optional<double> avg_traj_len;
  std::map<std::string, int> failure_tags;

  int dataset_error_count = 0;
};

/// Runs every dataset query through the pipeline and aggregates the metric
/// suite. Per-record validation problems (bad JSON, missing gt ids, broken
/// scene files) become failed records tagged "dataset"; only an unreadable
/// dataset file throws BenchError.
MetricsReport run_bench(const std::filesystem::path& dataset_path,
                        const PipelineConfig& config);

nlohmann::ordered_json report_to_json(const MetricsReport& report);
std::string report_to_csv(const MetricsReport& report);

enum class ReportFormat { Json, Csv };
void export_report(const MetricsReport& report, const std::filesystem::path& path,
                   ReportFormat format);

}  // namespace grounding
