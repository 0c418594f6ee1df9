#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "grounding/kernels.hpp"
#include "grounding/planner.hpp"
#include "grounding/resolver.hpp"

namespace grounding {

struct GoalExtraction {
  enum class Mode { Argmax, TopK, Sample };
  Mode mode = Mode::Argmax;
  int k = 5;                 // alternatives reported alongside the goal
  double nms_radius = 0.5;   // meters
  int sample_count = 32;
  std::uint64_t sample_seed = 7;
};

struct VerifyConfig {
  int retry_limit = 2;
  double free_mass_threshold = 0.5;   // check 2: tau_free
  double sigma_relax = 1.5;           // per retry, metric tolerance multiplier
  double concentration_relax = 0.5;   // per retry, directional concentration multiplier
};

struct SimilarityConfig {
  enum class Kind { Exact, Table };
  Kind kind = Kind::Exact;
  std::filesystem::path table_path;  // resolved relative to the config file
};

struct BenchConfig {
  double where_success_radius = 1.0;  // meters, TSR threshold for Where queries
  bool top2 = false;                  // accept gt label within top-2 ranked objects
  std::vector<std::pair<std::string, std::string>> label_synonyms;
};

struct PipelineConfig {
  ResolverWeights resolver;
  SimilarityConfig similarity;
  KernelParams kernels;
  GoalExtraction goal;
  PlannerConfig planner;
  bool planner_enabled = true;
  VerifyConfig verify;
  BenchConfig bench;

  /// Makes every seeded component use `seed` (CLI --seed override).
  void override_seed(std::uint64_t seed);

  static PipelineConfig defaults() { return PipelineConfig{}; }

  /// Unknown keys are rejected; missing keys keep their defaults.
  static PipelineConfig from_json(const nlohmann::ordered_json& j,
                                  const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

/// Builds the similarity provider the config names (exact match or table).
std::unique_ptr<SimilarityProvider> make_provider(const PipelineConfig& config);

}  // namespace grounding
