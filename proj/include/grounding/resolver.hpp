#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "grounding/scene.hpp"

namespace grounding {

/// Pluggable label-affinity source (e.g. a precomputed embedding table).
/// Scores must be deterministic and land in [0, 1].
class SimilarityProvider {
 public:
  virtual ~SimilarityProvider() = default;
  virtual double score(const std::string& query_text, const std::string& label) const = 0;
};

/// 1.0 on normalized string equality, else 0.0.
class ExactMatchProvider : public SimilarityProvider {
 public:
  double score(const std::string& query_text, const std::string& label) const override;
};

/// Symmetric lookup table of (text, label) -> score pairs; identical
/// normalized strings score 1.0, unknown pairs 0.0.
class TableProvider : public SimilarityProvider {
 public:
  explicit TableProvider(
      const std::vector<std::tuple<std::string, std::string, double>>& pairs);
  static TableProvider from_file(const std::filesystem::path& path);

  double score(const std::string& query_text, const std::string& label) const override;

 private:
  std::map<std::pair<std::string, std::string>, double> table_;
};

struct ResolverWeights {
  double string_weight = 0.5;
  double provider_weight = 0.3;
  double salience_weight = 0.2;
  double salience_length_scale = 5.0;  // meters
  double commit_threshold = 0.4;

  /// Throws ResolveError unless weights are nonnegative and sum to 1 (1e-9).
  void validate() const;
};

/// Probability mass per object id; sums to 1 over the scene graph.
/// std::map keeps iteration (and ties) in deterministic id order.
struct Belief {
  std::map<std::string, double> mass;
};

struct CommitDecision {
  std::optional<std::string> id;  // nullopt = deferred
  double confidence = 0.0;        // belief mass of the winner

  bool committed() const { return id.has_value(); }
};

/// Lowercases, trims, and collapses runs of whitespace.
std::string normalize_text(const std::string& s);

/// Levenshtein distance between normalized strings.
std::size_t edit_distance(const std::string& a, const std::string& b);

/// max(token-set Jaccard, 1 - edit_distance / max_length), in [0, 1].
double string_similarity(const std::string& a, const std::string& b);

/// exp(-distance(observer, object) / length_scale), in (0, 1].
double proximity_salience(const ObserverPose& observer, const ObjectNode& node,
                          double length_scale);

/// Normalizes raw nonnegative scores into a Belief. All-zero scores fall
/// back to the uniform distribution; the result is invariant to positive
/// scaling of the raw scores.
Belief belief_from_scores(const std::map<std::string, double>& raw_scores);

/// Blends string similarity, provider score, and proximity salience per
/// node, then normalizes. Throws ResolveError on an empty graph.
Belief resolve_anchor(const std::string& anchor_text, const SceneGraph& graph,
                      const ObserverPose& observer, const SimilarityProvider& provider,
                      const ResolverWeights& weights);

/// Commits the argmax when its mass reaches the threshold, with ties broken
/// toward the lexicographically smallest id; otherwise defers.
CommitDecision decide_commit(const Belief& belief, double commit_threshold);

}  // namespace grounding
