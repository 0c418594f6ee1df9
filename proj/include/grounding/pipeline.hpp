#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "grounding/config.hpp"
#include "grounding/density.hpp"
#include "grounding/kernels.hpp"
#include "grounding/parser.hpp"
#include "grounding/planner.hpp"
#include "grounding/resolver.hpp"
#include "grounding/scene.hpp"

namespace grounding {

enum class Stage { Parse, Resolve, Kernelize, Compose, Verify, Select, Plan };
const char* stage_name(Stage stage);

/// Working memory threaded through the grounding stages. Every stage reads
/// the ledger it was given and returns an extended copy; runs own their
/// ledgers exclusively and share only the immutable scene snapshot.
struct Ledger {
  std::shared_ptr<const Scene> scene;
  ObserverPose observer;
  SdcQuery query;
  std::map<int, Belief> beliefs;            // clause index -> anchor belief
  std::map<int, Belief> secondary_beliefs;  // Between only: second anchor
  std::map<int, KernelSet> kernels;
  std::optional<DensityGrid> density;       // composed + normalized
  int attempts = 0;                         // relaxation retries so far
};

struct VerifierCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifierReport {
  std::vector<VerifierCheck> checks;
  bool overall = false;  // conjunction of checks
};

struct WhereResult {
  GoalSample goal;
  std::vector<GoalSample> alternatives;  // further top-k picks, best first
  OffsetAngles angles;                   // bearing from the first clause's anchor
  std::optional<Path> path;              // absent when planning is off or fails
};

struct WhichResult {
  std::vector<std::pair<std::string, double>> ranked;  // (object id, log density)
};

struct FailedResult {
  Stage stage = Stage::Parse;
  std::string reason;
};

using GroundingOutcome = std::variant<WhereResult, WhichResult, FailedResult>;

struct GroundingRun {
  GroundingOutcome outcome;
  Ledger ledger;
  VerifierReport verification;  // last verifier report, if that stage ran
};

/// Committed anchor id of a clause (recomputed from the stored belief).
std::optional<std::string> committed_anchor(const Ledger& ledger, int clause_index,
                                            const PipelineConfig& config,
                                            bool secondary = false);

/// Mass that the *unmasked* normalized composition places on free cells.
/// This is the verifier's check-2 statistic: when most of the field's mass
/// falls inside obstacles, the grounded region contradicts the map.
double free_mass_fraction(const Ledger& ledger);

/// Runs the verifier checks against a composed ledger.
VerifierReport verify(const Ledger& ledger, const PipelineConfig& config);

/// One relaxation step: every metric tolerance scaled by sigma_relax, every
/// directional concentration by concentration_relax, density recomposed,
/// attempts incremented. Throws PipelineError(RetryLimitExceeded) at the
/// retry limit.
Ledger retry_relax(const Ledger& ledger, const PipelineConfig& config);

/// New scene snapshot including `node`, with all beliefs recomputed and
/// stale kernels/density dropped. Throws PipelineError(DuplicateId).
Ledger insert_node(const Ledger& ledger, const ObjectNode& node, const PipelineConfig& config,
                   const SimilarityProvider* provider = nullptr);

/// End-to-end grounding: parse -> resolve -> kernelize -> compose ->
/// verify (with retries) -> goal selection / candidate ranking.
/// Stage errors become Failed outcomes; the process never aborts.
/// `provider` overrides the config-built similarity provider (for tests).
GroundingRun ground_run(const std::string& text, std::shared_ptr<const Scene> scene,
                        const ObserverPose& observer, const PipelineConfig& config,
                        const SimilarityProvider* provider = nullptr);

GroundingOutcome ground(const std::string& text, std::shared_ptr<const Scene> scene,
                        const ObserverPose& observer, const PipelineConfig& config);

}  // namespace grounding
