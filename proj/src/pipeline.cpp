#include "grounding/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "grounding/errors.hpp"

namespace grounding {

namespace {

/// Separating-axis test between an oriented box and an axis-aligned cell.
/// Touching faces do not count as interior overlap.
bool obb_intersects_aabb(const OrientedBox& box, const Vec3& aabb_min, const Vec3& aabb_max) {
  const Vec3 aabb_center = 0.5 * (aabb_min + aabb_max);
  const Vec3 aabb_half = 0.5 * (aabb_max - aabb_min);
  const Vec3 t = box.center - aabb_center;

  std::vector<Vec3> axes;
  axes.reserve(15);
  for (int i = 0; i < 3; ++i) axes.push_back(Vec3::Unit(i));
  for (int i = 0; i < 3; ++i) axes.push_back(box.rotation.col(i));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const Vec3 cross = Vec3::Unit(i).cross(box.rotation.col(j));
      if (cross.norm() > 1e-9) axes.push_back(cross.normalized());
    }

  for (const Vec3& axis : axes) {
    const double dist = std::abs(t.dot(axis));
    double r_aabb = 0.0;
    for (int i = 0; i < 3; ++i) r_aabb += aabb_half[i] * std::abs(axis[i]);
    double r_box = 0.0;
    for (int i = 0; i < 3; ++i)
      r_box += box.half_extents[i] * std::abs(axis.dot(box.rotation.col(i)));
    if (dist >= r_aabb + r_box - 1e-12) return false;  // separated (or merely touching)
  }
  return true;
}

KernelSet all_kernels(const Ledger& ledger) {
  KernelSet set;
  for (const auto& [idx, k] : ledger.kernels) set.append(k);
  return set;
}

std::string format_double(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

DensityGrid compose_density(const Ledger& ledger) {
  const KernelSet set = all_kernels(ledger);
  return normalize(rasterize(set, ledger.scene->grid.geometry(), free_mask(ledger.scene->grid)));
}

}  // namespace

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::Parse: return "parse";
    case Stage::Resolve: return "resolve";
    case Stage::Kernelize: return "kernelize";
    case Stage::Compose: return "compose";
    case Stage::Verify: return "verify";
    case Stage::Select: return "select";
    case Stage::Plan: return "plan";
  }
  return "?";
}

std::optional<std::string> committed_anchor(const Ledger& ledger, int clause_index,
                                            const PipelineConfig& config, bool secondary) {
  const auto& source = secondary ? ledger.secondary_beliefs : ledger.beliefs;
  auto it = source.find(clause_index);
  if (it == source.end()) return std::nullopt;
  return decide_commit(it->second, config.resolver.commit_threshold).id;
}

double free_mass_fraction(const Ledger& ledger) {
  if (!ledger.scene) throw Error("free_mass_fraction: ledger has no scene");
  const KernelSet set = all_kernels(ledger);
  if (set.empty()) throw Error("free_mass_fraction: ledger has no kernels");
  const OccupancyGrid& grid = ledger.scene->grid;
  const std::vector<std::uint8_t> everywhere(grid.geometry().size(), 1);
  const DensityGrid unmasked = normalize(rasterize(set, grid.geometry(), everywhere));
  double fraction = 0.0;
  for (std::size_t i = 0; i < grid.cells().size(); ++i)
    if (grid.is_free(i)) fraction += unmasked.probability(i);
  return fraction;
}

VerifierReport verify(const Ledger& ledger, const PipelineConfig& config) {
  if (!ledger.density)
    throw Error("verify: ledger has no composed density");
  VerifierReport report;

  {  // Check 1: every clause's anchor belief committed.
    VerifierCheck check{"anchor_commit", true, ""};
    std::ostringstream detail;
    for (const auto& [idx, belief] : ledger.beliefs) {
      const CommitDecision d = decide_commit(belief, config.resolver.commit_threshold);
      if (!d.committed()) {
        check.passed = false;
        detail << "clause " << idx << " deferred (max belief " << format_double(d.confidence)
               << " < " << format_double(config.resolver.commit_threshold) << "); ";
      }
    }
    for (const auto& [idx, belief] : ledger.secondary_beliefs) {
      const CommitDecision d = decide_commit(belief, config.resolver.commit_threshold);
      if (!d.committed()) {
        check.passed = false;
        detail << "clause " << idx << " (second anchor) deferred (max belief "
               << format_double(d.confidence) << "); ";
      }
    }
    check.detail = check.passed ? "all clauses committed" : detail.str();
    report.checks.push_back(std::move(check));
  }

  {  // Check 2: the composition concentrates enough mass in free space.
    VerifierCheck check{"free_mass", true, ""};
    const double fraction = free_mass_fraction(ledger);
    check.passed = fraction >= config.verify.free_mass_threshold;
    check.detail = "free-space mass fraction " + format_double(fraction) + (check.passed
                       ? " >= "
                       : " < ") + format_double(config.verify.free_mass_threshold);
    report.checks.push_back(std::move(check));
  }

  {  // Check 3: the peak does not hug the anchor object's own volume.
    VerifierCheck check{"peak_clearance", true, "peak clear of the anchor's box"};
    const auto anchor_id = committed_anchor(ledger, ledger.beliefs.empty()
                                                        ? 0
                                                        : ledger.beliefs.begin()->first,
                                            config);
    const ObjectNode* anchor = anchor_id ? ledger.scene->graph.find(*anchor_id) : nullptr;
    if (anchor) {
      const GoalSample peak = argmax_goal(*ledger.density);
      const GridGeometry& geom = ledger.density->geometry();
      const OccupancyGrid& grid = ledger.scene->grid;
      const auto [px, py, pz] = geom.unflatten(peak.cell_index);
      for (int dz = -1; dz <= 1 && check.passed; ++dz) {
        for (int dy = -1; dy <= 1 && check.passed; ++dy) {
          for (int dx = -1; dx <= 1 && check.passed; ++dx) {
            if (dx == 0 && dy == 0 && dz == 0) continue;
            const int nx = px + dx, ny = py + dy, nz = pz + dz;
            if (!geom.in_bounds(nx, ny, nz)) continue;
            if (grid.state(nx, ny, nz) != CellState::Occupied) continue;
            const Vec3 cell_min = geom.origin + geom.resolution * Vec3(nx, ny, nz);
            const Vec3 cell_max = cell_min + Vec3::Constant(geom.resolution);
            if (obb_intersects_aabb(anchor->box, cell_min, cell_max)) {
              check.passed = false;
              check.detail = "peak cell (" + std::to_string(px) + "," + std::to_string(py) +
                             "," + std::to_string(pz) + ") touches the anchor box via occupied neighbor (" +
                             std::to_string(nx) + "," + std::to_string(ny) + "," +
                             std::to_string(nz) + ")";
            }
          }
        }
      }
    }
    report.checks.push_back(std::move(check));
  }

  report.overall = std::all_of(report.checks.begin(), report.checks.end(),
                               [](const VerifierCheck& c) { return c.passed; });
  return report;
}

Ledger retry_relax(const Ledger& ledger, const PipelineConfig& config) {
  if (ledger.attempts >= config.verify.retry_limit)
    throw PipelineError(PipelineError::Kind::RetryLimitExceeded,
                        "retry limit " + std::to_string(config.verify.retry_limit) +
                            " reached");
  Ledger relaxed = ledger;
  for (auto& [idx, set] : relaxed.kernels) {
    for (DirectionalKernel& k : set.directional)
      k.concentration *= config.verify.concentration_relax;
    for (MetricKernel& k : set.metric) k.tolerance *= config.verify.sigma_relax;
  }
  relaxed.density = compose_density(relaxed);
  relaxed.attempts = ledger.attempts + 1;
  return relaxed;
}

Ledger insert_node(const Ledger& ledger, const ObjectNode& node, const PipelineConfig& config,
                   const SimilarityProvider* provider) {
  if (!ledger.scene) throw Error("insert_node: ledger has no scene");
  if (ledger.scene->graph.find(node.id))
    throw PipelineError(PipelineError::Kind::DuplicateId,
                        "node id '" + node.id + "' already exists");
  auto updated = std::make_shared<Scene>(*ledger.scene);
  updated->graph.add_node(node);

  Ledger out = ledger;
  out.scene = updated;
  out.kernels.clear();   // anchored against the old commitments
  out.density.reset();

  std::unique_ptr<SimilarityProvider> owned;
  if (!provider) {
    owned = make_provider(config);
    provider = owned.get();
  }
  for (std::size_t i = 0; i < out.query.clauses.size(); ++i) {
    const SdcClause& clause = out.query.clauses[i];
    const int idx = static_cast<int>(i);
    if (out.beliefs.count(idx))
      out.beliefs[idx] = resolve_anchor(clause.anchor_text, updated->graph, out.observer,
                                        *provider, config.resolver);
    if (out.secondary_beliefs.count(idx) && clause.anchor_text_2)
      out.secondary_beliefs[idx] = resolve_anchor(*clause.anchor_text_2, updated->graph,
                                                  out.observer, *provider, config.resolver);
  }
  return out;
}

GroundingRun ground_run(const std::string& text, std::shared_ptr<const Scene> scene,
                        const ObserverPose& observer, const PipelineConfig& config,
                        const SimilarityProvider* provider) {
  GroundingRun run{FailedResult{Stage::Parse, "not started"}, Ledger{}, VerifierReport{}};
  Ledger& ledger = run.ledger;
  ledger.scene = std::move(scene);
  ledger.observer = observer;

  const auto fail = [&](Stage stage, const std::string& reason) -> GroundingRun& {
    run.outcome = FailedResult{stage, reason};
    return run;
  };

  if (!ledger.scene) return fail(Stage::Parse, "no scene provided");

  // Parse.
  try {
    ledger.query = parse_query(text);
  } catch (const ParseError& e) {
    return fail(Stage::Parse, e.what());
  }

  std::unique_ptr<SimilarityProvider> owned;
  if (!provider) {
    try {
      owned = make_provider(config);
    } catch (const Error& e) {
      return fail(Stage::Resolve, e.what());
    }
    provider = owned.get();
  }

  // Resolve every anchor; a deferred commitment fails the run here because
  // no kernel can be anchored without a committed object.
  std::map<int, std::string> committed;
  std::map<int, std::string> committed2;
  try {
    for (std::size_t i = 0; i < ledger.query.clauses.size(); ++i) {
      const SdcClause& clause = ledger.query.clauses[i];
      const int idx = static_cast<int>(i);
      ledger.beliefs[idx] = resolve_anchor(clause.anchor_text, ledger.scene->graph, observer,
                                           *provider, config.resolver);
      const CommitDecision d =
          decide_commit(ledger.beliefs[idx], config.resolver.commit_threshold);
      if (!d.committed())
        return fail(Stage::Resolve,
                    "clause " + std::to_string(idx) + " ('" + clause.anchor_text +
                        "'): commitment deferred, max belief " + format_double(d.confidence) +
                        " < " + format_double(config.resolver.commit_threshold));
      committed[idx] = *d.id;

      if (clause.anchor_text_2) {
        ledger.secondary_beliefs[idx] = resolve_anchor(
            *clause.anchor_text_2, ledger.scene->graph, observer, *provider, config.resolver);
        const CommitDecision d2 =
            decide_commit(ledger.secondary_beliefs[idx], config.resolver.commit_threshold);
        if (!d2.committed())
          return fail(Stage::Resolve,
                      "clause " + std::to_string(idx) + " ('" + *clause.anchor_text_2 +
                          "'): second anchor deferred, max belief " +
                          format_double(d2.confidence));
        committed2[idx] = *d2.id;
      }
    }
  } catch (const Error& e) {
    return fail(Stage::Resolve, e.what());
  }

  // Kernelize.
  try {
    for (std::size_t i = 0; i < ledger.query.clauses.size(); ++i) {
      const SdcClause& clause = ledger.query.clauses[i];
      const int idx = static_cast<int>(i);
      const ObjectNode* anchor = ledger.scene->graph.find(committed[idx]);
      const ObjectNode* anchor2 =
          committed2.count(idx) ? ledger.scene->graph.find(committed2[idx]) : nullptr;
      ledger.kernels[idx] = clause_to_kernels(clause, *anchor, anchor2, &observer,
                                              config.kernels.frame_policy, config.kernels);
    }
  } catch (const Error& e) {
    return fail(Stage::Kernelize, e.what());
  }

  // Compose.
  try {
    ledger.density = compose_density(ledger);
  } catch (const Error& e) {
    return fail(Stage::Compose, e.what());
  }

  // Verify, relaxing kernels up to the retry limit.
  try {
    run.verification = verify(ledger, config);
    while (!run.verification.overall && ledger.attempts < config.verify.retry_limit) {
      ledger = retry_relax(ledger, config);
      run.verification = verify(ledger, config);
    }
  } catch (const Error& e) {
    return fail(Stage::Verify, e.what());
  }
  if (!run.verification.overall) {
    std::string failing;
    for (const VerifierCheck& c : run.verification.checks)
      if (!c.passed) failing += (failing.empty() ? "" : ", ") + c.name + " (" + c.detail + ")";
    return fail(Stage::Verify, "checks failed after " + std::to_string(ledger.attempts) +
                                   " retries: " + failing);
  }

  const ObjectNode* first_anchor = ledger.scene->graph.find(committed.begin()->second);

  if (ledger.query.kind == QueryKind::WhichObject) {
    // Rank every non-anchor object by the composed log density at its position.
    std::vector<std::string> excluded;
    for (const auto& [idx, id] : committed) excluded.push_back(id);
    for (const auto& [idx, id] : committed2) excluded.push_back(id);

    const KernelSet set = all_kernels(ledger);
    WhichResult which;
    for (const ObjectNode& node : ledger.scene->graph.nodes()) {
      if (std::find(excluded.begin(), excluded.end(), node.id) != excluded.end()) continue;
      double score = 0.0;
      for (const DirectionalKernel& k : set.directional)
        score += vmf_log_density(k, node.pose.position);
      for (const MetricKernel& k : set.metric)
        score += metric_log_density(k, node.pose.position);
      which.ranked.emplace_back(node.id, score);
    }
    if (which.ranked.empty())
      return fail(Stage::Select, "no candidate objects besides the committed anchors");
    std::sort(which.ranked.begin(), which.ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    run.outcome = std::move(which);
    return run;
  }

  // Where query: extract the goal and alternatives.
  WhereResult where;
  try {
    const DensityGrid& density = *ledger.density;
    std::vector<GoalSample> ranked = topk_goals(density, config.goal.k, config.goal.nms_radius);
    if (config.goal.mode == GoalExtraction::Mode::Sample) {
      std::vector<GoalSample> samples =
          importance_sample(density, config.goal.sample_count, config.goal.sample_seed);
      std::sort(samples.begin(), samples.end(), [](const GoalSample& a, const GoalSample& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return a.cell_index < b.cell_index;
      });
      where.goal = samples.front();
    } else {
      where.goal = argmax_goal(density);  // == first NMS pick for argmax/topk modes
    }
    for (const GoalSample& s : ranked)
      if (s.cell_index != where.goal.cell_index) where.alternatives.push_back(s);
    where.angles = offset_angles(where.goal.point, first_anchor->pose.position);
  } catch (const Error& e) {
    return fail(Stage::Select, e.what());
  }

  if (config.planner_enabled) {
    try {
      const int slice = slice_index_for(ledger.scene->grid, observer.position.z());
      where.path = plan(ledger.scene->grid, slice, observer.position, where.goal.point,
                        config.planner);
    } catch (const PlannerError&) {
      where.path.reset();  // planning is best-effort; the grounded goal stands
    }
  }

  run.outcome = std::move(where);
  return run;
}

GroundingOutcome ground(const std::string& text, std::shared_ptr<const Scene> scene,
                        const ObserverPose& observer, const PipelineConfig& config) {
  return ground_run(text, std::move(scene), observer, config).outcome;
}

}  // namespace grounding
