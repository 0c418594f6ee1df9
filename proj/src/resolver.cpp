#include "grounding/resolver.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "grounding/errors.hpp"

namespace grounding {

std::string normalize_text(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char raw : s) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

double ExactMatchProvider::score(const std::string& query_text, const std::string& label) const {
  return normalize_text(query_text) == normalize_text(label) ? 1.0 : 0.0;
}

TableProvider::TableProvider(
    const std::vector<std::tuple<std::string, std::string, double>>& pairs) {
  for (const auto& [a, b, s] : pairs) {
    if (s < 0.0 || s > 1.0)
      throw ResolveError("similarity table scores must be in [0, 1]");
    const std::string na = normalize_text(a);
    const std::string nb = normalize_text(b);
    table_[{na, nb}] = s;
    table_[{nb, na}] = s;
  }
}

TableProvider TableProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ResolveError("cannot open similarity table: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ResolveError("similarity table " + path.filename().string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("pairs") || !j["pairs"].is_array())
    throw ResolveError("similarity table: expected {\"pairs\": [[text, label, score], ...]}");
  std::vector<std::tuple<std::string, std::string, double>> pairs;
  for (const auto& p : j["pairs"]) {
    if (!p.is_array() || p.size() != 3 || !p[0].is_string() || !p[1].is_string() ||
        !p[2].is_number())
      throw ResolveError("similarity table: each pair must be [text, label, score]");
    pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>(), p[2].get<double>());
  }
  return TableProvider(pairs);
}

double TableProvider::score(const std::string& query_text, const std::string& label) const {
  const std::string a = normalize_text(query_text);
  const std::string b = normalize_text(label);
  if (a == b) return 1.0;
  auto it = table_.find({a, b});
  return it == table_.end() ? 0.0 : it->second;
}

void ResolverWeights::validate() const {
  if (string_weight < 0.0 || provider_weight < 0.0 || salience_weight < 0.0)
    throw ResolveError("resolver weights must be nonnegative");
  const double sum = string_weight + provider_weight + salience_weight;
  if (std::abs(sum - 1.0) > 1e-9)
    throw ResolveError("resolver weights must sum to 1, got " + std::to_string(sum));
  if (salience_length_scale <= 0.0)
    throw ResolveError("salience length scale must be > 0");
  if (commit_threshold <= 0.0 || commit_threshold > 1.0)
    throw ResolveError("commit threshold must lie in (0, 1]");
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

namespace {

std::set<std::string> token_set(const std::string& normalized) {
  std::set<std::string> out;
  std::istringstream in(normalized);
  std::string tok;
  while (in >> tok) out.insert(tok);
  return out;
}

}  // namespace

double string_similarity(const std::string& a, const std::string& b) {
  const std::string na = normalize_text(a);
  const std::string nb = normalize_text(b);
  if (na.empty() && nb.empty()) return 1.0;

  const auto ta = token_set(na);
  const auto tb = token_set(nb);
  std::size_t common = 0;
  for (const auto& t : ta) common += tb.count(t);
  const std::size_t united = ta.size() + tb.size() - common;
  const double jaccard = united == 0 ? 0.0 : static_cast<double>(common) / united;

  const std::size_t longest = std::max(na.size(), nb.size());
  const double edit_ratio =
      longest == 0 ? 0.0
                   : 1.0 - static_cast<double>(edit_distance(na, nb)) / static_cast<double>(longest);

  return std::max(jaccard, edit_ratio);
}

double proximity_salience(const ObserverPose& observer, const ObjectNode& node,
                          double length_scale) {
  const double d = (node.pose.position - observer.position).norm();
  return std::exp(-d / length_scale);
}

Belief belief_from_scores(const std::map<std::string, double>& raw_scores) {
  if (raw_scores.empty()) throw ResolveError("cannot normalize an empty score map");
  double total = 0.0;
  for (const auto& [id, s] : raw_scores) {
    if (s < 0.0) throw ResolveError("raw score for '" + id + "' is negative");
    total += s;
  }
  Belief belief;
  if (total <= 0.0) {
    const double uniform = 1.0 / static_cast<double>(raw_scores.size());
    for (const auto& [id, s] : raw_scores) belief.mass[id] = uniform;
    return belief;
  }
  for (const auto& [id, s] : raw_scores) belief.mass[id] = s / total;
  return belief;
}

Belief resolve_anchor(const std::string& anchor_text, const SceneGraph& graph,
                      const ObserverPose& observer, const SimilarityProvider& provider,
                      const ResolverWeights& weights) {
  weights.validate();
  if (graph.empty())
    throw ResolveError("cannot resolve '" + anchor_text + "' against an empty scene graph");
  std::map<std::string, double> raw;
  for (const ObjectNode& node : graph.nodes()) {
    const double s_str = string_similarity(anchor_text, node.label);
    const double s_provider = provider.score(anchor_text, node.label);
    if (s_provider < 0.0 || s_provider > 1.0)
      throw ResolveError("similarity provider returned a score outside [0, 1] for label '" +
                         node.label + "'");
    const double s_prox = proximity_salience(observer, node, weights.salience_length_scale);
    raw[node.id] = weights.string_weight * s_str + weights.provider_weight * s_provider +
                   weights.salience_weight * s_prox;
  }
  return belief_from_scores(raw);
}

CommitDecision decide_commit(const Belief& belief, double commit_threshold) {
  CommitDecision decision;
  double best = -1.0;
  for (const auto& [id, p] : belief.mass) {
    if (p > best) {  // strict: ties keep the lexicographically smallest id
      best = p;
      decision.confidence = p;
      decision.id = id;
    }
  }
  if (!decision.id || best < commit_threshold) {
    decision.id.reset();
  }
  return decision;
}

}  // namespace grounding
