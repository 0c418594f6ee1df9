#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <string>

#include "grounding/errors.hpp"
#include "grounding/resolver.hpp"
#include "grounding/scene.hpp"

using namespace grounding;

namespace {

ObjectNode make_node(const std::string& id, const std::string& label, const Vec3& pos) {
  ObjectNode n;
  n.id = id;
  n.label = label;
  n.pose.position = pos;
  n.box.center = pos;
  n.box.half_extents = Vec3(0.1, 0.1, 0.1);
  n.detection_confidence = 0.9;
  return n;
}

// reference Levenshtein with the classic full DP table
std::size_t reference_edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> dp(a.size() + 1,
                                           std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 0; i <= a.size(); ++i) dp[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) dp[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      dp[i][j] = std::min({dp[i - 1][j] + 1, dp[i][j - 1] + 1,
                           dp[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return dp[a.size()][b.size()];
}

}  // namespace

TEST_CASE("text normalization lowercases, trims, and collapses whitespace") {
  CHECK(normalize_text("  The   FRIDGE ") == "the fridge");
  CHECK(normalize_text("Sink") == "sink");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("\t a \n b ") == "a b");
}

TEST_CASE("edit distance matches the textbook recurrence") {
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("", "abc") == 3);
  CHECK(edit_distance("abc", "") == 3);
  CHECK(edit_distance("same", "same") == 0);
  const std::string words[] = {"fridge", "refrigerator", "couch", "sofa", "mug",
                               "table", "cabinet", "kettle", ""};
  for (const auto& a : words) {
    for (const auto& b : words) {
      CHECK(edit_distance(a, b) == reference_edit_distance(a, b));
      CHECK(edit_distance(a, b) == edit_distance(b, a));
    }
  }
}

TEST_CASE("string similarity blends token overlap and edit distance") {
  // token-set Jaccard 1/2 vs edit-based 1 - 4/10: the larger wins
  CHECK(string_similarity("the fridge", "fridge") == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(string_similarity("fridge", "fridge") == doctest::Approx(1.0));
  CHECK(string_similarity("FRIDGE", "fridge") == doctest::Approx(1.0));
  // disjoint tokens, edit distance 4 of max length 5
  CHECK(string_similarity("sofa", "couch") == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(string_similarity("", "x") == doctest::Approx(0.0));
  // shared token dominates a large edit distance
  CHECK(string_similarity("kitchen sink", "sink") ==
        doctest::Approx(0.5).epsilon(1e-12));
  for (const auto& [a, b] : std::vector<std::pair<std::string, std::string>>{
           {"mug", "cup"}, {"the table", "table"}, {"ceiling lamp", "lamp"}}) {
    const double s = string_similarity(a, b);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(s == doctest::Approx(string_similarity(b, a)));
  }
}

TEST_CASE("proximity salience decays exponentially with distance") {
  ObserverPose obs;
  const auto node = make_node("n", "n", Vec3(3.0, 4.0, 0.0));  // distance 5
  CHECK(proximity_salience(obs, node, 5.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(proximity_salience(obs, node, 2.5) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  const auto at_observer = make_node("o", "o", Vec3(0, 0, 0));
  CHECK(proximity_salience(obs, at_observer, 5.0) == doctest::Approx(1.0));
}

TEST_CASE("belief normalization sums to one and ignores positive scaling") {
  const Belief b1 = belief_from_scores({{"a", 1.0}, {"b", 3.0}});
  CHECK(b1.mass.at("a") == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(b1.mass.at("b") == doctest::Approx(0.75).epsilon(1e-12));
  const Belief b2 = belief_from_scores({{"a", 0.002}, {"b", 0.006}});
  CHECK(b2.mass.at("a") == doctest::Approx(b1.mass.at("a")).epsilon(1e-12));

  const Belief uniform = belief_from_scores({{"a", 0.0}, {"b", 0.0}, {"c", 0.0}});
  for (const auto& [id, m] : uniform.mass) CHECK(m == doctest::Approx(1.0 / 3).epsilon(1e-12));

  double total = 0.0;
  for (const auto& [id, m] : b1.mass) total += m;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(belief_from_scores({{"a", -0.1}}), ResolveError);
  CHECK_THROWS_AS(belief_from_scores({}), ResolveError);
}

TEST_CASE("anchor resolution reproduces the blended score by hand") {
  SceneGraph graph;
  graph.add_node(make_node("mug_0", "mug", Vec3(1.0, 0.0, 0.0)));
  graph.add_node(make_node("table_0", "table", Vec3(3.0, 4.0, 0.0)));
  ObserverPose obs;
  const ResolverWeights w;
  const ExactMatchProvider exact;
  const Belief belief = resolve_anchor("mug", graph, obs, exact, w);

  const double raw_mug = 0.5 * 1.0 + 0.3 * 1.0 + 0.2 * std::exp(-1.0 / 5.0);
  // "mug" vs "table": no shared tokens, edit distance 5 of length 5
  const double raw_table = 0.5 * 0.0 + 0.3 * 0.0 + 0.2 * std::exp(-5.0 / 5.0);
  const double total = raw_mug + raw_table;
  CHECK(belief.mass.at("mug_0") == doctest::Approx(raw_mug / total).epsilon(1e-12));
  CHECK(belief.mass.at("table_0") == doctest::Approx(raw_table / total).epsilon(1e-12));
}

TEST_CASE("resolution fails on an empty scene graph") {
  SceneGraph graph;
  ObserverPose obs;
  CHECK_THROWS_AS(resolve_anchor("mug", graph, obs, ExactMatchProvider{}, ResolverWeights{}),
                  ResolveError);
}

TEST_CASE("a better provider score can only raise an object's belief") {
  struct Boost : SimilarityProvider {
    double bonus = 0.0;
    double score(const std::string&, const std::string& label) const override {
      return label == "mug" ? bonus : 0.0;
    }
  };
  SceneGraph graph;
  graph.add_node(make_node("mug_0", "mug", Vec3(1.0, 0.0, 0.0)));
  graph.add_node(make_node("table_0", "table", Vec3(3.0, 4.0, 0.0)));
  ObserverPose obs;
  const ResolverWeights w;
  Boost provider;
  double prev = 0.0;
  for (double bonus : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    provider.bonus = bonus;
    const Belief b = resolve_anchor("cup", graph, obs, provider, w);
    CHECK(b.mass.at("mug_0") >= prev);
    prev = b.mass.at("mug_0");
  }
  CHECK(prev > 0.5);
}

TEST_CASE("commitment threshold and tie-breaking are deterministic") {
  Belief b;
  b.mass = {{"b_0", 0.5}, {"a_0", 0.5}};
  const CommitDecision tie = decide_commit(b, 0.4);
  REQUIRE(tie.committed());
  CHECK(*tie.id == "a_0");  // lexicographically smallest among tied winners
  CHECK(tie.confidence == doctest::Approx(0.5));

  b.mass = {{"a_0", 0.39}, {"b_0", 0.35}, {"c_0", 0.26}};
  const CommitDecision defer = decide_commit(b, 0.4);
  CHECK(!defer.committed());
  CHECK(defer.confidence == doctest::Approx(0.39));

  b.mass = {{"a_0", 0.4}, {"b_0", 0.3}, {"c_0", 0.3}};
  CHECK(decide_commit(b, 0.4).committed());  // threshold is inclusive

  b.mass = {{"a_0", 0.2}, {"b_0", 0.7}, {"c_0", 0.1}};
  const CommitDecision clear = decide_commit(b, 0.4);
  REQUIRE(clear.committed());
  CHECK(*clear.id == "b_0");
  CHECK(clear.confidence == doctest::Approx(0.7));
}

TEST_CASE("resolver weight validation") {
  ResolverWeights w;
  CHECK_NOTHROW(w.validate());
  w.string_weight = 0.6;  // now sums to 1.1
  CHECK_THROWS_AS(w.validate(), ResolveError);
  w = ResolverWeights{};
  w.provider_weight = -0.3;
  CHECK_THROWS_AS(w.validate(), ResolveError);
  w = ResolverWeights{};
  w.commit_threshold = 0.0;
  CHECK_THROWS_AS(w.validate(), ResolveError);
  w = ResolverWeights{};
  w.salience_length_scale = 0.0;
  CHECK_THROWS_AS(w.validate(), ResolveError);
}

TEST_CASE("similarity providers score deterministically in range") {
  const ExactMatchProvider exact;
  CHECK(exact.score("fridge", "fridge") == doctest::Approx(1.0));
  CHECK(exact.score("The Fridge", "the fridge") == doctest::Approx(1.0));
  CHECK(exact.score("fridge", "sink") == doctest::Approx(0.0));

  const auto table = TableProvider::from_file(std::string(FIXTURE_DIR) +
                                              "/similarity_pairs.json");
  CHECK(table.score("sofa", "couch") == doctest::Approx(0.9));
  CHECK(table.score("couch", "sofa") == doctest::Approx(0.9));  // symmetric
  CHECK(table.score("refrigerator", "fridge") == doctest::Approx(0.95));
  CHECK(table.score("mug", "cup") == doctest::Approx(0.8));
  CHECK(table.score("mug", "mug") == doctest::Approx(1.0));  // identity
  CHECK(table.score("mug", "sink") == doctest::Approx(0.0)); // unknown pair

  CHECK_THROWS_AS(TableProvider({{"a", "b", 1.5}}), ResolveError);
  CHECK_THROWS_AS(TableProvider::from_file("/nonexistent/table.json"), ResolveError);
}
