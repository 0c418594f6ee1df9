#include "grounding/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "grounding/errors.hpp"

namespace grounding {

namespace {

using json = nlohmann::ordered_json;

void check_keys(const json& j, const std::string& section, const std::set<std::string>& known) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw ConfigError("unknown key '" + key + "' in config section '" + section + "'");
}

double get_num(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(std::string("config key '") + key + "' must be a number");
  return j[key].get<double>();
}

int get_int(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) throw ConfigError(std::string("config key '") + key + "' must be an integer");
  return j[key].get<int>();
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer() && !j[key].is_number_unsigned())
    throw ConfigError(std::string("config key '") + key + "' must be an integer");
  return j[key].get<std::uint64_t>();
}

bool get_bool(const json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) throw ConfigError(std::string("config key '") + key + "' must be a boolean");
  return j[key].get<bool>();
}

Predicate predicate_from_string(const std::string& s) {
  for (Predicate p : {Predicate::LeftOf, Predicate::RightOf, Predicate::FrontOf,
                      Predicate::Behind, Predicate::Above, Predicate::Below, Predicate::Near,
                      Predicate::Between})
    if (s == predicate_name(p)) return p;
  throw ConfigError("unknown predicate name '" + s + "' in config");
}

}  // namespace

void PipelineConfig::override_seed(std::uint64_t seed) {
  planner.seed = seed;
  goal.sample_seed = seed;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::ordered_json& j,
                                         const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  check_keys(j, "<top>", {"resolver", "similarity", "kernels", "goal", "planner", "verify",
                          "bench"});
  PipelineConfig c;

  if (j.contains("resolver")) {
    const json& r = j["resolver"];
    check_keys(r, "resolver", {"string_weight", "provider_weight", "salience_weight",
                               "salience_length_scale", "commit_threshold"});
    c.resolver.string_weight = get_num(r, "string_weight", c.resolver.string_weight);
    c.resolver.provider_weight = get_num(r, "provider_weight", c.resolver.provider_weight);
    c.resolver.salience_weight = get_num(r, "salience_weight", c.resolver.salience_weight);
    c.resolver.salience_length_scale =
        get_num(r, "salience_length_scale", c.resolver.salience_length_scale);
    c.resolver.commit_threshold = get_num(r, "commit_threshold", c.resolver.commit_threshold);
  }

  if (j.contains("similarity")) {
    const json& s = j["similarity"];
    check_keys(s, "similarity", {"provider", "path"});
    const std::string kind = s.contains("provider") ? s["provider"].get<std::string>() : "exact";
    if (kind == "exact") {
      c.similarity.kind = SimilarityConfig::Kind::Exact;
    } else if (kind == "table") {
      c.similarity.kind = SimilarityConfig::Kind::Table;
      if (!s.contains("path"))
        throw ConfigError("similarity provider 'table' requires a 'path'");
      std::filesystem::path p = s["path"].get<std::string>();
      c.similarity.table_path = p.is_absolute() ? p : base_dir / p;
    } else {
      throw ConfigError("unknown similarity provider '" + kind + "'");
    }
  }

  if (j.contains("kernels")) {
    const json& k = j["kernels"];
    check_keys(k, "kernels",
               {"concentration", "concentration_by_predicate", "sigma_fraction", "sigma_floor",
                "default_offset", "default_sigma", "near_offset", "near_sigma",
                "vertical_clearance", "frame_policy"});
    c.kernels.concentration = get_num(k, "concentration", c.kernels.concentration);
    if (k.contains("concentration_by_predicate")) {
      for (const auto& [name, value] : k["concentration_by_predicate"].items())
        c.kernels.concentration_by_predicate[predicate_from_string(name)] = value.get<double>();
    }
    c.kernels.sigma_fraction = get_num(k, "sigma_fraction", c.kernels.sigma_fraction);
    c.kernels.sigma_floor = get_num(k, "sigma_floor", c.kernels.sigma_floor);
    c.kernels.default_offset = get_num(k, "default_offset", c.kernels.default_offset);
    c.kernels.default_sigma = get_num(k, "default_sigma", c.kernels.default_sigma);
    c.kernels.near_offset = get_num(k, "near_offset", c.kernels.near_offset);
    c.kernels.near_sigma = get_num(k, "near_sigma", c.kernels.near_sigma);
    c.kernels.vertical_clearance = get_num(k, "vertical_clearance", c.kernels.vertical_clearance);
    if (k.contains("frame_policy")) {
      const std::string policy = k["frame_policy"].get<std::string>();
      if (policy == "intrinsic")
        c.kernels.frame_policy = FramePolicy::Intrinsic;
      else if (policy == "viewer_relative")
        c.kernels.frame_policy = FramePolicy::ViewerRelative;
      else
        throw ConfigError("unknown frame_policy '" + policy + "'");
    }
  }

  if (j.contains("goal")) {
    const json& g = j["goal"];
    check_keys(g, "goal", {"mode", "k", "nms_radius", "sample_count", "sample_seed"});
    if (g.contains("mode")) {
      const std::string mode = g["mode"].get<std::string>();
      if (mode == "argmax")
        c.goal.mode = GoalExtraction::Mode::Argmax;
      else if (mode == "topk")
        c.goal.mode = GoalExtraction::Mode::TopK;
      else if (mode == "sample")
        c.goal.mode = GoalExtraction::Mode::Sample;
      else
        throw ConfigError("unknown goal mode '" + mode + "'");
    }
    c.goal.k = get_int(g, "k", c.goal.k);
    c.goal.nms_radius = get_num(g, "nms_radius", c.goal.nms_radius);
    c.goal.sample_count = get_int(g, "sample_count", c.goal.sample_count);
    c.goal.sample_seed = get_u64(g, "sample_seed", c.goal.sample_seed);
    if (c.goal.k < 1) throw ConfigError("goal.k must be >= 1");
    if (c.goal.sample_count < 1) throw ConfigError("goal.sample_count must be >= 1");
  }

  if (j.contains("planner")) {
    const json& p = j["planner"];
    check_keys(p, "planner", {"enabled", "step_size", "goal_bias", "rewire_radius",
                              "max_iterations", "goal_tolerance", "seed"});
    c.planner_enabled = get_bool(p, "enabled", c.planner_enabled);
    c.planner.step_size = get_num(p, "step_size", c.planner.step_size);
    c.planner.goal_bias = get_num(p, "goal_bias", c.planner.goal_bias);
    c.planner.rewire_radius = get_num(p, "rewire_radius", c.planner.rewire_radius);
    c.planner.max_iterations = get_int(p, "max_iterations", c.planner.max_iterations);
    c.planner.goal_tolerance = get_num(p, "goal_tolerance", c.planner.goal_tolerance);
    c.planner.seed = get_u64(p, "seed", c.planner.seed);
  }

  if (j.contains("verify")) {
    const json& v = j["verify"];
    check_keys(v, "verify",
               {"retry_limit", "free_mass_threshold", "sigma_relax", "concentration_relax"});
    c.verify.retry_limit = get_int(v, "retry_limit", c.verify.retry_limit);
    c.verify.free_mass_threshold =
        get_num(v, "free_mass_threshold", c.verify.free_mass_threshold);
    c.verify.sigma_relax = get_num(v, "sigma_relax", c.verify.sigma_relax);
    c.verify.concentration_relax =
        get_num(v, "concentration_relax", c.verify.concentration_relax);
    if (c.verify.retry_limit < 0) throw ConfigError("verify.retry_limit must be >= 0");
    if (c.verify.sigma_relax < 1.0)
      throw ConfigError("verify.sigma_relax must be >= 1 (relaxation widens tolerances)");
    if (c.verify.concentration_relax <= 0.0 || c.verify.concentration_relax > 1.0)
      throw ConfigError("verify.concentration_relax must lie in (0, 1]");
  }

  if (j.contains("bench")) {
    const json& b = j["bench"];
    check_keys(b, "bench", {"where_success_radius", "top2", "synonyms"});
    c.bench.where_success_radius =
        get_num(b, "where_success_radius", c.bench.where_success_radius);
    c.bench.top2 = get_bool(b, "top2", c.bench.top2);
    if (b.contains("synonyms")) {
      if (!b["synonyms"].is_array()) throw ConfigError("bench.synonyms must be an array of pairs");
      for (const auto& pair : b["synonyms"]) {
        if (!pair.is_array() || pair.size() != 2)
          throw ConfigError("bench.synonyms entries must be [label, label] pairs");
        c.bench.label_synonyms.emplace_back(pair[0].get<std::string>(),
                                            pair[1].get<std::string>());
      }
    }
  }

  c.resolver.validate();
  c.kernels.validate();
  c.planner.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.filename().string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

nlohmann::ordered_json PipelineConfig::to_json() const {
  json j;
  j["resolver"] = {{"string_weight", resolver.string_weight},
                   {"provider_weight", resolver.provider_weight},
                   {"salience_weight", resolver.salience_weight},
                   {"salience_length_scale", resolver.salience_length_scale},
                   {"commit_threshold", resolver.commit_threshold}};
  json sim;
  sim["provider"] = similarity.kind == SimilarityConfig::Kind::Exact ? "exact" : "table";
  if (similarity.kind == SimilarityConfig::Kind::Table)
    sim["path"] = similarity.table_path.string();
  j["similarity"] = std::move(sim);
  json kb = json::object();
  for (const auto& [p, v] : kernels.concentration_by_predicate) kb[predicate_name(p)] = v;
  j["kernels"] = {{"concentration", kernels.concentration},
                  {"concentration_by_predicate", std::move(kb)},
                  {"sigma_fraction", kernels.sigma_fraction},
                  {"sigma_floor", kernels.sigma_floor},
                  {"default_offset", kernels.default_offset},
                  {"default_sigma", kernels.default_sigma},
                  {"near_offset", kernels.near_offset},
                  {"near_sigma", kernels.near_sigma},
                  {"vertical_clearance", kernels.vertical_clearance},
                  {"frame_policy", kernels.frame_policy == FramePolicy::Intrinsic
                                       ? "intrinsic"
                                       : "viewer_relative"}};
  const char* mode = goal.mode == GoalExtraction::Mode::Argmax
                         ? "argmax"
                         : (goal.mode == GoalExtraction::Mode::TopK ? "topk" : "sample");
  j["goal"] = {{"mode", mode},
               {"k", goal.k},
               {"nms_radius", goal.nms_radius},
               {"sample_count", goal.sample_count},
               {"sample_seed", goal.sample_seed}};
  j["planner"] = {{"enabled", planner_enabled},
                  {"step_size", planner.step_size},
                  {"goal_bias", planner.goal_bias},
                  {"rewire_radius", planner.rewire_radius},
                  {"max_iterations", planner.max_iterations},
                  {"goal_tolerance", planner.goal_tolerance},
                  {"seed", planner.seed}};
  j["verify"] = {{"retry_limit", verify.retry_limit},
                 {"free_mass_threshold", verify.free_mass_threshold},
                 {"sigma_relax", verify.sigma_relax},
                 {"concentration_relax", verify.concentration_relax}};
  json synonyms = json::array();
  for (const auto& [a, b] : bench.label_synonyms) synonyms.push_back(json::array({a, b}));
  j["bench"] = {{"where_success_radius", bench.where_success_radius},
                {"top2", bench.top2},
                {"synonyms", std::move(synonyms)}};
  return j;
}

std::unique_ptr<SimilarityProvider> make_provider(const PipelineConfig& config) {
  if (config.similarity.kind == SimilarityConfig::Kind::Table)
    return std::make_unique<TableProvider>(TableProvider::from_file(config.similarity.table_path));
  return std::make_unique<ExactMatchProvider>();
}

}  // namespace grounding
