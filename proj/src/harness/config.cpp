// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "urae/adapters.hpp"
#include "urae/harness.hpp"

namespace urae::harness {

namespace {

enum class FieldType { Count, Seed, Real, Text, RealList };

using Check = std::function<std::optional<std::string>(const Json&)>;

struct Field {
  std::string key;
  FieldType type;
  Json fallback;
  Check check;
};

std::optional<std::string> ok() { return std::nullopt; }

Check at_least(double lo) {
  return [lo](const Json& v) -> std::optional<std::string> {
    if (v.get<double>() < lo) return "must be >= " + format_real(lo);
    return ok();
  };
}

Check positive() {
  return [](const Json& v) -> std::optional<std::string> {
    if (!(v.get<double>() > 0.0)) return "must be > 0";
    return ok();
  };
}

Check unit_interval() {
  return [](const Json& v) -> std::optional<std::string> {
    const double x = v.get<double>();
    if (!(x >= 0.0 && x <= 1.0)) return "must lie in [0, 1]";
    return ok();
  };
}

Check p_grid() {
  return [](const Json& v) -> std::optional<std::string> {
    if (v.empty()) return "must not be empty";
    std::set<double> seen;
    for (const Json& x : v) {
      const double p = x.get<double>();
      if (!(p >= 0.0 && p <= 1.0)) return "entries must lie in [0, 1]";
      if (!seen.insert(p).second) return "entries must be distinct";
    }
    return ok();
  };
}

Check list_length(std::size_t multiple_of, std::size_t at_least_n) {
  return [=](const Json& v) -> std::optional<std::string> {
    if (v.size() < at_least_n || v.size() % multiple_of != 0) {
      return "needs a multiple of " + std::to_string(multiple_of) + " values (at least " +
             std::to_string(at_least_n) + ")";
    }
    return ok();
  };
}

Check g_values() {
  return [](const Json& v) -> std::optional<std::string> {
    if (v.size() < 2) return "needs at least two guidance scales";
    std::set<double> seen;
    for (const Json& x : v) {
      if (!(x.get<double>() >= 1.0)) return "guidance scales must be >= 1";
      if (!seen.insert(x.get<double>()).second) return "guidance scales must be distinct";
    }
    return ok();
  };
}

Check one_of(std::vector<std::string> allowed) {
  return [allowed](const Json& v) -> std::optional<std::string> {
    const auto s = v.get<std::string>();
    if (std::find(allowed.begin(), allowed.end(), s) != allowed.end()) return ok();
    std::string msg = "must be one of";
    for (const auto& a : allowed) msg += " '" + a + "'";
    return msg;
  };
}

Check adapter_mode() {
  return [](const Json& v) -> std::optional<std::string> {
    if (!adapters::parse_mode(v.get<std::string>())) return "must be 'minor', 'major' or 'lora'";
    return ok();
  };
}

void add_theorem(std::vector<Field>& f, Json grid) {
  f.push_back({"problem.n", FieldType::Count, 32, at_least(1)});
  f.push_back({"problem.d", FieldType::Count, 64, at_least(1)});
  f.push_back({"problem.sigma", FieldType::Real, 0.5, at_least(0)});
  f.push_back({"problem.ref_distance", FieldType::Real, 1.0, at_least(0)});
  f.push_back({"gd.eta", FieldType::Real, 0.01, positive()});
  f.push_back({"gd.steps", FieldType::Count, 500, nullptr});
  f.push_back({"trials", FieldType::Count, 200, at_least(1)});
  f.push_back({"p_grid", FieldType::RealList, std::move(grid), p_grid()});
}

void add_toy(std::vector<Field>& f) {
  f.push_back({"data.means", FieldType::RealList, Json::array({-2.0, 0.0, 2.0, 0.0}), list_length(2, 2)});
  f.push_back({"data.stddev", FieldType::Real, 0.5, at_least(0)});
  f.push_back({"data.per_class", FieldType::Count, 500, at_least(1)});
  f.push_back({"model.width", FieldType::Count, 64, at_least(1)});
  f.push_back({"model.depth", FieldType::Count, 2, nullptr});
  f.push_back({"model.class_embed_dim", FieldType::Count, 8, nullptr});
  f.push_back({"model.time_freqs", FieldType::Count, 8, nullptr});
  f.push_back({"model.guidance_freqs", FieldType::Count, 8, nullptr});
  f.push_back({"train.steps", FieldType::Count, 3000, nullptr});
  f.push_back({"train.batch_size", FieldType::Count, 128, at_least(1)});
  f.push_back({"train.learning_rate", FieldType::Real, 0.02, positive()});
  f.push_back({"train.cond_dropout", FieldType::Real, 0.1, unit_interval()});
  f.push_back({"train.eval_repeats", FieldType::Count, 4, at_least(1)});
  f.push_back({"sample.count", FieldType::Count, 500, nullptr});
  f.push_back({"sample.steps", FieldType::Count, 64, at_least(1)});
}

void add_distill(std::vector<Field>& f) {
  f.push_back({"distill.steps", FieldType::Count, 3000, nullptr});
  f.push_back({"distill.batch_size", FieldType::Count, 128, at_least(1)});
  f.push_back({"distill.learning_rate", FieldType::Real, 0.02, positive()});
  f.push_back({"distill.g_min", FieldType::Real, 1.0, at_least(0)});
  f.push_back({"distill.g_max", FieldType::Real, 4.0, at_least(0)});
  f.push_back({"distill.eval_repeats", FieldType::Count, 4, at_least(1)});
  f.push_back({"distill.held_out_per_class", FieldType::Count, 250, at_least(1)});
}

std::vector<Field> fields_for(Kind kind) {
  std::vector<Field> f;
  f.push_back({"experiment", FieldType::Text, std::string(to_string(kind)), nullptr});
  f.push_back({"seed", FieldType::Seed, 1, nullptr});
  f.push_back({"output_dir", FieldType::Text, "out/" + std::string(to_string(kind)),
               [](const Json& v) -> std::optional<std::string> {
                 if (v.get<std::string>().empty()) return "must not be empty";
                 return ok();
               }});
  switch (kind) {
    case Kind::Theorem1:
      add_theorem(f, Json::array({0.0, 0.25, 0.5, 0.75, 1.0}));
      break;
    case Kind::Fig2Sweep: {
      Json grid = Json::array();
      for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
      add_theorem(f, std::move(grid));
      break;
    }
    case Kind::ToyTrain:
      add_toy(f);
      f.push_back({"sample.g", FieldType::Real, 1.0, at_least(0)});
      break;
    case Kind::ToyDistill:
      add_toy(f);
      add_distill(f);
      f.push_back({"sample.g", FieldType::Real, 1.0, at_least(0)});
      break;
    case Kind::CfgAdapt:
      add_toy(f);
      add_distill(f);
      f.push_back({"sample.g", FieldType::Real, 2.0, at_least(0)});
      f.push_back({"adapt.pairs", FieldType::Count, 10, at_least(1)});
      f.push_back({"adapt.g_train", FieldType::RealList, Json::array({1.0, 3.0}), g_values()});
      f.push_back({"adapt.shift", FieldType::RealList, Json::array({3.0, 3.0}), list_length(2, 2)});
      f.push_back({"adapt.steps", FieldType::Count, 2000, nullptr});
      f.push_back({"adapt.batch_size", FieldType::Count, 256, at_least(1)});
      f.push_back({"adapt.learning_rate", FieldType::Real, 0.02, positive()});
      f.push_back({"adapt.eval_repeats", FieldType::Count, 4, at_least(1)});
      f.push_back({"adapt.per_class", FieldType::Count, 250, at_least(1)});
      f.push_back({"adapt.held_out_per_class", FieldType::Count, 250, at_least(1)});
      break;
    case Kind::AdapterOp:
      f.push_back({"op", FieldType::Text, "split", one_of({"split", "merge"})});
      f.push_back({"input", FieldType::Text, "", nullptr});
      f.push_back({"entry", FieldType::Text, "", nullptr});
      f.push_back({"rank", FieldType::Count, 1, nullptr});
      f.push_back({"mode", FieldType::Text, "minor", adapter_mode()});
      f.push_back({"base", FieldType::Text, "", nullptr});
      f.push_back({"adapter", FieldType::Text, "", nullptr});
      break;
    case Kind::ArchiveInspect:
      f.push_back({"input", FieldType::Text, "", nullptr});
      break;
  }
  return f;
}

std::optional<std::string> type_problem(const Json& v, FieldType t) {
  switch (t) {
    case FieldType::Count:
    case FieldType::Seed:
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        return "expected a non-negative integer";
      }
      return ok();
    case FieldType::Real:
      if (!v.is_number() || !std::isfinite(v.get<double>())) return "expected a finite number";
      return ok();
    case FieldType::Text:
      if (!v.is_string()) return "expected a string";
      return ok();
    case FieldType::RealList:
      if (!v.is_array()) return "expected an array of numbers";
      for (const Json& x : v) {
        if (!x.is_number() || !std::isfinite(x.get<double>())) return "expected an array of finite numbers";
      }
      return ok();
  }
  return ok();
}

// Integers given for real-valued knobs are stored as doubles so the echo is uniform.
Json normalize(const Json& v, FieldType t) {
  if (t == FieldType::Real) return v.get<double>();
  if (t == FieldType::Count || t == FieldType::Seed) return v.get<std::uint64_t>();
  if (t == FieldType::RealList) {
    Json out = Json::array();
    for (const Json& x : v) out.push_back(x.get<double>());
    return out;
  }
  return v;
}

void flatten_into(const Json& doc, const std::string& prefix, Json& out) {
  for (const auto& [k, v] : doc.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      flatten_into(v, key, out);
    } else {
      out[key] = v;
    }
  }
}

}  // namespace

std::string_view to_string(Kind kind) noexcept {
  switch (kind) {
    case Kind::Theorem1: return "theorem1";
    case Kind::Fig2Sweep: return "fig2-sweep";
    case Kind::ToyTrain: return "toy-train";
    case Kind::ToyDistill: return "toy-distill";
    case Kind::CfgAdapt: return "cfg-adapt";
    case Kind::AdapterOp: return "adapter-op";
    case Kind::ArchiveInspect: return "archive-inspect";
  }
  return "unknown";
}

std::optional<Kind> parse_kind(std::string_view text) noexcept {
  for (Kind k : {Kind::Theorem1, Kind::Fig2Sweep, Kind::ToyTrain, Kind::ToyDistill, Kind::CfgAdapt,
                 Kind::AdapterOp, Kind::ArchiveInspect}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

namespace {
std::string join(const std::vector<std::string>& v) {
  std::string out = "invalid config: ";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += "; ";
    out += v[i];
  }
  return out;
}
}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : ValidationError(join(violations)), violations_(std::move(violations)) {}

Json flatten(const Json& doc) {
  Json out = Json::object();
  flatten_into(doc, "", out);
  return out;
}

Json load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  Json doc;
  try {
    doc = Json::parse(ss.str());
  } catch (const Json::exception& e) {
    throw ConfigError({"config '" + path.string() + "' is not valid JSON: " + e.what()});
  }
  if (!doc.is_object()) throw ConfigError({"config '" + path.string() + "' must be a JSON object"});
  return flatten(doc);
}

Json default_config(Kind kind) { return resolve_config(kind, Json::object()); }

Json resolve_config(Kind kind, const Json& user, const Json& overrides) {
  Json merged = flatten(user.is_null() ? Json::object() : user);
  const Json flat_overrides = flatten(overrides);
  for (const auto& [k, v] : flat_overrides.items()) merged[k] = v;

  const std::vector<Field> fields = fields_for(kind);
  std::vector<std::string> problems;
  for (const auto& [k, v] : merged.items()) {
    const bool known = std::any_of(fields.begin(), fields.end(), [&](const Field& f) { return f.key == k; });
    if (!known) problems.push_back(k + ": unknown field for experiment '" + std::string(to_string(kind)) + "'");
  }

  Json out = Json::object();
  for (const Field& f : fields) {
    const auto it = merged.find(f.key);
    const Json& v = it == merged.end() ? f.fallback : *it;
    if (auto p = type_problem(v, f.type)) {
      problems.push_back(f.key + ": " + *p);
      continue;
    }
    const Json value = normalize(v, f.type);
    if (f.check) {
      if (auto p = f.check(value)) {
        problems.push_back(f.key + ": " + *p);
        continue;
      }
    }
    out[f.key] = value;
  }

  // Cross-field rules, checked only when the fields themselves are valid.
  auto has = [&](const char* k) { return out.contains(k); };
  if (has("experiment") && out["experiment"] != std::string(to_string(kind))) {
    problems.push_back("experiment: config is for '" + out["experiment"].get<std::string>() +
                       "', command runs '" + std::string(to_string(kind)) + "'");
  }
  if (has("problem.n") && has("problem.d") && out["problem.n"].get<std::uint64_t>() > out["problem.d"].get<std::uint64_t>()) {
    problems.push_back("problem.n: must not exceed problem.d (over-parameterized regime)");
  }
  if (has("distill.g_min") && has("distill.g_max") && out["distill.g_min"].get<double>() > out["distill.g_max"].get<double>()) {
    problems.push_back("distill.g_min: must not exceed distill.g_max");
  }
  if (kind == Kind::AdapterOp && has("op")) {
    const auto op = out["op"].get<std::string>();
    if (op == "split" && has("input") && out["input"].get<std::string>().empty()) {
      problems.push_back("input: required for op 'split'");
    }
    if (op == "merge") {
      if (has("base") && out["base"].get<std::string>().empty()) problems.push_back("base: required for op 'merge'");
      if (has("adapter") && out["adapter"].get<std::string>().empty()) problems.push_back("adapter: required for op 'merge'");
    }
    if (op == "split" && has("mode") && has("rank") && out["mode"] == "lora" && out["rank"] == 0) {
      problems.push_back("rank: lora adapters need rank >= 1");
    }
  }
  if (kind == Kind::ArchiveInspect && has("input") && out["input"].get<std::string>().empty()) {
    problems.push_back("input: required");
  }

  if (!problems.empty()) throw ConfigError(std::move(problems));
  return out;
}

std::size_t worker_threads() {
  const char* env = std::getenv("URAE_THREADS");
  if (env == nullptr || *env == '\0') return std::max(1u, std::thread::hardware_concurrency());
  char* end = nullptr;
  const unsigned long long n = std::strtoull(env, &end, 10);
  if (*end != '\0' || n == 0 || env[0] == '-') {
    throw ConfigError({std::string("URAE_THREADS: expected a positive integer, got '") + env + "'"});
  }
  return static_cast<std::size_t>(n);
}

}  // namespace urae::harness
