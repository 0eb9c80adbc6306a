// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "urae/adapters.hpp"
#include "urae/harness.hpp"
#include "urae/kernels.hpp"
#include "urae/rng.hpp"
#include "urae/theorem.hpp"

#ifndef URAE_VERSION
#define URAE_VERSION "0.0.0"
#endif

namespace urae::harness {

std::string_view version() noexcept { return URAE_VERSION; }

namespace {

namespace fs = std::filesystem;

// Sub-seed slots under Stream::Experiment.
enum Slot : std::uint64_t {
  kProblem = 0,
  kTrials = 1,
  kData = 10,
  kTeacher = 11,
  kStudent = 12,
  kHeldOut = 13,
  kDeviation = 14,
  kSamples = 15,
  kLora = 20,
  kPairs = 100,
};

std::uint64_t sub_seed(const Json& cfg, std::uint64_t slot) {
  return derive_seed(cfg.at("seed").get<std::uint64_t>(), Stream::Experiment, slot);
}

struct Outputs {
  fs::path dir;
  std::vector<fs::path> files;

  void csv(const std::string& name, const std::vector<Column>& schema, const std::vector<Row>& rows) {
    emit_report(rows, schema, dir / name);
    files.push_back(dir / name);
  }
  std::uint64_t archive(const std::string& name, const io::TensorArchive& ar) {
    const auto n = io::write_archive(ar, dir / name);
    files.push_back(dir / name);
    return n;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Rethrows the
// failure with the lowest index so errors do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed = std::numeric_limits<std::size_t>::max();
  std::exception_ptr failure;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (i < failed) {
              failed = i;
              failure = std::current_exception();
            }
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<double> reals(const Json& v) { return v.get<std::vector<double>>(); }

// ---------------------------------------------------------------- theorem

Json run_theorem(const Json& cfg, Outputs& out, std::size_t threads, const std::string& csv_name) {
  const auto prob = theory::make_problem(cfg["problem.n"], cfg["problem.d"], cfg["problem.sigma"],
                                         cfg["problem.ref_distance"], sub_seed(cfg, kProblem));
  const double eta = cfg["gd.eta"];
  const std::size_t steps = cfg["gd.steps"];
  const auto rows = theory::sweep_p(prob, reals(cfg["p_grid"]), eta, steps, cfg["trials"],
                                    sub_seed(cfg, kTrials), {threads});

  const std::vector<Column> schema = {
      {"p", ColumnType::Real},     {"emp_mean", ColumnType::Real}, {"emp_stderr", ColumnType::Real},
      {"decay", ColumnType::Real}, {"noise", ColumnType::Real},    {"refgap", ColumnType::Real},
      {"bound_total", ColumnType::Real}};
  std::vector<Row> table;
  Json points = Json::array();
  bool all = true;
  for (const auto& r : rows) {
    table.push_back({r.p, r.empirical.mean, r.empirical.std_error, r.bound.decay_term,
                     r.bound.noise_term, r.bound.ref_gap_term, r.bound.total});
    const bool holds = r.empirical.mean <= r.bound.total + 2.0 * r.empirical.std_error;
    all = all && holds;
    points.push_back({{"p", r.p},
                      {"empirical_mean", r.empirical.mean},
                      {"empirical_stderr", r.empirical.std_error},
                      {"decay", r.bound.decay_term},
                      {"noise", r.bound.noise_term},
                      {"refgap", r.bound.ref_gap_term},
                      {"bound_total", r.bound.total},
                      {"empirical_le_bound", holds},
                      {"noise_coefficient", r.bound.noise_coefficient},
                      {"mean_delta_sq", r.bound.mean_delta_sq},
                      {"noise_eta_sq_scaled", r.bound.noise_term_printed},
                      {"bound_total_eta_sq_scaled", r.bound.total_printed}});
  }
  out.csv(csv_name, schema, table);
  const double lmax = theory::lambda_max(prob.phi);
  return {{"lambda_max", lmax},
          {"eta_lambda_max", eta * lmax},
          {"rank", rows.empty() ? 0 : rows.front().bound.eigenvalues.size()},
          {"empirical_le_bound_all", all},
          {"points", points}};
}

// ---------------------------------------------------------------- toy flow

struct ToySetup {
  std::vector<std::vector<double>> means;
  flow::FlowModelConfig model;
  flow::FlowDataset data;
};

ToySetup toy_setup(const Json& cfg) {
  ToySetup s;
  const auto flat = reals(cfg["data.means"]);
  for (std::size_t i = 0; i < flat.size(); i += 2) s.means.push_back({flat[i], flat[i + 1]});
  s.model.dim = 2;
  s.model.n_classes = s.means.size();
  s.model.width = cfg["model.width"];
  s.model.depth = cfg["model.depth"];
  s.model.class_embed_dim = cfg["model.class_embed_dim"];
  s.model.time_freqs = cfg["model.time_freqs"];
  s.model.guidance_freqs = cfg["model.guidance_freqs"];
  s.data = flow::make_mixture(s.means, cfg["data.stddev"], cfg["data.per_class"], sub_seed(cfg, kData));
  return s;
}

flow::Trained<flow::ToyFlowModel> train_teacher(const Json& cfg, const ToySetup& s) {
  flow::TrainConfig tc;
  tc.steps = cfg["train.steps"];
  tc.batch_size = cfg["train.batch_size"];
  tc.learning_rate = cfg["train.learning_rate"];
  tc.cond_dropout = cfg["train.cond_dropout"];
  tc.eval_repeats = cfg["train.eval_repeats"];
  tc.seed = sub_seed(cfg, kTeacher);
  return flow::train_flow_model(s.data, s.model, tc);
}

flow::DistillConfig distill_config(const Json& cfg) {
  flow::DistillConfig dc;
  dc.steps = cfg["distill.steps"];
  dc.batch_size = cfg["distill.batch_size"];
  dc.learning_rate = cfg["distill.learning_rate"];
  dc.g_min = cfg["distill.g_min"];
  dc.g_max = cfg["distill.g_max"];
  dc.eval_repeats = cfg["distill.eval_repeats"];
  dc.seed = sub_seed(cfg, kStudent);
  return dc;
}

const std::vector<Column> kLossSchema = {{"step", ColumnType::Integer}, {"loss", ColumnType::Real}};
const std::vector<Column> kSampleSchema = {
    {"x", ColumnType::Real}, {"y", ColumnType::Real}, {"label", ColumnType::Integer}};

std::vector<Row> loss_rows(const flow::TrainReport& r) {
  std::vector<Row> rows;
  rows.reserve(r.loss_trace.size());
  for (std::size_t i = 0; i < r.loss_trace.size(); ++i) rows.push_back({std::uint64_t{i}, r.loss_trace[i]});
  return rows;
}

double window_mean(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  end = std::min(end, v.size());
  if (begin >= end) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += v[i];
  return s / static_cast<double>(end - begin);
}

Json trace_summary(const flow::TrainReport& r) {
  const std::size_t n = r.loss_trace.size();
  Json j = {{"steps", r.steps}, {"final_eval_loss", r.final_eval_loss}};
  if (n > 0) {
    j["first_loss"] = r.loss_trace.front();
    j["first_100_mean"] = window_mean(r.loss_trace, 0, 100);
    j["last_100_mean"] = window_mean(r.loss_trace, n > 100 ? n - 100 : 0, n);
  }
  return j;
}

// Samples class i % n_classes for row i and compares per-class means.
Json sample_cloud(const Json& cfg, const ToySetup& s, const flow::ToyFlowModel& model, double g,
                  Outputs& out) {
  const std::size_t count = cfg["sample.count"];
  std::vector<std::size_t> ys(count);
  for (std::size_t i = 0; i < count; ++i) ys[i] = i % s.model.n_classes;
  const auto z = flow::euler_sample_batch(model, ys, g, cfg["sample.steps"], sub_seed(cfg, kSamples));
  std::vector<Row> rows;
  flow::FlowDataset cloud{2, s.model.n_classes, z, ys};
  for (std::size_t i = 0; i < count; ++i) rows.push_back({z[2 * i], z[2 * i + 1], std::uint64_t{ys[i]}});
  out.csv("samples.csv", kSampleSchema, rows);

  Json classes = Json::array();
  double worst = 0.0;
  const auto means = flow::class_means(cloud);
  for (std::size_t c = 0; c < s.model.n_classes; ++c) {
    const double err = std::hypot(means[c][0] - s.means[c][0], means[c][1] - s.means[c][1]);
    worst = std::max(worst, err);
    classes.push_back({{"label", c}, {"sample_mean", means[c]}, {"true_mean", s.means[c]}, {"distance", err}});
  }
  return {{"count", count}, {"g", g}, {"euler_steps", cfg["sample.steps"]}, {"classes", classes},
          {"max_mean_distance", count >= s.model.n_classes ? Json(worst) : Json(nullptr)}};
}

Json flow_conventions() {
  return {{"schedule", "z_t = (1 - t) z0 + t eps, t ~ U[0, 1]"},
          {"target", "eps - z0"},
          {"sampler", "Euler from t = 1 to t = 0"},
          {"optimizer", "gradient descent, constant step"}};
}

Json run_toy_train(const Json& cfg, Outputs& out) {
  const ToySetup s = toy_setup(cfg);
  const auto teacher = train_teacher(cfg, s);
  out.csv("train_loss.csv", kLossSchema, loss_rows(teacher.report));
  out.archive("model.urae", model_to_archive(teacher.model));
  return {{"conventions", flow_conventions()},
          {"train", trace_summary(teacher.report)},
          {"samples", sample_cloud(cfg, s, teacher.model, cfg["sample.g"], out)}};
}

// Mean squared gap between student at g and the teacher's CFG output at g
// over a held-out batch.
double distill_gap(const flow::ToyFlowModel& student, const flow::ToyFlowModel& teacher,
                   const flow::FlowDataset& held_out, double g, std::uint64_t seed) {
  return flow::distill_step_loss(student, teacher, flow::make_eval_batch(held_out, seed, 0), g).loss;
}

struct Distilled {
  ToySetup setup;
  flow::Trained<flow::ToyFlowModel> teacher;
  flow::Trained<flow::ToyFlowModel> student;
  Json summary;
};

Distilled distill_pipeline(const Json& cfg) {
  ToySetup s = toy_setup(cfg);
  auto teacher = train_teacher(cfg, s);
  const auto dc = distill_config(cfg);
  auto student = flow::distill_guided_student(teacher.model, s.data, dc);

  flow::FlowModelConfig sc = s.model;
  sc.guided = true;
  const auto untrained = flow::ToyFlowModel::init(sc, derive_seed(dc.seed, Stream::Init));
  const auto held = flow::make_mixture(s.means, cfg["data.stddev"], cfg["distill.held_out_per_class"],
                                       sub_seed(cfg, kHeldOut));
  const double trained_gap = distill_gap(student.model, teacher.model, held, 1.0, sub_seed(cfg, kDeviation));
  const double untrained_gap = distill_gap(untrained, teacher.model, held, 1.0, sub_seed(cfg, kDeviation));
  Json summary = {{"conventions", flow_conventions()},
                  {"teacher", trace_summary(teacher.report)},
                  {"distill", trace_summary(student.report)},
                  {"g_range", {dc.g_min, dc.g_max}},
                  {"held_out_gap_g1", trained_gap},
                  {"held_out_gap_g1_untrained", untrained_gap},
                  {"gap_improvement", untrained_gap / trained_gap}};
  return {std::move(s), std::move(teacher), std::move(student), std::move(summary)};
}

Json run_toy_distill(const Json& cfg, Outputs& out) {
  Distilled d = distill_pipeline(cfg);
  out.csv("teacher_loss.csv", kLossSchema, loss_rows(d.teacher.report));
  out.csv("distill_loss.csv", kLossSchema, loss_rows(d.student.report));
  out.archive("teacher.urae", model_to_archive(d.teacher.model));
  out.archive("student.urae", model_to_archive(d.student.model));
  d.summary["samples"] = sample_cloud(cfg, d.setup, d.student.model, cfg["sample.g"], out);
  return d.summary;
}

Json run_cfg_adapt(const Json& cfg, Outputs& out, std::size_t threads) {
  Distilled d = distill_pipeline(cfg);
  const std::size_t pairs = cfg["adapt.pairs"];
  const auto gs = reals(cfg["adapt.g_train"]);
  const auto shift = reals(cfg["adapt.shift"]);

  std::vector<std::uint64_t> pair_seeds(pairs);
  for (std::size_t k = 0; k < pairs; ++k) pair_seeds[k] = sub_seed(cfg, kPairs + k);

  std::vector<flow::Trained<flow::ToyFlowModel>> runs(pairs * gs.size(),
                                                      {d.student.model, flow::TrainReport{}});
  parallel_for(runs.size(), threads, [&](std::size_t job) {
    const std::size_t k = job / gs.size();
    const auto fresh = flow::translate(
        flow::make_mixture(d.setup.means, cfg["data.stddev"], cfg["adapt.per_class"],
                           derive_seed(pair_seeds[k], Stream::Dataset, 0)),
        shift);
    const auto held = flow::translate(
        flow::make_mixture(d.setup.means, cfg["data.stddev"], cfg["adapt.held_out_per_class"],
                           derive_seed(pair_seeds[k], Stream::Dataset, 1)),
        shift);
    flow::AdaptConfig ac;
    ac.steps = cfg["adapt.steps"];
    ac.batch_size = cfg["adapt.batch_size"];
    ac.learning_rate = cfg["adapt.learning_rate"];
    ac.eval_repeats = cfg["adapt.eval_repeats"];
    ac.seed = pair_seeds[k];
    ac.g_train = gs[job % gs.size()];
    runs[job] = flow::adapt_student(d.student.model, fresh, held, ac);
  });

  std::vector<Row> trace;
  for (std::size_t job = 0; job < runs.size(); ++job) {
    const auto& lt = runs[job].report.loss_trace;
    for (std::size_t st = 0; st < lt.size(); ++st) {
      trace.push_back({pair_seeds[job / gs.size()], gs[job % gs.size()], std::uint64_t{st}, lt[st]});
    }
  }
  out.csv("adapt_trace.csv",
          {{"seed", ColumnType::Integer}, {"g_train", ColumnType::Real}, {"step", ColumnType::Integer},
           {"loss", ColumnType::Real}},
          trace);

  // A pair counts for g only when g's loss is strictly lowest in that pair.
  std::vector<std::uint64_t> wins(gs.size(), 0);
  std::vector<double> sums(gs.size(), 0.0);
  Json pair_json = Json::array();
  for (std::size_t k = 0; k < pairs; ++k) {
    std::size_t best = 0;
    bool tie = false;
    Json losses = Json::array();
    for (std::size_t j = 0; j < gs.size(); ++j) {
      const double l = runs[k * gs.size() + j].report.final_eval_loss;
      sums[j] += l;
      losses.push_back(l);
      const double b = runs[k * gs.size() + best].report.final_eval_loss;
      if (j > 0 && l < b) {
        best = j;
        tie = false;
      } else if (j > 0 && l == b) {
        tie = true;
      }
    }
    if (!tie) ++wins[best];
    pair_json.push_back({{"seed", pair_seeds[k]}, {"final_eval_loss", losses}});
  }
  std::vector<Row> summary_rows;
  Json by_g = Json::array();
  for (std::size_t j = 0; j < gs.size(); ++j) {
    const double mean = sums[j] / static_cast<double>(pairs);
    summary_rows.push_back({gs[j], mean, wins[j]});
    by_g.push_back({{"g_train", gs[j]}, {"final_eval_loss_mean", mean}, {"win_count", wins[j]}});
  }
  out.csv("adapt_summary.csv",
          {{"g_train", ColumnType::Real}, {"final_eval_loss_mean", ColumnType::Real},
           {"win_count", ColumnType::Integer}},
          summary_rows);

  // Samples from the first pair's model adapted at the smallest g_train.
  const std::size_t lowest = static_cast<std::size_t>(std::min_element(gs.begin(), gs.end()) - gs.begin());
  ToySetup shifted = d.setup;
  for (auto& m : shifted.means) {
    m[0] += shift[0];
    m[1] += shift[1];
  }
  Json summary = d.summary;
  summary["adapt"] = {{"pairs", pair_json}, {"by_g_train", by_g}};
  summary["samples"] = sample_cloud(cfg, shifted, runs[lowest].model, cfg["sample.g"], out);
  summary["samples"]["adapted_g_train"] = gs[lowest];
  return summary;
}

// ---------------------------------------------------------------- adapters

std::string pick_entry(const io::TensorArchive& ar, const std::string& wanted, const std::string& what) {
  if (!wanted.empty()) {
    if (!ar.contains(wanted)) throw ValidationError("entry: '" + wanted + "' not found in " + what);
    return wanted;
  }
  if (ar.entries.size() != 1) {
    throw ValidationError("entry: " + what + " holds " + std::to_string(ar.entries.size()) +
                          " tensors; name one with 'entry'");
  }
  return ar.entries.front().name;
}

io::TensorArchive replace_entry(io::TensorArchive ar, const std::string& name, WeightMatrix w) {
  for (auto& e : ar.entries) {
    if (e.name == name) e.data = std::move(w);
  }
  return ar;
}

double relative_error(const WeightMatrix& approx, const WeightMatrix& exact) {
  const double denom = frob_norm(exact);
  return frob_norm(approx - exact) / (denom > 0.0 ? denom : 1.0);
}

Json run_adapter_split(const Json& cfg, Outputs& out) {
  const auto input = io::read_archive(cfg["input"].get<std::string>());
  const std::string entry = pick_entry(input, cfg["entry"], "input archive");
  const WeightMatrix& w = input.get(entry);
  const std::size_t rank = cfg["rank"];
  const auto mode = *adapters::parse_mode(cfg["mode"].get<std::string>());

  adapters::SplitResult split;
  switch (mode) {
    case adapters::AdapterMode::MinorSvd: split = adapters::split_minor(w, rank); break;
    case adapters::AdapterMode::MajorSvd: split = adapters::split_major(w, rank); break;
    case adapters::AdapterMode::Lora:
      split = {w, adapters::init_lora(w.shape(), rank, sub_seed(cfg, kLora))};
      break;
  }

  io::TensorArchive adapter;
  adapter.entries = {{"a", split.adapter.a}, {"b", split.adapter.b}};
  adapter.metadata = {{"mode", std::string(adapters::to_string(mode))},
                      {"rank", std::to_string(rank)},
                      {"seed", std::to_string(cfg["seed"].get<std::uint64_t>())},
                      {"entry", entry},
                      {"base_rows", std::to_string(w.rows())},
                      {"base_cols", std::to_string(w.cols())},
                      {"adapter_scale", "1"},
                      {"tool_version", std::string(version())}};
  if (mode == adapters::AdapterMode::Lora) adapter.metadata["lora_init_stddev"] = "1/sqrt(rank)";

  const auto residual_bytes = out.archive("residual.urae", replace_entry(input, entry, split.residual));
  const auto adapter_bytes = out.archive("adapter.urae", adapter);
  const WeightMatrix product = split.adapter.product();
  return {{"entry", entry},
          {"shape", {w.rows(), w.cols()}},
          {"mode", adapters::to_string(mode)},
          {"rank", rank},
          {"adapter_parameters", split.adapter.parameter_count()},
          {"base_parameters", w.size()},
          {"reconstruction_rel_error", relative_error(split.residual + product, w)},
          {"adapter_product_frob", frob_norm(product)},
          {"residual_bytes", residual_bytes},
          {"adapter_bytes", adapter_bytes}};
}

std::size_t metadata_count(const io::TensorArchive& ar, const std::string& key) {
  const auto it = ar.metadata.find(key);
  if (it == ar.metadata.end()) throw ValidationError("adapter archive: metadata '" + key + "' missing");
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used == it->second.size()) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw ValidationError("adapter archive: metadata '" + key + "' is not an integer");
}

Json run_adapter_merge(const Json& cfg, Outputs& out) {
  const auto base = io::read_archive(cfg["base"].get<std::string>());
  const auto ad = io::read_archive(cfg["adapter"].get<std::string>());
  std::string wanted = cfg["entry"];
  if (wanted.empty() && ad.metadata.contains("entry")) wanted = ad.metadata.at("entry");
  const std::string entry = pick_entry(base, wanted, "base archive");
  const WeightMatrix& w = base.get(entry);

  const auto mode_it = ad.metadata.find("mode");
  const auto mode = mode_it == ad.metadata.end() ? std::nullopt : adapters::parse_mode(mode_it->second);
  if (!mode) throw ValidationError("adapter archive: metadata 'mode' missing or unknown");
  adapters::AdapterPair pair{ad.get("a"), ad.get("b"), metadata_count(ad, "rank"), *mode, w.shape()};
  if (pair.a.cols() != pair.rank) throw ShapeError("adapter archive: rank metadata disagrees with factor shapes");
  if (metadata_count(ad, "base_rows") != w.rows() || metadata_count(ad, "base_cols") != w.cols()) {
    throw ShapeError("adapter was built for a different base shape than " + to_string(w.shape()));
  }
  const WeightMatrix merged = adapters::merge(w, pair);
  const auto bytes = out.archive("merged.urae", replace_entry(base, entry, merged));
  return {{"entry", entry},
          {"shape", {w.rows(), w.cols()}},
          {"mode", adapters::to_string(*mode)},
          {"rank", pair.rank},
          {"update_frob", frob_norm(merged - w)},
          {"merged_bytes", bytes}};
}

Json run_inspect(const Json& cfg, Outputs& out) {
  const fs::path path = cfg["input"].get<std::string>();
  const auto ar = io::read_archive(path);
  Json entries = Json::array();
  std::vector<Row> rows;
  std::uint64_t payload = 0;
  for (const auto& e : ar.entries) {
    const double norm = frob_norm(e.data);
    entries.push_back({{"name", e.name}, {"rows", e.data.rows()}, {"cols", e.data.cols()}, {"frob_norm", norm}});
    rows.push_back({e.name, std::uint64_t{e.data.rows()}, std::uint64_t{e.data.cols()}, norm});
    payload += 8 * e.data.size();
  }
  out.csv("inspect.csv",
          {{"name", ColumnType::Text}, {"rows", ColumnType::Integer}, {"cols", ColumnType::Integer},
           {"frob_norm", ColumnType::Real}},
          rows);
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  return {{"entries", entries},
          {"metadata", ar.metadata},
          {"payload_bytes", payload},
          {"file_bytes", ec ? Json(nullptr) : Json(size)}};
}

}  // namespace

RunResult run_experiment(Kind kind, const Json& config, std::size_t threads) {
  Outputs out;
  out.dir = config.at("output_dir").get<std::string>();
  std::error_code ec;
  fs::create_directories(out.dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out.dir.string() + "': " + ec.message());

  Json summary;
  switch (kind) {
    case Kind::Theorem1: summary = run_theorem(config, out, threads, "theorem1.csv"); break;
    case Kind::Fig2Sweep: summary = run_theorem(config, out, threads, "fig2_sweep.csv"); break;
    case Kind::ToyTrain: summary = run_toy_train(config, out); break;
    case Kind::ToyDistill: summary = run_toy_distill(config, out); break;
    case Kind::CfgAdapt: summary = run_cfg_adapt(config, out, threads); break;
    case Kind::AdapterOp:
      summary = config["op"] == "split" ? run_adapter_split(config, out) : run_adapter_merge(config, out);
      break;
    case Kind::ArchiveInspect: summary = run_inspect(config, out); break;
  }

  Json files = Json::array();
  for (const auto& f : out.files) files.push_back(f.filename().string());
  Json report = {{"config", config},
                 {"environment",
                  {{"tool", "urae"},
                   {"version", version()},
                   {"kernels", kernels::name(kernels::active().backend)}}},
                 {"summary", summary},
                 {"outputs", files}};
  write_text(out.dir / "report.json", report.dump(2) + "\n");
  out.files.push_back(out.dir / "report.json");
  return {std::move(report), std::move(out.files)};
}

// ---------------------------------------------------------------- errors

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Numerical:
    case ErrorKind::Divergence:
      return 3;
    case ErrorKind::Io:
    case ErrorKind::Format:
    case ErrorKind::Corruption:
      return 4;
    default:
      return 2;
  }
}

Json failure_report(const std::exception& e) {
  Json err = {{"message", e.what()}};
  if (const auto* ue = dynamic_cast<const Error*>(&e)) {
    err["kind"] = to_string(ue->kind());
    err["exit_code"] = exit_code(ue->kind());
    if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) err["violations"] = ce->violations();
    if (const auto* de = dynamic_cast<const DivergenceError*>(&e)) err["step"] = de->step();
  } else {
    err["kind"] = "internal";
    err["exit_code"] = 1;
  }
  return {{"error", err}};
}

// ---------------------------------------------------------------- models

io::TensorArchive model_to_archive(const flow::ToyFlowModel& model) {
  io::TensorArchive ar;
  for (const auto& b : model.layout()) {
    const auto v = model.view(b);
    ar.entries.push_back({b.name, WeightMatrix(b.rows, b.cols, {v.begin(), v.end()})});
  }
  const auto& c = model.config();
  ar.metadata = {{"kind", "toy-flow-model"},
                 {"dim", std::to_string(c.dim)},
                 {"n_classes", std::to_string(c.n_classes)},
                 {"width", std::to_string(c.width)},
                 {"depth", std::to_string(c.depth)},
                 {"class_embed_dim", std::to_string(c.class_embed_dim)},
                 {"time_freqs", std::to_string(c.time_freqs)},
                 {"guidance_freqs", std::to_string(c.guidance_freqs)},
                 {"guided", c.guided ? "true" : "false"},
                 {"tool_version", std::string(version())}};
  return ar;
}

flow::ToyFlowModel model_from_archive(const io::TensorArchive& ar) {
  flow::FlowModelConfig c;
  c.dim = metadata_count(ar, "dim");
  c.n_classes = metadata_count(ar, "n_classes");
  c.width = metadata_count(ar, "width");
  c.depth = metadata_count(ar, "depth");
  c.class_embed_dim = metadata_count(ar, "class_embed_dim");
  c.time_freqs = metadata_count(ar, "time_freqs");
  c.guidance_freqs = metadata_count(ar, "guidance_freqs");
  const auto g = ar.metadata.find("guided");
  if (g == ar.metadata.end() || (g->second != "true" && g->second != "false")) {
    throw ValidationError("model archive: metadata 'guided' missing or not a boolean");
  }
  c.guided = g->second == "true";
  auto model = flow::ToyFlowModel::zeros(c);
  if (ar.entries.size() != model.layout().size()) throw ValidationError("model archive: wrong number of blocks");
  for (const auto& b : model.layout()) {
    const WeightMatrix& w = ar.get(b.name);
    if (w.rows() != b.rows || w.cols() != b.cols) {
      throw ShapeError("model archive: block '" + b.name + "' is " + to_string(w.shape()));
    }
    std::copy(w.data().begin(), w.data().end(), model.view(b).begin());
  }
  return model;
}

}  // namespace urae::harness
