// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cmath>
#include <random>
#include <string>

#include "urae/error.hpp"
#include "urae/flow.hpp"
#include "urae/kernels.hpp"
#include "urae/rng.hpp"

namespace urae::flow {

namespace {

void check_data(const FlowDataset& data, const FlowModelConfig& c, const char* what) {
  if (data.size() == 0) throw DomainError(std::string(what) + ": empty dataset");
  if (data.dim != c.dim) throw ShapeError(std::string(what) + ": data dimension differs from model");
  if (data.points.size() != data.size() * data.dim) throw ShapeError(std::string(what) + ": ragged dataset");
  for (std::size_t y : data.labels) {
    if (y >= c.n_classes) throw DomainError(std::string(what) + ": label out of range");
  }
}

void check_common(std::size_t batch_size, double lr, const char* what) {
  if (batch_size == 0) throw DomainError(std::string(what) + ": batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw DomainError(std::string(what) + ": learning rate must be positive");
}

template <class StepFn>
TrainReport run_loop(ToyFlowModel& model, std::size_t steps, double lr, std::uint64_t seed,
                     StepFn&& step_fn) {
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.steps = steps;
  report.seed = seed;
  report.loss_trace.reserve(steps);
  auto params = model.parameters();
  for (std::size_t s = 0; s < steps; ++s) {
    LossAndGrad lg = step_fn(model, s);
    bool finite = std::isfinite(lg.loss);
    for (double g : lg.grad) finite = finite && std::isfinite(g);
    if (!finite) throw DivergenceError("training diverged: non-finite loss or gradient", s);
    report.loss_trace.push_back(lg.loss);
    kernels::axpy(-lr, lg.grad, params);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

double uniform_g(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
}

}  // namespace

FlowBatch draw_batch(const FlowDataset& data, std::size_t batch_size, double cond_dropout,
                     std::size_t null_class, std::uint64_t seed, std::uint64_t step) {
  if (data.size() == 0) throw DomainError("draw_batch: empty dataset");
  Rng rng = make_rng(seed, Stream::Batch, step);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  FlowBatch batch;
  batch.dim = data.dim;
  batch.z0.reserve(batch_size * data.dim);
  batch.eps.reserve(batch_size * data.dim);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t idx = pick(rng);
    for (std::size_t d = 0; d < data.dim; ++d) {
      batch.z0.push_back(data.points[idx * data.dim + d]);
      batch.eps.push_back(normal(rng));
    }
    batch.t.push_back(std::generate_canonical<double, 53>(rng));
    const double u = std::generate_canonical<double, 53>(rng);
    batch.y.push_back(u < cond_dropout ? null_class : data.labels[idx]);
  }
  return batch;
}

FlowBatch make_eval_batch(const FlowDataset& data, std::uint64_t seed, std::uint64_t index) {
  Rng rng = make_rng(seed, Stream::Eval, index);
  std::normal_distribution<double> normal(0.0, 1.0);
  FlowBatch batch;
  batch.dim = data.dim;
  batch.z0 = data.points;
  batch.y = data.labels;
  batch.eps.resize(batch.z0.size());
  for (double& e : batch.eps) e = normal(rng);
  batch.t.resize(data.size());
  for (double& t : batch.t) t = std::generate_canonical<double, 53>(rng);
  return batch;
}

double evaluate_fm_loss(const ToyFlowModel& model, const FlowDataset& data,
                        std::optional<double> g, std::size_t repeats, std::uint64_t seed) {
  check_data(data, model.config(), "evaluate_fm_loss");
  if (repeats == 0) throw DomainError("evaluate_fm_loss: repeats must be positive");
  double total = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    total += fm_loss_and_grad(model, make_eval_batch(data, seed, r), g).loss;
  }
  return total / static_cast<double>(repeats);
}

Trained<ToyFlowModel> train_flow_model(const FlowDataset& data, const FlowModelConfig& model_config,
                                       const TrainConfig& config) {
  if (model_config.guided) throw ContractError("train_flow_model: expects an unguided model");
  check_data(data, model_config, "train_flow_model");
  check_common(config.batch_size, config.learning_rate, "train_flow_model");
  if (!(config.cond_dropout >= 0.0 && config.cond_dropout <= 1.0)) {
    throw DomainError("train_flow_model: cond_dropout outside [0,1]");
  }
  ToyFlowModel model = ToyFlowModel::init(model_config, derive_seed(config.seed, Stream::Init));
  const std::uint64_t batch_seed = derive_seed(config.seed, Stream::Batch);
  TrainReport report = run_loop(model, config.steps, config.learning_rate, config.seed,
                                [&](const ToyFlowModel& m, std::size_t s) {
                                  const FlowBatch b =
                                      draw_batch(data, config.batch_size, config.cond_dropout,
                                                 model_config.null_class(), batch_seed, s);
                                  return fm_loss_and_grad(m, b, std::nullopt);
                                });
  report.final_eval_loss = evaluate_fm_loss(model, data, std::nullopt, config.eval_repeats,
                                            derive_seed(config.seed, Stream::Eval));
  return {std::move(model), std::move(report)};
}

Trained<ToyFlowModel> distill_guided_student(const ToyFlowModel& teacher, const FlowDataset& data,
                                             const DistillConfig& config) {
  if (teacher.guided()) throw ContractError("distill: teacher must be an unguided model");
  check_data(data, teacher.config(), "distill");
  check_common(config.batch_size, config.learning_rate, "distill");
  if (!(config.g_min <= config.g_max) || !std::isfinite(config.g_min) || !std::isfinite(config.g_max)) {
    throw DomainError("distill: need finite g_min <= g_max");
  }
  FlowModelConfig student_config = teacher.config();
  student_config.guided = true;
  ToyFlowModel student = ToyFlowModel::init(student_config, derive_seed(config.seed, Stream::Init));
  const std::uint64_t batch_seed = derive_seed(config.seed, Stream::Batch);
  const std::uint64_t g_seed = derive_seed(config.seed, Stream::Guidance);
  TrainReport report = run_loop(student, config.steps, config.learning_rate, config.seed,
                                [&](const ToyFlowModel& m, std::size_t s) {
                                  const FlowBatch b = draw_batch(data, config.batch_size, 0.0,
                                                                 student_config.null_class(),
                                                                 batch_seed, s);
                                  Rng rng = make_rng(g_seed, Stream::Guidance, s);
                                  std::vector<double> g(b.size());
                                  for (double& x : g) x = uniform_g(rng, config.g_min, config.g_max);
                                  return distill_step_loss(m, teacher, b, std::span<const double>(g));
                                });

  // Held-out distillation loss on fresh (eps, t, g) draws over the whole dataset.
  if (config.eval_repeats == 0) throw DomainError("distill: eval_repeats must be positive");
  double total = 0.0;
  const std::uint64_t eval_seed = derive_seed(config.seed, Stream::Eval);
  for (std::size_t r = 0; r < config.eval_repeats; ++r) {
    const FlowBatch b = make_eval_batch(data, eval_seed, r);
    Rng rng = make_rng(eval_seed, Stream::Guidance, r);
    std::vector<double> g(b.size());
    for (double& x : g) x = uniform_g(rng, config.g_min, config.g_max);
    total += distill_step_loss(student, teacher, b, std::span<const double>(g)).loss;
  }
  report.final_eval_loss = total / static_cast<double>(config.eval_repeats);
  return {std::move(student), std::move(report)};
}

Trained<ToyFlowModel> adapt_student(const ToyFlowModel& student, const FlowDataset& new_data,
                                    const FlowDataset& held_out, const AdaptConfig& config) {
  if (!student.guided()) throw ContractError("adapt_student: student must be guided");
  if (!(config.g_train >= 1.0) || !std::isfinite(config.g_train)) {
    throw DomainError("adapt_student: g_train must be >= 1");
  }
  check_data(new_data, student.config(), "adapt_student");
  check_data(held_out, student.config(), "adapt_student held-out");
  check_common(config.batch_size, config.learning_rate, "adapt_student");
  ToyFlowModel model = student;
  const std::uint64_t batch_seed = derive_seed(config.seed, Stream::Batch);
  TrainReport report = run_loop(model, config.steps, config.learning_rate, config.seed,
                                [&](const ToyFlowModel& m, std::size_t s) {
                                  const FlowBatch b = draw_batch(new_data, config.batch_size, 0.0,
                                                                 m.config().null_class(),
                                                                 batch_seed, s);
                                  return fm_loss_and_grad(m, b, config.g_train);
                                });
  report.final_eval_loss = evaluate_fm_loss(model, held_out, config.g_train, config.eval_repeats,
                                            derive_seed(config.seed, Stream::Eval));
  return {std::move(model), std::move(report)};
}

}  // namespace urae::flow
