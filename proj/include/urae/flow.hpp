// SPDX-License-Identifier: Apache-2.0
//
// Toy flow-matching stack on low-dimensional labelled data.
//
// Schedule: z_t = (1 - t) z0 + t eps with t in [0, 1]. The network predicts
// the velocity eps - z0 and the flow-matching loss is ||(eps - z0) - pred||^2
// averaged over the batch. Sampling integrates from t = 1 (pure noise) to
// t = 0 with explicit Euler steps z <- z - (1/steps) v.
//
// Network input is [z_t | time features | class embedding | guidance
// features], where time and guidance features are fixed sinusoids and the
// class embedding is a learned table with one extra row for the null
// condition. Guidance features are present only when `guided` is set.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace urae::flow {

struct FlowModelConfig {
  std::size_t dim = 2;
  std::size_t n_classes = 2;
  std::size_t width = 64;
  std::size_t depth = 2;  // hidden layers
  std::size_t class_embed_dim = 8;
  std::size_t time_freqs = 8;
  std::size_t guidance_freqs = 8;
  bool guided = false;

  [[nodiscard]] std::size_t null_class() const noexcept { return n_classes; }
  [[nodiscard]] std::size_t input_dim() const noexcept {
    return dim + 2 * time_freqs + class_embed_dim + (guided ? 2 * guidance_freqs : 0);
  }
  friend bool operator==(const FlowModelConfig&, const FlowModelConfig&) = default;
};

// Angular frequencies of the sinusoidal features: (pi/2) * 2^(j/2).
[[nodiscard]] double feature_frequency(std::size_t j) noexcept;
// Guidance scales are divided by this before the sinusoidal encoding.
inline constexpr double kGuidanceFeatureScale = 4.0;

struct ParameterBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

class ToyFlowModel {
 public:
  // Weights ~ N(0, 1/fan_in), biases 0, class embedding ~ N(0, 1).
  [[nodiscard]] static ToyFlowModel init(const FlowModelConfig& config, std::uint64_t seed);
  [[nodiscard]] static ToyFlowModel zeros(const FlowModelConfig& config);

  [[nodiscard]] const FlowModelConfig& config() const noexcept { return config_; }
  [[nodiscard]] bool guided() const noexcept { return config_.guided; }

  [[nodiscard]] std::span<double> parameters() noexcept { return params_; }
  [[nodiscard]] std::span<const double> parameters() const noexcept { return params_; }
  [[nodiscard]] const std::vector<ParameterBlock>& layout() const noexcept { return layout_; }
  [[nodiscard]] const ParameterBlock& block(std::string_view name) const;
  [[nodiscard]] std::span<double> view(const ParameterBlock& b) noexcept;
  [[nodiscard]] std::span<const double> view(const ParameterBlock& b) const noexcept;

  friend bool operator==(const ToyFlowModel& a, const ToyFlowModel& b) {
    return a.config_ == b.config_ && a.params_ == b.params_;
  }

 private:
  explicit ToyFlowModel(const FlowModelConfig& config);

  FlowModelConfig config_;
  std::vector<ParameterBlock> layout_;
  std::vector<double> params_;
};

// Rows of a batch share one `dim`. Conditions y are class indices or the
// model's null_class().
struct FlowBatch {
  std::size_t dim = 2;
  std::vector<double> z0;   // B x dim
  std::vector<double> eps;  // B x dim
  std::vector<double> t;    // B
  std::vector<std::size_t> y;

  [[nodiscard]] std::size_t size() const noexcept { return t.size(); }
};

// Model evaluation points for prediction without a z0/eps pair.
struct ModelInput {
  std::span<const double> z;  // B x dim
  std::span<const double> t;  // B
  std::span<const std::size_t> y;
  std::span<const double> g;  // B, or empty for unguided models
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // same layout as ToyFlowModel::parameters()
};

[[nodiscard]] std::vector<double> interpolate(std::span<const double> z0,
                                              std::span<const double> eps, double t);

// eps_null + g * (eps_cond - eps_null); returns eps_cond unchanged when g == 1.
[[nodiscard]] std::vector<double> cfg_combine(std::span<const double> eps_null,
                                              std::span<const double> eps_cond, double g);

// B x dim predictions. Throws NumericalError on non-finite output.
[[nodiscard]] std::vector<double> predict(const ToyFlowModel& model, const ModelInput& input);

// Noised states z_t for every row of the batch.
[[nodiscard]] std::vector<double> noised_states(const FlowBatch& batch);

[[nodiscard]] LossAndGrad fm_loss_and_grad(const ToyFlowModel& model, const FlowBatch& batch,
                                           std::optional<double> g);
[[nodiscard]] LossAndGrad fm_loss_and_grad(const ToyFlowModel& model, const FlowBatch& batch,
                                           std::span<const double> g_per_sample);

// Student regresses the teacher's prediction. For an unguided teacher and a
// supplied g the target is the CFG combination of the teacher's null and
// conditional predictions; for a guided teacher g goes into its embedding.
[[nodiscard]] LossAndGrad distill_step_loss(const ToyFlowModel& student,
                                            const ToyFlowModel& teacher, const FlowBatch& batch,
                                            std::optional<double> g);
[[nodiscard]] LossAndGrad distill_step_loss(const ToyFlowModel& student,
                                            const ToyFlowModel& teacher, const FlowBatch& batch,
                                            std::span<const double> g_per_sample);

// Labelled point cloud.
struct FlowDataset {
  std::size_t dim = 2;
  std::size_t n_classes = 0;
  std::vector<double> points;  // size() x dim
  std::vector<std::size_t> labels;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
};

// `per_class` isotropic Gaussian points around each mean, labelled by mean index.
[[nodiscard]] FlowDataset make_mixture(const std::vector<std::vector<double>>& means,
                                       double stddev, std::size_t per_class, std::uint64_t seed);
[[nodiscard]] FlowDataset translate(FlowDataset data, std::span<const double> offset);
// Per-class means of a point cloud, n_classes x dim.
[[nodiscard]] std::vector<std::vector<double>> class_means(const FlowDataset& data);

struct TrainConfig {
  std::size_t steps = 3000;
  std::size_t batch_size = 128;
  double learning_rate = 0.02;
  std::uint64_t seed = 0;
  double cond_dropout = 0.1;
  std::size_t eval_repeats = 4;  // eval draws per data point
};

struct DistillConfig {
  std::size_t steps = 3000;
  std::size_t batch_size = 128;
  double learning_rate = 0.02;
  std::uint64_t seed = 0;
  double g_min = 1.0;
  double g_max = 4.0;
  std::size_t eval_repeats = 4;
};

struct AdaptConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 256;
  double learning_rate = 0.02;
  std::uint64_t seed = 0;
  double g_train = 1.0;
  std::size_t eval_repeats = 4;
};

struct TrainReport {
  std::vector<double> loss_trace;
  double final_eval_loss = 0.0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;

  // Equality of everything except wall-clock time.
  [[nodiscard]] bool same_results(const TrainReport& other) const noexcept {
    return loss_trace == other.loss_trace && final_eval_loss == other.final_eval_loss &&
           steps == other.steps && seed == other.seed;
  }
};

template <class Model>
struct Trained {
  Model model;
  TrainReport report;
};

[[nodiscard]] Trained<ToyFlowModel> train_flow_model(const FlowDataset& data,
                                                     const FlowModelConfig& model_config,
                                                     const TrainConfig& config);

// Trains a fresh guided student against the CFG-combined teacher, g drawn
// uniformly from [g_min, g_max] per sample.
[[nodiscard]] Trained<ToyFlowModel> distill_guided_student(const ToyFlowModel& teacher,
                                                           const FlowDataset& data,
                                                           const DistillConfig& config);

// Flow-matching fine-tuning of a guided student with g_train fed to the
// guidance embedding; the report's final_eval_loss is the held-out loss at
// the same g_train.
[[nodiscard]] Trained<ToyFlowModel> adapt_student(const ToyFlowModel& student,
                                                  const FlowDataset& new_data,
                                                  const FlowDataset& held_out,
                                                  const AdaptConfig& config);

// Mean flow-matching loss over `repeats` fixed (eps, t) draws per point.
[[nodiscard]] double evaluate_fm_loss(const ToyFlowModel& model, const FlowDataset& data,
                                      std::optional<double> g, std::size_t repeats,
                                      std::uint64_t seed);

// Every point of `data` once, with its label and fresh (eps, t) from (seed, index).
[[nodiscard]] FlowBatch make_eval_batch(const FlowDataset& data, std::uint64_t seed,
                                        std::uint64_t index);

// Deterministic batch of (z0, eps, t, y) drawn from `data`.
[[nodiscard]] FlowBatch draw_batch(const FlowDataset& data, std::size_t batch_size,
                                   double cond_dropout, std::size_t null_class, std::uint64_t seed,
                                   std::uint64_t step);

// Velocity field v(z, t) for a B x dim state, written into `out`.
using VelocityField =
    std::function<void(std::span<const double> z, double t, std::span<double> out)>;

// Euler integration from t = 1 to t = 0 over `steps` uniform steps.
[[nodiscard]] std::vector<double> euler_integrate(const VelocityField& velocity,
                                                  std::vector<double> z, std::size_t steps);

// Velocity used at sampling time: a single g-conditioned pass for guided
// models, a CFG combination of null and conditional passes otherwise (the
// conditional pass alone when g == 1).
[[nodiscard]] VelocityField guided_velocity(const ToyFlowModel& model,
                                            std::span<const std::size_t> y, double g);

// One sample per condition; row i starts from noise drawn from (seed, i).
[[nodiscard]] std::vector<double> euler_sample_batch(const ToyFlowModel& model,
                                                     std::span<const std::size_t> y, double g,
                                                     std::size_t steps, std::uint64_t seed);

[[nodiscard]] std::vector<double> euler_sample(const ToyFlowModel& model, std::size_t y, double g,
                                               std::size_t steps, std::uint64_t seed);

}  // namespace urae::flow
