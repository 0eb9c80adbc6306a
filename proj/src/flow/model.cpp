// SPDX-License-Identifier: Apache-2.0
//
// MLP denoiser with a hand-written reverse pass. Layers are stored as
// (fan_in x fan_out) row-major blocks so the forward pass is X W + b.

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "urae/error.hpp"
#include "urae/flow.hpp"
#include "urae/kernels.hpp"
#include "urae/rng.hpp"

namespace urae::flow {

double feature_frequency(std::size_t j) noexcept {
  return 0.5 * std::numbers::pi * std::exp2(0.5 * static_cast<double>(j));
}

ToyFlowModel::ToyFlowModel(const FlowModelConfig& config) : config_(config) {
  if (config.dim == 0 || config.width == 0 || config.n_classes == 0) {
    throw DomainError("flow model: dim, width and n_classes must be positive");
  }
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    layout_.push_back({std::move(name), offset, rows, cols});
    offset += rows * cols;
  };
  add("embed.class", config.n_classes + 1, config.class_embed_dim);
  std::size_t fan_in = config.input_dim();
  for (std::size_t l = 0; l <= config.depth; ++l) {
    const std::size_t fan_out = l == config.depth ? config.dim : config.width;
    add("layer" + std::to_string(l) + ".weight", fan_in, fan_out);
    add("layer" + std::to_string(l) + ".bias", 1, fan_out);
    fan_in = fan_out;
  }
  params_.assign(offset, 0.0);
}

ToyFlowModel ToyFlowModel::zeros(const FlowModelConfig& config) { return ToyFlowModel(config); }

ToyFlowModel ToyFlowModel::init(const FlowModelConfig& config, std::uint64_t seed) {
  ToyFlowModel model(config);
  Rng rng = make_rng(seed, Stream::Init);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const ParameterBlock& b : model.layout_) {
    auto v = model.view(b);
    if (b.name.ends_with(".bias")) continue;
    const double scale = b.name == "embed.class" ? 1.0 : 1.0 / std::sqrt(static_cast<double>(b.rows));
    for (double& x : v) x = scale * normal(rng);
  }
  return model;
}

const ParameterBlock& ToyFlowModel::block(std::string_view name) const {
  for (const ParameterBlock& b : layout_) {
    if (b.name == name) return b;
  }
  throw DomainError("flow model: no parameter block '" + std::string(name) + "'");
}

std::span<double> ToyFlowModel::view(const ParameterBlock& b) noexcept {
  return std::span<double>(params_).subspan(b.offset, b.rows * b.cols);
}

std::span<const double> ToyFlowModel::view(const ParameterBlock& b) const noexcept {
  return std::span<const double>(params_).subspan(b.offset, b.rows * b.cols);
}

std::vector<double> interpolate(std::span<const double> z0, std::span<const double> eps,
                                double t) {
  if (z0.size() != eps.size()) throw ShapeError("interpolate: z0 and eps differ in dimension");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("interpolate: t=" + std::to_string(t) + " outside [0,1]");
  std::vector<double> out(z0.size());
  for (std::size_t i = 0; i < z0.size(); ++i) out[i] = (1.0 - t) * z0[i] + t * eps[i];
  return out;
}

std::vector<double> cfg_combine(std::span<const double> eps_null,
                                std::span<const double> eps_cond, double g) {
  if (eps_null.size() != eps_cond.size()) throw ShapeError("cfg_combine: dimension mismatch");
  if (g == 1.0) return {eps_cond.begin(), eps_cond.end()};
  std::vector<double> out(eps_null.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = eps_null[i] + g * (eps_cond[i] - eps_null[i]);
  return out;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double silu(double x) { return x * sigmoid(x); }
double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

struct LayerRefs {
  const ParameterBlock* weight;
  const ParameterBlock* bias;
};

std::vector<LayerRefs> layers_of(const ToyFlowModel& model) {
  std::vector<LayerRefs> out;
  for (std::size_t l = 0; l <= model.config().depth; ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    out.push_back({&model.block(prefix + ".weight"), &model.block(prefix + ".bias")});
  }
  return out;
}

struct ForwardCache {
  std::size_t batch = 0;
  std::vector<std::vector<double>> inputs;  // inputs[l]: B x fan_in(l)
  std::vector<std::vector<double>> pre;     // hidden pre-activations
  std::vector<double> out;                  // B x dim
};

void check_input(const ToyFlowModel& model, const ModelInput& in) {
  const auto& c = model.config();
  const std::size_t b = in.t.size();
  if (in.z.size() != b * c.dim || in.y.size() != b) {
    throw ShapeError("flow model input: inconsistent batch arrays");
  }
  if (c.guided && in.g.size() != b) {
    throw ContractError("flow model: guided model needs one guidance scale per sample");
  }
  if (!c.guided && !in.g.empty()) {
    throw ContractError("flow model: guidance scale supplied to an unguided model");
  }
  for (std::size_t y : in.y) {
    if (y > c.n_classes) throw DomainError("flow model: condition " + std::to_string(y) + " out of range");
  }
}

std::vector<double> build_input(const ToyFlowModel& model, const ModelInput& in) {
  const auto& c = model.config();
  const std::size_t b = in.t.size();
  const std::size_t width = c.input_dim();
  const auto embed = model.view(model.block("embed.class"));
  std::vector<double> x(b * width);
  for (std::size_t i = 0; i < b; ++i) {
    double* row = x.data() + i * width;
    std::size_t k = 0;
    for (std::size_t d = 0; d < c.dim; ++d) row[k++] = in.z[i * c.dim + d];
    for (std::size_t j = 0; j < c.time_freqs; ++j) {
      const double w = feature_frequency(j) * in.t[i];
      row[k++] = std::sin(w);
      row[k++] = std::cos(w);
    }
    for (std::size_t e = 0; e < c.class_embed_dim; ++e) row[k++] = embed[in.y[i] * c.class_embed_dim + e];
    if (c.guided) {
      for (std::size_t j = 0; j < c.guidance_freqs; ++j) {
        const double w = feature_frequency(j) * in.g[i] / kGuidanceFeatureScale;
        row[k++] = std::sin(w);
        row[k++] = std::cos(w);
      }
    }
  }
  return x;
}

ForwardCache forward(const ToyFlowModel& model, const ModelInput& in) {
  check_input(model, in);
  const auto& k = kernels::active();
  const auto layers = layers_of(model);
  ForwardCache cache;
  cache.batch = in.t.size();
  cache.inputs.push_back(build_input(model, in));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const ParameterBlock& w = *layers[l].weight;
    const auto bias = model.view(*layers[l].bias);
    std::vector<double> pre(cache.batch * w.cols);
    for (std::size_t i = 0; i < cache.batch; ++i) {
      std::copy(bias.begin(), bias.end(), pre.begin() + static_cast<std::ptrdiff_t>(i * w.cols));
    }
    k.gemm_nn(cache.batch, w.cols, w.rows, cache.inputs[l].data(), w.rows,
              model.view(w).data(), w.cols, pre.data(), w.cols, true);
    if (l + 1 == layers.size()) {
      cache.out = std::move(pre);
    } else {
      std::vector<double> post(pre.size());
      for (std::size_t i = 0; i < pre.size(); ++i) post[i] = silu(pre[i]);
      cache.pre.push_back(std::move(pre));
      cache.inputs.push_back(std::move(post));
    }
  }
  for (double v : cache.out) {
    if (!std::isfinite(v)) throw NumericalError("flow model: non-finite forward output");
  }
  return cache;
}

// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
void backward(const ToyFlowModel& model, const ForwardCache& cache, std::span<const std::size_t> y,
              std::vector<double> d_out, std::vector<double>& grad) {
  const auto& k = kernels::active();
  const auto& c = model.config();
  const auto layers = layers_of(model);
  const std::size_t b = cache.batch;
  std::vector<double> d = std::move(d_out);
  for (std::size_t l = layers.size(); l-- > 0;) {
    const ParameterBlock& w = *layers[l].weight;
    const ParameterBlock& bias = *layers[l].bias;
    k.gemm_tn(w.rows, w.cols, b, cache.inputs[l].data(), w.rows, d.data(), w.cols,
              grad.data() + w.offset, w.cols, true);
    for (std::size_t i = 0; i < b; ++i) {
      k.axpy(1.0, d.data() + i * w.cols, grad.data() + bias.offset, w.cols);
    }
    std::vector<double> d_in(b * w.rows);
    k.gemm_nt(b, w.rows, w.cols, d.data(), w.cols, model.view(w).data(), w.cols, d_in.data(),
              w.rows, false);
    if (l > 0) {
      const std::vector<double>& pre = cache.pre[l - 1];
      for (std::size_t i = 0; i < d_in.size(); ++i) d_in[i] *= silu_grad(pre[i]);
      d = std::move(d_in);
    } else {
      const ParameterBlock& embed = model.block("embed.class");
      const std::size_t offset = c.dim + 2 * c.time_freqs;
      for (std::size_t i = 0; i < b; ++i) {
        k.axpy(1.0, d_in.data() + i * w.rows + offset,
               grad.data() + embed.offset + y[i] * c.class_embed_dim, c.class_embed_dim);
      }
    }
  }
}

ModelInput input_for(const FlowBatch& batch, const std::vector<double>& z,
                     std::span<const double> g) {
  return {z, batch.t, batch.y, g};
}

void check_batch(const ToyFlowModel& model, const FlowBatch& batch) {
  if (batch.size() == 0) throw DomainError("flow loss: empty batch");
  if (batch.dim != model.config().dim || batch.z0.size() != batch.size() * batch.dim ||
      batch.eps.size() != batch.z0.size() || batch.y.size() != batch.size()) {
    throw ShapeError("flow loss: batch arrays inconsistent with model dimension");
  }
}

// Mean squared error against `target` and its output gradient.
double squared_error(const std::vector<double>& pred, const std::vector<double>& target,
                     std::size_t batch, std::vector<double>& d_out) {
  d_out.resize(pred.size());
  double sum = 0.0;
  const double scale = 2.0 / static_cast<double>(batch);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    sum += r * r;
    d_out[i] = scale * r;
  }
  return sum / static_cast<double>(batch);
}

std::vector<double> repeat(std::optional<double> g, std::size_t n) {
  return g ? std::vector<double>(n, *g) : std::vector<double>{};
}

}  // namespace

std::vector<double> predict(const ToyFlowModel& model, const ModelInput& input) {
  return forward(model, input).out;
}

std::vector<double> noised_states(const FlowBatch& batch) {
  std::vector<double> z(batch.z0.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double t = batch.t[i];
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("flow batch: t outside [0,1]");
    for (std::size_t d = 0; d < batch.dim; ++d) {
      const std::size_t j = i * batch.dim + d;
      z[j] = (1.0 - t) * batch.z0[j] + t * batch.eps[j];
    }
  }
  return z;
}

LossAndGrad fm_loss_and_grad(const ToyFlowModel& model, const FlowBatch& batch,
                             std::span<const double> g_per_sample) {
  check_batch(model, batch);
  const std::vector<double> z = noised_states(batch);
  const ForwardCache cache = forward(model, input_for(batch, z, g_per_sample));
  std::vector<double> target(batch.z0.size());
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = batch.eps[i] - batch.z0[i];
  LossAndGrad out;
  std::vector<double> d_out;
  out.loss = squared_error(cache.out, target, batch.size(), d_out);
  out.grad.assign(model.parameters().size(), 0.0);
  backward(model, cache, batch.y, std::move(d_out), out.grad);
  return out;
}

LossAndGrad fm_loss_and_grad(const ToyFlowModel& model, const FlowBatch& batch,
                             std::optional<double> g) {
  if (g.has_value() != model.guided()) {
    throw ContractError(model.guided() ? "fm_loss: guided model requires g"
                                       : "fm_loss: g supplied to an unguided model");
  }
  const std::vector<double> gs = repeat(g, batch.size());
  return fm_loss_and_grad(model, batch, gs);
}

LossAndGrad distill_step_loss(const ToyFlowModel& student, const ToyFlowModel& teacher,
                              const FlowBatch& batch, std::span<const double> g_per_sample) {
  check_batch(student, batch);
  check_batch(teacher, batch);
  const std::size_t b = batch.size();
  if (!g_per_sample.empty() && g_per_sample.size() != b) {
    throw ShapeError("distill: need one guidance scale per sample");
  }
  if ((student.guided() || teacher.guided()) && g_per_sample.empty()) {
    throw ContractError("distill: guided model requires g");
  }
  const std::vector<double> z = noised_states(batch);
  const std::size_t dim = batch.dim;

  std::vector<double> target;
  if (teacher.guided()) {
    target = predict(teacher, input_for(batch, z, g_per_sample));
  } else {
    target = predict(teacher, input_for(batch, z, {}));
    if (!g_per_sample.empty()) {
      const std::vector<std::size_t> nulls(b, teacher.config().null_class());
      const std::vector<double> uncond = predict(teacher, {z, batch.t, nulls, {}});
      for (std::size_t i = 0; i < b; ++i) {
        const auto row = cfg_combine(std::span(uncond).subspan(i * dim, dim),
                                     std::span(target).subspan(i * dim, dim), g_per_sample[i]);
        std::copy(row.begin(), row.end(), target.begin() + static_cast<std::ptrdiff_t>(i * dim));
      }
    }
  }

  const std::span<const double> student_g =
      student.guided() ? g_per_sample : std::span<const double>{};
  const ForwardCache cache = forward(student, input_for(batch, z, student_g));
  LossAndGrad out;
  std::vector<double> d_out;
  out.loss = squared_error(cache.out, target, b, d_out);
  out.grad.assign(student.parameters().size(), 0.0);
  backward(student, cache, batch.y, std::move(d_out), out.grad);
  return out;
}

LossAndGrad distill_step_loss(const ToyFlowModel& student, const ToyFlowModel& teacher,
                              const FlowBatch& batch, std::optional<double> g) {
  const std::vector<double> gs = repeat(g, batch.size());
  return distill_step_loss(student, teacher, batch, gs);
}

}  // namespace urae::flow
