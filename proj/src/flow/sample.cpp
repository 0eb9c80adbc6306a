// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "urae/error.hpp"
#include "urae/flow.hpp"
#include "urae/rng.hpp"

namespace urae::flow {

std::vector<double> euler_integrate(const VelocityField& velocity, std::vector<double> z,
                                    std::size_t steps) {
  if (steps == 0) throw DomainError("euler: steps must be >= 1");
  std::vector<double> v(z.size());
  const double h = 1.0 / static_cast<double>(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = 1.0 - static_cast<double>(i) / static_cast<double>(steps);
    velocity(z, t, v);
    for (std::size_t j = 0; j < z.size(); ++j) {
      z[j] -= h * v[j];
      if (!std::isfinite(z[j])) throw NumericalError("euler: non-finite state at step " + std::to_string(i));
    }
  }
  return z;
}

VelocityField guided_velocity(const ToyFlowModel& model, std::span<const std::size_t> y, double g) {
  const std::size_t dim = model.config().dim;
  const std::vector<std::size_t> ys(y.begin(), y.end());
  return [&model, ys, g, dim](std::span<const double> z, double t, std::span<double> out) {
    const std::size_t b = ys.size();
    if (z.size() != b * dim || out.size() != z.size()) throw ShapeError("velocity: state shape mismatch");
    const std::vector<double> ts(b, t);
    std::vector<double> v;
    if (model.guided()) {
      const std::vector<double> gs(b, g);
      v = predict(model, {z, ts, ys, gs});
    } else if (g == 1.0) {
      v = predict(model, {z, ts, ys, {}});
    } else {
      const std::vector<std::size_t> nulls(b, model.config().null_class());
      const std::vector<double> cond = predict(model, {z, ts, ys, {}});
      const std::vector<double> uncond = predict(model, {z, ts, nulls, {}});
      v = cfg_combine(uncond, cond, g);
    }
    std::copy(v.begin(), v.end(), out.begin());
  };
}

std::vector<double> euler_sample_batch(const ToyFlowModel& model, std::span<const std::size_t> y,
                                       double g, std::size_t steps, std::uint64_t seed) {
  const std::size_t dim = model.config().dim;
  std::vector<double> z(y.size() * dim);
  for (std::size_t i = 0; i < y.size(); ++i) {
    Rng rng = make_rng(seed, Stream::Sampling, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t d = 0; d < dim; ++d) z[i * dim + d] = normal(rng);
  }
  return euler_integrate(guided_velocity(model, y, g), std::move(z), steps);
}

std::vector<double> euler_sample(const ToyFlowModel& model, std::size_t y, double g,
                                 std::size_t steps, std::uint64_t seed) {
  const std::size_t ys[1] = {y};
  return euler_sample_batch(model, ys, g, steps, seed);
}

}  // namespace urae::flow
