// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <string>

#include "urae/error.hpp"
#include "urae/kernels.hpp"
#include "urae/rng.hpp"
#include "urae/theorem.hpp"

namespace urae::theory {

void validate(const ProblemInstance& prob) {
  const std::size_t n = prob.n();
  const std::size_t d = prob.d();
  if (n == 0 || d == 0) throw ShapeError("problem: empty feature matrix " + to_string(prob.phi.shape()));
  if (n > d) {
    throw RegimeError("problem: N=" + std::to_string(n) + " exceeds D=" + std::to_string(d) +
                      "; the bound assumes the over-parameterized regime N <= D");
  }
  for (const auto* v : {&prob.w_star, &prob.w_ref, &prob.w0}) {
    if (v->shape() != Shape{d, 1}) {
      throw ShapeError("problem: parameter vector " + to_string(v->shape()) + " expected " +
                       to_string({d, 1}));
    }
  }
  if (!(prob.sigma >= 0.0) || !std::isfinite(prob.sigma)) {
    throw DomainError("problem: sigma must be finite and non-negative");
  }
}

ProblemInstance make_problem(std::size_t n, std::size_t d, double sigma, double ref_distance,
                             std::uint64_t seed) {
  if (n == 0 || d == 0) throw DomainError("make_problem: n and d must be at least 1");
  if (n > d) {
    throw RegimeError("make_problem: n=" + std::to_string(n) + " > d=" + std::to_string(d) +
                      "; the bound needs N <= D");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("make_problem: sigma must be >= 0");
  if (!(ref_distance >= 0.0) || !std::isfinite(ref_distance)) {
    throw DomainError("make_problem: ref_distance must be >= 0");
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Stream stream, std::size_t count, double scale) {
    Rng rng = make_rng(seed, stream);
    std::vector<double> out(count);
    for (double& x : out) x = scale * normal(rng);
    return out;
  };

  ProblemInstance prob;
  prob.phi = WeightMatrix(n, d, draw(Stream::Features, n * d, 1.0 / std::sqrt(static_cast<double>(d))));
  std::vector<double> w_star = draw(Stream::Oracle, d, 1.0);
  std::vector<double> dir = draw(Stream::RefDirection, d, 1.0);
  const double norm = std::sqrt(kernels::sum_squares(dir));
  std::vector<double> w_ref(d);
  for (std::size_t i = 0; i < d; ++i) w_ref[i] = w_star[i] + ref_distance * (dir[i] / norm);
  prob.w_star = WeightMatrix(d, 1, std::move(w_star));
  prob.w_ref = WeightMatrix(d, 1, std::move(w_ref));
  prob.w0 = WeightMatrix(d, 1, draw(Stream::Init, d, 0.1));
  prob.sigma = sigma;
  return prob;
}

MixedDataset sample_targets(const ProblemInstance& prob, double p, std::uint64_t seed) {
  validate(prob);
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("sample_targets: p=" + std::to_string(p) + " outside [0,1]");
  }
  const std::size_t n = prob.n();
  Rng select = make_rng(seed, Stream::Selection);
  Rng noise = make_rng(seed, Stream::LabelNoise);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const WeightMatrix star_out = matmul(prob.phi, prob.w_star);
  const WeightMatrix ref_out = matmul(prob.phi, prob.w_ref);

  MixedDataset data;
  data.p = p;
  data.targets.resize(n);
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform(select);
    const bool synthetic = p >= 1.0 || u < p;
    const double xi = normal(noise);  // drawn for every datum to keep streams aligned across p
    if (synthetic) {
      data.targets[i] = ref_out(i, 0);
      data.labels[i] = DataSource::Synthetic;
      ++data.synthetic_count;
    } else {
      data.targets[i] = star_out(i, 0) + prob.sigma * xi;
      data.labels[i] = DataSource::Real;
    }
  }
  return data;
}

}  // namespace urae::theory
