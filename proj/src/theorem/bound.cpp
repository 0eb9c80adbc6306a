// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>

#include "urae/error.hpp"
#include "urae/kernels.hpp"
#include "urae/theorem.hpp"

namespace urae::theory {

BoundReport compute_bound(const ProblemInstance& prob, double p, double eta,
                          std::size_t t_steps) {
  validate(prob);
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("compute_bound: p=" + std::to_string(p) + " outside [0,1]");
  }
  if (!(eta > 0.0)) throw DomainError("compute_bound: eta must be positive");

  const std::size_t n = prob.n();
  const std::size_t d = prob.d();
  const SymmetricEigen eig = sym_eigen(matmul(prob.phi.transpose(), prob.phi));
  const double lmax = eig.values.front();
  if (!(eta * lmax < 1.0)) {
    throw RegimeError("compute_bound: eta * lambda_max = " + std::to_string(eta * lmax) +
                      " must be < 1");
  }
  const double steps = static_cast<double>(t_steps);

  // Delta0 = W0 - (p W_ref + (1-p) W*), projected onto the eigenbasis of M.
  std::vector<double> delta0(d);
  for (std::size_t i = 0; i < d; ++i) {
    delta0[i] = prob.w0(i, 0) - (p * prob.w_ref(i, 0) + (1.0 - p) * prob.w_star(i, 0));
  }

  BoundReport out;
  double decay = 0.0;
  double noise_sum = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double lambda = eig.values[j];
    double coord = 0.0;
    for (std::size_t i = 0; i < d; ++i) coord += eig.vectors(i, j) * delta0[i];
    const double contraction = std::pow(1.0 - eta * lambda, steps);
    decay += contraction * contraction * coord * coord;
    if (lambda > 0.0) {  // zeroed below the rank cut by sym_eigen
      const double g = 1.0 - contraction;
      noise_sum += g * g / lambda;
      out.eigenvalues.push_back(lambda);
    }
  }

  WeightMatrix gap = prob.w_ref - prob.w_star;
  const WeightMatrix gap_out = matmul(prob.phi, gap);
  out.mean_delta_sq = kernels::sum_squares(gap_out.data()) / static_cast<double>(n);
  out.noise_coefficient = p * (1.0 - p) * out.mean_delta_sq + (1.0 - p) * prob.sigma * prob.sigma;

  out.decay_term = decay;
  out.noise_term = out.noise_coefficient * noise_sum;
  out.ref_gap_term = p * p * kernels::sum_squares(gap.data());
  out.total = out.decay_term + out.noise_term + out.ref_gap_term;

  out.noise_term_printed = eta * eta * out.noise_term;
  out.total_printed = out.decay_term + out.noise_term_printed + out.ref_gap_term;
  return out;
}

}  // namespace urae::theory
