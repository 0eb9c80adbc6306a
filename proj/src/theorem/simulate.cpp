// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

#include "urae/error.hpp"
#include "urae/kernels.hpp"
#include "urae/rng.hpp"
#include "urae/theorem.hpp"

namespace urae::theory {
namespace {

constexpr double kDivergenceNorm = 1e12;

void check_step(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw DomainError("gradient descent: eta must be positive, got " + std::to_string(eta));
  }
}

// Full-batch recursion without precondition checks.
WeightMatrix iterate(const ProblemInstance& prob, const std::vector<double>& x, double eta,
                     std::size_t t_steps) {
  const auto& k = kernels::active();
  const std::size_t n = prob.n();
  const std::size_t d = prob.d();
  const double* phi = prob.phi.data().data();
  std::vector<double> w(prob.w0.data().begin(), prob.w0.data().end());
  std::vector<double> grad(d);
  const double limit = kDivergenceNorm * kDivergenceNorm;
  for (std::size_t t = 0; t < t_steps; ++t) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double residual = k.dot(phi + i * d, w.data(), d) - x[i];
      k.axpy(residual, phi + i * d, grad.data(), d);
    }
    k.axpy(-eta, grad.data(), w.data(), d);
    const double sq = k.sum_squares(w.data(), d);
    if (!(sq <= limit)) {
      throw DivergenceError("gradient descent diverged at step " + std::to_string(t + 1) +
                                " (||W|| > 1e12)",
                            t + 1);
    }
  }
  return WeightMatrix(d, 1, std::move(w));
}

double squared_error(const WeightMatrix& w, const WeightMatrix& w_star) {
  const WeightMatrix diff = w - w_star;
  return kernels::sum_squares(diff.data());
}

double run_trial(const ProblemInstance& prob, double p, double eta, std::size_t t_steps,
                 std::uint64_t seed) {
  const MixedDataset data = sample_targets(prob, p, seed);
  return squared_error(iterate(prob, data.targets, eta, t_steps), prob.w_star);
}

}  // namespace

double lambda_max(const WeightMatrix& phi) {
  // Nonzero spectra of Phi^T Phi and Phi Phi^T coincide; use the smaller one.
  const WeightMatrix gram =
      phi.rows() <= phi.cols() ? matmul(phi, phi.transpose()) : matmul(phi.transpose(), phi);
  const auto values = sym_eigvals(gram);
  return values.empty() ? 0.0 : values.front();
}

GdResult run_gd(const ProblemInstance& prob, const MixedDataset& data, double eta,
                std::size_t t_steps) {
  validate(prob);
  check_step(eta);
  if (data.targets.size() != prob.n()) {
    throw ShapeError("run_gd: dataset has " + std::to_string(data.targets.size()) +
                     " targets for N=" + std::to_string(prob.n()));
  }
  GdResult out;
  const double lmax = lambda_max(prob.phi);
  if (eta * lmax >= 2.0) {
    out.warning = "eta=" + std::to_string(eta) + " >= 2/lambda_max=" + std::to_string(2.0 / lmax) +
                  "; iteration is not contractive";
  }
  out.weights = iterate(prob, data.targets, eta, t_steps);
  return out;
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
  return derive_seed(seed, Stream::Trial, trial);
}

ErrorEstimate estimate_error(const ProblemInstance& prob, double p, double eta,
                             std::size_t t_steps, std::size_t n_trials, std::uint64_t seed,
                             RunOptions options) {
  validate(prob);
  check_step(eta);
  if (n_trials == 0) throw DomainError("estimate_error: n_trials must be at least 1");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("estimate_error: p outside [0,1]");

  std::vector<double> errors(n_trials);
  std::size_t threads = options.threads == 0 ? std::thread::hardware_concurrency() : options.threads;
  threads = std::clamp<std::size_t>(threads, 1, n_trials);

  if (threads == 1) {
    for (std::size_t k = 0; k < n_trials; ++k) {
      errors[k] = run_trial(prob, p, eta, t_steps, trial_seed(seed, k));
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::size_t failed_trial = std::numeric_limits<std::size_t>::max();
    std::exception_ptr failure;
    auto worker = [&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= n_trials) return;
        try {
          errors[k] = run_trial(prob, p, eta, t_steps, trial_seed(seed, k));
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          // Report the lowest failing trial so the error is scheduling independent.
          if (k < failed_trial) {
            failed_trial = k;
            failure = std::current_exception();
          }
        }
      }
    };
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }

  double sum = 0.0;
  for (double e : errors) sum += e;
  const double mean = sum / static_cast<double>(n_trials);
  double ss = 0.0;
  for (double e : errors) ss += (e - mean) * (e - mean);
  const double se = n_trials > 1
                        ? std::sqrt(ss / static_cast<double>(n_trials - 1)) /
                              std::sqrt(static_cast<double>(n_trials))
                        : 0.0;
  return {mean, se};
}

std::vector<SweepRow> sweep_p(const ProblemInstance& prob, const std::vector<double>& p_grid,
                              double eta, std::size_t t_steps, std::size_t n_trials,
                              std::uint64_t seed, RunOptions options) {
  for (std::size_t i = 0; i < p_grid.size(); ++i) {
    if (!(p_grid[i] >= 0.0 && p_grid[i] <= 1.0)) {
      throw DomainError("sweep_p: grid value " + std::to_string(p_grid[i]) + " outside [0,1]");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (p_grid[j] == p_grid[i]) throw DomainError("sweep_p: duplicate grid value " + std::to_string(p_grid[i]));
    }
  }
  std::vector<SweepRow> rows;
  rows.reserve(p_grid.size());
  for (double p : p_grid) {
    SweepRow row;
    row.p = p;
    row.bound = compute_bound(prob, p, eta, t_steps);
    row.empirical = estimate_error(prob, p, eta, t_steps, n_trials, seed, options);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace urae::theory
