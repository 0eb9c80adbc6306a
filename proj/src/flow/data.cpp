// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <string>

#include "urae/error.hpp"
#include "urae/flow.hpp"
#include "urae/rng.hpp"

namespace urae::flow {

FlowDataset make_mixture(const std::vector<std::vector<double>>& means, double stddev,
                         std::size_t per_class, std::uint64_t seed) {
  if (means.empty()) throw DomainError("make_mixture: need at least one component");
  if (!(stddev >= 0.0)) throw DomainError("make_mixture: stddev must be non-negative");
  FlowDataset data;
  data.dim = means.front().size();
  data.n_classes = means.size();
  if (data.dim == 0) throw DomainError("make_mixture: zero-dimensional means");
  Rng rng = make_rng(seed, Stream::Dataset);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t c = 0; c < means.size(); ++c) {
    if (means[c].size() != data.dim) throw ShapeError("make_mixture: means differ in dimension");
    for (std::size_t i = 0; i < per_class; ++i) {
      for (double m : means[c]) data.points.push_back(m + stddev * normal(rng));
      data.labels.push_back(c);
    }
  }
  return data;
}

FlowDataset translate(FlowDataset data, std::span<const double> offset) {
  if (offset.size() != data.dim) throw ShapeError("translate: offset dimension mismatch");
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t d = 0; d < data.dim; ++d) data.points[i * data.dim + d] += offset[d];
  }
  return data;
}

std::vector<std::vector<double>> class_means(const FlowDataset& data) {
  std::vector<std::vector<double>> sums(data.n_classes, std::vector<double>(data.dim, 0.0));
  std::vector<std::size_t> counts(data.n_classes, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t c = data.labels[i];
    if (c >= data.n_classes) throw DomainError("class_means: label " + std::to_string(c) + " out of range");
    ++counts[c];
    for (std::size_t d = 0; d < data.dim; ++d) sums[c][d] += data.points[i * data.dim + d];
  }
  for (std::size_t c = 0; c < data.n_classes; ++c) {
    if (counts[c] == 0) continue;
    for (double& s : sums[c]) s /= static_cast<double>(counts[c]);
  }
  return sums;
}

}  // namespace urae::flow
