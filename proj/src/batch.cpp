/*
Copyright 2026 The qd Authors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

                http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include "qd/batch.hpp"

#include "qd/error.hpp"
#include "qd/numeric.hpp"

#include <cmath>
#include <utility>

namespace qd {

double SampleBatch::weight_sum() const {
  return pairwise_sum(rank_weights);
}

SampleBatch draw_batch(const ProposalParams& params, const Objective& obj, const WeightFn& w,
                       TieMode mode, const RandomStream& stream, std::size_t n) {
  SampleBatch batch = make_batch(sample(params, stream, n), obj, w, mode);
  batch.origin = params;
  batch.seed_tag = derive_seed(stream.run_seed(), stream.iteration(), stream.purpose(), 0);
  return batch;
}

SampleBatch make_batch(PointSet points, const Objective& obj, const WeightFn& w, TieMode mode) {
  SampleBatch batch;
  batch.f_values = obj.evaluate(points);
  batch.rank_weights = rank_weights(batch.f_values, w, mode);
  batch.points = std::move(points);
  batch.tie_mode = mode;
  return batch;
}

Eigen::VectorXd weighted_expectation(const SampleBatch& batch, const PointMap& h) {
  return weighted_expectation(batch.rank_weights, batch.points, h);
}

Eigen::VectorXd weighted_expectation(std::span<const double> weights, const PointSet& points,
                                     const PointMap& h) {
  const auto n = static_cast<std::size_t>(points.cols());
  if (weights.size() != n || n == 0) {
    throw DomainError("weights and points differ in count");
  }
  const double total = pairwise_sum(weights);
  if (!(total > 0.0)) {
    throw DegenerateBatchError("all rank weights are zero");
  }
  const Eigen::Index out_dim = h(points.col(0)).size();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(out_dim);
  Eigen::VectorXd acc = tree_reduce(std::size_t{0}, n, zero, [&](Eigen::VectorXd& a, std::size_t i) {
    if (weights[i] != 0.0) {
      a += weights[i] * h(points.col(static_cast<Eigen::Index>(i)));
    }
  });
  return acc / total;
}

WeightedMean weighted_mean(std::span<const double> weights, std::span<const double> values) {
  if (weights.size() != values.size() || weights.empty()) {
    throw DomainError("weights and values differ in count");
  }
  const double total = pairwise_sum(weights);
  if (!(total > 0.0)) {
    throw DegenerateBatchError("all rank weights are zero");
  }
  const std::size_t n = weights.size();
  const double mean = tree_reduce(std::size_t{0}, n, 0.0, [&](double& a, std::size_t i) {
                        if (weights[i] != 0.0) {
                          a += weights[i] * values[i];
                        }
                      }) /
                      total;
  const double var = tree_reduce(std::size_t{0}, n, 0.0, [&](double& a, std::size_t i) {
    if (weights[i] != 0.0) {
      const double r = weights[i] * (values[i] - mean);
      a += r * r;
    }
  });
  return {mean, std::sqrt(var) / total};
}

} // namespace qd
