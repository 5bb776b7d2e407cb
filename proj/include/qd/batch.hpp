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

#pragma once

#include "qd/core.hpp"
#include "qd/proposals.hpp"
#include "qd/random.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace qd {

/// Points drawn from a proposal together with their objective values and
/// rank-based weights.
struct SampleBatch {
  PointSet points;
  std::vector<double> f_values;
  std::vector<double> rank_weights;
  std::optional<ProposalParams> origin;
  TieMode tie_mode = TieMode::Strict;
  std::uint64_t seed_tag = 0;

  std::size_t size() const { return f_values.size(); }
  double weight_sum() const;
};

SampleBatch draw_batch(const ProposalParams& params, const Objective& obj, const WeightFn& w,
                       TieMode mode, const RandomStream& stream, std::size_t n);

/// Batch over given points; evaluates f and computes rank weights.
SampleBatch make_batch(PointSet points, const Objective& obj, const WeightFn& w, TieMode mode);

using PointMap = std::function<Eigen::VectorXd(const Point&)>;

/// Self-normalized estimate sum_n w_n h(x_n) / sum_n w_n of E_pi[h(X)].
/// Throws DegenerateBatchError when every weight is zero.
Eigen::VectorXd weighted_expectation(const SampleBatch& batch, const PointMap& h);
Eigen::VectorXd weighted_expectation(std::span<const double> weights, const PointSet& points,
                                     const PointMap& h);

/// Scalar self-normalized mean with its delta-method standard error.
struct WeightedMean {
  double mean = 0.0;
  double std_error = 0.0;
};
WeightedMean weighted_mean(std::span<const double> weights, std::span<const double> values);

} // namespace qd
