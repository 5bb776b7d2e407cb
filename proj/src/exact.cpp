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

#include "qd/diagnostics.hpp"

#include "qd/error.hpp"
#include "qd/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qd {

namespace {

constexpr double kProbEps = 1e-12;
constexpr int kMaxDiscreteDim = 20;

std::vector<double> probabilities(const ProposalParams& params, const PointSet& points) {
  if (!std::holds_alternative<BernoulliParams>(params)) {
    throw UnsupportedError("exact enumeration needs a Bernoulli-product proposal");
  }
  std::vector<double> p = log_densities(params, points);
  for (double& v : p) {
    v = std::exp(v);
  }
  return p;
}

/// Quantile pairs of every point, computed by grouping equal f-values.
std::vector<QuantilePair> quantile_pairs(std::span<const double> f, std::span<const double> p) {
  const std::size_t n = f.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
  std::vector<QuantilePair> out(n);
  double below = 0.0;
  std::size_t lo = 0;
  while (lo < n) {
    std::size_t hi = lo;
    std::vector<double> block;
    while (hi < n && f[order[hi]] == f[order[lo]]) {
      block.push_back(p[order[hi]]);
      ++hi;
    }
    const double leq = std::min(1.0, below + pairwise_sum(block));
    for (std::size_t r = lo; r < hi; ++r) {
      out[order[r]] = {std::min(below, leq), leq};
    }
    below = leq;
    lo = hi;
  }
  return out;
}

double kl_exact(std::span<const double> pi, std::span<const double> p) {
  std::vector<double> terms(pi.size(), 0.0);
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (pi[i] == 0.0) {
      continue;
    }
    if (p[i] == 0.0) {
      return std::numeric_limits<double>::infinity();
    }
    terms[i] = pi[i] * (std::log(pi[i]) - std::log(p[i]));
  }
  return pairwise_sum(terms);
}

double renyi_exact(std::span<const double> pi, std::span<const double> p, double alpha) {
  std::vector<double> terms;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (pi[i] > 0.0) {
      terms.push_back(alpha * std::log(pi[i]) + (1.0 - alpha) * std::log(p[i]));
    }
  }
  return log_sum_exp(terms) / (alpha - 1.0);
}

} // namespace

DiscreteModel::DiscreteModel(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDiscreteDim) {
    throw DomainError("enumerable domain needs 1 <= d <= 20");
  }
}

Point DiscreteModel::point(std::size_t index) const {
  if (index >= size()) {
    throw DomainError("point index out of range");
  }
  Point x(dim_);
  for (int j = 0; j < dim_; ++j) {
    x(j) = static_cast<double>((index >> j) & 1U);
  }
  return x;
}

PointSet DiscreteModel::all_points() const {
  PointSet pts(dim_, static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) {
    pts.col(static_cast<Eigen::Index>(i)) = point(i);
  }
  return pts;
}

QuantilePair exact_quantile_pair(const DiscreteModel& model, const Objective& obj,
                                 const ProposalParams& params, const Point& x) {
  const PointSet pts = model.all_points();
  const std::vector<double> f = obj.evaluate(pts);
  const std::vector<double> p = probabilities(params, pts);
  const double fx = obj(x);
  std::vector<double> lt;
  std::vector<double> eq;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] < fx) {
      lt.push_back(p[i]);
    } else if (f[i] == fx) {
      eq.push_back(p[i]);
    }
  }
  const double a = std::min(1.0, pairwise_sum(lt));
  return {a, std::min(1.0, a + pairwise_sum(eq))};
}

double exact_quantile(std::span<const double> f_values, std::span<const double> probs, double q) {
  if (f_values.size() != probs.size() || f_values.empty()) {
    throw DomainError("values and probabilities differ in count");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw DomainError("quantile level must lie in [0, 1]");
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < f_values.size(); ++i) {
    if (probs[i] > 0.0) {
      order.push_back(i);
    }
  }
  if (order.empty()) {
    throw DomainError("distribution has no mass");
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return f_values[a] < f_values[b]; });
  // Atoms (value, P[f < value], P[f <= value]).
  struct Atom {
    double value, lt, leq;
  };
  std::vector<Atom> atoms;
  double below = 0.0;
  std::size_t lo = 0;
  while (lo < order.size()) {
    std::size_t hi = lo;
    std::vector<double> block;
    while (hi < order.size() && f_values[order[hi]] == f_values[order[lo]]) {
      block.push_back(probs[order[hi]]);
      ++hi;
    }
    const double leq = below + pairwise_sum(block);
    atoms.push_back({f_values[order[lo]], below, leq});
    below = leq;
    lo = hi;
  }
  for (auto it = atoms.rbegin(); it != atoms.rend(); ++it) {
    if (it->leq >= q - kProbEps && it->lt <= q + kProbEps) {
      return it->value;
    }
  }
  return atoms.front().value;
}

ExactReport exact_report(const DiscreteModel& model, const Objective& obj, const WeightFn& w,
                         const ProposalParams& prev, const ProposalParams& next, double q,
                         std::span<const double> alphas) {
  if (obj.dim() != model.dim() || dimension(prev) != model.dim() ||
      dimension(next) != model.dim()) {
    throw DomainError("model, objective and proposals differ in dimension");
  }
  const PointSet pts = model.all_points();
  const std::vector<double> f = obj.evaluate(pts);
  const std::vector<double> p_prev = probabilities(prev, pts);
  const std::vector<double> p_next = probabilities(next, pts);
  const std::vector<QuantilePair> qp = quantile_pairs(f, p_prev);

  ExactReport r;
  r.z_w = w.mass();
  const std::size_t n = f.size();
  r.preference.resize(n);
  r.target.resize(n);
  std::vector<double> js(n);
  std::vector<double> jn(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.preference[i] = preference(w, qp[i]);
    // W p / Z_w can exceed 1 by an ulp when pi sits on a single atom
    r.target[i] = std::min(1.0, r.preference[i] * p_prev[i] / r.z_w);
    js[i] = r.preference[i] * p_prev[i];
    jn[i] = r.preference[i] * p_next[i];
  }
  r.j_self = pairwise_sum(js);
  r.j_next = pairwise_sum(jn);
  r.q_prev = exact_quantile(f, p_prev, q);
  r.q_next = exact_quantile(f, p_next, q);
  r.kl_prev = kl_exact(r.target, p_prev);
  r.kl_next = kl_exact(r.target, p_next);
  r.delta = r.kl_prev - r.kl_next;
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) {
      throw DomainError("Renyi order must lie in (0, 1)");
    }
    r.renyi.push_back({a, renyi_exact(r.target, p_prev, a), renyi_exact(r.target, p_next, a)});
  }
  return r;
}

} // namespace qd
