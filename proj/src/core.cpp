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

#include "qd/core.hpp"

#include "qd/error.hpp"
#include "qd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace qd {

Objective::Objective(std::string name, DomainKind kind, int dim, Fn fn)
    : name_(std::move(name)), kind_(kind), dim_(dim), fn_(std::move(fn)) {
  if (dim_ < 1) {
    throw ConfigError("objective dimension must be >= 1");
  }
}

double Objective::operator()(const Point& x) const {
  if (x.size() != dim_) {
    throw DomainError("objective '" + name_ + "' expects dimension " + std::to_string(dim_));
  }
  return fn_(x);
}

std::vector<double> Objective::evaluate(const PointSet& points) const {
  constexpr std::size_t kChunk = 256;
  const auto n = static_cast<std::size_t>(points.cols());
  std::vector<double> out(n);
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      out[i] = (*this)(points.col(static_cast<Eigen::Index>(i)));
    }
  });
  return out;
}

// ---------------------------------------------------------------------------

WeightFn WeightFn::indicator(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw ConfigError("indicator weighting needs q in (0, 1)");
  }
  WeightFn w;
  w.kind_ = Kind::Indicator;
  w.q_ = q;
  w.breaks_ = {0.0, q, 1.0};
  w.values_ = {1.0, 0.0};
  w.mass_ = q;
  return w;
}

WeightFn WeightFn::table(std::vector<double> breaks, std::vector<double> values) {
  if (values.empty() || breaks.size() != values.size() + 1) {
    throw ConfigError("weight table needs m values and m + 1 breakpoints");
  }
  if (breaks.front() != 0.0 || breaks.back() != 1.0) {
    throw ConfigError("weight table breakpoints must start at 0 and end at 1");
  }
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (!(breaks[i] < breaks[i + 1])) {
      throw ConfigError("weight table breakpoints must be strictly increasing");
    }
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
      throw ConfigError("weight table values must be finite and non-negative");
    }
    if (i > 0 && values[i] > values[i - 1]) {
      throw ConfigError("weight table values must be non-increasing");
    }
  }
  WeightFn w;
  w.kind_ = Kind::Table;
  w.breaks_ = std::move(breaks);
  w.values_ = std::move(values);
  double mass = 0.0;
  for (std::size_t i = 0; i < w.values_.size(); ++i) {
    mass += w.values_[i] * (w.breaks_[i + 1] - w.breaks_[i]);
  }
  if (!(mass > 0.0)) {
    throw ConfigError("weighting function has zero mass");
  }
  w.mass_ = mass;
  return w;
}

double WeightFn::operator()(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw DomainError("weighting function evaluated outside [0, 1]");
  }
  if (kind_ == Kind::Indicator) {
    return u <= q_ ? 1.0 : 0.0;
  }
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), u);
  const auto step = std::min<std::ptrdiff_t>(it - breaks_.begin() - 1,
                                             static_cast<std::ptrdiff_t>(values_.size()) - 1);
  return values_[static_cast<std::size_t>(step)];
}

double WeightFn::integral(double a, double b) const {
  if (!(a >= 0.0 && a <= b && b <= 1.0)) {
    throw DomainError("integration bounds must satisfy 0 <= a <= b <= 1");
  }
  if (kind_ == Kind::Indicator) {
    return std::max(0.0, std::min(b, q_) - std::min(a, q_));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double lo = std::max(a, breaks_[i]);
    const double hi = std::min(b, breaks_[i + 1]);
    if (hi > lo) {
      acc += values_[i] * (hi - lo);
    }
  }
  return acc;
}

double WeightFn::max_value() const {
  return values_.front();
}

bool WeightFn::binary_valued() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

double weight_eval(const WeightFn& w, double u) {
  return w(u);
}

double weight_mass(const WeightFn& w) {
  return w.mass();
}

double preference(const WeightFn& w, const QuantilePair& qp) {
  if (!(qp.q_lt >= 0.0 && qp.q_lt <= qp.q_leq && qp.q_leq <= 1.0)) {
    throw DomainError("quantile pair must satisfy 0 <= q_lt <= q_leq <= 1");
  }
  if (qp.q_leq == qp.q_lt) {
    return w(qp.q_leq);
  }
  return w.integral(qp.q_lt, qp.q_leq) / (qp.q_leq - qp.q_lt);
}

std::vector<double> rank_weights(std::span<const double> f_values, const WeightFn& w,
                                 TieMode mode) {
  const std::size_t n = f_values.size();
  if (n == 0) {
    throw DomainError("rank weights of an empty sample");
  }
  for (double v : f_values) {
    if (std::isnan(v)) {
      throw DomainError("objective value is NaN");
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!std::is_sorted(f_values.begin(), f_values.end())) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return f_values[a] < f_values[b]; });
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> out(n);
  std::size_t lo = 0;
  while (lo < n) {
    std::size_t hi = lo + 1;
    while (hi < n && f_values[order[hi]] == f_values[order[lo]]) {
      ++hi;
    }
    double value = 0.0;
    if (mode == TieMode::Strict || hi - lo == 1) {
      value = inv_n * w((static_cast<double>(lo) + 0.5) * inv_n);
    } else {
      double acc = 0.0;
      for (std::size_t r = lo; r < hi; ++r) {
        acc += w((static_cast<double>(r) + 0.5) * inv_n);
      }
      value = inv_n * acc / static_cast<double>(hi - lo);
    }
    for (std::size_t r = lo; r < hi; ++r) {
      out[order[r]] = value;
    }
    lo = hi;
  }
  return out;
}

double empirical_quantile(std::span<const double> f_values, double q) {
  if (f_values.empty()) {
    throw DomainError("quantile of an empty sample");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw DomainError("quantile level must lie in [0, 1]");
  }
  std::vector<double> sorted(f_values.begin(), f_values.end());
  if (!std::is_sorted(sorted.begin(), sorted.end())) {
    std::sort(sorted.begin(), sorted.end());
  }
  const auto n = static_cast<double>(sorted.size());
  // Scan distinct values from the top; #{f <= u} = hi, #{f >= u} = N - lo.
  // Both fractions are compared with a 1e-12 slack so that levels like 0.3
  // hit the boundary count 3/10 regardless of rounding in 1 - q.
  constexpr double slack = 1e-12;
  std::size_t hi = sorted.size();
  while (hi > 0) {
    std::size_t lo = hi - 1;
    while (lo > 0 && sorted[lo - 1] == sorted[hi - 1]) {
      --lo;
    }
    if (static_cast<double>(hi) / n >= q - slack && static_cast<double>(lo) / n <= q + slack) {
      return sorted[hi - 1];
    }
    hi = lo;
  }
  return sorted.front();
}

EmpiricalCdf::EmpiricalCdf(std::span<const double> values) : sorted_(values.begin(), values.end()) {
  if (sorted_.empty()) {
    throw DomainError("empirical CDF of an empty sample");
  }
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::leq(double u) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), u);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double EmpiricalCdf::lt(double u) const {
  const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), u);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double EmpiricalCdf::inverse(double p) const {
  const auto n = static_cast<double>(sorted_.size());
  p = std::clamp(p, 0.0, 1.0);
  auto k = static_cast<std::size_t>(std::ceil(p * n));
  // p * n may round up past an exact count.
  while (k > 1 && static_cast<double>(k - 1) / n >= p) {
    --k;
  }
  k = std::clamp<std::size_t>(k, 1, sorted_.size());
  return sorted_[k - 1];
}

std::string to_string(TieMode mode) {
  return mode == TieMode::Strict ? "strict" : "tie_averaged";
}

std::string to_string(Rule rule) {
  switch (rule) {
  case Rule::IgoNg:
    return "igo_ng";
  case Rule::IgoMl:
    return "igo_ml";
  case Rule::MixtureMl:
    return "mixture_ml";
  case Rule::StudentMl:
    return "student_ml";
  }
  return "unknown";
}

TieMode parse_tie_mode(const std::string& s) {
  if (s == "strict") {
    return TieMode::Strict;
  }
  if (s == "tie_averaged") {
    return TieMode::TieAveraged;
  }
  throw ConfigError("unknown tie mode '" + s + "'");
}

Rule parse_rule(const std::string& s) {
  for (Rule r : {Rule::IgoNg, Rule::IgoMl, Rule::MixtureMl, Rule::StudentMl}) {
    if (to_string(r) == s) {
      return r;
    }
  }
  throw ConfigError("unknown rule '" + s + "'");
}

} // namespace qd
