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

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace qd {

using Point = Eigen::VectorXd;
/// d x N matrix, one point per column.
using PointSet = Eigen::MatrixXd;

enum class DomainKind { Continuous, DiscreteBits };

/// Deterministic black-box objective to be minimized.
class Objective {
public:
  using Fn = std::function<double(const Point&)>;

  Objective(std::string name, DomainKind kind, int dim, Fn fn);

  double operator()(const Point& x) const;
  /// f at every column of `points`; evaluation may run on several threads but
  /// each value lands in its own slot.
  std::vector<double> evaluate(const PointSet& points) const;

  const std::string& name() const { return name_; }
  DomainKind domain_kind() const { return kind_; }
  int dim() const { return dim_; }

private:
  std::string name_;
  DomainKind kind_;
  int dim_;
  Fn fn_;
};

/// Non-increasing, non-negative step function w on [0, 1].
///
/// The indicator kind is w(u) = 1 for u <= q, 0 otherwise. The table kind is
/// given by breakpoints 0 = b_0 < b_1 < ... < b_m = 1 and values v_i taken on
/// [b_i, b_{i+1}); the last step also covers u = 1. Piecewise-constant w keeps
/// every integral of w exact.
class WeightFn {
public:
  enum class Kind { Indicator, Table };

  static WeightFn indicator(double q);
  static WeightFn table(std::vector<double> breaks, std::vector<double> values);

  double operator()(double u) const;
  /// Z_w, the integral of w over [0, 1].
  double mass() const { return mass_; }
  /// Exact integral of w over [a, b], 0 <= a <= b <= 1.
  double integral(double a, double b) const;

  Kind kind() const { return kind_; }
  double q() const { return q_; }
  double max_value() const;
  /// True when every value of w is 0 or 1.
  bool binary_valued() const;
  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<double>& values() const { return values_; }

  bool operator==(const WeightFn&) const = default;

private:
  WeightFn() = default;

  Kind kind_ = Kind::Indicator;
  double q_ = 0.0;
  std::vector<double> breaks_;
  std::vector<double> values_;
  double mass_ = 0.0;
};

double weight_eval(const WeightFn& w, double u);
double weight_mass(const WeightFn& w);

/// P[f(X) < f(x)] and P[f(X) <= f(x)] for X drawn from a proposal.
struct QuantilePair {
  double q_lt = 0.0;
  double q_leq = 0.0;
};

/// Quantile-based preference value of a point with quantile pair `qp`: w(q)
/// when there is no tie mass, else the average of w over [q_lt, q_leq].
double preference(const WeightFn& w, const QuantilePair& qp);

enum class TieMode { Strict, TieAveraged };

/// Rank-based weights (1/N) w((rk + 1/2) / N), rk being the number of values
/// strictly below. TieAveraged spreads w over the ranks a tied block occupies.
std::vector<double> rank_weights(std::span<const double> f_values, const WeightFn& w,
                                 TieMode mode = TieMode::Strict);

/// Largest observed value u with #{f <= u}/N >= q and #{f >= u}/N >= 1 - q.
double empirical_quantile(std::span<const double> f_values, double q);

/// Empirical CDF over a fixed sample.
class EmpiricalCdf {
public:
  explicit EmpiricalCdf(std::span<const double> values);

  /// #{v <= u} / N
  double leq(double u) const;
  /// #{v < u} / N
  double lt(double u) const;
  /// Smallest sample value v with leq(v) >= p; p is clamped to [0, 1].
  double inverse(double p) const;
  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted() const { return sorted_; }

private:
  std::vector<double> sorted_;
};

/// Which proposal-update rule drives a run.
enum class Rule { IgoNg, IgoMl, MixtureMl, StudentMl };

std::string to_string(TieMode mode);
std::string to_string(Rule rule);
TieMode parse_tie_mode(const std::string& s);
Rule parse_rule(const std::string& s);

} // namespace qd
