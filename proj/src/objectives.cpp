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

#include "qd/error.hpp"
#include "qd/harness.hpp"

#include <cmath>
#include <numbers>

namespace qd {

namespace {

Objective::Fn base_function(const ObjectiveSpec& spec, DomainKind& kind) {
  const int d = spec.dim;
  kind = DomainKind::Continuous;
  if (spec.name == "sphere") {
    return [](const Point& x) { return x.squaredNorm(); };
  }
  if (spec.name == "rosenbrock") {
    if (d < 2) {
      throw ConfigError("rosenbrock needs d >= 2");
    }
    return [d](const Point& x) {
      double s = 0.0;
      for (int i = 0; i + 1 < d; ++i) {
        const double a = x(i + 1) - x(i) * x(i);
        const double b = 1.0 - x(i);
        s += 100.0 * a * a + b * b;
      }
      return s;
    };
  }
  if (spec.name == "rastrigin") {
    return [d](const Point& x) {
      double s = 10.0 * d;
      for (int i = 0; i < d; ++i) {
        s += x(i) * x(i) - 10.0 * std::cos(2.0 * std::numbers::pi * x(i));
      }
      return s;
    };
  }
  if (spec.name == "onemax") {
    kind = DomainKind::DiscreteBits;
    return [](const Point& x) { return -x.sum(); };
  }
  if (spec.name == "linear") {
    Eigen::VectorXd c = Eigen::VectorXd::Ones(d);
    if (!spec.coeffs.empty()) {
      if (static_cast<int>(spec.coeffs.size()) != d) {
        throw ConfigError("linear needs one coefficient per dimension");
      }
      c = Eigen::Map<const Eigen::VectorXd>(spec.coeffs.data(), d);
    }
    if (spec.bits) {
      kind = DomainKind::DiscreteBits;
    }
    return [c](const Point& x) { return c.dot(x); };
  }
  if (spec.name == "two_well") {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(d);
    a(0) = 1.0;
    if (!spec.coeffs.empty()) {
      if (static_cast<int>(spec.coeffs.size()) != d) {
        throw ConfigError("two_well needs one center coordinate per dimension");
      }
      a = Eigen::Map<const Eigen::VectorXd>(spec.coeffs.data(), d);
    }
    return [a](const Point& x) { return std::min((x - a).squaredNorm(), (x + a).squaredNorm()); };
  }
  if (spec.name == "user_table") {
    kind = DomainKind::DiscreteBits;
    if (d > 20 || spec.table.size() != (std::size_t{1} << d)) {
      throw ConfigError("user_table needs 2^d values, d <= 20");
    }
    std::vector<double> table = spec.table;
    return [table = std::move(table), d](const Point& x) {
      std::size_t idx = 0;
      for (int j = 0; j < d; ++j) {
        if (x(j) > 0.5) {
          idx |= std::size_t{1} << j;
        }
      }
      return table[idx];
    };
  }
  throw ConfigError("unknown objective '" + spec.name + "'");
}

} // namespace

Objective make_objective(const ObjectiveSpec& spec) {
  if (spec.dim < 1) {
    throw ConfigError("objective dimension must be >= 1");
  }
  DomainKind kind{};
  Objective::Fn fn = base_function(spec, kind);
  const double offset = spec.offset;
  if (offset != 0.0) {
    fn = [fn, offset](const Point& x) { return fn(x) + offset; };
  }
  std::string name = spec.name;
  if (spec.transform == "exp") {
    fn = [fn](const Point& x) { return std::exp(fn(x)); };
    name = "exp(" + name + ")";
  } else if (spec.transform != "identity") {
    throw ConfigError("unknown transform '" + spec.transform + "'");
  }
  return Objective(std::move(name), kind, spec.dim, std::move(fn));
}

Objective make_objective(const std::string& name, int dim) {
  ObjectiveSpec spec;
  spec.name = name;
  spec.dim = dim;
  return make_objective(spec);
}

} // namespace qd
