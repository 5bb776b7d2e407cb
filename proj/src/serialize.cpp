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

#include "qd/serialize.hpp"

#include "qd/error.hpp"

#include <cmath>
#include <cstdio>

namespace qd {

using nlohmann::json;

namespace {

/// JSON has no infinities; non-finite reals are written as strings.
json num(double v) {
  if (std::isfinite(v)) {
    return v;
  }
  if (std::isnan(v)) {
    return "nan";
  }
  return v > 0 ? "inf" : "-inf";
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    a.push_back(num(v(i)));
  }
  return a;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(vec_to_json(m.row(i).transpose()));
  }
  return rows;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

double as_double(const json& j) {
  if (!j.is_number()) {
    throw ConfigError("expected a number, got " + j.dump());
  }
  return j.get<double>();
}

Eigen::VectorXd vec_from_json(const json& j) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError("expected a non-empty array of numbers");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = as_double(j[i]);
  }
  return v;
}

Eigen::MatrixXd mat_from_json(const json& j, Eigen::Index dim) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != dim) {
    throw ConfigError("matrix must have one row per dimension");
  }
  Eigen::MatrixXd m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const Eigen::VectorXd row = vec_from_json(j[static_cast<std::size_t>(i)]);
    if (row.size() != dim) {
      throw ConfigError("matrix must be square");
    }
    m.row(i) = row.transpose();
  }
  return m;
}

json gaussian_to_json(const GaussianParams& g) {
  return {{"family", "gaussian"}, {"mean", vec_to_json(g.mean())}, {"cov", mat_to_json(g.cov())}};
}

GaussianParams gaussian_from_json(const json& j) {
  Eigen::VectorXd mean = vec_from_json(field(j, "mean"));
  Eigen::MatrixXd cov = mat_from_json(field(j, "cov"), mean.size());
  try {
    return GaussianParams(std::move(mean), std::move(cov));
  } catch (const FactorizationError& e) {
    throw ConfigError(std::string("invalid covariance: ") + e.what());
  }
}

json estimate_json(const Estimate& e) {
  return {{"value", num(e.value)}, {"stderr", num(e.std_error)}};
}

} // namespace

json params_to_json(const ProposalParams& params) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianParams>) {
          return gaussian_to_json(p);
        } else if constexpr (std::is_same_v<T, StudentParams>) {
          return {{"family", "student"},
                  {"location", vec_to_json(p.location())},
                  {"scale", mat_to_json(p.scale())},
                  {"dof", num(p.dof())}};
        } else if constexpr (std::is_same_v<T, MixtureParams>) {
          json comps = json::array();
          for (const auto& c : p.components()) {
            comps.push_back(gaussian_to_json(c));
          }
          return {{"family", "mixture"}, {"weights", vec_to_json(p.weights())}, {"components", comps}};
        } else {
          return {{"family", "bernoulli"}, {"probs", vec_to_json(p.probs())}, {"p_min", num(p.p_min())}};
        }
      },
      params);
}

ProposalParams params_from_json(const json& j) {
  const json& fam = field(j, "family");
  if (!fam.is_string()) {
    throw ConfigError("family must be a string");
  }
  const std::string family = fam.get<std::string>();
  try {
    if (family == "gaussian") {
      return gaussian_from_json(j);
    }
    if (family == "student") {
      Eigen::VectorXd loc = vec_from_json(field(j, "location"));
      Eigen::MatrixXd scale = mat_from_json(field(j, "scale"), loc.size());
      return StudentParams(std::move(loc), std::move(scale), as_double(field(j, "dof")));
    }
    if (family == "mixture") {
      Eigen::VectorXd weights = vec_from_json(field(j, "weights"));
      const json& comps = field(j, "components");
      if (!comps.is_array() || comps.size() != static_cast<std::size_t>(weights.size())) {
        throw ConfigError("mixture needs one component per weight");
      }
      std::vector<GaussianParams> cs;
      for (const auto& c : comps) {
        cs.push_back(gaussian_from_json(c));
      }
      return MixtureParams(std::move(weights), std::move(cs));
    }
    if (family == "bernoulli") {
      Eigen::VectorXd probs = vec_from_json(field(j, "probs"));
      if (j.contains("p_min")) {
        return BernoulliParams(std::move(probs), as_double(j.at("p_min")));
      }
      return BernoulliParams(std::move(probs));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("invalid " + family + " parameters: " + e.what());
  }
  throw ConfigError("unknown family '" + family + "'");
}

json weight_to_json(const WeightFn& w) {
  if (w.kind() == WeightFn::Kind::Indicator) {
    return {{"kind", "indicator"}, {"q", w.q()}};
  }
  return {{"kind", "table"}, {"breaks", w.breaks()}, {"values", w.values()}};
}

WeightFn weight_from_json(const json& j) {
  const json& kind = field(j, "kind");
  try {
    if (kind == "indicator") {
      return WeightFn::indicator(as_double(field(j, "q")));
    }
    if (kind == "table") {
      std::vector<double> breaks;
      std::vector<double> values;
      for (const auto& b : field(j, "breaks")) {
        breaks.push_back(as_double(b));
      }
      for (const auto& v : field(j, "values")) {
        values.push_back(as_double(v));
      }
      return WeightFn::table(std::move(breaks), std::move(values));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid weight function: ") + e.what());
  }
  throw ConfigError("unknown weight kind " + kind.dump());
}

json report_to_json(const IterationReport& r) {
  json renyi = json::array();
  for (const auto& e : r.renyi_target) {
    renyi.push_back({{"alpha", e.alpha}, {"prev", estimate_json(e.prev)}, {"next", estimate_json(e.next)}});
  }
  json checks = json::array();
  for (const auto& c : r.bound_checks) {
    checks.push_back({{"name", c.name},
                      {"applicable", c.applicable},
                      {"pass", c.pass},
                      {"statistic", num(c.statistic)},
                      {"tolerance", num(c.tolerance)}});
  }
  auto kl = [](const KlEstimate& k) {
    return json{{"value", num(k.value)}, {"stderr", num(k.std_error)}, {"infinite", k.infinite}};
  };
  const auto& qb = r.quantile_bound;
  return {{"iteration", r.iteration},
          {"j_hat", estimate_json(r.j_hat)},
          {"q_hat_prev", num(r.q_hat_prev)},
          {"q_hat_next", num(r.q_hat_next)},
          {"kl_target_prev", kl(r.kl_target_prev)},
          {"kl_target_next", kl(r.kl_target_next)},
          {"renyi_target", renyi},
          {"delta_hat", num(r.delta_hat)},
          {"delta_hat_stderr", num(r.delta_hat_stderr)},
          {"quantile_bound",
           {{"rhs", num(qb.rhs)},
            {"linearized", num(qb.linearized)},
            {"vacuous", qb.vacuous},
            {"pass", qb.pass},
            {"statistic", num(qb.statistic)},
            {"tolerance", num(qb.tolerance)}}},
          {"bound_checks", checks}};
}

std::string dump_compact(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::string params_digest(const ProposalParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : dump_compact(params_to_json(params))) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace qd
