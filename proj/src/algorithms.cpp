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

#include "qd/algorithms.hpp"

#include "qd/error.hpp"
#include "qd/numeric.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace qd {

namespace {

constexpr double kStepSlack = 1e-12;

/// Weights (omega_k, omega_pi) of the convex combination of moment vectors.
struct Blend {
  double current;
  double target;
};

Blend ng_blend(double tau, double z_w) {
  if (!(tau >= 0.0) || !(z_w > 0.0)) {
    throw DomainError("natural-gradient step needs tau >= 0 and Z_w > 0");
  }
  double c = tau * z_w;
  if (c > 1.0 + kStepSlack) {
    throw DomainError("natural-gradient step needs tau * Z_w <= 1");
  }
  if (std::abs(c - 1.0) <= kStepSlack) {
    // tau = 1/Z_w rarely multiplies back to exactly 1
    c = 1.0;
  }
  return {1.0 - c, c};
}

Blend ml_blend(double tau, double z_w) {
  if (!(tau >= 0.0 && tau <= 1.0) || !(z_w > 0.0)) {
    throw DomainError("IGO-ML step needs tau in [0, 1] and Z_w > 0");
  }
  const double a = 1.0 - tau;
  const double b = tau * z_w;
  return {a / (a + b), b / (a + b)};
}

MomentParams blend_moments(const MomentParams& eta_k, const MomentParams& eta_pi, Blend b) {
  MomentParams out;
  out.eta_mean = b.current * eta_k.eta_mean + b.target * eta_pi.eta_mean;
  if (eta_k.eta_second.size() > 0) {
    out.eta_second = b.current * eta_k.eta_second + b.target * eta_pi.eta_second;
  }
  return out;
}

struct MomentAcc {
  Eigen::VectorXd m;
  Eigen::MatrixXd s;
  MomentAcc& operator+=(const MomentAcc& o) {
    m += o.m;
    s += o.s;
    return *this;
  }
};

/// Self-normalized moments E_pi[X - c] and E_pi[(X - c)(X - c)^T] from
/// per-point weights.
MomentAcc centered_moments(std::span<const double> weights, const PointSet& points,
                           const Eigen::VectorXd& center, bool second) {
  const auto n = static_cast<std::size_t>(points.cols());
  const double total = pairwise_sum(weights);
  if (!(total > 0.0)) {
    throw DegenerateBatchError("all rank weights are zero");
  }
  const auto d = points.rows();
  const MomentAcc zero{Eigen::VectorXd::Zero(d),
                       second ? Eigen::MatrixXd::Zero(d, d) : Eigen::MatrixXd::Zero(0, 0)};
  MomentAcc acc = tree_reduce(std::size_t{0}, n, zero, [&](MomentAcc& a, std::size_t i) {
    if (weights[i] == 0.0) {
      return;
    }
    const Eigen::VectorXd y = points.col(static_cast<Eigen::Index>(i)) - center;
    a.m += weights[i] * y;
    if (second) {
      a.s.noalias() += weights[i] * (y * y.transpose());
    }
  });
  acc.m /= total;
  if (second) {
    acc.s /= total;
  }
  return acc;
}

GaussianParams gaussian_moment_step(const GaussianParams& params, const SampleBatch& batch,
                                    Blend b) {
  // Moment coordinates taken about the current mean: the blend is affine and
  // the unembedding shift-equivariant, so this is the same update with less
  // cancellation in E[X X^T] - mu mu^T.
  const MomentAcc hat = centered_moments(batch.rank_weights, batch.points, params.mean(), true);
  const Eigen::VectorXd m = b.target * hat.m;
  const Eigen::MatrixXd s = b.current * params.cov() + b.target * hat.s;
  const Eigen::MatrixXd cov = s - m * m.transpose();
  try {
    return GaussianParams(params.mean() + m, finalize_update_covariance(cov));
  } catch (const FactorizationError& e) {
    throw StepFailure(std::string("Gaussian update: ") + e.what());
  }
}

BernoulliParams bernoulli_moment_step(const BernoulliParams& params, const SampleBatch& batch,
                                      Blend b) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(params.dim());
  const MomentAcc hat = centered_moments(batch.rank_weights, batch.points, zero, false);
  const Eigen::VectorXd p = b.current * params.probs() + b.target * hat.m;
  return BernoulliParams(p.cwiseMax(0.0).cwiseMin(1.0), params.p_min());
}

void check_batch(const SampleBatch& batch, int dim) {
  if (batch.size() == 0 || batch.points.cols() != static_cast<Eigen::Index>(batch.size()) ||
      batch.rank_weights.size() != batch.size()) {
    throw DomainError("malformed sample batch");
  }
  if (batch.points.rows() != dim) {
    throw DomainError("batch dimension does not match the proposal");
  }
}

} // namespace

std::string to_string(SigmaVariant v) {
  return v == SigmaVariant::PaperEq ? "paper_eq" : "proof_exact";
}

SigmaVariant parse_sigma_variant(const std::string& s) {
  if (s == "paper_eq") {
    return SigmaVariant::PaperEq;
  }
  if (s == "proof_exact") {
    return SigmaVariant::ProofExact;
  }
  throw ConfigError("unknown sigma variant '" + s + "'");
}

void StepConfig::validate() const {
  if (batch_size < 2) {
    throw ConfigError("batch size must be >= 2");
  }
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw ConfigError("step size must be positive");
  }
  if (rule == Rule::IgoMl && step_size > 1.0) {
    throw ConfigError("igo_ml needs step size in (0, 1]");
  }
  if (rule == Rule::IgoNg && step_size * weight.mass() > 1.0 + kStepSlack) {
    throw ConfigError("igo_ng needs step size in (0, 1/Z_w]");
  }
}

MomentParams igo_ng_moments(const MomentParams& eta_k, const MomentParams& eta_pi, double tau,
                            double z_w) {
  return blend_moments(eta_k, eta_pi, ng_blend(tau, z_w));
}

MomentParams igo_ml_moments(const MomentParams& eta_k, const MomentParams& eta_pi, double tau,
                            double z_w) {
  return blend_moments(eta_k, eta_pi, ml_blend(tau, z_w));
}

GaussianParams igo_ng_step(const GaussianParams& params, const SampleBatch& batch, double tau,
                           double z_w) {
  check_batch(batch, params.dim());
  return gaussian_moment_step(params, batch, ng_blend(tau, z_w));
}

BernoulliParams igo_ng_step(const BernoulliParams& params, const SampleBatch& batch, double tau,
                            double z_w) {
  check_batch(batch, params.dim());
  return bernoulli_moment_step(params, batch, ng_blend(tau, z_w));
}

GaussianParams igo_ml_step(const GaussianParams& params, const SampleBatch& batch, double tau,
                           double z_w) {
  check_batch(batch, params.dim());
  return gaussian_moment_step(params, batch, ml_blend(tau, z_w));
}

BernoulliParams igo_ml_step(const BernoulliParams& params, const SampleBatch& batch, double tau,
                            double z_w) {
  check_batch(batch, params.dim());
  return bernoulli_moment_step(params, batch, ml_blend(tau, z_w));
}

MixtureParams mixture_ml_step(const MixtureParams& mix, const SampleBatch& batch, MixtureMode mode,
                              RandomStream* latent) {
  check_batch(batch, mix.dim());
  if (mode == MixtureMode::LatentIndicator && latent == nullptr) {
    throw DomainError("latent-indicator mixture update needs a random stream");
  }
  const std::size_t n = batch.size();
  const std::size_t J = mix.size();
  const double total = batch.weight_sum();
  if (!(total > 0.0)) {
    throw DegenerateBatchError("all rank weights are zero");
  }

  // attribution(n, j): rho_j(x_n), or a one-hot draw from it.
  Eigen::MatrixXd attribution = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                      static_cast<Eigen::Index>(J));
  for (std::size_t i = 0; i < n; ++i) {
    if (batch.rank_weights[i] == 0.0) {
      continue;
    }
    const auto row = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd rho = responsibilities(mix, batch.points.col(row));
    if (mode == MixtureMode::RaoBlackwell) {
      attribution.row(row) = rho.transpose();
    } else {
      const double u = latent->uniform();
      double acc = 0.0;
      std::size_t pick = J - 1;
      for (std::size_t j = 0; j < J; ++j) {
        acc += rho(static_cast<Eigen::Index>(j));
        if (u < acc) {
          pick = j;
          break;
        }
      }
      attribution(row, static_cast<Eigen::Index>(pick)) = 1.0;
    }
  }

  Eigen::VectorXd weights(static_cast<Eigen::Index>(J));
  std::vector<GaussianParams> components;
  components.reserve(J);
  std::size_t frozen = 0;
  std::vector<double> w(n);
  for (std::size_t j = 0; j < J; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = batch.rank_weights[i] * attribution(static_cast<Eigen::Index>(i), col);
    }
    const double mass = pairwise_sum(w) / total;
    const auto& comp = mix.components()[j];
    if (!(mass >= kMixtureMinWeight)) {
      weights(col) = kMixtureMinWeight;
      components.push_back(comp);
      ++frozen;
      continue;
    }
    weights(col) = mass;
    const MomentAcc first = centered_moments(w, batch.points, comp.mean(), false);
    const Eigen::VectorXd mean = comp.mean() + first.m;
    const MomentAcc second = centered_moments(w, batch.points, mean, true);
    try {
      components.emplace_back(mean, finalize_update_covariance(second.s));
    } catch (const FactorizationError& e) {
      throw StepFailure("mixture component " + std::to_string(j) + ": " + e.what());
    }
  }
  if (frozen == J) {
    throw StepFailure("every mixture component is frozen");
  }
  return MixtureParams(weights, std::move(components));
}

StudentUpdate student_ml_update(const StudentParams& st, const SampleBatch& batch,
                                SigmaVariant variant) {
  check_batch(batch, st.dim());
  const std::size_t n = batch.size();
  const double total = batch.weight_sum();
  if (!(total > 0.0)) {
    throw DegenerateBatchError("all rank weights are zero");
  }
  std::vector<double> a(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (batch.rank_weights[i] != 0.0) {
      a[i] = batch.rank_weights[i] *
             gamma_factor(st, batch.points.col(static_cast<Eigen::Index>(i)));
    }
  }
  const double gamma_mass = pairwise_sum(a);
  const MomentAcc first = centered_moments(a, batch.points, st.location(), false);
  StudentUpdate out;
  out.location = st.location() + first.m;
  // E_pi[g (X - mu)(X - mu)^T] / E_pi[g]
  out.scale = centered_moments(a, batch.points, out.location, true).s;
  if (variant == SigmaVariant::ProofExact) {
    out.scale *= gamma_mass / total;
  }
  return out;
}

StudentParams student_ml_step(const StudentParams& st, const SampleBatch& batch,
                              SigmaVariant variant) {
  StudentUpdate u = student_ml_update(st, batch, variant);
  try {
    return StudentParams(u.location, finalize_update_covariance(u.scale), st.dof());
  } catch (const FactorizationError& e) {
    throw StepFailure(std::string("Student update: ") + e.what());
  }
}

void check_family_compatible(const ProposalParams& params, Rule rule) {
  const bool ok = [&] {
    switch (rule) {
    case Rule::IgoNg:
    case Rule::IgoMl:
      return std::holds_alternative<GaussianParams>(params) ||
             std::holds_alternative<BernoulliParams>(params);
    case Rule::MixtureMl:
      return std::holds_alternative<MixtureParams>(params);
    case Rule::StudentMl:
      return std::holds_alternative<StudentParams>(params);
    }
    return false;
  }();
  if (!ok) {
    throw ConfigError("rule " + to_string(rule) + " cannot update a " + family_name(params) +
                      " proposal");
  }
}

ProposalParams apply_step(const ProposalParams& params, const SampleBatch& batch,
                          const StepConfig& cfg) {
  check_family_compatible(params, cfg.rule);
  const double z_w = cfg.weight.mass();
  switch (cfg.rule) {
  case Rule::IgoNg:
    if (const auto* g = std::get_if<GaussianParams>(&params)) {
      return igo_ng_step(*g, batch, cfg.step_size, z_w);
    }
    return igo_ng_step(std::get<BernoulliParams>(params), batch, cfg.step_size, z_w);
  case Rule::IgoMl:
    if (const auto* g = std::get_if<GaussianParams>(&params)) {
      return igo_ml_step(*g, batch, cfg.step_size, z_w);
    }
    return igo_ml_step(std::get<BernoulliParams>(params), batch, cfg.step_size, z_w);
  case Rule::MixtureMl:
    return mixture_ml_step(std::get<MixtureParams>(params), batch);
  case Rule::StudentMl:
    return student_ml_step(std::get<StudentParams>(params), batch, cfg.sigma_variant);
  }
  throw ConfigError("unknown rule");
}

Trajectory optimize(const ProposalParams& initial, const Objective& obj, const StepConfig& cfg,
                    std::size_t iterations, std::uint64_t seed,
                    const std::optional<DiagnosticsConfig>& diagnostics,
                    const IterationObserver& observer) {
  cfg.validate();
  check_family_compatible(initial, cfg.rule);
  if (dimension(initial) != obj.dim()) {
    throw ConfigError("proposal and objective differ in dimension");
  }
  Trajectory traj;
  traj.config = cfg;
  traj.run_seed = seed;
  traj.params_history.push_back(initial);

  ProposalParams current = initial;
  for (std::size_t k = 0; k < iterations; ++k) {
    std::optional<ProposalParams> next;
    std::optional<IterationReport> report;
    try {
      const RandomStream stream(seed, k, Purpose::Optimize);
      const SampleBatch batch =
          draw_batch(current, obj, cfg.weight, cfg.tie_mode, stream, cfg.batch_size);
      next = apply_step(current, batch, cfg);
      if (diagnostics) {
        report = diagnose_step(current, *next, obj, *diagnostics, cfg.rule, cfg.step_size, seed, k);
      }
    } catch (const Error& e) {
      traj.failed = true;
      traj.failure = "iteration " + std::to_string(k) + ": " + e.what();
      break;
    }
    traj.params_history.push_back(*next);
    if (report) {
      traj.reports.push_back(*report);
    }
    if (observer) {
      observer(k, *next, report ? &*report : nullptr);
    }
    current = std::move(*next);
  }
  return traj;
}

} // namespace qd
