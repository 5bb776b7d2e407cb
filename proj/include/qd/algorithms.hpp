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

#include "qd/batch.hpp"
#include "qd/core.hpp"
#include "qd/diagnostics.hpp"
#include "qd/proposals.hpp"
#include "qd/random.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace qd {

enum class SigmaVariant {
  /// Weighted second moment divided by the mean gamma factor, minus mu mu^T.
  PaperEq,
  /// Sigma = E_pi[gamma (X - mu)(X - mu)^T], the maximizer of the latent
  /// Gaussian log-likelihood.
  ProofExact,
};

/// How mixture updates attribute points to components.
enum class MixtureMode {
  /// Responsibilities rho(x).
  RaoBlackwell,
  /// One-hot latent indicators drawn from rho(x).
  LatentIndicator,
};

std::string to_string(SigmaVariant v);
SigmaVariant parse_sigma_variant(const std::string& s);

struct StepConfig {
  Rule rule = Rule::IgoMl;
  double step_size = 1.0;
  WeightFn weight = WeightFn::indicator(0.3);
  std::size_t batch_size = 1000;
  SigmaVariant sigma_variant = SigmaVariant::PaperEq;
  TieMode tie_mode = TieMode::Strict;

  /// Throws ConfigError on out-of-range step size or batch size.
  void validate() const;
};

/// Moment-coordinate forms of the two exponential-family updates.
/// Natural gradient: (1 - tau Z_w) eta_k + tau Z_w eta_pi.
MomentParams igo_ng_moments(const MomentParams& eta_k, const MomentParams& eta_pi, double tau,
                            double z_w);
/// Weighted ML: [(1 - tau) eta_k + tau Z_w eta_pi] / [(1 - tau) + tau Z_w].
MomentParams igo_ml_moments(const MomentParams& eta_k, const MomentParams& eta_pi, double tau,
                            double z_w);

GaussianParams igo_ng_step(const GaussianParams& params, const SampleBatch& batch, double tau,
                           double z_w);
BernoulliParams igo_ng_step(const BernoulliParams& params, const SampleBatch& batch, double tau,
                            double z_w);
GaussianParams igo_ml_step(const GaussianParams& params, const SampleBatch& batch, double tau,
                           double z_w);
BernoulliParams igo_ml_step(const BernoulliParams& params, const SampleBatch& batch, double tau,
                            double z_w);

/// Components whose target mass falls below this are frozen.
inline constexpr double kMixtureMinWeight = 1e-6;

/// EM-style mixture update. LatentIndicator mode needs `latent`.
MixtureParams mixture_ml_step(const MixtureParams& mix, const SampleBatch& batch,
                              MixtureMode mode = MixtureMode::RaoBlackwell,
                              RandomStream* latent = nullptr);

/// Location and scale of the Student update before covariance repair.
struct StudentUpdate {
  Eigen::VectorXd location;
  Eigen::MatrixXd scale;
};

StudentUpdate student_ml_update(const StudentParams& st, const SampleBatch& batch,
                                SigmaVariant variant = SigmaVariant::PaperEq);

StudentParams student_ml_step(const StudentParams& st, const SampleBatch& batch,
                              SigmaVariant variant = SigmaVariant::PaperEq);

/// Dispatches on cfg.rule. Throws ConfigError when the family does not match.
ProposalParams apply_step(const ProposalParams& params, const SampleBatch& batch,
                          const StepConfig& cfg);

struct Trajectory {
  std::vector<ProposalParams> params_history;
  std::vector<IterationReport> reports;
  StepConfig config;
  std::uint64_t run_seed = 0;
  bool failed = false;
  std::string failure;
};

/// Called after each completed iteration with the new parameters and, when
/// diagnostics run, the iteration report.
using IterationObserver =
    std::function<void(std::size_t k, const ProposalParams& next, const IterationReport* report)>;

/// Runs K iterations of sample -> evaluate -> rank -> step [-> diagnose].
/// Step failures end the loop and are recorded on the trajectory.
Trajectory optimize(const ProposalParams& initial, const Objective& obj, const StepConfig& cfg,
                    std::size_t iterations, std::uint64_t seed,
                    const std::optional<DiagnosticsConfig>& diagnostics = std::nullopt,
                    const IterationObserver& observer = {});

/// Throws ConfigError when the proposal family cannot be used with `rule`.
void check_family_compatible(const ProposalParams& params, Rule rule);

} // namespace qd
