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
#include "qd/proposals.hpp"
#include "qd/random.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qd {

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// KL estimate; `infinite` is set when the other density vanishes at a point
/// carrying target mass, in which case `value` is +inf.
struct KlEstimate {
  double value = 0.0;
  double std_error = 0.0;
  bool infinite = false;
};

/// Standard errors come from a nonparametric bootstrap over the sample(s)
/// behind an estimate, ranks recomputed per replicate. replicates == 0 falls
/// back to the delta-method error conditional on the rank weights.
struct BootstrapOptions {
  std::size_t replicates = 64;
};

/// J(next | cur): mean preference of fresh next-points, each ranked against an
/// independent cur-sample.
Estimate estimate_J(const ProposalParams& next, const ProposalParams& cur, const Objective& obj,
                    const WeightFn& w, std::size_t n, const RandomStream& stream,
                    BootstrapOptions boot = {});
Estimate estimate_J_from_values(std::span<const double> cur_f, std::span<const double> next_f,
                                const WeightFn& w, const RandomStream& stream,
                                BootstrapOptions boot = {});

/// KL(pi, other), pi being the target built from the batch's proposal.
KlEstimate estimate_target_kl(const SampleBatch& cur_batch, const ProposalParams& other,
                              const WeightFn& w, const RandomStream& stream,
                              BootstrapOptions boot = {});

/// Renyi divergence D_alpha(pi, other) for alpha in (0, 1). Requires a
/// binary-valued preference: in strict mode the batch must be tie-free and w
/// binary-valued, otherwise UnsupportedError. In tie-averaged mode the
/// preference-weighted form (W/Z_w)^(alpha-1) (p_other/p_cur)^(1-alpha) is
/// used, which reduces to the binary form when W is 0/1.
Estimate estimate_target_renyi(const SampleBatch& cur_batch, const ProposalParams& other,
                               const WeightFn& w, double alpha, const RandomStream& stream,
                               BootstrapOptions boot = {});

/// One named pass/fail outcome. A check passes when statistic >= -tolerance.
struct CheckOutcome {
  std::string name;
  bool applicable = true;
  bool pass = true;
  double statistic = 0.0;
  double tolerance = 0.0;
};

struct RenyiEntry {
  double alpha = 0.0;
  Estimate prev;
  Estimate next;
};

struct QuantileBound {
  double rhs = 0.0;
  double linearized = 0.0;
  bool vacuous = false;
  bool pass = true;
  /// F_next(Q_prev) - exp(delta) F_next(Q_next), probability scale.
  double statistic = 0.0;
  double tolerance = 0.0;
};

struct IterationReport {
  std::size_t iteration = 0;
  Estimate j_hat;
  double q_hat_prev = 0.0;
  double q_hat_next = 0.0;
  KlEstimate kl_target_prev;
  KlEstimate kl_target_next;
  std::vector<RenyiEntry> renyi_target;
  double delta_hat = 0.0;
  double delta_hat_stderr = 0.0;
  QuantileBound quantile_bound;
  /// Bootstrap errors of the check statistics, consumed by the checkers.
  double improvement_stderr = 0.0;
  double increase_stderr = 0.0;
  double monotone_statistic = 0.0;
  double monotone_stderr = 0.0;
  std::vector<CheckOutcome> bound_checks;

  const CheckOutcome* check(const std::string& name) const;
};

/// Outcomes "improvement", "increase" and "quantile_monotone".
std::vector<CheckOutcome> check_improvement_bound(const IterationReport& report, double z_w);

/// Bound on the previous quantile implied by a decrease delta. `tolerance` is
/// on the probability scale of the next proposal's f-CDF.
QuantileBound quantile_bound_check(std::span<const double> prev_f, std::span<const double> next_f,
                                   double delta_hat, double q, double tolerance);

/// Coefficient c of the predicted decrease c * KL(p_k, p_{k+1}):
/// (1 - tau Z_w)/(tau Z_w) for IgoNg, (1 - tau)/(tau Z_w) for IgoMl.
double igo_delta_coefficient(Rule rule, double tau, double z_w);

/// Passes when kl_next + delta_pred <= kl_prev + 3 stderr.
CheckOutcome check_igo_delta_formula(const ProposalParams& prev, const ProposalParams& next,
                                     double tau, double z_w, Rule rule,
                                     const IterationReport& report);

struct DiagnosticsConfig {
  WeightFn weight = WeightFn::indicator(0.3);
  TieMode tie_mode = TieMode::Strict;
  std::size_t batch_size = 1000;
  double quantile_level = 0.3;
  std::vector<double> renyi_alphas;
  BootstrapOptions bootstrap;
  bool improvement = true;
  bool quantile = true;
  bool igo_delta = true;
  bool kl_decrease = true;
};

/// Full per-iteration diagnostics for the move prev -> next, on fresh batches
/// drawn from prev and next with purpose-tagged streams.
IterationReport diagnose_step(const ProposalParams& prev, const ProposalParams& next,
                              const Objective& obj, const DiagnosticsConfig& cfg, Rule rule,
                              double tau, std::uint64_t run_seed, std::size_t iteration);

// ---------------------------------------------------------------------------
// Exact quantities on enumerable domains.

/// The cube {0,1}^d, d <= 20; point i has coordinate j equal to bit j of i.
class DiscreteModel {
public:
  explicit DiscreteModel(int dim);

  int dim() const { return dim_; }
  std::size_t size() const { return std::size_t{1} << dim_; }
  Point point(std::size_t index) const;
  PointSet all_points() const;

private:
  int dim_;
};

QuantilePair exact_quantile_pair(const DiscreteModel& model, const Objective& obj,
                                 const ProposalParams& params, const Point& x);

struct ExactRenyi {
  double alpha = 0.0;
  double prev = 0.0;
  double next = 0.0;
};

struct ExactReport {
  double z_w = 0.0;
  /// W at every point of the model (index order).
  std::vector<double> preference;
  /// Target pi at every point.
  std::vector<double> target;
  double j_self = 0.0;
  double j_next = 0.0;
  double q_prev = 0.0;
  double q_next = 0.0;
  double kl_prev = 0.0;
  double kl_next = 0.0;
  double delta = 0.0;
  std::vector<ExactRenyi> renyi;
};

/// Exact W, pi, J, Q^q, KL and D_alpha by full enumeration. Proposals must be
/// Bernoulli products.
ExactReport exact_report(const DiscreteModel& model, const Objective& obj, const WeightFn& w,
                         const ProposalParams& prev, const ProposalParams& next, double q,
                         std::span<const double> alphas = {});

/// Exact Q^q of f under a discrete distribution given by (value, mass) atoms.
double exact_quantile(std::span<const double> f_values, std::span<const double> probs, double q);

} // namespace qd
