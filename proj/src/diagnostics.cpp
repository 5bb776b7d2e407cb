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
#include "qd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

namespace qd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Substream keys under a caller-supplied stream.
constexpr std::uint64_t kCurTag = 0x51D0'0001;
constexpr std::uint64_t kNextTag = 0x51D0'0002;
constexpr std::uint64_t kBootTag = 0x51D0'0003;

using Index = std::vector<std::size_t>;

std::vector<double> gather(std::span<const double> v, const Index& idx) {
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out[i] = v[idx[i]];
  }
  return out;
}

/// n draws with replacement from {0..n-1}, returned in ascending order.
Index draw_indices(RandomStream& s, std::size_t n) {
  std::vector<std::uint32_t> count(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    ++count[s.index(n)];
  }
  Index idx;
  idx.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    idx.insert(idx.end(), count[i], i);
  }
  return idx;
}

/// Stable ascending order of f.
Index sort_order(std::span<const double> f) {
  Index order(f.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!std::is_sorted(f.begin(), f.end())) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
  }
  return order;
}

/// order[ip[k]]; with ip ascending this gathers in ascending f.
Index compose(const Index& order, const Index& ip) {
  Index out(ip.size());
  for (std::size_t k = 0; k < ip.size(); ++k) {
    out[k] = order[ip[k]];
  }
  return out;
}

/// Rank weights of a bootstrap replicate. In strict mode duplicated draws are
/// ranked in resample order so that resampling alone does not create ties.
std::vector<double> replicate_weights(std::span<const double> f, const WeightFn& w, TieMode mode) {
  if (mode == TieMode::TieAveraged) {
    return rank_weights(f, w, mode);
  }
  const std::size_t n = f.size();
  const Index order = sort_order(f);
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    out[order[r]] = inv_n * w((static_cast<double>(r) + 0.5) * inv_n);
  }
  return out;
}

/// Standard deviation of each statistic over bootstrap replicates. `stat`
/// maps (prev indices, next indices) to a statistic vector the size of `base`.
template <typename Stat>
std::vector<double> bootstrap_sd(std::size_t n_prev, std::size_t n_next, std::size_t replicates,
                                 const RandomStream& stream, std::size_t n_stats, Stat&& stat) {
  std::vector<std::vector<double>> reps(replicates);
  parallel_for(replicates, [&](std::size_t b) {
    RandomStream s = stream.substream(b);
    const Index ip = draw_indices(s, n_prev);
    const Index in = n_next > 0 ? draw_indices(s, n_next) : Index{};
    reps[b] = stat(ip, in);
  });
  std::vector<double> sd(n_stats, 0.0);
  std::vector<double> col;
  for (std::size_t j = 0; j < n_stats; ++j) {
    col.clear();
    for (const auto& r : reps) {
      if (std::isfinite(r[j])) {
        col.push_back(r[j]);
      }
    }
    if (col.size() < 2) {
      continue;
    }
    const double mean = pairwise_sum(col) / static_cast<double>(col.size());
    for (double& v : col) {
      v = (v - mean) * (v - mean);
    }
    sd[j] = std::sqrt(pairwise_sum(col) / static_cast<double>(col.size() - 1));
  }
  return sd;
}

struct KlValue {
  double value;
  bool infinite;
};

/// E_pi[ln(W/Z_w)] + E_pi[ln p_cur - ln p_other] with W = N * weight.
KlValue kl_value(std::span<const double> weights, std::span<const double> lp_cur,
                 std::span<const double> lp_other, double z_w) {
  const std::size_t n = weights.size();
  const double total = pairwise_sum(weights);
  if (!(total > 0.0)) {
    throw DegenerateBatchError("all rank weights are zero");
  }
  const double log_n_over_z = std::log(static_cast<double>(n)) - std::log(z_w);
  std::vector<double> terms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] == 0.0) {
      continue;
    }
    if (lp_other[i] == -kInf) {
      return {kInf, true};
    }
    terms[i] = weights[i] * (std::log(weights[i]) + log_n_over_z + lp_cur[i] - lp_other[i]);
  }
  return {pairwise_sum(terms) / total, false};
}

/// (1/(alpha-1)) ln E_pi[(W/Z_w)^(alpha-1) (p_other/p_cur)^(1-alpha)].
double renyi_value(std::span<const double> weights, std::span<const double> lp_cur,
                   std::span<const double> lp_other, double z_w, double alpha) {
  const std::size_t n = weights.size();
  const double total = pairwise_sum(weights);
  if (!(total > 0.0)) {
    throw DegenerateBatchError("all rank weights are zero");
  }
  const double log_n_over_z = std::log(static_cast<double>(n)) - std::log(z_w);
  std::vector<double> terms;
  terms.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] == 0.0) {
      continue;
    }
    const double lw = std::log(weights[i]);
    terms.push_back(lw + (alpha - 1.0) * (lw + log_n_over_z) +
                    (1.0 - alpha) * (lp_other[i] - lp_cur[i]));
  }
  return (log_sum_exp(terms) - std::log(total)) / (alpha - 1.0);
}

/// Mean preference of next-values ranked against a sorted cur-sample.
double j_value(const std::vector<double>& cur_sorted, std::span<const double> next_f,
               const WeightFn& w) {
  const auto n = static_cast<double>(cur_sorted.size());
  std::vector<double> pref(next_f.size());
  for (std::size_t i = 0; i < next_f.size(); ++i) {
    const auto lt = std::lower_bound(cur_sorted.begin(), cur_sorted.end(), next_f[i]);
    const auto leq = std::upper_bound(lt, cur_sorted.end(), next_f[i]);
    const QuantilePair qp{static_cast<double>(lt - cur_sorted.begin()) / n,
                          static_cast<double>(leq - cur_sorted.begin()) / n};
    pref[i] = preference(w, qp);
  }
  return pairwise_sum(pref) / static_cast<double>(next_f.size());
}

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  if (!std::is_sorted(out.begin(), out.end())) {
    std::sort(out.begin(), out.end());
  }
  return out;
}

double cdf_leq(const std::vector<double>& sorted, double u) {
  return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), u) - sorted.begin()) /
         static_cast<double>(sorted.size());
}

bool has_ties(std::span<const double> f) {
  const std::vector<double> s = sorted_copy(f);
  return std::adjacent_find(s.begin(), s.end()) != s.end();
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("Renyi order must lie in (0, 1)");
  }
}

void check_renyi_supported(std::span<const double> f, const WeightFn& w, TieMode mode) {
  if (mode == TieMode::Strict && (!w.binary_valued() || has_ties(f))) {
    throw UnsupportedError(
        "Renyi estimate in strict mode needs a 0/1-valued weight and tie-free objective values");
  }
}

std::vector<double> origin_log_densities(const SampleBatch& batch) {
  if (!batch.origin) {
    throw DomainError("batch has no recorded proposal");
  }
  return log_densities(*batch.origin, batch.points);
}

struct BoundStat {
  double rhs;
  double statistic;
  bool vacuous;
};

BoundStat bound_stat(double q_prev, double q_next, const std::vector<double>& next_sorted,
                     double delta) {
  const double a = std::exp(delta) * cdf_leq(next_sorted, q_next);
  const double target = std::min(1.0, a);
  // smallest v with F(v) >= target
  const auto n = static_cast<double>(next_sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(target * n));
  if (k > 0 && static_cast<double>(k - 1) / n >= target) {
    --k;
  }
  k = std::clamp<std::size_t>(k, 1, next_sorted.size());
  return {next_sorted[k - 1], cdf_leq(next_sorted, q_prev) - target, a > 1.0};
}

CheckOutcome outcome(std::string name, double statistic, double sd, bool applicable = true) {
  CheckOutcome c;
  c.name = std::move(name);
  c.applicable = applicable;
  c.statistic = statistic;
  c.tolerance = 3.0 * sd;
  c.pass = !applicable || statistic >= -c.tolerance;
  return c;
}

double family_kl(const ProposalParams& p1, const ProposalParams& p2) {
  if (const auto* g1 = std::get_if<GaussianParams>(&p1)) {
    if (const auto* g2 = std::get_if<GaussianParams>(&p2)) {
      return gaussian_kl(*g1, *g2);
    }
  }
  if (const auto* b1 = std::get_if<BernoulliParams>(&p1)) {
    if (const auto* b2 = std::get_if<BernoulliParams>(&p2)) {
      return bernoulli_kl(*b1, *b2);
    }
  }
  throw UnsupportedError("closed-form KL needs two Gaussian or two Bernoulli proposals");
}

} // namespace

const CheckOutcome* IterationReport::check(const std::string& name) const {
  for (const auto& c : bound_checks) {
    if (c.name == name) {
      return &c;
    }
  }
  return nullptr;
}

Estimate estimate_J_from_values(std::span<const double> cur_f, std::span<const double> next_f,
                                const WeightFn& w, const RandomStream& stream,
                                BootstrapOptions boot) {
  if (cur_f.size() < 2 || next_f.size() < 2) {
    throw DomainError("J estimate needs at least two points per sample");
  }
  Estimate est;
  est.value = j_value(sorted_copy(cur_f), next_f, w);
  if (boot.replicates == 0) {
    // Error conditional on the cur-sample.
    const std::vector<double> cur_sorted = sorted_copy(cur_f);
    std::vector<double> sq(next_f.size());
    for (std::size_t i = 0; i < next_f.size(); ++i) {
      const double v = j_value(cur_sorted, next_f.subspan(i, 1), w) - est.value;
      sq[i] = v * v;
    }
    const auto m = static_cast<double>(next_f.size());
    est.std_error = std::sqrt(pairwise_sum(sq) / (m - 1.0) / m);
    return est;
  }
  const std::vector<double> cur_sorted = sorted_copy(cur_f);
  const auto sd = bootstrap_sd(cur_f.size(), next_f.size(), boot.replicates,
                               stream.substream(kBootTag), 1, [&](const Index& ip, const Index& in) {
                                 return std::vector<double>{
                                     j_value(gather(cur_sorted, ip), gather(next_f, in), w)};
                               });
  est.std_error = sd[0];
  return est;
}

Estimate estimate_J(const ProposalParams& next, const ProposalParams& cur, const Objective& obj,
                    const WeightFn& w, std::size_t n, const RandomStream& stream,
                    BootstrapOptions boot) {
  if (n < 2) {
    throw DomainError("J estimate needs N >= 2");
  }
  const std::vector<double> cur_f = obj.evaluate(sample(cur, stream.substream(kCurTag), n));
  const std::vector<double> next_f = obj.evaluate(sample(next, stream.substream(kNextTag), n));
  return estimate_J_from_values(cur_f, next_f, w, stream, boot);
}

KlEstimate estimate_target_kl(const SampleBatch& cur_batch, const ProposalParams& other,
                              const WeightFn& w, const RandomStream& stream,
                              BootstrapOptions boot) {
  const std::vector<double> lp_cur = origin_log_densities(cur_batch);
  const std::vector<double> lp_other = log_densities(other, cur_batch.points);
  const double z_w = w.mass();
  const KlValue base = kl_value(cur_batch.rank_weights, lp_cur, lp_other, z_w);
  KlEstimate est{base.value, 0.0, base.infinite};
  if (base.infinite) {
    return est;
  }
  if (boot.replicates == 0) {
    std::vector<double> terms(cur_batch.size());
    const double log_n_over_z = std::log(static_cast<double>(cur_batch.size())) - std::log(z_w);
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const double wi = cur_batch.rank_weights[i];
      terms[i] = wi > 0.0 ? std::log(wi) + log_n_over_z + lp_cur[i] - lp_other[i] : 0.0;
    }
    est.std_error = weighted_mean(cur_batch.rank_weights, terms).std_error;
    return est;
  }
  const Index order = sort_order(cur_batch.f_values);
  const auto sd = bootstrap_sd(
      cur_batch.size(), 0, boot.replicates, stream.substream(kBootTag), 1,
      [&](const Index& ip, const Index&) {
        const Index idx = compose(order, ip);
        const auto f = gather(cur_batch.f_values, idx);
        return std::vector<double>{kl_value(replicate_weights(f, w, cur_batch.tie_mode),
                                            gather(lp_cur, idx), gather(lp_other, idx), z_w)
                                       .value};
      });
  est.std_error = sd[0];
  return est;
}

Estimate estimate_target_renyi(const SampleBatch& cur_batch, const ProposalParams& other,
                               const WeightFn& w, double alpha, const RandomStream& stream,
                               BootstrapOptions boot) {
  check_alpha(alpha);
  check_renyi_supported(cur_batch.f_values, w, cur_batch.tie_mode);
  const std::vector<double> lp_cur = origin_log_densities(cur_batch);
  const std::vector<double> lp_other = log_densities(other, cur_batch.points);
  const double z_w = w.mass();
  Estimate est;
  est.value = renyi_value(cur_batch.rank_weights, lp_cur, lp_other, z_w, alpha);
  if (boot.replicates == 0 || !std::isfinite(est.value)) {
    return est;
  }
  const Index order = sort_order(cur_batch.f_values);
  const auto sd = bootstrap_sd(
      cur_batch.size(), 0, boot.replicates, stream.substream(kBootTag), 1,
      [&](const Index& ip, const Index&) {
        const Index idx = compose(order, ip);
        const auto f = gather(cur_batch.f_values, idx);
        return std::vector<double>{renyi_value(replicate_weights(f, w, cur_batch.tie_mode),
                                               gather(lp_cur, idx), gather(lp_other, idx), z_w,
                                               alpha)};
      });
  est.std_error = sd[0];
  return est;
}

std::vector<CheckOutcome> check_improvement_bound(const IterationReport& report, double z_w) {
  std::vector<CheckOutcome> out;
  out.push_back(outcome("improvement", report.j_hat.value - std::exp(report.delta_hat) * z_w,
                        report.improvement_stderr));
  const bool increase_applies = report.delta_hat > 3.0 * report.delta_hat_stderr;
  out.push_back(outcome("increase", report.j_hat.value - z_w, report.increase_stderr,
                        increase_applies));
  out.push_back(outcome("quantile_monotone", report.monotone_statistic, report.monotone_stderr));
  return out;
}

QuantileBound quantile_bound_check(std::span<const double> prev_f, std::span<const double> next_f,
                                   double delta_hat, double q, double tolerance) {
  if (prev_f.empty() || next_f.size() < 2) {
    throw DomainError("quantile bound needs non-empty samples");
  }
  const double q_prev = empirical_quantile(prev_f, q);
  const double q_next = empirical_quantile(next_f, q);
  const std::vector<double> next_sorted = sorted_copy(next_f);
  const BoundStat b = bound_stat(q_prev, q_next, next_sorted, delta_hat);

  QuantileBound out;
  out.rhs = b.rhs;
  out.vacuous = b.vacuous;
  out.statistic = b.statistic;
  out.tolerance = tolerance;
  out.pass = b.vacuous || b.statistic >= -tolerance;

  // Q_next + q * delta * dF^{-1}/dp at q, central difference of the empirical
  // inverse with h ~ N^{-1/3}.
  const EmpiricalCdf cdf(next_f);
  const double n = static_cast<double>(next_f.size());
  const double h = std::min(std::cbrt(1.0 / n), 0.5 * std::min(q, 1.0 - q));
  double slope = 0.0;
  if (h > 0.0) {
    slope = (cdf.inverse(q + h) - cdf.inverse(q - h)) / (2.0 * h);
  }
  out.linearized = q_next + q * delta_hat * slope;
  return out;
}

double igo_delta_coefficient(Rule rule, double tau, double z_w) {
  if (!(tau > 0.0) || !(z_w > 0.0)) {
    throw DomainError("coefficient needs tau > 0 and Z_w > 0");
  }
  switch (rule) {
  case Rule::IgoNg:
    return std::max(0.0, (1.0 - tau * z_w) / (tau * z_w));
  case Rule::IgoMl:
    return (1.0 - tau) / (tau * z_w);
  default:
    throw UnsupportedError("predicted decrease is defined for IGO rules only");
  }
}

CheckOutcome check_igo_delta_formula(const ProposalParams& prev, const ProposalParams& next,
                                     double tau, double z_w, Rule rule,
                                     const IterationReport& report) {
  const double pred = igo_delta_coefficient(rule, tau, z_w) * family_kl(prev, next);
  // kl_next + pred <= kl_prev + tol  <=>  delta - pred >= -tol
  return outcome("igo_delta", report.delta_hat - pred, report.delta_hat_stderr);
}

IterationReport diagnose_step(const ProposalParams& prev, const ProposalParams& next,
                              const Objective& obj, const DiagnosticsConfig& cfg, Rule rule,
                              double tau, std::uint64_t run_seed, std::size_t iteration) {
  const std::size_t m = cfg.batch_size;
  if (m < 2) {
    throw ConfigError("diagnostics batch size must be >= 2");
  }
  const WeightFn& w = cfg.weight;
  const double z_w = w.mass();
  const double q = cfg.quantile_level;

  const SampleBatch pb =
      draw_batch(prev, obj, w, cfg.tie_mode, RandomStream(run_seed, iteration, Purpose::DiagPrev), m);
  const std::vector<double> next_f =
      obj.evaluate(sample(next, RandomStream(run_seed, iteration, Purpose::DiagNext), m));
  const std::vector<double> lp_prev = log_densities(prev, pb.points);
  const std::vector<double> lp_next = log_densities(next, pb.points);

  std::vector<double> alphas;
  const bool renyi_ok = [&] {
    try {
      check_renyi_supported(pb.f_values, w, cfg.tie_mode);
      return true;
    } catch (const UnsupportedError&) {
      return false;
    }
  }();
  if (renyi_ok) {
    for (double a : cfg.renyi_alphas) {
      check_alpha(a);
      alphas.push_back(a);
    }
  }

  enum : std::size_t { kJ, kKlPrev, kKlNext, kDelta, kImprove, kMonotone, kBound, kFixed };
  const std::size_t n_stats = kFixed + 2 * alphas.size();

  // All statistics of one (re)sample; f-values and densities are indexed
  // in the prev sample, next_f in the next sample.
  auto stats = [&](std::span<const double> pf, std::span<const double> pw,
                   std::span<const double> lpp, std::span<const double> lpn,
                   std::span<const double> nf, std::vector<double>* qs) {
    std::vector<double> s(n_stats, 0.0);
    const std::vector<double> prev_sorted = sorted_copy(pf);
    const std::vector<double> next_sorted = sorted_copy(nf);
    s[kJ] = j_value(prev_sorted, nf, w);
    s[kKlPrev] = kl_value(pw, lpp, lpp, z_w).value;
    s[kKlNext] = kl_value(pw, lpp, lpn, z_w).value;
    s[kDelta] = s[kKlPrev] - s[kKlNext];
    s[kImprove] = s[kJ] - std::exp(s[kDelta]) * z_w;
    const double q_prev = empirical_quantile(pf, q);
    const double q_next = empirical_quantile(nf, q);
    s[kMonotone] = cdf_leq(next_sorted, q_prev) - cdf_leq(next_sorted, q_next);
    s[kBound] = bound_stat(q_prev, q_next, next_sorted, s[kDelta]).statistic;
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      s[kFixed + 2 * a] = renyi_value(pw, lpp, lpp, z_w, alphas[a]);
      s[kFixed + 2 * a + 1] = renyi_value(pw, lpp, lpn, z_w, alphas[a]);
    }
    if (qs != nullptr) {
      *qs = {q_prev, q_next};
    }
    return s;
  };

  std::vector<double> qs;
  const std::vector<double> base = stats(pb.f_values, pb.rank_weights, lp_prev, lp_next, next_f, &qs);
  const KlValue kl_next = kl_value(pb.rank_weights, lp_prev, lp_next, z_w);

  std::vector<double> sd(n_stats, 0.0);
  if (cfg.bootstrap.replicates > 0) {
    const Index order = sort_order(pb.f_values);
    const std::vector<double> next_sorted = sorted_copy(next_f);
    sd = bootstrap_sd(m, m, cfg.bootstrap.replicates,
                      RandomStream(run_seed, iteration, Purpose::Bootstrap), n_stats,
                      [&](const Index& ip, const Index& in) {
                        const Index idx = compose(order, ip);
                        const auto pf = gather(pb.f_values, idx);
                        return stats(pf, replicate_weights(pf, w, cfg.tie_mode), gather(lp_prev, idx),
                                     gather(lp_next, idx), gather(next_sorted, in), nullptr);
                      });
  }

  IterationReport r;
  r.iteration = iteration;
  r.j_hat = {base[kJ], sd[kJ]};
  r.q_hat_prev = qs[0];
  r.q_hat_next = qs[1];
  r.kl_target_prev = {base[kKlPrev], sd[kKlPrev], false};
  r.kl_target_next = {base[kKlNext], kl_next.infinite ? 0.0 : sd[kKlNext], kl_next.infinite};
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    r.renyi_target.push_back({alphas[a],
                              {base[kFixed + 2 * a], sd[kFixed + 2 * a]},
                              {base[kFixed + 2 * a + 1], sd[kFixed + 2 * a + 1]}});
  }
  r.delta_hat = r.kl_target_prev.value - r.kl_target_next.value;
  r.delta_hat_stderr = sd[kDelta];
  r.improvement_stderr = sd[kImprove];
  r.increase_stderr = sd[kJ];
  r.monotone_statistic = base[kMonotone];
  r.monotone_stderr = sd[kMonotone];

  r.quantile_bound = quantile_bound_check(pb.f_values, next_f, r.delta_hat, q, 3.0 * sd[kBound]);
  const bool bound_applies = cfg.quantile && w.kind() == WeightFn::Kind::Indicator &&
                             obj.domain_kind() == DomainKind::Continuous &&
                             !r.quantile_bound.vacuous;

  if (cfg.improvement) {
    for (auto& c : check_improvement_bound(r, z_w)) {
      if (c.name != "quantile_monotone" || cfg.quantile) {
        r.bound_checks.push_back(std::move(c));
      }
    }
  }
  if (cfg.quantile) {
    if (!cfg.improvement) {
      r.bound_checks.push_back(outcome("quantile_monotone", r.monotone_statistic, r.monotone_stderr));
    }
    CheckOutcome c;
    c.name = "quantile_bound";
    c.applicable = bound_applies;
    c.statistic = r.quantile_bound.statistic;
    c.tolerance = r.quantile_bound.tolerance;
    c.pass = !bound_applies || r.quantile_bound.pass;
    r.bound_checks.push_back(c);
  }
  const bool igo = rule == Rule::IgoNg || rule == Rule::IgoMl;
  if (cfg.igo_delta && igo) {
    r.bound_checks.push_back(check_igo_delta_formula(prev, next, tau, z_w, rule, r));
  }
  if (cfg.kl_decrease) {
    r.bound_checks.push_back(outcome("kl_decrease", r.delta_hat, r.delta_hat_stderr));
  }
  return r;
}

} // namespace qd
