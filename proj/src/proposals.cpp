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

#include "qd/proposals.hpp"

#include "qd/error.hpp"
#include "qd/numeric.hpp"
#include "qd/parallel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

namespace qd {

namespace {

constexpr std::size_t kSampleChunk = 256;

/// Lower Cholesky factor, or nullopt when cov is not numerically positive
/// definite.
std::optional<Eigen::MatrixXd> try_cholesky(const Eigen::MatrixXd& cov) {
  if (!cov.allFinite()) {
    return std::nullopt;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    return std::nullopt;
  }
  Eigen::MatrixXd l = llt.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) {
      return std::nullopt;
    }
  }
  return l;
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

void check_square(const Eigen::VectorXd& v, const Eigen::MatrixXd& m, const char* what) {
  if (v.size() < 1 || m.rows() != v.size() || m.cols() != v.size()) {
    throw DomainError(std::string(what) + ": dimension mismatch");
  }
  if (!v.allFinite() || !m.allFinite()) {
    throw DomainError(std::string(what) + ": non-finite entries");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw DomainError(std::string(what) + ": matrix is not symmetric");
  }
}

Eigen::MatrixXd factorize_or_throw(const Eigen::MatrixXd& cov, const char* what) {
  auto l = try_cholesky(cov);
  if (!l) {
    throw FactorizationError(std::string(what) + ": matrix is not positive definite");
  }
  return *l;
}

double log_det_from_chol(const Eigen::MatrixXd& l) {
  return 2.0 * l.diagonal().array().log().sum();
}

double mahalanobis2_impl(const Eigen::MatrixXd& l, const Eigen::VectorXd& center, const Point& x) {
  if (x.size() != center.size()) {
    throw DomainError("point dimension does not match the proposal");
  }
  const Eigen::VectorXd y = l.triangularView<Eigen::Lower>().solve(x - center);
  return y.squaredNorm();
}

double gaussian_log_density(const GaussianParams& g, const Point& x) {
  const auto d = static_cast<double>(g.dim());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + g.log_det() + g.mahalanobis2(x));
}

double student_log_density(const StudentParams& st, const Point& x) {
  const auto d = static_cast<double>(st.dim());
  const double nu = st.dof();
  return std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) -
         0.5 * d * std::log(nu * std::numbers::pi) - 0.5 * st.log_det() -
         0.5 * (nu + d) * std::log1p(st.mahalanobis2(x) / nu);
}

std::vector<double> component_log_terms(const MixtureParams& mix, const Point& x) {
  std::vector<double> terms(mix.size());
  for (std::size_t j = 0; j < mix.size(); ++j) {
    const double lw = mix.weights()(static_cast<Eigen::Index>(j));
    terms[j] = lw > 0.0 ? std::log(lw) + gaussian_log_density(mix.components()[j], x)
                        : -std::numeric_limits<double>::infinity();
  }
  return terms;
}

double bernoulli_log_density(const BernoulliParams& b, const Point& x) {
  if (x.size() != b.dim()) {
    throw DomainError("point dimension does not match the proposal");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double p = b.probs()(i);
    if (x(i) == 1.0) {
      acc += std::log(p);
    } else if (x(i) == 0.0) {
      acc += std::log1p(-p);
    } else {
      throw DomainError("Bernoulli proposal evaluated at a non-binary point");
    }
  }
  return acc;
}

Point draw_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol, RandomStream& s,
                    double scale) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z(i) = s.normal();
  }
  const Eigen::VectorXd lz = chol.triangularView<Eigen::Lower>() * z;
  return mean + scale * lz;
}

} // namespace

// ---------------------------------------------------------------------------

GaussianParams::GaussianParams(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  check_square(mean_, cov_, "Gaussian covariance");
  cov_ = symmetrized(cov_);
  chol_ = factorize_or_throw(cov_, "Gaussian covariance");
  log_det_ = log_det_from_chol(chol_);
}

double GaussianParams::mahalanobis2(const Point& x) const {
  return mahalanobis2_impl(chol_, mean_, x);
}

StudentParams::StudentParams(Eigen::VectorXd location, Eigen::MatrixXd scale, double dof)
    : location_(std::move(location)), scale_(std::move(scale)), dof_(dof) {
  check_square(location_, scale_, "Student scale");
  if (!(dof_ > 0.0) || !std::isfinite(dof_)) {
    throw DomainError("Student degrees of freedom must be positive");
  }
  scale_ = symmetrized(scale_);
  chol_ = factorize_or_throw(scale_, "Student scale");
  log_det_ = log_det_from_chol(chol_);
}

double StudentParams::mahalanobis2(const Point& x) const {
  return mahalanobis2_impl(chol_, location_, x);
}

MixtureParams::MixtureParams(Eigen::VectorXd weights, std::vector<GaussianParams> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (components_.empty() || weights_.size() != static_cast<Eigen::Index>(components_.size())) {
    throw DomainError("mixture needs J >= 1 components and J weights");
  }
  for (const auto& c : components_) {
    if (c.dim() != components_.front().dim()) {
      throw DomainError("mixture components differ in dimension");
    }
  }
  if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
    throw DomainError("mixture weights must be finite and non-negative");
  }
  const double total = weights_.sum();
  if (!(total > 0.0)) {
    throw DomainError("mixture weights sum to zero");
  }
  weights_ /= total;
}

BernoulliParams::BernoulliParams(Eigen::VectorXd probs)
    : BernoulliParams(probs, default_p_min(static_cast<int>(probs.size()))) {}

BernoulliParams::BernoulliParams(Eigen::VectorXd probs, double p_min)
    : probs_(std::move(probs)), p_min_(p_min) {
  if (probs_.size() < 1) {
    throw DomainError("Bernoulli proposal needs d >= 1");
  }
  if (!(p_min_ >= 0.0 && p_min_ < 0.5)) {
    throw DomainError("Bernoulli clamp p_min must lie in [0, 0.5)");
  }
  for (Eigen::Index i = 0; i < probs_.size(); ++i) {
    if (!(probs_(i) >= 0.0 && probs_(i) <= 1.0)) {
      throw DomainError("Bernoulli probabilities must lie in [0, 1]");
    }
    probs_(i) = std::clamp(probs_(i), p_min_, 1.0 - p_min_);
  }
}

double BernoulliParams::default_p_min(int dim) {
  const double d = std::max(dim, 2);
  return 1.0 / (d * d);
}

int dimension(const ProposalParams& params) {
  return std::visit([](const auto& p) { return p.dim(); }, params);
}

std::string family_name(const ProposalParams& params) {
  struct Name {
    std::string operator()(const GaussianParams&) const { return "gaussian"; }
    std::string operator()(const StudentParams&) const { return "student"; }
    std::string operator()(const MixtureParams&) const { return "mixture"; }
    std::string operator()(const BernoulliParams&) const { return "bernoulli"; }
  };
  return std::visit(Name{}, params);
}

// ---------------------------------------------------------------------------

PointSet sample(const ProposalParams& params, const RandomStream& stream, std::size_t n) {
  if (n == 0) {
    throw DomainError("sample size must be >= 1");
  }
  const int d = dimension(params);
  PointSet out(d, static_cast<Eigen::Index>(n));
  const std::size_t chunks = (n + kSampleChunk - 1) / kSampleChunk;

  // Cumulative mixture weights, with the last non-zero entry pinned to 1.
  std::vector<double> cumulative;
  if (const auto* mix = std::get_if<MixtureParams>(&params)) {
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t j = 0; j < mix->size(); ++j) {
      acc += mix->weights()(static_cast<Eigen::Index>(j));
      cumulative.push_back(acc);
      if (mix->weights()(static_cast<Eigen::Index>(j)) > 0.0) {
        last = j;
      }
    }
    for (std::size_t j = last; j < cumulative.size(); ++j) {
      cumulative[j] = 1.0;
    }
  }

  parallel_for(chunks, [&](std::size_t c) {
    RandomStream s = stream.substream(c);
    const std::size_t end = std::min(n, (c + 1) * kSampleChunk);
    for (std::size_t i = c * kSampleChunk; i < end; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      if (const auto* g = std::get_if<GaussianParams>(&params)) {
        out.col(col) = draw_gaussian(g->mean(), g->chol(), s, 1.0);
      } else if (const auto* st = std::get_if<StudentParams>(&params)) {
        const double z = s.gamma(0.5 * st->dof(), 0.5 * st->dof());
        out.col(col) = draw_gaussian(st->location(), st->chol(), s, 1.0 / std::sqrt(z));
      } else if (const auto* mix = std::get_if<MixtureParams>(&params)) {
        const double u = s.uniform();
        std::size_t j = 0;
        while (j + 1 < cumulative.size() && !(u < cumulative[j])) {
          ++j;
        }
        const auto& comp = mix->components()[j];
        out.col(col) = draw_gaussian(comp.mean(), comp.chol(), s, 1.0);
      } else {
        const auto& b = std::get<BernoulliParams>(params);
        for (int k = 0; k < d; ++k) {
          out(k, col) = s.uniform() < b.probs()(k) ? 1.0 : 0.0;
        }
      }
    }
  });
  return out;
}

double log_density(const ProposalParams& params, const Point& x) {
  struct Visitor {
    const Point& x;
    double operator()(const GaussianParams& g) const { return gaussian_log_density(g, x); }
    double operator()(const StudentParams& st) const { return student_log_density(st, x); }
    double operator()(const MixtureParams& mix) const {
      if (x.size() != mix.dim()) {
        throw DomainError("point dimension does not match the proposal");
      }
      const auto terms = component_log_terms(mix, x);
      return log_sum_exp(terms);
    }
    double operator()(const BernoulliParams& b) const { return bernoulli_log_density(b, x); }
  };
  return std::visit(Visitor{x}, params);
}

std::vector<double> log_densities(const ProposalParams& params, const PointSet& points) {
  const auto n = static_cast<std::size_t>(points.cols());
  std::vector<double> out(n);
  const std::size_t chunks = (n + kSampleChunk - 1) / kSampleChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(n, (c + 1) * kSampleChunk);
    for (std::size_t i = c * kSampleChunk; i < end; ++i) {
      out[i] = log_density(params, points.col(static_cast<Eigen::Index>(i)));
    }
  });
  return out;
}

double gaussian_kl(const GaussianParams& p1, const GaussianParams& p2) {
  if (p1.dim() != p2.dim()) {
    throw DomainError("KL between Gaussians of different dimension");
  }
  const auto l2 = p2.chol().triangularView<Eigen::Lower>();
  const Eigen::MatrixXd a = l2.solve(p1.chol());
  const Eigen::VectorXd b = l2.solve(p2.mean() - p1.mean());
  const double kl = 0.5 * (a.squaredNorm() + b.squaredNorm() - static_cast<double>(p1.dim()) +
                           p2.log_det() - p1.log_det());
  return std::max(0.0, kl);
}

double bernoulli_kl(const BernoulliParams& p1, const BernoulliParams& p2) {
  if (p1.dim() != p2.dim()) {
    throw DomainError("KL between Bernoulli products of different dimension");
  }
  auto term = [](double a, double b) { return a > 0.0 ? a * std::log(a / b) : 0.0; };
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p1.probs().size(); ++i) {
    const double a = p1.probs()(i);
    const double b = p2.probs()(i);
    kl += term(a, b) + term(1.0 - a, 1.0 - b);
  }
  return std::max(0.0, kl);
}

MomentParams moment_embed(const GaussianParams& params) {
  return {params.mean(), params.cov() + params.mean() * params.mean().transpose()};
}

MomentParams moment_embed(const BernoulliParams& params) {
  return {params.probs(), Eigen::MatrixXd()};
}

GaussianParams moment_unembed_gaussian(const MomentParams& eta) {
  const Eigen::MatrixXd cov = eta.eta_second - eta.eta_mean * eta.eta_mean.transpose();
  return GaussianParams(eta.eta_mean, repair_covariance(symmetrized(cov)));
}

BernoulliParams moment_unembed_bernoulli(const MomentParams& eta, double p_min) {
  return BernoulliParams(eta.eta_mean.cwiseMax(0.0).cwiseMin(1.0), p_min);
}

Eigen::VectorXd responsibilities(const MixtureParams& mix, const Point& x) {
  if (x.size() != mix.dim()) {
    throw DomainError("point dimension does not match the proposal");
  }
  const auto terms = component_log_terms(mix, x);
  const double lse = log_sum_exp(terms);
  if (!std::isfinite(lse)) {
    throw DegeneratePointError("every mixture component density underflows at the point");
  }
  Eigen::VectorXd rho(static_cast<Eigen::Index>(terms.size()));
  for (std::size_t j = 0; j < terms.size(); ++j) {
    rho(static_cast<Eigen::Index>(j)) = std::exp(terms[j] - lse);
  }
  return rho / rho.sum();
}

double gamma_factor(const StudentParams& st, const Point& x) {
  return (st.dof() + static_cast<double>(st.dim())) / (st.dof() + st.mahalanobis2(x));
}

namespace {

Eigen::MatrixXd escalate_jitter(const Eigen::MatrixXd& cov, double eps0, bool add_first) {
  const auto d = static_cast<double>(cov.rows());
  const double base = cov.trace() / d;
  if (!(base > 0.0) || !std::isfinite(base)) {
    throw FactorizationError("covariance has non-positive trace");
  }
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
  if (!add_first && try_cholesky(cov)) {
    return cov;
  }
  for (double eps = eps0; eps <= 1e-4 * (1.0 + 1e-9); eps *= 10.0) {
    Eigen::MatrixXd trial = cov + eps * base * id;
    if (try_cholesky(trial)) {
      return trial;
    }
  }
  throw FactorizationError("covariance not positive definite after jitter repair");
}

} // namespace

Eigen::MatrixXd repair_covariance(const Eigen::MatrixXd& cov) {
  return escalate_jitter(symmetrized(cov), 1e-10, false);
}

Eigen::MatrixXd finalize_update_covariance(const Eigen::MatrixXd& cov) {
  return escalate_jitter(symmetrized(cov), 1e-10, true);
}

} // namespace qd
