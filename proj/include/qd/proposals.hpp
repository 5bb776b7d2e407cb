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

#include "qd/core.hpp"
#include "qd/random.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

namespace qd {

/// Gaussian N(mean, cov) with a cached lower Cholesky factor.
class GaussianParams {
public:
  /// Throws FactorizationError when cov is not positive definite.
  GaussianParams(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  double log_det() const { return log_det_; }
  int dim() const { return static_cast<int>(mean_.size()); }
  /// (x - mean)^T cov^{-1} (x - mean)
  double mahalanobis2(const Point& x) const;

private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
  double log_det_ = 0.0;
};

/// Multivariate Student t with location, scale matrix and fixed dof.
class StudentParams {
public:
  StudentParams(Eigen::VectorXd location, Eigen::MatrixXd scale, double dof);

  const Eigen::VectorXd& location() const { return location_; }
  const Eigen::MatrixXd& scale() const { return scale_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  double dof() const { return dof_; }
  double log_det() const { return log_det_; }
  int dim() const { return static_cast<int>(location_.size()); }
  double mahalanobis2(const Point& x) const;

private:
  Eigen::VectorXd location_;
  Eigen::MatrixXd scale_;
  Eigen::MatrixXd chol_;
  double dof_;
  double log_det_ = 0.0;
};

/// Finite Gaussian mixture. Weights are renormalized to sum to one.
class MixtureParams {
public:
  MixtureParams(Eigen::VectorXd weights, std::vector<GaussianParams> components);

  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<GaussianParams>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }
  int dim() const { return components_.front().dim(); }

private:
  Eigen::VectorXd weights_;
  std::vector<GaussianParams> components_;
};

/// Product of independent Bernoulli coordinates on {0,1}^d. Probabilities are
/// clamped to [p_min, 1 - p_min].
class BernoulliParams {
public:
  explicit BernoulliParams(Eigen::VectorXd probs);
  BernoulliParams(Eigen::VectorXd probs, double p_min);

  /// 1/d^2, with d = 1 treated as d = 2 so the interval stays non-empty.
  static double default_p_min(int dim);

  const Eigen::VectorXd& probs() const { return probs_; }
  double p_min() const { return p_min_; }
  int dim() const { return static_cast<int>(probs_.size()); }

private:
  Eigen::VectorXd probs_;
  double p_min_;
};

using ProposalParams = std::variant<GaussianParams, StudentParams, MixtureParams, BernoulliParams>;

int dimension(const ProposalParams& params);
std::string family_name(const ProposalParams& params);

/// Mean and second moment (E[X], E[X X^T]) of a Gaussian, or E[X] = p of a
/// Bernoulli product, in which case eta_second is empty.
struct MomentParams {
  Eigen::VectorXd eta_mean;
  Eigen::MatrixXd eta_second;
};

/// Draws n points (columns). The stream is split into fixed-size chunks, each
/// with its own substream, so the result does not depend on the thread count.
PointSet sample(const ProposalParams& params, const RandomStream& stream, std::size_t n);

double log_density(const ProposalParams& params, const Point& x);
std::vector<double> log_densities(const ProposalParams& params, const PointSet& points);

/// KL(p1, p2) between Gaussians in closed form.
double gaussian_kl(const GaussianParams& p1, const GaussianParams& p2);
/// KL(p1, p2) between Bernoulli products, summed over coordinates.
double bernoulli_kl(const BernoulliParams& p1, const BernoulliParams& p2);

MomentParams moment_embed(const GaussianParams& params);
MomentParams moment_embed(const BernoulliParams& params);
GaussianParams moment_unembed_gaussian(const MomentParams& eta);
BernoulliParams moment_unembed_bernoulli(const MomentParams& eta, double p_min);

/// Posterior component probabilities at x, computed in log space.
Eigen::VectorXd responsibilities(const MixtureParams& mix, const Point& x);

/// (nu + d) / (nu + Mahalanobis^2): posterior mean of the latent precision.
double gamma_factor(const StudentParams& st, const Point& x);

/// Factorizes cov; when that fails, retries with eps * I added, eps growing
/// by 10x from 1e-10 * tr/d up to 1e-4 * tr/d. Returns the repaired matrix.
Eigen::MatrixXd repair_covariance(const Eigen::MatrixXd& cov);
/// Update-time covariance finalization: symmetrizes, always adds the base
/// jitter 1e-10 * tr/d, and escalates like repair_covariance when needed.
Eigen::MatrixXd finalize_update_covariance(const Eigen::MatrixXd& cov);

} // namespace qd
