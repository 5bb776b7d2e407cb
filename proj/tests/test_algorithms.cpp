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

#include "test_util.hpp"

#include "qd/algorithms.hpp"
#include "qd/error.hpp"
#include "qd/serialize.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <memory>

using namespace qd;
using namespace qd::test;

namespace {

/// Batch over explicit 1-D points and weights.
SampleBatch manual_batch(const std::vector<double>& xs, const std::vector<double>& w) {
  SampleBatch b;
  b.points = PointSet(1, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    b.points(0, static_cast<Eigen::Index>(i)) = xs[i];
  }
  b.f_values = xs;
  b.rank_weights = w;
  return b;
}

Objective sphere(int d, double offset = 0.0) {
  return Objective("sphere", DomainKind::Continuous, d,
                   [offset](const Point& x) { return x.squaredNorm() + offset; });
}

SampleBatch random_batch(const ProposalParams& p, const WeightFn& w, std::uint64_t seed, std::size_t n) {
  return draw_batch(p, sphere(dimension(p)), w, TieMode::Strict, RandomStream(seed, 0, Purpose::User), n);
}

double max_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return ((a - b).array().abs() / b.array().abs().max(1e-300)).maxCoeff();
}

struct EnvThreads {
  explicit EnvThreads(const char* v) { setenv("QD_THREADS", v, 1); }
  ~EnvThreads() { unsetenv("QD_THREADS"); }
};

} // namespace

TEST_CASE("igo_ng example in moment coordinates") {
  // eta_k = (0, 1); points {0, 2} with equal weight give eta_pi = (1, 2).
  const SampleBatch b = manual_batch({0, 2}, {0.5, 0.5});
  const GaussianParams next = igo_ng_step(standard_gaussian(1), b, 1.0, 0.5);
  CHECK(next.mean()(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(next.cov()(0, 0) == doctest::Approx(1.25).epsilon(1e-9));

  MomentParams k{vec({0}), mat1(1)};
  MomentParams pi{vec({1}), mat1(2)};
  const MomentParams m = igo_ng_moments(k, pi, 1.0, 0.5);
  CHECK(m.eta_mean(0) == 0.5);
  CHECK(m.eta_second(0, 0) == 1.5);
}

TEST_CASE("igo_ml example in moment coordinates") {
  MomentParams k{vec({0}), mat1(1)};
  MomentParams pi{vec({1}), mat1(2)};
  const MomentParams m = igo_ml_moments(k, pi, 0.5, 0.5);
  CHECK(m.eta_mean(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(m.eta_second(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  const GaussianParams next = igo_ml_step(standard_gaussian(1), manual_batch({0, 2}, {0.5, 0.5}), 0.5, 0.5);
  CHECK(next.mean()(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(next.cov()(0, 0) == doctest::Approx(4.0 / 3.0 - 1.0 / 9.0).epsilon(1e-9));
}

TEST_CASE("step endpoints") {
  const GaussianParams g(vec({0.3, -0.2}), Eigen::MatrixXd::Identity(2, 2) * 1.4);
  const WeightFn w = WeightFn::indicator(0.3);
  const SampleBatch b = random_batch(g, w, 11, 500);
  const GaussianParams ml = igo_ml_step(g, b, 1.0, 0.3);
  const GaussianParams ng = igo_ng_step(g, b, 1.0 / 0.3, 0.3);
  CHECK(ml.mean() == ng.mean());
  CHECK(ml.cov() == ng.cov());

  // tau = 1 is the weighted sample mean and covariance of the batch.
  const Eigen::VectorXd m = weighted_expectation(b, [](const Point& x) { return x; });
  CHECK((ml.mean() - m).cwiseAbs().maxCoeff() < 1e-12);

  // tau = 0 keeps the current parameters up to the base jitter.
  const GaussianParams still = igo_ng_step(g, b, 0.0, 0.3);
  CHECK(still.mean() == g.mean());
  CHECK(max_rel(still.cov().diagonal(), g.cov().diagonal()) < 1e-9);
  const GaussianParams still_ml = igo_ml_step(g, b, 0.0, 0.3);
  CHECK(still_ml.mean() == g.mean());

  const BernoulliParams p(vec({0.4, 0.6, 0.5}), 0.01);
  const SampleBatch bb = draw_batch(p, popcount(3), w, TieMode::TieAveraged, RandomStream(12, 0, Purpose::User), 200);
  const BernoulliParams bml = igo_ml_step(p, bb, 1.0, 0.3);
  const BernoulliParams bng = igo_ng_step(p, bb, 1.0 / 0.3, 0.3);
  CHECK(bml.probs() == bng.probs());
  CHECK(igo_ng_step(p, bb, 0.0, 0.3).probs() == p.probs());
}

TEST_CASE("natural-gradient and ML steps coincide under the step-size map") {
  RandomStream s(13, 0, Purpose::User);
  const WeightFn w = WeightFn::table({0.0, 0.2, 0.5, 1.0}, {1.5, 0.5, 0.0});
  const double z = w.mass();
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 1 + static_cast<int>(s.index(4));
    const GaussianParams g(random_vec(d, s), random_spd(d, s));
    const SampleBatch b = random_batch(g, w, 100 + static_cast<std::uint64_t>(rep), 300);
    const double tau = 0.05 + 0.95 * s.uniform();
    const double tau_ng = tau / ((1.0 - tau) + tau * z);
    const GaussianParams ml = igo_ml_step(g, b, tau, z);
    const GaussianParams ng = igo_ng_step(g, b, tau_ng, z);
    CHECK((ml.mean() - ng.mean()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ml.cov() - ng.cov()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Gaussian steppers return positive definite covariances") {
  RandomStream s(14, 0, Purpose::User);
  for (int rep = 0; rep < 50; ++rep) {
    const int d = 1 + static_cast<int>(s.index(6));
    const GaussianParams g(random_vec(d, s), random_spd(d, s));
    const std::size_t n = static_cast<std::size_t>(d) + 1 + s.index(20);
    // all weight on the first d + 1 points at most, sometimes fewer survive
    SampleBatch b = random_batch(g, WeightFn::indicator(0.999), 200 + static_cast<std::uint64_t>(rep), n);
    for (std::size_t i = static_cast<std::size_t>(d) + 1; i < n; ++i) {
      b.rank_weights[i] = 0.0;
    }
    const double tau = s.uniform();
    const GaussianParams a = igo_ml_step(g, b, tau, 0.5);
    const GaussianParams c = igo_ng_step(g, b, std::max(tau, 1e-3) * 2.0, 0.5);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a.cov()).eigenvalues().minCoeff() > 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c.cov()).eigenvalues().minCoeff() > 0.0);
  }
  // a single surviving point leaves a zero covariance, which jitter scaled by
  // the trace cannot repair
  const SampleBatch one = manual_batch({0.5, 1.0, 2.0}, {1.0, 0.0, 0.0});
  CHECK_THROWS_AS(igo_ml_step(standard_gaussian(1), one, 1.0, 0.3), StepFailure);
  CHECK(igo_ml_step(standard_gaussian(1), one, 0.5, 0.3).mean()(0) == doctest::Approx(0.5 * 0.15 / 0.65).epsilon(1e-14));
}

TEST_CASE("step preconditions") {
  const SampleBatch b = manual_batch({0, 2}, {0.5, 0.5});
  CHECK_THROWS_AS(igo_ng_step(standard_gaussian(1), b, 3.0, 0.5), DomainError);
  CHECK_THROWS_AS(igo_ml_step(standard_gaussian(1), b, 1.5, 0.5), DomainError);
  CHECK_THROWS_AS(igo_ml_step(standard_gaussian(1), manual_batch({0, 2}, {0, 0}), 1.0, 0.5),
                  DegenerateBatchError);
  StepConfig cfg;
  cfg.rule = Rule::IgoNg;
  cfg.weight = WeightFn::indicator(0.3);
  cfg.step_size = 1.0 / 0.3;
  CHECK_NOTHROW(cfg.validate());
  cfg.step_size = 3.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.rule = Rule::IgoMl;
  cfg.step_size = 1.0;
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(check_family_compatible(StudentParams(vec({0}), mat1(1), 3), Rule::IgoMl), ConfigError);
  CHECK_THROWS_AS(check_family_compatible(standard_gaussian(1), Rule::MixtureMl), ConfigError);
}

TEST_CASE("mixture with one component is the CE step") {
  const GaussianParams g(vec({1, -1}), Eigen::MatrixXd::Identity(2, 2) * 2.0);
  const SampleBatch b = random_batch(g, WeightFn::indicator(0.3), 15, 400);
  const MixtureParams next = mixture_ml_step(MixtureParams(vec({1}), {g}), b);
  const GaussianParams ce = igo_ml_step(g, b, 1.0, 0.3);
  CHECK(next.weights()(0) == 1.0);
  CHECK((next.components()[0].mean() - ce.mean()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((next.components()[0].cov() - ce.cov()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mixture of two identical components stays symmetric") {
  const GaussianParams g(vec({0.5}), mat1(1.5));
  const MixtureParams mix(vec({0.5, 0.5}), {g, g});
  const SampleBatch b = random_batch(mix, WeightFn::indicator(0.4), 16, 300);
  const MixtureParams next = mixture_ml_step(mix, b);
  CHECK(next.weights()(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(next.weights()(1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(next.components()[0].mean() == next.components()[1].mean());
  CHECK(next.components()[0].cov() == next.components()[1].cov());
}

TEST_CASE("mixture weights sum to one and far components freeze") {
  RandomStream s(17, 0, Purpose::User);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 1 + static_cast<int>(s.index(3));
    std::vector<GaussianParams> comps;
    for (int j = 0; j < 3; ++j) {
      comps.emplace_back(random_vec(d, s, 2.0), random_spd(d, s));
    }
    const MixtureParams mix(vec({0.2, 0.3, 0.5}), comps);
    const MixtureParams next = mixture_ml_step(mix, random_batch(mix, WeightFn::indicator(0.3), 300 + rep, 200));
    CHECK(std::abs(next.weights().sum() - 1.0) <= 1e-12);
  }
  const GaussianParams near(vec({0}), mat1(1));
  const GaussianParams far(vec({1e3}), mat1(1));
  const MixtureParams mix(vec({0.5, 0.5}), {near, far});
  SampleBatch b = random_batch(GaussianParams(near), WeightFn::indicator(0.3), 18, 200);
  const MixtureParams next = mixture_ml_step(mix, b);
  CHECK(next.components()[1].mean() == far.mean());
  CHECK(next.weights()(1) < 1e-5);
}

TEST_CASE("responsibility update is the average of latent-indicator updates") {
  const MixtureParams mix(vec({0.4, 0.6}), {GaussianParams(vec({-0.5}), mat1(1)), GaussianParams(vec({0.8}), mat1(1.5))});
  const SampleBatch b = random_batch(mix, WeightFn::indicator(0.3), 19, 60);
  const MixtureParams rb = mixture_ml_step(mix, b);
  RandomStream latent(20, 0, Purpose::Latent);
  const int reps = 1000;
  std::vector<double> lam(reps);
  std::vector<double> lam_mu(reps);
  for (int r = 0; r < reps; ++r) {
    const MixtureParams xi = mixture_ml_step(mix, b, MixtureMode::LatentIndicator, &latent);
    lam[r] = xi.weights()(0);
    // lambda_j * mu_j is linear in the indicators
    lam_mu[r] = xi.weights()(0) * xi.components()[0].mean()(0);
  }
  const MeanSe a = mean_se(lam);
  const MeanSe c = mean_se(lam_mu);
  CHECK(std::abs(a.mean - rb.weights()(0)) <= 4.0 * a.se);
  const double rb_lam_mu = rb.weights()(0) * rb.components()[0].mean()(0);
  CHECK(std::abs(c.mean - rb_lam_mu) <= 4.0 * c.se);
  CHECK(a.se < 0.05);
  CHECK_THROWS_AS(mixture_ml_step(mix, b, MixtureMode::LatentIndicator, nullptr), DomainError);
}

TEST_CASE("Student update examples") {
  const StudentParams st(vec({0}), mat1(1), 3.0);
  const StudentUpdate same = student_ml_update(st, manual_batch({1.7, 1.7, 1.7}, {0.2, 0.5, 0.0}));
  CHECK(same.location(0) == doctest::Approx(1.7).epsilon(1e-14));
  const StudentUpdate sym = student_ml_update(st, manual_batch({-1, 1, 5}, {0.5, 0.5, 0.0}));
  CHECK(std::abs(sym.location(0)) < 1e-15);
  CHECK(sym.scale(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  // proof_exact rescales by the mean gamma factor, here (3 + 1)/(3 + 1) = 1
  const StudentUpdate pe = student_ml_update(st, manual_batch({-1, 1, 5}, {0.5, 0.5, 0.0}), SigmaVariant::ProofExact);
  CHECK(pe.scale(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  const StudentUpdate pe2 = student_ml_update(StudentParams(vec({0}), mat1(1), 1.0),
                                              manual_batch({-3, 3}, {0.5, 0.5}), SigmaVariant::ProofExact);
  CHECK(pe2.scale(0, 0) == doctest::Approx(9.0 * 0.2).epsilon(1e-14));
}

TEST_CASE("Student update tends to the CE update for large dof") {
  RandomStream s(21, 0, Purpose::User);
  for (int rep = 0; rep < 10; ++rep) {
    const int d = 1 + static_cast<int>(s.index(4));
    const Eigen::VectorXd mu = random_vec(d, s);
    const Eigen::MatrixXd cov = random_spd(d, s);
    const SampleBatch b = random_batch(GaussianParams(mu, cov), WeightFn::indicator(0.3), 400 + rep, 500);
    const StudentParams next = student_ml_step(StudentParams(mu, cov, 1e6), b);
    const GaussianParams ce = igo_ml_step(GaussianParams(mu, cov), b, 1.0, 0.3);
    CHECK(max_rel(next.location(), ce.mean()) < 1e-3);
    CHECK(max_rel(next.scale(), ce.cov()) < 1e-3);
    CHECK(next.dof() == 1e6);
  }
}

TEST_CASE("Student variants agree when every gamma factor is one") {
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(2, 2);
  const SampleBatch b = random_batch(GaussianParams(vec({0, 0}), cov), WeightFn::indicator(0.3), 22, 300);
  const StudentParams st(vec({0, 0}), cov, 1e13);
  const StudentUpdate a = student_ml_update(st, b, SigmaVariant::PaperEq);
  const StudentUpdate c = student_ml_update(st, b, SigmaVariant::ProofExact);
  CHECK(max_rel(a.scale, c.scale) < 1e-9);
  // and differ when they are not
  const StudentParams heavy(vec({0, 0}), cov, 2.0);
  CHECK(max_rel(student_ml_update(heavy, b).scale, student_ml_update(heavy, b, SigmaVariant::ProofExact).scale) > 1e-3);
}

TEST_CASE("optimize with K = 0 keeps the initial parameters") {
  StepConfig cfg;
  const Trajectory t = optimize(standard_gaussian(2), sphere(2), cfg, 0, 1);
  CHECK(t.params_history.size() == 1);
  CHECK(t.reports.empty());
  CHECK_FALSE(t.failed);
}

TEST_CASE("constant objective: equal weights and sample moments") {
  const Objective flat("flat", DomainKind::Continuous, 2, [](const Point&) { return 4.0; });
  const WeightFn w = WeightFn::indicator(0.3);
  const GaussianParams g(vec({1, 2}), Eigen::MatrixXd::Identity(2, 2));
  const SampleBatch b = draw_batch(g, flat, w, TieMode::Strict, RandomStream(23, 0, Purpose::User), 400);
  CHECK(std::all_of(b.rank_weights.begin(), b.rank_weights.end(), [&](double v) { return v == b.rank_weights[0]; }));
  const GaussianParams next = igo_ml_step(g, b, 1.0, w.mass());
  const Eigen::VectorXd m = b.points.rowwise().mean();
  const Eigen::MatrixXd c = (b.points.colwise() - m) * (b.points.colwise() - m).transpose() / 400.0;
  CHECK((next.mean() - m).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((next.cov() - c).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(empirical_quantile(b.f_values, 0.3) == 4.0);
}

TEST_CASE("CE on the sphere shrinks the quantile by three orders of magnitude") {
  StepConfig cfg;
  cfg.batch_size = 1000;
  const Objective f = sphere(5);
  const GaussianParams init(Eigen::VectorXd::Ones(5), Eigen::MatrixXd::Identity(5, 5));
  std::vector<double> ratios;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto q = [&](const ProposalParams& p) {
      const PointSet x = sample(p, RandomStream(seed, 999, Purpose::Estimate), 1000);
      return empirical_quantile(f.evaluate(x), 0.3);
    };
    const Trajectory t = optimize(init, f, cfg, 50, seed);
    REQUIRE_FALSE(t.failed);
    ratios.push_back(q(t.params_history.back()) / q(t.params_history.front()));
  }
  std::nth_element(ratios.begin(), ratios.begin() + 5, ratios.end());
  CHECK(ratios[5] < 1e-3);
}

TEST_CASE("optimize is deterministic and independent of the thread count") {
  StepConfig cfg;
  cfg.batch_size = 300;
  const GaussianParams init(vec({2, -1, 0.5}), Eigen::MatrixXd::Identity(3, 3));
  std::vector<std::string> digests;
  for (const char* threads : {"1", "3", "8"}) {
    EnvThreads env(threads);
    const Trajectory t = optimize(init, sphere(3), cfg, 8, 42);
    std::string all;
    for (const auto& p : t.params_history) {
      all += dump_compact(params_to_json(p));
    }
    digests.push_back(all);
  }
  CHECK(digests[0] == digests[1]);
  CHECK(digests[0] == digests[2]);
}

TEST_CASE("optimize is invariant under a monotone transform of f") {
  for (Rule rule : {Rule::IgoMl, Rule::IgoNg}) {
    StepConfig cfg;
    cfg.rule = rule;
    cfg.step_size = 0.7;
    cfg.batch_size = 200;
    const Objective f = sphere(2, 10.0);
    const Objective g("exp", DomainKind::Continuous, 2, [](const Point& x) { return std::exp(x.squaredNorm() + 10.0); });
    const GaussianParams init(vec({1.5, 1.0}), Eigen::MatrixXd::Identity(2, 2));
    const Trajectory a = optimize(init, f, cfg, 6, 5);
    const Trajectory b = optimize(init, g, cfg, 6, 5);
    REQUIRE(a.params_history.size() == b.params_history.size());
    for (std::size_t k = 0; k < a.params_history.size(); ++k) {
      CHECK(params_digest(a.params_history[k]) == params_digest(b.params_history[k]));
    }
  }
}

TEST_CASE("mixture and Student runs through optimize") {
  StepConfig cfg;
  cfg.batch_size = 500;
  cfg.rule = Rule::MixtureMl;
  const MixtureParams mix(vec({0.5, 0.5}), {GaussianParams(vec({2, 2}), Eigen::MatrixXd::Identity(2, 2)),
                                            GaussianParams(vec({-2, 1}), Eigen::MatrixXd::Identity(2, 2))});
  const Trajectory t = optimize(mix, sphere(2), cfg, 10, 3);
  CHECK_FALSE(t.failed);
  CHECK(std::get<MixtureParams>(t.params_history.back()).weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
  cfg.rule = Rule::StudentMl;
  cfg.sigma_variant = SigmaVariant::ProofExact;
  const Trajectory s = optimize(StudentParams(vec({2, 2}), Eigen::MatrixXd::Identity(2, 2), 3.0), sphere(2), cfg, 10, 3);
  CHECK_FALSE(s.failed);
  CHECK(std::get<StudentParams>(s.params_history.back()).location().norm() < 1.0);
}

TEST_CASE("a failing iteration ends the run with a partial trajectory") {
  auto count = std::make_shared<std::atomic<int>>(0);
  const Objective bad("bad", DomainKind::Continuous, 2, [count](const Point& x) {
    return ++*count > 250 ? std::nan("") : x.squaredNorm();
  });
  StepConfig cfg;
  cfg.batch_size = 100;
  const Trajectory t = optimize(standard_gaussian(2), bad, cfg, 10, 1);
  CHECK(t.failed);
  CHECK(t.params_history.size() == 3);
  CHECK(t.failure.find("iteration 2") == 0);
}
