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

#include "qd/error.hpp"
#include "qd/serialize.hpp"

#include <doctest.h>

#include <algorithm>
#include <numbers>

using namespace qd;
using namespace qd::test;

namespace {

double trapezoid(const ProposalParams& p, double lo, double hi, std::size_t n) {
  const double h = (hi - lo) / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double x = lo + h * static_cast<double>(i);
    const double v = std::exp(log_density(p, vec({x})));
    acc += (i == 0 || i == n) ? 0.5 * v : v;
  }
  return acc * h;
}

} // namespace

TEST_CASE("Gaussian sampler mean") {
  const PointSet x = sample(standard_gaussian(3), RandomStream(1, 0, Purpose::User), 100000);
  const Eigen::VectorXd m = x.rowwise().mean();
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(m(j)) < 0.02);
  }
}

TEST_CASE("Student sampler median") {
  const StudentParams st(vec({0}), mat1(1), 3.0);
  const PointSet x = sample(st, RandomStream(2, 0, Purpose::User), 100000);
  std::vector<double> v(x.data(), x.data() + x.size());
  std::nth_element(v.begin(), v.begin() + 50000, v.end());
  CHECK(std::abs(v[50000]) < 0.02);
}

TEST_CASE("Cauchy tail probabilities of the Student sampler") {
  const StudentParams st(vec({0}), mat1(1), 1.0);
  const std::size_t n = 100000;
  const PointSet x = sample(st, RandomStream(3, 0, Purpose::User), n);
  for (double t : {1.0, 5.0, 20.0}) {
    const double p = 2.0 * (0.5 - std::atan(t) / std::numbers::pi);
    const double emp = static_cast<double>((x.array().abs() > t).count()) / static_cast<double>(n);
    CHECK(std::abs(emp - p) <= 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)));
  }
}

TEST_CASE("mixture with a zero weight draws from one component") {
  std::vector<GaussianParams> comps = {GaussianParams(vec({-100}), mat1(1)),
                                       GaussianParams(vec({100}), mat1(1))};
  const MixtureParams mix(vec({1, 0}), comps);
  const PointSet x = sample(mix, RandomStream(4, 0, Purpose::User), 5000);
  CHECK(x.maxCoeff() < 0.0);
}

TEST_CASE("Bernoulli sampler frequencies") {
  const BernoulliParams b(vec({0.2, 0.9}), 0.01);
  const PointSet x = sample(b, RandomStream(5, 0, Purpose::User), 100000);
  CHECK(((x.array() == 0.0) || (x.array() == 1.0)).all());
  CHECK(std::abs(x.row(0).mean() - 0.2) < 3.0 * std::sqrt(0.16 / 1e5));
  CHECK(std::abs(x.row(1).mean() - 0.9) < 3.0 * std::sqrt(0.09 / 1e5));
}

TEST_CASE("log_density examples") {
  CHECK(log_density(standard_gaussian(1), vec({0})) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  const StudentParams cauchy(vec({0}), mat1(1), 1.0);
  CHECK(log_density(cauchy, vec({0})) == doctest::Approx(-std::log(std::numbers::pi)).epsilon(1e-12));
  const GaussianParams g(vec({0.3, -1}), Eigen::MatrixXd::Identity(2, 2) * 1.7);
  const MixtureParams mix(vec({0.5, 0.5}), {g, g});
  const Point x = vec({0.9, 0.4});
  CHECK(log_density(mix, x) == doctest::Approx(log_density(g, x)).epsilon(1e-14));
  const BernoulliParams b(vec({0.25, 0.5}));
  CHECK(log_density(b, vec({1, 0})) == doctest::Approx(std::log(0.125)).epsilon(1e-14));
}

TEST_CASE("densities integrate to one in d = 1") {
  CHECK(trapezoid(GaussianParams(vec({0.4}), mat1(2.0)), -50 * std::sqrt(2.0), 50 * std::sqrt(2.0), 200000) ==
        doctest::Approx(1.0).epsilon(1e-4));
  const MixtureParams mix(vec({0.3, 0.7}), {GaussianParams(vec({-2}), mat1(0.5)), GaussianParams(vec({3}), mat1(1.5))});
  CHECK(trapezoid(mix, -60, 60, 200000) == doctest::Approx(1.0).epsilon(1e-4));
  // Heavy tails: integrate on [-L, L] and add the closed-form Cauchy tail.
  const double l = 1e6;
  const double tail = 2.0 * (0.5 - std::atan(l) / std::numbers::pi);
  const StudentParams cauchy(vec({0}), mat1(1), 1.0);
  // substitution x = tan(t) makes the integrand smooth on (-pi/2, pi/2)
  double acc = 0.0;
  const std::size_t n = 200000;
  const double lo = -std::atan(l);
  const double h = 2.0 * std::atan(l) / static_cast<double>(n);
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = lo + h * static_cast<double>(i);
    const double x = std::tan(t);
    const double v = std::exp(log_density(cauchy, vec({x}))) * (1.0 + x * x);
    acc += (i == 0 || i == n) ? 0.5 * v : v;
  }
  CHECK(acc * h + tail == doctest::Approx(1.0).epsilon(1e-4));
  const StudentParams t3(vec({0}), mat1(1), 3.0);
  CHECK(trapezoid(t3, -2000, 2000, 400000) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("Student density tends to the Gaussian one") {
  const StudentParams st(vec({0.5, -0.2}), Eigen::MatrixXd::Identity(2, 2) * 0.8, 1e6);
  const GaussianParams g(st.location(), st.scale());
  double worst = 0.0;
  for (double a : {-3.0, -1.0, 0.0, 0.7, 2.5}) {
    for (double b : {-2.0, 0.0, 1.3}) {
      worst = std::max(worst, std::abs(log_density(st, vec({a, b})) - log_density(g, vec({a, b}))));
    }
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("gaussian_kl examples") {
  const GaussianParams p = standard_gaussian(2);
  CHECK(gaussian_kl(p, p) == 0.0);
  CHECK(gaussian_kl(standard_gaussian(1), GaussianParams(vec({1}), mat1(1))) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(gaussian_kl(standard_gaussian(1), GaussianParams(vec({0}), mat1(2))) ==
        doctest::Approx(0.5 * (0.5 - 1.0 + std::log(2.0))).epsilon(1e-12));
  CHECK(gaussian_kl(standard_gaussian(1), GaussianParams(vec({0}), mat1(2))) == doctest::Approx(0.0965736).epsilon(1e-6));
}

TEST_CASE("gaussian_kl is non-negative and matches Monte Carlo") {
  RandomStream s(6, 0, Purpose::User);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 1 + static_cast<int>(s.index(4));
    const GaussianParams p1(random_vec(d, s), random_spd(d, s));
    const GaussianParams p2(random_vec(d, s), random_spd(d, s));
    CHECK(gaussian_kl(p1, p2) > 0.0);
    CHECK(gaussian_kl(p1, p1) == doctest::Approx(0.0).epsilon(1e-12));
  }
  const GaussianParams p1(vec({0.2, -0.4}), random_spd(2, s));
  const GaussianParams p2(vec({1.0, 0.3}), random_spd(2, s));
  const PointSet x = sample(p1, RandomStream(7, 0, Purpose::User), 100000);
  const auto l1 = log_densities(p1, x);
  const auto l2 = log_densities(p2, x);
  std::vector<double> diff(l1.size());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = l1[i] - l2[i];
  }
  const MeanSe m = mean_se(diff);
  CHECK(std::abs(m.mean - gaussian_kl(p1, p2)) <= 3.0 * m.se);
}

TEST_CASE("bernoulli_kl matches enumeration") {
  const BernoulliParams a(vec({0.2, 0.7, 0.5}), 0.01);
  const BernoulliParams b(vec({0.4, 0.6, 0.1}), 0.01);
  double kl = 0.0;
  for (int i = 0; i < 8; ++i) {
    const Point x = vec({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
    const double la = log_density(a, x);
    kl += std::exp(la) * (la - log_density(b, x));
  }
  CHECK(bernoulli_kl(a, b) == doctest::Approx(kl).epsilon(1e-13));
  CHECK(bernoulli_kl(a, a) == 0.0);
}

TEST_CASE("moment embedding") {
  MomentParams e = moment_embed(standard_gaussian(3));
  CHECK(e.eta_mean.isZero());
  CHECK(e.eta_second.isIdentity());
  e = moment_embed(GaussianParams(vec({2}), mat1(3)));
  CHECK(e.eta_mean(0) == 2.0);
  CHECK(e.eta_second(0, 0) == 7.0);
  RandomStream s(8, 0, Purpose::User);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 1 + static_cast<int>(s.index(5));
    const GaussianParams g(random_vec(d, s), random_spd(d, s));
    const GaussianParams back = moment_unembed_gaussian(moment_embed(g));
    CHECK((back.mean() - g.mean()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.cov() - g.cov()).cwiseAbs().maxCoeff() < 1e-12);
  }
  const BernoulliParams b(vec({0.3, 0.6}));
  CHECK(moment_unembed_bernoulli(moment_embed(b), b.p_min()).probs() == b.probs());
}

TEST_CASE("unembedding a non-PSD gap fails after jitter") {
  MomentParams e;
  e.eta_mean = vec({1, 0});
  e.eta_second = Eigen::MatrixXd::Identity(2, 2) * 0.5; // gap has a negative eigenvalue
  CHECK_THROWS_AS(moment_unembed_gaussian(e), FactorizationError);
}

TEST_CASE("repair_covariance escalates jitter on a singular matrix") {
  Eigen::MatrixXd c(2, 2);
  c << 1, 1, 1, 1;
  const Eigen::MatrixXd r = repair_covariance(c);
  CHECK(r(0, 0) > 1.0);
  CHECK(r(0, 0) - 1.0 <= 1e-4 * 1.0 + 1e-15);
  CHECK_NOTHROW(GaussianParams(vec({0, 0}), r));
  Eigen::MatrixXd spd = Eigen::MatrixXd::Identity(2, 2);
  CHECK(repair_covariance(spd) == spd);
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 0, 0, -1;
  CHECK_THROWS_AS(repair_covariance(bad), FactorizationError);
}

TEST_CASE("responsibilities") {
  const GaussianParams g(vec({0.5}), mat1(2));
  const MixtureParams same(vec({0.3, 0.7}), {g, g});
  for (double x : {-5.0, 0.0, 3.0}) {
    const Eigen::VectorXd r = responsibilities(same, vec({x}));
    CHECK(r(0) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(r(1) == doctest::Approx(0.7).epsilon(1e-14));
  }
  CHECK(responsibilities(MixtureParams(vec({1}), {g}), vec({9}))(0) == 1.0);
  const MixtureParams sym(vec({0.5, 0.5}), {GaussianParams(vec({-2}), mat1(1)), GaussianParams(vec({2}), mat1(1))});
  const Eigen::VectorXd r = responsibilities(sym, vec({0}));
  CHECK(r(0) == 0.5);
  CHECK(r(1) == 0.5);
  // far tail: plain densities underflow, log space does not
  const Eigen::VectorXd far = responsibilities(sym, vec({80}));
  CHECK(far.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(far(1) > far(0));
}

TEST_CASE("responsibilities sum to one on random mixtures") {
  RandomStream s(9, 0, Purpose::User);
  for (int rep = 0; rep < 50; ++rep) {
    const int d = 1 + static_cast<int>(s.index(3));
    const std::size_t j = 1 + s.index(4);
    std::vector<GaussianParams> comps;
    Eigen::VectorXd w(static_cast<Eigen::Index>(j));
    for (std::size_t c = 0; c < j; ++c) {
      comps.emplace_back(random_vec(d, s, 3.0), random_spd(d, s));
      w(static_cast<Eigen::Index>(c)) = 0.1 + s.uniform();
    }
    const MixtureParams mix(w, comps);
    CHECK(mix.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
    const Eigen::VectorXd r = responsibilities(mix, random_vec(d, s, 5.0));
    CHECK(std::abs(r.sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("gamma_factor") {
  for (double nu : {1.0, 3.0, 10.0}) {
    const StudentParams st(vec({0.3, 1.0}), Eigen::MatrixXd::Identity(2, 2), nu);
    CHECK(gamma_factor(st, st.location()) == (nu + 2.0) / nu);
  }
  const StudentParams big(vec({0}), mat1(1), 1e6);
  CHECK(std::abs(gamma_factor(big, vec({2.5})) - 1.0) < 1e-4);
  CHECK(gamma_factor(StudentParams(vec({0}), mat1(1), 1.0), vec({1})) == 1.0);
}

TEST_CASE("Bernoulli clamping") {
  CHECK(BernoulliParams::default_p_min(4) == 1.0 / 16.0);
  CHECK(BernoulliParams::default_p_min(1) == 0.25);
  const BernoulliParams b(vec({0.0, 1.0, 0.5, 0.01}));
  CHECK(b.probs()(0) == 1.0 / 16.0);
  CHECK(b.probs()(1) == 1.0 - 1.0 / 16.0);
  CHECK(b.probs()(2) == 0.5);
}

TEST_CASE("invalid parameters are rejected") {
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(GaussianParams(vec({0, 0}), asym), DomainError);
  CHECK_THROWS_AS(GaussianParams(vec({0}), mat1(-1)), FactorizationError);
  CHECK_THROWS_AS(StudentParams(vec({0}), mat1(1), 0.0), DomainError);
  CHECK_THROWS(MixtureParams(vec({-1, 2}), {standard_gaussian(1), standard_gaussian(1)}));
}

TEST_CASE("parameter JSON round trip is exact") {
  RandomStream s(10, 0, Purpose::User);
  std::vector<ProposalParams> all = {
      GaussianParams(random_vec(3, s), random_spd(3, s)),
      StudentParams(random_vec(2, s), random_spd(2, s), 3.5),
      MixtureParams(vec({0.25, 0.75}), {GaussianParams(random_vec(2, s), random_spd(2, s)),
                                        GaussianParams(random_vec(2, s), random_spd(2, s))}),
      BernoulliParams(vec({0.1 / 3.0, 0.7}), 0.01)};
  for (const auto& p : all) {
    const std::string text = dump_compact(params_to_json(p));
    const ProposalParams back = params_from_json(nlohmann::json::parse(text));
    CHECK(dump_compact(params_to_json(back)) == text);
    CHECK(params_digest(back) == params_digest(p));
  }
  CHECK_THROWS_AS(params_from_json(nlohmann::json::parse(R"({"family":"weibull"})")), ConfigError);
  CHECK_THROWS_AS(params_from_json(nlohmann::json::parse(R"({"family":"gaussian","mean":[0]})")), ConfigError);
}
