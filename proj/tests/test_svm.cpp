#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "biowish/rng.hpp"
#include "biowish/svm.hpp"

using namespace biowish;

namespace {

// independent projected-gradient solver for the dual QP:
// min 1/2 a^T Q a - e^T a, 0 <= a <= C, y^T a = 0. Projection onto the
// box-hyperplane intersection by bisection on the multiplier.
std::vector<double> pg_solve(const std::vector<std::vector<double>>& x,
                             const std::vector<double>& y, double C, double gamma, int iters) {
  const std::size_t n = x.size();
  std::vector<double> Q(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < x[i].size(); ++k) {
        const double d = x[i][k] - x[j][k];
        d2 += d * d;
      }
      Q[i * n + j] = y[i] * y[j] * std::exp(-gamma * d2);
    }
  double qnorm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(Q[i * n + j]);
    qnorm = std::max(qnorm, row);
  }
  const double eta = 1.0 / qnorm;

  auto project = [&](std::vector<double>& a) {
    // find lambda such that sum_i y_i clip(a_i - lambda y_i) = 0
    double lo = -1e6, hi = 1e6;
    for (int b = 0; b < 200; ++b) {
      const double mid = 0.5 * (lo + hi);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        s += y[i] * std::clamp(a[i] - mid * y[i], 0.0, C);
      // s is non-increasing in lambda
      if (s > 0)
        lo = mid;
      else
        hi = mid;
    }
    const double lambda = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < n; ++i) a[i] = std::clamp(a[i] - lambda * y[i], 0.0, C);
  };

  std::vector<double> a(n, 0.0);
  project(a);
  std::vector<double> g(n);
  for (int it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = -1.0;
      for (std::size_t j = 0; j < n; ++j) g[i] += Q[i * n + j] * a[j];
    }
    for (std::size_t i = 0; i < n; ++i) a[i] -= eta * g[i];
    project(a);
  }
  return a;
}

// reconstruct the full alpha vector of a trained model over the training
// order (positives then negatives), matching support vectors sequentially
std::vector<double> full_alpha(const SvmModel& m, const std::vector<std::vector<double>>& pos,
                               const std::vector<std::vector<double>>& neg) {
  std::vector<double> alpha(pos.size() + neg.size(), 0.0);
  std::size_t s = 0;
  for (std::size_t t = 0; t < alpha.size() && s < m.support.size(); ++t) {
    const auto& raw = t < pos.size() ? pos[t] : neg[t - pos.size()];
    std::vector<double> z(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) z[k] = (raw[k] - m.mean[k]) / m.sigma[k];
    if (z == m.support[s]) {
      alpha[t] = std::abs(m.coef[s]);
      ++s;
    }
  }
  REQUIRE(s == m.support.size());
  return alpha;
}

}  // namespace

TEST_CASE("separable 1-D toy problem") {
  Rng rng(1);
  std::vector<std::vector<double>> pos, neg;
  for (int i = 0; i < 10; ++i) {
    pos.push_back({1.0 + rng.normal(0.0, 0.1)});
    neg.push_back({-1.0 + rng.normal(0.0, 0.1)});
  }
  const auto m = train_rbf_svm(pos, neg);
  CHECK(svm_decision(m, {1.0}) > 0.0);
  CHECK(svm_decision(m, {-1.0}) < 0.0);
  CHECK(svm_dissimilarity(m, {1.0}) < svm_dissimilarity(m, {-1.0}));
}

TEST_CASE("XOR layout needs the RBF kernel") {
  Rng rng(2);
  std::vector<std::vector<double>> pos, neg;
  for (int i = 0; i < 8; ++i) {
    const double jx = rng.normal(0.0, 0.05), jy = rng.normal(0.0, 0.05);
    if (i % 2 == 0) {
      pos.push_back({0.0 + jx, 0.0 + jy});
      neg.push_back({0.0 + jy, 1.0 + jx});
    } else {
      pos.push_back({1.0 + jx, 1.0 + jy});
      neg.push_back({1.0 + jy, 0.0 + jx});
    }
  }
  const auto m = train_rbf_svm(pos, neg, 10.0);
  int correct = 0;
  for (const auto& p : pos) correct += svm_decision(m, p) > 0.0;
  for (const auto& q : neg) correct += svm_decision(m, q) < 0.0;
  CHECK(correct == 16);
}

TEST_CASE("SMO dual objective matches a projected-gradient oracle") {
  Rng rng(3);
  std::vector<std::vector<double>> pos, neg;
  for (int i = 0; i < 10; ++i) {
    pos.push_back({rng.normal(0.7, 0.4), rng.normal(0.2, 0.4), rng.normal(0.0, 0.4)});
    neg.push_back({rng.normal(-0.5, 0.4), rng.normal(-0.1, 0.4), rng.normal(0.3, 0.4)});
  }
  const double C = 1.0, gamma = 0.3;
  const auto m = train_rbf_svm(pos, neg, C, gamma, 1e-6, 100000, false);

  std::vector<std::vector<double>> x = pos;
  x.insert(x.end(), neg.begin(), neg.end());
  std::vector<double> y(20, 1.0);
  for (int i = 10; i < 20; ++i) y[static_cast<std::size_t>(i)] = -1.0;

  const auto a_smo = full_alpha(m, pos, neg);
  const auto a_pg = pg_solve(x, y, C, gamma, 20000);
  const double obj_smo = svm_dual_objective(x, y, a_smo, gamma);
  const double obj_pg = svm_dual_objective(x, y, a_pg, gamma);
  CAPTURE(obj_smo, obj_pg);
  CHECK(std::abs(obj_smo - obj_pg) <= 1e-3);
}

TEST_CASE("model invariants hold") {
  Rng rng(4);
  std::vector<std::vector<double>> pos, neg;
  for (int i = 0; i < 15; ++i) {
    pos.push_back({rng.normal(0.6, 0.5), rng.normal(0.0, 0.5)});
    neg.push_back({rng.normal(-0.6, 0.5), rng.normal(0.1, 0.5)});
  }
  const auto m = train_rbf_svm(pos, neg);
  double sum = 0.0;
  bool has_pos = false, has_neg = false;
  for (double c : m.coef) {
    CHECK(std::abs(c) <= m.C + 1e-12);
    sum += c;
    if (c > 0) has_pos = true;
    if (c < 0) has_neg = true;
  }
  CHECK(std::abs(sum) <= 1e-6);
  CHECK(has_pos);
  CHECK(has_neg);
}

TEST_CASE("KKT conditions hold at tolerance") {
  Rng rng(5);
  std::vector<std::vector<double>> pos, neg;
  for (int i = 0; i < 12; ++i) {
    pos.push_back({rng.normal(0.8, 0.6), rng.normal(0.0, 0.6)});
    neg.push_back({rng.normal(-0.8, 0.6), rng.normal(0.0, 0.6)});
  }
  const double C = 1.0;
  const auto m = train_rbf_svm(pos, neg, C);
  const auto alpha = full_alpha(m, pos, neg);
  std::vector<std::vector<double>> x = pos;
  x.insert(x.end(), neg.begin(), neg.end());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double y = t < pos.size() ? 1.0 : -1.0;
    const double yf = y * svm_decision(m, x[t]);
    if (alpha[t] < 1e-12) {
      CHECK(yf >= 1.0 - 1e-3 - 1e-9);
    } else if (alpha[t] < C - 1e-9) {
      CHECK(std::abs(yf - 1.0) <= 1e-3 + 1e-9);
    }
  }
}

TEST_CASE("prediction is invariant to training-set order") {
  Rng rng(6);
  std::vector<std::vector<double>> pos, neg;
  for (int i = 0; i < 10; ++i) {
    pos.push_back({rng.normal(0.7, 0.5), rng.normal(0.0, 0.5)});
    neg.push_back({rng.normal(-0.7, 0.5), rng.normal(0.0, 0.5)});
  }
  auto pos2 = pos;
  auto neg2 = neg;
  std::reverse(pos2.begin(), pos2.end());
  std::reverse(neg2.begin(), neg2.end());
  // a tight tolerance drives both runs to the unique dual optimum
  const auto m1 = train_rbf_svm(pos, neg, 1.0, 0.5, 1e-10, 1000000, false);
  const auto m2 = train_rbf_svm(pos2, neg2, 1.0, 0.5, 1e-10, 1000000, false);
  Rng probe_rng(7);
  for (int t = 0; t < 30; ++t) {
    const std::vector<double> probe = {probe_rng.uniform(-1.5, 1.5), probe_rng.uniform(-1.5, 1.5)};
    REQUIRE(std::abs(svm_decision(m1, probe) - svm_decision(m2, probe)) <= 1e-9);
  }
}

TEST_CASE("removing a non-support point leaves the decision unchanged") {
  Rng rng(8);
  std::vector<std::vector<double>> pos, neg;
  for (int i = 0; i < 12; ++i) {
    pos.push_back({rng.normal(1.0, 0.3), rng.normal(0.0, 0.3)});
    neg.push_back({rng.normal(-1.0, 0.3), rng.normal(0.0, 0.3)});
  }
  const auto m1 = train_rbf_svm(pos, neg, 1.0, 0.5, 1e-9, 1000000, false);
  const auto alpha = full_alpha(m1, pos, neg);

  // drop one alpha=0 point from each side if available
  std::vector<std::vector<double>> pos2, neg2;
  bool dropped_pos = false, dropped_neg = false;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (!dropped_pos && alpha[i] < 1e-12) {
      dropped_pos = true;
      continue;
    }
    pos2.push_back(pos[i]);
  }
  for (std::size_t i = 0; i < neg.size(); ++i) {
    if (!dropped_neg && alpha[pos.size() + i] < 1e-12) {
      dropped_neg = true;
      continue;
    }
    neg2.push_back(neg[i]);
  }
  REQUIRE((dropped_pos || dropped_neg));
  const auto m2 = train_rbf_svm(pos2, neg2, 1.0, 0.5, 1e-9, 1000000, false);

  Rng probe_rng(9);
  for (int t = 0; t < 30; ++t) {
    const std::vector<double> probe = {probe_rng.uniform(-2.0, 2.0), probe_rng.uniform(-2.0, 2.0)};
    REQUIRE(std::abs(svm_decision(m1, probe) - svm_decision(m2, probe)) <= 1e-6);
  }
}

TEST_CASE("gamma heuristic lands at 1/d on standardized data") {
  Rng rng(10);
  std::vector<std::vector<double>> pos, neg;
  for (int i = 0; i < 20; ++i) {
    pos.push_back({rng.normal(3.0, 2.0), rng.normal(-1.0, 0.2)});
    neg.push_back({rng.normal(-3.0, 2.0), rng.normal(1.0, 0.2)});
  }
  const auto m = train_rbf_svm(pos, neg);
  CHECK(m.gamma == Catch::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("dissimilarity is the negated decision") {
  Rng rng(11);
  std::vector<std::vector<double>> pos, neg;
  for (int i = 0; i < 8; ++i) {
    pos.push_back({rng.normal(0.8, 0.2)});
    neg.push_back({rng.normal(-0.8, 0.2)});
  }
  const auto m = train_rbf_svm(pos, neg);
  // a confidently positive training point scores a negative dissimilarity
  CHECK(svm_dissimilarity(m, pos[0]) < 0.0);
  Rng probe_rng(12);
  for (int t = 0; t < 20; ++t) {
    const std::vector<double> p = {probe_rng.uniform(-2.0, 2.0)};
    REQUIRE(svm_dissimilarity(m, p) == -svm_decision(m, p));
  }
}

TEST_CASE("error handling") {
  SECTION("empty class") {
    CHECK_THROWS(train_rbf_svm({}, {{1.0}}));
  }
  SECTION("identical classes fail as non-convergence") {
    std::vector<std::vector<double>> same = {{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}};
    CHECK_THROWS_WITH(train_rbf_svm(same, same),
                      Catch::Matchers::ContainsSubstring("did not converge"));
  }
  SECTION("probe dimension mismatch") {
    Rng rng(13);
    std::vector<std::vector<double>> pos, neg;
    for (int i = 0; i < 5; ++i) {
      pos.push_back({rng.normal(1.0, 0.1), 0.0});
      neg.push_back({rng.normal(-1.0, 0.1), 0.0});
    }
    const auto m = train_rbf_svm(pos, neg);
    CHECK_THROWS_WITH(svm_decision(m, {1.0}), Catch::Matchers::ContainsSubstring("dimension"));
  }
}
