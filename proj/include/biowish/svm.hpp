#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "biowish/signals.hpp"

namespace biowish {

// Binary soft-margin RBF SVM over flattened spectral tensors. Inputs are
// standardized per dimension with training statistics stored in the model.
struct SvmModel {
  std::vector<std::vector<double>> support;  // standardized support vectors
  std::vector<double> coef;                  // alpha_i * y_i
  double bias = 0.0;
  double gamma = 0.0;
  double C = 1.0;
  std::vector<double> mean, sigma;  // standardization, sigma guarded > 0

  std::size_t dim() const { return mean.size(); }
};

namespace detail {

inline double rbf(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

}  // namespace detail

// Decision value f(x) = sum_i coef_i K(x, sv_i) + b on a raw (unstandardized)
// probe.
inline double svm_decision(const SvmModel& m, const std::vector<double>& probe) {
  if (probe.size() != m.dim()) throw Error("svm: probe dimension mismatch");
  std::vector<double> z(probe.size());
  for (std::size_t i = 0; i < probe.size(); ++i) z[i] = (probe[i] - m.mean[i]) / m.sigma[i];
  double f = m.bias;
  for (std::size_t s = 0; s < m.support.size(); ++s)
    f += m.coef[s] * detail::rbf(z, m.support[s], m.gamma);
  return f;
}

// Dissimilarity convention: lower = more genuine, so the similarity f(x) is
// negated.
inline double svm_dissimilarity(const SvmModel& m, const std::vector<double>& probe) {
  return -svm_decision(m, probe);
}

// SMO with maximal-violating-pair selection on the dual
//   min 1/2 a^T Q a - e^T a,  0 <= a <= C,  y^T a = 0,  Q_ij = y_i y_j K_ij.
// KKT stopping tolerance 1e-3, iteration budget 1e5.
inline SvmModel train_rbf_svm(const std::vector<std::vector<double>>& positives,
                              const std::vector<std::vector<double>>& negatives, double C = 1.0,
                              double gamma = 0.0, double tol = 1e-3,
                              std::int64_t max_iter = 100000, bool standardize = true) {
  if (positives.empty() || negatives.empty()) throw Error("svm: both classes must be non-empty");
  const std::size_t d = positives[0].size();
  const std::size_t n = positives.size() + negatives.size();

  std::vector<const std::vector<double>*> x;
  std::vector<double> y;
  for (const auto& p : positives) {
    if (p.size() != d) throw Error("svm: inconsistent dimensions");
    x.push_back(&p);
    y.push_back(1.0);
  }
  for (const auto& q : negatives) {
    if (q.size() != d) throw Error("svm: inconsistent dimensions");
    x.push_back(&q);
    y.push_back(-1.0);
  }

  // identical class supports carry no discriminative information; report the
  // same non-convergence failure the iteration budget would produce
  {
    auto sorted_copy = [](const std::vector<std::vector<double>>& v) {
      auto c = v;
      std::sort(c.begin(), c.end());
      return c;
    };
    if (positives.size() == negatives.size() && sorted_copy(positives) == sorted_copy(negatives))
      throw Error("svm did not converge: degenerate training set (identical classes)");
  }

  SvmModel model;
  model.C = C;
  model.mean.assign(d, 0.0);
  model.sigma.assign(d, 1.0);
  if (standardize) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) model.mean[k] += (*x[i])[k];
    for (auto& v : model.mean) v /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        const double dv = (*x[i])[k] - model.mean[k];
        var[k] += dv * dv;
      }
    for (std::size_t k = 0; k < d; ++k) {
      var[k] /= static_cast<double>(n);
      model.sigma[k] = var[k] > 1e-24 ? std::sqrt(var[k]) : 1.0;
    }
  }

  std::vector<std::vector<double>> z(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) z[i][k] = ((*x[i])[k] - model.mean[k]) / model.sigma[k];

  if (gamma <= 0.0) {
    // 1 / (d * mean per-dimension variance) on the standardized data
    double mean_var = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        m1 += z[i][k];
        m2 += z[i][k] * z[i][k];
      }
      m1 /= static_cast<double>(n);
      m2 /= static_cast<double>(n);
      mean_var += m2 - m1 * m1;
    }
    mean_var /= static_cast<double>(d);
    if (mean_var <= 1e-24) mean_var = 1.0;
    gamma = 1.0 / (static_cast<double>(d) * mean_var);
  }
  model.gamma = gamma;

  // full Gram matrix (desk scale)
  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = detail::rbf(z[i], z[j], gamma);
      K[i * n + j] = v;
      K[j * n + i] = v;
    }

  std::vector<double> alpha(n, 0.0);
  std::vector<double> G(n, -1.0);  // gradient of the dual at alpha = 0

  std::int64_t it = 0;
  for (; it < max_iter; ++it) {
    // maximal violating pair
    double m_up = -1e300, m_low = 1e300;
    std::ptrdiff_t i = -1, j = -1;
    for (std::size_t t = 0; t < n; ++t) {
      const bool in_up = (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0);
      const bool in_low = (y[t] < 0 && alpha[t] < C) || (y[t] > 0 && alpha[t] > 0);
      const double v = -y[t] * G[t];
      if (in_up && v > m_up) {
        m_up = v;
        i = static_cast<std::ptrdiff_t>(t);
      }
      if (in_low && v < m_low) {
        m_low = v;
        j = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (i < 0 || j < 0 || m_up - m_low < tol) break;

    const auto ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
    double quad = K[ii * n + ii] + K[jj * n + jj] - 2.0 * K[ii * n + jj];
    if (quad <= 1e-12) quad = 1e-12;
    // step along (y_i e_i - y_j e_j): alpha_i += y_i t, alpha_j -= y_j t
    double t_step = (m_up - m_low) / quad;
    // box clipping
    if (y[ii] > 0)
      t_step = std::min(t_step, C - alpha[ii]);
    else
      t_step = std::min(t_step, alpha[ii]);
    if (y[jj] > 0)
      t_step = std::min(t_step, alpha[jj]);
    else
      t_step = std::min(t_step, C - alpha[jj]);

    const double da_i = y[ii] * t_step;
    const double da_j = -y[jj] * t_step;
    alpha[ii] += da_i;
    alpha[jj] += da_j;
    for (std::size_t t = 0; t < n; ++t)
      G[t] += y[t] * y[ii] * K[t * n + ii] * da_i + y[t] * y[jj] * K[t * n + jj] * da_j;
  }
  if (it >= max_iter) throw Error("svm did not converge within iteration budget");

  // bias from the violating-pair bounds at the solution
  {
    double m_up = -1e300, m_low = 1e300;
    double free_sum = 0.0;
    std::size_t free_cnt = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const bool in_up = (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0);
      const bool in_low = (y[t] < 0 && alpha[t] < C) || (y[t] > 0 && alpha[t] > 0);
      const double v = -y[t] * G[t];
      if (in_up) m_up = std::max(m_up, v);
      if (in_low) m_low = std::min(m_low, v);
      if (alpha[t] > 0.0 && alpha[t] < C) {
        free_sum += v;
        ++free_cnt;
      }
    }
    model.bias = free_cnt ? free_sum / static_cast<double>(free_cnt) : (m_up + m_low) / 2.0;
  }

  for (std::size_t t = 0; t < n; ++t)
    if (alpha[t] > 1e-12) {
      model.support.push_back(z[t]);
      model.coef.push_back(alpha[t] * y[t]);
    }
  bool has_pos = false, has_neg = false;
  for (double c : model.coef) (c > 0 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw Error("svm: degenerate solution without support vectors in both classes");
  return model;
}

// Dual objective value 1/2 a^T Q a - e^T a for a trained model's alpha
// restricted to its support set (test utility).
inline double svm_dual_objective(const std::vector<std::vector<double>>& x,
                                 const std::vector<double>& y, const std::vector<double>& alpha,
                                 double gamma) {
  const std::size_t n = x.size();
  double quad = 0.0, lin = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lin += alpha[i];
    for (std::size_t j = 0; j < n; ++j)
      quad += alpha[i] * alpha[j] * y[i] * y[j] * detail::rbf(x[i], x[j], gamma);
  }
  return 0.5 * quad - lin;
}

}  // namespace biowish
