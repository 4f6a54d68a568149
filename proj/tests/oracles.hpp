#ifndef GEOSYNTH_TESTS_ORACLES_HPP
#define GEOSYNTH_TESTS_ORACLES_HPP

// Reference computations for tests. Written against plain nested vectors so
// they share no code with the library's Eigen decompositions.

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

inline Mat to_mat(const Eigen::MatrixXd& m) {
  Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  }
  return out;
}

inline Vec to_vec(const Eigen::VectorXd& v) { return Vec(v.data(), v.data() + v.size()); }

inline Mat identity(std::size_t n) {
  Mat m(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
  return m;
}

inline Mat multiply(const Mat& a, const Mat& b) {
  Mat c(a.size(), Vec(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < b.size(); ++k) {
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
    }
  }
  return c;
}

inline Vec multiply(const Mat& a, const Vec& x) {
  Vec y(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < x.size(); ++k) y[i] += a[i][k] * x[k];
  }
  return y;
}

inline Mat add(const Mat& a, const Mat& b, double sb = 1.0) {
  Mat c = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[0].size(); ++j) c[i][j] += sb * b[i][j];
  }
  return c;
}

inline Mat scale(const Mat& a, double s) {
  Mat c = a;
  for (auto& row : c) {
    for (auto& v : row) v *= s;
  }
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a[0].size(), Vec(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  }
  return t;
}

/// Gauss-Jordan inverse with partial pivoting.
inline Mat inverse(Mat a) {
  const std::size_t n = a.size();
  Mat inv = identity(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    if (a[piv][c] == 0.0) throw std::runtime_error("singular matrix");
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    const double d = a[c][c];
    for (std::size_t j = 0; j < n; ++j) {
      a[c][j] /= d;
      inv[c][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[c][j];
        inv[r][j] -= f * inv[c][j];
      }
    }
  }
  return inv;
}

/// Determinant by Gaussian elimination.
inline double determinant(Mat a) {
  const std::size_t n = a.size();
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    if (a[piv][c] == 0.0) return 0.0;
    if (piv != c) {
      std::swap(a[c], a[piv]);
      det = -det;
    }
    det *= a[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j < n; ++j) a[r][j] -= f * a[c][j];
    }
  }
  return det;
}

inline Mat diag(const Vec& d) {
  Mat m(d.size(), Vec(d.size(), 0.0));
  for (std::size_t i = 0; i < d.size(); ++i) m[i][i] = d[i];
  return m;
}

/// Euclidean distance matrix, computed directly.
inline Mat distances(const std::vector<std::pair<double, double>>& pts) {
  Mat d(pts.size(), Vec(pts.size(), 0.0));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      d[i][j] = std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
    }
  }
  return d;
}

inline Mat exp_cov(const Mat& d, double sigma2, double phi) {
  Mat k = d;
  for (auto& row : k) {
    for (auto& v : row) v = sigma2 * std::exp(-phi * v);
  }
  return k;
}

struct Moments {
  Vec mean;
  Mat cov;
};

/// w | rest in precision form: cov = (A A / tau2 + Sigma_W^-1)^-1,
/// mean = cov A r / tau2, with explicit inverses throughout.
inline Moments w_conditional(const Mat& sigma_w, const Vec& a, double tau2, const Vec& r) {
  const Mat prec = add(scale(multiply(diag(a), diag(a)), 1.0 / tau2), inverse(sigma_w));
  Moments m;
  m.cov = inverse(prec);
  Vec ar(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) ar[i] = a[i] * r[i] / tau2;
  m.mean = multiply(m.cov, ar);
  return m;
}

/// Conditional prior of coordinate i given the others: mean weights and variance.
struct ConditionalPrior {
  Vec weights;  // over all coordinates, 0 at i
  double variance;
};

inline ConditionalPrior conditional_prior(const Mat& sigma, std::size_t i) {
  const std::size_t n = sigma.size();
  Mat s_rest;
  Vec k;
  for (std::size_t r = 0; r < n; ++r) {
    if (r == i) continue;
    Vec row;
    for (std::size_t c = 0; c < n; ++c) {
      if (c != i) row.push_back(sigma[r][c]);
    }
    s_rest.push_back(row);
    k.push_back(sigma[r][i]);
  }
  const Vec wts = multiply(inverse(s_rest), k);
  double quad = 0.0;
  for (std::size_t t = 0; t < k.size(); ++t) quad += k[t] * wts[t];
  ConditionalPrior cp;
  cp.weights.assign(n, 0.0);
  std::size_t t = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (r != i) cp.weights[r] = wts[t++];
  }
  cp.variance = sigma[i][i] - quad;
  return cp;
}

/// OLS via the normal equations and an explicit inverse.
struct Ols {
  Vec coef;
  Vec variance;
};

inline Ols normal_equations(const Mat& x, const Vec& y) {
  const Mat xt = transpose(x);
  const Mat xtx_inv = inverse(multiply(xt, x));
  Ols o;
  o.coef = multiply(xtx_inv, multiply(xt, y));
  const Vec fit = multiply(x, o.coef);
  double rss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) rss += (y[i] - fit[i]) * (y[i] - fit[i]);
  const double s2 = rss / static_cast<double>(x.size() - x[0].size());
  for (std::size_t k = 0; k < xtx_inv.size(); ++k) o.variance.push_back(s2 * xtx_inv[k][k]);
  return o;
}

}  // namespace oracle

#endif  // GEOSYNTH_TESTS_ORACLES_HPP
