#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sbcbf {

using Vec = std::vector<double>;

// Row-major dense matrix, small sizes only (state/input dimensions).
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline double dot(const Vec& x, const Vec& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm(const Vec& x) { return std::sqrt(dot(x, x)); }

inline Vec add(Vec x, const Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
  return x;
}

inline Vec sub(Vec x, const Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= y[i];
  return x;
}

inline Vec scale(Vec x, double s) {
  for (double& v : x) v *= s;
  return x;
}

inline void axpy(double alpha, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vec matvec(const Mat& m, const Vec& x) {
  Vec y(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

// y = x^T M, x of length m.rows.
inline Vec vecmat(const Vec& x, const Mat& m) {
  Vec y(m.cols, 0.0);
  for (std::size_t j = 0; j < m.cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) s += x[i] * m(i, j);
    y[j] = s;
  }
  return y;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Mat transpose(const Mat& m) {
  Mat t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

// Cholesky factorization of a symmetric positive definite matrix.
// Returns false when a pivot drops below tol (not PD to working precision).
inline bool cholesky(const Mat& m, Mat& lower, double tol = 1e-14) {
  const std::size_t n = m.rows;
  lower = Mat(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
    if (d <= tol) return false;
    lower(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / lower(j, j);
    }
  }
  return true;
}

inline Vec cholesky_solve(const Mat& lower, Vec b) {
  const std::size_t n = lower.rows;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= lower(i, k) * b[k];
    b[i] /= lower(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) b[i] -= lower(k, i) * b[k];
    b[i] /= lower(i, i);
  }
  return b;
}

// Solve SPD system m x = b; throws on failure.
inline Vec spd_solve(const Mat& m, const Vec& b) {
  Mat lower;
  if (!cholesky(m, lower)) throw std::runtime_error("spd_solve: matrix not positive definite");
  return cholesky_solve(lower, b);
}

// Gaussian elimination with partial pivoting for general square systems.
inline Vec lu_solve(Mat m, Vec b) {
  const std::size_t n = m.rows;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::fabs(m(i, col)) > std::fabs(m(piv, col))) piv = i;
    if (std::fabs(m(piv, col)) < 1e-300) throw std::runtime_error("lu_solve: singular matrix");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(piv, j), m(col, j));
      std::swap(b[piv], b[col]);
    }
    for (std::size_t i = col + 1; i < n; ++i) {
      const double f = m(i, col) / m(col, col);
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) m(i, j) -= f * m(col, j);
      b[i] -= f * b[col];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= m(i, j) * x[j];
    x[i] = s / m(i, i);
  }
  return x;
}

inline Mat inverse(const Mat& m) {
  const std::size_t n = m.rows;
  Mat inv(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vec e(n, 0.0);
    e[j] = 1.0;
    Vec col = lu_solve(m, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

// Right pseudoinverse application: g^T (g g^T)^{-1} v; exact inverse when g is square.
inline Vec right_pinv_apply(const Mat& g, const Vec& v) {
  Mat ggt(g.rows, g.rows);
  for (std::size_t i = 0; i < g.rows; ++i)
    for (std::size_t j = 0; j < g.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < g.cols; ++k) s += g(i, k) * g(j, k);
      ggt(i, j) = s;
    }
  Vec w = spd_solve(ggt, v);
  Vec u(g.cols, 0.0);
  for (std::size_t k = 0; k < g.cols; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.rows; ++i) s += g(i, k) * w[i];
    u[k] = s;
  }
  return u;
}

// 2-norm condition number estimate via the symmetric eigenvalue range of an SPD matrix,
// computed with cyclic Jacobi (matrices here are at most a few rows).
inline double spd_condition(Mat m) {
  const std::size_t n = m.rows;
  for (int sweep = 0; sweep < 50; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(m(p, q)) < 1e-300) continue;
        const double theta = 0.5 * std::atan2(2.0 * m(p, q), m(q, q) - m(p, p));
        const double c = std::cos(theta), s = std::sin(theta);
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
      }
  }
  double lo = m(0, 0), hi = m(0, 0);
  for (std::size_t i = 1; i < n; ++i) {
    lo = std::min(lo, m(i, i));
    hi = std::max(hi, m(i, i));
  }
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace sbcbf
