#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdlib>

#include "protograv/errors.hpp"

namespace protograv {

using cplx = std::complex<double>;

using Spinplet = std::array<cplx, 4>;  // complex 4-tuple of scalar fields
using Vec4c = std::array<cplx, 4>;
using Vec4d = std::array<double, 4>;

// 4x4 complex matrix, row-major. The atom of spinplet-index algebra; all
// arithmetic is exact finite-dimensional linear algebra, no normalization.
struct Mat4c {
  std::array<cplx, 16> e{};

  cplx& operator()(int r, int c) { return e[static_cast<std::size_t>(r * 4 + c)]; }
  const cplx& operator()(int r, int c) const { return e[static_cast<std::size_t>(r * 4 + c)]; }

  static Mat4c zero() { return Mat4c{}; }
  static Mat4c identity() {
    Mat4c m;
    for (int i = 0; i < 4; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Mat4c operator+(const Mat4c& a, const Mat4c& b) {
  Mat4c r;
  for (int i = 0; i < 16; ++i) r.e[i] = a.e[i] + b.e[i];
  return r;
}

inline Mat4c operator-(const Mat4c& a, const Mat4c& b) {
  Mat4c r;
  for (int i = 0; i < 16; ++i) r.e[i] = a.e[i] - b.e[i];
  return r;
}

inline Mat4c operator*(const Mat4c& a, const Mat4c& b) {
  Mat4c r;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) {
      const cplx aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < 4; ++j) r(i, j) += aik * b(k, j);
    }
  return r;
}

inline Mat4c operator*(cplx s, const Mat4c& a) {
  Mat4c r;
  for (int i = 0; i < 16; ++i) r.e[i] = s * a.e[i];
  return r;
}

inline Mat4c operator*(double s, const Mat4c& a) { return cplx(s, 0.0) * a; }

inline Spinplet operator*(const Mat4c& m, const Spinplet& v) {
  Spinplet r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[static_cast<std::size_t>(i)] += m(i, j) * v[static_cast<std::size_t>(j)];
  return r;
}

inline cplx trace(const Mat4c& m) { return m(0, 0) + m(1, 1) + m(2, 2) + m(3, 3); }

inline Mat4c transpose(const Mat4c& m) {
  Mat4c r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r(i, j) = m(j, i);
  return r;
}

inline Mat4c conjugate(const Mat4c& m) {
  Mat4c r;
  for (int i = 0; i < 16; ++i) r.e[i] = std::conj(m.e[i]);
  return r;
}

inline Mat4c adjoint(const Mat4c& m) { return conjugate(transpose(m)); }

inline double max_abs(const Mat4c& m) {
  double r = 0.0;
  for (const cplx& z : m.e) r = std::max(r, std::abs(z));
  return r;
}

inline double norm_inf(const Mat4c& m) {
  double r = 0.0;
  for (int i = 0; i < 4; ++i) {
    double row = 0.0;
    for (int j = 0; j < 4; ++j) row += std::abs(m(i, j));
    r = std::max(r, row);
  }
  return r;
}

// Gaussian elimination with partial pivoting; throws SingularMatrix.
inline Mat4c inverse(const Mat4c& m) {
  std::array<std::array<cplx, 8>, 4> a{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) a[i][j] = m(i, j);
    a[i][4 + i] = 1.0;
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) == 0.0) throw SingularMatrix("4x4 complex matrix is singular");
    std::swap(a[piv], a[col]);
    const cplx d = a[col][col];
    for (int j = 0; j < 8; ++j) a[col][j] /= d;
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const cplx f = a[r][col];
      if (f == 0.0) continue;
      for (int j = 0; j < 8; ++j) a[r][j] -= f * a[col][j];
    }
  }
  Mat4c inv;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) inv(i, j) = a[i][4 + j];
  return inv;
}

inline double condition_inf(const Mat4c& m) {
  return norm_inf(m) * norm_inf(inverse(m));
}

// --- real 4x4 helpers (Lorentz matrices, metric blocks) ---

using Mat4d = std::array<double, 16>;  // row-major

inline double& at(Mat4d& m, int r, int c) { return m[static_cast<std::size_t>(r * 4 + c)]; }
inline const double& at(const Mat4d& m, int r, int c) { return m[static_cast<std::size_t>(r * 4 + c)]; }

inline Mat4d mat4d_identity() {
  Mat4d m{};
  at(m, 0, 0) = at(m, 1, 1) = at(m, 2, 2) = at(m, 3, 3) = 1.0;
  return m;
}

inline Mat4d mat4d_mul(const Mat4d& a, const Mat4d& b) {
  Mat4d r{};
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) {
      const double aik = at(a, i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < 4; ++j) at(r, i, j) += aik * at(b, k, j);
    }
  return r;
}

inline Mat4d mat4d_transpose(const Mat4d& a) {
  Mat4d r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) at(r, i, j) = at(a, j, i);
  return r;
}

inline double mat4d_max_abs_diff(const Mat4d& a, const Mat4d& b) {
  double r = 0.0;
  for (int i = 0; i < 16; ++i) r = std::max(r, std::abs(a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]));
  return r;
}

inline double mat4d_det(const Mat4d& m) {
  std::array<std::array<double, 4>, 4> a{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a[i][j] = at(m, i, j);
  double det = 1.0;
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0) return 0.0;
    if (piv != col) {
      std::swap(a[piv], a[col]);
      det = -det;
    }
    det *= a[col][col];
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int j = col; j < 4; ++j) a[r][j] -= f * a[col][j];
    }
  }
  return det;
}

inline Mat4d mat4d_inverse(const Mat4d& m) {
  std::array<std::array<double, 8>, 4> a{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) a[i][j] = at(m, i, j);
    a[i][4 + i] = 1.0;
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) == 0.0) throw SingularMatrix("4x4 real matrix is singular");
    std::swap(a[piv], a[col]);
    const double d = a[col][col];
    for (int j = 0; j < 8; ++j) a[col][j] /= d;
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      if (f == 0.0) continue;
      for (int j = 0; j < 8; ++j) a[r][j] -= f * a[col][j];
    }
  }
  Mat4d inv{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) at(inv, i, j) = a[i][4 + j];
  return inv;
}

inline double spinplet_norm(const Spinplet& s) {
  double r = 0.0;
  for (const cplx& z : s) r += std::norm(z);
  return std::sqrt(r);
}

}  // namespace protograv
