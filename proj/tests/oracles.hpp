// Test-only oracles, kept independent of the evolution code they check:
// a dense complex matrix exponential, the spatially discretised flat Dirac
// generator assembled from scratch, and closed-form plane-wave spinors.
#pragma once

#include <cmath>
#include <complex>
#include <vector>

namespace oracles {

using cplx = std::complex<double>;

struct DenseC {
  int n = 0;
  std::vector<cplx> a;  // row-major n x n

  explicit DenseC(int nn) : n(nn), a(static_cast<std::size_t>(nn) * static_cast<std::size_t>(nn)) {}
  cplx& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)]; }
  const cplx& operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)]; }

  static DenseC identity(int nn) {
    DenseC m(nn);
    for (int i = 0; i < nn; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline DenseC mul(const DenseC& x, const DenseC& y) {
  DenseC r(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int k = 0; k < x.n; ++k) {
      const cplx v = x(i, k);
      if (v == 0.0) continue;
      for (int j = 0; j < x.n; ++j) r(i, j) += v * y(k, j);
    }
  return r;
}

inline double norm1(const DenseC& x) {
  double best = 0.0;
  for (int j = 0; j < x.n; ++j) {
    double col = 0.0;
    for (int i = 0; i < x.n; ++i) col += std::abs(x(i, j));
    best = std::max(best, col);
  }
  return best;
}

// exp(B) by scaling-and-squaring with a Taylor core.
inline DenseC matexp(DenseC b) {
  int squarings = 0;
  double nrm = norm1(b);
  while (nrm > 0.5) {
    for (auto& z : b.a) z *= 0.5;
    nrm *= 0.5;
    ++squarings;
  }
  DenseC result = DenseC::identity(b.n);
  DenseC term = DenseC::identity(b.n);
  for (int k = 1; k <= 24; ++k) {
    term = mul(term, b);
    for (auto& z : term.a) z /= static_cast<double>(k);
    for (std::size_t i = 0; i < result.a.size(); ++i) result.a[i] += term.a[i];
  }
  for (int s = 0; s < squarings; ++s) result = mul(result, result);
  return result;
}

inline std::vector<cplx> apply(const DenseC& m, const std::vector<cplx>& v) {
  std::vector<cplx> r(static_cast<std::size_t>(m.n));
  for (int i = 0; i < m.n; ++i) {
    cplx acc = 0.0;
    for (int j = 0; j < m.n; ++j) acc += m(i, j) * v[static_cast<std::size_t>(j)];
    r[static_cast<std::size_t>(i)] = acc;
  }
  return r;
}

// Dense generator H of the flat 1+1D semidiscrete system i d_t psi = H psi,
// H = gamma^0 (-i gamma^1 D + m), assembled from the literal Dirac-basis
// constants and a periodic central-difference matrix of the given order.
// Unknown ordering: component-major within site, site index x: row = 4*x + a.
inline DenseC flat_dirac_generator(int nx, double dx, double m, int order) {
  // gamma^0 gamma^1 and gamma^0 in the Dirac basis
  const double g0[4] = {1.0, 1.0, -1.0, -1.0};  // diagonal of gamma^0
  // gamma^0 gamma^1: block [[0, s1],[s1, 0]] -> entries (0,3),(1,2),(2,1),(3,0) = 1
  int g01r[4] = {0, 1, 2, 3}, g01c[4] = {3, 2, 1, 0};

  DenseC h(4 * nx);
  auto wrap = [&](int i) { return ((i % nx) + nx) % nx; };
  for (int x = 0; x < nx; ++x) {
    for (int a = 0; a < 4; ++a) h(4 * x + a, 4 * x + a) += m * g0[a];
    auto add_D = [&](int y, double w) {
      for (int a = 0; a < 4; ++a)
        h(4 * x + g01r[a], 4 * y + g01c[a]) += cplx(0.0, -1.0) * w;  // -i (g^0 g^1) D
    };
    if (order == 2) {
      add_D(wrap(x + 1), 1.0 / (2.0 * dx));
      add_D(wrap(x - 1), -1.0 / (2.0 * dx));
    } else {
      add_D(wrap(x + 1), 8.0 / (12.0 * dx));
      add_D(wrap(x - 1), -8.0 / (12.0 * dx));
      add_D(wrap(x + 2), -1.0 / (12.0 * dx));
      add_D(wrap(x - 2), 1.0 / (12.0 * dx));
    }
  }
  return h;
}

// Momentum symbol of the periodic central difference.
inline double diff_symbol(double k, double dx, int order) {
  if (order == 2) return std::sin(k * dx) / dx;
  return (8.0 * std::sin(k * dx) - std::sin(2.0 * k * dx)) / (6.0 * dx);
}

// Positive-energy Dirac-basis spinor for momentum p along x:
// u = sqrt(E+m) (1, 0, 0, p/(E+m)), (E g^0 - p g^1 - m) u = 0.
inline void plane_wave_spinor(double p, double m, cplx out[4]) {
  const double E = std::sqrt(p * p + m * m);
  const double r = std::sqrt(E + m);
  out[0] = r;
  out[1] = 0.0;
  out[2] = 0.0;
  out[3] = p / r;
}

}  // namespace oracles
