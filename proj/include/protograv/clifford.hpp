#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>

#include "protograv/complex_matrix.hpp"
#include "protograv/errors.hpp"

namespace protograv {

enum class Variance { covariant, contravariant };

// Four spacetime-indexed 4x4 complex matrices (gamma_mu or lambda^mu).
// The variance tag is fixed at construction and never mutated.
struct Vectorplet {
  std::array<Mat4c, 4> c{};
  Variance var = Variance::covariant;
};

inline Mat4c anticommutator(const Mat4c& a, const Mat4c& b) { return a * b + b * a; }

inline constexpr double eta_diag(int mu) { return mu == 0 ? -1.0 : 1.0; }

inline Mat4d minkowski() {
  Mat4d m{};
  at(m, 0, 0) = -1.0;
  at(m, 1, 1) = at(m, 2, 2) = at(m, 3, 3) = 1.0;
  return m;
}

// Dirac representation, contravariant components. Satisfies
// {g^mu, g^nu} = -2 eta^{mu nu} I with eta = diag(-1,+1,+1,+1):
// (g^0)^2 = +I and (g^i)^2 = -I.
inline Vectorplet dirac_representation() {
  Vectorplet g;
  g.var = Variance::contravariant;
  Mat4c& g0 = g.c[0];
  g0(0, 0) = g0(1, 1) = 1.0;
  g0(2, 2) = g0(3, 3) = -1.0;
  // g^i = [[0, s_i], [-s_i, 0]] in 2x2 blocks
  Mat4c& g1 = g.c[1];
  g1(0, 3) = 1.0;
  g1(1, 2) = 1.0;
  g1(2, 1) = -1.0;
  g1(3, 0) = -1.0;
  Mat4c& g2 = g.c[2];
  g2(0, 3) = cplx(0, -1);
  g2(1, 2) = cplx(0, 1);
  g2(2, 1) = cplx(0, 1);
  g2(3, 0) = cplx(0, -1);
  Mat4c& g3 = g.c[3];
  g3(0, 2) = 1.0;
  g3(1, 3) = -1.0;
  g3(2, 0) = -1.0;
  g3(3, 1) = 1.0;
  return g;
}

// Lower/raise the spacetime index with the flat eta; flips only component 0.
inline Vectorplet flat_lower(const Vectorplet& v) {
  Vectorplet r = v;
  r.var = Variance::covariant;
  r.c[0] = -1.0 * v.c[0];
  return r;
}

inline Vectorplet flat_raise(const Vectorplet& v) {
  Vectorplet r = v;
  r.var = Variance::contravariant;
  r.c[0] = -1.0 * v.c[0];
  return r;
}

inline Vectorplet dirac_gamma_lower() { return flat_lower(dirac_representation()); }

// Real symmetric 4x4 tensor extracted from a vectorplet pair; symmetric by
// construction, entries are the real part of the trace form. Construction
// rejects pairs whose imaginary residue exceeds tol.
struct MetricTensor {
  Mat4d g{};
  Variance var = Variance::covariant;

  double operator()(int mu, int nu) const { return at(g, mu, nu); }
};

// g(V,W)_{mu nu} = Re(-1/8 Tr(V_mu W_nu + W_nu V_mu)), symmetrised over (mu,nu)
// with weight 1/2. Throws ImaginaryResidue when |Im| > tol_imag.
inline MetricTensor metric_from_pair(const Vectorplet& v, const Vectorplet& w,
                                     double tol_imag = tol::imag) {
  if (v.var != w.var) throw SimError("metric_from_pair: mixed variance pair");
  MetricTensor m;
  m.var = v.var;
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = mu; nu < 4; ++nu) {
      const cplx t_mn = trace(anticommutator(v.c[static_cast<std::size_t>(mu)], w.c[static_cast<std::size_t>(nu)]));
      const cplx t_nm = trace(anticommutator(v.c[static_cast<std::size_t>(nu)], w.c[static_cast<std::size_t>(mu)]));
      const cplx val = -0.125 * 0.5 * (t_mn + t_nm);
      if (std::abs(val.imag()) > tol_imag)
        throw ImaginaryResidue("metric_from_pair: imaginary residue " +
                               std::to_string(val.imag()) + " at (" + std::to_string(mu) + "," +
                               std::to_string(nu) + ")");
      at(m.g, mu, nu) = val.real();
      at(m.g, nu, mu) = val.real();
    }
  return m;
}

inline double lorentz_defect(const Mat4d& L) {
  const Mat4d eta = minkowski();
  return mat4d_max_abs_diff(mat4d_mul(mat4d_transpose(L), mat4d_mul(eta, L)), eta);
}

// Boost with velocity vector (vx,vy,vz), |v| < 1.
inline Mat4d lorentz_boost(double vx, double vy, double vz) {
  const double v2 = vx * vx + vy * vy + vz * vz;
  if (v2 >= 1.0) throw NotLorentz("boost velocity |v| >= 1");
  Mat4d L = mat4d_identity();
  if (v2 == 0.0) return L;
  const double gl = 1.0 / std::sqrt(1.0 - v2);
  const double vi[3] = {vx, vy, vz};
  at(L, 0, 0) = gl;
  for (int i = 0; i < 3; ++i) {
    at(L, 0, i + 1) = gl * vi[i];
    at(L, i + 1, 0) = gl * vi[i];
    for (int j = 0; j < 3; ++j) at(L, i + 1, j + 1) = (i == j ? 1.0 : 0.0) + (gl - 1.0) * vi[i] * vi[j] / v2;
  }
  return L;
}

inline Mat4d boost_x(double v) { return lorentz_boost(v, 0.0, 0.0); }

// Contravariant components mix as V'^mu = L^mu_alpha V^alpha; covariant ones
// use the inverse transpose (eta L eta, exact for Lorentz L).
inline Vectorplet boost_vectorplet(const Mat4d& L, const Vectorplet& v,
                                   double tol_lorentz = tol::lorentz) {
  if (lorentz_defect(L) > tol_lorentz)
    throw NotLorentz("boost_vectorplet: L^T eta L != eta, defect " + std::to_string(lorentz_defect(L)));
  // contravariant: V'^mu = sum_a L^mu_a V^a
  // covariant:     V'_mu = sum_a (L^{-1})^a_mu V_a with L^{-1} = eta L^T eta
  Mat4d Linv{};
  if (v.var == Variance::covariant) {
    const Mat4d eta = minkowski();
    Linv = mat4d_mul(eta, mat4d_mul(mat4d_transpose(L), eta));
  }
  Vectorplet r;
  r.var = v.var;
  for (int mu = 0; mu < 4; ++mu) {
    Mat4c acc;
    for (int al = 0; al < 4; ++al) {
      const double w = (v.var == Variance::contravariant) ? at(L, mu, al) : at(Linv, al, mu);
      if (w == 0.0) continue;
      acc = acc + w * v.c[static_cast<std::size_t>(al)];
    }
    r.c[static_cast<std::size_t>(mu)] = acc;
  }
  return r;
}

// Pointwise current built from a contravariant vectorplet and a spinplet pair:
// j^mu = 2 phi_a V^mu_{ab} psi_b. Complex in general; real on states with
// phi = g^0 psi^*.
inline Vec4c current_vector(const Vectorplet& v, const Spinplet& psi, const Spinplet& phi) {
  if (v.var != Variance::contravariant) throw SimError("current_vector: needs contravariant vectorplet");
  Vec4c j{};
  for (int mu = 0; mu < 4; ++mu) {
    cplx s = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        s += phi[static_cast<std::size_t>(a)] * v.c[static_cast<std::size_t>(mu)](a, b) * psi[static_cast<std::size_t>(b)];
    j[static_cast<std::size_t>(mu)] = 2.0 * s;
  }
  return j;
}

// Random Lorentz boost with |v| <= vmax, for degeneracy sweeps.
inline Mat4d random_boost(std::mt19937_64& rng, double vmax) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double nx, ny, nz, n2;
  do {
    nx = u(rng);
    ny = u(rng);
    nz = u(rng);
    n2 = nx * nx + ny * ny + nz * nz;
  } while (n2 > 1.0 || n2 < 1e-12);
  const double n = std::sqrt(n2);
  std::uniform_real_distribution<double> uv(0.0, vmax);
  const double v = uv(rng);
  return lorentz_boost(v * nx / n, v * ny / n, v * nz / n);
}

}  // namespace protograv
