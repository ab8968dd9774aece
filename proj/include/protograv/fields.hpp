#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "protograv/clifford.hpp"
#include "protograv/complex_matrix.hpp"
#include "protograv/grid.hpp"
#include "protograv/numerics.hpp"

namespace protograv {

// Plain per-site value storage. Step production reads one field and writes a
// fresh one; there is no intra-step shared mutation.
template <class T>
struct Lattice {
  Grid grid;
  std::vector<T> v;

  Lattice() = default;
  explicit Lattice(const Grid& g) : grid(g), v(static_cast<std::size_t>(g.sites())) {}

  T& operator[](int s) { return v[static_cast<std::size_t>(s)]; }
  const T& operator[](int s) const { return v[static_cast<std::size_t>(s)]; }
  int sites() const { return grid.sites(); }
};

using SpinpletField = Lattice<Spinplet>;
using CovectorField = Lattice<Vec4d>;   // real 4-tuple A_mu
using ScalarField = Lattice<double>;
using Sym4Field = Lattice<Mat4d>;       // per-site real 4x4 (stress tensor, Einstein residual)
using CurrentField = Lattice<Vec4d>;

// Per-site vectorplet components with one field-wide variance tag.
struct VectorpletField {
  Grid grid;
  Variance var = Variance::covariant;
  std::vector<std::array<Mat4c, 4>> v;

  VectorpletField() = default;
  VectorpletField(const Grid& g, Variance tag) : grid(g), var(tag), v(static_cast<std::size_t>(g.sites())) {}

  std::array<Mat4c, 4>& operator[](int s) { return v[static_cast<std::size_t>(s)]; }
  const std::array<Mat4c, 4>& operator[](int s) const { return v[static_cast<std::size_t>(s)]; }
  int sites() const { return grid.sites(); }

  Vectorplet at_site(int s) const { return Vectorplet{v[static_cast<std::size_t>(s)], var}; }
};

// Per-site real symmetric 4x4 metric with one variance tag.
struct MetricField {
  Grid grid;
  Variance var = Variance::covariant;
  std::vector<Mat4d> v;

  MetricField() = default;
  MetricField(const Grid& g, Variance tag) : grid(g), var(tag), v(static_cast<std::size_t>(g.sites())) {}

  Mat4d& operator[](int s) { return v[static_cast<std::size_t>(s)]; }
  const Mat4d& operator[](int s) const { return v[static_cast<std::size_t>(s)]; }
  int sites() const { return grid.sites(); }
};

// Per-site connection coefficients G^a_{mu nu}, symmetric in (mu, nu),
// stored as 64 doubles with index (a*4+mu)*4+nu.
struct ConnectionField {
  Grid grid;
  std::vector<std::array<double, 64>> v;

  ConnectionField() = default;
  explicit ConnectionField(const Grid& g) : grid(g), v(static_cast<std::size_t>(g.sites())) {}

  double& coef(int s, int a, int mu, int nu) {
    return v[static_cast<std::size_t>(s)][static_cast<std::size_t>((a * 4 + mu) * 4 + nu)];
  }
  const double& coef(int s, int a, int mu, int nu) const {
    return v[static_cast<std::size_t>(s)][static_cast<std::size_t>((a * 4 + mu) * 4 + nu)];
  }
  int sites() const { return grid.sites(); }
};

// All dynamic fields plus the prescribed background at one coordinate time.
struct StateSlice {
  double time = 0.0;
  SpinpletField psi, phi;      // electron pair
  SpinpletField psi_p, phi_p;  // positron pair
  CovectorField A;             // potential, temporal gauge A_0 = 0 in EM runs
  CovectorField A_dot;         // conjugate velocity of A
  VectorpletField gamma;       // covariant background
  VectorpletField lambda;      // contravariant background
};

inline StateSlice make_zero_state(const Grid& g) {
  StateSlice s;
  s.time = 0.0;
  s.psi = SpinpletField(g);
  s.phi = SpinpletField(g);
  s.psi_p = SpinpletField(g);
  s.phi_p = SpinpletField(g);
  s.A = CovectorField(g);
  s.A_dot = CovectorField(g);
  s.gamma = VectorpletField(g, Variance::covariant);
  s.lambda = VectorpletField(g, Variance::contravariant);
  return s;
}

// Flat background: gamma = eta-lowered Dirac representation, lambda = Dirac.
inline StateSlice make_flat_state(const Grid& g) {
  StateSlice s = make_zero_state(g);
  const Vectorplet gl = dirac_gamma_lower();
  const Vectorplet lu = dirac_representation();
  for (int i = 0; i < g.sites(); ++i) {
    s.gamma[i] = gl.c;
    s.lambda[i] = lu.c;
  }
  return s;
}

// Static conformal background: gamma_mu = Omega(x) * (lowered Dirac),
// lambda^mu = Omega(x)^{-1} * Dirac. The extracted metrics are the exact
// inverse pair Omega^2 eta and Omega^{-2} eta.
template <class F>
StateSlice make_conformal_state(const Grid& g, F&& omega2) {
  StateSlice s = make_zero_state(g);
  const Vectorplet gl = dirac_gamma_lower();
  const Vectorplet lu = dirac_representation();
  for (int i = 0; i < g.sites(); ++i) {
    const double w2 = omega2(g.position(i));
    if (!(w2 > 0.0)) throw SimError("make_conformal_state: Omega^2 must be positive");
    const double w = std::sqrt(w2);
    for (int mu = 0; mu < 4; ++mu) {
      s.gamma[i][static_cast<std::size_t>(mu)] = w * gl.c[static_cast<std::size_t>(mu)];
      s.lambda[i][static_cast<std::size_t>(mu)] = (1.0 / w) * lu.c[static_cast<std::size_t>(mu)];
    }
  }
  return s;
}

// --- pointwise sampling (evaluation at site coordinates) ---

template <class F>
SpinpletField sample_spinplet(const Grid& g, F&& f) {
  SpinpletField out(g);
  for (int s = 0; s < g.sites(); ++s) out[s] = f(g.position(s));
  return out;
}

template <class F>
ScalarField sample_scalar(const Grid& g, F&& f) {
  ScalarField out(g);
  for (int s = 0; s < g.sites(); ++s) out[s] = f(g.position(s));
  return out;
}

template <class F>
CovectorField sample_covector(const Grid& g, F&& f) {
  CovectorField out(g);
  for (int s = 0; s < g.sites(); ++s) out[s] = f(g.position(s));
  return out;
}

template <class F>
VectorpletField sample_vectorplet(const Grid& g, Variance tag, F&& f) {
  VectorpletField out(g, tag);
  for (int s = 0; s < g.sites(); ++s) out[s] = f(g.position(s));
  return out;
}

template <class F>
MetricField sample_metric(const Grid& g, Variance tag, F&& f) {
  MetricField out(g, tag);
  for (int s = 0; s < g.sites(); ++s) out[s] = f(g.position(s));
  return out;
}

inline bool finite(const Spinplet& s) {
  for (const cplx& z : s)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

inline bool finite(const Vec4d& s) {
  for (double x : s)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace protograv
