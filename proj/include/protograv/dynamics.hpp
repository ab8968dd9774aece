#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "protograv/conservation.hpp"
#include "protograv/fields.hpp"
#include "protograv/finite_difference.hpp"
#include "protograv/geometry.hpp"

namespace protograv {

struct EvolutionParams {
  double m = 0.0;          // mass (1/length, natural units)
  double q = 0.0;          // charge coupling
  double dt = 0.0;         // step size; must satisfy the stability bound
  int fd_order = 2;        // spatial difference order, 2 or 4
  bool coupling_em = false;
};

// Prescribed-background data precomputed once per (gamma, lambda) pair.
// The evolution equations read, per site,
//   M_t d_t psi + sum_j C_j D_j psi + K psi - m psi - (q/2) A_mu lambda^mu psi = 0
// with M_t = i g^{0 nu} gamma_nu, C_j = i g^{mu j} gamma_mu and
// K = (i/2) g^{mu nu} grad_mu gamma_nu, grad_mu gamma_nu = d_mu gamma_nu
// - G^s_{mu nu} gamma_s. The phi system is the transpose with m -> -m and the
// coupling sign flipped; positrons flip the coupling once more.
struct Background {
  Grid grid;
  VectorpletField gamma;   // covariant
  VectorpletField lambda;  // contravariant
  MetricField g_lower, g_upper;
  ConnectionField conn;
  ScalarField measure;     // (|det g^{..}(lambda)|)^{-1/2}
  std::vector<Mat4c> K, KT;
  std::vector<std::array<Mat4c, 3>> C, CT;
  std::vector<Mat4c> Mt, Mt_inv, MtT_inv;
  bool flat_lambda = false;  // g(lambda) == eta everywhere (enables EM evolution)
  double max_char_speed = 1.0;
  int fd_order = 2;
};

inline Background make_background(const VectorpletField& gammaF, const VectorpletField& lambdaF,
                                  int fd_order = 2, double cond_max = tol::cond_max) {
  Background bg;
  bg.grid = gammaF.grid;
  bg.fd_order = fd_order;
  bg.gamma = gammaF;
  bg.lambda = lambdaF;
  auto [glo, gup] = metric_fields(gammaF, lambdaF);
  bg.g_lower = std::move(glo);
  bg.g_upper = std::move(gup);
  bg.conn = christoffel(bg.g_lower, bg.g_upper, fd_order);
  bg.measure = measure_factor(bg.g_upper);

  const int ns = bg.grid.sites();
  std::array<VectorpletField, 4> dgamma;
  dgamma[0] = VectorpletField(bg.grid, Variance::covariant);  // static background
  for (int a = 1; a < 4; ++a) dgamma[a] = partial(gammaF, a, fd_order);

  bg.K.resize(static_cast<std::size_t>(ns));
  bg.KT.resize(static_cast<std::size_t>(ns));
  bg.C.resize(static_cast<std::size_t>(ns));
  bg.CT.resize(static_cast<std::size_t>(ns));
  bg.Mt.resize(static_cast<std::size_t>(ns));
  bg.Mt_inv.resize(static_cast<std::size_t>(ns));
  bg.MtT_inv.resize(static_cast<std::size_t>(ns));

  bg.flat_lambda = true;
  double cmax = 0.0;
  for (int s = 0; s < ns; ++s) {
    const Mat4d& gu = bg.g_upper[s];
    // covariant derivative of gamma and its g-contraction
    Mat4c K;
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu) {
        const double w = at(gu, mu, nu);
        if (w == 0.0) continue;
        Mat4c cov = dgamma[mu][s][static_cast<std::size_t>(nu)];
        for (int sg = 0; sg < 4; ++sg) {
          const double c = bg.conn.coef(s, sg, mu, nu);
          if (c != 0.0) cov = cov - c * bg.gamma[s][static_cast<std::size_t>(sg)];
        }
        K = K + w * cov;
      }
    bg.K[static_cast<std::size_t>(s)] = cplx(0.0, 0.5) * K;
    bg.KT[static_cast<std::size_t>(s)] = transpose(bg.K[static_cast<std::size_t>(s)]);

    for (int j = 1; j < 4; ++j) {
      Mat4c cj;
      for (int mu = 0; mu < 4; ++mu) {
        const double w = at(gu, mu, j);
        if (w != 0.0) cj = cj + w * bg.gamma[s][static_cast<std::size_t>(mu)];
      }
      bg.C[static_cast<std::size_t>(s)][static_cast<std::size_t>(j - 1)] = cplx(0.0, 1.0) * cj;
      bg.CT[static_cast<std::size_t>(s)][static_cast<std::size_t>(j - 1)] =
          transpose(bg.C[static_cast<std::size_t>(s)][static_cast<std::size_t>(j - 1)]);
    }

    Mat4c mt;
    for (int mu = 0; mu < 4; ++mu) {
      const double w = at(gu, mu, 0);
      if (w != 0.0) mt = mt + w * bg.gamma[s][static_cast<std::size_t>(mu)];
    }
    mt = cplx(0.0, 1.0) * mt;
    bg.Mt[static_cast<std::size_t>(s)] = mt;
    try {
      const Mat4c mt_inv = inverse(mt);
      if (norm_inf(mt) * norm_inf(mt_inv) > cond_max)
        throw DegenerateTimeDirection("time-coefficient matrix ill-conditioned at site " +
                                      std::to_string(s));
      bg.Mt_inv[static_cast<std::size_t>(s)] = mt_inv;
      bg.MtT_inv[static_cast<std::size_t>(s)] = transpose(mt_inv);
    } catch (const SingularMatrix&) {
      throw DegenerateTimeDirection("time-coefficient matrix singular at site " + std::to_string(s));
    }

    // flatness of the lambda metric and characteristic speeds per axis
    for (int mu = 0; mu < 4 && bg.flat_lambda; ++mu)
      for (int nu = 0; nu < 4; ++nu) {
        const double e = (mu == nu) ? eta_diag(mu) : 0.0;
        if (std::abs(at(gu, mu, nu) - e) > 1e-14) {
          bg.flat_lambda = false;
          break;
        }
      }
    const double g00 = at(gu, 0, 0);
    for (int i = 1; i <= bg.grid.spatial_dims; ++i) {
      const double g0i = at(gu, 0, i);
      const double gii = at(gu, i, i);
      const double disc = g0i * g0i - g00 * gii;
      if (disc >= 0.0 && g00 != 0.0) {
        const double r = std::sqrt(disc);
        cmax = std::max({cmax, std::abs((g0i + r) / g00), std::abs((g0i - r) / g00)});
      }
    }
  }
  bg.max_char_speed = std::max(cmax, 1e-12);
  return bg;
}

namespace detail {

// One bilinear Dirac-type right-hand side. transposed selects the phi-type
// system (gamma -> gamma^T); mass_sign and q_half set the mass-term sign and
// the already-halved coupling coefficient entering the bracket.
inline SpinpletField bilinear_rhs(const SpinpletField& f, const CovectorField& A,
                                  const Background& bg, const EvolutionParams& p, bool transposed,
                                  double mass_sign, double q_half) {
  const Grid& g = bg.grid;
  std::array<SpinpletField, 3> df;
  for (int j = 1; j <= 3; ++j)
    if (g.axis_active(j - 1)) df[static_cast<std::size_t>(j - 1)] = partial(f, j, p.fd_order);

  const auto& Cj = transposed ? bg.CT : bg.C;
  const auto& Km = transposed ? bg.KT : bg.K;
  const auto& Mi = transposed ? bg.MtT_inv : bg.Mt_inv;
  const bool couple = p.coupling_em && p.q != 0.0;

  SpinpletField out(g);
  parallel_for(g.sites(), [&](int s) {
    Spinplet b{};
    for (int j = 0; j < 3; ++j) {
      if (!g.axis_active(j)) continue;
      const Spinplet d = Cj[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)] * df[static_cast<std::size_t>(j)][s];
      for (int a = 0; a < 4; ++a) b[static_cast<std::size_t>(a)] += d[static_cast<std::size_t>(a)];
    }
    const Spinplet kf = Km[static_cast<std::size_t>(s)] * f[s];
    for (int a = 0; a < 4; ++a)
      b[static_cast<std::size_t>(a)] += kf[static_cast<std::size_t>(a)] + mass_sign * p.m * f[s][static_cast<std::size_t>(a)];
    if (couple) {
      Mat4c al;
      for (int mu = 0; mu < 4; ++mu) {
        const double w = A[s][static_cast<std::size_t>(mu)];
        if (w != 0.0) al = al + w * bg.lambda[s][static_cast<std::size_t>(mu)];
      }
      if (transposed) al = transpose(al);
      const Spinplet cf = al * f[s];
      for (int a = 0; a < 4; ++a) b[static_cast<std::size_t>(a)] += q_half * cf[static_cast<std::size_t>(a)];
    }
    const Spinplet r = Mi[static_cast<std::size_t>(s)] * b;
    for (int a = 0; a < 4; ++a) out[s][static_cast<std::size_t>(a)] = -r[static_cast<std::size_t>(a)];
  });
  return out;
}

}  // namespace detail

// d_t psi = -M_t^{-1} [ C_j D_j psi + K psi - m psi - (q/2) A_mu lambda^mu psi ].
// The coupling coefficient is the exact variational one for the action term
// -q phi lambda^mu A_mu psi.
inline SpinpletField psi_rhs(const StateSlice& st, const Background& bg, const EvolutionParams& p) {
  return detail::bilinear_rhs(st.psi, st.A, bg, p, false, -1.0, -0.5 * p.q);
}

// phi evolves as psi with m -> -m, gamma -> gamma^T and the coupling sign
// flipped by the variation.
inline SpinpletField phi_rhs(const StateSlice& st, const Background& bg, const EvolutionParams& p) {
  return detail::bilinear_rhs(st.phi, st.A, bg, p, true, +1.0, +0.5 * p.q);
}

// Positron pair: identical to the electron pair with q -> -q.
inline std::pair<SpinpletField, SpinpletField> positron_rhs(const StateSlice& st,
                                                            const Background& bg,
                                                            const EvolutionParams& p) {
  return {detail::bilinear_rhs(st.psi_p, st.A, bg, p, false, -1.0, +0.5 * p.q),
          detail::bilinear_rhs(st.phi_p, st.A, bg, p, true, +1.0, -0.5 * p.q)};
}

// Flat-limit Maxwell acceleration in temporal gauge (A_0 is never evolved):
//   d_t^2 A_i = D_j D_j A_i - D_i (D_j A_j) + (q/8)(j_i^e - j_i^p),
// the exact variation of the F F term; the stencils are the composed first
// differences so the discrete action and this right-hand side agree.
inline CovectorField maxwell_acceleration(const StateSlice& st, const CurrentField& je,
                                          const CurrentField& jp, const Background& bg,
                                          const EvolutionParams& p) {
  if (!bg.flat_lambda)
    throw SimError("maxwell: EM evolution requires a flat lambda background");
  const Grid& g = bg.grid;

  std::array<CovectorField, 3> dA;
  for (int j = 1; j <= 3; ++j)
    if (g.axis_active(j - 1)) dA[static_cast<std::size_t>(j - 1)] = partial(st.A, j, p.fd_order);

  CovectorField lap(g);
  ScalarField div(g);
  for (int j = 1; j <= 3; ++j) {
    if (!g.axis_active(j - 1)) continue;
    const CovectorField d2 = partial(dA[static_cast<std::size_t>(j - 1)], j, p.fd_order);
    for (int s = 0; s < g.sites(); ++s) {
      for (int c = 0; c < 4; ++c) lap[s][static_cast<std::size_t>(c)] += d2[s][static_cast<std::size_t>(c)];
      div[s] += dA[static_cast<std::size_t>(j - 1)][s][static_cast<std::size_t>(j)];
    }
  }

  CovectorField acc(g);
  std::array<ScalarField, 3> graddiv;
  for (int j = 1; j <= 3; ++j)
    if (g.axis_active(j - 1)) graddiv[static_cast<std::size_t>(j - 1)] = partial(div, j, p.fd_order);
  const double w = p.coupling_em ? p.q / 8.0 : 0.0;
  for (int s = 0; s < g.sites(); ++s) {
    acc[s][0] = 0.0;
    for (int i = 1; i < 4; ++i) {
      double a = lap[s][static_cast<std::size_t>(i)];
      if (g.axis_active(i - 1)) a -= graddiv[static_cast<std::size_t>(i - 1)][s];
      a += w * (je[s][static_cast<std::size_t>(i)] - jp[s][static_cast<std::size_t>(i)]);
      acc[s][static_cast<std::size_t>(i)] = a;
    }
  }
  return acc;
}

namespace detail {

struct Deriv {
  SpinpletField psi, phi, psi_p, phi_p;
  CovectorField A, A_dot;
};

inline Deriv state_derivative(const StateSlice& st, const Background& bg, const EvolutionParams& p) {
  Deriv d;
  d.psi = psi_rhs(st, bg, p);
  d.phi = phi_rhs(st, bg, p);
  auto pos = positron_rhs(st, bg, p);
  d.psi_p = std::move(pos.first);
  d.phi_p = std::move(pos.second);
  if (bg.flat_lambda) {
    d.A = st.A_dot;
    if (p.coupling_em && p.q != 0.0) {
      const CurrentField je = current_field(st.psi, st.phi, st.gamma, bg.g_upper,
                                            std::numeric_limits<double>::infinity());
      const CurrentField jp = current_field(st.psi_p, st.phi_p, st.gamma, bg.g_upper,
                                            std::numeric_limits<double>::infinity());
      d.A_dot = maxwell_acceleration(st, je, jp, bg, p);
    } else {
      const CurrentField zero(bg.grid);
      d.A_dot = maxwell_acceleration(st, zero, zero, bg, p);
    }
  } else {
    // EM evolution exists only in the flat limit; on curved lambda
    // backgrounds A is carried as a prescribed external field.
    if (p.coupling_em && p.q != 0.0)
      throw SimError("EM-coupled evolution requires a flat lambda background");
    d.A = CovectorField(bg.grid);
    d.A_dot = CovectorField(bg.grid);
  }
  return d;
}

template <class FieldT>
void add_scaled(FieldT& y, double a, const FieldT& x) {
  for (std::size_t i = 0; i < y.v.size(); ++i) axpy(y.v[i], a, x.v[i]);
}

inline void advance(StateSlice& y, double a, const Deriv& d) {
  add_scaled(y.psi, a, d.psi);
  add_scaled(y.phi, a, d.phi);
  add_scaled(y.psi_p, a, d.psi_p);
  add_scaled(y.phi_p, a, d.phi_p);
  add_scaled(y.A, a, d.A);
  add_scaled(y.A_dot, a, d.A_dot);
}

}  // namespace detail

inline void check_stability_bound(const Background& bg, const EvolutionParams& p) {
  double min_dx = bg.grid.spacing[0];
  for (int a = 1; a < bg.grid.spatial_dims; ++a) min_dx = std::min(min_dx, bg.grid.spacing[a]);
  const double bound = 0.25 * min_dx / bg.max_char_speed;
  if (p.dt > bound)
    throw ConfigError("dt = " + std::to_string(p.dt) + " exceeds the stability bound " +
                      std::to_string(bound));
}

// Classical fourth-order explicit step of all dynamic fields; the prescribed
// background is carried unchanged. Throws StepRejected on non-finite output.
inline StateSlice step_rk4(const StateSlice& st, const Background& bg, const EvolutionParams& p) {
  check_stability_bound(bg, p);
  const double dt = p.dt;

  const detail::Deriv k1 = detail::state_derivative(st, bg, p);
  StateSlice y2 = st;
  detail::advance(y2, 0.5 * dt, k1);
  const detail::Deriv k2 = detail::state_derivative(y2, bg, p);
  StateSlice y3 = st;
  detail::advance(y3, 0.5 * dt, k2);
  const detail::Deriv k3 = detail::state_derivative(y3, bg, p);
  StateSlice y4 = st;
  detail::advance(y4, dt, k3);
  const detail::Deriv k4 = detail::state_derivative(y4, bg, p);

  StateSlice out = st;
  detail::advance(out, dt / 6.0, k1);
  detail::advance(out, dt / 3.0, k2);
  detail::advance(out, dt / 3.0, k3);
  detail::advance(out, dt / 6.0, k4);
  out.time = st.time + dt;

  for (int s = 0; s < bg.grid.sites(); ++s) {
    if (!finite(out.psi[s]) || !finite(out.phi[s]) || !finite(out.psi_p[s]) ||
        !finite(out.phi_p[s]) || !finite(out.A[s]) || !finite(out.A_dot[s]))
      throw StepRejected("non-finite field value at site " + std::to_string(s) + ", t = " +
                         std::to_string(out.time));
  }
  return out;
}

// On-shell stress tensor: time derivatives substituted from the equations of
// motion of the prescribed-background system.
inline Sym4Field stress_energy(const StateSlice& st, const Background& bg,
                               const EvolutionParams& p, double tol_imag = tol::imag) {
  const SpinpletField dpsi = psi_rhs(st, bg, p);
  const SpinpletField dphi = phi_rhs(st, bg, p);
  auto pos = positron_rhs(st, bg, p);
  return stress_energy_with(st, dpsi, dphi, pos.first, pos.second, p.fd_order, tol_imag);
}

}  // namespace protograv
