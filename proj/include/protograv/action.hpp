#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "protograv/dynamics.hpp"
#include "protograv/fields.hpp"
#include "protograv/finite_difference.hpp"
#include "protograv/geometry.hpp"

namespace protograv {

struct ActionParams {
  double m = 0.0;
  double q = 0.0;
  double M = 1e3;       // Higgs-like coupling mass scale
  double kappa = 0.0;   // 8 pi G
  double epsilon = 1e-3;  // dual-field term coefficient
  int fd_order = 2;
};

struct ActionBreakdown {
  double lambda_g = 0.0;
  double lambda_lambda = 0.0;
  double lambda_A = 0.0;
  double lambda_e = 0.0;
  double lambda_p = 0.0;
  double lambda_eA = 0.0;
  double lambda_pA = 0.0;
  double lambda_c = 0.0;
  double total = 0.0;
};

// Time derivatives of the dynamic fields entering one slice's density; the
// background is static, so no gamma/lambda derivatives appear here.
struct TimeDerivs {
  SpinpletField dpsi, dphi, dpsi_p, dphi_p;
  CovectorField dA;
};

inline TimeDerivs zero_time_derivs(const Grid& g) {
  return {SpinpletField(g), SpinpletField(g), SpinpletField(g), SpinpletField(g), CovectorField(g)};
}

// On-shell time derivatives substituted from the evolution equations.
inline TimeDerivs onshell_time_derivs(const StateSlice& st, const Background& bg,
                                      const EvolutionParams& p) {
  TimeDerivs td;
  td.dpsi = psi_rhs(st, bg, p);
  td.dphi = phi_rhs(st, bg, p);
  auto pos = positron_rhs(st, bg, p);
  td.dpsi_p = std::move(pos.first);
  td.dphi_p = std::move(pos.second);
  td.dA = st.A_dot;
  return td;
}

namespace detail {

// Everything per-site the density terms need, recomputed from the slice's own
// background fields so finite-difference probes of lambda stay honest.
struct ActionGeometry {
  MetricField g_lower, g_upper;
  ScalarField measure;
  ScalarField ricci;
  Lattice<std::array<Mat4c, 4>> lambda_tilde;  // g_{mu nu}(gamma) lambda^nu
};

// The action is defined through the real part of the trace form, so metric
// extraction here skips the admissibility gate: finite-difference probe
// directions need not preserve a real metric.
inline ActionGeometry action_geometry(const StateSlice& st, int fd_order) {
  ActionGeometry ag;
  const double lenient = std::numeric_limits<double>::infinity();
  ag.g_lower = metric_field_from(st.gamma, lenient);
  ag.g_upper = metric_field_from(st.lambda, lenient);
  ag.measure = measure_factor(ag.g_upper);
  ag.ricci = ricci_scalar(christoffel(ag.g_lower, ag.g_upper, fd_order), ag.g_upper, fd_order);
  ag.lambda_tilde = Lattice<std::array<Mat4c, 4>>(st.psi.grid);
  for (int s = 0; s < st.psi.sites(); ++s)
    for (int mu = 0; mu < 4; ++mu) {
      Mat4c acc;
      for (int nu = 0; nu < 4; ++nu) {
        const double w = at(ag.g_lower[s], mu, nu);
        if (w != 0.0) acc = acc + w * st.lambda[s][static_cast<std::size_t>(nu)];
      }
      ag.lambda_tilde[s][static_cast<std::size_t>(mu)] = acc;
    }
  return ag;
}

inline cplx bilinear(const Spinplet& phi, const Mat4c& m, const Spinplet& psi) {
  cplx acc = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) acc += phi[static_cast<std::size_t>(a)] * m(a, b) * psi[static_cast<std::size_t>(b)];
  return acc;
}

inline cplx dot(const Spinplet& phi, const Spinplet& psi) {
  cplx acc = 0.0;
  for (int a = 0; a < 4; ++a) acc += phi[static_cast<std::size_t>(a)] * psi[static_cast<std::size_t>(a)];
  return acc;
}

}  // namespace detail

// Per-site action density, all eight terms. Complex parts of the bilinear
// matter terms are dropped (the action is the real part); imaginary content
// is legitimate for off-shell probe states.
inline Lattice<ActionBreakdown> action_density(const StateSlice& st, const ActionParams& p,
                                               const TimeDerivs& td) {
  const Grid& g = st.psi.grid;
  const detail::ActionGeometry ag = detail::action_geometry(st, p.fd_order);

  // spatial derivative stacks
  std::array<SpinpletField, 4> dpsi, dphi, dpsi_p, dphi_p;
  std::array<CovectorField, 4> dA;
  std::array<Lattice<std::array<Mat4c, 4>>, 4> dlt;
  dpsi[0] = td.dpsi;
  dphi[0] = td.dphi;
  dpsi_p[0] = td.dpsi_p;
  dphi_p[0] = td.dphi_p;
  dA[0] = td.dA;
  dlt[0] = Lattice<std::array<Mat4c, 4>>(g);  // static background
  for (int a = 1; a < 4; ++a) {
    dpsi[a] = partial(st.psi, a, p.fd_order);
    dphi[a] = partial(st.phi, a, p.fd_order);
    dpsi_p[a] = partial(st.psi_p, a, p.fd_order);
    dphi_p[a] = partial(st.phi_p, a, p.fd_order);
    dA[a] = partial(st.A, a, p.fd_order);
    dlt[a] = partial(ag.lambda_tilde, a, p.fd_order);
  }

  Lattice<ActionBreakdown> out(g);
  for (int s = 0; s < g.sites(); ++s) {
    const double W = ag.measure[s];
    ActionBreakdown& b = out[s];

    auto matter = [&](const SpinpletField& psi, const SpinpletField& phi,
                      const std::array<SpinpletField, 4>& dps,
                      const std::array<SpinpletField, 4>& dph) {
      cplx kin = 0.0;
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu) {
          const double w = at(ag.g_upper[s], mu, nu);
          if (w == 0.0) continue;
          kin += w * (detail::bilinear(phi[s], st.gamma[s][static_cast<std::size_t>(mu)], dps[nu][s]) -
                      detail::bilinear(dph[mu][s], st.gamma[s][static_cast<std::size_t>(nu)], psi[s]));
        }
      const cplx L = cplx(0.0, 1.0) * kin - 2.0 * p.m * detail::dot(phi[s], psi[s]);
      return (L * W).real();
    };
    b.lambda_e = matter(st.psi, st.phi, dpsi, dphi);
    b.lambda_p = matter(st.psi_p, st.phi_p, dpsi_p, dphi_p);

    // minimal couplings, no measure factor
    cplx ce = 0.0, cp = 0.0;
    for (int mu = 0; mu < 4; ++mu) {
      const double a = st.A[s][static_cast<std::size_t>(mu)];
      if (a == 0.0) continue;
      ce += a * detail::bilinear(st.phi[s], st.lambda[s][static_cast<std::size_t>(mu)], st.psi[s]);
      cp += a * detail::bilinear(st.phi_p[s], st.lambda[s][static_cast<std::size_t>(mu)], st.psi_p[s]);
    }
    b.lambda_eA = (-p.q * ce).real();
    b.lambda_pA = (p.q * cp).real();

    // curvature term
    b.lambda_g = p.kappa > 0.0 ? ag.ricci[s] * W / (2.0 * p.kappa) : 0.0;

    // EM field strength term g^{ma} g^{nb} F_{mn} F_{ab} W
    double F[4][4] = {};
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu)
        F[mu][nu] = dA[mu][s][static_cast<std::size_t>(nu)] - dA[nu][s][static_cast<std::size_t>(mu)];
    double fa = 0.0;
    for (int mu = 0; mu < 4; ++mu)
      for (int al = 0; al < 4; ++al) {
        const double gma = at(ag.g_upper[s], mu, al);
        if (gma == 0.0) continue;
        for (int nu = 0; nu < 4; ++nu)
          for (int be = 0; be < 4; ++be) {
            const double gnb = at(ag.g_upper[s], nu, be);
            if (gnb != 0.0) fa += gma * gnb * F[mu][nu] * F[al][be];
          }
      }
    b.lambda_A = fa * W;

    // dual-field term eps g^{ma} g^{nb} Re Tr(Ft_{mn} Ft_{ab}) W
    double fl = 0.0;
    {
      std::array<std::array<Mat4c, 4>, 4> Ft;
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = mu + 1; nu < 4; ++nu) {
          Ft[static_cast<std::size_t>(mu)][static_cast<std::size_t>(nu)] =
              dlt[mu][s][static_cast<std::size_t>(nu)] - dlt[nu][s][static_cast<std::size_t>(mu)];
          Ft[static_cast<std::size_t>(nu)][static_cast<std::size_t>(mu)] =
              -1.0 * Ft[static_cast<std::size_t>(mu)][static_cast<std::size_t>(nu)];
        }
      for (int mu = 0; mu < 4; ++mu)
        for (int al = 0; al < 4; ++al) {
          const double gma = at(ag.g_upper[s], mu, al);
          if (gma == 0.0) continue;
          for (int nu = 0; nu < 4; ++nu)
            for (int be = 0; be < 4; ++be) {
              const double gnb = at(ag.g_upper[s], nu, be);
              if (gnb == 0.0) continue;
              fl += gma * gnb *
                    trace(Ft[static_cast<std::size_t>(mu)][static_cast<std::size_t>(nu)] *
                          Ft[static_cast<std::size_t>(al)][static_cast<std::size_t>(be)])
                        .real();
            }
        }
    }
    b.lambda_lambda = p.epsilon * fl * W;

    // Higgs-like coupling, no measure factor
    double hc = 0.0;
    for (int mu = 0; mu < 4; ++mu)
      for (int rho = 0; rho < 4; ++rho) {
        double c = (mu == rho) ? -1.0 : 0.0;
        for (int nu = 0; nu < 4; ++nu) c += at(ag.g_lower[s], mu, nu) * at(ag.g_upper[s], nu, rho);
        hc += c * c;
      }
    b.lambda_c = p.M * hc;

    b.total = b.lambda_g + b.lambda_lambda + b.lambda_A + b.lambda_e + b.lambda_p + b.lambda_eA +
              b.lambda_pA + b.lambda_c;
  }
  return out;
}

// Spatial integral of each term over one slice.
inline ActionBreakdown action_breakdown(const StateSlice& st, const ActionParams& p,
                                        const TimeDerivs& td) {
  const Lattice<ActionBreakdown> d = action_density(st, p, td);
  const double vol = st.psi.grid.cell_volume();
  const int ns = st.psi.sites();
  std::vector<double> acc(static_cast<std::size_t>(ns));
  ActionBreakdown total;
  auto integrate = [&](double ActionBreakdown::*term) {
    for (int s = 0; s < ns; ++s) acc[static_cast<std::size_t>(s)] = d[s].*term;
    return pairwise_sum(acc) * vol;
  };
  total.lambda_g = integrate(&ActionBreakdown::lambda_g);
  total.lambda_lambda = integrate(&ActionBreakdown::lambda_lambda);
  total.lambda_A = integrate(&ActionBreakdown::lambda_A);
  total.lambda_e = integrate(&ActionBreakdown::lambda_e);
  total.lambda_p = integrate(&ActionBreakdown::lambda_p);
  total.lambda_eA = integrate(&ActionBreakdown::lambda_eA);
  total.lambda_pA = integrate(&ActionBreakdown::lambda_pA);
  total.lambda_c = integrate(&ActionBreakdown::lambda_c);
  total.total = total.lambda_g + total.lambda_lambda + total.lambda_A + total.lambda_e +
                total.lambda_p + total.lambda_eA + total.lambda_pA + total.lambda_c;
  return total;
}

// ---------------------------------------------------------------------------
// Discrete spacetime action over a short stack of slices and its functional
// derivatives. Time derivatives inside the stack are central differences
// between neighbouring slices, so the discrete Euler-Lagrange equations of
// the stack are exactly the coded evolution residuals on a flat background.
// ---------------------------------------------------------------------------

struct SliceStack {
  std::vector<StateSlice> slices;  // odd count >= 5, uniform spacing dt
  double dt = 0.0;

  int center() const { return static_cast<int>(slices.size()) / 2; }
};

namespace detail {

inline TimeDerivs stack_time_derivs(const SliceStack& stk, int i) {
  const StateSlice& pm = stk.slices[static_cast<std::size_t>(i - 1)];
  const StateSlice& pp = stk.slices[static_cast<std::size_t>(i + 1)];
  const Grid& g = pm.psi.grid;
  TimeDerivs td = zero_time_derivs(g);
  const double w = 1.0 / (2.0 * stk.dt);
  for (int s = 0; s < g.sites(); ++s) {
    for (int a = 0; a < 4; ++a) {
      td.dpsi[s][static_cast<std::size_t>(a)] = w * (pp.psi[s][static_cast<std::size_t>(a)] - pm.psi[s][static_cast<std::size_t>(a)]);
      td.dphi[s][static_cast<std::size_t>(a)] = w * (pp.phi[s][static_cast<std::size_t>(a)] - pm.phi[s][static_cast<std::size_t>(a)]);
      td.dpsi_p[s][static_cast<std::size_t>(a)] = w * (pp.psi_p[s][static_cast<std::size_t>(a)] - pm.psi_p[s][static_cast<std::size_t>(a)]);
      td.dphi_p[s][static_cast<std::size_t>(a)] = w * (pp.phi_p[s][static_cast<std::size_t>(a)] - pm.phi_p[s][static_cast<std::size_t>(a)]);
      td.dA[s][static_cast<std::size_t>(a)] = w * (pp.A[s][static_cast<std::size_t>(a)] - pm.A[s][static_cast<std::size_t>(a)]);
    }
  }
  return td;
}

}  // namespace detail

// S = sum over interior slices of dt * integral(Lambda).
inline double stack_action(const SliceStack& stk, const ActionParams& p) {
  if (stk.slices.size() < 5 || stk.slices.size() % 2 == 0)
    throw SimError("stack_action: need an odd stack of at least 5 slices");
  double total = 0.0;
  for (int i = 1; i + 1 < static_cast<int>(stk.slices.size()); ++i) {
    const TimeDerivs td = detail::stack_time_derivs(stk, i);
    total += stk.dt * action_breakdown(stk.slices[static_cast<std::size_t>(i)], p, td).total;
  }
  return total;
}

enum class VariationTarget { psi, phi, A, lambda };

namespace detail {

inline EvolutionParams to_evolution(const ActionParams& p, double dt) {
  EvolutionParams ep;
  ep.m = p.m;
  ep.q = p.q;
  ep.dt = dt;
  ep.fd_order = p.fd_order;
  ep.coupling_em = true;
  return ep;
}

inline void require_flat_geometry(const Background& bg) {
  for (int s = 0; s < bg.grid.sites(); ++s)
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu) {
        const double e = (mu == nu) ? eta_diag(mu) : 0.0;
        if (std::abs(at(bg.g_lower[s], mu, nu) - e) > 1e-12 ||
            std::abs(at(bg.g_upper[s], mu, nu) - e) > 1e-12)
          throw SimError("variational probes require a flat background geometry");
      }
}

}  // namespace detail

// Coded equation-of-motion residuals of the stack's centre slice, expressed
// through the same evolution functions the integrator uses:
// r = M_t (D_t f - rhs(f)).
inline SpinpletField eom_residual_psi(const SliceStack& stk, const Background& bg,
                                      const ActionParams& p) {
  const int c = stk.center();
  const StateSlice& st = stk.slices[static_cast<std::size_t>(c)];
  const TimeDerivs td = detail::stack_time_derivs(stk, c);
  const SpinpletField rhs = psi_rhs(st, bg, detail::to_evolution(p, stk.dt));
  SpinpletField r(st.psi.grid);
  for (int s = 0; s < r.sites(); ++s) {
    Spinplet d;
    for (int a = 0; a < 4; ++a)
      d[static_cast<std::size_t>(a)] = td.dpsi[s][static_cast<std::size_t>(a)] - rhs[s][static_cast<std::size_t>(a)];
    r[s] = bg.Mt[static_cast<std::size_t>(s)] * d;
  }
  return r;
}

inline SpinpletField eom_residual_phi(const SliceStack& stk, const Background& bg,
                                      const ActionParams& p) {
  const int c = stk.center();
  const StateSlice& st = stk.slices[static_cast<std::size_t>(c)];
  const TimeDerivs td = detail::stack_time_derivs(stk, c);
  const SpinpletField rhs = phi_rhs(st, bg, detail::to_evolution(p, stk.dt));
  SpinpletField r(st.psi.grid);
  for (int s = 0; s < r.sites(); ++s) {
    Spinplet d;
    for (int a = 0; a < 4; ++a)
      d[static_cast<std::size_t>(a)] = td.dphi[s][static_cast<std::size_t>(a)] - rhs[s][static_cast<std::size_t>(a)];
    r[s] = transpose(bg.Mt[static_cast<std::size_t>(s)]) * d;
  }
  return r;
}

// Residual of the A equation at the centre slice, all four components:
//   r^nu = -4 D_mu F^{mu nu} - q Re[phi lambda^nu psi] + q Re[phi_p lambda^nu psi_p]
// with D_0 the slice-central difference (so the time part composes two
// central differences across the stack).
inline CovectorField eom_residual_A(const SliceStack& stk, const Background& bg,
                                    const ActionParams& p) {
  const int c = stk.center();
  const Grid& g = bg.grid;
  if (!bg.flat_lambda) throw SimError("eom_residual_A: flat lambda background required");

  // F^{0j}(slice) = -F_{0j} = -(D_t A_j - D_j A_0); F^{ij} = F_{ij}
  auto F_raised = [&](int i) {
    const StateSlice& st = stk.slices[static_cast<std::size_t>(i)];
    const TimeDerivs td = detail::stack_time_derivs(stk, i);
    std::array<CovectorField, 4> dA;
    dA[0] = td.dA;
    for (int a = 1; a < 4; ++a) dA[a] = partial(st.A, a, p.fd_order);
    Lattice<Mat4d> F(g);
    for (int s = 0; s < g.sites(); ++s)
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu)
          at(F[s], mu, nu) = eta_diag(mu) * eta_diag(nu) *
                             (dA[mu][s][static_cast<std::size_t>(nu)] - dA[nu][s][static_cast<std::size_t>(mu)]);
    return F;
  };

  const Lattice<Mat4d> Fm = F_raised(c - 1);
  const Lattice<Mat4d> F0 = F_raised(c);
  const Lattice<Mat4d> Fp = F_raised(c + 1);

  // spatial divergence of the centre slice, per column nu
  std::array<Lattice<Mat4d>, 4> dF;
  for (int a = 1; a < 4; ++a) dF[a] = partial(F0, a, p.fd_order);

  const StateSlice& st = stk.slices[static_cast<std::size_t>(c)];
  CovectorField r(g);
  for (int s = 0; s < g.sites(); ++s)
    for (int nu = 0; nu < 4; ++nu) {
      double div = (at(Fp[s], 0, nu) - at(Fm[s], 0, nu)) / (2.0 * stk.dt);
      for (int j = 1; j < 4; ++j) div += at(dF[j][s], j, nu);
      double src = 0.0;
      if (p.q != 0.0) {
        src -= p.q * detail::bilinear(st.phi[s], st.lambda[s][static_cast<std::size_t>(nu)], st.psi[s]).real();
        src += p.q * detail::bilinear(st.phi_p[s], st.lambda[s][static_cast<std::size_t>(nu)], st.psi_p[s]).real();
      }
      r[s][static_cast<std::size_t>(nu)] = -4.0 * div + src;
    }
  return r;
}

// ---------------------------------------------------------------------------
// Finite-difference functional derivatives at sampled probe points, compared
// against the coded residuals (psi, phi, A) or the stress-tensor contraction
// (lambda). Returns the relative discrepancy over all probed components.
// ---------------------------------------------------------------------------

struct VariationReport {
  double rel_error = 0.0;
  double fd_norm = 0.0;
  double analytic_norm = 0.0;
  int probes = 0;
};

inline VariationReport variational_residual(SliceStack& stk, const ActionParams& p,
                                            VariationTarget target, double h = 1e-5,
                                            int probe_sites = 32, unsigned long long seed = 2024) {
  if (h < 1e-7 || h > 1e-3) throw SimError("variational_residual: h out of [1e-7, 1e-3]");
  const int c = stk.center();
  StateSlice& mid = stk.slices[static_cast<std::size_t>(c)];
  const Grid& g = mid.psi.grid;
  const Background bg = make_background(mid.gamma, mid.lambda, p.fd_order);
  detail::require_flat_geometry(bg);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> site_pick(0, g.sites() - 1);
  std::uniform_int_distribution<int> comp4(0, 3);
  std::uniform_int_distribution<int> reim(0, 1);

  const double dv = stk.dt * g.cell_volume();

  std::vector<double> fd_vals, an_vals;

  auto fd_probe = [&](double* slot) {
    const double save = *slot;
    *slot = save + h;
    const double sp = stack_action(stk, p);
    *slot = save - h;
    const double sm = stack_action(stk, p);
    *slot = save;
    return (sp - sm) / (2.0 * h);
  };

  if (target == VariationTarget::psi || target == VariationTarget::phi) {
    // coefficient of d psi_b: -2 dv r_phi,b ; of d phi_a: +2 dv r_psi,a
    const SpinpletField r_phi = eom_residual_phi(stk, bg, p);
    const SpinpletField r_psi = eom_residual_psi(stk, bg, p);
    for (int n = 0; n < probe_sites; ++n) {
      const int s = site_pick(rng);
      const int a = comp4(rng);
      const bool re = reim(rng) == 0;
      cplx coef;
      double* slot;
      if (target == VariationTarget::psi) {
        coef = -2.0 * dv * r_phi[s][static_cast<std::size_t>(a)];
        slot = reinterpret_cast<double*>(&mid.psi[s][static_cast<std::size_t>(a)]);
      } else {
        coef = 2.0 * dv * r_psi[s][static_cast<std::size_t>(a)];
        slot = reinterpret_cast<double*>(&mid.phi[s][static_cast<std::size_t>(a)]);
      }
      if (!re) ++slot;
      fd_vals.push_back(fd_probe(slot));
      an_vals.push_back(re ? coef.real() : -coef.imag());
    }
  } else if (target == VariationTarget::A) {
    const CovectorField rA = eom_residual_A(stk, bg, p);
    for (int n = 0; n < probe_sites; ++n) {
      const int s = site_pick(rng);
      const int nu = comp4(rng);
      double* slot = &mid.A[s][static_cast<std::size_t>(nu)];
      fd_vals.push_back(fd_probe(slot));
      an_vals.push_back(dv * rA[s][static_cast<std::size_t>(nu)]);
    }
  } else {
    // lambda: chain rule through g^{mu nu}(lambda) plus the direct couplings.
    // X_{mu rho} = delta Lambda / delta g^{mu rho} accumulated over the
    // matter sector (-1/2 W T_full), the EM term and the Higgs term; the
    // curvature term's linearised variation integrates to zero on the flat
    // probe states required here.
    const int n_slices = static_cast<int>(stk.slices.size());
    std::vector<Sym4Field> X;
    std::vector<const StateSlice*> sl;
    for (int i = 1; i + 1 < n_slices; ++i) {
      const StateSlice& st = stk.slices[static_cast<std::size_t>(i)];
      const TimeDerivs td = detail::stack_time_derivs(stk, i);
      const detail::ActionGeometry ag = detail::action_geometry(st, p.fd_order);

      // matter: T_full = T_reduced + ghat_{mu nu} L_matter, ghat = (g^{..})^{-1}
      const Sym4Field Tred = stress_energy_with(st, td.dpsi, td.dphi, td.dpsi_p, td.dphi_p,
                                                p.fd_order, std::numeric_limits<double>::infinity());
      const Lattice<ActionBreakdown> dens = action_density(st, p, td);

      // EM term F-contraction pieces
      std::array<CovectorField, 4> dA;
      dA[0] = td.dA;
      for (int a = 1; a < 4; ++a) dA[a] = partial(st.A, a, p.fd_order);

      Sym4Field Xi(g);
      for (int s = 0; s < g.sites(); ++s) {
        const double W = ag.measure[s];
        const Mat4d ghat = mat4d_inverse(ag.g_upper[s]);
        const double Lmat = (dens[s].lambda_e + dens[s].lambda_p) / W;  // L_e + L_p before measure
        double F[4][4];
        for (int mu = 0; mu < 4; ++mu)
          for (int nu = 0; nu < 4; ++nu)
            F[mu][nu] = dA[mu][s][static_cast<std::size_t>(nu)] - dA[nu][s][static_cast<std::size_t>(mu)];
        double ff = 0.0;
        for (int mu = 0; mu < 4; ++mu)
          for (int al = 0; al < 4; ++al)
            for (int nu = 0; nu < 4; ++nu)
              for (int be = 0; be < 4; ++be)
                ff += at(ag.g_upper[s], mu, al) * at(ag.g_upper[s], nu, be) * F[mu][nu] * F[al][be];

        for (int mu = 0; mu < 4; ++mu)
          for (int rho = 0; rho < 4; ++rho) {
            const double Tfull = at(Tred[s], mu, rho) + at(ghat, mu, rho) * Lmat;
            double x = -0.5 * W * Tfull;
            // EM: 2 g^{nu beta} F_{mu nu} F_{rho beta} W + F.F d W/d g
            double em = 0.0;
            for (int nu = 0; nu < 4; ++nu)
              for (int be = 0; be < 4; ++be) em += at(ag.g_upper[s], nu, be) * F[mu][nu] * F[rho][be];
            x += W * (2.0 * em - 0.5 * at(ghat, mu, rho) * ff);
            // Higgs: 2 M sum_m (g_lo)_{m mu} C_m^rho, symmetrised below
            double hg = 0.0;
            for (int m2 = 0; m2 < 4; ++m2) {
              double cmr = (m2 == rho) ? -1.0 : 0.0;
              for (int nu = 0; nu < 4; ++nu) cmr += at(ag.g_lower[s], m2, nu) * at(ag.g_upper[s], nu, rho);
              hg += at(ag.g_lower[s], m2, mu) * cmr;
            }
            x += 2.0 * p.M * hg;
            at(Xi[s], mu, rho) = x;
          }
        // symmetrise
        for (int mu = 0; mu < 4; ++mu)
          for (int rho = mu + 1; rho < 4; ++rho) {
            const double sym = 0.5 * (at(Xi[s], mu, rho) + at(Xi[s], rho, mu));
            at(Xi[s], mu, rho) = sym;
            at(Xi[s], rho, mu) = sym;
          }
      }
      X.push_back(std::move(Xi));
      sl.push_back(&st);
    }

    for (int n = 0; n < probe_sites; ++n) {
      const int s = site_pick(rng);
      const int nu = comp4(rng);
      const int a = comp4(rng);
      const int b = comp4(rng);
      const bool re = reim(rng) == 0;

      // analytic coefficient of d lambda^nu_{ab}
      cplx coef = 0.0;
      for (std::size_t i = 0; i < X.size(); ++i) {
        cplx chain = 0.0;
        for (int rho = 0; rho < 4; ++rho)
          chain += at(X[i][s], nu, rho) * sl[i]->lambda[s][static_cast<std::size_t>(rho)](b, a);
        chain *= -0.5;
        cplx direct = 0.0;
        const double Anu = sl[i]->A[s][static_cast<std::size_t>(nu)];
        if (p.q != 0.0 && Anu != 0.0) {
          direct -= p.q * Anu * sl[i]->phi[s][static_cast<std::size_t>(a)] * sl[i]->psi[s][static_cast<std::size_t>(b)];
          direct += p.q * Anu * sl[i]->phi_p[s][static_cast<std::size_t>(a)] * sl[i]->psi_p[s][static_cast<std::size_t>(b)];
        }
        coef += dv * (chain + direct);
      }

      // perturb the static background entry in every slice simultaneously
      std::vector<double*> slots;
      for (auto& slice : stk.slices) {
        double* base = reinterpret_cast<double*>(&slice.lambda[s][static_cast<std::size_t>(nu)](a, b));
        slots.push_back(re ? base : base + 1);
      }
      const double save = *slots[0];
      for (double* q : slots) *q = save + h;
      const double sp = stack_action(stk, p);
      for (double* q : slots) *q = save - h;
      const double sm = stack_action(stk, p);
      for (double* q : slots) *q = save;
      fd_vals.push_back((sp - sm) / (2.0 * h));
      an_vals.push_back(re ? coef.real() : -coef.imag());
    }
  }

  VariationReport rep;
  rep.probes = static_cast<int>(fd_vals.size());
  double num = 0.0, den = 0.0, fdn = 0.0;
  for (std::size_t i = 0; i < fd_vals.size(); ++i) {
    num += (fd_vals[i] - an_vals[i]) * (fd_vals[i] - an_vals[i]);
    den += an_vals[i] * an_vals[i];
    fdn += fd_vals[i] * fd_vals[i];
  }
  rep.fd_norm = std::sqrt(fdn);
  rep.analytic_norm = std::sqrt(den);
  rep.rel_error = std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
  return rep;
}

}  // namespace protograv
