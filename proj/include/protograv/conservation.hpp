#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "protograv/fields.hpp"
#include "protograv/finite_difference.hpp"
#include "protograv/geometry.hpp"
#include "protograv/numerics.hpp"

namespace protograv {

// ---------------------------------------------------------------------------
// Currents and stress-energy. These take whatever time derivatives they need
// explicitly so they stay independent of the evolution code; on-shell
// conveniences that substitute the equations of motion live in dynamics.hpp.
// ---------------------------------------------------------------------------

// j^nu = 2 g^{mu nu} Re[ phi gamma_mu psi ] per site. Real on admissible
// states; the imaginary residue is checked against tol (pass +inf to skip,
// e.g. when sourcing the EM field during off-shell probes).
inline CurrentField current_field(const SpinpletField& psi, const SpinpletField& phi,
                                  const VectorpletField& gamma, const MetricField& g_upper,
                                  double tol_imag = tol::imag) {
  CurrentField out(psi.grid);
  for (int s = 0; s < psi.sites(); ++s) {
    // b_mu = phi gamma_mu psi
    std::array<cplx, 4> b{};
    for (int mu = 0; mu < 4; ++mu) {
      cplx acc = 0.0;
      const Mat4c& gm = gamma[s][static_cast<std::size_t>(mu)];
      for (int a = 0; a < 4; ++a)
        for (int c = 0; c < 4; ++c) acc += phi[s][static_cast<std::size_t>(a)] * gm(a, c) * psi[s][static_cast<std::size_t>(c)];
      b[static_cast<std::size_t>(mu)] = acc;
    }
    for (int nu = 0; nu < 4; ++nu) {
      cplx j = 0.0;
      for (int mu = 0; mu < 4; ++mu) j += at(g_upper[s], mu, nu) * b[static_cast<std::size_t>(mu)];
      j *= 2.0;
      if (std::abs(j.imag()) > tol_imag)
        throw ImaginaryResidue("current: imaginary residue " + std::to_string(j.imag()) +
                               " at site " + std::to_string(s));
      out[s][static_cast<std::size_t>(nu)] = j.real();
    }
  }
  return out;
}

struct CurrentPair {
  CurrentField electron;
  CurrentField positron;
};

inline CurrentPair current_fields(const StateSlice& st, const MetricField& g_upper,
                                  double tol_imag = tol::imag) {
  return {current_field(st.psi, st.phi, st.gamma, g_upper, tol_imag),
          current_field(st.psi_p, st.phi_p, st.gamma, g_upper, tol_imag)};
}

// On-shell reduced stress tensor (the trace term is dropped):
//   T_{mu nu} = Re[ -i (phi g_(mu D_nu) psi - (D_(mu phi) g_nu) psi) ] * 2,
// symmetrised with weight 1/2; electron and positron pairs summed. The sign
// makes T^{00} positive for positive-energy waves and matches the metric
// variation of the action. Time derivatives of the four spinplet fields are
// supplied by the caller.
inline Sym4Field stress_energy_with(const StateSlice& st, const SpinpletField& dpsi,
                                    const SpinpletField& dphi, const SpinpletField& dpsi_p,
                                    const SpinpletField& dphi_p, int fd_order,
                                    double tol_imag = tol::imag) {
  const Grid& g = st.psi.grid;
  Sym4Field out(g);

  auto accumulate = [&](const SpinpletField& psi, const SpinpletField& phi,
                        const SpinpletField& dtpsi, const SpinpletField& dtphi) {
    // derivative stacks: index 0 is the supplied time derivative
    std::array<SpinpletField, 4> dpsi_ax, dphi_ax;
    dpsi_ax[0] = dtpsi;
    dphi_ax[0] = dtphi;
    for (int a = 1; a < 4; ++a) {
      dpsi_ax[a] = partial(psi, a, fd_order);
      dphi_ax[a] = partial(phi, a, fd_order);
    }
    for (int s = 0; s < g.sites(); ++s) {
      // z[mu][nu] = phi gamma_mu (d_nu psi), y[mu][nu] = (d_mu phi) gamma_nu psi
      cplx z[4][4], y[4][4];
      for (int mu = 0; mu < 4; ++mu) {
        const Mat4c& gm = st.gamma[s][static_cast<std::size_t>(mu)];
        for (int nu = 0; nu < 4; ++nu) {
          cplx az = 0.0, ay = 0.0;
          for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 4; ++c) {
              az += phi[s][static_cast<std::size_t>(a)] * gm(a, c) * dpsi_ax[nu][s][static_cast<std::size_t>(c)];
              ay += dphi_ax[nu][s][static_cast<std::size_t>(a)] * gm(a, c) * psi[s][static_cast<std::size_t>(c)];
            }
          z[mu][nu] = az;
          y[nu][mu] = ay;  // y[mu][nu] = (d_mu phi) gamma_nu psi
        }
      }
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = mu; nu < 4; ++nu) {
          const cplx t = cplx(0.0, -1.0) * (z[mu][nu] + z[nu][mu] - y[mu][nu] - y[nu][mu]);
          if (std::abs(t.imag()) > tol_imag)
            throw ImaginaryResidue("stress_energy: imaginary residue " + std::to_string(t.imag()) +
                                   " at site " + std::to_string(s));
          at(out[s], mu, nu) += t.real();
          at(out[s], nu, mu) = at(out[s], mu, nu);
        }
    }
  };

  accumulate(st.psi, st.phi, dpsi, dphi);
  accumulate(st.psi_p, st.phi_p, dpsi_p, dphi_p);
  return out;
}

// ---------------------------------------------------------------------------
// Global charges from the ten flat-background Killing vectors. Exact
// symmetries only on flat backgrounds; elsewhere the drift is reported, not
// asserted. Index raising uses eta (flat split).
// ---------------------------------------------------------------------------

struct GlobalCharges {
  Vec4d P{};                    // energy-momentum
  std::array<double, 3> J{};    // angular momentum
  std::array<double, 3> C{};    // boost moments int x_i T'^{00}
};

// The reported boost charge C^i is the energy moment int x_i T'^{00} d^3x;
// it completes to the conserved Killing charge as C^i - t P^i, so the audited
// identity on flat backgrounds is dC^i/dt = P^i.
inline GlobalCharges global_charges(const Sym4Field& T_lower) {
  const Grid& g = T_lower.grid;
  const double vol = g.cell_volume();
  const int ns = g.sites();

  // T'^{mu nu} = eta-raised components needed: rows mu = 0 and the T^{00} column
  std::vector<double> acc(static_cast<std::size_t>(ns));
  GlobalCharges out;

  auto raised = [&](int s, int mu, int nu) {
    return eta_diag(mu) * eta_diag(nu) * at(T_lower[s], mu, nu);
  };

  for (int nu = 0; nu < 4; ++nu) {
    for (int s = 0; s < ns; ++s) acc[static_cast<std::size_t>(s)] = raised(s, 0, nu);
    out.P[static_cast<std::size_t>(nu)] = pairwise_sum(acc) * vol;
  }
  // J^i = eps_{ijk} int x_j T'^{0k}
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    for (int s = 0; s < ns; ++s) {
      const auto x = g.position(s);
      acc[static_cast<std::size_t>(s)] = x[static_cast<std::size_t>(j)] * raised(s, 0, k + 1) -
                                         x[static_cast<std::size_t>(k)] * raised(s, 0, j + 1);
    }
    out.J[static_cast<std::size_t>(i)] = pairwise_sum(acc) * vol;
  }
  for (int i = 0; i < 3; ++i) {
    for (int s = 0; s < ns; ++s) {
      const auto x = g.position(s);
      acc[static_cast<std::size_t>(s)] = x[static_cast<std::size_t>(i)] * raised(s, 0, 0);
    }
    out.C[static_cast<std::size_t>(i)] = pairwise_sum(acc) * vol;
  }
  return out;
}

inline double total_charge(const CurrentField& j) {
  std::vector<double> acc(static_cast<std::size_t>(j.sites()));
  for (int s = 0; s < j.sites(); ++s) acc[static_cast<std::size_t>(s)] = j[s][0];
  return pairwise_sum(acc) * j.grid.cell_volume();
}

// ---------------------------------------------------------------------------
// Local divergence audits across >= 3 consecutive slices (central time
// stencil at the middle slice).
// ---------------------------------------------------------------------------

struct DivergenceReport {
  double max_norm = 0.0;
  double l2_norm = 0.0;
};

// Covariant divergence of the current: D_nu j^nu + G^nu_{nu s} j^s.
inline DivergenceReport current_divergence(const CurrentField& jm, const CurrentField& j0,
                                           const CurrentField& jp, double dt_slices,
                                           const ConnectionField& conn, int fd_order) {
  const Grid& g = j0.grid;
  if (!(jm.grid == g) || !(jp.grid == g)) throw SimError("current_divergence: grids differ");
  std::array<CurrentField, 4> dj;
  dj[0] = CurrentField(g);
  for (int s = 0; s < g.sites(); ++s)
    for (int nu = 0; nu < 4; ++nu)
      dj[0][s][static_cast<std::size_t>(nu)] =
          (jp[s][static_cast<std::size_t>(nu)] - jm[s][static_cast<std::size_t>(nu)]) / (2.0 * dt_slices);
  for (int a = 1; a < 4; ++a) dj[a] = partial(j0, a, fd_order);

  DivergenceReport rep;
  std::vector<double> sq(static_cast<std::size_t>(g.sites()));
  for (int s = 0; s < g.sites(); ++s) {
    double d = 0.0;
    for (int nu = 0; nu < 4; ++nu) d += dj[nu][s][static_cast<std::size_t>(nu)];
    for (int sg = 0; sg < 4; ++sg) {
      double tr = 0.0;
      for (int nu = 0; nu < 4; ++nu) tr += conn.coef(s, nu, nu, sg);
      d += tr * j0[s][static_cast<std::size_t>(sg)];
    }
    rep.max_norm = std::max(rep.max_norm, std::abs(d));
    sq[static_cast<std::size_t>(s)] = d * d;
  }
  rep.l2_norm = std::sqrt(pairwise_sum(sq) * g.cell_volume());
  return rep;
}

// Covariant divergence of the stress tensor. The lower-index fields are
// raised per slice with the supplied contravariant metric before forming
// D_mu T^{mu nu} + G^mu_{mu s} T^{s nu} + G^nu_{mu s} T^{mu s}.
inline DivergenceReport stress_divergence(const Sym4Field& Tm, const Sym4Field& T0,
                                          const Sym4Field& Tp, double dt_slices,
                                          const MetricField& g_upper, const ConnectionField& conn,
                                          int fd_order) {
  const Grid& g = T0.grid;
  if (!(Tm.grid == g) || !(Tp.grid == g)) throw SimError("stress_divergence: grids differ");
  auto raise = [&](const Sym4Field& t) {
    Sym4Field r(g);
    for (int s = 0; s < g.sites(); ++s)
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu) {
          double acc = 0.0;
          for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
              acc += at(g_upper[s], mu, a) * at(g_upper[s], nu, b) * at(t[s], a, b);
          at(r[s], mu, nu) = acc;
        }
    return r;
  };
  const Sym4Field Um = raise(Tm), U0 = raise(T0), Up = raise(Tp);

  std::array<Sym4Field, 4> dU;
  dU[0] = Sym4Field(g);
  for (int s = 0; s < g.sites(); ++s)
    for (int i = 0; i < 16; ++i)
      dU[0][s][static_cast<std::size_t>(i)] =
          (Up[s][static_cast<std::size_t>(i)] - Um[s][static_cast<std::size_t>(i)]) / (2.0 * dt_slices);
  for (int a = 1; a < 4; ++a) dU[a] = partial(U0, a, fd_order);

  DivergenceReport rep;
  std::vector<double> sq(static_cast<std::size_t>(g.sites()), 0.0);
  for (int s = 0; s < g.sites(); ++s) {
    double norm2 = 0.0;
    for (int nu = 0; nu < 4; ++nu) {
      double d = 0.0;
      for (int mu = 0; mu < 4; ++mu) d += at(dU[mu][s], mu, nu);
      for (int mu = 0; mu < 4; ++mu)
        for (int sg = 0; sg < 4; ++sg) {
          d += conn.coef(s, mu, mu, sg) * at(U0[s], sg, nu);
          d += conn.coef(s, nu, mu, sg) * at(U0[s], mu, sg);
        }
      rep.max_norm = std::max(rep.max_norm, std::abs(d));
      norm2 += d * d;
    }
    sq[static_cast<std::size_t>(s)] = norm2;
  }
  rep.l2_norm = std::sqrt(pairwise_sum(sq) * g.cell_volume());
  return rep;
}

}  // namespace protograv
