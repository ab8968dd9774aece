#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "protograv/conservation.hpp"
#include "protograv/dynamics.hpp"
#include "protograv/fields.hpp"

namespace protograv {

// ---------------------------------------------------------------------------
// Packet construction
// ---------------------------------------------------------------------------

struct PacketInit {
  SpinpletField psi, phi;
  double k = 0.0;  // realised wave number (snapped to a lattice mode)
};

// Positive-energy Gaussian packet, phi = g^0 psi^*. Built mode by mode over
// the periodic lattice spectrum: each wave number carries its own
// positive-energy spinor for the discrete momentum symbol, so the packet has
// no negative-energy admixture and its centroid moves without interference
// wobble. The carrier wave number is rounded to the nearest lattice mode.
inline PacketInit gaussian_packet(const Grid& g, double k0, double sigma, double m,
                                  double center = -1.0, int fd_order = 2) {
  for (int a = 0; a < g.spatial_dims; ++a) {
    if (sigma < 4.0 * g.spacing[a])
      throw PacketTooNarrow("sigma = " + std::to_string(sigma) + " < 4 spacing");
    if (sigma > g.box_length(a) / 8.0)
      throw PacketTooWide("sigma = " + std::to_string(sigma) + " > box/8");
  }
  const double L = g.box_length(0);
  const double dx = g.spacing[0];
  if (center < 0.0) center = 0.5 * L;
  constexpr double pi = std::numbers::pi;
  const int m0 = static_cast<int>(std::round(k0 * L / (2.0 * pi)));
  const double k = 2.0 * pi * m0 / L;

  auto symbol = [&](double kk) {
    if (fd_order == 2) return std::sin(kk * dx) / dx;
    return (8.0 * std::sin(kk * dx) - std::sin(2.0 * kk * dx)) / (6.0 * dx);
  };

  // modes within 10 sigma_k of the carrier, sigma_k = 1/sigma
  const int span = static_cast<int>(std::ceil(10.0 / sigma * L / (2.0 * pi))) + 1;
  std::vector<int> modes;
  std::vector<double> weight;
  std::vector<Spinplet> spinor;
  double wsum = 0.0;
  for (int dm = -span; dm <= span; ++dm) {
    const int mm = m0 + dm;
    if (2 * std::abs(mm) >= g.n[0]) continue;  // stay below Nyquist
    const double km = 2.0 * pi * mm / L;
    const double w = std::exp(-0.5 * (km - k) * (km - k) * sigma * sigma);
    if (w < 1e-18) continue;
    const double s_eff = symbol(km);
    const double E = std::sqrt(s_eff * s_eff + m * m);
    Spinplet u{};
    const double r = std::sqrt(E + m);
    u[0] = r / std::sqrt(2.0 * E);  // mode-independent density normalisation
    u[3] = s_eff / (r * std::sqrt(2.0 * E));
    modes.push_back(mm);
    weight.push_back(w);
    spinor.push_back(u);
    wsum += w;
  }
  if (modes.empty()) throw SimError("gaussian_packet: no lattice modes under the envelope");

  PacketInit out;
  out.k = k;
  out.psi = SpinpletField(g);
  out.phi = SpinpletField(g);
  const Mat4c g0 = dirac_representation().c[0];
  for (int s = 0; s < g.sites(); ++s) {
    const double x = g.position(s)[0];
    Spinplet acc{};
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const double km = 2.0 * pi * modes[i] / L;
      const cplx ph = (weight[i] / wsum) * std::exp(cplx(0.0, km * (x - center)));
      for (int a = 0; a < 4; ++a) acc[static_cast<std::size_t>(a)] += spinor[i][static_cast<std::size_t>(a)] * ph;
    }
    out.psi[s] = acc;
    Spinplet conj;
    for (int a = 0; a < 4; ++a) conj[static_cast<std::size_t>(a)] = std::conj(acc[static_cast<std::size_t>(a)]);
    out.phi[s] = g0 * conj;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Moment extraction
// ---------------------------------------------------------------------------

struct PacketMoments {
  Vec4d centroid{};   // (t, x, y, z); spatial entries are circular means in [0, L)
  Mat4d avg_T{};      // volume-averaged T^{mu nu} (indices raised with g(lambda))
  Vec4d avg_j{};      // volume-averaged current
  Vec4d v{};          // 4-velocity from the mu = 0 row, g v v = -1
  double m_density = 0.0;
  double alpha = 0.0;
};

namespace detail {

// periodic multilinear interpolation over active axes
template <class FieldT, class T>
T interp_periodic(const FieldT& f, const std::array<double, 3>& x) {
  const Grid& g = f.grid;
  int base[3] = {0, 0, 0};
  double w[3] = {0.0, 0.0, 0.0};
  for (int a = 0; a < 3; ++a) {
    if (!g.axis_active(a)) continue;
    const double u = x[static_cast<std::size_t>(a)] / g.spacing[a];
    const double fl = std::floor(u);
    base[a] = Grid::wrap(static_cast<int>(fl), g.n[a]);
    w[a] = u - fl;
  }
  T acc;
  set_zero(acc);
  const int na = g.spatial_dims;
  const int corners = 1 << na;
  for (int c = 0; c < corners; ++c) {
    int idx[3] = {base[0], base[1], base[2]};
    double weight = 1.0;
    for (int a = 0; a < na; ++a) {
      if (c & (1 << a)) {
        idx[a] = Grid::wrap(idx[a] + 1, g.n[a]);
        weight *= w[a];
      } else {
        weight *= 1.0 - w[a];
      }
    }
    axpy(acc, weight, f.v[static_cast<std::size_t>(g.index(idx[0], idx[1], idx[2]))]);
  }
  return acc;
}

}  // namespace detail

// Averages weighted by the conserved density j^0; v is extracted from the
// T^{0 nu} row and normalised with the metric interpolated at the centroid.
inline PacketMoments packet_moments(const StateSlice& st, const Background& bg,
                                    const EvolutionParams& p, double empty_tol = 1e-12) {
  const Grid& g = bg.grid;
  const CurrentField je = current_field(st.psi, st.phi, st.gamma, bg.g_upper);
  const Sym4Field T_lower = stress_energy(st, bg, p);

  const int ns = g.sites();
  std::vector<double> acc(static_cast<std::size_t>(ns));
  const double vol = g.cell_volume();
  const double V = vol * ns;

  for (int s = 0; s < ns; ++s) acc[static_cast<std::size_t>(s)] = je[s][0];
  const double qtot = pairwise_sum(acc) * vol;
  if (std::abs(qtot) < empty_tol) throw EmptyPacket("total j^0 below tolerance");

  PacketMoments mo;
  mo.centroid[0] = st.time;
  constexpr double pi = std::numbers::pi;
  for (int a = 0; a < g.spatial_dims; ++a) {
    // circular mean anchors the wrap; the linear mean of signed periodic
    // distances from the anchor is exact for any localized density and free
    // of the skewness bias of the circular mean itself
    double cs = 0.0, sn = 0.0;
    const double L = g.box_length(a);
    for (int s = 0; s < ns; ++s) {
      const double th = 2.0 * pi * g.position(s)[static_cast<std::size_t>(a)] / L;
      cs += je[s][0] * std::cos(th);
      sn += je[s][0] * std::sin(th);
    }
    const double anchor = std::atan2(sn, cs) * L / (2.0 * pi);
    double wd = 0.0, wt = 0.0;
    for (int s = 0; s < ns; ++s) {
      double d = g.position(s)[static_cast<std::size_t>(a)] - anchor;
      d -= L * std::round(d / L);  // signed distance in (-L/2, L/2]
      wd += je[s][0] * d;
      wt += je[s][0];
    }
    double c = anchor + wd / wt;
    c -= L * std::floor(c / L);  // report in [0, L)
    mo.centroid[static_cast<std::size_t>(a + 1)] = c;
  }

  for (int mu = 0; mu < 4; ++mu) {
    for (int s = 0; s < ns; ++s) acc[static_cast<std::size_t>(s)] = je[s][static_cast<std::size_t>(mu)];
    mo.avg_j[static_cast<std::size_t>(mu)] = pairwise_sum(acc) * vol / V;
    for (int nu = 0; nu < 4; ++nu) {
      for (int s = 0; s < ns; ++s) {
        double r = 0.0;
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b)
            r += at(bg.g_upper[s], mu, a) * at(bg.g_upper[s], nu, b) * at(T_lower[s], a, b);
        acc[static_cast<std::size_t>(s)] = r;
      }
      at(mo.avg_T, mu, nu) = pairwise_sum(acc) * vol / V;
    }
  }

  const std::array<double, 3> cpos = {mo.centroid[1], mo.centroid[2], mo.centroid[3]};
  const Mat4d gc = detail::interp_periodic<MetricField, Mat4d>(bg.g_lower, cpos);

  // v proportional to the T^{0 nu} row scaled by the conserved density
  Vec4d w{};
  for (int nu = 0; nu < 4; ++nu) w[static_cast<std::size_t>(nu)] = at(mo.avg_T, 0, nu) / mo.avg_j[0];
  double n2 = 0.0;
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu)
      n2 -= at(gc, mu, nu) * w[static_cast<std::size_t>(mu)] * w[static_cast<std::size_t>(nu)];
  if (n2 <= 0.0) throw SimError("packet_moments: T^{0 nu} row is not timelike");
  mo.alpha = std::sqrt(n2);
  for (int nu = 0; nu < 4; ++nu) mo.v[static_cast<std::size_t>(nu)] = w[static_cast<std::size_t>(nu)] / mo.alpha;

  double jj = 0.0;
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu)
      jj -= at(gc, mu, nu) * mo.avg_j[static_cast<std::size_t>(mu)] * mo.avg_j[static_cast<std::size_t>(nu)];
  mo.m_density = std::sqrt(std::max(jj, 0.0));
  return mo;
}

// ---------------------------------------------------------------------------
// Geodesic reference integration
// ---------------------------------------------------------------------------

struct GeodesicPoint {
  double tau = 0.0;
  Vec4d x{};  // unwrapped coordinates
  Vec4d u{};
};

// RK4 on dx/dtau = u, du/dtau = -G(x) u u with the connection interpolated
// multilinearly over the periodic box. Throws LeftDomain if the trajectory
// moves more than one box length from its start along any active axis.
inline std::vector<GeodesicPoint> geodesic_reference(const MetricField& g_lower,
                                                     const ConnectionField& conn, const Vec4d& x0,
                                                     const Vec4d& v0, int steps, double dtau) {
  const Grid& g = conn.grid;

  auto accel = [&](const Vec4d& x, const Vec4d& u, Vec4d& du) {
    const std::array<double, 3> pos = {x[1], x[2], x[3]};
    const std::array<double, 64> G =
        detail::interp_periodic<ConnectionField, std::array<double, 64>>(conn, pos);
    for (int a = 0; a < 4; ++a) {
      double s = 0.0;
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu)
          s -= G[static_cast<std::size_t>((a * 4 + mu) * 4 + nu)] * u[static_cast<std::size_t>(mu)] * u[static_cast<std::size_t>(nu)];
      du[static_cast<std::size_t>(a)] = s;
    }
  };

  std::vector<GeodesicPoint> traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  GeodesicPoint cur;
  cur.x = x0;
  cur.u = v0;
  traj.push_back(cur);

  for (int n = 0; n < steps; ++n) {
    Vec4d k1x = cur.u, k1u{};
    accel(cur.x, cur.u, k1u);
    Vec4d x2 = cur.x, u2 = cur.u;
    for (int i = 0; i < 4; ++i) {
      x2[static_cast<std::size_t>(i)] += 0.5 * dtau * k1x[static_cast<std::size_t>(i)];
      u2[static_cast<std::size_t>(i)] += 0.5 * dtau * k1u[static_cast<std::size_t>(i)];
    }
    Vec4d k2x = u2, k2u{};
    accel(x2, u2, k2u);
    Vec4d x3 = cur.x, u3 = cur.u;
    for (int i = 0; i < 4; ++i) {
      x3[static_cast<std::size_t>(i)] += 0.5 * dtau * k2x[static_cast<std::size_t>(i)];
      u3[static_cast<std::size_t>(i)] += 0.5 * dtau * k2u[static_cast<std::size_t>(i)];
    }
    Vec4d k3x = u3, k3u{};
    accel(x3, u3, k3u);
    Vec4d x4 = cur.x, u4 = cur.u;
    for (int i = 0; i < 4; ++i) {
      x4[static_cast<std::size_t>(i)] += dtau * k3x[static_cast<std::size_t>(i)];
      u4[static_cast<std::size_t>(i)] += dtau * k3u[static_cast<std::size_t>(i)];
    }
    Vec4d k4x = u4, k4u{};
    accel(x4, u4, k4u);

    GeodesicPoint next;
    next.tau = cur.tau + dtau;
    for (int i = 0; i < 4; ++i) {
      next.x[static_cast<std::size_t>(i)] =
          cur.x[static_cast<std::size_t>(i)] +
          dtau / 6.0 * (k1x[static_cast<std::size_t>(i)] + 2.0 * k2x[static_cast<std::size_t>(i)] +
                        2.0 * k3x[static_cast<std::size_t>(i)] + k4x[static_cast<std::size_t>(i)]);
      next.u[static_cast<std::size_t>(i)] =
          cur.u[static_cast<std::size_t>(i)] +
          dtau / 6.0 * (k1u[static_cast<std::size_t>(i)] + 2.0 * k2u[static_cast<std::size_t>(i)] +
                        2.0 * k3u[static_cast<std::size_t>(i)] + k4u[static_cast<std::size_t>(i)]);
    }
    for (int a = 0; a < g.spatial_dims; ++a)
      if (std::abs(next.x[static_cast<std::size_t>(a + 1)] - x0[static_cast<std::size_t>(a + 1)]) > g.box_length(a))
        throw LeftDomain("geodesic left the unwrapped box range at tau = " + std::to_string(next.tau));
    traj.push_back(next);
    cur = next;
  }
  (void)g_lower;
  return traj;
}

// g(x) u u along a trajectory point; used for norm-preservation audits.
inline double geodesic_norm(const MetricField& g_lower, const GeodesicPoint& pt) {
  const std::array<double, 3> pos = {pt.x[1], pt.x[2], pt.x[3]};
  const Mat4d gc = detail::interp_periodic<MetricField, Mat4d>(g_lower, pos);
  double n = 0.0;
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu)
      n += at(gc, mu, nu) * pt.u[static_cast<std::size_t>(mu)] * pt.u[static_cast<std::size_t>(nu)];
  return n;
}

// ---------------------------------------------------------------------------
// Trajectory comparison
// ---------------------------------------------------------------------------

struct TrackSample {
  double t = 0.0;
  Vec4d x{};  // unwrapped centroid
};

// Max spatial centroid deviation between the moment history and the geodesic,
// with the geodesic interpolated at the history's coordinate times.
inline double compare_trajectories(const std::vector<TrackSample>& history,
                                   const std::vector<GeodesicPoint>& traj) {
  if (history.empty() || traj.size() < 2) throw SimError("compare_trajectories: empty inputs");
  double worst = 0.0;
  std::size_t seg = 0;
  for (const TrackSample& h : history) {
    while (seg + 2 < traj.size() && traj[seg + 1].x[0] < h.t) ++seg;
    const GeodesicPoint& a = traj[seg];
    const GeodesicPoint& b = traj[seg + 1];
    if (h.t < a.x[0] - 1e-9 || h.t > b.x[0] + 1e-9)
      throw SimError("compare_trajectories: time sample outside geodesic range");
    const double w = (h.t - a.x[0]) / (b.x[0] - a.x[0]);
    for (int i = 1; i < 4; ++i) {
      const double gx = (1.0 - w) * a.x[static_cast<std::size_t>(i)] + w * b.x[static_cast<std::size_t>(i)];
      worst = std::max(worst, std::abs(h.x[static_cast<std::size_t>(i)] - gx));
    }
  }
  return worst;
}

// Unwrap a periodic centroid sequence into a continuous track.
inline std::vector<TrackSample> unwrap_track(const std::vector<TrackSample>& wrapped,
                                             const Grid& g) {
  std::vector<TrackSample> out = wrapped;
  for (std::size_t n = 1; n < out.size(); ++n)
    for (int a = 0; a < g.spatial_dims; ++a) {
      const double L = g.box_length(a);
      double& x = out[n].x[static_cast<std::size_t>(a + 1)];
      const double prev = out[n - 1].x[static_cast<std::size_t>(a + 1)];
      while (x - prev > 0.5 * L) x -= L;
      while (x - prev < -0.5 * L) x += L;
    }
  return out;
}

}  // namespace protograv
