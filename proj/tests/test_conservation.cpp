#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "protograv/dynamics.hpp"

using namespace protograv;

namespace {
constexpr double pi = std::numbers::pi;

struct WaveState {
  StateSlice st;
  Background bg;
  double E = 0.0, s_eff = 0.0, rho = 0.0;
};

WaveState flat_wave(int nx, double dx, double m, int mode, int order) {
  WaveState w;
  const Grid g = make_grid_1d(nx, dx, 0.05);
  w.st = make_flat_state(g);
  const double k = 2.0 * pi * mode / g.box_length(0);
  w.s_eff = oracles::diff_symbol(k, dx, order);
  w.E = std::sqrt(w.s_eff * w.s_eff + m * m);
  cplx u[4];
  oracles::plane_wave_spinor(w.s_eff, m, u);
  w.rho = 0.0;
  for (int a = 0; a < 4; ++a) w.rho += std::norm(u[a]);
  const Mat4c g0 = dirac_representation().c[0];
  for (int s = 0; s < g.sites(); ++s) {
    const cplx ph = std::exp(cplx(0.0, k * g.position(s)[0]));
    for (int a = 0; a < 4; ++a) w.st.psi[s][static_cast<std::size_t>(a)] = u[a] * ph;
    Spinplet conj;
    for (int a = 0; a < 4; ++a) conj[static_cast<std::size_t>(a)] = std::conj(w.st.psi[s][static_cast<std::size_t>(a)]);
    w.st.phi[s] = g0 * conj;
  }
  w.bg = make_background(w.st.gamma, w.st.lambda, order);
  return w;
}

void gaussian_test_state(const Grid& g, double m, double k0, double sigma, double center,
                         StateSlice& st) {
  cplx u[4];
  oracles::plane_wave_spinor(k0, m, u);
  const Mat4c g0 = dirac_representation().c[0];
  const double L = g.box_length(0);
  for (int s = 0; s < g.sites(); ++s) {
    const double x = g.position(s)[0];
    double env = 0.0;
    for (int img = -1; img <= 1; ++img) {
      const double d = x - center + img * L;
      env += std::exp(-d * d / (2.0 * sigma * sigma));
    }
    const cplx ph = env * std::exp(cplx(0.0, k0 * x));
    for (int a = 0; a < 4; ++a) st.psi[s][static_cast<std::size_t>(a)] = u[a] * ph;
    Spinplet conj;
    for (int a = 0; a < 4; ++a) conj[static_cast<std::size_t>(a)] = std::conj(st.psi[s][static_cast<std::size_t>(a)]);
    st.phi[s] = g0 * conj;
  }
}
}  // namespace

TEST_CASE("zero fields give zero stress tensor and current") {
  const Grid g = make_grid_1d(16, 0.5, 0.05);
  StateSlice st = make_flat_state(g);
  const Background bg = make_background(st.gamma, st.lambda, 2);
  EvolutionParams p;
  p.m = 0.2;
  p.dt = 0.05;
  const Sym4Field T = stress_energy(st, bg, p);
  for (int s = 0; s < g.sites(); ++s)
    for (double x : T[s]) REQUIRE(x == 0.0);
  const CurrentField j = current_field(st.psi, st.phi, st.gamma, bg.g_upper);
  for (int s = 0; s < g.sites(); ++s)
    for (double x : j[s]) REQUIRE(x == 0.0);
}

TEST_CASE("plane wave: closed-form stress tensor and current") {
  const WaveState w = flat_wave(128, 0.5, 0.2, 9, 2);
  EvolutionParams p;
  p.m = 0.2;
  p.dt = 0.05;
  const Sym4Field T = stress_energy(w.st, w.bg, p);
  const CurrentField j = current_field(w.st.psi, w.st.phi, w.st.gamma, w.bg.g_upper);

  // closed forms for u(s_eff): T_{00} = 4 E rho, T_{0x} = -4 s rho,
  // j^0 = 2 rho, j^x = 2 s rho / E with rho = u^dag u
  for (int s = 0; s < w.st.psi.sites(); ++s) {
    REQUIRE(std::abs(at(T[s], 0, 0) - 4.0 * w.E * w.rho) < 1e-10 * w.rho);
    REQUIRE(std::abs(at(T[s], 0, 1) + 4.0 * w.s_eff * w.rho) < 1e-10 * w.rho);
    REQUIRE(at(T[s], 0, 0) > 0.0);
    REQUIRE(std::abs(j[s][0] - 2.0 * w.rho) < 1e-12 * w.rho);
    REQUIRE(std::abs(j[s][1] - 2.0 * w.s_eff * w.rho / w.E) < 1e-12 * w.rho);
  }
  // eta-raised ratio T^{0x}/T^{00} = j^x/j^0 = s/E
  const double ratio_T = -at(T[3], 0, 1) / at(T[3], 0, 0);
  REQUIRE(std::abs(ratio_T - w.s_eff / w.E) < 1e-12);
}

TEST_CASE("j^0 = 2 psi^dag psi pointwise on constrained states") {
  const Grid g = make_grid_1d(32, 0.5, 0.05);
  StateSlice st = make_flat_state(g);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Mat4c g0 = dirac_representation().c[0];
  for (int s = 0; s < g.sites(); ++s) {
    for (auto& z : st.psi[s]) z = cplx(u(rng), u(rng));
    Spinplet conj;
    for (int a = 0; a < 4; ++a) conj[static_cast<std::size_t>(a)] = std::conj(st.psi[s][static_cast<std::size_t>(a)]);
    st.phi[s] = g0 * conj;
  }
  const Background bg = make_background(st.gamma, st.lambda, 2);
  const CurrentField j = current_field(st.psi, st.phi, st.gamma, bg.g_upper);
  for (int s = 0; s < g.sites(); ++s) {
    double rho = 0.0;
    for (const cplx& z : st.psi[s]) rho += std::norm(z);
    REQUIRE(std::abs(j[s][0] - 2.0 * rho) < 1e-12);
    REQUIRE(j[s][0] >= 0.0);
  }
}

TEST_CASE("disjoint supports of psi and phi make j and T vanish exactly") {
  const Grid g = make_grid_1d(64, 0.5, 0.05);
  StateSlice st = make_flat_state(g);
  // psi lives on sites [4, 20], phi on [40, 56]; gap exceeds any stencil
  for (int s = 4; s <= 20; ++s) st.psi[s] = {cplx(0.4, 0.1), cplx(0.2, -0.3), 0.0, cplx(0.1, 0.0)};
  for (int s = 40; s <= 56; ++s) st.phi[s] = {cplx(-0.2, 0.5), 0.0, cplx(0.3, 0.2), 0.0};
  const Background bg = make_background(st.gamma, st.lambda, 2);
  EvolutionParams p;
  p.m = 0.25;
  p.dt = 0.05;
  const CurrentField j = current_field(st.psi, st.phi, st.gamma, bg.g_upper);
  const Sym4Field T = stress_energy(st, bg, p);
  for (int s = 0; s < g.sites(); ++s) {
    for (double x : j[s]) REQUIRE(x == 0.0);
    for (double x : T[s]) REQUIRE(x == 0.0);
  }
}

TEST_CASE("vanishing gamma on a region kills j and T there") {
  const Grid g = make_grid_1d(64, 0.5, 0.05);
  StateSlice st = make_flat_state(g);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int s = 0; s < g.sites(); ++s) {
    for (auto& z : st.psi[s]) z = cplx(u(rng), u(rng));
    for (auto& z : st.phi[s]) z = cplx(u(rng), u(rng));
  }
  // zero the gamma field on [10, 30]
  for (int s = 10; s <= 30; ++s)
    for (auto& m : st.gamma[s]) m = Mat4c::zero();
  MetricField flat_up(g, Variance::contravariant);
  for (int s = 0; s < g.sites(); ++s) flat_up[s] = minkowski();

  const CurrentField j = current_field(st.psi, st.phi, st.gamma, flat_up,
                                       std::numeric_limits<double>::infinity());
  const SpinpletField zero_d(g);
  const Sym4Field T = stress_energy_with(st, zero_d, zero_d, zero_d, zero_d, 2,
                                         std::numeric_limits<double>::infinity());
  for (int s = 12; s <= 28; ++s) {  // interior of the zeroed region, beyond stencils
    for (double x : j[s]) REQUIRE(x == 0.0);
    for (double x : T[s]) REQUIRE(x == 0.0);
  }
}

TEST_CASE("global charges: zero tensor, uniform slab, plane-wave P") {
  const Grid g = make_grid_1d(32, 0.5, 0.05);
  Sym4Field T(g);
  GlobalCharges c0 = global_charges(T);
  for (double x : c0.P) REQUIRE(x == 0.0);
  for (double x : c0.J) REQUIRE(x == 0.0);
  for (double x : c0.C) REQUIRE(x == 0.0);

  // uniform T^{00}: P^0 = T^{00} * volume
  for (int s = 0; s < g.sites(); ++s) at(T[s], 0, 0) = 2.5;
  const GlobalCharges cu = global_charges(T);
  REQUIRE(std::abs(cu.P[0] - 2.5 * g.box_length(0)) < 1e-12);
}

TEST_CASE("charge and energy-momentum drift over evolution") {
  const Grid g = make_grid_1d(64, 0.5, 0.05);
  StateSlice st = make_flat_state(g);
  gaussian_test_state(g, 0.2, 0.4, 3.0, 12.0, st);
  const Background bg = make_background(st.gamma, st.lambda, 2);

  auto run_drift = [&](double dt, int steps) {
    EvolutionParams p;
    p.m = 0.2;
    p.dt = dt;
    StateSlice cur = st;
    const double q0 = total_charge(current_field(cur.psi, cur.phi, cur.gamma, bg.g_upper));
    const GlobalCharges c0 = global_charges(stress_energy(cur, bg, p));
    for (int n = 0; n < steps; ++n) cur = step_rk4(cur, bg, p);
    const double q1 = total_charge(current_field(cur.psi, cur.phi, cur.gamma, bg.g_upper));
    const GlobalCharges c1 = global_charges(stress_energy(cur, bg, p));
    const double dq = std::abs(q1 - q0) / std::abs(q0);
    const double dp0 = std::abs(c1.P[0] - c0.P[0]) / std::abs(c0.P[0]);
    const double dp1 = std::abs(c1.P[1] - c0.P[1]) / std::abs(c0.P[1]);
    return std::array<double, 3>{dq, dp0, dp1};
  };

  const auto d1 = run_drift(0.1, 100);
  for (double d : d1) REQUIRE(d < 1e-6);
  const auto d2 = run_drift(0.05, 200);  // same physical time, halved dt
  REQUIRE(d1[0] / d2[0] > 8.0);
}

TEST_CASE("boost charge satisfies dC/dt = P to discretization order") {
  // the Killing identity is exact for the continuum system; the lattice has
  // no exact boost symmetry, so the defect must shrink at the scheme order
  auto defect = [](int nx, double dx, double dt, int order) {
    const Grid g = make_grid_1d(nx, dx, dt);
    StateSlice st = make_flat_state(g);
    gaussian_test_state(g, 0.25, 0.5, 4.0, 24.0, st);
    const Background bg = make_background(st.gamma, st.lambda, order);
    EvolutionParams p;
    p.m = 0.25;
    p.dt = dt;
    p.fd_order = order;
    StateSlice prev = st;
    StateSlice mid = step_rk4(prev, bg, p);
    StateSlice next = step_rk4(mid, bg, p);
    const GlobalCharges cm = global_charges(stress_energy(prev, bg, p));
    const GlobalCharges c0 = global_charges(stress_energy(mid, bg, p));
    const GlobalCharges cp = global_charges(stress_energy(next, bg, p));
    const double dCdt = (cp.C[0] - cm.C[0]) / (2.0 * p.dt);
    return std::pair<double, double>(std::abs(dCdt - c0.P[1]), std::abs(c0.P[1]));
  };
  const auto [e1, p1] = defect(96, 0.5, 0.05, 2);
  const auto [e2, p2] = defect(192, 0.25, 0.025, 2);
  REQUIRE(e1 < 0.05 * p1);   // identity holds at coarse resolution already
  REQUIRE(e1 / e2 > 3.0);    // and converges at the scheme order
  // order-4 differencing leaves only a tiny defect
  const auto [e4, p4] = defect(96, 0.5, 0.05, 4);
  REQUIRE(e4 < 2e-3 * p4);
}

TEST_CASE("divergence audits: vacuum zero, evolved-run refinement, corruption flag") {
  EvolutionParams p;
  p.m = 0.2;

  // static vacuum: all residuals identically zero
  {
    const Grid g = make_grid_1d(16, 0.5, 0.05);
    StateSlice st = make_flat_state(g);
    const Background bg = make_background(st.gamma, st.lambda, 2);
    p.dt = 0.05;
    const Sym4Field T = stress_energy(st, bg, p);
    const CurrentField j = current_field(st.psi, st.phi, st.gamma, bg.g_upper);
    const DivergenceReport rj = current_divergence(j, j, j, p.dt, bg.conn, 2);
    const DivergenceReport rt = stress_divergence(T, T, T, p.dt, bg.g_upper, bg.conn, 2);
    REQUIRE(rj.max_norm == 0.0);
    REQUIRE(rt.max_norm == 0.0);
  }

  auto evolved_residual = [&](int nx, double dx, double dt) {
    const Grid g = make_grid_1d(nx, dx, dt);
    StateSlice st = make_flat_state(g);
    gaussian_test_state(g, 0.2, 0.4, 3.0, 12.0, st);
    const Background bg = make_background(st.gamma, st.lambda, 2);
    EvolutionParams pp;
    pp.m = 0.2;
    pp.dt = dt;
    StateSlice a = st;
    for (int n = 0; n < 4; ++n) a = step_rk4(a, bg, pp);
    StateSlice b = step_rk4(a, bg, pp);
    StateSlice c = step_rk4(b, bg, pp);
    const CurrentField ja = current_field(a.psi, a.phi, a.gamma, bg.g_upper);
    const CurrentField jb = current_field(b.psi, b.phi, b.gamma, bg.g_upper);
    const CurrentField jc = current_field(c.psi, c.phi, c.gamma, bg.g_upper);
    const Sym4Field Ta = stress_energy(a, bg, pp);
    const Sym4Field Tb = stress_energy(b, bg, pp);
    const Sym4Field Tc = stress_energy(c, bg, pp);
    const double rj = current_divergence(ja, jb, jc, dt, bg.conn, 2).max_norm;
    const double rt = stress_divergence(Ta, Tb, Tc, dt, bg.g_upper, bg.conn, 2).max_norm;
    return std::pair<double, double>(rj, rt);
  };
  const auto [rj1, rt1] = evolved_residual(64, 0.5, 0.05);
  const auto [rj2, rt2] = evolved_residual(128, 0.25, 0.025);
  REQUIRE(rj1 / rj2 > 3.0);  // at least the scheme order under (dx, dt) refinement
  REQUIRE(rt1 / rt2 > 3.0);

  // corrupting the middle slice of an evolved run is flagged by a residual
  // far above the solution baseline
  {
    const Grid g = make_grid_1d(64, 0.5, 0.05);
    StateSlice st = make_flat_state(g);
    gaussian_test_state(g, 0.2, 0.4, 3.0, 12.0, st);
    const Background bg = make_background(st.gamma, st.lambda, 2);
    EvolutionParams pp;
    pp.m = 0.2;
    pp.dt = 0.05;
    StateSlice a = st;
    StateSlice b = step_rk4(a, bg, pp);
    StateSlice c = step_rk4(b, bg, pp);
    const CurrentField ja = current_field(a.psi, a.phi, a.gamma, bg.g_upper);
    const CurrentField jb = current_field(b.psi, b.phi, b.gamma, bg.g_upper);
    const CurrentField jc = current_field(c.psi, c.phi, c.gamma, bg.g_upper);
    const double base = current_divergence(ja, jb, jc, pp.dt, bg.conn, 2).max_norm;
    CurrentField jbad = jb;
    jbad[32][1] += 1.0;
    const double corrupt = current_divergence(ja, jbad, jc, pp.dt, bg.conn, 2).max_norm;
    REQUIRE(corrupt > 50.0 * base);
    REQUIRE(corrupt > 0.1);
  }
}
