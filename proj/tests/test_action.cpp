#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "protograv/action.hpp"

using namespace protograv;

namespace {
constexpr double pi = std::numbers::pi;

ActionParams default_params() {
  ActionParams p;
  p.m = 0.2;
  p.q = 0.0;
  p.M = 1e3;
  p.kappa = 8.0 * pi;
  p.epsilon = 1e-3;
  p.fd_order = 2;
  return p;
}

void randomize_matter(StateSlice& st, std::mt19937_64& rng, bool with_A) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Grid& g = st.psi.grid;
  const double L = g.box_length(0);
  auto smooth = [&](SpinpletField& f) {
    f = SpinpletField(g);
    for (int mode = -3; mode <= 3; ++mode) {
      cplx c[4];
      for (auto& z : c) z = cplx(u(rng), u(rng)) / (1.0 + mode * mode);
      const double k = 2.0 * pi * mode / L;
      for (int s = 0; s < g.sites(); ++s) {
        const cplx ph = std::exp(cplx(0.0, k * g.position(s)[0]));
        for (int a = 0; a < 4; ++a) f[s][static_cast<std::size_t>(a)] += c[a] * ph;
      }
    }
  };
  smooth(st.psi);
  smooth(st.phi);
  smooth(st.psi_p);
  smooth(st.phi_p);
  if (with_A) {
    st.A = CovectorField(g);
    for (int mode = -2; mode <= 2; ++mode) {
      double c[4];
      for (auto& x : c) x = u(rng) / (1.0 + mode * mode);
      const double k = 2.0 * pi * mode / L;
      for (int s = 0; s < g.sites(); ++s)
        for (int a = 0; a < 4; ++a)
          st.A[s][static_cast<std::size_t>(a)] += c[a] * std::cos(k * g.position(s)[0] + 0.3 * a);
    }
  }
}

SliceStack random_stack(const Grid& g, unsigned seed, bool with_A) {
  std::mt19937_64 rng(seed);
  SliceStack stk;
  stk.dt = g.dt;
  for (int i = 0; i < 5; ++i) {
    StateSlice st = make_flat_state(g);
    st.time = i * g.dt;
    randomize_matter(st, rng, with_A);
    stk.slices.push_back(std::move(st));
  }
  return stk;
}
}  // namespace

TEST_CASE("flat vacuum: every action term vanishes") {
  const Grid g = make_grid_1d(32, 0.5, 0.05);
  const StateSlice st = make_flat_state(g);
  const ActionBreakdown b = action_breakdown(st, default_params(), zero_time_derivs(g));
  REQUIRE(b.lambda_g == 0.0);
  REQUIRE(b.lambda_lambda == 0.0);
  REQUIRE(b.lambda_A == 0.0);
  REQUIRE(b.lambda_e == 0.0);
  REQUIRE(b.lambda_p == 0.0);
  REQUIRE(b.lambda_eA == 0.0);
  REQUIRE(b.lambda_pA == 0.0);
  REQUIRE(b.lambda_c == 0.0);
  REQUIRE(b.total == 0.0);
}

TEST_CASE("on-shell plane wave: the matter integrand vanishes pointwise") {
  const Grid g = make_grid_1d(128, 0.5, 0.05);
  StateSlice st = make_flat_state(g);
  ActionParams p = default_params();

  const double k = 2.0 * pi * 9.0 / g.box_length(0);
  const double s_eff = oracles::diff_symbol(k, g.spacing[0], 2);
  const double E = std::sqrt(s_eff * s_eff + p.m * p.m);
  cplx u[4];
  oracles::plane_wave_spinor(s_eff, p.m, u);
  const Mat4c g0 = dirac_representation().c[0];
  TimeDerivs td = zero_time_derivs(g);
  for (int s = 0; s < g.sites(); ++s) {
    const cplx ph = std::exp(cplx(0.0, k * g.position(s)[0]));
    for (int a = 0; a < 4; ++a) st.psi[s][static_cast<std::size_t>(a)] = u[a] * ph;
    Spinplet conj;
    for (int a = 0; a < 4; ++a) conj[static_cast<std::size_t>(a)] = std::conj(st.psi[s][static_cast<std::size_t>(a)]);
    st.phi[s] = g0 * conj;
    for (int a = 0; a < 4; ++a) {
      td.dpsi[s][static_cast<std::size_t>(a)] = cplx(0.0, -E) * st.psi[s][static_cast<std::size_t>(a)];
      td.dphi[s][static_cast<std::size_t>(a)] = cplx(0.0, +E) * st.phi[s][static_cast<std::size_t>(a)];
    }
  }
  const Lattice<ActionBreakdown> d = action_density(st, p, td);
  for (int s = 0; s < g.sites(); ++s) REQUIRE(std::abs(d[s].lambda_e) < 1e-11);
}

TEST_CASE("Higgs term: uniform defect integrates to 4 M eps^2 V") {
  const Grid g = make_grid_1d(64, 0.5, 0.05);
  const double eps = 0.01;
  StateSlice st = make_conformal_state(g, [&](const std::array<double, 3>&) { return 1.0 + eps; });
  // keep lambda flat so g_upper = eta while g_lower = (1+eps) eta
  const Vectorplet lu = dirac_representation();
  for (int s = 0; s < g.sites(); ++s) st.lambda[s] = lu.c;
  ActionParams p = default_params();
  const ActionBreakdown b = action_breakdown(st, p, zero_time_derivs(g));
  const double expect = 4.0 * p.M * eps * eps * g.box_length(0);
  REQUIRE(std::abs(b.lambda_c - expect) < 1e-9 * expect);
  REQUIRE(b.lambda_c >= 0.0);
}

TEST_CASE("gauge invariance: Lambda_A unchanged under A -> A + grad chi") {
  const Grid g = make_grid_1d(64, 0.5, 0.05);
  std::mt19937_64 rng(5);
  StateSlice st = make_flat_state(g);
  randomize_matter(st, rng, true);
  TimeDerivs td = zero_time_derivs(g);
  ActionParams p = default_params();
  p.q = 0.7;
  const ActionBreakdown before = action_breakdown(st, p, td);

  const double kk = 2.0 * pi * 2.0 / g.box_length(0);
  const ScalarField chi = sample_scalar(g, [&](const std::array<double, 3>& x) { return std::sin(kk * x[0]); });
  const ScalarField dchi = partial(chi, 1, p.fd_order);
  StateSlice st2 = st;
  for (int s = 0; s < g.sites(); ++s) st2.A[s][1] += dchi[s];
  const ActionBreakdown after = action_breakdown(st2, p, td);
  REQUIRE(std::abs(after.lambda_A - before.lambda_A) < 1e-12 * std::max(1.0, std::abs(before.lambda_A)));
}

TEST_CASE("global phase invariance of the electron terms") {
  const Grid g = make_grid_1d(64, 0.5, 0.05);
  std::mt19937_64 rng(6);
  StateSlice st = make_flat_state(g);
  randomize_matter(st, rng, true);
  TimeDerivs td = zero_time_derivs(g);
  ActionParams p = default_params();
  p.q = 0.7;
  const ActionBreakdown before = action_breakdown(st, p, td);

  const cplx ph = std::exp(cplx(0.0, 1.37));
  StateSlice st2 = st;
  for (int s = 0; s < g.sites(); ++s)
    for (int a = 0; a < 4; ++a) {
      st2.psi[s][static_cast<std::size_t>(a)] = ph * st.psi[s][static_cast<std::size_t>(a)];
      st2.phi[s][static_cast<std::size_t>(a)] = std::conj(ph) * st.phi[s][static_cast<std::size_t>(a)];
    }
  const ActionBreakdown after = action_breakdown(st2, p, td);
  const double scale = std::abs(before.lambda_e) + std::abs(before.lambda_eA) + 1.0;
  REQUIRE(std::abs((after.lambda_e + after.lambda_eA) - (before.lambda_e + before.lambda_eA)) < 1e-12 * scale);
}

TEST_CASE("variational consistency: psi and phi on random off-shell states") {
  const Grid g = make_grid_1d(48, 0.5, 0.05);
  ActionParams p = default_params();
  p.q = 0.6;
  SliceStack stk = random_stack(g, 71, true);
  const VariationReport rp = variational_residual(stk, p, VariationTarget::psi, 1e-5, 32, 11);
  REQUIRE(rp.rel_error < 1e-6);
  SliceStack stk2 = random_stack(g, 72, true);
  const VariationReport rf = variational_residual(stk2, p, VariationTarget::phi, 1e-5, 32, 12);
  REQUIRE(rf.rel_error < 1e-6);
}

TEST_CASE("variational consistency: A against the coded Maxwell residual") {
  const Grid g = make_grid_1d(48, 0.5, 0.05);
  ActionParams p = default_params();
  p.q = 0.6;
  SliceStack stk = random_stack(g, 73, true);
  const VariationReport r = variational_residual(stk, p, VariationTarget::A, 1e-5, 32, 13);
  REQUIRE(r.rel_error < 1e-6);
}

TEST_CASE("variational consistency: lambda against the stress-tensor contraction") {
  const Grid g = make_grid_1d(48, 0.5, 0.05);
  ActionParams p = default_params();

  // flat matter state without EM: pure chain rule through g(lambda)
  {
    SliceStack stk = random_stack(g, 74, false);
    const VariationReport r = variational_residual(stk, p, VariationTarget::lambda, 1e-5, 32, 14);
    REQUIRE(r.rel_error < 1e-5);
  }
  // with EM field and couplings switched on
  {
    ActionParams p2 = p;
    p2.q = 0.6;
    SliceStack stk = random_stack(g, 75, true);
    const VariationReport r = variational_residual(stk, p2, VariationTarget::lambda, 1e-5, 32, 15);
    REQUIRE(r.rel_error < 1e-5);
  }
}
