#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "protograv/conservation.hpp"
#include "protograv/dynamics.hpp"
#include "protograv/fields.hpp"
#include "protograv/geometry.hpp"

namespace protograv {

// ---------------------------------------------------------------------------
// Gradient flow of lambda toward the Higgs-constraint minimum, gamma held
// fixed. The penalty is pointwise, so the flow is site-local; iterations are
// synchronised globally with one backtracking step size.
// ---------------------------------------------------------------------------

struct RelaxLogRow {
  int iteration = 0;
  double penalty = 0.0;
  double max_violation = 0.0;
  double step = 0.0;
};

struct RelaxResult {
  VectorpletField lambda;
  std::vector<RelaxLogRow> log;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

struct PenaltyEval {
  double penalty = 0.0;
  double max_violation = 0.0;
};

// C = g(gamma) g(lambda) - I per site; metric extraction takes the real part
// without the admissibility gate (descent directions need not preserve it).
inline PenaltyEval higgs_penalty(const MetricField& g_lower, const VectorpletField& lambda,
                                 double M) {
  const double lenient = std::numeric_limits<double>::infinity();
  const MetricField g_upper = metric_field_from(lambda, lenient);
  const Grid& g = lambda.grid;
  PenaltyEval ev;
  std::vector<double> acc(static_cast<std::size_t>(g.sites()));
  for (int s = 0; s < g.sites(); ++s) {
    double p = 0.0;
    for (int mu = 0; mu < 4; ++mu)
      for (int rho = 0; rho < 4; ++rho) {
        double c = (mu == rho) ? -1.0 : 0.0;
        for (int nu = 0; nu < 4; ++nu) c += at(g_lower[s], mu, nu) * at(g_upper[s], nu, rho);
        p += c * c;
        ev.max_violation = std::max(ev.max_violation, std::abs(c));
      }
    acc[static_cast<std::size_t>(s)] = M * p;
  }
  ev.penalty = pairwise_sum(acc) * g.cell_volume();
  return ev;
}

}  // namespace detail

// Analytic gradient of the penalty with respect to the lambda entries; the
// returned matrices G^sigma are the descent coefficients: the update is
// lambda^sigma -= s * G^sigma, and dP = -s sum |G|^2. Exposed for the
// finite-difference gradient audit.
inline std::pair<double, VectorpletField> higgs_penalty_gradient(const VectorpletField& gamma,
                                                                 const VectorpletField& lambda,
                                                                 double M) {
  const double lenient = std::numeric_limits<double>::infinity();
  const MetricField g_lower = metric_field_from(gamma, lenient);
  const MetricField g_upper = metric_field_from(lambda, lenient);
  const Grid& g = lambda.grid;
  const double vol = g.cell_volume();

  VectorpletField grad(g, Variance::contravariant);
  std::vector<double> acc(static_cast<std::size_t>(g.sites()));
  for (int s = 0; s < g.sites(); ++s) {
    double p = 0.0;
    double C[4][4];
    for (int mu = 0; mu < 4; ++mu)
      for (int rho = 0; rho < 4; ++rho) {
        double c = (mu == rho) ? -1.0 : 0.0;
        for (int nu = 0; nu < 4; ++nu) c += at(g_lower[s], mu, nu) * at(g_upper[s], nu, rho);
        C[mu][rho] = c;
        p += c * c;
      }
    acc[static_cast<std::size_t>(s)] = M * p;

    // D_{sigma rho} = 2 M vol sum_mu g_{mu sigma} C_mu^rho, symmetrised
    double D[4][4];
    for (int sg = 0; sg < 4; ++sg)
      for (int rho = 0; rho < 4; ++rho) {
        double d = 0.0;
        for (int mu = 0; mu < 4; ++mu) d += at(g_lower[s], mu, sg) * C[mu][rho];
        D[sg][rho] = 2.0 * M * vol * d;
      }
    for (int sg = 0; sg < 4; ++sg)
      for (int rho = sg + 1; rho < 4; ++rho) {
        const double sym = 0.5 * (D[sg][rho] + D[rho][sg]);
        D[sg][rho] = sym;
        D[rho][sg] = sym;
      }
    // K^sigma = -1/2 sum_rho D_{sigma rho} lambda^rho; descent dir = (K^sigma)^dagger
    for (int sg = 0; sg < 4; ++sg) {
      Mat4c K;
      for (int rho = 0; rho < 4; ++rho) {
        if (D[sg][rho] != 0.0) K = K + (-0.5 * D[sg][rho]) * lambda[s][static_cast<std::size_t>(rho)];
      }
      grad[s][static_cast<std::size_t>(sg)] = adjoint(K);
    }
  }
  return {pairwise_sum(acc) * vol, grad};
}

// Descends int higgs_density by explicit gradient flow with backtracking;
// terminates when the max inverse-pair violation drops below tol. The
// minimiser in lambda is generally non-unique, so nothing is asserted about
// the lambda entries themselves, only about g(lambda).
inline RelaxResult relax_lambda(const VectorpletField& gamma, const VectorpletField& lambda0,
                                double M, double step0 = 1e-4, int max_iters = 10000,
                                double tol = 1e-6) {
  if (M <= 0.0) throw SimError("relax_lambda: M must be positive");
  const double lenient = std::numeric_limits<double>::infinity();
  const MetricField g_lower = metric_field_from(gamma, lenient);

  RelaxResult res;
  res.lambda = lambda0;

  detail::PenaltyEval ev = detail::higgs_penalty(g_lower, res.lambda, M);
  res.log.push_back({0, ev.penalty, ev.max_violation, 0.0});
  if (ev.max_violation < tol) {
    res.converged = true;
    return res;
  }

  double step = step0;
  int flat_streak = 0;
  for (int it = 1; it <= max_iters; ++it) {
    const auto [penalty, grad] = higgs_penalty_gradient(gamma, res.lambda, M);

    bool accepted = false;
    VectorpletField trial = res.lambda;
    detail::PenaltyEval trial_ev;
    for (int bt = 0; bt < 60; ++bt) {
      trial = res.lambda;
      for (int s = 0; s < trial.sites(); ++s)
        for (int sg = 0; sg < 4; ++sg)
          trial[s][static_cast<std::size_t>(sg)] =
              trial[s][static_cast<std::size_t>(sg)] - step * grad[s][static_cast<std::size_t>(sg)];
      trial_ev = detail::higgs_penalty(g_lower, trial, M);
      if (trial_ev.penalty <= ev.penalty) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      throw Stalled("relax_lambda: backtracking exhausted at iteration " + std::to_string(it));

    const double decrease = ev.penalty - trial_ev.penalty;
    res.lambda = std::move(trial);
    ev = trial_ev;
    res.iterations = it;
    res.log.push_back({it, ev.penalty, ev.max_violation, step});

    if (ev.max_violation < tol) {
      res.converged = true;
      return res;
    }
    if (decrease <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(ev.penalty, 1e-300)) {
      if (++flat_streak >= 3)
        throw Stalled("relax_lambda: descent rate at machine-epsilon scale, violation " +
                      std::to_string(ev.max_violation));
    } else {
      flat_streak = 0;
    }
    step = std::min(step * 1.3, step0 * 1e4);
  }
  return res;  // not converged within max_iters
}

// ---------------------------------------------------------------------------
// Einstein residual diagnostic G_{mu nu} - kappa T_{mu nu}. A diagnostic,
// not an equation solver.
// ---------------------------------------------------------------------------

struct EinsteinReport {
  Sym4Field residual;
  double max_norm = 0.0;
  double l2_norm = 0.0;
};

inline EinsteinReport einstein_residual_against(const MetricField& g_lower,
                                                const MetricField& g_upper, const Sym4Field& T,
                                                double kappa, int fd_order) {
  const Sym4Field G = einstein_tensor(g_lower, g_upper, fd_order);
  const Grid& grid = g_lower.grid;
  EinsteinReport rep;
  rep.residual = Sym4Field(grid);
  std::vector<double> sq(static_cast<std::size_t>(grid.sites()));
  for (int s = 0; s < grid.sites(); ++s) {
    double n2 = 0.0;
    for (int i = 0; i < 16; ++i) {
      const double r = G[s][static_cast<std::size_t>(i)] - kappa * T[s][static_cast<std::size_t>(i)];
      rep.residual[s][static_cast<std::size_t>(i)] = r;
      rep.max_norm = std::max(rep.max_norm, std::abs(r));
      n2 += r * r;
    }
    sq[static_cast<std::size_t>(s)] = n2;
  }
  rep.l2_norm = std::sqrt(pairwise_sum(sq) * grid.cell_volume());
  return rep;
}

inline EinsteinReport einstein_residual(const StateSlice& st, const Background& bg,
                                        const EvolutionParams& p, double kappa) {
  const Sym4Field T = stress_energy(st, bg, p);
  return einstein_residual_against(bg.g_lower, bg.g_upper, T, kappa, bg.fd_order);
}

}  // namespace protograv
