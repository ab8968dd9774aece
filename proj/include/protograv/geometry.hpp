#pragma once

#include <cmath>
#include <string>

#include "protograv/clifford.hpp"
#include "protograv/fields.hpp"
#include "protograv/finite_difference.hpp"

namespace protograv {

// Pointwise metric extraction over the lattice. Propagates ImaginaryResidue
// with the offending site index.
inline MetricField metric_field_from(const VectorpletField& f, double tol_imag = tol::imag) {
  MetricField out(f.grid, f.var);
  for (int s = 0; s < f.sites(); ++s) {
    try {
      out[s] = metric_from_pair(f.at_site(s), f.at_site(s), tol_imag).g;
    } catch (const ImaginaryResidue& e) {
      throw ImaginaryResidue(std::string(e.what()) + " [site " + std::to_string(s) + "]");
    }
  }
  return out;
}

inline std::pair<MetricField, MetricField> metric_fields(const VectorpletField& gamma,
                                                         const VectorpletField& lambda,
                                                         double tol_imag = tol::imag) {
  if (gamma.var != Variance::covariant || lambda.var != Variance::contravariant)
    throw SimError("metric_fields: gamma must be covariant and lambda contravariant");
  return {metric_field_from(gamma, tol_imag), metric_field_from(lambda, tol_imag)};
}

// Per-site matrix inverse of a metric field (flips the variance tag).
inline MetricField inverse_metric(const MetricField& g) {
  MetricField out(g.grid, g.var == Variance::covariant ? Variance::contravariant : Variance::covariant);
  for (int s = 0; s < g.sites(); ++s) out[s] = mat4d_inverse(g[s]);
  return out;
}

// Connection coefficients assembled from the supplied pair:
//   G^a_{mu nu} = 1/2 g^{a s}(lambda) (g_{mu s,nu} + g_{s nu,mu} - g_{mu nu,s})
// using the supplied contravariant field as-is (not the inverse of g_lower
// unless they happen to coincide). Spatial derivatives are lattice centrals;
// the time derivative of the background is zero unless dg0 is supplied.
inline ConnectionField christoffel(const MetricField& g_lower, const MetricField& g_upper,
                                   int order = 2, const MetricField* dg0 = nullptr) {
  if (!(g_lower.grid == g_upper.grid)) throw SimError("christoffel: grids differ");
  const Grid& grid = g_lower.grid;
  std::array<MetricField, 4> dg;
  if (dg0)
    dg[0] = *dg0;
  else {
    dg[0] = MetricField(grid, g_lower.var);  // zero: static background
  }
  for (int a = 1; a < 4; ++a) dg[a] = partial(g_lower, a, order);

  ConnectionField conn(grid);
  for (int s = 0; s < grid.sites(); ++s) {
    for (int al = 0; al < 4; ++al)
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = mu; nu < 4; ++nu) {
          double sum = 0.0;
          for (int sg = 0; sg < 4; ++sg) {
            const double up = at(g_upper[s], al, sg);
            if (up == 0.0) continue;
            sum += up * (at(dg[nu][s], mu, sg) + at(dg[mu][s], sg, nu) - at(dg[sg][s], mu, nu));
          }
          conn.coef(s, al, mu, nu) = 0.5 * sum;
          conn.coef(s, al, nu, mu) = 0.5 * sum;
        }
  }
  return conn;
}

// Ricci tensor R_{mu nu} = d_a G^a_{mu nu} - d_nu G^a_{mu a}
//                        + G^a_{a b} G^b_{mu nu} - G^a_{nu b} G^b_{mu a}
// for a static background (time derivatives of the connection vanish).
inline Sym4Field ricci_tensor(const ConnectionField& conn, int order = 2) {
  const Grid& grid = conn.grid;
  std::array<ConnectionField, 4> dconn;
  dconn[0] = ConnectionField(grid);  // static
  for (int a = 1; a < 4; ++a) dconn[a] = partial(conn, a, order);

  // trace field t_mu = G^a_{mu a} and its derivatives
  Lattice<Vec4d> tr(grid);
  for (int s = 0; s < grid.sites(); ++s)
    for (int mu = 0; mu < 4; ++mu) {
      double t = 0.0;
      for (int a = 0; a < 4; ++a) t += conn.coef(s, a, mu, a);
      tr[s][static_cast<std::size_t>(mu)] = t;
    }
  std::array<Lattice<Vec4d>, 4> dtr;
  dtr[0] = Lattice<Vec4d>(grid);
  for (int a = 1; a < 4; ++a) dtr[a] = partial(tr, a, order);

  Sym4Field ric(grid);
  for (int s = 0; s < grid.sites(); ++s) {
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu) {
        double r = 0.0;
        for (int a = 0; a < 4; ++a) r += dconn[a].coef(s, a, mu, nu);
        r -= dtr[nu][s][static_cast<std::size_t>(mu)];
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) {
            r += conn.coef(s, a, a, b) * conn.coef(s, b, mu, nu);
            r -= conn.coef(s, a, nu, b) * conn.coef(s, b, mu, a);
          }
        at(ric[s], mu, nu) = r;
      }
  }
  return ric;
}

inline ScalarField ricci_scalar(const ConnectionField& conn, const MetricField& g_upper,
                                int order = 2) {
  const Sym4Field ric = ricci_tensor(conn, order);
  ScalarField out(conn.grid);
  for (int s = 0; s < conn.grid.sites(); ++s) {
    double r = 0.0;
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu) r += at(g_upper[s], mu, nu) * at(ric[s], mu, nu);
    out[s] = r;
  }
  return out;
}

// G_{mu nu} = R_{mu nu} - 1/2 R g_{mu nu}
inline Sym4Field einstein_tensor(const MetricField& g_lower, const MetricField& g_upper,
                                 int order = 2) {
  const ConnectionField conn = christoffel(g_lower, g_upper, order);
  const Sym4Field ric = ricci_tensor(conn, order);
  Sym4Field out(g_lower.grid);
  for (int s = 0; s < g_lower.sites(); ++s) {
    double r = 0.0;
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu) r += at(g_upper[s], mu, nu) * at(ric[s], mu, nu);
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu)
        at(out[s], mu, nu) = at(ric[s], mu, nu) - 0.5 * r * at(g_lower[s], mu, nu);
  }
  return out;
}

// Higgs-like coupling density M sum_{mu rho} |g_{mu nu} g^{nu rho} - delta|^2
// (Frobenius norm of the inverse-pair defect).
inline ScalarField higgs_density(const MetricField& g_lower, const MetricField& g_upper, double M) {
  if (M <= 0.0) throw SimError("higgs_density: M must be positive");
  if (!(g_lower.grid == g_upper.grid)) throw SimError("higgs_density: grids differ");
  ScalarField out(g_lower.grid);
  for (int s = 0; s < g_lower.sites(); ++s) {
    double acc = 0.0;
    for (int mu = 0; mu < 4; ++mu)
      for (int rho = 0; rho < 4; ++rho) {
        double c = (mu == rho) ? -1.0 : 0.0;
        for (int nu = 0; nu < 4; ++nu) c += at(g_lower[s], mu, nu) * at(g_upper[s], nu, rho);
        acc += c * c;
      }
    out[s] = M * acc;
  }
  return out;
}

// (|det g^{..}|)^{-1/2} per site; DegenerateMetric when |det| < tol_det.
inline ScalarField measure_factor(const MetricField& g_upper, double tol_det = tol::det) {
  ScalarField out(g_upper.grid);
  for (int s = 0; s < g_upper.sites(); ++s) {
    const double d = std::abs(mat4d_det(g_upper[s]));
    if (d < tol_det)
      throw DegenerateMetric("measure_factor: |det| = " + std::to_string(d) + " at site " +
                             std::to_string(s));
    out[s] = 1.0 / std::sqrt(d);
  }
  return out;
}

// Flat-split factor h with g(gamma) = h . eta, reported as the mixed product
// h_mu^nu = g_{mu s} eta^{s nu}; identity on a flat background.
inline Sym4Field flat_split_factor(const MetricField& g_lower) {
  Sym4Field out(g_lower.grid);
  for (int s = 0; s < g_lower.sites(); ++s)
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu)
        at(out[s], mu, nu) = at(g_lower[s], mu, nu) * eta_diag(nu);
  return out;
}

}  // namespace protograv
