#pragma once

#include <array>
#include <string>

#include "protograv/errors.hpp"

namespace protograv {

// Flat-background coordinate lattice, periodic in every active spatial axis.
// Site coordinates are x_i = i * spacing; axis 0 is coordinate time and is
// never discretised here (method of lines).
struct Grid {
  int spatial_dims = 1;                      // 1 or 3
  std::array<int, 3> n{1, 1, 1};             // sites per axis; inactive axes hold 1
  std::array<double, 3> spacing{1, 1, 1};    // coordinate units
  double dt = 0.0;                           // coordinate time step

  int sites() const { return n[0] * n[1] * n[2]; }

  int index(int i, int j, int k) const { return (k * n[1] + j) * n[0] + i; }

  void coords_of(int site, int& i, int& j, int& k) const {
    i = site % n[0];
    j = (site / n[0]) % n[1];
    k = site / (n[0] * n[1]);
  }

  static int wrap(int i, int nn) {
    i %= nn;
    return i < 0 ? i + nn : i;
  }

  // Site shifted by `off` cells along spatial axis ax in {0,1,2}, periodic.
  int shift(int site, int ax, int off) const {
    int c[3];
    coords_of(site, c[0], c[1], c[2]);
    c[ax] = wrap(c[ax] + off, n[ax]);
    return index(c[0], c[1], c[2]);
  }

  std::array<double, 3> position(int site) const {
    int i, j, k;
    coords_of(site, i, j, k);
    return {i * spacing[0], j * spacing[1], k * spacing[2]};
  }

  double box_length(int ax) const { return n[ax] * spacing[ax]; }

  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < spatial_dims; ++a) v *= spacing[a];
    return v;
  }

  bool axis_active(int ax) const { return ax < spatial_dims; }

  bool operator==(const Grid& o) const {
    return spatial_dims == o.spatial_dims && n == o.n && spacing == o.spacing && dt == o.dt;
  }
};

inline Grid make_grid_1d(int nx, double dx, double dt) {
  if (nx < 8) throw ConfigError("grid: need at least 8 sites per active axis, got " + std::to_string(nx));
  if (dx <= 0.0 || dt <= 0.0) throw ConfigError("grid: spacing and dt must be positive");
  Grid g;
  g.spatial_dims = 1;
  g.n = {nx, 1, 1};
  g.spacing = {dx, 1.0, 1.0};
  g.dt = dt;
  return g;
}

inline Grid make_grid_3d(int nx, int ny, int nz, double dx, double dy, double dz, double dt) {
  if (nx < 8 || ny < 8 || nz < 8)
    throw ConfigError("grid: need at least 8 sites per active axis");
  if (dx <= 0.0 || dy <= 0.0 || dz <= 0.0 || dt <= 0.0)
    throw ConfigError("grid: spacing and dt must be positive");
  Grid g;
  g.spatial_dims = 3;
  g.n = {nx, ny, nz};
  g.spacing = {dx, dy, dz};
  g.dt = dt;
  return g;
}

}  // namespace protograv
