#pragma once

#include "protograv/fields.hpp"
#include "protograv/numerics.hpp"

namespace protograv {

// Central finite difference of the stated order along a spatial axis,
// periodic wrap. `axis` is the spacetime index in {1,2,3}; the time axis is
// never differenced here. Differencing along an inactive axis yields zero.
template <class FieldT>
FieldT partial(const FieldT& f, int axis, int order) {
  if (axis == 0) throw SimError("partial: time axis is not lattice-differenced");
  if (axis < 1 || axis > 3) throw SimError("partial: axis out of range");
  if (order != 2 && order != 4) throw SimError("partial: order must be 2 or 4");
  const int ax = axis - 1;
  FieldT out = f;
  for (auto& e : out.v) set_zero(e);
  if (!f.grid.axis_active(ax)) return out;
  const double dx = f.grid.spacing[ax];
  const int ns = f.grid.sites();
  if (order == 2) {
    const double w = 1.0 / (2.0 * dx);
    for (int s = 0; s < ns; ++s) {
      axpy(out.v[static_cast<std::size_t>(s)], +w, f.v[static_cast<std::size_t>(f.grid.shift(s, ax, +1))]);
      axpy(out.v[static_cast<std::size_t>(s)], -w, f.v[static_cast<std::size_t>(f.grid.shift(s, ax, -1))]);
    }
  } else {
    const double w1 = 8.0 / (12.0 * dx), w2 = 1.0 / (12.0 * dx);
    for (int s = 0; s < ns; ++s) {
      axpy(out.v[static_cast<std::size_t>(s)], +w1, f.v[static_cast<std::size_t>(f.grid.shift(s, ax, +1))]);
      axpy(out.v[static_cast<std::size_t>(s)], -w1, f.v[static_cast<std::size_t>(f.grid.shift(s, ax, -1))]);
      axpy(out.v[static_cast<std::size_t>(s)], -w2, f.v[static_cast<std::size_t>(f.grid.shift(s, ax, +2))]);
      axpy(out.v[static_cast<std::size_t>(s)], +w2, f.v[static_cast<std::size_t>(f.grid.shift(s, ax, -2))]);
    }
  }
  return out;
}

// Periodic lattice translation by whole cells; partial commutes with this
// exactly.
template <class FieldT>
FieldT translated(const FieldT& f, int axis, int cells) {
  const int ax = axis - 1;
  FieldT out = f;
  for (int s = 0; s < f.grid.sites(); ++s)
    out.v[static_cast<std::size_t>(s)] = f.v[static_cast<std::size_t>(f.grid.shift(s, ax, cells))];
  return out;
}

}  // namespace protograv
