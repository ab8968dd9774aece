#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "protograv/fields.hpp"

namespace protograv {

// Snapshot format: a text header of "key value..." lines terminated by "end",
// followed by raw little-endian 64-bit float payloads per field in row-major
// site order; complex values stored as (re, im) pairs. Round trips bit-exact.
//
//   protograv-snapshot 1
//   spatial_dims <1|3>
//   n <nx> <ny> <nz>
//   spacing <dx> <dy> <dz>
//   dt <dt>
//   time <t>
//   fields psi phi psi_p phi_p A A_dot gamma lambda
//   end

static_assert(std::endian::native == std::endian::little,
              "snapshot payloads are little-endian; byte-swapping is not implemented");

namespace detail {

inline void put_doubles(std::ostream& os, const double* p, std::size_t count) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
}

inline void get_doubles(std::istream& is, double* p, std::size_t count) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw SimError("snapshot: truncated payload");
}

template <class T>
void put_field(std::ostream& os, const std::vector<T>& v) {
  put_doubles(os, reinterpret_cast<const double*>(v.data()), v.size() * double_count<T>());
}

template <class T>
void get_field(std::istream& is, std::vector<T>& v) {
  get_doubles(is, reinterpret_cast<double*>(v.data()), v.size() * double_count<T>());
}

}  // namespace detail

inline void save_snapshot(std::ostream& os, const StateSlice& s) {
  const Grid& g = s.psi.grid;
  std::ostringstream h;
  h.precision(17);
  h << "protograv-snapshot 1\n";
  h << "spatial_dims " << g.spatial_dims << "\n";
  h << "n " << g.n[0] << " " << g.n[1] << " " << g.n[2] << "\n";
  h << "spacing " << g.spacing[0] << " " << g.spacing[1] << " " << g.spacing[2] << "\n";
  h << "dt " << g.dt << "\n";
  h << "time " << s.time << "\n";
  h << "fields psi phi psi_p phi_p A A_dot gamma lambda\n";
  h << "end\n";
  os << h.str();
  detail::put_field(os, s.psi.v);
  detail::put_field(os, s.phi.v);
  detail::put_field(os, s.psi_p.v);
  detail::put_field(os, s.phi_p.v);
  detail::put_field(os, s.A.v);
  detail::put_field(os, s.A_dot.v);
  detail::put_field(os, s.gamma.v);
  detail::put_field(os, s.lambda.v);
  // time is also stored bit-exactly; the header copy is informational
  const double t = s.time;
  detail::put_doubles(os, &t, 1);
}

inline void save_snapshot(const std::string& path, const StateSlice& s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw SimError("snapshot: cannot open for writing: " + path);
  save_snapshot(f, s);
}

inline StateSlice load_snapshot(std::istream& is) {
  std::string line;
  auto next = [&](const std::string& key) {
    if (!std::getline(is, line)) throw SimError("snapshot: truncated header");
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw SimError("snapshot: expected header key '" + key + "', got '" + k + "'");
    return ls;
  };
  {
    auto ls = next("protograv-snapshot");
    int ver = 0;
    ls >> ver;
    if (ver != 1) throw SimError("snapshot: unsupported version");
  }
  Grid g;
  {
    auto ls = next("spatial_dims");
    ls >> g.spatial_dims;
    if (g.spatial_dims != 1 && g.spatial_dims != 3) throw SimError("snapshot: bad spatial_dims");
  }
  {
    auto ls = next("n");
    ls >> g.n[0] >> g.n[1] >> g.n[2];
  }
  {
    auto ls = next("spacing");
    ls >> g.spacing[0] >> g.spacing[1] >> g.spacing[2];
  }
  {
    auto ls = next("dt");
    ls >> g.dt;
  }
  {
    auto ls = next("time");
    double t;
    ls >> t;
  }
  {
    auto ls = next("fields");
    std::string f, rest;
    std::vector<std::string> names;
    while (ls >> f) names.push_back(f);
    const std::vector<std::string> expect = {"psi", "phi", "psi_p", "phi_p", "A", "A_dot", "gamma", "lambda"};
    if (names != expect) throw SimError("snapshot: unexpected field list");
  }
  if (!std::getline(is, line) || line != "end") throw SimError("snapshot: missing 'end'");

  StateSlice s = make_zero_state(g);
  detail::get_field(is, s.psi.v);
  detail::get_field(is, s.phi.v);
  detail::get_field(is, s.psi_p.v);
  detail::get_field(is, s.phi_p.v);
  detail::get_field(is, s.A.v);
  detail::get_field(is, s.A_dot.v);
  detail::get_field(is, s.gamma.v);
  detail::get_field(is, s.lambda.v);
  detail::get_doubles(is, &s.time, 1);
  return s;
}

inline StateSlice load_snapshot(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SimError("snapshot: cannot open for reading: " + path);
  return load_snapshot(f);
}

}  // namespace protograv
