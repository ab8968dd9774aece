#pragma once

#include <stdexcept>
#include <string>

namespace protograv {

// Base class for all recoverable simulator failures.
struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A quantity that must be real carries an imaginary residue above tolerance.
struct ImaginaryResidue : SimError {
  using SimError::SimError;
};

// A matrix handed to a boost does not satisfy L^T eta L = eta.
struct NotLorentz : SimError {
  using SimError::SimError;
};

// |det g| below tolerance at some site.
struct DegenerateMetric : SimError {
  using SimError::SimError;
};

// The time-coefficient matrix i g^{0nu} gamma_nu is not safely invertible.
struct DegenerateTimeDirection : SimError {
  using SimError::SimError;
};

// An integrator step produced a non-finite field value.
struct StepRejected : SimError {
  using SimError::SimError;
};

// Fewer snapshots than the time stencil requires.
struct InsufficientHistory : SimError {
  using SimError::SimError;
};

struct EmptyPacket : SimError {
  using SimError::SimError;
};

struct PacketTooNarrow : SimError {
  using SimError::SimError;
};

struct PacketTooWide : SimError {
  using SimError::SimError;
};

// A trajectory left the allowed coordinate range.
struct LeftDomain : SimError {
  using SimError::SimError;
};

// Relaxation descent rate fell to machine-epsilon scale before reaching tol.
struct Stalled : SimError {
  using SimError::SimError;
};

struct ConfigError : SimError {
  using SimError::SimError;
};

struct SingularMatrix : SimError {
  using SimError::SimError;
};

namespace tol {
inline constexpr double imag = 1e-10;       // max imaginary residue on real quantities
inline constexpr double lorentz = 1e-10;    // max |L^T eta L - eta|
inline constexpr double det = 1e-12;        // degenerate-metric cutoff
inline constexpr double cond_max = 1e8;     // condition bound for time-coefficient inversion
}  // namespace tol

}  // namespace protograv
