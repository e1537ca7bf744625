#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "sqmat/polyalg.hpp"

namespace sqmat {

/// A polynomial Hamiltonian system with 2 degrees of freedom. Holds the real
/// vector field in (x, p_x, y, p_y) and its resonance-variable form
/// (zdot_x, zdot_x*, zdot_y, zdot_y*), plus the linear frequencies read off
/// the degree-1 part.
struct ModelSpec {
  std::string name;
  // Real polynomials over (x, p_x, y, p_y); layouts carry a constant slot
  // though valid fields never use it.
  std::optional<TruncPoly> hamiltonian;
  std::array<TruncPoly, 4> real_field;  // xdot, pxdot, ydot, pydot
  std::array<TruncPoly, 4> resonance_field;
  double mu_x = 0.0;
  double mu_y = 0.0;

  // Compact term lists of real_field, derived at construction (hot path of
  // the integrator).
  struct Term {
    double c;
    std::array<std::uint8_t, 4> e;
  };
  std::array<std::vector<Term>, 4> field_terms;

  std::array<double, 4> eval_field(const State& s) const;
  double energy(const State& s) const;  // throws if no Hamiltonian
};

/// Model from a real polynomial Hamiltonian (canonical equations derived
/// symbolically). A constant term is dropped with a warning on stderr; a
/// degree-1 part of the field that is not in i*mu normal form is rejected.
ModelSpec model_from_hamiltonian(const TruncPoly& H, std::string name = "custom");

/// Model from an explicit real polynomial vector field.
ModelSpec model_from_field(const std::array<TruncPoly, 4>& field, std::string name = "custom",
                           std::optional<TruncPoly> hamiltonian = std::nullopt);

/// The Henon-Heiles system: H = (x^2+p_x^2+y^2+p_y^2)/2 + x^2 y - y^3/3.
ModelSpec henon_heiles();

/// Layout used for model ingestion (real variables, constant slot).
BasisLayout model_layout(int max_degree);

/// Completes (x0, y0, py0) at energy E by solving H = E for p_x0 > 0.
/// Throws std::domain_error if the radicand is negative.
State initial_state(const ModelSpec& model, double E, double x0, double y0, double py0);

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  double energy0 = 0.0;
  double max_energy_drift = 0.0;  // max |H - E0| / |E0| over the run
  double dt = 0.0;
};

struct IntegrateOptions {
  double dt = 0.05;              // initial step; halved until the drift gate passes
  double drift_tol = 1e-8;       // relative energy drift gate
  int max_halvings = 8;
  bool store_all = true;
};

/// Fixed-step 8th order explicit Runge-Kutta forward integration with an
/// energy-drift pre-check: the step is halved until the drift over a short
/// probe window is below drift_tol, then the full run is verified against
/// the same gate. Throws std::runtime_error if the gate cannot be met.
Trajectory integrate(const ModelSpec& model, const State& s0, double t_end,
                     const IntegrateOptions& opts = {});

/// One RK8 step (exposed for reuse in section refinement and tests).
State rk8_step(const ModelSpec& model, const State& s, double dt);

struct SectionPoints {
  std::vector<std::array<double, 2>> points;  // (y, p_y) at x = 0
  bool increasing_x = true;
};

struct PoincareOptions {
  bool increasing_x = true;  // crossings into x > 0
  double refine_tol = 1e-10;
};

/// Crossings of the x = 0 plane in one direction, refined by integrating in
/// the x parameterization (dt/dx = 1/p_x) back to the plane.
SectionPoints poincare_section(const ModelSpec& model, const Trajectory& traj,
                               const PoincareOptions& opts = {});

struct SpectralLine {
  double frequency = 0.0;
  Complex amplitude{0.0, 0.0};
};

struct NaffOptions {
  int refine_iters = 64;       // golden-section refinement steps per peak
  double min_separation = 0.0; // skip peaks closer than this to found ones
};

/// Dominant spectral lines of a uniformly sampled complex signal, sorted by
/// amplitude magnitude. Hann-windowed FFT peak search with golden-section
/// refinement of the windowed projection, then iterative subtraction.
std::vector<SpectralLine> fundamental_frequencies(std::span<const Complex> signal, double dt,
                                                  int count, const NaffOptions& opts = {});

/// Complex amplitude of the signal at a fixed frequency (Hann-weighted
/// projection), used to read off line heights at known frequencies.
Complex amplitude_at(std::span<const Complex> signal, double dt, double freq);

}  // namespace sqmat
