#pragma once

#include "sqmat/iteration.hpp"
#include "sqmat/kaminvariant.hpp"

namespace sqmat {

/// Post-hoc comparison of a converged solve against the forward-integration
/// oracle. Never used inside the solve itself.
struct OracleComparison {
  std::array<double, 2> oracle_omega{};   // spectral frequencies of the actions
  double line_agreement = 0.0;            // max per-line | |solve| - |oracle| |
  double time_domain_dev = 0.0;           // max |vbar^(1)(t) - vbar^(e)(t)|, short window
  std::array<double, 2> v_radius_std{};   // std|vbar_l|/mean along the orbit
  std::array<double, 2> kam_radius_std{}; // same for the invariants vbar0_l
  double rotation_residual = 0.0;         // arg(vbar01) wobble vs a linear fit, rad
  Trajectory trajectory;                  // the oracle run (reusable by callers)
};

struct ValidateOptions {
  double t_end = 2000.0;
  double t_compare = 50.0;  // window for the time-domain deviation
  double dt = 0.05;
  int line_window = 6;           // |n|, |m| range for the spectral comparison
  double line_floor = 5e-4;      // lines below this magnitude are skipped
  int orbit_stride = 4;          // subsampling for the kam radius statistics
};

OracleComparison compare_with_oracle(const ModelSpec& model, const SolveResult& result,
                                     const ValidateOptions& opts = {});

/// Irregularity measure of the Poincare section curve: normalized local
/// radial scatter of the angle-sorted points. Quasi-periodic sections give
/// values well below 1e-2; chaotic sections jump across the separatrix and
/// give order-one values.
double section_dispersion(const ModelSpec& model, const State& s0, double t_end = 2000.0);
double section_dispersion(const ModelSpec& model, const Trajectory& traj);

/// Smallest p_y reached by the section points. For the upper-island family
/// (p_y0 > 0 at x = y = 0) a negative value means the orbit left the island
/// across the separatrix, which is how irregularity first shows up in the
/// section curve.
double section_min_py(const ModelSpec& model, const Trajectory& traj);

}  // namespace sqmat
