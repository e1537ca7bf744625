#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sqmat/combiner.hpp"
#include "sqmat/perturbation.hpp"

namespace sqmat {

enum class SolveStatus { running, converged, diverged, obstructed };

std::string to_string(SolveStatus s);

struct SolveConfig {
  int n_s = 5;
  int grid_n1 = 64, grid_n2 = 64;
  int window_n = 40, window_m = 40;  // clipped below the grid Nyquist
  int max_iterations = 30;
  double tol_g = 1e-3;        // relative g0 change at convergence
  double g0_floor = 1e-10;    // g0 below this converges outright (the
                              // relative change is noise at that level)
  double tol_im = 1e-4;        // |Im mean-phi| floor at convergence
  double tol_im_rel = 0.1;     // ... or this fraction of (largest side line)^2,
                               // the truncation floor of Im mean-phi near the
                               // stability boundary
  double spectrum_tol = 1e-3;  // absolute floor for the per-line agreement of
                               // the re-minimized and first-order spectra
  double spectrum_rel = 0.05;  // ... or this fraction of the largest side line
  double dominance_ratio = 2.0;  // main >= ratio * side before raising n_v
  std::vector<int> nv_schedule{2, 4};
  int divergence_run = 3;        // consecutive significant g0 increases before giving up
  double divergence_growth = 1.3;  // growth factor that counts as an increase
  ThetaOptions theta;
  InvertOptions invert;
  Exec exec = Exec::parallel;
};

/// One iteration of the history: frequencies, fluctuation, the re-minimized
/// action spectra and the first-order spectra they are checked against.
struct IterationRecord {
  int index = 0;  // 1-based
  int n_v = 2;
  std::array<double, 2> omega{};
  double g0 = 0.0;
  double rel_g0_change = 0.0;
  double im_residual = 0.0;
  double spectrum_agreement = 0.0;  // max per-line | |minimized| - |first order| |
  std::array<double, 2> side_ratio{};
  bool dominant = false;
  std::vector<Complex> a;  // coefficients after re-minimization
  FourierTable v1_min, v2_min;      // re-minimized normalized action spectra
  FourierTable v1_first, v2_first;  // first-order action spectra
};

struct IterationState {
  int iteration = 0;
  Combination comb;       // combination in force when theta was computed
  ThetaTables theta;
  FluctuationReport fluct;
  double im_residual = 0.0;
  std::optional<double> oracle_agreement;  // filled by post-hoc validation
  SolveStatus status = SolveStatus::running;
  std::string message;
};

struct SolveResult {
  IterationState final;
  Combination comb_next;  // last re-minimized combination (the fixed point)
  std::vector<IterationRecord> history;
  TorusGrid grid;                        // final improved grid states
  std::array<FourierTable, 4> w_tables;  // final chain-row tables on the grid
  State state0{};

  bool converged() const { return final.status == SolveStatus::converged; }
  int iterations() const { return static_cast<int>(history.size()); }
};

/// The full iterative solve: bootstrap, then [sample torus -> phi -> theta ->
/// first-order actions -> invert on the grid -> re-minimize] until g0 and
/// Im(mean phi) settle and the re-minimized spectrum agrees with the
/// first-order one line by line. The forward-integration oracle is never
/// consulted here.
SolveResult solve(const ModelSpec& model, const State& state0, const SolveConfig& config);

/// As solve(), but seeded with an existing combination (chains must match the
/// config's n_s); used for amplitude continuation.
SolveResult solve_seeded(const ModelSpec& model, const ChainPair& chains, const State& state0,
                         const SolveConfig& config, const Combination* seed);

/// Reruns the solve at a new initial state, seeding the combination (and
/// frequencies) from a previously converged result instead of the bootstrap.
SolveResult continue_amplitude(const ModelSpec& model, const SolveResult& prev,
                               const State& new_state0, const SolveConfig& config);

struct ProbeOutcome {
  double y0 = 0.0, py0 = 0.0;
  SolveStatus status = SolveStatus::running;
  int iterations = 0;
  double g0 = 0.0;
  double side_ratio = 0.0;          // largest v2 side line over main
  double invariant_residual = -1.0; // std|v02|/mean on the oracle orbit (post hoc)
  double oracle_dispersion = -1.0;  // section-curve irregularity measure
  bool section_escaped = false;     // section curve crossed the separatrix
  std::string message;
};

struct BoundaryScan {
  double energy = 0.0;
  std::vector<ProbeOutcome> probes;
  std::optional<double> chaos_onset_py0;  // oracle irregularity bracket estimate
};

struct ScanOptions {
  bool validate_with_oracle = true;  // fill invariant_residual / dispersion
  double oracle_t_end = 2000.0;
  bool estimate_onset = true;
  double onset_t_end = 4000.0;  // horizon for the escape bisection
};

/// Continuation chain of solves at fixed energy, x0 = 0: each probe seeds
/// from the last converged probe. Failures are recorded, not thrown.
BoundaryScan scan_boundary(const ModelSpec& model, double E,
                           std::span<const std::array<double, 2>> probes,
                           const SolveConfig& config, const ScanOptions& scan_opts = {});

}  // namespace sqmat
