#pragma once

#include <vector>

#include "sqmat/torusmap.hpp"

namespace sqmat {

/// Hermitian Gram matrices of the chain-row tables with the main line of
/// each action excluded: (F1)_jk = sum_{(n,m) != (1,0)} conj(w_jnm) w_knm,
/// (F2)_jk likewise without (0,1).
struct GramPair {
  int n_v = 0;
  std::vector<Complex> F1, F2;  // n_v x n_v, row-major
};

GramPair gram_pair(std::span<const FourierTable> tables);

/// Residual fluctuation of a set of combination coefficients: g0 is the
/// summed squared magnitude of all normalized-action lines except the main
/// lines (1,0) and (0,1).
struct FluctuationReport {
  double g0 = 0.0;
  FourierTable v1_lines, v2_lines;       // the full action tables
  std::array<double, 2> main_abs{};      // |v_l main line|
  std::array<double, 2> max_side_abs{};  // largest off-main |line|
  std::array<int, 2> side_n{}, side_m{};

  double side_ratio(int l) const { return max_side_abs[l] / main_abs[l]; }
};

/// v-tables and g0 for given coefficients a (2 x n_v, row-major).
FluctuationReport fluctuation_of(std::span<const FourierTable> tables,
                                 std::span<const Complex> a);

struct MinimizeOptions {
  double jitter = 1e-14;          // diagonal regularization on near-singularity
  double max_condition = 1e12;    // hard failure past this
  int top_k_lines = 0;            // 0 = use the full window in the Gram sums
};

/// Constrained least squares for the combination coefficients:
/// a_{1k} = sum_j (F1^-1)_{kj} conj(w_j10) / (sum_{m,j} w_m10 (F1^-1)_{mj} conj(w_j10)),
/// and the (0,1)/F2 analogue, which minimizes g0 subject to v~_110 = 1,
/// v~_201 = 1. Throws std::runtime_error on a rank-deficient Gram system.
std::pair<std::vector<Complex>, FluctuationReport> minimize_fluctuation(
    std::span<const FourierTable> tables, const MinimizeOptions& opts = {});

/// Small-amplitude bootstrap: evaluates w_x0..w_x2, w_y0..w_y2 at state0 and
/// solves the 2x2 generalized eigenproblem
///   [[w_x0, w_y0], [w_x1, w_y1]]^-1 [[w_x1, w_y1], [w_x2, w_y2]] A = i phi A,
/// giving two coefficient rows and frequencies omega_l = mu + Re(phi_l).
/// Rows are ordered so the first is the w_x0-dominant action. The returned
/// combination uses n_v = 2 (rows w_x0, w_y0) and is anchored at state0.
Combination initial_combination(const ChainPair& chains, const State& state0, double mu);

/// Eigenpair residual of the bootstrap problem at state0 (for verification):
/// max_l ||(P^-1 Q - i phi_l) A_l||.
double bootstrap_residual(const ChainPair& chains, const State& state0, double mu);

}  // namespace sqmat
