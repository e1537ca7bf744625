#pragma once

#include <vector>

#include "sqmat/perturbation.hpp"

namespace sqmat {

/// The converged first-order relation packaged as a state-space invariant:
/// theta tables plus the combination whose rigid rotation produced them.
struct KamInvariant {
  ThetaTables theta;
  Combination comb;

  /// Unit-normalized actions v_l(state) / r_l.
  std::array<Complex, 2> normalized_actions(const State& s) const;
};

/// Exponential-form first-order actions at given phases:
/// vbar_l = e^{i theta_l} exp(i sum theta_lnm e^{i n theta1} e^{i m theta2}).
/// Agrees with the linearized series to O(theta^2).
std::array<Complex, 2> forward_transform(const ThetaTables& theta, double theta1,
                                         double theta2);

/// The Laurent-exponential invariants:
/// vbar0_l = vbar_l(state) exp(-i sum theta_lnm vbar1^n vbar2^m), with
/// negative powers as reciprocals of the unit-normalized actions. Throws
/// std::domain_error when |vbar_l| is too small for the Laurent terms.
std::array<Complex, 2> kam_values(const KamInvariant& inv, const State& s,
                                  double min_abs = 1e-6);

/// Radius fluctuation std(|f|)/mean(|f|) of a sampled complex series.
double radius_fluctuation(std::span<const Complex> values);

struct TaylorComparison {
  std::vector<int> orders;
  std::vector<double> fluctuation;   // per order, on the given orbit states
  double exponential_form = 0.0;     // fluctuation of the exact kam_values
};

/// Expands the invariant vbar02 = vbar2 (1 - i sum theta_2nm vbar1^n vbar2^m)
/// as a truncated power series of the phase-space variables at each given
/// total order (negative action powers become conjugate powers, exact on the
/// unit torus) and measures the radius fluctuation on the orbit states. The
/// exact exponential form's fluctuation is returned alongside for reference.
TaylorComparison taylor_compare(const KamInvariant& inv, std::span<const State> orbit,
                                std::span<const int> orders);

}  // namespace sqmat
