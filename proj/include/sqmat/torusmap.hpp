#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sqmat/sqmatrix.hpp"

namespace sqmat {

/// Execution policy for the data-parallel kernels. Every parallel kernel has
/// a serial twin with identical output (node results are written to disjoint
/// slots and reductions run in a fixed order), so `serial` doubles as the
/// reference implementation for tests and benchmarks.
enum class Exec { serial, parallel };

/// Truncated 2-D Fourier table: coefficients for e^{i n theta1 + i m theta2}
/// with |n| <= wn, |m| <= wm.
class FourierTable {
public:
  FourierTable() = default;
  FourierTable(int wn, int wm)
      : wn_(wn), wm_(wm), data_((2 * wn + 1) * (2 * wm + 1), Complex{0.0, 0.0}) {}

  int wn() const { return wn_; }
  int wm() const { return wm_; }
  bool contains(int n, int m) const {
    return n >= -wn_ && n <= wn_ && m >= -wm_ && m <= wm_;
  }
  Complex at(int n, int m) const { return data_[idx(n, m)]; }
  Complex& at(int n, int m) { return data_[idx(n, m)]; }

  /// Sum of |coeff|^2 over all lines except (n0, m0).
  double power_except(int n0, int m0) const;

  /// Largest |coeff| over lines other than (n0, m0); reports the line.
  double max_side_line(int n0, int m0, int* n_out = nullptr, int* m_out = nullptr) const;

  std::span<const Complex> raw() const { return data_; }
  std::span<Complex> raw() { return data_; }

private:
  int idx(int n, int m) const {
    if (!contains(n, m)) throw std::out_of_range("FourierTable: line outside window");
    return (n + wn_) * (2 * wm_ + 1) + (m + wm_);
  }
  int wn_ = 0, wm_ = 0;
  std::vector<Complex> data_;
};

/// The current action-angle approximation: linear combination coefficients
/// a_{lj} over the chain rows in use, radii, frequencies and initial phases.
/// The combined action polynomials and their z-derivatives are precomputed.
struct Combination {
  int n_v = 2;
  std::vector<Complex> a;       // 2 x n_v, row-major
  std::vector<TruncPoly> rows;  // w_x0, w_y0 [, w_x1, w_y1]
  std::array<double, 2> r{1.0, 1.0};
  std::array<double, 2> omega{0.0, 0.0};
  std::array<double, 2> theta0{0.0, 0.0};
  double mu = 0.0;

  std::array<TruncPoly, 2> v_poly;                  // constant-slot layout
  std::array<std::array<TruncPoly, 4>, 2> v_dz;     // d v_l / d z_q

  Complex a_at(int l, int j) const { return a[l * n_v + j]; }

  /// (v1, v2) at a phase-space state.
  std::array<Complex, 2> action_values(const State& s) const;

  /// Values plus the complex Jacobian d v_l / d(x, p_x, y, p_y).
  void action_and_jacobian(const State& s, std::array<Complex, 2>& v,
                           std::array<std::array<Complex, 4>, 2>& J) const;
};

/// Builds a Combination from chain rows and coefficients (r, omega, theta0
/// are left for the caller / anchor()).
Combination make_combination(std::vector<TruncPoly> rows, std::vector<Complex> a, double mu);

/// Sets r_l and theta_l0 from v_l(state0) = r_l e^{i theta_l0}.
void anchor(Combination& comb, const State& state0);

struct InversionFailure : std::runtime_error {
  InversionFailure(const std::string& msg, double res, int ni = -1, int nj = -1)
      : std::runtime_error(msg), residual(res), node_i(ni), node_j(nj) {}
  double residual;
  int node_i, node_j;
};

struct InvertOptions {
  int max_iter = 50;
  double tol = 1e-11;  // absolute on |v - target|
};

/// Newton inversion of the action map: finds the state with
/// v_l(state) = target_l, seeded from seed. Damped steps (halving on residual
/// increase); throws InversionFailure on stagnation or a singular Jacobian.
State invert_actions(const Combination& comb, Complex v1_target, Complex v2_target,
                     const State& seed, const InvertOptions& opts = {});

/// Uniform phase grid over [0, 2pi)^2 with per-node states and the values of
/// the four tracked chain rows.
struct TorusGrid {
  int N1 = 0, N2 = 0;
  std::vector<State> states;                 // node (i, j) at i*N2 + j
  std::array<std::vector<Complex>, 4> w;     // w_x0, w_y0, w_x1, w_y1 per node

  int idx(int i, int j) const { return i * N2 + j; }
  double theta1(int i) const;
  double theta2(int j) const;
};

struct SampleOptions {
  std::optional<State> seed_state;   // anchor for the cold start
  const TorusGrid* warm = nullptr;   // per-node seeds from a previous grid
  Exec exec = Exec::parallel;
  bool theta2_major = false;         // sweep the theta2 axis first instead
  InvertOptions invert;
};

/// Solves v_l(state) = r_l e^{i theta_l} at every grid node. Cold start:
/// continue from seed_state to node (0,0), sweep one axis serially, then the
/// perpendicular sweeps are independent (parallelizable) with fixed per-node
/// seeding, so the result does not depend on the schedule.
TorusGrid sample_torus(const Combination& comb, const ChainPair& chains, int N1, int N2,
                       const SampleOptions& opts = {});

/// (Re)computes the chain-row payload of a grid from its states.
void fill_chain_values(TorusGrid& grid, const ChainPair& chains, Exec exec = Exec::parallel);

/// Forward 2-D DFT of grid samples, normalized so a pure e^{i(n theta1 + m
/// theta2)} sample yields coefficient 1 at (n, m). The window is clipped
/// below the grid Nyquist.
FourierTable fourier2d(std::span<const Complex> samples, int N1, int N2, int wn, int wm,
                       Exec exec = Exec::parallel);

/// Evaluates the truncated series at arbitrary phases.
Complex synthesize(const FourierTable& table, double theta1, double theta2);

/// CSV dump: n, m, re, im, abs, frequency n*omega1 + m*omega2.
std::string fourier_csv(const FourierTable& table, double omega1, double omega2,
                        double min_abs = 0.0);

}  // namespace sqmat
