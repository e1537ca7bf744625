#pragma once

#include <string>
#include <vector>

#include "sqmat/dynamics.hpp"
#include "sqmat/polyalg.hpp"

namespace sqmat {

/// Dense representation of the linear map Zdot = M Z on the graded monomial
/// basis (no constant). With the graded ordering M is upper-triangular: a row
/// of degree d has entries only in columns of degree >= d, and within each
/// degree block only on the diagonal, with value i(e1-e2) mu_x + i(e3-e4) mu_y.
class SquareMatrix {
public:
  SquareMatrix(BasisLayout layout, double mu_x, double mu_y)
      : layout_(std::move(layout)),
        mu_x_(mu_x),
        mu_y_(mu_y),
        entries_(static_cast<std::size_t>(layout_.dimension()) * layout_.dimension()) {}

  const BasisLayout& layout() const { return layout_; }
  int dimension() const { return layout_.dimension(); }
  double mu_x() const { return mu_x_; }
  double mu_y() const { return mu_y_; }

  Complex operator()(int row, int col) const {
    return entries_[static_cast<std::size_t>(row) * dimension() + col];
  }
  Complex& operator()(int row, int col) {
    return entries_[static_cast<std::size_t>(row) * dimension() + col];
  }

  /// Left action u M of a covector (given as basis coefficients).
  std::vector<Complex> left_apply(std::span<const Complex> u) const;

private:
  BasisLayout layout_;
  double mu_x_, mu_y_;
  std::vector<Complex> entries_;
};

/// Row for monomial m is the truncated expansion of d(m)/dt by the product
/// rule applied to the model's resonance-variable field.
SquareMatrix build_square_matrix(const ModelSpec& model, int n_s);

/// Left Jordan chain for eigenvalue i*mu: rows u_0..u_{k-1} with
/// u_j M = i mu u_j + u_{j+1} and u_{k-1} M = i mu u_{k-1}. Rows double as
/// the polynomials w_j = u_j Z.
struct JordanChain {
  Complex eigenvalue{0.0, 0.0};
  std::vector<TruncPoly> rows;

  int length() const { return static_cast<int>(rows.size()); }
  const TruncPoly& w(int j) const { return rows[j]; }
};

struct ChainPair {
  JordanChain x;  // lead row's degree-1 part is z_x
  JordanChain y;  // lead row's degree-1 part is z_y
};

/// The two longest chains with eigenvalue i*mu, gauge-fixed: every resonant
/// monomial coefficient of the lead row is zero except the pure degree-1
/// term, which is normalized to 1 (this pins the freedom the chain relations
/// leave, and in particular zeroes the z_x (z_x z_x*)^a (z_y z_y*)^b and
/// z_y (...)^a (...)^b coefficients). Throws std::runtime_error naming the
/// degree block if the back-substitution hits a genuine defect.
ChainPair jordan_chains(const SquareMatrix& M, double mu);

/// All chains of the eigenvalue's invariant subspace (a full Jordan basis):
/// the two longest chains plus shorter ones led from higher-degree resonant
/// monomials chosen complementary to the longer chains' rows.
std::vector<JordanChain> all_jordan_chains(const SquareMatrix& M, double mu);

/// i*mu*u_j + u_{j+1} as a polynomial: the Jordan-approximate time derivative
/// of w_j (the last row maps to i*mu*u_{k-1}).
TruncPoly chain_time_derivative(const JordanChain& chain, int j);

/// Worst relative residual of the chain relations under M.
double chain_residual(const SquareMatrix& M, const JordanChain& chain);

/// Re-derives the gauged chain determined by the lead row's degree-1 part;
/// idempotent on already gauged chains.
JordanChain gauge_fix(const SquareMatrix& M, const JordanChain& chain);

/// CSV dump (row, col, re, im) of nonzero entries.
std::string matrix_csv(const SquareMatrix& M);
std::string chain_csv(const JordanChain& chain);

}  // namespace sqmat
