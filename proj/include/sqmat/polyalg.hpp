#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace sqmat {

using Complex = std::complex<double>;

/// Phase-space state (x, p_x, y, p_y).
using State = std::array<double, 4>;

/// Dense graded monomial basis for polynomials in n_vars variables truncated
/// at a maximum total degree. Monomials are ordered by total degree from low
/// to high; within a degree block exponent tuples run in descending
/// lexicographic order (the first variable's power starts at the block degree
/// and decreases, the remaining variables recursively follow the same rule).
/// The constant monomial is excluded unless with_constant is set.
class BasisLayout {
public:
  BasisLayout() = default;
  BasisLayout(int n_vars, int max_degree, bool with_constant = false);

  int n_vars() const { return n_vars_; }
  int max_degree() const { return max_degree_; }
  bool with_constant() const { return with_constant_; }
  int dimension() const { return static_cast<int>(exps_.size()) / std::max(n_vars_, 1); }

  /// First position of the given degree block.
  int block_offset(int degree) const { return offsets_[degree]; }
  int block_size(int degree) const { return offsets_[degree + 1] - offsets_[degree]; }

  /// Flat position of an exponent tuple. Throws std::out_of_range if the
  /// total degree exceeds max_degree (or is 0 without the constant).
  int index_of(std::span<const int> exponents) const;

  /// Exponent tuple at a flat position (n_vars entries).
  std::span<const std::uint8_t> exponents_of(int position) const {
    return {exps_.data() + static_cast<std::size_t>(position) * n_vars_,
            static_cast<std::size_t>(n_vars_)};
  }
  int degree_of(int position) const { return degree_[position]; }

  bool operator==(const BasisLayout& other) const {
    return n_vars_ == other.n_vars_ && max_degree_ == other.max_degree_ &&
           with_constant_ == other.with_constant_;
  }

private:
  int n_vars_ = 0;
  int max_degree_ = 0;
  bool with_constant_ = false;
  std::vector<int> offsets_;        // max_degree + 2 entries
  std::vector<std::uint8_t> exps_;  // dimension * n_vars
  std::vector<std::uint8_t> degree_;
};

/// Number of monomials of total degree <= max_degree in n_vars variables,
/// excluding the constant (add 1 for the layout with constant).
long basis_dimension(int n_vars, int max_degree);

/// Complex-coefficient polynomial truncated at the layout's maximum degree.
/// Values are immutable in spirit: all operations return new polynomials.
class TruncPoly {
public:
  TruncPoly() = default;
  explicit TruncPoly(BasisLayout layout)
      : layout_(std::move(layout)), coeffs_(layout_.dimension(), Complex{0.0, 0.0}) {}

  static TruncPoly monomial(const BasisLayout& layout, std::span<const int> exponents,
                            Complex c = Complex{1.0, 0.0});
  static TruncPoly constant(const BasisLayout& layout, Complex c);

  const BasisLayout& layout() const { return layout_; }
  std::span<const Complex> coeffs() const { return coeffs_; }
  std::span<Complex> coeffs() { return coeffs_; }
  Complex operator[](int pos) const { return coeffs_[pos]; }
  Complex& operator[](int pos) { return coeffs_[pos]; }

  /// Coefficient of an exponent tuple; 0 for monomials outside the basis.
  Complex coeff(std::span<const int> exponents) const;
  void set_coeff(std::span<const int> exponents, Complex c);

  bool is_zero(double tol = 0.0) const;
  double norm() const;  // l2 norm of the coefficient vector

  TruncPoly& operator+=(const TruncPoly& other);
  TruncPoly& operator-=(const TruncPoly& other);
  TruncPoly& operator*=(Complex scale);

private:
  BasisLayout layout_;
  std::vector<Complex> coeffs_;
};

TruncPoly operator+(TruncPoly a, const TruncPoly& b);
TruncPoly operator-(TruncPoly a, const TruncPoly& b);
TruncPoly operator*(TruncPoly p, Complex scale);

/// Exact product with all monomials of degree > max_degree discarded.
/// Throws std::invalid_argument on layout mismatch.
TruncPoly mul_trunc(const TruncPoly& a, const TruncPoly& b);

/// Term-wise partial derivative with respect to variable `var`.
TruncPoly partial_derivative(const TruncPoly& p, int var);

/// All monomial values at a point, in basis order.
std::vector<Complex> monomial_values(const BasisLayout& layout,
                                     std::span<const Complex> point);

Complex evaluate(const TruncPoly& p, std::span<const Complex> point);

/// Dot product of a polynomial's coefficients with precomputed monomial
/// values (the fast path when many polynomials share one evaluation point).
Complex dot(const TruncPoly& p, std::span<const Complex> mono_vals);

/// Coefficient-conjugated polynomial with variables permuted by swap_map,
/// so that conj(p(z)) == result(z) whenever z obeys z[swap_map[k]] == conj(z[k]).
TruncPoly conjugate_swapped(const TruncPoly& p, std::span<const int> swap_map);

/// Copy into a layout with higher max degree (and/or a constant slot).
TruncPoly embed(const TruncPoly& p, const BasisLayout& target);

/// Substitute each variable by a polynomial of degree <= 1 (no constant part
/// required). Result lives in `target`.
TruncPoly substitute_linear(const TruncPoly& p, std::span<const TruncPoly> subs,
                            const BasisLayout& target);

/// Resonance variables (z_x, z_x*, z_y, z_y*) from a real state:
/// z_x = x - i p_x, z_y = y - i p_y.
std::array<Complex, 4> to_resonance(const State& s);

/// Inverse map; throws std::runtime_error if the conjugate pairs are
/// inconsistent beyond `tol` (relative to the state magnitude).
State from_resonance(const std::array<Complex, 4>& z, double tol = 1e-9);

/// Variable permutation realizing complex conjugation on the resonance
/// variables: z_x <-> z_x*, z_y <-> z_y*.
inline constexpr std::array<int, 4> kResonanceConjSwap = {1, 0, 3, 2};

}  // namespace sqmat
