#include "sqmat/polyalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sqmat {

namespace {

// Number of monomials of exact degree `deg` in `nv` variables: C(deg+nv-1, nv-1).
long block_count(int nv, int deg) {
  long num = 1;
  for (int i = 1; i < nv; ++i) num = num * (deg + i) / i;
  return num;
}

}  // namespace

long basis_dimension(int n_vars, int max_degree) {
  if (n_vars < 1 || max_degree < 1)
    throw std::invalid_argument("basis_dimension: need n_vars >= 1 and max_degree >= 1");
  long total = 1;  // C(max_degree + n_vars, n_vars), counted incl. constant
  for (int i = 1; i <= n_vars; ++i) total = total * (max_degree + i) / i;
  return total - 1;
}

BasisLayout::BasisLayout(int n_vars, int max_degree, bool with_constant)
    : n_vars_(n_vars), max_degree_(max_degree), with_constant_(with_constant) {
  if (n_vars < 1 || max_degree < 1)
    throw std::invalid_argument("BasisLayout: need n_vars >= 1 and max_degree >= 1");
  offsets_.assign(max_degree + 2, 0);
  int pos = with_constant ? 1 : 0;
  offsets_[0] = 0;
  offsets_[1] = pos;
  const long dim = basis_dimension(n_vars, max_degree) + (with_constant ? 1 : 0);
  exps_.reserve(dim * n_vars);
  degree_.reserve(dim);
  if (with_constant) {
    exps_.insert(exps_.end(), n_vars, 0);
    degree_.push_back(0);
  }
  // Enumerate each degree block in descending lexicographic exponent order.
  std::vector<int> e(n_vars, 0);
  for (int deg = 1; deg <= max_degree; ++deg) {
    auto emit = [&](auto&& self, int var, int remaining) -> void {
      if (var == n_vars - 1) {
        e[var] = remaining;
        for (int v = 0; v < n_vars; ++v) exps_.push_back(static_cast<std::uint8_t>(e[v]));
        degree_.push_back(static_cast<std::uint8_t>(deg));
        ++pos;
        return;
      }
      for (int p = remaining; p >= 0; --p) {
        e[var] = p;
        self(self, var + 1, remaining - p);
      }
    };
    emit(emit, 0, deg);
    offsets_[deg + 1] = pos;
  }
}

int BasisLayout::index_of(std::span<const int> exponents) const {
  if (static_cast<int>(exponents.size()) != n_vars_)
    throw std::invalid_argument("index_of: wrong exponent count");
  int deg = 0;
  for (int e : exponents) {
    if (e < 0) throw std::out_of_range("index_of: negative exponent");
    deg += e;
  }
  if (deg > max_degree_) throw std::out_of_range("index_of: degree exceeds basis truncation");
  if (deg == 0) {
    if (!with_constant_) throw std::out_of_range("index_of: constant monomial not in basis");
    return 0;
  }
  // Rank within the degree block: count tuples that precede (descending lex).
  long rank = 0;
  int remaining = deg;
  for (int v = 0; v + 1 < n_vars_; ++v) {
    for (int p = remaining; p > exponents[v]; --p)
      rank += block_count(n_vars_ - 1 - v, remaining - p);
    remaining -= exponents[v];
  }
  return offsets_[deg] + static_cast<int>(rank);
}

TruncPoly TruncPoly::monomial(const BasisLayout& layout, std::span<const int> exponents,
                              Complex c) {
  TruncPoly p(layout);
  p.coeffs_[layout.index_of(exponents)] = c;
  return p;
}

TruncPoly TruncPoly::constant(const BasisLayout& layout, Complex c) {
  if (!layout.with_constant())
    throw std::invalid_argument("TruncPoly::constant: layout has no constant slot");
  TruncPoly p(layout);
  p.coeffs_[0] = c;
  return p;
}

Complex TruncPoly::coeff(std::span<const int> exponents) const {
  int deg = 0;
  for (int e : exponents) deg += e;
  if (deg > layout_.max_degree() || (deg == 0 && !layout_.with_constant()))
    return Complex{0.0, 0.0};
  return coeffs_[layout_.index_of(exponents)];
}

void TruncPoly::set_coeff(std::span<const int> exponents, Complex c) {
  coeffs_[layout_.index_of(exponents)] = c;
}

bool TruncPoly::is_zero(double tol) const {
  for (const Complex& c : coeffs_)
    if (std::abs(c) > tol) return false;
  return true;
}

double TruncPoly::norm() const {
  double s = 0.0;
  for (const Complex& c : coeffs_) s += std::norm(c);
  return std::sqrt(s);
}

TruncPoly& TruncPoly::operator+=(const TruncPoly& other) {
  if (!(layout_ == other.layout_)) throw std::invalid_argument("TruncPoly+=: layout mismatch");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
  return *this;
}

TruncPoly& TruncPoly::operator-=(const TruncPoly& other) {
  if (!(layout_ == other.layout_)) throw std::invalid_argument("TruncPoly-=: layout mismatch");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
  return *this;
}

TruncPoly& TruncPoly::operator*=(Complex scale) {
  for (Complex& c : coeffs_) c *= scale;
  return *this;
}

TruncPoly operator+(TruncPoly a, const TruncPoly& b) { return a += b; }
TruncPoly operator-(TruncPoly a, const TruncPoly& b) { return a -= b; }
TruncPoly operator*(TruncPoly p, Complex scale) { return p *= scale; }

TruncPoly mul_trunc(const TruncPoly& a, const TruncPoly& b) {
  const BasisLayout& L = a.layout();
  if (!(L == b.layout())) throw std::invalid_argument("mul_trunc: layout mismatch");
  TruncPoly out(L);
  const int nv = L.n_vars();
  const int ns = L.max_degree();
  const int dim = L.dimension();
  std::vector<int> sum(nv);
  for (int i = 0; i < dim; ++i) {
    const Complex ai = a[i];
    if (ai == Complex{0.0, 0.0}) continue;
    const int di = L.degree_of(i);
    auto ei = L.exponents_of(i);
    for (int j = 0; j < dim; ++j) {
      if (di + L.degree_of(j) > ns) break;  // degrees ascend with position
      const Complex bj = b[j];
      if (bj == Complex{0.0, 0.0}) continue;
      auto ej = L.exponents_of(j);
      for (int v = 0; v < nv; ++v) sum[v] = ei[v] + ej[v];
      out[L.index_of(sum)] += ai * bj;
    }
  }
  return out;
}

TruncPoly partial_derivative(const TruncPoly& p, int var) {
  const BasisLayout& L = p.layout();
  if (var < 0 || var >= L.n_vars()) throw std::invalid_argument("partial_derivative: bad var");
  // The derivative of a degree-1 term is a constant, so the result always
  // lives in the constant-including layout of the same truncation.
  const BasisLayout out_layout =
      L.with_constant() ? L : BasisLayout(L.n_vars(), L.max_degree(), true);
  TruncPoly out(out_layout);
  const int dim = L.dimension();
  std::vector<int> e(L.n_vars());
  for (int i = 0; i < dim; ++i) {
    if (p[i] == Complex{0.0, 0.0}) continue;
    auto ei = L.exponents_of(i);
    if (ei[var] == 0) continue;
    for (int v = 0; v < L.n_vars(); ++v) e[v] = ei[v];
    e[var] -= 1;
    out[out_layout.index_of(e)] += static_cast<double>(ei[var]) * p[i];
  }
  return out;
}

std::vector<Complex> monomial_values(const BasisLayout& layout,
                                     std::span<const Complex> point) {
  if (static_cast<int>(point.size()) != layout.n_vars())
    throw std::invalid_argument("monomial_values: wrong point size");
  const int nv = layout.n_vars();
  const int ns = layout.max_degree();
  // Power tables per variable.
  std::vector<Complex> pw(static_cast<std::size_t>(nv) * (ns + 1));
  for (int v = 0; v < nv; ++v) {
    pw[v * (ns + 1)] = Complex{1.0, 0.0};
    for (int e = 1; e <= ns; ++e) pw[v * (ns + 1) + e] = pw[v * (ns + 1) + e - 1] * point[v];
  }
  const int dim = layout.dimension();
  std::vector<Complex> vals(dim);
  for (int i = 0; i < dim; ++i) {
    auto e = layout.exponents_of(i);
    Complex m{1.0, 0.0};
    for (int v = 0; v < nv; ++v)
      if (e[v] != 0) m *= pw[v * (ns + 1) + e[v]];
    vals[i] = m;
  }
  return vals;
}

Complex evaluate(const TruncPoly& p, std::span<const Complex> point) {
  const BasisLayout& L = p.layout();
  const int nv = L.n_vars();
  const int ns = L.max_degree();
  std::vector<Complex> pw(static_cast<std::size_t>(nv) * (ns + 1));
  for (int v = 0; v < nv; ++v) {
    pw[v * (ns + 1)] = Complex{1.0, 0.0};
    for (int e = 1; e <= ns; ++e) pw[v * (ns + 1) + e] = pw[v * (ns + 1) + e - 1] * point[v];
  }
  Complex acc{0.0, 0.0};
  const int dim = L.dimension();
  for (int i = 0; i < dim; ++i) {
    const Complex c = p[i];
    if (c == Complex{0.0, 0.0}) continue;
    auto e = L.exponents_of(i);
    Complex m = c;
    for (int v = 0; v < nv; ++v)
      if (e[v] != 0) m *= pw[v * (ns + 1) + e[v]];
    acc += m;
  }
  return acc;
}

Complex dot(const TruncPoly& p, std::span<const Complex> mono_vals) {
  Complex acc{0.0, 0.0};
  const int dim = p.layout().dimension();
  for (int i = 0; i < dim; ++i) {
    const Complex c = p[i];
    if (c != Complex{0.0, 0.0}) acc += c * mono_vals[i];
  }
  return acc;
}

TruncPoly conjugate_swapped(const TruncPoly& p, std::span<const int> swap_map) {
  const BasisLayout& L = p.layout();
  if (static_cast<int>(swap_map.size()) != L.n_vars())
    throw std::invalid_argument("conjugate_swapped: wrong swap map size");
  TruncPoly out(L);
  const int nv = L.n_vars();
  std::vector<int> e(nv);
  for (int i = 0; i < L.dimension(); ++i) {
    if (p[i] == Complex{0.0, 0.0}) continue;
    auto ei = L.exponents_of(i);
    for (int v = 0; v < nv; ++v) e[swap_map[v]] = ei[v];
    out[L.index_of(e)] += std::conj(p[i]);
  }
  return out;
}

TruncPoly embed(const TruncPoly& p, const BasisLayout& target) {
  const BasisLayout& L = p.layout();
  if (target.n_vars() != L.n_vars() || target.max_degree() < L.max_degree() ||
      (L.with_constant() && !target.with_constant()))
    throw std::invalid_argument("embed: target layout cannot hold the polynomial");
  TruncPoly out(target);
  std::vector<int> e(L.n_vars());
  for (int i = 0; i < L.dimension(); ++i) {
    if (p[i] == Complex{0.0, 0.0}) continue;
    auto ei = L.exponents_of(i);
    for (int v = 0; v < L.n_vars(); ++v) e[v] = ei[v];
    out[target.index_of(e)] = p[i];
  }
  return out;
}

TruncPoly substitute_linear(const TruncPoly& p, std::span<const TruncPoly> subs,
                            const BasisLayout& target) {
  const BasisLayout& L = p.layout();
  if (static_cast<int>(subs.size()) != L.n_vars())
    throw std::invalid_argument("substitute_linear: wrong substitution count");
  // Cached powers of each substitution polynomial.
  const int ns = target.max_degree();
  std::vector<std::vector<TruncPoly>> pw(L.n_vars());
  auto power = [&](int v, int e) -> const TruncPoly& {
    auto& cache = pw[v];
    if (cache.empty()) {
      if (!target.with_constant())
        throw std::invalid_argument("substitute_linear: target layout needs a constant slot");
      cache.push_back(TruncPoly::constant(target, Complex{1.0, 0.0}));
      cache.push_back(subs[v]);
    }
    while (static_cast<int>(cache.size()) <= e)
      cache.push_back(mul_trunc(cache.back(), subs[v]));
    return cache[e];
  };
  TruncPoly out(target);
  std::vector<int> e(L.n_vars());
  for (int i = 0; i < L.dimension(); ++i) {
    if (p[i] == Complex{0.0, 0.0}) continue;
    if (L.degree_of(i) > ns) break;
    auto ei = L.exponents_of(i);
    TruncPoly term = TruncPoly::constant(target, p[i]);
    for (int v = 0; v < L.n_vars(); ++v)
      if (ei[v] != 0) term = mul_trunc(term, power(v, ei[v]));
    out += term;
  }
  return out;
}

std::array<Complex, 4> to_resonance(const State& s) {
  const Complex i{0.0, 1.0};
  return {Complex{s[0], 0.0} - i * s[1], Complex{s[0], 0.0} + i * s[1],
          Complex{s[2], 0.0} - i * s[3], Complex{s[2], 0.0} + i * s[3]};
}

State from_resonance(const std::array<Complex, 4>& z, double tol) {
  double scale = 0.0;
  for (const Complex& c : z) scale = std::max(scale, std::abs(c));
  const double bound = tol * std::max(scale, 1.0);
  if (std::abs(z[1] - std::conj(z[0])) > bound || std::abs(z[3] - std::conj(z[2])) > bound)
    throw std::runtime_error("from_resonance: conjugate pair inconsistency");
  return {z[0].real(), -z[0].imag(), z[2].real(), -z[2].imag()};
}

}  // namespace sqmat
