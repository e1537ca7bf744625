#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <complex>
#include <random>
#include <vector>

#include "sqmat/polyalg.hpp"

using namespace sqmat;
using std::complex;

namespace {

TruncPoly random_poly(const BasisLayout& L, int max_deg, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TruncPoly p(L);
  for (int i = 0; i < L.dimension(); ++i)
    if (L.degree_of(i) <= max_deg) p[i] = Complex{u(rng), u(rng)};
  return p;
}

std::array<Complex, 4> random_point(std::mt19937& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {Complex{u(rng), u(rng)}, Complex{u(rng), u(rng)}, Complex{u(rng), u(rng)},
          Complex{u(rng), u(rng)}};
}

}  // namespace

TEST_CASE("basis dimensions") {
  CHECK(basis_dimension(4, 3) == 34);
  CHECK(basis_dimension(4, 5) == 125);
  CHECK(basis_dimension(4, 1) == 4);
  // closed form for 4 variables
  for (int ns = 1; ns <= 9; ++ns) {
    long expect = (long)(ns + 1) * (ns + 2) * (ns + 3) * (ns + 4) / 24 - 1;
    CHECK(basis_dimension(4, ns) == expect);
    CHECK(BasisLayout(4, ns).dimension() == expect);
    CHECK(BasisLayout(4, ns, true).dimension() == expect + 1);
  }
  // per-degree block sizes (k+1)(k+2)(k+3)/6
  BasisLayout L(4, 5);
  for (int k = 1; k <= 5; ++k) CHECK(L.block_size(k) == (k + 1) * (k + 2) * (k + 3) / 6);
  CHECK_THROWS(basis_dimension(4, 0));
}

TEST_CASE("monomial ordering matches the degree-3 listing") {
  BasisLayout L(4, 3);
  // z_x, z_x*, z_y, z_y*, z_x^2, z_x z_x*, z_x z_y, z_x z_y*, z_x*^2,
  // z_x* z_y, z_x* z_y*, z_y^2, z_y z_y*, z_y*^2, z_x^3, z_x^2 z_x*, ...
  const std::vector<std::array<int, 4>> listing = {
      {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1},
      {2, 0, 0, 0}, {1, 1, 0, 0}, {1, 0, 1, 0}, {1, 0, 0, 1},
      {0, 2, 0, 0}, {0, 1, 1, 0}, {0, 1, 0, 1}, {0, 0, 2, 0},
      {0, 0, 1, 1}, {0, 0, 0, 2}, {3, 0, 0, 0}, {2, 1, 0, 0}};
  for (std::size_t i = 0; i < listing.size(); ++i)
    CHECK(L.index_of(listing[i]) == (int)i);
  // last monomial of the basis is z_y*^3
  auto e = L.exponents_of(33);
  CHECK(e[0] == 0);
  CHECK(e[1] == 0);
  CHECK(e[2] == 0);
  CHECK(e[3] == 3);
}

TEST_CASE("index_of and exponents_of are mutually inverse") {
  BasisLayout L(4, 3);
  for (int pos = 0; pos < 34; ++pos) {
    auto e = L.exponents_of(pos);
    std::array<int, 4> ei{e[0], e[1], e[2], e[3]};
    CHECK(L.index_of(ei) == pos);
  }
  CHECK_THROWS_AS(L.index_of(std::array<int, 4>{4, 0, 0, 0}), std::out_of_range);
  CHECK_THROWS_AS(L.index_of(std::array<int, 4>{0, 0, 0, 0}), std::out_of_range);
}

TEST_CASE("mul_trunc basics") {
  BasisLayout Lc(4, 5, true);
  std::mt19937 rng(7);
  TruncPoly one = TruncPoly::constant(Lc, 1.0);
  TruncPoly p = random_poly(Lc, 5, rng);
  TruncPoly q = mul_trunc(one, p);
  CHECK((q - p).norm() == doctest::Approx(0.0));

  BasisLayout L(4, 5);
  TruncPoly zx = TruncPoly::monomial(L, std::array<int, 4>{1, 0, 0, 0});
  TruncPoly zx2 = mul_trunc(zx, zx);
  CHECK(zx2.coeff(std::array<int, 4>{2, 0, 0, 0}) == Complex{1.0, 0.0});
  CHECK(zx2.norm() == doctest::Approx(1.0));

  TruncPoly zx3 = TruncPoly::monomial(L, std::array<int, 4>{3, 0, 0, 0});
  CHECK(mul_trunc(zx3, zx3).is_zero());

  BasisLayout other(4, 4);
  TruncPoly r(other);
  CHECK_THROWS_AS(mul_trunc(zx, r), std::invalid_argument);
}

TEST_CASE("mul_trunc is commutative and associative under the degree budget") {
  BasisLayout L(4, 6);
  std::mt19937 rng(11);
  TruncPoly a = random_poly(L, 2, rng);
  TruncPoly b = random_poly(L, 2, rng);
  TruncPoly c = random_poly(L, 2, rng);
  CHECK((mul_trunc(a, b) - mul_trunc(b, a)).norm() < 1e-14);
  TruncPoly ab_c = mul_trunc(mul_trunc(a, b), c);
  TruncPoly a_bc = mul_trunc(a, mul_trunc(b, c));
  CHECK((ab_c - a_bc).norm() / ab_c.norm() < 1e-14);
}

TEST_CASE("partial derivative") {
  BasisLayout L(4, 5);
  TruncPoly zx2 = TruncPoly::monomial(L, std::array<int, 4>{2, 0, 0, 0});
  TruncPoly d = partial_derivative(zx2, 0);
  CHECK(d.coeff(std::array<int, 4>{1, 0, 0, 0}) == Complex{2.0, 0.0});
  CHECK(d.norm() == doctest::Approx(2.0));

  TruncPoly zy = TruncPoly::monomial(L, std::array<int, 4>{0, 0, 1, 0});
  CHECK(partial_derivative(zy, 0).is_zero());
}

TEST_CASE("partial derivative agrees with central differences") {
  BasisLayout L(4, 5);
  std::mt19937 rng(23);
  TruncPoly p = random_poly(L, 5, rng);
  auto pt = random_point(rng);
  const double h = 1e-6;
  for (int v = 0; v < 4; ++v) {
    auto hi = pt, lo = pt;
    hi[v] += h;
    lo[v] -= h;
    Complex fd = (evaluate(p, hi) - evaluate(p, lo)) / (2.0 * h);
    Complex an = evaluate(partial_derivative(p, v), pt);
    CHECK(std::abs(fd - an) / std::max(1.0, std::abs(an)) < 1e-8);
  }
}

TEST_CASE("Leibniz rule for mul_trunc") {
  BasisLayout L(4, 6, true);
  std::mt19937 rng(31);
  TruncPoly a = random_poly(L, 3, rng);
  TruncPoly b = random_poly(L, 3, rng);
  for (int v = 0; v < 4; ++v) {
    TruncPoly lhs = partial_derivative(mul_trunc(a, b), v);
    TruncPoly rhs = mul_trunc(partial_derivative(a, v), b) + mul_trunc(a, partial_derivative(b, v));
    CHECK((lhs - rhs).norm() / std::max(1.0, rhs.norm()) < 1e-13);
  }
}

TEST_CASE("evaluate") {
  BasisLayout L(4, 3);
  TruncPoly zx = TruncPoly::monomial(L, std::array<int, 4>{1, 0, 0, 0});
  Complex c{0.3, -0.7};
  CHECK(evaluate(zx, std::array<Complex, 4>{c, 1.0, 2.0, 3.0}) == c);

  std::mt19937 rng(5);
  TruncPoly p = random_poly(L, 3, rng);
  std::array<Complex, 4> origin{};
  CHECK(std::abs(evaluate(p, origin)) == 0.0);

  TruncPoly zxzys = TruncPoly::monomial(L, std::array<int, 4>{1, 0, 0, 1});
  CHECK(evaluate(zxzys, std::array<Complex, 4>{2.0, 0.0, 0.0, 3.0}) == Complex{6.0, 0.0});
}

TEST_CASE("evaluate is multiplicative under the degree budget") {
  BasisLayout L(4, 6);
  std::mt19937 rng(41);
  TruncPoly a = random_poly(L, 3, rng);
  TruncPoly b = random_poly(L, 3, rng);
  auto pt = random_point(rng);
  Complex lhs = evaluate(mul_trunc(a, b), pt);
  Complex rhs = evaluate(a, pt) * evaluate(b, pt);
  CHECK(std::abs(lhs - rhs) / std::abs(rhs) < 1e-13);
}

TEST_CASE("dot matches evaluate") {
  BasisLayout L(4, 5);
  std::mt19937 rng(43);
  TruncPoly p = random_poly(L, 5, rng);
  auto pt = random_point(rng);
  auto mv = monomial_values(L, pt);
  CHECK(std::abs(dot(p, mv) - evaluate(p, pt)) < 1e-13);
}

TEST_CASE("resonance variables") {
  auto z = to_resonance(State{1.0, 0.0, 0.0, 0.0});
  CHECK(z[0] == Complex{1.0, 0.0});
  CHECK(z[1] == Complex{1.0, 0.0});
  CHECK(z[2] == Complex{0.0, 0.0});
  CHECK(z[3] == Complex{0.0, 0.0});

  z = to_resonance(State{0.0, 1.0, 0.0, 0.0});
  CHECK(z[0] == Complex{0.0, -1.0});
  CHECK(z[1] == Complex{0.0, 1.0});

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    State s{u(rng), u(rng), u(rng), u(rng)};
    State back = from_resonance(to_resonance(s));
    for (int i = 0; i < 4; ++i) CHECK(back[i] == s[i]);
  }

  CHECK_THROWS(from_resonance(std::array<Complex, 4>{Complex{1.0, 1.0}, Complex{2.0, 1.0},
                                                     Complex{0.0, 0.0}, Complex{0.0, 0.0}}));
}

TEST_CASE("conjugate_swapped realizes pointwise conjugation") {
  BasisLayout L(4, 5);
  std::mt19937 rng(59);
  TruncPoly p = random_poly(L, 5, rng);
  TruncPoly pc = conjugate_swapped(p, kResonanceConjSwap);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    State s{u(rng), u(rng), u(rng), u(rng)};
    auto z = to_resonance(s);
    CHECK(std::abs(std::conj(evaluate(p, z)) - evaluate(pc, z)) < 1e-12);
  }
}

TEST_CASE("substitute_linear reproduces composition") {
  // p(x, px) composed with x = (z_x + z_x*)/2, px = i(z_x - z_x*)/2
  BasisLayout Lr(4, 3, true);
  BasisLayout Lz(4, 3, true);
  TruncPoly p(Lr);
  p.set_coeff(std::array<int, 4>{2, 0, 0, 0}, 0.5);   // x^2/2
  p.set_coeff(std::array<int, 4>{0, 2, 0, 0}, 0.5);   // px^2/2
  p.set_coeff(std::array<int, 4>{2, 0, 1, 0}, 1.0);   // x^2 y
  std::vector<TruncPoly> subs;
  const Complex ih{0.0, 0.5};
  {
    TruncPoly sx(Lz), spx(Lz), sy(Lz), spy(Lz);
    sx.set_coeff(std::array<int, 4>{1, 0, 0, 0}, 0.5);
    sx.set_coeff(std::array<int, 4>{0, 1, 0, 0}, 0.5);
    spx.set_coeff(std::array<int, 4>{1, 0, 0, 0}, ih);
    spx.set_coeff(std::array<int, 4>{0, 1, 0, 0}, -ih);
    sy.set_coeff(std::array<int, 4>{0, 0, 1, 0}, 0.5);
    sy.set_coeff(std::array<int, 4>{0, 0, 0, 1}, 0.5);
    spy.set_coeff(std::array<int, 4>{0, 0, 1, 0}, ih);
    spy.set_coeff(std::array<int, 4>{0, 0, 0, 1}, -ih);
    subs = {sx, spx, sy, spy};
  }
  TruncPoly q = substitute_linear(p, subs, Lz);
  std::mt19937 rng(61);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    State s{u(rng), u(rng), u(rng), u(rng)};
    auto z = to_resonance(s);
    std::array<Complex, 4> xr{s[0], s[1], s[2], s[3]};
    CHECK(std::abs(evaluate(p, xr) - evaluate(q, z)) < 1e-12);
  }
}
