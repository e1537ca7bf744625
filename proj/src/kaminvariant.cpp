#include "sqmat/kaminvariant.hpp"

#include <cmath>
#include <stdexcept>

namespace sqmat {

namespace {

// Significant theta lines (l, n, m, coeff) of one action's table.
struct Line {
  int n, m;
  Complex c;
};

std::vector<Line> significant_lines(const FourierTable& t, double floor = 1e-14) {
  std::vector<Line> lines;
  for (int n = -t.wn(); n <= t.wn(); ++n)
    for (int m = -t.wm(); m <= t.wm(); ++m) {
      const Complex c = t.at(n, m);
      if (std::abs(c) > floor) lines.push_back({n, m, c});
    }
  return lines;
}

}  // namespace

std::array<Complex, 2> KamInvariant::normalized_actions(const State& s) const {
  auto v = comb.action_values(s);
  return {v[0] / comb.r[0], v[1] / comb.r[1]};
}

std::array<Complex, 2> forward_transform(const ThetaTables& theta, double theta1,
                                         double theta2) {
  const Complex I{0.0, 1.0};
  std::array<Complex, 2> out;
  for (int l = 0; l < 2; ++l) {
    const Complex dev = synthesize(theta.theta[l], theta1, theta2);
    const double base = (l == 0) ? theta1 : theta2;
    out[l] = std::exp(Complex{0.0, base} + I * dev);
  }
  return out;
}

std::array<Complex, 2> kam_values(const KamInvariant& inv, const State& s, double min_abs) {
  const auto vbar = inv.normalized_actions(s);
  if (std::abs(vbar[0]) < min_abs || std::abs(vbar[1]) < min_abs)
    throw std::domain_error("kam_values: action magnitude too small for the Laurent terms");
  const Complex I{0.0, 1.0};

  // Power tables vbar_l^n for the window exponents.
  const int wn = inv.theta.theta[0].wn(), wm = inv.theta.theta[0].wm();
  auto powers = [](Complex z, int wmax) {
    std::vector<Complex> p(2 * wmax + 1);
    p[wmax] = Complex{1.0, 0.0};
    for (int k = 1; k <= wmax; ++k) {
      p[wmax + k] = p[wmax + k - 1] * z;
      p[wmax - k] = p[wmax - k + 1] / z;
    }
    return p;
  };
  const auto p1 = powers(vbar[0], wn);
  const auto p2 = powers(vbar[1], wm);

  std::array<Complex, 2> out;
  for (int l = 0; l < 2; ++l) {
    Complex sum{0.0, 0.0};
    for (const Line& ln : significant_lines(inv.theta.theta[l]))
      sum += ln.c * p1[ln.n + wn] * p2[ln.m + wm];
    out[l] = vbar[l] * std::exp(-I * sum);
  }
  return out;
}

double radius_fluctuation(std::span<const Complex> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (const Complex& v : values) mean += std::abs(v);
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (const Complex& v : values) {
    const double d = std::abs(v) - mean;
    var += d * d;
  }
  var /= static_cast<double>(values.size());
  return std::sqrt(var) / mean;
}

TaylorComparison taylor_compare(const KamInvariant& inv, std::span<const State> orbit,
                                std::span<const int> orders) {
  TaylorComparison cmp;
  cmp.orders.assign(orders.begin(), orders.end());

  {
    std::vector<Complex> exact(orbit.size());
    for (std::size_t k = 0; k < orbit.size(); ++k) exact[k] = kam_values(inv, orbit[k])[1];
    cmp.exponential_form = radius_fluctuation(exact);
  }

  const Complex I{0.0, 1.0};
  for (int order : orders) {
    if (order < 1 || order > 20) throw std::invalid_argument("taylor_compare: order out of range");
    const BasisLayout L(4, order, true);

    // Unit-normalized actions and their conjugates embedded at this order.
    const BasisLayout& Ls = inv.comb.v_poly[0].layout();
    std::array<TruncPoly, 2> vb, vbc;
    for (int l = 0; l < 2; ++l) {
      TruncPoly p = inv.comb.v_poly[l] * Complex{1.0 / inv.comb.r[l], 0.0};
      (void)Ls;
      vb[l] = embed(p, L);
      vbc[l] = conjugate_swapped(vb[l], kResonanceConjSwap);
    }

    // Cached powers, conjugates standing in for negative exponents.
    std::array<std::vector<TruncPoly>, 2> pos, neg;
    auto power = [&](int l, int e) -> const TruncPoly& {
      auto& cache = (e >= 0) ? pos[l] : neg[l];
      const TruncPoly& base = (e >= 0) ? vb[l] : vbc[l];
      const int k = std::abs(e);
      if (cache.empty()) {
        cache.push_back(TruncPoly::constant(L, Complex{1.0, 0.0}));
        cache.push_back(base);
      }
      while (static_cast<int>(cache.size()) <= k) cache.push_back(mul_trunc(cache.back(), base));
      return cache[k];
    };

    // Exponent sum S = sum theta_2nm vbar1^n vbar2^m; the exponential enters
    // at its leading order, vbar2 (1 - i S), which is the polynomial object
    // whose truncation order is being probed (expanding e^{-iS} further only
    // adds O(theta^2) while deepening the composition).
    TruncPoly S(L);
    for (const Line& ln : significant_lines(inv.theta.theta[1])) {
      if (std::abs(ln.n) + std::abs(ln.m) > order) continue;  // truncates to zero
      S += mul_trunc(power(0, ln.n), power(1, ln.m)) * ln.c;
    }
    TruncPoly lin = S * (-I);
    lin[0] += Complex{1.0, 0.0};
    TruncPoly T = mul_trunc(vb[1], lin);

    std::vector<Complex> vals(orbit.size());
    for (std::size_t k = 0; k < orbit.size(); ++k)
      vals[k] = evaluate(T, to_resonance(orbit[k]));
    cmp.fluctuation.push_back(radius_fluctuation(vals));
  }
  return cmp;
}

}  // namespace sqmat
