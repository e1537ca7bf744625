#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sqmat/iteration.hpp"
#include "sqmat/kaminvariant.hpp"
#include "sqmat/validation.hpp"

using namespace sqmat;

namespace {

const Complex I{0.0, 1.0};

ThetaTables zero_tables(int w, double om1, double om2) {
  ThetaTables t;
  t.theta = {FourierTable(w, w), FourierTable(w, w)};
  t.omega = {om1, om2};
  t.theta0 = {0.0, 0.0};
  return t;
}

// One coarse-grid reference solve shared by the orbit-based cases.
struct RefSolve {
  ModelSpec model = henon_heiles();
  SolveResult res;
  RefSolve() {
    SolveConfig cfg;
    cfg.grid_n1 = cfg.grid_n2 = 32;
    cfg.window_n = cfg.window_m = 12;
    res = solve(model, initial_state(model, 1.0 / 12.0, 0.0, 0.0, 0.18), cfg);
  }
  static const RefSolve& get() {
    static RefSolve rs;
    return rs;
  }
};

}  // namespace

TEST_CASE("zero theta tables give pure rotations") {
  ThetaTables t = zero_tables(4, 0.9, 1.1);
  for (double th1 : {0.0, 1.2, 4.9})
    for (double th2 : {0.3, 2.8}) {
      auto v = forward_transform(t, th1, th2);
      CHECK(std::abs(v[0] - std::polar(1.0, th1)) < 1e-14);
      CHECK(std::abs(v[1] - std::polar(1.0, th2)) < 1e-14);
    }
}

TEST_CASE("exponential and linearized forms agree to second order") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ThetaTables t = zero_tables(3, 0.9, 1.1);
  double sum = 0.0;
  for (int n = -3; n <= 3; ++n)
    for (int m = -3; m <= 3; ++m) {
      const Complex c = 0.01 * Complex{u(rng), u(rng)};
      t.theta[0].at(n, m) = c;
      t.theta[1].at(n, m) = 2.0 * c;
      sum += std::abs(c) + std::abs(2.0 * c);
    }
  for (double th1 : {0.4, 2.0})
    for (double th2 : {1.1, 5.5}) {
      auto v = forward_transform(t, th1, th2);
      for (int l = 0; l < 2; ++l) {
        const Complex dev = synthesize(t.theta[l], th1, th2);
        const Complex lin = std::polar(1.0, l == 0 ? th1 : th2) * (1.0 + I * dev);
        CHECK(std::abs(v[l] - lin) < sum * sum);
      }
    }
}

TEST_CASE("kam values reduce to the normalized actions when theta vanishes") {
  const RefSolve& rs = RefSolve::get();
  REQUIRE(rs.res.converged());
  KamInvariant inv{zero_tables(4, 1.0, 1.0), rs.res.final.comb};
  State s = rs.res.state0;
  auto vb = inv.normalized_actions(s);
  auto v0 = kam_values(inv, s);
  CHECK(std::abs(v0[0] - vb[0]) < 1e-14);
  CHECK(std::abs(v0[1] - vb[1]) < 1e-14);
}

TEST_CASE("laurent guard rejects near-zero actions") {
  const RefSolve& rs = RefSolve::get();
  KamInvariant inv{rs.res.final.theta, rs.res.final.comb};
  CHECK_THROWS_AS(kam_values(inv, State{1e-9, 0.0, 1e-9, 0.0}), std::domain_error);
}

TEST_CASE("radius fluctuation statistic") {
  std::vector<Complex> ring(100);
  for (int k = 0; k < 100; ++k) ring[k] = std::polar(2.5, 0.063 * k);
  CHECK(radius_fluctuation(ring) < 1e-12);
  // half at 1, half at 3: mean 2, std 1
  std::vector<Complex> two(100);
  for (int k = 0; k < 100; ++k) two[k] = (k % 2) ? Complex{1.0, 0.0} : Complex{3.0, 0.0};
  CHECK(radius_fluctuation(two) == doctest::Approx(0.5));
}

TEST_CASE("invariants are rounder than the actions on the oracle orbit") {
  const RefSolve& rs = RefSolve::get();
  REQUIRE(rs.res.converged());
  KamInvariant inv{rs.res.final.theta, rs.res.final.comb};
  Trajectory tr = integrate(rs.model, rs.res.state0, 300.0);

  std::vector<Complex> v2(tr.states.size()), v02(tr.states.size());
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    v2[k] = inv.normalized_actions(tr.states[k])[1];
    v02[k] = kam_values(inv, tr.states[k])[1];
  }
  const double raw = radius_fluctuation(v2);
  const double kam = radius_fluctuation(v02);
  CHECK(kam < raw);

  // first-order consistency: the invariant radius deviation is bounded by
  // the squared theta budget
  double budget = 0.0;
  for (const Complex& c : rs.res.final.theta.theta[1].raw()) budget += std::abs(c);
  CHECK(kam < budget * budget + 1e-10);
}

TEST_CASE("rotation number is constant along the orbit") {
  const RefSolve& rs = RefSolve::get();
  REQUIRE(rs.res.converged());
  OracleComparison cmp = compare_with_oracle(rs.model, rs.res, {.t_end = 300.0});
  // wobble below 1% of a full turn
  CHECK(cmp.rotation_residual < 0.01 * 2.0 * std::numbers::pi);
  CHECK(cmp.kam_radius_std[0] < cmp.v_radius_std[0] + 1e-12);
  CHECK(cmp.kam_radius_std[1] < cmp.v_radius_std[1]);
}

TEST_CASE("taylor expansion approaches the exponential form with order") {
  const RefSolve& rs = RefSolve::get();
  REQUIRE(rs.res.converged());
  KamInvariant inv{rs.res.final.theta, rs.res.final.comb};
  Trajectory tr = integrate(rs.model, rs.res.state0, 150.0);
  std::vector<State> orbit;
  for (std::size_t k = 0; k < tr.states.size(); k += 8) orbit.push_back(tr.states[k]);

  std::vector<int> orders{5, 17};
  TaylorComparison cmp = taylor_compare(inv, orbit, orders);
  REQUIRE(cmp.fluctuation.size() == 2);
  CHECK(cmp.exponential_form < 0.01);
  CHECK(cmp.fluctuation[0] > 3.0 * cmp.exponential_form);  // low order is far off
  CHECK(cmp.fluctuation[1] < cmp.fluctuation[0]);          // high order approaches
  CHECK_THROWS_AS(taylor_compare(inv, orbit, std::vector<int>{21}), std::invalid_argument);
}
