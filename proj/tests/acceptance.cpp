// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. The expensive artifacts (the reference solve and its oracle run)
// are shared across criteria.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sqmat/iteration.hpp"
#include "sqmat/kaminvariant.hpp"
#include "sqmat/validation.hpp"

using namespace sqmat;

namespace {

int failures = 0;

struct Criterion {
  const char* name;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;

  explicit Criterion(const char* n) : name(n) {}

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }

  void note(const std::string& what) {
    detail = what + (detail.empty() ? "" : "; " + detail);
  }

  ~Criterion() {
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %s (%.1f s)%s%s\n", ok ? "PASS" : "FAIL", name, dt,
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace

int main() {
  ModelSpec model = henon_heiles();
  const double E = 1.0 / 12.0;
  const Complex I{0.0, 1.0};

  // ---- 1. basis and matrix structure -------------------------------------
  {
    Criterion c("criterion 1: basis/matrix structure");
    c.expect(basis_dimension(4, 3) == 34, "dimension(4,3) != 34");
    c.expect(basis_dimension(4, 5) == 125, "dimension(4,5) != 125");
    SquareMatrix M = build_square_matrix(model, 3);
    const std::vector<Complex> deg1 = {I, -I, I, -I};
    const std::vector<Complex> deg2 = {2.0 * I, 0.0, 2.0 * I, 0.0,     -2.0 * I,
                                       0.0,     -2.0 * I, 2.0 * I, 0.0, -2.0 * I};
    for (int i = 0; i < 4; ++i)
      c.expect(std::abs(M(i, i) - deg1[i]) < 1e-14, "degree-1 diagonal");
    for (int i = 0; i < 10; ++i)
      c.expect(std::abs(M(4 + i, 4 + i) - deg2[i]) < 1e-14, "degree-2 diagonal");
    bool m13 = true;
    for (int i = 0; i < 4; ++i)
      for (int j = 14; j < 34; ++j)
        if (std::abs(M(i, j)) != 0.0) m13 = false;
    c.expect(m13, "M13 != 0");
    const std::vector<Complex> row0 = {0.0, 0.0, 0.5 * I, 0.5 * I, 0.0,
                                       0.5 * I, 0.5 * I, 0.0, 0.0, 0.0};
    for (int j = 0; j < 10; ++j)
      c.expect(std::abs(M(0, 4 + j) - row0[j]) < 1e-14, "M12 first row");
  }

  // ---- 2. jordan chains ----------------------------------------------------
  SquareMatrix M5 = build_square_matrix(model, 5);
  ChainPair chains = jordan_chains(M5, model.mu_x);
  {
    Criterion c("criterion 2: jordan chains");
    c.expect(chains.x.length() == 3 && chains.y.length() == 3, "longest chain length != 3");
    c.expect(chain_residual(M5, chains.x) < 1e-10, "chain x residual");
    c.expect(chain_residual(M5, chains.y) < 1e-10, "chain y residual");
    JordanChain again = gauge_fix(M5, chains.x);
    bool idem = again.length() == chains.x.length();
    if (idem)
      for (int j = 0; j < again.length(); ++j)
        if ((again.rows[j] - chains.x.rows[j]).norm() > 1e-13) idem = false;
    c.expect(idem, "gauge idempotence");
  }

  // ---- 3. oracle fidelity ----------------------------------------------------
  State s0 = initial_state(model, E, 0.0, 0.0, 0.18);
  Trajectory oracle = integrate(model, s0, 2000.0);
  {
    Criterion c("criterion 3: oracle fidelity");
    c.expect(oracle.max_energy_drift < 1e-8,
             fmt("energy drift %.2e >= 1e-8", oracle.max_energy_drift));
    std::vector<Complex> wx0(oracle.states.size());
    for (std::size_t k = 0; k < oracle.states.size(); ++k)
      wx0[k] = evaluate(chains.x.rows[0], to_resonance(oracle.states[k]));
    auto lines = fundamental_frequencies(wx0, oracle.dt, 2);
    c.expect(close(lines[0].frequency, 0.912, 0.002),
             fmt("omega1 = %.4f not within 0.912 +- 0.002", lines[0].frequency));
    c.expect(close(lines[1].frequency, 1.030, 0.002),
             fmt("omega2 = %.4f not within 1.030 +- 0.002", lines[1].frequency));
    c.note(fmt("drift %.1e, lines %.4f / %.4f", oracle.max_energy_drift, lines[0].frequency,
               lines[1].frequency));
  }

  // ---- reference solve (shared by 4, 5, 6, 7) --------------------------------
  SolveConfig cfg;  // n_s = 5, grid 64, window 40 (clipped), schedule 2 -> 4
  SolveResult ref = solve(model, s0, cfg);
  OracleComparison cmp;
  if (ref.converged()) cmp = compare_with_oracle(model, ref, ValidateOptions{});

  // ---- 4. table of w spectra --------------------------------------------------
  {
    Criterion c("criterion 4: w-table spectrum");
    c.expect(ref.converged(), "reference solve did not converge");
    if (ref.converged()) {
      const auto z0 = to_resonance(s0);
      const double ex[2][3] = {{0.972, 0.049, 0.013}, {1.089, 0.164, 0.043}};
      std::string got;
      for (int k = 0; k < 2; ++k) {
        const Complex w0 = evaluate(ref.final.comb.rows[k], z0);
        const double l10 = std::abs(ref.w_tables[k].at(1, 0) / w0);
        const double l01 = std::abs(ref.w_tables[k].at(0, 1) / w0);
        const double l2m1 = std::abs(ref.w_tables[k].at(2, -1) / w0);
        got += fmt("%s %.3f/%.3f/%.3f ", k == 0 ? "w_x0" : "w_y0", l10, l01, l2m1);
        c.expect(close(l10, ex[k][0], 0.15 * ex[k][0]), fmt("line (1,0) of table %d", k));
        c.expect(close(l01, ex[k][1], 0.15 * ex[k][1]), fmt("line (0,1) of table %d", k));
        c.expect(close(l2m1, ex[k][2], 0.15 * ex[k][2]), fmt("line (2,-1) of table %d", k));
      }
      c.note(got);
    }
  }

  // ---- 5. reference solve convergence ----------------------------------------
  {
    Criterion c("criterion 5: reference solve convergence");
    c.expect(ref.converged(), "did not converge");
    c.expect(ref.iterations() <= 12, fmt("%d iterations > 12", ref.iterations()));
    if (ref.converged()) {
      const double side = ref.history.back().side_ratio[1];
      c.expect(side >= 0.03 && side <= 0.05,
               fmt("v2 side ratio %.4f outside [0.03, 0.05]", side));
      c.expect(cmp.line_agreement <= 0.01,
               fmt("oracle deviation %.4f > 0.01", cmp.line_agreement));
      c.note(fmt("%d iterations, v2 side %.3f, oracle deviation %.4f", ref.iterations(), side,
                 cmp.line_agreement));
    }
  }

  // ---- 6. iteration-1 signature ----------------------------------------------
  {
    Criterion c("criterion 6: iteration-1 signature");
    c.expect(!ref.history.empty(), "no history");
    if (!ref.history.empty()) {
      const IterationRecord& r1 = ref.history.front();
      c.expect(close(r1.omega[0], 0.860, 0.02), fmt("omega1 = %.4f vs 0.860", r1.omega[0]));
      c.expect(close(r1.omega[1], 1.098, 0.02), fmt("omega2 = %.4f vs 1.098", r1.omega[1]));
      struct L {
        int n, m;
        double a;
      };
      std::vector<L> ls;
      for (int n = -r1.v2_first.wn(); n <= r1.v2_first.wn(); ++n)
        for (int m = -r1.v2_first.wm(); m <= r1.v2_first.wm(); ++m)
          ls.push_back({n, m, std::abs(r1.v2_first.at(n, m))});
      std::sort(ls.begin(), ls.end(), [](const L& a, const L& b) { return a.a > b.a; });
      c.expect(ls[0].n == 0 && ls[0].m == 1, "top line not (0,1)");
      c.expect(ls[1].n == 1 && ls[1].m == 0, "second line not (1,0)");
      c.expect(ls[2].n == 2 && ls[2].m == -1, "third line not (2,-1)");
      // heights against the unit rigid-rotation main line
      c.expect(close(ls[1].a, 0.64, 0.2 * 0.64), fmt("(1,0) height %.3f vs 0.64", ls[1].a));
      c.expect(close(ls[2].a, 0.17, 0.2 * 0.17), fmt("(2,-1) height %.3f vs 0.17", ls[2].a));
      c.note(fmt("omega (%.4f, %.4f), heights %.3f / %.3f", r1.omega[0], r1.omega[1], ls[1].a,
                 ls[2].a));
    }
  }

  // ---- 7. kam invariant quality ----------------------------------------------
  {
    Criterion c("criterion 7: kam invariant quality");
    c.expect(ref.converged(), "no converged reference");
    if (ref.converged()) {
      c.expect(cmp.kam_radius_std[1] < 0.01,
               fmt("|v02| std %.4f >= 0.01", cmp.kam_radius_std[1]));
      c.expect(cmp.v_radius_std[1] >= 3.0 * cmp.kam_radius_std[1],
               fmt("|v2| std %.4f not 3x above |v02| std %.4f", cmp.v_radius_std[1],
                   cmp.kam_radius_std[1]));
      KamInvariant inv{ref.final.theta, ref.final.comb};
      std::vector<State> orbit;
      for (std::size_t k = 0; k < oracle.states.size() && oracle.times[k] <= 400.0; k += 8)
        orbit.push_back(oracle.states[k]);
      TaylorComparison tc = taylor_compare(inv, orbit, std::vector<int>{5, 17});
      c.expect(tc.fluctuation[0] >= 5.0 * tc.exponential_form,
               fmt("order-5 fluctuation %.4f < 5x exponential %.4f", tc.fluctuation[0],
                   tc.exponential_form));
      c.expect(tc.fluctuation[1] <= 2.0 * tc.exponential_form,
               fmt("order-17 fluctuation %.4f > 2x exponential %.4f", tc.fluctuation[1],
                   tc.exponential_form));
      c.note(fmt("|v02| std %.4f vs |v2| %.4f; taylor 5 / 17 / exp = %.4f / %.4f / %.4f",
                 cmp.kam_radius_std[1], cmp.v_radius_std[1], tc.fluctuation[0],
                 tc.fluctuation[1], tc.exponential_form));
    }
  }

  // ---- 8. boundary scan --------------------------------------------------------
  {
    Criterion c("criterion 8: boundary scan");
    std::vector<std::array<double, 2>> probes;
    for (double p : {0.195, 0.18, 0.16, 0.145, 0.143, 0.14, 0.135, 0.13, 0.127, 0.125, 0.123,
                     0.121})
      probes.push_back({0.0, p});
    BoundaryScan scan = scan_boundary(model, E, probes, cfg, ScanOptions{});
    auto probe = [&](double py0) -> const ProbeOutcome* {
      for (const auto& p : scan.probes)
        if (std::abs(p.py0 - py0) < 1e-12) return &p;
      return nullptr;
    };
    for (double p : {0.195, 0.18, 0.16, 0.145, 0.143, 0.14}) {
      const ProbeOutcome* o = probe(p);
      c.expect(o && o->status == SolveStatus::converged, fmt("probe %.3f not converged", p));
    }
    const ProbeOutcome* low = probe(0.127);
    c.expect(low && low->status == SolveStatus::converged, "probe 0.127 not converged");
    if (low && low->status == SolveStatus::converged)
      c.expect(low->invariant_residual >= 0.05 && low->invariant_residual <= 0.15,
               fmt("0.127 residual %.3f outside [0.05, 0.15]", low->invariant_residual));
    bool some_fail = false;
    for (const auto& p : scan.probes)
      if (p.py0 > 0.12 && p.py0 < 0.135 && p.status != SolveStatus::converged) some_fail = true;
    c.expect(some_fail, "no non-convergence reported in (0.12, 0.135)");
    c.note(fmt("0.127 residual %.3f; %s", low ? low->invariant_residual : -1.0,
               scan.chaos_onset_py0 ? fmt("onset %.5f", *scan.chaos_onset_py0).c_str()
                                    : "onset not bracketed"));
  }

  // ---- 9. property suites --------------------------------------------------------
  {
    Criterion c("criterion 9: property suites");
    std::mt19937 rng(2026);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    // polynomial algebra laws
    {
      BasisLayout L(4, 6, true);
      TruncPoly a(L), b(L);
      for (int i = 0; i < L.dimension(); ++i) {
        if (L.degree_of(i) <= 3) {
          a[i] = Complex{u(rng), u(rng)};
          b[i] = Complex{u(rng), u(rng)};
        }
      }
      c.expect((mul_trunc(a, b) - mul_trunc(b, a)).norm() < 1e-13, "mul commutativity");
      for (int v = 0; v < 4; ++v) {
        TruncPoly lhs = partial_derivative(mul_trunc(a, b), v);
        TruncPoly rhs =
            mul_trunc(partial_derivative(a, v), b) + mul_trunc(a, partial_derivative(b, v));
        c.expect((lhs - rhs).norm() / std::max(1.0, rhs.norm()) < 1e-12, "Leibniz rule");
      }
    }
    // transform round trip
    {
      const int N = 16;
      FourierTable src(5, 5);
      for (int n = -5; n <= 5; ++n)
        for (int m = -5; m <= 5; ++m) src.at(n, m) = 0.2 * Complex{u(rng), u(rng)};
      std::vector<Complex> samples(N * N);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
          samples[i * N + j] =
              synthesize(src, 2.0 * std::numbers::pi * i / N, 2.0 * std::numbers::pi * j / N);
      FourierTable back = fourier2d(samples, N, N, 5, 5);
      double worst = 0.0;
      for (int n = -5; n <= 5; ++n)
        for (int m = -5; m <= 5; ++m)
          worst = std::max(worst, std::abs(back.at(n, m) - src.at(n, m)));
      c.expect(worst < 1e-10, "fourier round trip");
    }
    // newton round trip on the reference combination's torus
    if (ref.converged()) {
      const Combination& comb = ref.final.comb;
      bool ok = true;
      for (int t = 0; t < 20 && ok; ++t) {
        const std::size_t node =
            (std::size_t)((u(rng) * 0.5 + 0.5) * (double)(ref.grid.states.size() - 1));
        State s = ref.grid.states[node];
        auto v = comb.action_values(s);
        State back = invert_actions(comb, v[0], v[1], State{s[0] + 0.005, s[1], s[2], s[3]});
        for (int q = 0; q < 4; ++q)
          if (std::abs(back[q] - s[q]) > 1e-9) ok = false;
      }
      c.expect(ok, "newton round trip");
    }
    // minimizer constraints and stationarity under 100 random perturbations
    {
      std::vector<FourierTable> tables(2, FourierTable(4, 4));
      for (int j = 0; j < 2; ++j) {
        for (int n = -4; n <= 4; ++n)
          for (int m = -4; m <= 4; ++m) tables[j].at(n, m) = 0.05 * Complex{u(rng), u(rng)};
        tables[j].at(1, 0) = Complex{1.0 + 0.1 * u(rng), 0.1 * u(rng)};
        tables[j].at(0, 1) = Complex{0.4 * u(rng), 0.4 * u(rng)};
      }
      auto [a, rep] = minimize_fluctuation(tables);
      c.expect(std::abs(rep.v1_lines.at(1, 0) - 1.0) < 1e-12, "constraint v110");
      c.expect(std::abs(rep.v2_lines.at(0, 1) - 1.0) < 1e-12, "constraint v201");
      bool stationary = true;
      for (int trial = 0; trial < 100; ++trial) {
        std::vector<Complex> da(4);
        for (auto& x : da) x = Complex{u(rng), u(rng)};
        for (int l = 0; l < 2; ++l) {
          const int n0 = l == 0 ? 1 : 0, m0 = l == 0 ? 0 : 1;
          Complex dot{0.0, 0.0}, nrm{0.0, 0.0};
          for (int k = 0; k < 2; ++k) {
            dot += tables[k].at(n0, m0) * da[2 * l + k];
            nrm += tables[k].at(n0, m0) * std::conj(tables[k].at(n0, m0));
          }
          for (int k = 0; k < 2; ++k)
            da[2 * l + k] -= std::conj(tables[k].at(n0, m0)) * dot / nrm;
        }
        double norm = 0.0;
        for (const Complex& x : da) norm += std::norm(x);
        norm = std::sqrt(norm);
        if (norm < 1e-12) continue;
        std::vector<Complex> ap(4);
        for (int k = 0; k < 4; ++k) ap[k] = a[k] + da[k] * (1e-4 / norm);
        if (fluctuation_of(tables, ap).g0 < rep.g0 - 1e-12) stationary = false;
      }
      c.expect(stationary, "minimizer stationarity");
    }
    // theta linearity and zero initial deviation
    {
      Combination cb;
      cb.omega = {0.93, 1.07};
      cb.theta0 = {0.3, -1.1};
      cb.mu = 1.0;
      auto mk = [&]() {
        PhiField p;
        p.N1 = p.N2 = 8;
        FourierTable t1(3, 3), t2(3, 3);
        for (int n = -3; n <= 3; ++n)
          for (int m = -3; m <= 3; ++m) {
            t1.at(n, m) = 0.1 * Complex{u(rng), u(rng)};
            t2.at(n, m) = 0.1 * Complex{u(rng), u(rng)};
          }
        p.tables = {t1, t2};
        p.mean = {t1.at(0, 0), t2.at(0, 0)};
        return p;
      };
      PhiField pa = mk(), pb = mk(), psum = pa;
      for (int l = 0; l < 2; ++l)
        for (std::size_t k = 0; k < psum.tables[l].raw().size(); ++k)
          psum.tables[l].raw()[k] = pa.tables[l].raw()[k] + 2.0 * pb.tables[l].raw()[k];
      ThetaTables ta = theta_tables(pa, cb), tb = theta_tables(pb, cb),
                  ts = theta_tables(psum, cb);
      bool linear = true;
      for (int l = 0; l < 2; ++l)
        for (int n = -3; n <= 3; ++n)
          for (int m = -3; m <= 3; ++m) {
            if (n == 0 && m == 0) continue;
            if (std::abs(ts.theta[l].at(n, m) -
                         (ta.theta[l].at(n, m) + 2.0 * tb.theta[l].at(n, m))) > 1e-12)
              linear = false;
          }
      c.expect(linear, "theta linearity");
      c.expect(std::abs(theta_deviation(ta, 0, 0.3, -1.1)) < 1e-12, "zero initial deviation");
      c.expect(std::abs(theta_deviation(ta, 1, 0.3, -1.1)) < 1e-12, "zero initial deviation");
    }
    // determinism of solve reruns
    {
      SolveConfig scfg;
      scfg.grid_n1 = scfg.grid_n2 = 32;
      scfg.window_n = scfg.window_m = 12;
      SolveResult r1 = solve(model, s0, scfg);
      SolveResult r2 = solve(model, s0, scfg);
      bool same = r1.iterations() == r2.iterations();
      if (same)
        for (int k = 0; k < r1.iterations(); ++k)
          if (r1.history[k].g0 != r2.history[k].g0 || r1.history[k].omega != r2.history[k].omega)
            same = false;
      c.expect(same, "solve determinism");
    }
  }

  std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
