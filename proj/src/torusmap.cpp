#include "sqmat/torusmap.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstdio>
#include <numbers>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sqmat {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Parallel loop over independent slots with exception capture: OpenMP must
// not let exceptions escape a worker, so the first one is stashed and
// rethrown after the region.
template <typename Fn>
void run_nodes(bool parallel, int count, Fn&& fn) {
  std::exception_ptr err = nullptr;
  std::atomic<bool> failed{false};
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < count; ++i) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      fn(i);
    } catch (...) {
#pragma omp critical
      {
        if (!failed.exchange(true)) err = std::current_exception();
      }
    }
  }
  if (err) std::rethrow_exception(err);
}

// 4x4 real linear solve by Gaussian elimination with partial pivoting.
// Returns false on (numerical) singularity.
bool solve4(double A[4][4], double b[4], double x[4]) {
  int perm[4] = {0, 1, 2, 3};
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(A[perm[r]][col]) > std::abs(A[perm[piv]][col])) piv = r;
    std::swap(perm[col], perm[piv]);
    const double d = A[perm[col]][col];
    if (std::abs(d) < 1e-300) return false;
    for (int r = col + 1; r < 4; ++r) {
      const double f = A[perm[r]][col] / d;
      if (f == 0.0) continue;
      A[perm[r]][col] = 0.0;
      for (int c = col + 1; c < 4; ++c) A[perm[r]][c] -= f * A[perm[col]][c];
      b[perm[r]] -= f * b[perm[col]];
    }
  }
  for (int col = 3; col >= 0; --col) {
    double s = b[perm[col]];
    for (int c = col + 1; c < 4; ++c) s -= A[perm[col]][c] * x[c];
    const double d = A[perm[col]][col];
    if (std::abs(d) < 1e-300) return false;
    x[col] = s / d;
  }
  return true;
}

}  // namespace

double FourierTable::power_except(int n0, int m0) const {
  double s = 0.0;
  for (int n = -wn_; n <= wn_; ++n)
    for (int m = -wm_; m <= wm_; ++m) {
      if (n == n0 && m == m0) continue;
      s += std::norm(at(n, m));
    }
  return s;
}

double FourierTable::max_side_line(int n0, int m0, int* n_out, int* m_out) const {
  double best = 0.0;
  for (int n = -wn_; n <= wn_; ++n)
    for (int m = -wm_; m <= wm_; ++m) {
      if (n == n0 && m == m0) continue;
      const double mag = std::abs(at(n, m));
      if (mag > best) {
        best = mag;
        if (n_out) *n_out = n;
        if (m_out) *m_out = m;
      }
    }
  return best;
}

std::array<Complex, 2> Combination::action_values(const State& s) const {
  const auto z = to_resonance(s);
  return {evaluate(v_poly[0], z), evaluate(v_poly[1], z)};
}

void Combination::action_and_jacobian(const State& s, std::array<Complex, 2>& v,
                                      std::array<std::array<Complex, 4>, 2>& J) const {
  const auto z = to_resonance(s);
  const auto mv = monomial_values(v_poly[0].layout(), z);
  const Complex I{0.0, 1.0};
  for (int l = 0; l < 2; ++l) {
    v[l] = dot(v_poly[l], mv);
    const Complex d1 = dot(v_dz[l][0], mv);
    const Complex d2 = dot(v_dz[l][1], mv);
    const Complex d3 = dot(v_dz[l][2], mv);
    const Complex d4 = dot(v_dz[l][3], mv);
    J[l][0] = d1 + d2;             // d/dx
    J[l][1] = -I * d1 + I * d2;    // d/dp_x
    J[l][2] = d3 + d4;             // d/dy
    J[l][3] = -I * d3 + I * d4;    // d/dp_y
  }
}

Combination make_combination(std::vector<TruncPoly> rows, std::vector<Complex> a, double mu) {
  Combination c;
  c.n_v = static_cast<int>(rows.size());
  if (static_cast<int>(a.size()) != 2 * c.n_v)
    throw std::invalid_argument("make_combination: need a 2 x n_v coefficient matrix");
  c.rows = std::move(rows);
  c.a = std::move(a);
  c.mu = mu;
  const BasisLayout& L = c.rows[0].layout();
  const BasisLayout Lc(L.n_vars(), L.max_degree(), true);
  for (int l = 0; l < 2; ++l) {
    TruncPoly v(Lc);
    for (int j = 0; j < c.n_v; ++j) v += embed(c.rows[j], Lc) * c.a_at(l, j);
    c.v_poly[l] = v;
    for (int q = 0; q < 4; ++q) c.v_dz[l][q] = partial_derivative(v, q);
  }
  return c;
}

void anchor(Combination& comb, const State& state0) {
  const auto v = comb.action_values(state0);
  for (int l = 0; l < 2; ++l) {
    comb.r[l] = std::abs(v[l]);
    comb.theta0[l] = std::arg(v[l]);
    if (comb.r[l] <= 0.0)
      throw std::runtime_error("anchor: action vanishes at the anchor state");
  }
}

State invert_actions(const Combination& comb, Complex v1_target, Complex v2_target,
                     const State& seed, const InvertOptions& opts) {
  State s = seed;
  std::array<Complex, 2> v;
  std::array<std::array<Complex, 4>, 2> J;
  auto residual = [&](const State& q) {
    const auto vv = comb.action_values(q);
    return std::max(std::abs(vv[0] - v1_target), std::abs(vv[1] - v2_target));
  };
  double res = residual(s);
  for (int it = 0; it < opts.max_iter; ++it) {
    if (res < opts.tol) return s;
    comb.action_and_jacobian(s, v, J);
    double A[4][4], b[4], dx[4];
    for (int l = 0; l < 2; ++l) {
      b[2 * l] = -(v[l] - (l == 0 ? v1_target : v2_target)).real();
      b[2 * l + 1] = -(v[l] - (l == 0 ? v1_target : v2_target)).imag();
      for (int c = 0; c < 4; ++c) {
        A[2 * l][c] = J[l][c].real();
        A[2 * l + 1][c] = J[l][c].imag();
      }
    }
    if (!solve4(A, b, dx))
      throw InversionFailure("invert_actions: singular Jacobian", res);
    // Damped update: halve the step while the residual grows.
    bool improved = false;
    double lam = 1.0;
    for (int half = 0; half < 12; ++half) {
      State trial{s[0] + lam * dx[0], s[1] + lam * dx[1], s[2] + lam * dx[2],
                  s[3] + lam * dx[3]};
      const double tres = residual(trial);
      if (tres < res || tres < opts.tol) {
        s = trial;
        res = tres;
        improved = true;
        break;
      }
      lam *= 0.5;
    }
    if (!improved) break;  // stalled
  }
  if (res < opts.tol) return s;
  throw InversionFailure("invert_actions: no convergence", res);
}

double TorusGrid::theta1(int i) const { return kTwoPi * static_cast<double>(i) / N1; }
double TorusGrid::theta2(int j) const { return kTwoPi * static_cast<double>(j) / N2; }

TorusGrid sample_torus(const Combination& comb, const ChainPair& chains, int N1, int N2,
                       const SampleOptions& opts) {
  if (N1 < 4 || N2 < 4) throw std::invalid_argument("sample_torus: grid too small");
  TorusGrid g;
  g.N1 = N1;
  g.N2 = N2;
  g.states.assign(static_cast<std::size_t>(N1) * N2, State{});
  auto target = [&](int l, double th) { return std::polar(comb.r[l], th); };

  auto solve_node = [&](int i, int j, const State& seed) {
    try {
      return invert_actions(comb, target(0, g.theta1(i)), target(1, g.theta2(j)), seed,
                            opts.invert);
    } catch (const InversionFailure& f) {
      throw InversionFailure(std::string(f.what()) + " at grid node (" + std::to_string(i) +
                                 "," + std::to_string(j) + ")",
                             f.residual, i, j);
    }
  };

  const bool par = opts.exec == Exec::parallel;
  if (opts.warm != nullptr) {
    const TorusGrid& w = *opts.warm;
    if (w.N1 != N1 || w.N2 != N2)
      throw std::invalid_argument("sample_torus: warm grid shape mismatch");
    run_nodes(par, N1, [&](int i) {
      for (int j = 0; j < N2; ++j) g.states[g.idx(i, j)] = solve_node(i, j, w.states[w.idx(i, j)]);
    });
  } else {
    if (!opts.seed_state)
      throw std::invalid_argument("sample_torus: need a seed state or a warm grid");
    // Phase continuation from the anchor (theta10, theta20) to node (0, 0).
    State s = *opts.seed_state;
    const double th1 = comb.theta0[0], th2 = comb.theta0[1];
    const int steps =
        std::max(1, static_cast<int>(std::ceil(std::max(std::abs(th1), std::abs(th2)) / 0.2)));
    for (int k = 1; k <= steps; ++k) {
      const double f = 1.0 - static_cast<double>(k) / steps;
      s = invert_actions(comb, target(0, f * th1), target(1, f * th2), s, opts.invert);
    }
    if (!opts.theta2_major) {
      for (int i = 0; i < N1; ++i)
        s = g.states[g.idx(i, 0)] = solve_node(i, 0, i == 0 ? s : g.states[g.idx(i - 1, 0)]);
      run_nodes(par, N1, [&](int i) {
        for (int j = 1; j < N2; ++j)
          g.states[g.idx(i, j)] = solve_node(i, j, g.states[g.idx(i, j - 1)]);
      });
    } else {
      for (int j = 0; j < N2; ++j)
        s = g.states[g.idx(0, j)] = solve_node(0, j, j == 0 ? s : g.states[g.idx(0, j - 1)]);
      run_nodes(par, N2, [&](int j) {
        for (int i = 1; i < N1; ++i)
          g.states[g.idx(i, j)] = solve_node(i, j, g.states[g.idx(i - 1, j)]);
      });
    }
  }

  fill_chain_values(g, chains, opts.exec);
  return g;
}

void fill_chain_values(TorusGrid& grid, const ChainPair& chains, Exec exec) {
  // Chain-row values at every node (shared monomial evaluation per node).
  const TruncPoly* rows[4] = {&chains.x.rows[0], &chains.y.rows[0],
                              chains.x.length() > 1 ? &chains.x.rows[1] : nullptr,
                              chains.y.length() > 1 ? &chains.y.rows[1] : nullptr};
  const BasisLayout& L = chains.x.rows[0].layout();
  for (auto& wv : grid.w) wv.assign(grid.states.size(), Complex{0.0, 0.0});
  run_nodes(exec == Exec::parallel, grid.N1, [&](int i) {
    for (int j = 0; j < grid.N2; ++j) {
      const long n = grid.idx(i, j);
      const auto z = to_resonance(grid.states[n]);
      const auto mv = monomial_values(L, z);
      for (int k = 0; k < 4; ++k)
        if (rows[k]) grid.w[k][n] = dot(*rows[k], mv);
    }
  });
}

FourierTable fourier2d(std::span<const Complex> samples, int N1, int N2, int wn, int wm,
                       Exec exec) {
  if (static_cast<long>(samples.size()) != static_cast<long>(N1) * N2)
    throw std::invalid_argument("fourier2d: sample count does not match the grid");
  wn = std::min(wn, N1 / 2 - 1);
  wm = std::min(wm, N2 / 2 - 1);
  FourierTable table(wn, wm);

  // Twiddle tables e^{-2 pi i t / N}.
  std::vector<Complex> tw1(N1), tw2(N2);
  for (int t = 0; t < N1; ++t) tw1[t] = std::polar(1.0, -kTwoPi * t / N1);
  for (int t = 0; t < N2; ++t) tw2[t] = std::polar(1.0, -kTwoPi * t / N2);
  auto mod = [](long v, int N) { return static_cast<int>(((v % N) + N) % N); };

  // Separable transform: axis 2 first, then axis 1.
  std::vector<Complex> partial(static_cast<std::size_t>(N1) * (2 * wm + 1));
  const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < N1; ++i)
    for (int m = -wm; m <= wm; ++m) {
      Complex acc{0.0, 0.0};
      for (int j = 0; j < N2; ++j)
        acc += samples[static_cast<std::size_t>(i) * N2 + j] * tw2[mod((long)m * j, N2)];
      partial[static_cast<std::size_t>(i) * (2 * wm + 1) + (m + wm)] = acc;
    }
#pragma omp parallel for schedule(static) if (par)
  for (int n = -wn; n <= wn; ++n)
    for (int m = -wm; m <= wm; ++m) {
      Complex acc{0.0, 0.0};
      for (int i = 0; i < N1; ++i)
        acc += partial[static_cast<std::size_t>(i) * (2 * wm + 1) + (m + wm)] *
               tw1[mod((long)n * i, N1)];
      table.at(n, m) = acc / (static_cast<double>(N1) * N2);
    }
  return table;
}

Complex synthesize(const FourierTable& table, double theta1, double theta2) {
  const int wn = table.wn(), wm = table.wm();
  std::vector<Complex> e1(2 * wn + 1), e2(2 * wm + 1);
  for (int n = -wn; n <= wn; ++n) e1[n + wn] = std::polar(1.0, n * theta1);
  for (int m = -wm; m <= wm; ++m) e2[m + wm] = std::polar(1.0, m * theta2);
  Complex acc{0.0, 0.0};
  for (int n = -wn; n <= wn; ++n)
    for (int m = -wm; m <= wm; ++m) {
      const Complex c = table.at(n, m);
      if (c != Complex{0.0, 0.0}) acc += c * e1[n + wn] * e2[m + wm];
    }
  return acc;
}

std::string fourier_csv(const FourierTable& table, double omega1, double omega2,
                        double min_abs) {
  std::string out = "n,m,re,im,abs,frequency\n";
  char buf[160];
  for (int n = -table.wn(); n <= table.wn(); ++n)
    for (int m = -table.wm(); m <= table.wm(); ++m) {
      const Complex c = table.at(n, m);
      if (std::abs(c) < min_abs) continue;
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g\n", n, m, c.real(),
                    c.imag(), std::abs(c), n * omega1 + m * omega2);
      out += buf;
    }
  return out;
}

}  // namespace sqmat
