#include "sqmat/combiner.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sqmat {

namespace {

void check_tables(std::span<const FourierTable> tables) {
  if (tables.empty()) throw std::invalid_argument("no chain-row tables");
  for (const FourierTable& t : tables)
    if (t.wn() != tables[0].wn() || t.wm() != tables[0].wm())
      throw std::invalid_argument("chain-row tables on different windows");
}

// Lines participating in the Gram sums: everything in the window, or the
// top-k by summed magnitude when requested. Main lines are excluded by the
// caller regardless.
std::vector<std::pair<int, int>> gram_lines(std::span<const FourierTable> tables, int top_k) {
  const int wn = tables[0].wn(), wm = tables[0].wm();
  std::vector<std::pair<int, int>> lines;
  for (int n = -wn; n <= wn; ++n)
    for (int m = -wm; m <= wm; ++m) lines.emplace_back(n, m);
  if (top_k > 0 && top_k < static_cast<int>(lines.size())) {
    std::vector<double> mag(lines.size(), 0.0);
    for (std::size_t i = 0; i < lines.size(); ++i)
      for (const FourierTable& t : tables)
        mag[i] += std::abs(t.at(lines[i].first, lines[i].second));
    std::vector<std::size_t> order(lines.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return mag[a] > mag[b]; });
    std::vector<std::pair<int, int>> kept;
    for (int i = 0; i < top_k; ++i) kept.push_back(lines[order[i]]);
    // main lines must stay available for the constraint vectors
    for (auto main : {std::pair<int, int>{1, 0}, std::pair<int, int>{0, 1}})
      if (std::find(kept.begin(), kept.end(), main) == kept.end()) kept.push_back(main);
    return kept;
  }
  return lines;
}

Eigen::MatrixXcd gram_matrix(std::span<const FourierTable> tables,
                             const std::vector<std::pair<int, int>>& lines, int skip_n,
                             int skip_m) {
  const int nv = static_cast<int>(tables.size());
  Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(nv, nv);
  for (auto [n, m] : lines) {
    if (n == skip_n && m == skip_m) continue;
    for (int j = 0; j < nv; ++j)
      for (int k = 0; k < nv; ++k) F(j, k) += std::conj(tables[j].at(n, m)) * tables[k].at(n, m);
  }
  return F;
}

// Hermitian solve with jitter on near-singularity and a hard conditioning
// failure (the n_v = 4 stall shows up as ill conditioning here). Eigenvalues
// below the jitter floor are structurally absent directions: the jitter makes
// them harmlessly large-inverse and the constraint normalization cancels the
// magnitude. Eigenvalues between the floor and the condition limit are
// genuine near-rank-deficiency and fail loudly.
Eigen::VectorXcd solve_gram(Eigen::MatrixXcd F, const Eigen::VectorXcd& b,
                            const MinimizeOptions& opts) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(F);
  const auto& ev = es.eigenvalues();
  const double vmax = ev.cwiseAbs().maxCoeff();
  const double vmin = ev.cwiseAbs().minCoeff();
  if (vmax <= 0.0)
    throw std::runtime_error("minimize_fluctuation: zero Gram matrix");
  if (vmin < opts.jitter * vmax) {
    F += opts.jitter * vmax * Eigen::MatrixXcd::Identity(F.rows(), F.cols());
  } else if (vmin < vmax / opts.max_condition) {
    throw std::runtime_error("minimize_fluctuation: rank-deficient Gram matrix (reduce n_v)");
  }
  return F.ldlt().solve(b);
}

}  // namespace

GramPair gram_pair(std::span<const FourierTable> tables) {
  check_tables(tables);
  const auto lines = gram_lines(tables, 0);
  GramPair g;
  g.n_v = static_cast<int>(tables.size());
  Eigen::MatrixXcd F1 = gram_matrix(tables, lines, 1, 0);
  Eigen::MatrixXcd F2 = gram_matrix(tables, lines, 0, 1);
  g.F1.assign(F1.data(), F1.data() + F1.size());
  g.F2.assign(F2.data(), F2.data() + F2.size());
  return g;
}

FluctuationReport fluctuation_of(std::span<const FourierTable> tables,
                                 std::span<const Complex> a) {
  check_tables(tables);
  const int nv = static_cast<int>(tables.size());
  if (static_cast<int>(a.size()) != 2 * nv)
    throw std::invalid_argument("fluctuation_of: coefficient shape mismatch");
  const int wn = tables[0].wn(), wm = tables[0].wm();
  FluctuationReport rep;
  rep.v1_lines = FourierTable(wn, wm);
  rep.v2_lines = FourierTable(wn, wm);
  for (int n = -wn; n <= wn; ++n)
    for (int m = -wm; m <= wm; ++m) {
      Complex v1{0.0, 0.0}, v2{0.0, 0.0};
      for (int j = 0; j < nv; ++j) {
        const Complex w = tables[j].at(n, m);
        v1 += a[j] * w;
        v2 += a[nv + j] * w;
      }
      rep.v1_lines.at(n, m) = v1;
      rep.v2_lines.at(n, m) = v2;
    }
  rep.g0 = rep.v1_lines.power_except(1, 0) + rep.v2_lines.power_except(0, 1);
  rep.main_abs = {std::abs(rep.v1_lines.at(1, 0)), std::abs(rep.v2_lines.at(0, 1))};
  rep.max_side_abs[0] = rep.v1_lines.max_side_line(1, 0, &rep.side_n[0], &rep.side_m[0]);
  rep.max_side_abs[1] = rep.v2_lines.max_side_line(0, 1, &rep.side_n[1], &rep.side_m[1]);
  return rep;
}

std::pair<std::vector<Complex>, FluctuationReport> minimize_fluctuation(
    std::span<const FourierTable> tables, const MinimizeOptions& opts) {
  check_tables(tables);
  const int nv = static_cast<int>(tables.size());
  const auto lines = gram_lines(tables, opts.top_k_lines);

  std::vector<Complex> a(2 * nv);
  for (int l = 0; l < 2; ++l) {
    const int main_n = (l == 0) ? 1 : 0;
    const int main_m = (l == 0) ? 0 : 1;
    Eigen::MatrixXcd F = gram_matrix(tables, lines, main_n, main_m);
    Eigen::VectorXcd b(nv);
    for (int j = 0; j < nv; ++j) b(j) = std::conj(tables[j].at(main_n, main_m));
    Eigen::VectorXcd y = solve_gram(std::move(F), b, opts);
    Complex denom{0.0, 0.0};
    for (int m = 0; m < nv; ++m) denom += tables[m].at(main_n, main_m) * y(m);
    if (std::abs(denom) < 1e-300)
      throw std::runtime_error("minimize_fluctuation: vanishing main line");
    for (int k = 0; k < nv; ++k) a[l * nv + k] = y(k) / denom;
  }
  return {a, fluctuation_of(tables, a)};
}

namespace {

// Values of the first three rows of a chain at a state (zeros past the end).
std::array<Complex, 3> chain_values(const JordanChain& ch, std::span<const Complex> mono) {
  std::array<Complex, 3> out{};
  for (int j = 0; j < std::min(3, ch.length()); ++j) out[j] = dot(ch.rows[j], mono);
  return out;
}

struct Eig2 {
  std::array<Complex, 2> lambda;
  std::array<std::array<Complex, 2>, 2> vec;  // vec[l] = (a1, a2) for lambda[l]
};

Eig2 eig2(const std::array<std::array<Complex, 2>, 2>& G) {
  const Complex tr = G[0][0] + G[1][1];
  const Complex det = G[0][0] * G[1][1] - G[0][1] * G[1][0];
  const Complex disc = std::sqrt(tr * tr - 4.0 * det);
  Eig2 e;
  e.lambda[0] = 0.5 * (tr + disc);
  e.lambda[1] = 0.5 * (tr - disc);
  for (int l = 0; l < 2; ++l) {
    // (G - lambda) v = 0: take the larger of the two candidate kernels
    const std::array<Complex, 2> c1{G[0][1], e.lambda[l] - G[0][0]};
    const std::array<Complex, 2> c2{e.lambda[l] - G[1][1], G[1][0]};
    const double n1 = std::abs(c1[0]) + std::abs(c1[1]);
    const double n2 = std::abs(c2[0]) + std::abs(c2[1]);
    e.vec[l] = (n1 >= n2) ? c1 : c2;
    const double n = std::max(n1, n2);
    if (n < 1e-300) throw std::runtime_error("bootstrap: degenerate eigenvector");
    for (Complex& c : e.vec[l]) c /= n;
  }
  return e;
}

std::pair<Eig2, std::array<std::array<Complex, 2>, 2>> bootstrap_eig(const ChainPair& chains,
                                                                     const State& state0) {
  const auto z = to_resonance(state0);
  const auto mono = monomial_values(chains.x.rows[0].layout(), z);
  const auto wx = chain_values(chains.x, mono);
  const auto wy = chain_values(chains.y, mono);
  // P A = (w values), Q the shifted rows
  const Complex detP = wx[0] * wy[1] - wy[0] * wx[1];
  if (std::abs(detP) < 1e-14 * (std::abs(wx[0] * wy[1]) + std::abs(wy[0] * wx[1]) + 1e-300))
    throw std::runtime_error(
        "initial_combination: singular bootstrap matrix (try amplitude continuation)");
  // G = P^-1 Q with P = [[wx0, wy0],[wx1, wy1]], Q = [[wx1, wy1],[wx2, wy2]]
  std::array<std::array<Complex, 2>, 2> G;
  G[0][0] = (wy[1] * wx[1] - wy[0] * wx[2]) / detP;
  G[0][1] = (wy[1] * wy[1] - wy[0] * wy[2]) / detP;
  G[1][0] = (-wx[1] * wx[1] + wx[0] * wx[2]) / detP;
  G[1][1] = (-wx[1] * wy[1] + wx[0] * wy[2]) / detP;
  return {eig2(G), G};
}

}  // namespace

Combination initial_combination(const ChainPair& chains, const State& state0, double mu) {
  auto [e, G] = bootstrap_eig(chains, state0);

  // Order the two eigenpairs so the w_x0-dominant one defines v_1.
  auto xdom = [&](int l) {
    return std::abs(e.vec[l][0]) / (std::abs(e.vec[l][0]) + std::abs(e.vec[l][1]) + 1e-300);
  };
  const int first = (xdom(0) >= xdom(1)) ? 0 : 1;
  const int order[2] = {first, 1 - first};

  std::vector<Complex> a(4);
  std::array<double, 2> omega;
  for (int l = 0; l < 2; ++l) {
    const auto& v = e.vec[order[l]];
    // normalize the dominant entry to 1 for reproducibility
    const Complex scale = (std::abs(v[0]) >= std::abs(v[1])) ? v[0] : v[1];
    a[2 * l] = v[0] / scale;
    a[2 * l + 1] = v[1] / scale;
    const Complex phi = -Complex{0.0, 1.0} * e.lambda[order[l]];  // lambda = i phi
    omega[l] = mu + phi.real();
  }
  Combination comb = make_combination({chains.x.rows[0], chains.y.rows[0]}, std::move(a), mu);
  comb.omega = omega;
  anchor(comb, state0);
  return comb;
}

double bootstrap_residual(const ChainPair& chains, const State& state0, double mu) {
  (void)mu;
  auto [e, G] = bootstrap_eig(chains, state0);
  double worst = 0.0;
  for (int l = 0; l < 2; ++l) {
    const auto& v = e.vec[l];
    for (int r = 0; r < 2; ++r) {
      const Complex res = G[r][0] * v[0] + G[r][1] * v[1] - e.lambda[l] * v[r];
      worst = std::max(worst, std::abs(res));
    }
  }
  return worst;
}

}  // namespace sqmat
