#include "sqmat/sqmatrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace sqmat {

namespace {

constexpr double kResonantTol = 1e-9;

// Rows of the generalized-eigenvector march, degree block by degree block.
// Returns k rows (possibly with trailing zeros) satisfying
// u_j M = lambda u_j + u_{j+1}, u_k = 0, with every resonant coefficient of
// u_0 gauged to zero except the lead monomial.
std::vector<std::vector<Complex>> chain_march(const SquareMatrix& M, Complex lambda,
                                              int lead_pos, int k) {
  const BasisLayout& L = M.layout();
  const int D = L.dimension();
  const int ns = L.max_degree();
  std::vector<std::vector<Complex>> u(k, std::vector<Complex>(D, Complex{0.0, 0.0}));
  u[0][lead_pos] = Complex{1.0, 0.0};
  const int lead_degree = L.degree_of(lead_pos);
  if (std::abs(M(lead_pos, lead_pos) - lambda) > kResonantTol)
    throw std::runtime_error("jordan chain: lead monomial is not resonant for this eigenvalue");

  std::vector<std::vector<Complex>> R(k);
  for (int deg = lead_degree; deg <= ns; ++deg) {
    const int b0 = L.block_offset(deg);
    const int bs = L.block_size(deg);
    // Residuals from lower degrees: R_j[m] = sum_{deg(i) < deg} u_j[i] M(i, m).
    for (int j = 0; j < k; ++j) {
      R[j].assign(bs, Complex{0.0, 0.0});
      for (int i = L.block_offset(lead_degree); i < b0; ++i) {
        const Complex uj = u[j][i];
        if (uj == Complex{0.0, 0.0}) continue;
        for (int mm = 0; mm < bs; ++mm) {
          const Complex mij = M(i, b0 + mm);
          if (mij != Complex{0.0, 0.0}) R[j][mm] += uj * mij;
        }
      }
    }
    double scale = 1.0;
    for (int j = 0; j < k; ++j)
      for (const Complex& c : u[j]) scale = std::max(scale, std::abs(c));
    for (int mm = 0; mm < bs; ++mm) {
      const int m = b0 + mm;
      const Complex delta = M(m, m) - lambda;
      if (std::abs(delta) < kResonantTol) {
        // Resonant monomial: u_0[m] is gauge freedom (zero unless it is the
        // lead), the deeper rows are forced, the last row must be compatible.
        for (int j = 0; j + 1 < k; ++j) u[j + 1][m] = R[j][mm];
        if (std::abs(R[k - 1][mm]) > 1e-8 * scale)
          throw std::runtime_error("jordan chain: defective back-substitution at degree block " +
                                   std::to_string(deg));
      } else {
        for (int j = k - 1; j >= 0; --j) {
          const Complex next = (j + 1 < k) ? u[j + 1][m] : Complex{0.0, 0.0};
          u[j][m] = (next - R[j][mm]) / delta;
        }
      }
    }
  }
  return u;
}

JordanChain make_chain(const BasisLayout& L, Complex lambda,
                       std::vector<std::vector<Complex>> rows) {
  // Trim trailing (numerically) zero rows.
  double lead_norm = 0.0;
  for (const Complex& c : rows[0]) lead_norm += std::norm(c);
  lead_norm = std::sqrt(lead_norm);
  while (rows.size() > 1) {
    double n = 0.0;
    for (const Complex& c : rows.back()) n += std::norm(c);
    if (std::sqrt(n) > 1e-12 * lead_norm) break;
    rows.pop_back();
  }
  JordanChain chain;
  chain.eigenvalue = lambda;
  chain.rows.reserve(rows.size());
  for (auto& r : rows) {
    TruncPoly p(L);
    std::copy(r.begin(), r.end(), p.coeffs().begin());
    chain.rows.push_back(std::move(p));
  }
  return chain;
}

int resonant_degree_count(const SquareMatrix& M, Complex lambda, int from_degree) {
  const BasisLayout& L = M.layout();
  int count = 0;
  for (int deg = from_degree; deg <= L.max_degree(); ++deg) {
    for (int m = L.block_offset(deg); m < L.block_offset(deg) + L.block_size(deg); ++m) {
      if (std::abs(M(m, m) - lambda) < kResonantTol) {
        ++count;
        break;
      }
    }
  }
  return count;
}

JordanChain chain_from_lead(const SquareMatrix& M, Complex lambda, int lead_pos) {
  const int k = resonant_degree_count(M, lambda, M.layout().degree_of(lead_pos));
  return make_chain(M.layout(), lambda, chain_march(M, lambda, lead_pos, std::max(k, 1)));
}

}  // namespace

std::vector<Complex> SquareMatrix::left_apply(std::span<const Complex> u) const {
  const int D = dimension();
  std::vector<Complex> out(D, Complex{0.0, 0.0});
  for (int i = 0; i < D; ++i) {
    const Complex ui = u[i];
    if (ui == Complex{0.0, 0.0}) continue;
    const Complex* row = &entries_[static_cast<std::size_t>(i) * D];
    for (int j = i; j < D; ++j)
      if (row[j] != Complex{0.0, 0.0}) out[j] += ui * row[j];
  }
  return out;
}

SquareMatrix build_square_matrix(const ModelSpec& model, int n_s) {
  if (n_s < 1) throw std::invalid_argument("build_square_matrix: n_s must be >= 1");
  BasisLayout L(4, n_s);
  SquareMatrix M(std::move(L), model.mu_x, model.mu_y);
  const BasisLayout& BL = M.layout();
  const int D = BL.dimension();

  // Term lists of the resonance field components.
  struct ZTerm {
    Complex c;
    std::array<int, 4> e;
  };
  std::array<std::vector<ZTerm>, 4> field;
  for (int q = 0; q < 4; ++q) {
    const TruncPoly& f = model.resonance_field[q];
    const BasisLayout& FL = f.layout();
    for (int i = 0; i < FL.dimension(); ++i) {
      if (f[i] == Complex{0.0, 0.0}) continue;
      auto e = FL.exponents_of(i);
      field[q].push_back({f[i], {e[0], e[1], e[2], e[3]}});
    }
  }

  std::vector<int> sum(4);
  for (int i = 0; i < D; ++i) {
    auto ei = BL.exponents_of(i);
    for (int q = 0; q < 4; ++q) {
      if (ei[q] == 0) continue;
      for (const ZTerm& t : field[q]) {
        int deg = 0;
        for (int v = 0; v < 4; ++v) {
          sum[v] = ei[v] + t.e[v];
          deg += sum[v];
        }
        sum[q] -= 1;
        deg -= 1;
        if (deg > n_s) continue;
        M(i, BL.index_of(sum)) += static_cast<double>(ei[q]) * t.c;
      }
    }
  }
  return M;
}

ChainPair jordan_chains(const SquareMatrix& M, double mu) {
  const BasisLayout& L = M.layout();
  const Complex lambda{0.0, mu};
  ChainPair pair;
  pair.x = chain_from_lead(M, lambda, L.index_of(std::array<int, 4>{1, 0, 0, 0}));
  pair.y = chain_from_lead(M, lambda, L.index_of(std::array<int, 4>{0, 0, 1, 0}));
  return pair;
}

std::vector<JordanChain> all_jordan_chains(const SquareMatrix& M, double mu) {
  const BasisLayout& L = M.layout();
  const Complex lambda{0.0, mu};
  std::vector<JordanChain> chains;
  for (int deg = 1; deg <= L.max_degree(); ++deg) {
    // Resonant positions of this degree block.
    std::vector<int> res;
    for (int m = L.block_offset(deg); m < L.block_offset(deg) + L.block_size(deg); ++m)
      if (std::abs(M(m, m) - lambda) < kResonantTol) res.push_back(m);
    if (res.empty()) continue;

    // Rows of already-found chains whose support starts at this degree,
    // restricted to the resonant positions (orthonormalized).
    std::vector<std::vector<Complex>> basis;
    auto add_to_basis = [&](std::vector<Complex> v) {
      for (const auto& q : basis) {
        Complex proj{0.0, 0.0};
        for (std::size_t t = 0; t < v.size(); ++t) proj += std::conj(q[t]) * v[t];
        for (std::size_t t = 0; t < v.size(); ++t) v[t] -= proj * q[t];
      }
      double n = 0.0;
      for (const Complex& c : v) n += std::norm(c);
      n = std::sqrt(n);
      if (n < 1e-8) return false;
      for (Complex& c : v) c /= n;
      basis.push_back(std::move(v));
      return true;
    };
    for (const JordanChain& ch : chains) {
      for (const TruncPoly& row : ch.rows) {
        // lowest-degree support of the row
        int lo = L.max_degree() + 1;
        for (int i = 0; i < L.dimension(); ++i)
          if (std::abs(row[i]) > 1e-12) {
            lo = L.degree_of(i);
            break;
          }
        if (lo != deg) continue;
        std::vector<Complex> v(res.size());
        for (std::size_t t = 0; t < res.size(); ++t) v[t] = row[res[t]];
        add_to_basis(std::move(v));
      }
    }
    // Coordinate leads that extend the span.
    for (std::size_t t = 0; t < res.size(); ++t) {
      std::vector<Complex> e(res.size(), Complex{0.0, 0.0});
      e[t] = Complex{1.0, 0.0};
      if (!add_to_basis(std::move(e))) continue;
      chains.push_back(chain_from_lead(M, lambda, res[t]));
    }
  }
  std::sort(chains.begin(), chains.end(),
            [](const JordanChain& a, const JordanChain& b) { return a.length() > b.length(); });
  return chains;
}

TruncPoly chain_time_derivative(const JordanChain& chain, int j) {
  if (j < 0 || j >= chain.length()) throw std::out_of_range("chain_time_derivative: bad row");
  TruncPoly out = chain.rows[j] * chain.eigenvalue;
  if (j + 1 < chain.length()) out += chain.rows[j + 1];
  return out;
}

double chain_residual(const SquareMatrix& M, const JordanChain& chain) {
  double worst = 0.0;
  for (int j = 0; j < chain.length(); ++j) {
    std::vector<Complex> lhs = M.left_apply(chain.rows[j].coeffs());
    double err2 = 0.0, ref2 = 0.0;
    for (int i = 0; i < M.dimension(); ++i) {
      Complex rhs = chain.eigenvalue * chain.rows[j][i];
      if (j + 1 < chain.length()) rhs += chain.rows[j + 1][i];
      err2 += std::norm(lhs[i] - rhs);
      ref2 += std::norm(chain.rows[j][i]);
    }
    worst = std::max(worst, std::sqrt(err2 / std::max(ref2, 1e-300)));
  }
  return worst;
}

JordanChain gauge_fix(const SquareMatrix& M, const JordanChain& chain) {
  const BasisLayout& L = M.layout();
  // Dominant degree-1 coefficient of the lead row picks the lead monomial.
  int lead_pos = -1;
  double best = 0.0;
  for (int m = L.block_offset(1); m < L.block_offset(2); ++m) {
    const double mag = std::abs(chain.rows[0][m]);
    if (mag > best) {
      best = mag;
      lead_pos = m;
    }
  }
  if (lead_pos < 0 || best == 0.0)
    throw std::runtime_error("gauge_fix: lead row has no degree-1 coefficient");
  return chain_from_lead(M, chain.eigenvalue, lead_pos);
}

std::string matrix_csv(const SquareMatrix& M) {
  std::string out = "row,col,re,im\n";
  char buf[96];
  for (int i = 0; i < M.dimension(); ++i)
    for (int j = 0; j < M.dimension(); ++j) {
      const Complex c = M(i, j);
      if (c == Complex{0.0, 0.0}) continue;
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", i, j, c.real(), c.imag());
      out += buf;
    }
  return out;
}

std::string chain_csv(const JordanChain& chain) {
  std::string out = "row,col,re,im\n";
  char buf[96];
  for (int j = 0; j < chain.length(); ++j) {
    const TruncPoly& p = chain.rows[j];
    for (int i = 0; i < p.layout().dimension(); ++i) {
      if (p[i] == Complex{0.0, 0.0}) continue;
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", j, i, p[i].real(), p[i].imag());
      out += buf;
    }
  }
  return out;
}

}  // namespace sqmat
