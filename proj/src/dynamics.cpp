#include "sqmat/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace sqmat {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<ModelSpec::Term> term_list(const TruncPoly& p) {
  std::vector<ModelSpec::Term> terms;
  const BasisLayout& L = p.layout();
  for (int i = 0; i < L.dimension(); ++i) {
    const Complex c = p[i];
    if (c == Complex{0.0, 0.0}) continue;
    if (std::abs(c.imag()) > 1e-14 * std::max(1.0, std::abs(c.real())))
      throw std::invalid_argument("real polynomial expected");
    auto e = L.exponents_of(i);
    terms.push_back({c.real(), {e[0], e[1], e[2], e[3]}});
  }
  return terms;
}

double eval_terms(const std::vector<ModelSpec::Term>& terms, const State& s) {
  double acc = 0.0;
  for (const ModelSpec::Term& t : terms) {
    double m = t.c;
    for (int v = 0; v < 4; ++v)
      for (int k = 0; k < t.e[v]; ++k) m *= s[v];
    acc += m;
  }
  return acc;
}

// Cooper-Verner 11-stage explicit Runge-Kutta of order 8.
struct RK8Tableau {
  static constexpr int kStages = 11;
  double a[kStages][kStages] = {};
  double b[kStages] = {};
  double c[kStages] = {};

  RK8Tableau() {
    const double w = std::sqrt(21.0);
    c[0] = 0.0;
    c[1] = 0.5;
    c[2] = 0.5;
    c[3] = (7.0 + w) / 14.0;
    c[4] = (7.0 + w) / 14.0;
    c[5] = 0.5;
    c[6] = (7.0 - w) / 14.0;
    c[7] = (7.0 - w) / 14.0;
    c[8] = 0.5;
    c[9] = (7.0 + w) / 14.0;
    c[10] = 1.0;
    a[1][0] = 0.5;
    a[2][0] = 0.25;
    a[2][1] = 0.25;
    a[3][0] = 1.0 / 7.0;
    a[3][1] = (-7.0 - 3.0 * w) / 98.0;
    a[3][2] = (21.0 + 5.0 * w) / 49.0;
    a[4][0] = (11.0 + w) / 84.0;
    a[4][2] = (18.0 + 4.0 * w) / 63.0;
    a[4][3] = (21.0 - w) / 252.0;
    a[5][0] = (5.0 + w) / 48.0;
    a[5][2] = (9.0 + w) / 36.0;
    a[5][3] = (-231.0 + 14.0 * w) / 360.0;
    a[5][4] = (63.0 - 7.0 * w) / 80.0;
    a[6][0] = (10.0 - w) / 42.0;
    a[6][2] = (-432.0 + 92.0 * w) / 315.0;
    a[6][3] = (633.0 - 145.0 * w) / 90.0;
    a[6][4] = (-504.0 + 115.0 * w) / 70.0;
    a[6][5] = (63.0 - 13.0 * w) / 35.0;
    a[7][0] = 1.0 / 14.0;
    a[7][4] = (14.0 - 3.0 * w) / 126.0;
    a[7][5] = (13.0 - 3.0 * w) / 63.0;
    a[7][6] = 1.0 / 9.0;
    a[8][0] = 1.0 / 32.0;
    a[8][4] = (91.0 - 21.0 * w) / 576.0;
    a[8][5] = 11.0 / 72.0;
    a[8][6] = (-385.0 - 75.0 * w) / 1152.0;
    a[8][7] = (63.0 + 13.0 * w) / 128.0;
    a[9][0] = 1.0 / 14.0;
    a[9][4] = 1.0 / 9.0;
    a[9][5] = (-733.0 - 147.0 * w) / 2205.0;
    a[9][6] = (515.0 + 111.0 * w) / 504.0;
    a[9][7] = (-51.0 - 11.0 * w) / 56.0;
    a[9][8] = (132.0 + 28.0 * w) / 245.0;
    a[10][4] = (-42.0 + 7.0 * w) / 18.0;
    a[10][5] = (-18.0 + 28.0 * w) / 45.0;
    a[10][6] = (-273.0 - 53.0 * w) / 72.0;
    a[10][7] = (301.0 + 53.0 * w) / 72.0;
    a[10][8] = (28.0 - 28.0 * w) / 45.0;
    a[10][9] = (49.0 - 7.0 * w) / 18.0;
    b[0] = 1.0 / 20.0;
    b[7] = 49.0 / 180.0;
    b[8] = 16.0 / 45.0;
    b[9] = 49.0 / 180.0;
    b[10] = 1.0 / 20.0;
  }
};

const RK8Tableau& rk8_tableau() {
  static const RK8Tableau t;
  return t;
}

template <std::size_t N, typename Field>
std::array<double, N> rk8_step_generic(const Field& f, const std::array<double, N>& s,
                                       double dt) {
  const RK8Tableau& tb = rk8_tableau();
  std::array<std::array<double, N>, RK8Tableau::kStages> k;
  std::array<double, N> tmp;
  for (int st = 0; st < RK8Tableau::kStages; ++st) {
    tmp = s;
    for (int j = 0; j < st; ++j) {
      if (tb.a[st][j] == 0.0) continue;
      for (std::size_t v = 0; v < N; ++v) tmp[v] += dt * tb.a[st][j] * k[j][v];
    }
    k[st] = f(tmp);
  }
  std::array<double, N> out = s;
  for (int st = 0; st < RK8Tableau::kStages; ++st) {
    if (tb.b[st] == 0.0) continue;
    for (std::size_t v = 0; v < N; ++v) out[v] += dt * tb.b[st] * k[st][v];
  }
  return out;
}

void radix2_fft(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / (double)len * (inverse ? 1.0 : -1.0);
    const Complex wl{std::cos(ang), std::sin(ang)};
    for (std::size_t i = 0; i < n; i += len) {
      Complex w{1.0, 0.0};
      for (std::size_t j = 0; j < len / 2; ++j) {
        Complex u = a[i + j];
        Complex v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

double hann(std::size_t n, std::size_t N) {
  return 0.5 * (1.0 - std::cos(2.0 * kPi * (double)n / (double)(N - 1)));
}

// Hann-weighted projection of the signal onto e^{i freq t}.
Complex projection(std::span<const Complex> s, double dt, double freq) {
  const std::size_t N = s.size();
  Complex acc{0.0, 0.0};
  double wsum = 0.0;
  const Complex rot{std::cos(-freq * dt), std::sin(-freq * dt)};
  Complex ph{1.0, 0.0};
  for (std::size_t n = 0; n < N; ++n) {
    const double w = hann(n, N);
    acc += w * s[n] * ph;
    wsum += w;
    ph *= rot;
  }
  return acc / wsum;
}

}  // namespace

BasisLayout model_layout(int max_degree) { return BasisLayout(4, max_degree, true); }

std::array<double, 4> ModelSpec::eval_field(const State& s) const {
  return {eval_terms(field_terms[0], s), eval_terms(field_terms[1], s),
          eval_terms(field_terms[2], s), eval_terms(field_terms[3], s)};
}

double ModelSpec::energy(const State& s) const {
  if (!hamiltonian) throw std::runtime_error("model has no Hamiltonian");
  return evaluate(*hamiltonian, std::array<Complex, 4>{s[0], s[1], s[2], s[3]}).real();
}

ModelSpec model_from_field(const std::array<TruncPoly, 4>& field, std::string name,
                           std::optional<TruncPoly> hamiltonian) {
  ModelSpec m;
  m.name = std::move(name);
  m.real_field = field;
  m.hamiltonian = std::move(hamiltonian);

  const BasisLayout& L = field[0].layout();
  for (const TruncPoly& f : field) {
    if (!(f.layout() == L)) throw std::invalid_argument("field components on different layouts");
    if (L.with_constant() && std::abs(f[0]) > 1e-14)
      throw std::invalid_argument("vector field has a constant term (fixed point not at origin)");
  }

  // Resonance-variable form via x = (z_x + z_x*)/2, p_x = i(z_x - z_x*)/2, ...
  BasisLayout Lz(4, L.max_degree(), true);
  std::vector<TruncPoly> subs(4, TruncPoly(Lz));
  const Complex half{0.5, 0.0}, ihalf{0.0, 0.5};
  subs[0].set_coeff(std::array<int, 4>{1, 0, 0, 0}, half);
  subs[0].set_coeff(std::array<int, 4>{0, 1, 0, 0}, half);
  subs[1].set_coeff(std::array<int, 4>{1, 0, 0, 0}, ihalf);
  subs[1].set_coeff(std::array<int, 4>{0, 1, 0, 0}, -ihalf);
  subs[2].set_coeff(std::array<int, 4>{0, 0, 1, 0}, half);
  subs[2].set_coeff(std::array<int, 4>{0, 0, 0, 1}, half);
  subs[3].set_coeff(std::array<int, 4>{0, 0, 1, 0}, ihalf);
  subs[3].set_coeff(std::array<int, 4>{0, 0, 0, 1}, -ihalf);

  const Complex I{0.0, 1.0};
  // zdot_x = xdot - i pxdot, zdot_y = ydot - i pydot, conjugates analogously.
  TruncPoly zdx = substitute_linear(field[0] - field[1] * I, subs, Lz);
  TruncPoly zdy = substitute_linear(field[2] - field[3] * I, subs, Lz);
  m.resonance_field[0] = zdx;
  m.resonance_field[1] = conjugate_swapped(zdx, kResonanceConjSwap);
  m.resonance_field[2] = zdy;
  m.resonance_field[3] = conjugate_swapped(zdy, kResonanceConjSwap);

  // Degree-1 part must be the diagonal normal form i*mu_l z_l.
  auto check_linear = [&](const TruncPoly& zd, int var) -> double {
    for (int pos = Lz.block_offset(1); pos < Lz.block_offset(2); ++pos) {
      const Complex c = zd[pos];
      auto e = Lz.exponents_of(pos);
      if (e[var] == 1) {
        if (std::abs(c.real()) > 1e-12)
          throw std::invalid_argument("linear part is not i*mu (damping-like term)");
      } else if (std::abs(c) > 1e-12) {
        throw std::invalid_argument("linear part of the field is not diagonal in z variables");
      }
    }
    std::array<int, 4> e{};
    e[var] = 1;
    return zd.coeff(e).imag();
  };
  m.mu_x = check_linear(m.resonance_field[0], 0);
  m.mu_y = check_linear(m.resonance_field[2], 2);
  if (m.mu_x <= 0.0 || m.mu_y <= 0.0)
    throw std::invalid_argument("linear frequencies must be positive");
  for (int i = 0; i < 4; ++i) m.field_terms[i] = term_list(m.real_field[i]);
  return m;
}

ModelSpec model_from_hamiltonian(const TruncPoly& H, std::string name) {
  TruncPoly Hc = H;
  const BasisLayout& L = H.layout();
  if (L.with_constant() && std::abs(Hc[0]) > 0.0) {
    std::fprintf(stderr, "[model] dropping constant term %g from Hamiltonian\n",
                 Hc[0].real());
    Hc[0] = Complex{0.0, 0.0};
  }
  std::array<TruncPoly, 4> field = {
      partial_derivative(Hc, 1),        // xdot = dH/dpx
      partial_derivative(Hc, 0) * Complex{-1.0, 0.0},  // pxdot = -dH/dx
      partial_derivative(Hc, 3),        // ydot = dH/dpy
      partial_derivative(Hc, 2) * Complex{-1.0, 0.0},  // pydot = -dH/dy
  };
  return model_from_field(field, std::move(name), Hc);
}

ModelSpec henon_heiles() {
  BasisLayout L = model_layout(3);
  TruncPoly H(L);
  H.set_coeff(std::array<int, 4>{2, 0, 0, 0}, 0.5);
  H.set_coeff(std::array<int, 4>{0, 2, 0, 0}, 0.5);
  H.set_coeff(std::array<int, 4>{0, 0, 2, 0}, 0.5);
  H.set_coeff(std::array<int, 4>{0, 0, 0, 2}, 0.5);
  H.set_coeff(std::array<int, 4>{2, 0, 1, 0}, 1.0);
  H.set_coeff(std::array<int, 4>{0, 0, 3, 0}, -1.0 / 3.0);
  return model_from_hamiltonian(H, "henon-heiles");
}

State initial_state(const ModelSpec& model, double E, double x0, double y0, double py0) {
  if (!model.hamiltonian) throw std::runtime_error("initial_state needs a Hamiltonian");
  State s{x0, 0.0, y0, py0};
  const double H0 = model.energy(s);
  const double gap = E - H0;
  if (gap < 0.0) throw std::domain_error("initial_state: energy below the potential value");
  double px = std::sqrt(2.0 * gap);
  // Newton on H(px) = E; dH/dpx = xdot.
  for (int it = 0; it < 60; ++it) {
    s[1] = px;
    const double r = model.energy(s) - E;
    if (std::abs(r) < 1e-15 * std::max(1.0, std::abs(E))) break;
    const double d = model.eval_field(s)[0];
    if (d == 0.0) break;
    px -= r / d;
  }
  s[1] = px;
  if (std::abs(model.energy(s) - E) > 1e-12 * std::max(1.0, std::abs(E)))
    throw std::domain_error("initial_state: no real p_x0 solves H = E");
  return s;
}

State rk8_step(const ModelSpec& model, const State& s, double dt) {
  return rk8_step_generic<4>([&](const State& q) { return model.eval_field(q); }, s, dt);
}

Trajectory integrate(const ModelSpec& model, const State& s0, double t_end,
                     const IntegrateOptions& opts) {
  if (!(t_end > 0.0)) throw std::invalid_argument("integrate: t_end must be positive");
  const bool have_H = model.hamiltonian.has_value();
  const double E0 = have_H ? model.energy(s0) : 0.0;
  const double Escale = std::max(std::abs(E0), 1e-12);

  auto run = [&](double dt, double horizon, bool store) {
    Trajectory tr;
    tr.energy0 = E0;
    tr.dt = dt;
    const long n = std::lround(std::ceil(horizon / dt - 1e-12));
    const double h = horizon / (double)n;
    tr.dt = h;
    State s = s0;
    if (store) {
      tr.times.reserve(n + 1);
      tr.states.reserve(n + 1);
      tr.times.push_back(0.0);
      tr.states.push_back(s);
    }
    double drift = 0.0;
    for (long k = 1; k <= n; ++k) {
      s = rk8_step(model, s, h);
      if (!std::isfinite(s[0]) || !std::isfinite(s[1]) || !std::isfinite(s[2]) ||
          !std::isfinite(s[3]))
        throw std::runtime_error("integrate: state became non-finite");
      if (have_H) drift = std::max(drift, std::abs(model.energy(s) - E0) / Escale);
      if (store) {
        tr.times.push_back(h * (double)k);
        tr.states.push_back(s);
      }
    }
    tr.max_energy_drift = drift;
    return tr;
  };

  double dt = opts.dt;
  if (have_H) {
    const double probe = std::min(t_end, 20.0);
    int halvings = 0;
    while (run(dt, probe, false).max_energy_drift > 0.5 * opts.drift_tol) {
      dt *= 0.5;
      if (++halvings > opts.max_halvings)
        throw std::runtime_error("integrate: energy drift gate not met (step underflow)");
    }
  }
  for (int attempt = 0;; ++attempt) {
    Trajectory tr = run(dt, t_end, opts.store_all);
    if (!have_H || tr.max_energy_drift <= opts.drift_tol) return tr;
    if (attempt >= opts.max_halvings)
      throw std::runtime_error("integrate: energy drift gate not met over the full run");
    dt *= 0.5;
  }
}

SectionPoints poincare_section(const ModelSpec& model, const Trajectory& traj,
                               const PoincareOptions& opts) {
  SectionPoints out;
  out.increasing_x = opts.increasing_x;
  const double sign = opts.increasing_x ? 1.0 : -1.0;
  // March to the plane with x as the independent variable:
  // d(x, px, y, py, t)/dx = (1, pxdot, ydot, pydot, 1) / xdot.
  auto xfield = [&model](const std::array<double, 5>& q) {
    const State s{q[0], q[1], q[2], q[3]};
    const auto f = model.eval_field(s);
    return std::array<double, 5>{1.0, f[1] / f[0], f[2] / f[0], f[3] / f[0], 1.0 / f[0]};
  };
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    State a = traj.states[k];
    const State& b = traj.states[k + 1];
    if (!(sign * a[0] <= 0.0 && sign * b[0] > 0.0)) continue;
    if (sign * a[1] <= 1e-8) {
      // p_x not yet pointing across the plane: bisect in time first.
      double lo = 0.0, hi = traj.times[k + 1] - traj.times[k];
      for (int it = 0; it < 40 && sign * a[1] <= 1e-8; ++it) {
        const double mid = 0.5 * (lo + hi);
        State m = rk8_step(model, traj.states[k], mid);
        if (sign * m[0] > 0.0) {
          hi = mid;
        } else {
          lo = mid;
          a = m;
        }
      }
      if (sign * a[1] <= 1e-8) continue;  // tangential pass, skip
    }
    std::array<double, 5> q{a[0], a[1], a[2], a[3], 0.0};
    const int sub = 2;
    const double dx = -a[0] / (double)sub;
    for (int ssub = 0; ssub < sub; ++ssub) q = rk8_step_generic<5>(xfield, q, dx);
    if (std::abs(q[0]) > opts.refine_tol) {
      // One polishing pass; the marching variable lands on 0 up to roundoff.
      q = rk8_step_generic<5>(xfield, q, -q[0]);
    }
    if (sign * q[1] <= 0.0) continue;  // wrong crossing direction
    out.points.push_back({q[2], q[3]});
  }
  return out;
}

std::vector<SpectralLine> fundamental_frequencies(std::span<const Complex> signal, double dt,
                                                  int count, const NaffOptions& opts) {
  if (signal.size() < 16) throw std::invalid_argument("fundamental_frequencies: signal too short");
  std::vector<Complex> work(signal.begin(), signal.end());
  const std::size_t N = work.size();
  std::size_t npad = 1;
  while (npad < 4 * N) npad <<= 1;

  std::vector<SpectralLine> lines;
  for (int found = 0; found < count; ++found) {
    // Windowed, zero-padded spectrum for the initial peak location.
    std::vector<Complex> buf(npad, Complex{0.0, 0.0});
    for (std::size_t n = 0; n < N; ++n) buf[n] = work[n] * hann(n, N);
    radix2_fft(buf, false);
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t kbin = 0; kbin < npad; ++kbin) {
      const double m = std::norm(buf[kbin]);
      if (m <= best_mag) continue;
      double f = 2.0 * kPi * (double)kbin / ((double)npad * dt);
      if (kbin > npad / 2) f -= 2.0 * kPi / dt;
      bool near = false;
      for (const SpectralLine& l : lines)
        if (std::abs(l.frequency - f) < opts.min_separation) near = true;
      if (near) continue;
      best = kbin;
      best_mag = m;
    }
    double f0 = 2.0 * kPi * (double)best / ((double)npad * dt);
    if (best > npad / 2) f0 -= 2.0 * kPi / dt;

    // Golden-section refinement of the windowed projection magnitude.
    const double binw = 2.0 * kPi / ((double)npad * dt);
    double lo = f0 - 2.0 * binw, hi = f0 + 2.0 * binw;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double g1 = std::norm(projection(work, dt, x1));
    double g2 = std::norm(projection(work, dt, x2));
    for (int it = 0; it < opts.refine_iters; ++it) {
      if (g1 < g2) {
        lo = x1;
        x1 = x2;
        g1 = g2;
        x2 = lo + gr * (hi - lo);
        g2 = std::norm(projection(work, dt, x2));
      } else {
        hi = x2;
        x2 = x1;
        g2 = g1;
        x1 = hi - gr * (hi - lo);
        g1 = std::norm(projection(work, dt, x1));
      }
    }
    const double freq = 0.5 * (lo + hi);
    const Complex amp = projection(work, dt, freq);
    lines.push_back({freq, amp});
    // Subtract the found line and continue on the residual.
    const Complex rot{std::cos(freq * dt), std::sin(freq * dt)};
    Complex ph{1.0, 0.0};
    for (std::size_t n = 0; n < N; ++n) {
      work[n] -= amp * ph;
      ph *= rot;
    }
  }
  std::sort(lines.begin(), lines.end(), [](const SpectralLine& a, const SpectralLine& b) {
    return std::abs(a.amplitude) > std::abs(b.amplitude);
  });
  return lines;
}

Complex amplitude_at(std::span<const Complex> signal, double dt, double freq) {
  return projection(signal, dt, freq);
}

}  // namespace sqmat
