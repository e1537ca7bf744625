#include "sqmat/perturbation.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace sqmat {

PhiField phi_fields(const Combination& comb, const ChainPair& chains, const ModelSpec& model,
                    const TorusGrid& grid, const PhiOptions& opts) {
  (void)chains;
  PhiField out;
  out.N1 = grid.N1;
  out.N2 = grid.N2;
  const long nodes = static_cast<long>(grid.states.size());
  out.phi[0].assign(nodes, Complex{0.0, 0.0});
  out.phi[1].assign(nodes, Complex{0.0, 0.0});

  const BasisLayout& Lv = comb.v_poly[0].layout();
  const BasisLayout& Lf = model.resonance_field[0].layout();
  const Complex I{0.0, 1.0};

  std::atomic<bool> blowup{false};
  const bool par = opts.exec == Exec::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (long n = 0; n < nodes; ++n) {
    if (blowup.load(std::memory_order_relaxed)) continue;
    const auto z = to_resonance(grid.states[n]);
    const auto mv = monomial_values(Lv, z);
    const auto mf = monomial_values(Lf, z);
    std::array<Complex, 4> zdot;
    for (int q = 0; q < 4; ++q) zdot[q] = dot(model.resonance_field[q], mf);
    for (int l = 0; l < 2; ++l) {
      const Complex v = dot(comb.v_poly[l], mv);
      if (std::abs(v) < opts.min_action_abs) {
        blowup.store(true, std::memory_order_relaxed);
        break;
      }
      Complex vdot{0.0, 0.0};
      for (int q = 0; q < 4; ++q) vdot += dot(comb.v_dz[l][q], mv) * zdot[q];
      out.phi[l][n] = -I * vdot / v - comb.mu;
    }
  }
  if (blowup.load())
    throw std::runtime_error("phi_fields: action magnitude below the division guard");

  for (int l = 0; l < 2; ++l) {
    out.tables[l] = fourier2d(out.phi[l], grid.N1, grid.N2, opts.wn, opts.wm, opts.exec);
    out.mean[l] = out.tables[l].at(0, 0);
  }
  return out;
}

FrequencyUpdate update_frequencies(const PhiField& phi, double mu) {
  FrequencyUpdate up;
  for (int l = 0; l < 2; ++l) {
    up.omega[l] = mu + phi.mean[l].real();
    up.im_residual = std::max(up.im_residual, std::abs(phi.mean[l].imag()));
  }
  return up;
}

ThetaTables theta_tables(const PhiField& phi, const Combination& comb,
                         const ThetaOptions& opts) {
  ThetaTables out;
  out.omega = comb.omega;
  out.theta0 = comb.theta0;
  const double floor = opts.divisor_floor_factor * std::min(comb.omega[0], comb.omega[1]);
  const Complex I{0.0, 1.0};

  for (int l = 0; l < 2; ++l) {
    const FourierTable& pt = phi.tables[l];
    const int wn = pt.wn(), wm = pt.wm();
    double phi_max = 0.0;
    for (const Complex& c : pt.raw()) phi_max = std::max(phi_max, std::abs(c));
    FourierTable th(wn, wm);
    for (int n = -wn; n <= wn; ++n)
      for (int m = -wm; m <= wm; ++m) {
        if (n == 0 && m == 0) continue;
        const double div = n * comb.omega[0] + m * comb.omega[1];
        const Complex p = pt.at(n, m);
        if (std::abs(div) < floor) {
          if (std::abs(p) > opts.noise_floor * phi_max) {
            if (opts.strict_small_divisor)
              throw std::runtime_error("theta_tables: resonance obstruction at line (" +
                                       std::to_string(n) + "," + std::to_string(m) + ")");
            out.zeroed.push_back({l + 1, n, m, div, std::abs(p)});
          }
          continue;  // line zeroed
        }
        th.at(n, m) = p / (I * div);
      }
    // Zero initial deviation: Delta theta_l(theta0) = 0.
    Complex s{0.0, 0.0};
    for (int n = -wn; n <= wn; ++n)
      for (int m = -wm; m <= wm; ++m) {
        if (n == 0 && m == 0) continue;
        if (th.at(n, m) != Complex{0.0, 0.0})
          s += th.at(n, m) * std::polar(1.0, n * comb.theta0[0] + m * comb.theta0[1]);
      }
    th.at(0, 0) = -s;
    out.theta[l] = std::move(th);
  }
  return out;
}

Complex theta_deviation(const ThetaTables& t, int l, double theta1, double theta2) {
  return synthesize(t.theta[l], theta1, theta2);
}

std::array<FourierTable, 2> first_order_actions(const ThetaTables& theta) {
  const Complex I{0.0, 1.0};
  std::array<FourierTable, 2> out;
  for (int l = 0; l < 2; ++l) {
    const FourierTable& th = theta.theta[l];
    const int wn = th.wn(), wm = th.wm();
    FourierTable v(wn, wm);
    const int main_n = (l == 0) ? 1 : 0;
    const int main_m = (l == 0) ? 0 : 1;
    v.at(main_n, main_m) = 1.0 + I * th.at(0, 0);
    for (int k = -wn; k <= wn; ++k)
      for (int m = -wm; m <= wm; ++m) {
        if (k == main_n && m == main_m) continue;
        const int sn = k - main_n;  // index of the theta line feeding (k, m)
        const int sm = m - main_m;
        if (!th.contains(sn, sm)) continue;
        const Complex t = th.at(sn, sm);
        if (t == Complex{0.0, 0.0}) continue;
        v.at(k, m) = I * t * std::polar(1.0, sn * theta.theta0[0] + sm * theta.theta0[1]);
      }
    out[l] = std::move(v);
  }
  return out;
}

}  // namespace sqmat
