#include "sqmat/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace sqmat {

OracleComparison compare_with_oracle(const ModelSpec& model, const SolveResult& result,
                                     const ValidateOptions& opts) {
  OracleComparison cmp;
  const Combination& comb = result.final.comb;
  const ThetaTables& theta = result.final.theta;

  IntegrateOptions io;
  io.dt = opts.dt;
  cmp.trajectory = integrate(model, result.state0, opts.t_end, io);
  const Trajectory& tr = cmp.trajectory;
  const double dt = tr.dt;

  // Normalized action series along the oracle orbit.
  std::array<std::vector<Complex>, 2> vbar;
  for (auto& v : vbar) v.resize(tr.states.size());
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    const auto v = comb.action_values(tr.states[k]);
    vbar[0][k] = v[0] / comb.r[0];
    vbar[1][k] = v[1] / comb.r[1];
  }
  for (int l = 0; l < 2; ++l) {
    cmp.v_radius_std[l] = radius_fluctuation(vbar[l]);
    // dominant line = the oracle's fundamental frequency of this action
    auto lines = fundamental_frequencies(vbar[l], dt, 1);
    cmp.oracle_omega[l] = lines[0].frequency;
  }

  // Spectral agreement: solve-side line magnitudes come from the first-order
  // tables (time-series convention), oracle-side from Hann projections at
  // n omega1 + m omega2 with the oracle's own frequencies.
  auto first = first_order_actions(theta);
  double worst = 0.0;
  for (int l = 0; l < 2; ++l) {
    const int W = opts.line_window;
    for (int n = -W; n <= W; ++n)
      for (int m = -W; m <= W; ++m) {
        double solve_abs = 0.0;
        if (first[l].contains(n, m)) solve_abs = std::abs(first[l].at(n, m));
        const double freq = n * cmp.oracle_omega[0] + m * cmp.oracle_omega[1];
        const double oracle_abs = std::abs(amplitude_at(vbar[l], dt, freq));
        if (solve_abs < opts.line_floor && oracle_abs < opts.line_floor) continue;
        worst = std::max(worst, std::abs(solve_abs - oracle_abs));
      }
  }
  cmp.line_agreement = worst;

  // Short-window time-domain deviation of the exponential-form first-order
  // action from the oracle.
  double dev = 0.0;
  const std::size_t k_end =
      std::min(tr.states.size(), static_cast<std::size_t>(opts.t_compare / dt) + 1);
  for (std::size_t k = 0; k < k_end; ++k) {
    const double t = tr.times[k];
    const double th1 = comb.omega[0] * t + comb.theta0[0];
    const double th2 = comb.omega[1] * t + comb.theta0[1];
    const auto v1 = forward_transform(theta, th1, th2);
    dev = std::max(dev, std::abs(v1[0] - vbar[0][k]));
    dev = std::max(dev, std::abs(v1[1] - vbar[1][k]));
  }
  cmp.time_domain_dev = dev;

  // Invariant statistics on a subsampled orbit.
  KamInvariant inv{theta, comb};
  std::array<std::vector<Complex>, 2> v0;
  std::vector<double> times;
  for (std::size_t k = 0; k < tr.states.size(); k += opts.orbit_stride) {
    const auto v = kam_values(inv, tr.states[k]);
    v0[0].push_back(v[0]);
    v0[1].push_back(v[1]);
    times.push_back(tr.times[k]);
  }
  cmp.kam_radius_std[0] = radius_fluctuation(v0[0]);
  cmp.kam_radius_std[1] = radius_fluctuation(v0[1]);

  // Rotation-number constancy: unwrap arg(vbar01), fit a line, take the
  // worst deviation.
  std::vector<double> ph(v0[0].size());
  double prev = std::arg(v0[0][0]);
  double acc = prev;
  ph[0] = acc;
  for (std::size_t k = 1; k < v0[0].size(); ++k) {
    double a = std::arg(v0[0][k]);
    double d = a - prev;
    while (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
    while (d < -std::numbers::pi) d += 2.0 * std::numbers::pi;
    acc += d;
    prev = a;
    ph[k] = acc;
  }
  // least-squares line fit
  double st = 0.0, sp = 0.0, stt = 0.0, stp = 0.0;
  const double N = static_cast<double>(ph.size());
  for (std::size_t k = 0; k < ph.size(); ++k) {
    st += times[k];
    sp += ph[k];
    stt += times[k] * times[k];
    stp += times[k] * ph[k];
  }
  const double slope = (N * stp - st * sp) / (N * stt - st * st);
  const double icept = (sp - slope * st) / N;
  double wobble = 0.0;
  for (std::size_t k = 0; k < ph.size(); ++k)
    wobble = std::max(wobble, std::abs(ph[k] - (slope * times[k] + icept)));
  cmp.rotation_residual = wobble;
  return cmp;
}

double section_dispersion(const ModelSpec& model, const State& s0, double t_end) {
  return section_dispersion(model, integrate(model, s0, t_end));
}

double section_min_py(const ModelSpec& model, const Trajectory& tr) {
  SectionPoints sec = poincare_section(model, tr);
  double pmin = std::numeric_limits<double>::infinity();
  for (auto& p : sec.points) pmin = std::min(pmin, p[1]);
  return pmin;
}

double section_dispersion(const ModelSpec& model, const Trajectory& tr) {
  SectionPoints sec = poincare_section(model, tr);
  if (sec.points.size() < 8) return -1.0;

  double cy = 0.0, cp = 0.0;
  for (auto& p : sec.points) {
    cy += p[0];
    cp += p[1];
  }
  cy /= static_cast<double>(sec.points.size());
  cp /= static_cast<double>(sec.points.size());

  struct Polar {
    double ang, rad;
  };
  std::vector<Polar> pts;
  pts.reserve(sec.points.size());
  for (auto& p : sec.points)
    pts.push_back({std::atan2(p[1] - cp, p[0] - cy), std::hypot(p[0] - cy, p[1] - cp)});
  std::sort(pts.begin(), pts.end(), [](const Polar& a, const Polar& b) { return a.ang < b.ang; });

  // Local radial scatter: median |r_i - (r_{i-1} + r_{i+1})/2| / mean radius.
  const std::size_t n = pts.size();
  double mean_r = 0.0;
  for (const Polar& p : pts) mean_r += p.rad;
  mean_r /= static_cast<double>(n);
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double rm = pts[(i + n - 1) % n].rad;
    const double rp = pts[(i + 1) % n].rad;
    dev[i] = std::abs(pts[i].rad - 0.5 * (rm + rp));
  }
  std::nth_element(dev.begin(), dev.begin() + n / 2, dev.end());
  return dev[n / 2] / mean_r;
}

}  // namespace sqmat
