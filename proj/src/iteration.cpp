#include "sqmat/iteration.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "sqmat/validation.hpp"

namespace sqmat {

namespace {

// Side lines only: the main lines are pinned differently by construction
// (the re-minimized table by the constraint, the first-order table by the
// zero-initial-deviation constant) and coincide only in the rigid part.
double spectrum_agreement(const FourierTable& minimized, const FourierTable& first_order,
                          int main_n, int main_m) {
  double worst = 0.0;
  const int wn = std::min(minimized.wn(), first_order.wn());
  const int wm = std::min(minimized.wm(), first_order.wm());
  for (int n = -wn; n <= wn; ++n)
    for (int m = -wm; m <= wm; ++m) {
      if (n == main_n && m == main_m) continue;
      worst = std::max(worst,
                       std::abs(std::abs(minimized.at(n, m)) - std::abs(first_order.at(n, m))));
    }
  return worst;
}

bool dominant(const FluctuationReport& rep, double ratio) {
  return rep.main_abs[0] >= ratio * rep.max_side_abs[0] &&
         rep.main_abs[1] >= ratio * rep.max_side_abs[1];
}

// Step (iv): pull the grid states onto the first-order torus by inverting
// v_l = r_l e^{i theta_l} (1 + i Delta theta_l).
TorusGrid improve_grid(const Combination& comb, const ThetaTables& theta,
                       const ChainPair& chains, const TorusGrid& grid,
                       const SolveConfig& config) {
  TorusGrid out;
  out.N1 = grid.N1;
  out.N2 = grid.N2;
  out.states.assign(grid.states.size(), State{});
  const Complex I{0.0, 1.0};
  std::exception_ptr err = nullptr;
  std::atomic<bool> failed{false};
#pragma omp parallel for schedule(static) if (config.exec == Exec::parallel)
  for (int i = 0; i < grid.N1; ++i) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      for (int j = 0; j < grid.N2; ++j) {
        const double th1 = grid.theta1(i), th2 = grid.theta2(j);
        const Complex t1 =
            std::polar(comb.r[0], th1) * (1.0 + I * synthesize(theta.theta[0], th1, th2));
        const Complex t2 =
            std::polar(comb.r[1], th2) * (1.0 + I * synthesize(theta.theta[1], th1, th2));
        out.states[out.idx(i, j)] =
            invert_actions(comb, t1, t2, grid.states[grid.idx(i, j)], config.invert);
      }
    } catch (...) {
#pragma omp critical
      {
        if (!failed.exchange(true)) err = std::current_exception();
      }
    }
  }
  if (err) std::rethrow_exception(err);
  fill_chain_values(out, chains, config.exec);
  return out;
}

std::vector<TruncPoly> chain_rows(const ChainPair& chains, int n_v) {
  std::vector<TruncPoly> rows{chains.x.rows[0], chains.y.rows[0]};
  if (n_v >= 4) {
    if (chains.x.length() < 2 || chains.y.length() < 2)
      throw std::runtime_error("n_v = 4 requires chains of length >= 2");
    rows.push_back(chains.x.rows[1]);
    rows.push_back(chains.y.rows[1]);
  }
  return rows;
}

}  // namespace

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::running: return "running";
    case SolveStatus::converged: return "converged";
    case SolveStatus::diverged: return "diverged";
    case SolveStatus::obstructed: return "obstructed";
  }
  return "unknown";
}

SolveResult solve_seeded(const ModelSpec& model, const ChainPair& chains, const State& state0,
                         const SolveConfig& config, const Combination* seed) {
  if (std::abs(model.mu_x - model.mu_y) > 1e-12)
    throw std::invalid_argument("solve: the pairing assumes the 1:1 resonance mu_x = mu_y");
  const double mu = model.mu_x;

  SolveResult result;
  result.state0 = state0;
  auto fail = [&](SolveStatus st, const std::string& msg) {
    result.final.status = st;
    result.final.message = msg;
    return result;
  };

  int n_v = config.nv_schedule.empty() ? 2 : config.nv_schedule.front();
  const int n_v_max = config.nv_schedule.empty() ? 2 : config.nv_schedule.back();

  Combination comb;
  try {
    if (seed) {
      n_v = seed->n_v;
      comb = make_combination(chain_rows(chains, seed->n_v), seed->a, mu);
      comb.omega = seed->omega;
      anchor(comb, state0);
    } else {
      comb = initial_combination(chains, state0, mu);
    }
  } catch (const std::exception& e) {
    return fail(SolveStatus::obstructed, std::string("bootstrap: ") + e.what());
  }

  SampleOptions so;
  so.seed_state = state0;
  so.exec = config.exec;
  so.invert = config.invert;
  TorusGrid grid;
  try {
    grid = sample_torus(comb, chains, config.grid_n1, config.grid_n2, so);
  } catch (const std::exception& e) {
    return fail(SolveStatus::obstructed, std::string("initial torus: ") + e.what());
  }

  PhiOptions po;
  po.wn = config.window_n;
  po.wm = config.window_m;
  po.exec = config.exec;

  double prev_g0 = std::numeric_limits<double>::quiet_NaN();
  int grow = 0;
  bool nv_locked = false;
  for (int it = 1; it <= config.max_iterations; ++it) {
    try {
      PhiField phi = phi_fields(comb, chains, model, grid, po);
      const FrequencyUpdate up = update_frequencies(phi, mu);
      comb.omega = up.omega;
      ThetaTables theta = theta_tables(phi, comb, config.theta);
      auto first = first_order_actions(theta);

      TorusGrid improved = improve_grid(comb, theta, chains, grid, config);
      std::array<FourierTable, 4> wt;
      for (int k = 0; k < 4; ++k)
        wt[k] = fourier2d(improved.w[k], improved.N1, improved.N2, config.window_n,
                          config.window_m, config.exec);

      auto run_minimize = [&](int nv) {
        std::vector<FourierTable> tables(wt.begin(), wt.begin() + nv);
        return minimize_fluctuation(tables);
      };
      auto [a_new, report] = run_minimize(n_v);
      const bool settled =
          it >= 2 && !std::isnan(prev_g0) &&
          std::abs(report.g0 - prev_g0) / std::max(report.g0, 1e-300) < config.tol_g;
      // Raising n_v before the main lines dominate tends to stall or fold
      // the torus, so the escalation waits for a dominant spectrum and at
      // least one completed iteration; an already settled spectrum converges
      // as is.
      if (!nv_locked && n_v < n_v_max && it >= 2 && !settled &&
          dominant(report, config.dominance_ratio)) {
        n_v = n_v_max;
        std::tie(a_new, report) = run_minimize(n_v);
      }

      IterationRecord rec;
      rec.index = it;
      rec.omega = up.omega;
      rec.im_residual = up.im_residual;
      rec.v1_first = first[0];
      rec.v2_first = first[1];
      auto fill_record = [&]() {
        rec.n_v = n_v;
        rec.g0 = report.g0;
        rec.rel_g0_change = std::isnan(prev_g0)
                                ? 1.0
                                : std::abs(report.g0 - prev_g0) / std::max(report.g0, 1e-300);
        rec.spectrum_agreement = std::max(spectrum_agreement(report.v1_lines, first[0], 1, 0),
                                          spectrum_agreement(report.v2_lines, first[1], 0, 1));
        rec.side_ratio = {report.side_ratio(0), report.side_ratio(1)};
        rec.dominant = dominant(report, config.dominance_ratio);
        rec.a = a_new;
        rec.v1_min = report.v1_lines;
        rec.v2_min = report.v2_lines;
      };
      fill_record();

      Combination comb_next = make_combination(chain_rows(chains, n_v), a_new, mu);
      comb_next.omega = up.omega;
      anchor(comb_next, state0);

      const double side_max = std::max(report.max_side_abs[0], report.max_side_abs[1]);
      const double agree_tol = std::max(config.spectrum_tol, config.spectrum_rel * side_max);
      const double im_tol = std::max(config.tol_im, config.tol_im_rel * side_max * side_max);
      const bool g0_settled =
          report.g0 < config.g0_floor || (it >= 2 && rec.rel_g0_change < config.tol_g);
      const bool converged = g0_settled && up.im_residual < im_tol &&
                             rec.spectrum_agreement < agree_tol;
      grow = (!std::isnan(prev_g0) && report.g0 > config.divergence_growth * prev_g0)
                 ? grow + 1
                 : 0;
      const bool diverged = grow >= config.divergence_run;

      if (converged || diverged || it == config.max_iterations) {
        result.history.push_back(rec);
        result.final.iteration = it;
        result.final.comb = comb;
        result.final.theta = std::move(theta);
        result.final.fluct = std::move(report);
        result.final.im_residual = up.im_residual;
        result.final.status = converged ? SolveStatus::converged : SolveStatus::diverged;
        if (!converged)
          result.final.message = diverged ? "g0 grew over consecutive iterations"
                                          : "iteration budget exhausted";
        result.comb_next = std::move(comb_next);
        result.grid = std::move(improved);
        result.w_tables = std::move(wt);
        return result;
      }

      // Resample the torus for the next pass. If the richer combination
      // folds the torus (large chain-1 coefficients at small amplitude do
      // this), fall back to n_v = 2 for the rest of the solve.
      SampleOptions warm;
      warm.warm = &improved;
      warm.exec = config.exec;
      warm.invert = config.invert;
      TorusGrid next_grid;
      try {
        next_grid = sample_torus(comb_next, chains, config.grid_n1, config.grid_n2, warm);
      } catch (const InversionFailure&) {
        const int base_nv = config.nv_schedule.empty() ? 2 : config.nv_schedule.front();
        if (n_v <= base_nv) throw;
        n_v = base_nv;
        nv_locked = true;
        std::tie(a_new, report) = run_minimize(n_v);
        fill_record();
        comb_next = make_combination(chain_rows(chains, n_v), a_new, mu);
        comb_next.omega = up.omega;
        anchor(comb_next, state0);
        next_grid = sample_torus(comb_next, chains, config.grid_n1, config.grid_n2, warm);
      }
      result.history.push_back(rec);
      prev_g0 = report.g0;
      comb = std::move(comb_next);
      grid = std::move(next_grid);
    } catch (const InversionFailure& f) {
      return fail(SolveStatus::obstructed,
                  std::string(f.what()) + " (residual " + std::to_string(f.residual) + ")");
    } catch (const std::exception& e) {
      return fail(SolveStatus::obstructed, e.what());
    }
  }
  return fail(SolveStatus::diverged, "iteration budget exhausted");
}

SolveResult solve(const ModelSpec& model, const State& state0, const SolveConfig& config) {
  SquareMatrix M = build_square_matrix(model, config.n_s);
  ChainPair chains = jordan_chains(M, model.mu_x);
  return solve_seeded(model, chains, state0, config, nullptr);
}

SolveResult continue_amplitude(const ModelSpec& model, const SolveResult& prev,
                               const State& new_state0, const SolveConfig& config) {
  if (!prev.converged())
    throw std::invalid_argument("continue_amplitude: previous solve did not converge");
  SquareMatrix M = build_square_matrix(model, config.n_s);
  ChainPair chains = jordan_chains(M, model.mu_x);
  return solve_seeded(model, chains, new_state0, config, &prev.comb_next);
}

BoundaryScan scan_boundary(const ModelSpec& model, double E,
                           std::span<const std::array<double, 2>> probes,
                           const SolveConfig& config, const ScanOptions& scan_opts) {
  BoundaryScan scan;
  scan.energy = E;
  SquareMatrix M = build_square_matrix(model, config.n_s);
  ChainPair chains = jordan_chains(M, model.mu_x);

  Combination last_good;
  bool have_seed = false;
  for (const auto& probe : probes) {
    ProbeOutcome out;
    out.y0 = probe[0];
    out.py0 = probe[1];
    State s0;
    try {
      s0 = initial_state(model, E, 0.0, probe[0], probe[1]);
    } catch (const std::exception& e) {
      out.status = SolveStatus::obstructed;
      out.message = e.what();
      scan.probes.push_back(out);
      continue;
    }
    SolveResult res = solve_seeded(model, chains, s0, config, have_seed ? &last_good : nullptr);
    out.status = res.final.status;
    out.iterations = res.iterations();
    out.message = res.final.message;
    if (!res.history.empty()) {
      out.g0 = res.history.back().g0;
      out.side_ratio = res.history.back().side_ratio[1];
    }
    if (res.converged()) {
      last_good = res.comb_next;
      have_seed = true;
    }
    if (scan_opts.validate_with_oracle) {
      try {
        if (res.converged()) {
          ValidateOptions vo;
          vo.t_end = scan_opts.oracle_t_end;
          OracleComparison cmp = compare_with_oracle(model, res, vo);
          out.invariant_residual = cmp.kam_radius_std[1];
          out.oracle_dispersion = section_dispersion(model, cmp.trajectory);
          out.section_escaped = section_min_py(model, cmp.trajectory) < 0.0;
        } else {
          Trajectory tr = integrate(model, s0, scan_opts.oracle_t_end);
          out.oracle_dispersion = section_dispersion(model, tr);
          out.section_escaped = section_min_py(model, tr) < 0.0;
        }
      } catch (const std::exception& e) {
        out.message += std::string(out.message.empty() ? "" : "; ") +
                       "oracle validation failed: " + e.what();
      }
    }
    scan.probes.push_back(out);
  }

  if (scan_opts.estimate_onset && scan_opts.validate_with_oracle) {
    // Along the (0, p_y0) family the section curve stays confined to the
    // upper island until the separatrix; bracket the escape and bisect.
    double lo = -1.0, hi = -1.0;  // lo: escaped, hi: confined (py0 values)
    for (const ProbeOutcome& p : scan.probes) {
      if (p.y0 != 0.0 || p.oracle_dispersion < 0.0) continue;
      if (!p.section_escaped) {
        if (hi < 0.0 || p.py0 < hi) hi = p.py0;
      } else {
        if (p.py0 > lo) lo = p.py0;
      }
    }
    if (lo > 0.0 && hi > lo) {
      for (int it = 0; it < 6; ++it) {
        const double mid = 0.5 * (lo + hi);
        bool escaped = false;
        try {
          Trajectory tr =
              integrate(model, initial_state(model, E, 0.0, 0.0, mid), scan_opts.onset_t_end);
          escaped = section_min_py(model, tr) < 0.0;
        } catch (const std::exception&) {
          break;
        }
        (escaped ? lo : hi) = mid;
      }
      scan.chaos_onset_py0 = 0.5 * (lo + hi);
    }
  }
  return scan;
}

}  // namespace sqmat
