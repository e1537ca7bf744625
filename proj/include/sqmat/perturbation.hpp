#pragma once

#include <vector>

#include "sqmat/torusmap.hpp"

namespace sqmat {

/// Exact phase-advance deviation fields on the torus grid:
/// phi_l = -i (sum_j a_lj wdot_j) / v_l - mu, with wdot_j computed by the
/// chain rule through the model's vector field (not the Jordan shortcut).
struct PhiField {
  int N1 = 0, N2 = 0;
  std::array<std::vector<Complex>, 2> phi;  // per node, l = 1, 2
  std::array<Complex, 2> mean{};            // plane averages (the (0,0) lines)
  std::array<FourierTable, 2> tables;       // Fourier tables of phi_1, phi_2
};

struct PhiOptions {
  int wn = 40, wm = 40;  // clipped below the grid Nyquist by fourier2d
  Exec exec = Exec::parallel;
  double min_action_abs = 1e-12;  // division blowup guard on |v_l|
};

PhiField phi_fields(const Combination& comb, const ChainPair& chains, const ModelSpec& model,
                    const TorusGrid& grid, const PhiOptions& opts = {});

/// omega_l = mu + Re(mean phi_l); the imaginary parts are the convergence
/// indicator and are returned as their max magnitude.
struct FrequencyUpdate {
  std::array<double, 2> omega{};
  double im_residual = 0.0;
};

FrequencyUpdate update_frequencies(const PhiField& phi, double mu);

/// Integrated deviation tables: theta_lnm = phi_lnm / (i (n omega1 + m
/// omega2)) for |n|+|m| != 0, with the (0,0) coefficient chosen so the
/// deviation vanishes at the initial phases. Lines whose divisor magnitude
/// falls below the floor are zeroed and reported (or rejected when strict).
struct ThetaTables {
  std::array<FourierTable, 2> theta;
  std::array<double, 2> omega{};
  std::array<double, 2> theta0{};
  struct SmallDivisor {
    int l, n, m;
    double divisor;
    double phi_abs;
  };
  std::vector<SmallDivisor> zeroed;
};

struct ThetaOptions {
  double divisor_floor_factor = 1e-3;  // floor = factor * min(omega1, omega2)
  double noise_floor = 1e-12;          // relative to the largest phi line
  bool strict_small_divisor = false;   // throw instead of zero+report
};

ThetaTables theta_tables(const PhiField& phi, const Combination& comb,
                         const ThetaOptions& opts = {});

/// Deviation Delta theta_l at given phases (synthesis of the theta table).
Complex theta_deviation(const ThetaTables& t, int l, double theta1, double theta2);

/// Spectra of the normalized first-order actions in the time-series index
/// convention: main line (1,0) [(0,1)] holds 1 + i theta_l00, the side line
/// (k, m) holds i theta_{l,k-1,m} e^{i((k-1) theta10 + m theta20)} for l = 1
/// (index shifted in the second slot for l = 2).
std::array<FourierTable, 2> first_order_actions(const ThetaTables& theta);

}  // namespace sqmat
