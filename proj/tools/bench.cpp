// Benchmark comparing the serial reference kernels against their OpenMP
// variants: the torus-grid Newton sweep, the chain-row payload evaluation,
// and the 2-D Fourier transform. Prints timings, speedups and the largest
// deviation between the two paths.

#include <chrono>
#include <cstdio>

#include "sqmat/iteration.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace sqmat;

namespace {

double seconds(std::chrono::steady_clock::time_point a,
               std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

template <typename F>
double timed(F&& f, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, seconds(t0, t1));
  }
  return best;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: not enabled\n");
#endif

  ModelSpec model = henon_heiles();
  SquareMatrix M = build_square_matrix(model, 5);
  ChainPair chains = jordan_chains(M, 1.0);
  State s0 = initial_state(model, 1.0 / 12.0, 0.0, 0.0, 0.18);
  Combination comb = initial_combination(chains, s0, 1.0);

  const int N = 96;
  SampleOptions ser, par;
  ser.seed_state = par.seed_state = s0;
  ser.exec = Exec::serial;
  par.exec = Exec::parallel;

  TorusGrid gs, gp;
  const double t_ser = timed([&] { gs = sample_torus(comb, chains, N, N, ser); });
  const double t_par = timed([&] { gp = sample_torus(comb, chains, N, N, par); });
  double dev = 0.0;
  for (std::size_t k = 0; k < gs.states.size(); ++k)
    for (int q = 0; q < 4; ++q) dev = std::max(dev, std::abs(gs.states[k][q] - gp.states[k][q]));
  std::printf("torus sweep %dx%d      serial %7.3f s  parallel %7.3f s  speedup %.2fx  max|diff| %.1e\n",
              N, N, t_ser, t_par, t_ser / t_par, dev);

  TorusGrid tmp = gs;
  const double f_ser = timed([&] { fill_chain_values(tmp, chains, Exec::serial); });
  auto serial_w = tmp.w;
  const double f_par = timed([&] { fill_chain_values(tmp, chains, Exec::parallel); });
  dev = 0.0;
  for (int k = 0; k < 4; ++k)
    for (std::size_t n = 0; n < tmp.w[k].size(); ++n)
      dev = std::max(dev, std::abs(tmp.w[k][n] - serial_w[k][n]));
  std::printf("chain payload %dx%d    serial %7.3f s  parallel %7.3f s  speedup %.2fx  max|diff| %.1e\n",
              N, N, f_ser, f_par, f_ser / f_par, dev);

  FourierTable ts, tp;
  const double d_ser = timed([&] { ts = fourier2d(gs.w[0], N, N, 40, 40, Exec::serial); });
  const double d_par = timed([&] { tp = fourier2d(gs.w[0], N, N, 40, 40, Exec::parallel); });
  dev = 0.0;
  for (std::size_t k = 0; k < ts.raw().size(); ++k)
    dev = std::max(dev, std::abs(ts.raw()[k] - tp.raw()[k]));
  std::printf("fourier2d %dx%d w=40  serial %7.3f s  parallel %7.3f s  speedup %.2fx  max|diff| %.1e\n",
              N, N, d_ser, d_par, d_ser / d_par, dev);

  PhiOptions po_s, po_p;
  po_s.exec = Exec::serial;
  po_p.exec = Exec::parallel;
  PhiField ps, pp;
  const double p_ser = timed([&] { ps = phi_fields(comb, chains, model, gs, po_s); });
  const double p_par = timed([&] { pp = phi_fields(comb, chains, model, gs, po_p); });
  dev = 0.0;
  for (int l = 0; l < 2; ++l)
    for (std::size_t n = 0; n < ps.phi[l].size(); ++n)
      dev = std::max(dev, std::abs(ps.phi[l][n] - pp.phi[l][n]));
  std::printf("phi fields %dx%d      serial %7.3f s  parallel %7.3f s  speedup %.2fx  max|diff| %.1e\n",
              N, N, p_ser, p_par, p_ser / p_par, dev);
  return 0;
}
