// Command-line front end: builds the square matrix and its chains, runs the
// iterative action-angle solve, emits Poincare section data, and scans the
// convergence boundary. All numeric output is CSV with a config-hash header
// plus a JSON manifest per command; plotting is left to external tooling.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "sqmat/iteration.hpp"
#include "sqmat/kaminvariant.hpp"
#include "sqmat/validation.hpp"

using json = nlohmann::ordered_json;
using namespace sqmat;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitObstructed = 3;
constexpr int kExitConfig = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string model = "henon-heiles";
  double energy = 1.0 / 12.0;
  double x0 = 0.0, y0 = 0.0, py0 = 0.18;
  int n_s = 5;
  int grid = 64;
  int window = 40;
  int max_iterations = 30;
  double tol_g = 1e-3;
  double tol_im = 1e-4;
  double dominance_ratio = 2.0;
  std::vector<int> nv_schedule{2, 4};
  std::string seed_solution;
  std::string out_dir = ".";
  double t_end = 2000.0;
  double section_t = 600.0;
  bool serial = false;
  bool dump_matrix = false;
  bool dump_chains = false;
  bool validate = true;
  std::optional<std::vector<std::array<double, 2>>> probes;
  std::vector<std::string> overlays;

  SolveConfig solve_config() const {
    SolveConfig cfg;
    cfg.n_s = n_s;
    cfg.grid_n1 = cfg.grid_n2 = grid;
    cfg.window_n = cfg.window_m = window;
    cfg.max_iterations = max_iterations;
    cfg.tol_g = tol_g;
    cfg.tol_im = tol_im;
    cfg.dominance_ratio = dominance_ratio;
    cfg.nv_schedule = nv_schedule;
    cfg.exec = serial ? Exec::serial : Exec::parallel;
    return cfg;
  }

  json to_json() const {
    json j;
    j["format_version"] = 1;
    j["model"] = model;
    j["energy"] = energy;
    j["initial"] = {{"x0", x0}, {"y0", y0}, {"py0", py0}};
    j["n_s"] = n_s;
    j["grid"] = grid;
    j["window"] = window;
    j["max_iterations"] = max_iterations;
    j["tol_g"] = tol_g;
    j["tol_im"] = tol_im;
    j["dominance_ratio"] = dominance_ratio;
    j["nv_schedule"] = nv_schedule;
    j["seed_solution"] = seed_solution;
    j["t_end"] = t_end;
    j["section_t"] = section_t;
    j["serial"] = serial;
    j["probes"] = probes.value_or(std::vector<std::array<double, 2>>{});
    j["probes_given"] = probes.has_value();
    j["overlays"] = overlays;
    return j;
  }
};

template <typename T>
void read_field(const json& j, const std::string& key, T& out) {
  try {
    out = j.at(key).get<T>();
  } catch (const std::exception& e) {
    throw ConfigError("config field '" + key + "': " + e.what());
  }
}

void apply_config_file(RunConfig& rc, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  static const std::set<std::string> known = {
      "format_version", "model", "energy", "initial", "n_s", "grid", "window",
      "max_iterations", "tol_g", "tol_im", "dominance_ratio", "nv_schedule",
      "seed_solution", "out_dir", "t_end", "section_t", "serial", "probes", "overlays"};
  for (auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config field '" + key + "'");
  if (j.contains("model")) read_field(j, "model", rc.model);
  if (j.contains("energy")) read_field(j, "energy", rc.energy);
  if (j.contains("initial")) {
    const json& i = j["initial"];
    for (auto& [key, value] : i.items())
      if (key != "x0" && key != "y0" && key != "py0")
        throw ConfigError("unknown config field 'initial." + key + "'");
    if (i.contains("x0")) read_field(i, "x0", rc.x0);
    if (i.contains("y0")) read_field(i, "y0", rc.y0);
    if (i.contains("py0")) read_field(i, "py0", rc.py0);
  }
  if (j.contains("n_s")) read_field(j, "n_s", rc.n_s);
  if (j.contains("grid")) read_field(j, "grid", rc.grid);
  if (j.contains("window")) read_field(j, "window", rc.window);
  if (j.contains("max_iterations")) read_field(j, "max_iterations", rc.max_iterations);
  if (j.contains("tol_g")) read_field(j, "tol_g", rc.tol_g);
  if (j.contains("tol_im")) read_field(j, "tol_im", rc.tol_im);
  if (j.contains("dominance_ratio")) read_field(j, "dominance_ratio", rc.dominance_ratio);
  if (j.contains("nv_schedule")) read_field(j, "nv_schedule", rc.nv_schedule);
  if (j.contains("seed_solution")) read_field(j, "seed_solution", rc.seed_solution);
  if (j.contains("out_dir")) read_field(j, "out_dir", rc.out_dir);
  if (j.contains("t_end")) read_field(j, "t_end", rc.t_end);
  if (j.contains("section_t")) read_field(j, "section_t", rc.section_t);
  if (j.contains("serial")) read_field(j, "serial", rc.serial);
  if (j.contains("probes")) {
    std::vector<std::array<double, 2>> ps;
    read_field(j, "probes", ps);
    rc.probes = std::move(ps);
  }
  if (j.contains("overlays")) read_field(j, "overlays", rc.overlays);
}

void validate_config(const RunConfig& rc) {
  if (rc.n_s < 1 || rc.n_s > 9) throw ConfigError("n_s: expected 1..9");
  if (rc.grid < 8 || rc.grid > 512) throw ConfigError("grid: expected 8..512");
  if (rc.window < 1) throw ConfigError("window: expected >= 1");
  if (rc.max_iterations < 1) throw ConfigError("max_iterations: expected >= 1");
  if (!(rc.tol_g > 0.0) || !(rc.tol_im > 0.0)) throw ConfigError("tolerances must be positive");
  for (int nv : rc.nv_schedule)
    if (nv != 2 && nv != 4) throw ConfigError("nv_schedule: entries must be 2 or 4");
  if (rc.nv_schedule.empty()) throw ConfigError("nv_schedule: must not be empty");
  if (!(rc.t_end > 0.0) || !(rc.section_t > 0.0)) throw ConfigError("horizons must be positive");
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash(const RunConfig& rc) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(rc.to_json().dump())));
  return buf;
}

TruncPoly poly_from_terms(const json& terms, const BasisLayout& L, const std::string& path) {
  TruncPoly p(L);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const json& t = terms[k];
    const std::string at = path + "[" + std::to_string(k) + "]";
    if (!t.contains("exponents") || !t.contains("coefficient"))
      throw ConfigError(at + ": need 'exponents' and 'coefficient'");
    std::vector<int> e = t["exponents"].get<std::vector<int>>();
    if (e.size() != 4) throw ConfigError(at + ".exponents: need 4 entries");
    const double c = t["coefficient"].get<double>();
    int pos;
    try {
      pos = L.index_of(e);
    } catch (const std::exception& ex) {
      throw ConfigError(at + ": " + ex.what());
    }
    p[pos] += Complex{c, 0.0};
  }
  return p;
}

ModelSpec load_model(const std::string& name) {
  if (name == "henon-heiles" || name == "henon_heiles") return henon_heiles();
  std::ifstream in(name);
  if (!in) throw ConfigError("model: not a built-in name and not a readable file: " + name);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model parse: ") + e.what());
  }
  if (j.contains("variables")) {
    auto vars = j["variables"].get<std::vector<std::string>>();
    const std::vector<std::string> expect{"x", "px", "y", "py"};
    if (vars != expect) throw ConfigError("model.variables: expected [x, px, y, py]");
  }
  auto degree_of_terms = [](const json& terms) {
    int deg = 1;
    for (const json& t : terms) {
      int d = 0;
      for (int e : t.value("exponents", std::vector<int>{})) d += e;
      deg = std::max(deg, d);
    }
    return deg;
  };
  if (j.contains("hamiltonian")) {
    BasisLayout L = model_layout(degree_of_terms(j["hamiltonian"]));
    return model_from_hamiltonian(poly_from_terms(j["hamiltonian"], L, "model.hamiltonian"),
                                  fs::path(name).stem().string());
  }
  if (j.contains("vector_field")) {
    const json& vf = j["vector_field"];
    const std::array<std::string, 4> comps{"xdot", "pxdot", "ydot", "pydot"};
    int deg = 1;
    for (const auto& c : comps) {
      if (!vf.contains(c)) throw ConfigError("model.vector_field: missing '" + c + "'");
      deg = std::max(deg, degree_of_terms(vf[c]));
    }
    BasisLayout L = model_layout(deg);
    std::array<TruncPoly, 4> field;
    for (int q = 0; q < 4; ++q)
      field[q] = poly_from_terms(vf[comps[q]], L, "model.vector_field." + comps[q]);
    return model_from_field(field, fs::path(name).stem().string());
  }
  throw ConfigError("model: need either 'hamiltonian' or 'vector_field'");
}

struct Emitter {
  fs::path dir;
  std::string hash;
  std::vector<std::string> written;

  void write(const std::string& name, const std::string& body, bool csv = true) {
    fs::create_directories((dir / name).parent_path());
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    if (csv) out << "# config_hash=" << hash << " format_version=1\n";
    out << body;
    written.push_back(name);
  }

  void manifest(const std::string& command, const RunConfig& rc, json results) {
    json m;
    m["format_version"] = 1;
    m["command"] = command;
    m["config_hash"] = hash;
    m["config"] = rc.to_json();
    m["outputs"] = written;
    m["results"] = std::move(results);
    fs::create_directories(dir);
    std::ofstream out(dir / ("manifest_" + command + ".json"), std::ios::binary);
    out << m.dump(2) << "\n";
  }
};

json complex_list(std::span<const Complex> v) {
  json out = json::array();
  for (const Complex& c : v) out.push_back({c.real(), c.imag()});
  return out;
}

json top_lines(const FourierTable& t, int count) {
  struct L {
    int n, m;
    double a;
  };
  std::vector<L> ls;
  for (int n = -t.wn(); n <= t.wn(); ++n)
    for (int m = -t.wm(); m <= t.wm(); ++m) ls.push_back({n, m, std::abs(t.at(n, m))});
  std::sort(ls.begin(), ls.end(), [](const L& a, const L& b) { return a.a > b.a; });
  json out = json::array();
  for (int k = 0; k < count && k < (int)ls.size(); ++k)
    out.push_back({{"n", ls[k].n}, {"m", ls[k].m}, {"abs", ls[k].a}});
  return out;
}

int status_exit(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return kExitOk;
    case SolveStatus::diverged: return kExitDiverged;
    case SolveStatus::obstructed: return kExitObstructed;
    default: return kExitError;
  }
}

std::string spectra_csv(const FourierTable& first_order, const FourierTable& minimized,
                        double om1, double om2, double min_abs) {
  std::string out = "n,m,frequency,abs_first_order,abs_minimized\n";
  char buf[160];
  const int wn = std::min(first_order.wn(), minimized.wn());
  const int wm = std::min(first_order.wm(), minimized.wm());
  for (int n = -wn; n <= wn; ++n)
    for (int m = -wm; m <= wm; ++m) {
      const double a = std::abs(first_order.at(n, m));
      const double b = std::abs(minimized.at(n, m));
      if (a < min_abs && b < min_abs) continue;
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g\n", n, m, n * om1 + m * om2, a, b);
      out += buf;
    }
  return out;
}

json solution_json(const SolveResult& res, int n_s) {
  json s;
  s["format_version"] = 1;
  s["n_s"] = n_s;
  s["n_v"] = res.comb_next.n_v;
  s["mu"] = res.comb_next.mu;
  s["omega"] = res.comb_next.omega;
  s["a"] = complex_list(res.comb_next.a);
  return s;
}

Combination seed_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("seed_solution: cannot open " + path);
  json j;
  in >> j;
  Combination seed;
  seed.n_v = j.at("n_v").get<int>();
  seed.mu = j.at("mu").get<double>();
  auto om = j.at("omega").get<std::vector<double>>();
  seed.omega = {om.at(0), om.at(1)};
  for (const auto& c : j.at("a")) seed.a.push_back(Complex{c.at(0), c.at(1)});
  if ((int)seed.a.size() != 2 * seed.n_v)
    throw ConfigError("seed_solution: coefficient count does not match n_v");
  return seed;
}

// ---------------------------------------------------------------------------

int cmd_matrix(const RunConfig& rc) {
  ModelSpec model = load_model(rc.model);
  SquareMatrix M = build_square_matrix(model, rc.n_s);
  ChainPair chains = jordan_chains(M, model.mu_x);

  Emitter em{fs::path(rc.out_dir), config_hash(rc), {}};
  json summary;
  summary["dimension"] = M.dimension();
  summary["mu"] = {model.mu_x, model.mu_y};
  // diagonal audit: the multiset of diagonal entries vs the exponent formula
  bool audit = true;
  const BasisLayout& L = M.layout();
  for (int i = 0; i < M.dimension(); ++i) {
    auto e = L.exponents_of(i);
    const Complex expect{0.0, model.mu_x * (e[0] - e[1]) + model.mu_y * (e[2] - e[3])};
    if (std::abs(M(i, i) - expect) > 1e-12) audit = false;
  }
  summary["diagonal_audit"] = audit ? "pass" : "fail";
  summary["chain_x_length"] = chains.x.length();
  summary["chain_y_length"] = chains.y.length();
  summary["chain_x_residual"] = chain_residual(M, chains.x);
  summary["chain_y_residual"] = chain_residual(M, chains.y);
  em.write("matrix_summary.json", json(summary).dump(2) + "\n", false);
  if (rc.dump_matrix) em.write("matrix.csv", matrix_csv(M));
  if (rc.dump_chains) {
    em.write("chain_x.csv", chain_csv(chains.x));
    em.write("chain_y.csv", chain_csv(chains.y));
  }
  em.manifest("matrix", rc, summary);
  std::printf("dimension %d, chains %d/%d, residuals %.2e/%.2e, diagonal audit %s\n",
              M.dimension(), chains.x.length(), chains.y.length(),
              chain_residual(M, chains.x), chain_residual(M, chains.y),
              audit ? "pass" : "fail");
  return audit ? kExitOk : kExitError;
}

SolveResult run_solve(const RunConfig& rc, const ModelSpec& model) {
  State s0 = initial_state(model, rc.energy, rc.x0, rc.y0, rc.py0);
  SolveConfig cfg = rc.solve_config();
  if (!rc.seed_solution.empty()) {
    Combination seed = seed_from_file(rc.seed_solution);
    SquareMatrix M = build_square_matrix(model, cfg.n_s);
    ChainPair chains = jordan_chains(M, model.mu_x);
    return solve_seeded(model, chains, s0, cfg, &seed);
  }
  return solve(model, s0, cfg);
}

int cmd_solve(const RunConfig& rc) {
  ModelSpec model = load_model(rc.model);
  SolveResult res = run_solve(rc, model);

  Emitter em{fs::path(rc.out_dir), config_hash(rc), {}};
  json report;
  report["status"] = to_string(res.final.status);
  report["message"] = res.final.message;
  report["iterations"] = res.iterations();
  json iters = json::array();
  for (const auto& r : res.history) {
    json it;
    it["index"] = r.index;
    it["n_v"] = r.n_v;
    it["omega"] = r.omega;
    it["g0"] = r.g0;
    it["im_residual"] = r.im_residual;
    it["spectrum_agreement"] = r.spectrum_agreement;
    it["side_ratio"] = r.side_ratio;
    it["dominant"] = r.dominant;
    it["top_lines_v1"] = top_lines(r.v1_min, 10);
    it["top_lines_v2"] = top_lines(r.v2_min, 10);
    iters.push_back(std::move(it));
    char name[64];
    std::snprintf(name, sizeof name, "spectra/iter_%02d_v1.csv", r.index);
    em.write(name, spectra_csv(r.v1_first, r.v1_min, r.omega[0], r.omega[1], 1e-8));
    std::snprintf(name, sizeof name, "spectra/iter_%02d_v2.csv", r.index);
    em.write(name, spectra_csv(r.v2_first, r.v2_min, r.omega[0], r.omega[1], 1e-8));
  }
  report["history"] = std::move(iters);

  if (!res.history.empty()) {
    const Combination& comb = res.final.comb;
    const char* wnames[4] = {"w_x0.csv", "w_y0.csv", "w_x1.csv", "w_y1.csv"};
    // Normalize the chain-row tables by their value at the anchor state so
    // the spectra read in the initial-value-1 convention.
    const auto z0 = to_resonance(res.state0);
    for (int k = 0; k < 4; ++k) {
      if (k < 2 || comb.n_v >= 4) {
        FourierTable t = res.w_tables[k];
        const Complex w0 = k < comb.n_v ? evaluate(comb.rows[k], z0) : Complex{1.0, 0.0};
        if (std::abs(w0) > 0.0)
          for (Complex& c : t.raw()) c /= w0;
        em.write(wnames[k], fourier_csv(t, comb.omega[0], comb.omega[1], 1e-10));
      }
    }
    em.write("theta_1.csv",
             fourier_csv(res.final.theta.theta[0], comb.omega[0], comb.omega[1], 1e-12));
    em.write("theta_2.csv",
             fourier_csv(res.final.theta.theta[1], comb.omega[0], comb.omega[1], 1e-12));
    em.write("solution.json", solution_json(res, rc.n_s).dump(2) + "\n", false);
    report["omega"] = comb.omega;
    report["r"] = comb.r;
    report["g0"] = res.history.back().g0;
    report["v2_side_ratio"] = res.history.back().side_ratio[1];
  }

  if (res.converged() && rc.validate) {
    ValidateOptions vo;
    vo.t_end = rc.t_end;
    OracleComparison cmp = compare_with_oracle(model, res, vo);
    res.final.oracle_agreement = cmp.line_agreement;
    json v;
    v["oracle_omega"] = cmp.oracle_omega;
    v["line_agreement"] = cmp.line_agreement;
    v["v_radius_std"] = cmp.v_radius_std;
    v["kam_radius_std"] = cmp.kam_radius_std;
    v["rotation_residual"] = cmp.rotation_residual;
    report["oracle_validation"] = std::move(v);

    // Phase-space series of the normalized actions along the oracle orbit:
    // the raw actions, the first-order model, and the invariants.
    const Combination& comb = res.final.comb;
    KamInvariant inv{res.final.theta, comb};
    std::string actions =
        "t,re_v1,im_v1,re_v2,im_v2,re_v1_first,im_v1_first,re_v2_first,im_v2_first,"
        "re_v01,im_v01,re_v02,im_v02\n";
    char abuf[512];
    const Trajectory& tr = cmp.trajectory;
    for (std::size_t k = 0; k < tr.states.size(); k += 4) {
      const double t = tr.times[k];
      const auto vb = inv.normalized_actions(tr.states[k]);
      const auto vf = forward_transform(res.final.theta, comb.omega[0] * t + comb.theta0[0],
                                        comb.omega[1] * t + comb.theta0[1]);
      const auto v0 = kam_values(inv, tr.states[k]);
      std::snprintf(abuf, sizeof abuf,
                    "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                    "%.17g\n",
                    t, vb[0].real(), vb[0].imag(), vb[1].real(), vb[1].imag(), vf[0].real(),
                    vf[0].imag(), vf[1].real(), vf[1].imag(), v0[0].real(), v0[0].imag(),
                    v0[1].real(), v0[1].imag());
      actions += abuf;
    }
    em.write("actions.csv", actions);
  }

  em.write("solve_report.json", json(report).dump(2) + "\n", false);
  em.manifest("solve", rc, report);
  std::printf("solve %s after %d iterations", to_string(res.final.status).c_str(),
              res.iterations());
  if (!res.history.empty())
    std::printf(" (omega %.4f %.4f, v2 side %.3f)", res.history.back().omega[0],
                res.history.back().omega[1], res.history.back().side_ratio[1]);
  std::printf("\n");
  return status_exit(res.final.status);
}

int cmd_poincare(const RunConfig& rc) {
  ModelSpec model = load_model(rc.model);
  Emitter em{fs::path(rc.out_dir), config_hash(rc), {}};
  std::string csv = "tag,y,py\n";
  char buf[128];
  auto add_point = [&](const char* tag, double y, double py) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g\n", tag, y, py);
    csv += buf;
  };

  // Energy limit curve py^2/2 + y^2/2 - y^3/3 = E in the section plane.
  {
    std::string limit = "y,py\n";
    for (int k = -400; k <= 400; ++k) {
      const double y = 0.0025 * k;
      const double rad = 2.0 * rc.energy - y * y + 2.0 / 3.0 * y * y * y;
      if (rad < 0.0) continue;
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", y, std::sqrt(rad));
      limit += buf;
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", y, -std::sqrt(rad));
      limit += buf;
    }
    em.write("energy_limit.csv", limit);
  }

  json results;
  if (rc.probes && rc.probes->empty()) {
    // an explicitly empty probe list is a valid run with empty output
    em.write("poincare.csv", csv);
    em.manifest("poincare", rc, results);
    return kExitOk;
  }

  std::vector<std::array<double, 2>> probes =
      rc.probes.value_or(std::vector<std::array<double, 2>>{{rc.y0, rc.py0}});

  int exit_code = kExitOk;
  for (std::size_t pi = 0; pi < probes.size(); ++pi) {
    RunConfig prc = rc;
    prc.y0 = probes[pi][0];
    prc.py0 = probes[pi][1];
    State s0;
    try {
      s0 = initial_state(model, prc.energy, prc.x0, prc.y0, prc.py0);
    } catch (const std::exception& e) {
      results["probe_errors"].push_back(e.what());
      exit_code = std::max(exit_code, kExitObstructed);
      continue;
    }

    // Oracle section (the trajectory itself is dumped alongside).
    Trajectory tr = integrate(model, s0, rc.section_t);
    {
      std::string tcsv = "t,x,px,y,py\n";
      char tbuf[192];
      for (std::size_t k = 0; k < tr.states.size(); ++k) {
        std::snprintf(tbuf, sizeof tbuf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", tr.times[k],
                      tr.states[k][0], tr.states[k][1], tr.states[k][2], tr.states[k][3]);
        tcsv += tbuf;
      }
      char name[64];
      std::snprintf(name, sizeof name, "trajectory_%02zu.csv", pi);
      em.write(name, tcsv);
    }
    SectionPoints oracle = poincare_section(model, tr);
    for (auto& p : oracle.points) add_point("oracle", p[0], p[1]);

    // Square-matrix (first-order torus) section and the invariant contour.
    SolveResult res = run_solve(prc, model);
    results["solves"].push_back({{"y0", prc.y0},
                                 {"py0", prc.py0},
                                 {"status", to_string(res.final.status)},
                                 {"iterations", res.iterations()}});
    if (!res.converged()) {
      exit_code = std::max(exit_code, status_exit(res.final.status));
      continue;
    }
    const Combination& comb = res.final.comb;
    const ThetaTables& theta = res.final.theta;
    KamInvariant inv{theta, comb};
    const auto c0 = kam_values(inv, s0);

    auto first_order_state = [&](double t, const State& seed) {
      const double th1 = comb.omega[0] * t + comb.theta0[0];
      const double th2 = comb.omega[1] * t + comb.theta0[1];
      const Complex I{0.0, 1.0};
      const Complex t1 =
          std::polar(comb.r[0], th1) * (1.0 + I * synthesize(theta.theta[0], th1, th2));
      const Complex t2 =
          std::polar(comb.r[1], th2) * (1.0 + I * synthesize(theta.theta[1], th1, th2));
      return invert_actions(comb, t1, t2, seed);
    };

    std::vector<State> crossings;
    const double dt = 0.05;
    State prev = s0;
    double tprev = 0.0;
    for (double t = dt; t <= rc.section_t; t += dt) {
      State cur;
      try {
        cur = first_order_state(t, prev);
      } catch (const InversionFailure&) {
        break;
      }
      if (prev[0] <= 0.0 && cur[0] > 0.0 && prev[1] > 0.0) {
        double lo = tprev, hi = t;
        State slo = prev;
        for (int k = 0; k < 45; ++k) {
          const double mid = 0.5 * (lo + hi);
          State sm = first_order_state(mid, slo);
          if (sm[0] <= 0.0) {
            lo = mid;
            slo = sm;
          } else {
            hi = mid;
          }
        }
        State sc = first_order_state(0.5 * (lo + hi), slo);
        crossings.push_back(sc);
        add_point("first-order", sc[2], sc[3]);
      }
      prev = cur;
      tprev = t;
    }

    // Constant-|v01|,|v02| contour through the same crossings: Newton in
    // (px, y, py) at x = 0 matching the invariant radii and the seed's
    // invariant phase.
    for (const State& seed : crossings) {
      State s = seed;
      auto fval = [&](const State& q) -> std::array<double, 3> {
        auto v = kam_values(inv, q);
        return {std::abs(v[0]) - std::abs(c0[0]), std::abs(v[1]) - std::abs(c0[1]),
                std::arg(v[1] / kam_values(inv, seed)[1])};
      };
      bool ok = true;
      for (int it = 0; it < 25; ++it) {
        auto f = fval(s);
        const double fn = std::abs(f[0]) + std::abs(f[1]) + std::abs(f[2]);
        if (fn < 1e-11) break;
        // finite-difference Jacobian in (px, y, py)
        double J[3][3];
        const double h = 1e-7;
        for (int c = 0; c < 3; ++c) {
          State sp = s;
          sp[c + 1] += h;
          auto fp = fval(sp);
          for (int r = 0; r < 3; ++r) J[r][c] = (fp[r] - f[r]) / h;
        }
        // 3x3 solve by Cramer
        const double det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                           J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                           J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
        if (std::abs(det) < 1e-14) {
          ok = false;
          break;
        }
        auto solve_col = [&](int col) {
          double A[3][3];
          for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) A[r][c] = (c == col) ? -f[r] : J[r][c];
          return (A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
                  A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
                  A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0])) /
                 det;
        };
        const double d0 = solve_col(0), d1 = solve_col(1), d2 = solve_col(2);
        s[1] += d0;
        s[2] += d1;
        s[3] += d2;
        if (!std::isfinite(s[1]) || !std::isfinite(s[2]) || !std::isfinite(s[3])) {
          ok = false;
          break;
        }
      }
      if (ok) add_point("kam-invariant", s[2], s[3]);
    }
  }

  for (const std::string& overlay : rc.overlays) {
    std::ifstream in(overlay);
    if (!in) throw ConfigError("overlay: cannot open " + overlay);
    std::string line;
    const std::string tag = "overlay:" + fs::path(overlay).stem().string();
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.find_first_of("0123456789+-.") != 0) continue;
      double y, py;
      if (std::sscanf(line.c_str(), "%lf,%lf", &y, &py) == 2) add_point(tag.c_str(), y, py);
    }
  }

  em.write("poincare.csv", csv);
  em.manifest("poincare", rc, results);
  return exit_code;
}

int cmd_scan(const RunConfig& rc) {
  ModelSpec model = load_model(rc.model);
  std::vector<std::array<double, 2>> probes;
  if (rc.probes) {
    probes = *rc.probes;
  } else {
    for (double p : {0.195, 0.18, 0.16, 0.145, 0.143, 0.14, 0.135, 0.13, 0.127, 0.125, 0.123,
                     0.121})
      probes.push_back({0.0, p});
  }
  ScanOptions so;
  so.validate_with_oracle = rc.validate;
  so.oracle_t_end = rc.t_end;
  BoundaryScan scan = scan_boundary(model, rc.energy, probes, rc.solve_config(), so);

  Emitter em{fs::path(rc.out_dir), config_hash(rc), {}};
  std::string csv =
      "y0,py0,status,iterations,g0,side_ratio,invariant_residual,section_dispersion,"
      "section_escaped\n";
  char buf[256];
  json results;
  for (std::size_t k = 0; k < scan.probes.size(); ++k) {
    const ProbeOutcome& p = scan.probes[k];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%s,%d,%.17g,%.17g,%.17g,%.17g,%d\n", p.y0,
                  p.py0, to_string(p.status).c_str(), p.iterations, p.g0, p.side_ratio,
                  p.invariant_residual, p.oracle_dispersion, p.section_escaped ? 1 : 0);
    csv += buf;
    json pj;
    pj["y0"] = p.y0;
    pj["py0"] = p.py0;
    pj["status"] = to_string(p.status);
    pj["iterations"] = p.iterations;
    pj["g0"] = p.g0;
    pj["side_ratio"] = p.side_ratio;
    pj["invariant_residual"] = p.invariant_residual;
    pj["section_dispersion"] = p.oracle_dispersion;
    pj["section_escaped"] = p.section_escaped;
    pj["message"] = p.message;
    std::snprintf(buf, sizeof buf, "probes/probe_%02zu.json", k);
    em.write(buf, pj.dump(2) + "\n", false);
    results["probes"].push_back(std::move(pj));
  }
  if (scan.chaos_onset_py0) results["chaos_onset_py0"] = *scan.chaos_onset_py0;
  em.write("scan_map.csv", csv);
  em.manifest("scan", rc, results);
  if (scan.chaos_onset_py0)
    std::printf("scan done, %zu probes, chaos onset estimate py0 = %.6f\n", scan.probes.size(),
                *scan.chaos_onset_py0);
  else
    std::printf("scan done, %zu probes\n", scan.probes.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"square-matrix action-angle solver for 2-DOF polynomial Hamiltonians"};
  app.require_subcommand(1);

  RunConfig rc;
  if (const char* env = std::getenv("SQMAT_OUT_DIR")) rc.out_dir = env;

  // The config file provides defaults and flags override it, so it is loaded
  // into rc before CLI11 writes the parsed options.
  try {
    for (int i = 1; i + 1 < argc; ++i)
      if (std::string(argv[i]) == "--config") apply_config_file(rc, argv[i + 1]);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }

  std::string config_file;
  bool no_validate = false;
  app.add_option("--config", config_file, "JSON config file (flags override it)");
  app.add_option("--out-dir", rc.out_dir, "output directory");
  app.add_flag("--serial", rc.serial, "run the data-parallel kernels serially");

  auto add_common = [&](CLI::App* sub) {
    sub->fallthrough();  // global options may follow the subcommand
    sub->add_option("--model", rc.model, "built-in model name or model JSON file");
    sub->add_option("--ns", rc.n_s, "square matrix power order");
    sub->add_option("--energy", rc.energy, "energy of the initial state");
    sub->add_option("--x0", rc.x0, "initial x");
    sub->add_option("--y0", rc.y0, "initial y");
    sub->add_option("--py0", rc.py0, "initial p_y");
    sub->add_option("--grid", rc.grid, "phase grid size per axis");
    sub->add_option("--window", rc.window, "Fourier window (clipped below Nyquist)");
    sub->add_option("--max-iters", rc.max_iterations, "iteration budget");
    sub->add_option("--seed-solution", rc.seed_solution, "solution.json to continue from");
    sub->add_option("--t-end", rc.t_end, "oracle integration horizon");
    sub->add_flag("--no-validate", no_validate, "skip the forward-integration validation");
  };

  CLI::App* matrix = app.add_subcommand("matrix", "build M, dump dimensions and chains");
  add_common(matrix);
  matrix->add_flag("--dump-matrix", rc.dump_matrix, "write matrix.csv");
  matrix->add_flag("--dump-chains", rc.dump_chains, "write chain_x.csv / chain_y.csv");

  CLI::App* solve_cmd = app.add_subcommand("solve", "run the iterative action-angle solve");
  add_common(solve_cmd);

  CLI::App* poincare = app.add_subcommand("poincare", "emit section data and contours");
  add_common(poincare);
  poincare->add_option("--section-t", rc.section_t, "horizon for section sampling");
  poincare->add_option("--overlay", rc.overlays, "extra contour CSV files to tag along");

  CLI::App* scan = app.add_subcommand("scan", "continuation scan of the convergence boundary");
  add_common(scan);

  CLI11_PARSE(app, argc, argv);
  if (no_validate) rc.validate = false;

  try {
    validate_config(rc);
    if (matrix->parsed()) return cmd_matrix(rc);
    if (solve_cmd->parsed()) return cmd_solve(rc);
    if (poincare->parsed()) return cmd_poincare(rc);
    if (scan->parsed()) return cmd_scan(rc);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitOk;
}
