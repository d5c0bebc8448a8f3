#include "newton_iks/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include "newton_iks/autodiff.hpp"
#include "newton_iks/benchmark.hpp"
#include "newton_iks/csv_io.hpp"
#include "newton_iks/linearize.hpp"
#include "newton_iks/models.hpp"
#include "newton_iks/objective.hpp"
#include "newton_iks/recursive_smoother.hpp"
#include "newton_iks/strategies.hpp"

namespace newton_iks {

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& text, char sep, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      out.push_back(parse_double(trim(item)));
    } catch (const CsvError&) {
      throw UsageError("--" + flag + ": cannot parse '" + item + "' as a number");
    }
  }
  return out;
}

std::vector<Eigen::Vector2d> parse_sensors(const std::string& text) {
  std::vector<Eigen::Vector2d> sensors;
  std::stringstream ss(text);
  std::string pair;
  while (std::getline(ss, pair, ';')) {
    const auto xy = parse_list(pair, ',', "sensors");
    if (xy.size() != 2) {
      throw UsageError("--sensors: each sensor needs 'x,y', got '" + pair + "'");
    }
    sensors.emplace_back(xy[0], xy[1]);
  }
  if (sensors.empty()) {
    throw UsageError("--sensors: at least one sensor is required");
  }
  return sensors;
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())); }

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += (i ? "," : "") + format_double(v[i]);
  }
  return s;
}

/// Model flags shared by simulate and smooth.
struct ModelOptions {
  std::string kind = "ct";
  double dt = 0.1;
  double q_pos = 0.1;
  double q_omega = 0.01;
  double bearing_std = 0.5;
  std::string sensors = "1.0,1.0;-1.5,0.5";
  std::string m0 = "0,0,1,0,0.1";
  std::string p0_diag = "0.5,0.5,0.5,0.5,0.05";

  void attach(CLI::App* app) {
    app->add_option("--model", kind, "Model: ct (coordinated turn, bearings) or cv (linear constant velocity)")
        ->check(CLI::IsMember({"ct", "cv"}));
    app->add_option("--dt", dt, "Sampling period [s]");
    app->add_option("--q-pos", q_pos, "Velocity process-noise spectral density");
    app->add_option("--q-omega", q_omega, "Turn-rate process-noise spectral density");
    app->add_option("--bearing-std", bearing_std, "Bearing noise standard deviation [rad]");
    app->add_option("--sensors", sensors, "Sensor positions 'x,y;x,y;...'");
    app->add_option("--m0", m0, "Prior mean, comma separated");
    app->add_option("--p0-diag", p0_diag, "Prior covariance diagonal, comma separated");
  }

  CoordinatedTurnConfig ct_config() const {
    CoordinatedTurnConfig cfg;
    cfg.dt = dt;
    cfg.q_pos = q_pos;
    cfg.q_omega = q_omega;
    cfg.bearing_var = bearing_std * bearing_std;
    cfg.sensors = parse_sensors(sensors);
    cfg.m0 = to_vector(parse_list(m0, ',', "m0"));
    cfg.p0_diag = to_vector(parse_list(p0_diag, ',', "p0-diag"));
    if (cfg.m0.size() != 5 || cfg.p0_diag.size() != 5) {
      throw UsageError("--m0 and --p0-diag need 5 entries for the coordinated-turn model");
    }
    if (!(bearing_std > 0.0)) {
      throw UsageError("--bearing-std must be positive");
    }
    return cfg;
  }

  NonlinearSSM build() const {
    if (kind == "cv") {
      return make_constant_velocity_model(dt);
    }
    try {
      return make_coordinated_turn_model(ct_config());
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }

  Metadata metadata() const {
    Metadata meta{{"model", kind}, {"dt", format_double(dt)}};
    if (kind == "ct") {
      meta.insert(meta.end(), {{"q_pos", format_double(q_pos)},
                               {"q_omega", format_double(q_omega)},
                               {"bearing_std", format_double(bearing_std)},
                               {"sensors", sensors},
                               {"m0", m0},
                               {"p0_diag", p0_diag},
                               {"defaults_note", "model constants are configurable defaults, not measured data"}});
    }
    return meta;
  }
};

class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) {
    if (path == "-") {
      os_ = &fallback;
    } else {
      file_.open(path);
      if (!file_) {
        throw UsageError("cannot open '" + path + "' for writing");
      }
      os_ = &file_;
    }
  }
  std::ostream& stream() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_ = nullptr;
};

std::ifstream open_input(const std::string& path, const std::string& flag) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("--" + flag + ": cannot open '" + path + "'");
  }
  return in;
}

/// Covariances of a Newton-IKS pass linearized at `traj`, paired with the
/// states of `traj` itself. The regularization starts at `lambda` and
/// climbs the line-search ladder if the pass is not positive-definite.
std::vector<GaussianBelief> newton_beliefs(const NonlinearSSM& model, const Trajectory& traj,
                                           const MeasurementSeq& ys, double lambda) {
  const auto lin = linearize(model, traj, ys);
  const LineSearchConfig ladder;
  std::vector<double> lambdas{lambda};
  for (int j = 0; j <= 22; ++j) {
    const double l = ladder.lambda_init * std::pow(ladder.lambda_mult, j);
    if (l > lambda) {
      lambdas.push_back(l);
    }
  }
  for (double l : lambdas) {
    try {
      const auto res = newton_iks_iteration(build_modified_model(lin, l), ys);
      std::vector<GaussianBelief> out;
      out.reserve(res.pass.smoothed.size());
      for (Index k = 0; k <= traj.steps(); ++k) {
        out.push_back(GaussianBelief::hygienic(traj.state(k), res.pass.smoothed[static_cast<std::size_t>(k)].cov));
      }
      return out;
    } catch (const InsufficientRegularization&) {
    }
  }
  throw InsufficientRegularization("no regularization gives positive-definite smoother covariances");
}

// ---------------------------------------------------------------------------

struct SimulateCmd {
  ModelOptions model;
  Index steps = 500;
  std::uint64_t seed = 0;
  bool noiseless = false;
  std::string truth_path = "truth.csv";
  std::string meas_path = "measurements.csv";

  void attach(CLI::App* app) {
    model.attach(app);
    app->add_option("--steps", steps, "Number of transitions N")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "Random seed");
    app->add_flag("--noiseless", noiseless, "Zero all noise (x0 = m0)");
    app->add_option("--truth", truth_path, "Output path for true states ('-' for stdout)");
    app->add_option("--measurements", meas_path, "Output path for measurements ('-' for stdout)");
  }

  int run(std::ostream& out) const {
    const NonlinearSSM ssm = model.build();
    const SimOutput sim = simulate(ssm, steps, seed, noiseless);
    Metadata meta = model.metadata();
    meta.emplace_back("seed", std::to_string(seed));
    meta.emplace_back("noiseless", noiseless ? "1" : "0");
    meta.emplace_back("rng", "mt19937_64+normal_distribution");
    {
      OutputTarget t(truth_path, out);
      write_truth_csv(t.stream(), sim.true_states, meta);
    }
    {
      OutputTarget t(meas_path, out);
      write_measurements_csv(t.stream(), sim.measurements, meta);
    }
    return kExitOk;
  }
};

struct SmoothCmd {
  ModelOptions model;
  std::string meas_path;
  std::string truth_path;
  Index steps = 500;
  std::uint64_t seed = 0;
  std::string method = "recursive-tr";
  int iters = 30;
  double beta = 0.5;
  int max_backtracks = 20;
  double lambda0 = 1e-2;
  std::string init = "prior-rollout";
  std::string init_file;
  std::string output = "smoothed.csv";
  std::string report_path = "report.csv";
  bool no_early_stop = false;

  void attach(CLI::App* app) {
    model.attach(app);
    app->add_option("--measurements", meas_path, "Measurements CSV (simulated from --seed when omitted)");
    app->add_option("--truth", truth_path, "Optional truth CSV, used for the RMSE summary");
    app->add_option("--steps", steps, "N when simulating")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "Seed when simulating");
    app->add_option("--method", method, "recursive-ls | recursive-tr | batch-ls | batch-tr");
    app->add_option("--iters", iters, "Outer iterations");
    app->add_option("--beta", beta, "Backtracking multiplier in (0, 1)");
    app->add_option("--max-backtracks", max_backtracks, "Backtracking iterations M");
    app->add_option("--lambda0", lambda0, "Initial trust-region regularization");
    app->add_option("--init", init, "Initial trajectory: prior-rollout | zeros | file")
        ->check(CLI::IsMember({"prior-rollout", "zeros", "file"}));
    app->add_option("--init-file", init_file, "Truth-format CSV used with --init file");
    app->add_option("--output", output, "Smoothed trajectory CSV ('-' for stdout)");
    app->add_option("--report", report_path, "Run report CSV ('-' for stdout)");
    app->add_flag("--no-early-stop", no_early_stop, "Always run --iters iterations");
  }

  int run(std::ostream& out, std::ostream& err) const {
    Method m{};
    try {
      m = parse_method(method);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--method: ") + e.what());
    }
    LineSearchConfig ls;
    ls.beta = beta;
    ls.max_backtracks = max_backtracks;
    ls.outer_iters = iters;
    ls.stop_on_convergence = !no_early_stop;
    TrustRegionConfig tr;
    tr.lambda0 = lambda0;
    tr.outer_iters = iters;
    tr.stop_on_convergence = !no_early_stop;
    try {
      ls.validate();
      tr.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }

    const NonlinearSSM ssm = model.build();
    MeasurementSeq ys;
    std::optional<Trajectory> truth;
    Metadata meta = model.metadata();
    if (!meas_path.empty()) {
      auto in = open_input(meas_path, "measurements");
      ys = read_measurements_csv(in);
      meta.emplace_back("source", meas_path);
    } else {
      SimOutput sim = simulate(ssm, steps, seed);
      ys = sim.measurements;
      truth = sim.true_states;
      meta.emplace_back("source", "simulated");
    }
    meta.emplace_back("seed", std::to_string(seed));
    if (!truth_path.empty()) {
      auto in = open_input(truth_path, "truth");
      truth = read_truth_csv(in);
    }

    Trajectory x0;
    if (init == "prior-rollout") {
      x0 = prior_rollout(ssm, ys.steps());
    } else if (init == "zeros") {
      x0 = Trajectory(ssm.state_dim(), ys.steps());
    } else {
      if (init_file.empty()) {
        throw UsageError("--init file requires --init-file");
      }
      auto in = open_input(init_file, "init-file");
      x0 = read_truth_csv(in);
    }
    if (x0.steps() != ys.steps() || x0.dim() != ssm.state_dim()) {
      throw UsageError("initial trajectory shape does not match the measurements/model");
    }

    const RunReport report = run_method(m, ssm, x0, ys, ls, tr);
    meta.emplace_back("method", method);
    meta.emplace_back("initial_cost", format_double(report.initial_cost));
    meta.emplace_back("termination", to_string(report.termination));
    const double final_lambda = (m == Method::RecursiveTR || m == Method::BatchTR) ? report.final_lambda : 0.0;
    const auto beliefs = newton_beliefs(ssm, report.final_trajectory, ys, final_lambda);
    {
      OutputTarget t(output, out);
      write_smoothed_csv(t.stream(), beliefs, meta);
    }
    {
      OutputTarget t(report_path, out);
      write_report_csv(t.stream(), report, meta);
    }

    const double final_cost = report.iterations.empty() ? report.initial_cost : report.iterations.back().cost;
    err << "method=" << method << " iterations=" << report.iterations.size() << " initial_cost="
        << format_double(report.initial_cost) << " final_cost=" << format_double(final_cost)
        << " termination=" << to_string(report.termination);
    if (truth && truth->steps() == x0.steps() && truth->dim() >= 2) {
      err << " rmse_init=" << format_double(position_rmse(x0, *truth))
          << " rmse_final=" << format_double(position_rmse(report.final_trajectory, *truth));
    }
    err << '\n';
    if (!std::isfinite(final_cost) || report.termination == Termination::RegularizationExhausted) {
      return kExitNumerical;
    }
    return kExitOk;
  }
};

struct BenchCmd {
  std::string grid;
  int runs = 20;
  int iters = 30;
  std::string methods = "batch-ls,batch-tr,recursive-ls,recursive-tr";
  std::uint64_t seed = 1;
  std::string output = "-";

  void attach(CLI::App* app) {
    app->add_option("--grid", grid, "Trajectory lengths, comma separated (default 100,200,...,1500)");
    app->add_option("--runs", runs, "Repetitions per (N, method)")->check(CLI::PositiveNumber);
    app->add_option("--iters", iters, "Outer iterations per run")->check(CLI::PositiveNumber);
    app->add_option("--methods", methods, "Comma separated method list");
    app->add_option("--seed", seed, "Seed of the first run; run r uses seed + r");
    app->add_option("--output", output, "Benchmark CSV ('-' for stdout)");
  }

  int run(std::ostream& out, std::ostream& err) const {
    BenchmarkConfig cfg;
    if (!grid.empty()) {
      cfg.grid.clear();
      for (double n : parse_list(grid, ',', "grid")) {
        if (n < 1 || n != std::floor(n)) {
          throw UsageError("--grid entries must be positive integers");
        }
        cfg.grid.push_back(static_cast<Index>(n));
      }
    }
    cfg.runs = runs;
    cfg.iters = iters;
    cfg.base_seed = seed;
    cfg.methods.clear();
    std::stringstream ss(methods);
    std::string name;
    while (std::getline(ss, name, ',')) {
      try {
        cfg.methods.push_back(parse_method(trim(name)));
      } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--methods: ") + e.what());
      }
    }
    const auto rows = run_benchmark(cfg, [&err](const BenchRow& r) {
      err << "N=" << r.N << " method=" << r.method << " mean_ms=" << format_double(r.mean_ms) << '\n';
    });
    std::vector<double> grid_values;
    for (Index n : cfg.grid) {
      grid_values.push_back(static_cast<double>(n));
    }
    OutputTarget t(output, out);
    write_bench_csv(t.stream(), rows,
                    {{"seed", std::to_string(seed)}, {"grid", join(grid_values)}, {"model", "ct (defaults)"}});
    return kExitOk;
  }
};

struct CheckDerivativesCmd {
  int points = 100;
  std::uint64_t seed = 0;
  double step = 1e-6;

  void attach(CLI::App* app) {
    app->add_option("--points", points, "Random evaluation points per function")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--step", step, "Finite-difference step")->check(CLI::PositiveNumber);
  }

  int run(std::ostream& out) const {
    const CoordinatedTurnConfig ct_cfg;
    const NonlinearSSM ct = make_coordinated_turn_model(ct_cfg);
    const NonlinearSSM cv = make_constant_velocity_model();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(-20.0, 20.0), vel(-3.0, 3.0), rate(-1.0, 1.0);
    std::normal_distribution<double> normal;

    auto ct_point = [&] {
      Vector x(5);
      do {
        x << pos(rng), pos(rng), vel(rng), vel(rng), rate(rng);
      } while ((x.head<2>() - ct_cfg.sensors[0]).norm() < 0.5 || (x.head<2>() - ct_cfg.sensors[1]).norm() < 0.5);
      return x;
    };
    auto cv_point = [&] {
      Vector x(4);
      for (Index i = 0; i < 4; ++i) {
        x(i) = 5.0 * normal(rng);
      }
      return x;
    };

    struct Entry {
      const char* name;
      const SmoothFunction* fn;
      bool ct;
    };
    const Entry entries[] = {{"ct.transition", &ct.transition(), true},
                             {"ct.observation", &ct.observation(), true},
                             {"cv.transition", &cv.transition(), false},
                             {"cv.observation", &cv.observation(), false}};
    bool ok = true;
    out << "function,points,max_jac_err,max_hess_err,jacobian_ok,hessian_ok\n";
    for (const auto& e : entries) {
      double jac_err = 0.0, hess_err = 0.0;
      bool jac_ok = true, hess_ok = true;
      for (int p = 0; p < points; ++p) {
        const Vector x = e.ct ? ct_point() : cv_point();
        const FdReport rep = fd_check(*e.fn, x, step);
        jac_err = std::max(jac_err, rep.max_jac_err);
        hess_err = std::max(hess_err, rep.max_hess_err);
        jac_ok = jac_ok && rep.jacobian_within(1e-5, 1e-4);
        hess_ok = hess_ok && rep.hessian_within(1e-4, 1e-3);
      }
      ok = ok && jac_ok && hess_ok;
      out << e.name << ',' << points << ',' << format_double(jac_err) << ',' << format_double(hess_err) << ','
          << (jac_ok ? 1 : 0) << ',' << (hess_ok ? 1 : 0) << '\n';
    }
    return ok ? kExitOk : kExitNumerical;
  }
};

/// Splices `--key=value` pairs from a --config file in front of the
/// command-line arguments, so that explicit flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
  std::string config_path;
  std::size_t sub_pos = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (sub_pos == 0 && !args[i].empty() && args[i][0] != '-') {
      sub_pos = i;
    }
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty() || sub_pos == 0) {
    return args;
  }
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[sub_pos]);
  } catch (const CLI::OptionNotFound&) {
    return args;  // let the parser report the unknown subcommand
  }
  std::ifstream in(config_path);
  if (!in) {
    throw UsageError("--config: cannot open '" + config_path + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  const auto entries = parse_config_text(buf.str());

  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1);
  for (const auto& [key, value] : entries) {
    if (key == "config" || sub->get_option_no_throw("--" + key) == nullptr) {
      throw UsageError("--config: unknown key '" + key + "' for subcommand " + args[sub_pos]);
    }
    out.push_back("--" + key + "=" + value);
  }
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, args.end());
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    }
    if (!out.emplace(key, value).second) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": repeated key '" + key + "'");
    }
  }
  return out;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Newton iterated Kalman smoothing"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  SimulateCmd simulate_cmd;
  SmoothCmd smooth_cmd;
  BenchCmd bench_cmd;
  CheckDerivativesCmd check_cmd;
  std::string config_path;

  auto* sim_app = app.add_subcommand("simulate", "Simulate truth and measurements to CSV");
  auto* smooth_app = app.add_subcommand("smooth", "Run a Newton smoother and write the trajectory and report");
  auto* bench_app = app.add_subcommand("bench", "Runtime scaling benchmark on coordinated-turn data");
  auto* check_app = app.add_subcommand("check-derivatives", "Finite-difference check of the model derivatives");
  for (auto* sub : {sim_app, smooth_app, bench_app, check_app}) {
    sub->add_option("--config", config_path, "Flat 'key = value' file; flags override its values");
  }
  simulate_cmd.attach(sim_app);
  smooth_cmd.attach(smooth_app);
  bench_cmd.attach(bench_app);
  check_cmd.attach(check_app);

  try {
    const auto expanded = expand_config(args, app);
    std::vector<const char*> argv;
    argv.reserve(expanded.size());
    for (const auto& a : expanded) {
      argv.push_back(a.c_str());
    }
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      app.exit(e, out, err);
      return kExitUsage;
    }

    if (sim_app->parsed()) {
      return simulate_cmd.run(out);
    }
    if (smooth_app->parsed()) {
      return smooth_cmd.run(out, err);
    }
    if (bench_app->parsed()) {
      return bench_cmd.run(out, err);
    }
    if (check_app->parsed()) {
      return check_cmd.run(out);
    }
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CsvError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DimensionMismatch& e) {
    err << "input error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  if (args.empty()) {
    args.emplace_back("newton_iks_cli");
  }
  return cli_main(args, out, err);
}

}  // namespace newton_iks
