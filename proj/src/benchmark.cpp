#include "newton_iks/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace newton_iks {

std::string to_string(Method m) {
  switch (m) {
    case Method::RecursiveLS:
      return "recursive-ls";
    case Method::RecursiveTR:
      return "recursive-tr";
    case Method::BatchLS:
      return "batch-ls";
    case Method::BatchTR:
      return "batch-tr";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : all_methods()) {
    if (to_string(m) == name) {
      return m;
    }
  }
  throw std::invalid_argument("unknown method '" + name + "' (expected recursive-ls, recursive-tr, batch-ls or batch-tr)");
}

std::vector<Method> all_methods() {
  return {Method::BatchLS, Method::BatchTR, Method::RecursiveLS, Method::RecursiveTR};
}

RunReport run_method(Method method, const NonlinearSSM& model, const Trajectory& x0, const MeasurementSeq& ys,
                     const LineSearchConfig& ls, const TrustRegionConfig& tr) {
  switch (method) {
    case Method::RecursiveLS:
      return ls_newton_iks(model, x0, ys, ls);
    case Method::RecursiveTR:
      return tr_newton_iks(model, x0, ys, tr);
    case Method::BatchLS:
      return ls_batch(model, x0, ys, ls);
    case Method::BatchTR:
      return tr_batch(model, x0, ys, tr);
  }
  throw std::invalid_argument("unknown method");
}

std::vector<Index> BenchmarkConfig::default_grid() {
  std::vector<Index> grid;
  for (Index n = 100; n <= 1500; n += 100) {
    grid.push_back(n);
  }
  return grid;
}

std::vector<BenchRow> run_benchmark(const BenchmarkConfig& cfg, const std::function<void(const BenchRow&)>& progress) {
  if (cfg.grid.empty() || cfg.methods.empty()) {
    throw std::invalid_argument("benchmark: grid and method list must be non-empty");
  }
  if (cfg.runs < 1 || cfg.iters < 1) {
    throw std::invalid_argument("benchmark: runs and iters must be positive");
  }
  const NonlinearSSM model = make_coordinated_turn_model(cfg.model);

  LineSearchConfig ls = cfg.ls;
  TrustRegionConfig tr = cfg.tr;
  ls.stop_on_convergence = false;
  tr.stop_on_convergence = false;
  LineSearchConfig ls_warm = ls;
  TrustRegionConfig tr_warm = tr;
  ls_warm.outer_iters = 1;
  tr_warm.outer_iters = 1;
  ls.outer_iters = cfg.iters;
  tr.outer_iters = cfg.iters;

  std::vector<BenchRow> rows;
  for (Index n : cfg.grid) {
    std::vector<SimOutput> data;
    data.reserve(static_cast<std::size_t>(cfg.runs));
    for (int r = 0; r < cfg.runs; ++r) {
      data.push_back(simulate(model, n, cfg.base_seed + static_cast<std::uint64_t>(r)));
    }
    const Trajectory x0 = prior_rollout(model, n);

    for (Method method : cfg.methods) {
      std::vector<double> times;
      for (const auto& sim : data) {
        run_method(method, model, x0, sim.measurements, ls_warm, tr_warm);
        const auto start = std::chrono::steady_clock::now();
        run_method(method, model, x0, sim.measurements, ls, tr);
        times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
      }
      double mean = 0.0;
      for (double t : times) {
        mean += t;
      }
      mean /= static_cast<double>(times.size());
      double var = 0.0;
      for (double t : times) {
        var += (t - mean) * (t - mean);
      }
      const double std_ms = times.size() > 1 ? std::sqrt(var / static_cast<double>(times.size() - 1)) : 0.0;
      rows.push_back({n, to_string(method), mean, std_ms, cfg.runs, cfg.iters});
      if (progress) {
        progress(rows.back());
      }
    }
  }
  return rows;
}

}  // namespace newton_iks
