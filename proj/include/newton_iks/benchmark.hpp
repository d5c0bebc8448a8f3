#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "newton_iks/csv_io.hpp"
#include "newton_iks/models.hpp"
#include "newton_iks/strategies.hpp"

namespace newton_iks {

enum class Method { RecursiveLS, RecursiveTR, BatchLS, BatchTR };

std::string to_string(Method m);
/// Accepts recursive-ls, recursive-tr, batch-ls, batch-tr.
Method parse_method(const std::string& name);
std::vector<Method> all_methods();

RunReport run_method(Method method, const NonlinearSSM& model, const Trajectory& x0, const MeasurementSeq& ys,
                     const LineSearchConfig& ls, const TrustRegionConfig& tr);

struct BenchmarkConfig {
  std::vector<Index> grid = default_grid();
  int runs = 20;
  int iters = 30;
  std::vector<Method> methods = all_methods();
  std::uint64_t base_seed = 1;
  CoordinatedTurnConfig model;
  LineSearchConfig ls;
  TrustRegionConfig tr;

  /// N = 100, 200, ..., 1500.
  static std::vector<Index> default_grid();
};

/// Wall time of `iters` outer iterations per (N, method), averaged over
/// `runs` freshly simulated data sets (seed base_seed + run). Early stopping
/// is disabled so every run performs exactly `iters` iterations; each timed
/// run is preceded by an untimed single-iteration warm-up, and simulation
/// is excluded from the timing. `progress` is called after each row.
std::vector<BenchRow> run_benchmark(const BenchmarkConfig& cfg,
                                    const std::function<void(const BenchRow&)>& progress = {});

}  // namespace newton_iks
