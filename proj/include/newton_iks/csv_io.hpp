#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "newton_iks/core_types.hpp"
#include "newton_iks/strategies.hpp"

namespace newton_iks {

// Files start with zero or more `# key=value` metadata lines, then the
// header row, then data rows. Doubles are written in shortest round-trip
// form, so reading a file back reproduces the values bit for bit.

using Metadata = std::vector<std::pair<std::string, std::string>>;

class CsvError : public Error {
 public:
  using Error::Error;
};

std::string format_double(double v);
double parse_double(const std::string& text);

/// `k,x0,...,x{d-1}` for k = 0..N.
void write_truth_csv(std::ostream& os, const Trajectory& traj, const Metadata& meta = {});
Trajectory read_truth_csv(std::istream& is, std::map<std::string, std::string>* meta = nullptr);

/// `k,y0,...,y{m-1}` for k = 1..N.
void write_measurements_csv(std::ostream& os, const MeasurementSeq& ys, const Metadata& meta = {});
MeasurementSeq read_measurements_csv(std::istream& is, std::map<std::string, std::string>* meta = nullptr);

/// `k,mean0..mean{d-1},P00..P{d-1}{d-1}` (covariance row-major).
void write_smoothed_csv(std::ostream& os, const std::vector<GaussianBelief>& beliefs, const Metadata& meta = {});

/// `iter,cost,lambda,alpha_or_rho,accepted,wall_ms`.
void write_report_csv(std::ostream& os, const RunReport& report, const Metadata& meta = {});

struct BenchRow {
  Index N = 0;
  std::string method;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  int runs = 0;
  int iters = 0;
};

/// `N,method,mean_ms,std_ms,runs,iters`.
void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows, const Metadata& meta = {});

}  // namespace newton_iks
