#include "newton_iks/csv_io.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace newton_iks {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) {
    out.push_back(field);
  }
  if (!line.empty() && line.back() == sep) {
    out.emplace_back();
  }
  return out;
}

void write_metadata(std::ostream& os, const Metadata& meta) {
  for (const auto& [key, value] : meta) {
    os << "# " << key << '=' << value << '\n';
  }
}

std::string indexed_header(const std::string& first, const std::string& prefix, Index count) {
  std::string h = first;
  for (Index i = 0; i < count; ++i) {
    h += ',' + prefix + std::to_string(i);
  }
  return h;
}

/// Reads metadata, checks the header against `expected(columns)` and
/// returns the numeric body, one row per line.
template <class ExpectedHeader>
std::vector<std::vector<double>> read_table(std::istream& is, std::map<std::string, std::string>* meta,
                                            ExpectedHeader expected) {
  std::string line;
  bool have_header = false;
  std::size_t columns = 0;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    if (line.front() == '#') {
      if (meta != nullptr) {
        const auto body = line.substr(line.find_first_not_of("# "));
        const auto eq = body.find('=');
        if (eq != std::string::npos) {
          (*meta)[body.substr(0, eq)] = body.substr(eq + 1);
        }
      }
      continue;
    }
    const auto fields = split(line, ',');
    if (!have_header) {
      columns = fields.size();
      if (line != expected(columns)) {
        throw CsvError("unexpected CSV header '" + line + "', expected '" + expected(columns) + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != columns) {
      throw CsvError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) + " fields, got " +
                     std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(columns);
    for (const auto& f : fields) {
      row.push_back(parse_double(f));
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) {
    throw CsvError("CSV input has no header row");
  }
  return rows;
}

Matrix body_to_matrix(const std::vector<std::vector<double>>& rows, Index first_k, const char* what) {
  if (rows.empty()) {
    throw CsvError(std::string(what) + " file has no data rows");
  }
  const auto dim = static_cast<Index>(rows.front().size()) - 1;
  Matrix out(dim, static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto k = static_cast<Index>(r) + first_k;
    if (rows[r][0] != static_cast<double>(k)) {
      throw CsvError(std::string(what) + " rows must be consecutive starting at k = " + std::to_string(first_k));
    }
    for (Index i = 0; i < dim; ++i) {
      out(i, static_cast<Index>(r)) = rows[r][static_cast<std::size_t>(i + 1)];
    }
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  while (begin < end && *begin == ' ') {
    ++begin;
  }
  if (begin < end && *begin == '+') {
    ++begin;
  }
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw CsvError("cannot parse '" + text + "' as a number");
  }
  return v;
}

void write_truth_csv(std::ostream& os, const Trajectory& traj, const Metadata& meta) {
  write_metadata(os, meta);
  os << indexed_header("k", "x", traj.dim()) << '\n';
  for (Index k = 0; k <= traj.steps(); ++k) {
    os << k;
    for (Index i = 0; i < traj.dim(); ++i) {
      os << ',' << format_double(traj.state(k)(i));
    }
    os << '\n';
  }
}

Trajectory read_truth_csv(std::istream& is, std::map<std::string, std::string>* meta) {
  const auto rows = read_table(is, meta, [](std::size_t cols) {
    return indexed_header("k", "x", static_cast<Index>(cols) - 1);
  });
  return Trajectory(body_to_matrix(rows, 0, "truth"));
}

void write_measurements_csv(std::ostream& os, const MeasurementSeq& ys, const Metadata& meta) {
  write_metadata(os, meta);
  os << indexed_header("k", "y", ys.dim()) << '\n';
  for (Index k = 1; k <= ys.steps(); ++k) {
    os << k;
    for (Index i = 0; i < ys.dim(); ++i) {
      os << ',' << format_double(ys.at(k)(i));
    }
    os << '\n';
  }
}

MeasurementSeq read_measurements_csv(std::istream& is, std::map<std::string, std::string>* meta) {
  const auto rows = read_table(is, meta, [](std::size_t cols) {
    return indexed_header("k", "y", static_cast<Index>(cols) - 1);
  });
  return MeasurementSeq(body_to_matrix(rows, 1, "measurement"));
}

void write_smoothed_csv(std::ostream& os, const std::vector<GaussianBelief>& beliefs, const Metadata& meta) {
  write_metadata(os, meta);
  const Index d = beliefs.empty() ? 0 : beliefs.front().mean.size();
  std::string header = indexed_header("k", "mean", d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      header += ",P" + std::to_string(i) + std::to_string(j);
    }
  }
  os << header << '\n';
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    os << k;
    for (Index i = 0; i < d; ++i) {
      os << ',' << format_double(beliefs[k].mean(i));
    }
    for (Index i = 0; i < d; ++i) {
      for (Index j = 0; j < d; ++j) {
        os << ',' << format_double(beliefs[k].cov(i, j));
      }
    }
    os << '\n';
  }
}

void write_report_csv(std::ostream& os, const RunReport& report, const Metadata& meta) {
  write_metadata(os, meta);
  os << "iter,cost,lambda,alpha_or_rho,accepted,wall_ms\n";
  for (const auto& it : report.iterations) {
    os << it.iter << ',' << format_double(it.cost) << ',' << format_double(it.lambda) << ','
       << format_double(it.alpha_or_rho) << ',' << (it.accepted ? 1 : 0) << ',' << format_double(it.wall_ms)
       << '\n';
  }
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows, const Metadata& meta) {
  write_metadata(os, meta);
  os << "N,method,mean_ms,std_ms,runs,iters\n";
  for (const auto& r : rows) {
    os << r.N << ',' << r.method << ',' << format_double(r.mean_ms) << ',' << format_double(r.std_ms) << ','
       << r.runs << ',' << r.iters << '\n';
  }
}

}  // namespace newton_iks
