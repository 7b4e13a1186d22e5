#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hebbpca/balanced.hpp"
#include "hebbpca/learners.hpp"
#include "hebbpca/netsim.hpp"
#include "hebbpca/spectral.hpp"
#include "hebbpca/types.hpp"

// CSV formats. Numbers are written in shortest round-trip form, so a
// write -> read -> write cycle is byte-stable. Node ids are one-based in
// every file.

namespace hebbpca::io {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct NumericTable {
  Matrix values;
  std::vector<std::string> header;  // empty when the file had none
};

/// Reads a numeric CSV. A first row that does not parse as numbers is taken
/// as a header.
inline NumericTable read_numeric_csv(std::istream& in) {
  NumericTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> row;
    bool numeric = true;
    for (const auto& f : fields) {
      const auto v = parse_double(f);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty() && table.header.empty()) {
        table.header = fields;
        continue;
      }
      throw Error(ErrorCode::ParseError, "non-numeric field on line " + std::to_string(line_no));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::ParseError, "ragged row on line " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::ParseError, "no numeric rows");
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  if (!table.header.empty() && table.header.size() != rows.front().size()) {
    throw Error(ErrorCode::ParseError, "header and rows differ in width");
  }
  return table;
}

inline void write_numeric_csv(std::ostream& out, const Matrix& values,
                              const std::vector<std::string>& header = {}) {
  if (!header.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
  }
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      out << (c ? "," : "") << format_double(values(r, c));
    }
    out << '\n';
  }
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

// ---- DataMatrix / WeightBasis ----

inline DataMatrix read_data(std::istream& in) { return DataMatrix(read_numeric_csv(in).values); }
inline DataMatrix read_data(const std::string& path) {
  auto in = open_in(path);
  return read_data(in);
}

inline void write_data(std::ostream& out, const DataMatrix& data,
                       const std::vector<std::string>& header = {}) {
  write_numeric_csv(out, data.values(), header);
}
inline void write_data(const std::string& path, const DataMatrix& data,
                       const std::vector<std::string>& header = {}) {
  auto out = open_out(path);
  write_data(out, data, header);
}

inline WeightBasis read_basis(std::istream& in) { return WeightBasis(read_numeric_csv(in).values); }
inline WeightBasis read_basis(const std::string& path) {
  auto in = open_in(path);
  return read_basis(in);
}

inline void write_basis(std::ostream& out, const WeightBasis& basis) {
  write_numeric_csv(out, basis.rows());
}
inline void write_basis(const std::string& path, const WeightBasis& basis) {
  auto out = open_out(path);
  write_basis(out, basis);
}

// ---- Spectrum: eigenvalue, then eigenvector components ----

inline void write_spectrum(std::ostream& out, const Spectrum& s) {
  Matrix m(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(s.dims() + 1));
  m.col(0) = s.values();
  m.rightCols(static_cast<Eigen::Index>(s.dims())) = s.vectors().rows();
  write_numeric_csv(out, m);
}

inline Spectrum read_spectrum(std::istream& in) {
  const Matrix m = read_numeric_csv(in).values;
  if (m.cols() < 2) throw Error(ErrorCode::ParseError, "spectrum rows need a value and a vector");
  return Spectrum(m.col(0), WeightBasis(m.rightCols(m.cols() - 1)));
}

// ---- BalanceResult metadata: a single line next to the basis CSV ----

inline void write_balance_meta(std::ostream& out, const BalanceResult& r) {
  out << "k=" << format_double(r.k) << ",rotations_applied=" << r.rotations_applied << '\n';
}

// ---- Training trace ----

inline void write_train_trace(std::ostream& out, const TrainReport& report) {
  out << "epoch,node,delta_norm,captured_variance,cosine_to_oracle\n";
  for (const auto& row : report.trace) {
    out << row.epoch << ',' << row.node + 1 << ',' << format_double(row.delta_norm) << ','
        << format_double(row.captured_variance) << ',';
    if (row.cosine_to_oracle) out << format_double(*row.cosine_to_oracle);
    out << '\n';
  }
}

// ---- Simulation trace and failure scripts ----

inline void write_sim_trace(std::ostream& out, const SimTrace& trace) {
  out << "round,delivered,dropped,live_nodes,max_delta_norm,reconstruction_error\n";
  for (const auto& r : trace.records) {
    out << r.round << ',' << r.delivered << ',' << r.dropped << ',';
    for (std::size_t i = 0; i < r.live.size(); ++i) out << (i ? ";" : "") << r.live[i] + 1;
    out << ',' << format_double(r.max_delta_norm) << ',' << format_double(r.reconstruction_error)
        << '\n';
  }
}

/// Header round,node,action; node is one-based, action is kill or revive.
inline FailureScript read_failure_script(std::istream& in) {
  FailureScript script;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (!header_seen) {
      if (f.size() != 3 || f[0] != "round" || f[1] != "node" || f[2] != "action")
        throw Error(ErrorCode::ParseError, "failure script header must be round,node,action");
      header_seen = true;
      continue;
    }
    const auto round = f.size() == 3 ? parse_double(f[0]) : std::nullopt;
    const auto node = f.size() == 3 ? parse_double(f[1]) : std::nullopt;
    if (!round || !node || *round < 1 || *node < 1 || *round != static_cast<double>(static_cast<std::size_t>(*round)) ||
        *node != static_cast<double>(static_cast<std::size_t>(*node)))
      throw Error(ErrorCode::ParseError, "bad failure event on line " + std::to_string(line_no));
    FailureEvent e;
    e.round = static_cast<std::size_t>(*round);
    e.node = static_cast<NodeId>(*node) - 1;
    if (f[2] == "kill") {
      e.action = FailureAction::Kill;
    } else if (f[2] == "revive") {
      e.action = FailureAction::Revive;
    } else {
      throw Error(ErrorCode::ParseError, "unknown action on line " + std::to_string(line_no));
    }
    script.events.push_back(e);
  }
  if (!header_seen) throw Error(ErrorCode::ParseError, "empty failure script");
  return script;
}

inline FailureScript read_failure_script(const std::string& path) {
  auto in = open_in(path);
  return read_failure_script(in);
}

inline void write_failure_script(std::ostream& out, const FailureScript& script) {
  out << "round,node,action\n";
  for (const auto& e : script.events)
    out << e.round << ',' << e.node + 1 << ',' << (e.action == FailureAction::Kill ? "kill" : "revive")
        << '\n';
}

}  // namespace hebbpca::io
