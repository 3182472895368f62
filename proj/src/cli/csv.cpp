#include "szo/cli/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "szo/errors.hpp"

namespace szo::cli {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

const std::vector<std::string>& run_columns() {
  static const std::vector<std::string> cols{
      "step",     "examples_seen", "fevals",  "sparsity",   "train_loss",
      "cum_loss", "grad_dist",     "L_local", "L_neighbor", "test_acc"};
  return cols;
}

std::vector<std::optional<double>> row_values(const MetricsRow& row) {
  return {static_cast<double>(row.step),
          static_cast<double>(row.examples_seen),
          static_cast<double>(row.fevals),
          row.sparsity,
          row.train_loss,
          row.cum_loss,
          row.grad_dist,
          row.lipschitz_local,
          row.lipschitz_neighbor,
          row.test_acc};
}

namespace {

void append_header(std::string& out, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i > 0) out += ',';
    out += cols[i];
  }
  out += '\n';
}

}  // namespace

std::string run_csv(const RunRecord& record) {
  std::string out;
  append_header(out, run_columns());
  for (const auto& row : record.rows) {
    out += std::to_string(row.step);
    out += ',';
    out += std::to_string(row.examples_seen);
    out += ',';
    out += std::to_string(row.fevals);
    const auto values = row_values(row);
    for (std::size_t c = 3; c < values.size(); ++c) {
      out += ',';
      out += format_cell(values[c]);
    }
    out += '\n';
  }
  return out;
}

std::string compare_csv(const std::vector<VariantRuns>& variants,
                        double ema_factor) {
  const auto& cols = run_columns();
  const std::size_t metrics = cols.size() - 1;

  std::size_t max_step = 0;
  bool any_rows = false;
  for (const auto& v : variants) {
    for (const auto& r : v.runs) {
      if (!r.rows.empty()) {
        max_step = std::max(max_step, r.rows.back().step);
        any_rows = true;
      }
    }
  }
  const std::size_t steps = any_rows ? max_step + 1 : 0;

  // columns[c] holds one series per output column, indexed by step.
  struct Column {
    std::string name;
    std::vector<std::optional<double>> values;
  };
  std::vector<Column> columns;

  for (std::size_t m = 0; m < metrics; ++m) {
    for (const auto& v : variants) {
      // Per-step samples from every seed that recorded this metric.
      std::vector<std::vector<double>> samples(steps);
      for (const auto& r : v.runs) {
        for (const auto& row : r.rows) {
          const auto val = row_values(row)[m + 1];
          if (val) samples[row.step].push_back(*val);
        }
      }
      Column mean{cols[m + 1] + "_" + v.name, {}};
      Column sd{cols[m + 1] + "_" + v.name + "_std", {}};
      mean.values.resize(steps);
      sd.values.resize(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        const auto& s = samples[t];
        if (s.empty()) continue;
        double mu = 0.0;
        for (double x : s) mu += x;
        mu /= static_cast<double>(s.size());
        mean.values[t] = mu;
        if (s.size() >= 2) {
          double var = 0.0;
          for (double x : s) var += (x - mu) * (x - mu);
          sd.values[t] = std::sqrt(var / static_cast<double>(s.size() - 1));
        }
      }
      Column smooth{cols[m + 1] + "_" + v.name + "_ema",
                    ema(std::span<const std::optional<double>>(mean.values),
                        ema_factor)};
      columns.push_back(std::move(mean));
      columns.push_back(std::move(smooth));
      if (v.runs.size() >= 2) columns.push_back(std::move(sd));
    }
  }

  std::string out = "step";
  for (const auto& c : columns) {
    out += ',';
    out += c.name;
  }
  out += '\n';
  for (std::size_t t = 0; t < steps; ++t) {
    out += std::to_string(t);
    for (const auto& c : columns) {
      out += ',';
      out += format_cell(c.values[t]);
    }
    out += '\n';
  }
  return out;
}

std::string histogram_csv(const std::vector<HistogramRow>& rows) {
  std::string out = "step,bin,lo,hi,count,zero_count\n";
  for (const auto& r : rows) {
    const auto& h = r.histogram;
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      const double lo = h.lo + h.bin_width() * static_cast<double>(b);
      const double hi = b + 1 == h.counts.size() ? h.hi : lo + h.bin_width();
      out += std::to_string(r.step) + ',' + std::to_string(b) + ',' +
             format_double(lo) + ',' + format_double(hi) + ',' +
             std::to_string(h.counts[b]) + ',' + std::to_string(h.zero_count) +
             '\n';
    }
  }
  return out;
}

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line.empty()) continue;
      t.header = split_line(line);
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw FormatError("csv line " + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " cells, got " +
                        std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw FormatError("csv: missing header");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return parse_csv(text);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed for " + path);
}

}  // namespace szo::cli
