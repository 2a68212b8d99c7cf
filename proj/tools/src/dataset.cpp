#include "wss/cli/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "wss/cli/output.hpp"
#include "wss/error.hpp"

namespace wss::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& s, std::size_t row, const std::string& column) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kParse, "row " + std::to_string(row) + ", column '" + column +
                                       "': cannot parse '" + s + "' as a finite number");
  }
  return v;
}

}  // namespace

Dataset parse_dataset_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorCode::kParse, "dataset is empty: no header row");

  int y_col = -1, delta_col = -1;
  std::map<int, int> x_cols;  // covariate index -> column
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    const int col = static_cast<int>(c);
    if (h == "y") {
      y_col = col;
    } else if (h == "delta") {
      delta_col = col;
    } else if (h.size() > 1 && h[0] == 'x' &&
               std::all_of(h.begin() + 1, h.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      const int idx = std::stoi(h.substr(1));
      if (idx < 1 || !x_cols.emplace(idx, col).second) {
        throw Error(ErrorCode::kParse, "header: invalid or duplicate covariate column '" + h + "'");
      }
    } else {
      throw Error(ErrorCode::kParse, "header: unexpected column '" + h +
                                         "' (expected y, delta, x1..xp)");
    }
  }
  if (y_col < 0) throw Error(ErrorCode::kParse, "header: missing column 'y'");
  if (delta_col < 0) throw Error(ErrorCode::kParse, "header: missing column 'delta'");
  if (x_cols.empty()) throw Error(ErrorCode::kParse, "header: missing covariate columns x1..xp");
  int expected = 1;
  for (const auto& [idx, col] : x_cols) {
    if (idx != expected) {
      throw Error(ErrorCode::kParse, "header: missing column 'x" + std::to_string(expected) + "'");
    }
    ++expected;
  }

  std::vector<std::vector<std::string>> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kParse, "row " + std::to_string(row_no) + ": expected " +
                                         std::to_string(header.size()) + " columns, found " +
                                         std::to_string(cells.size()));
    }
    cells.push_back(std::to_string(row_no));
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw Error(ErrorCode::kParse, "dataset has no data rows");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(x_cols.size());
  Dataset d;
  d.x.resize(n, p);
  d.sample.y.resize(n);
  d.sample.delta.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& cells = rows[static_cast<std::size_t>(i)];
    const std::size_t rno = std::stoul(cells.back());
    d.sample.y(i) = parse_double(cells[static_cast<std::size_t>(y_col)], rno, "y");
    const double delta = parse_double(cells[static_cast<std::size_t>(delta_col)], rno, "delta");
    if (delta != 0.0 && delta != 1.0) {
      throw Error(ErrorCode::kParse, "row " + std::to_string(rno) +
                                         ", column 'delta': must be 0 or 1");
    }
    d.sample.delta(i) = delta;
    for (const auto& [idx, col] : x_cols) {
      d.x(i, idx - 1) = parse_double(cells[static_cast<std::size_t>(col)], rno,
                                     "x" + std::to_string(idx));
    }
  }
  return d;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset_csv(ss.str());
}

std::string dataset_to_csv(const Dataset& d) {
  std::vector<std::string> header = {"y", "delta"};
  for (Eigen::Index j = 0; j < d.x.cols(); ++j) header.push_back("x" + std::to_string(j + 1));
  CsvTable t(header);
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    t.cell(d.sample.y(i)).cell(d.sample.delta(i) > 0.5 ? 1 : 0);
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) t.cell(d.x(i, j));
    t.end_row();
  }
  return t.str();
}

}  // namespace wss::cli
