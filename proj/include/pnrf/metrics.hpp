#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pnrf/util.hpp"

namespace pnrf {

inline constexpr const char* kMetricsHeader =
    "step,alpha,lr,loss_rgb,loss_depth,loss_cv,loss_sparse,loss_reg,total,psnr_train,psnr_test";

// One dynamics-log record. Loss columns hold lambda_i * L_i (the weighted
// contributions before the alpha multiplier); psnr_test is empty on steps
// where no test render ran.
struct MetricsRow {
  int64_t step = 0;
  double alpha = 0, lr = 0;
  double loss_rgb = 0, loss_depth = 0, loss_cv = 0, loss_sparse = 0, loss_reg = 0, total = 0;
  double psnr_train = 0;
  std::optional<double> psnr_test;
};

namespace detail {
inline std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}
}  // namespace detail

inline std::string format_metrics_row(const MetricsRow& r) {
  using detail::fmt_g;
  std::ostringstream os;
  os << r.step << ',' << fmt_g(r.alpha) << ',' << fmt_g(r.lr) << ',' << fmt_g(r.loss_rgb) << ','
     << fmt_g(r.loss_depth) << ',' << fmt_g(r.loss_cv) << ',' << fmt_g(r.loss_sparse) << ','
     << fmt_g(r.loss_reg) << ',' << fmt_g(r.total) << ',' << fmt_g(r.psnr_train) << ',';
  if (r.psnr_test) os << fmt_g(*r.psnr_test);
  return os.str();
}

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), cat("metrics: cannot open ", path));
  std::string line;
  check(static_cast<bool>(std::getline(f, line)) && line == kMetricsHeader,
        cat("metrics: unexpected header in ", path));
  std::vector<MetricsRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    check(cells.size() == 11, cat("metrics: malformed row in ", path, ": ", line));
    MetricsRow r;
    r.step = std::stoll(cells[0]);
    r.alpha = std::stod(cells[1]);
    r.lr = std::stod(cells[2]);
    r.loss_rgb = std::stod(cells[3]);
    r.loss_depth = std::stod(cells[4]);
    r.loss_cv = std::stod(cells[5]);
    r.loss_sparse = std::stod(cells[6]);
    r.loss_reg = std::stod(cells[7]);
    r.total = std::stod(cells[8]);
    r.psnr_train = std::stod(cells[9]);
    if (!cells[10].empty()) r.psnr_test = std::stod(cells[10]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace pnrf
