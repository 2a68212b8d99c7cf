#pragma once

#include <string>

#include "wss/linalg.hpp"
#include "wss/weibull.hpp"

namespace wss::cli {

// A censored sample with its covariates. y is the log time; delta is 1 for
// an observed failure and 0 for a censored one.
struct Dataset {
  Matrix x;
  CensoredSample sample;
};

// Columns: y, delta, x1..xp in any order; extra columns are rejected.
// Throws Error(kParse) naming the row and column of the first problem.
Dataset parse_dataset_csv(const std::string& text);
Dataset read_dataset_csv(const std::string& path);

std::string dataset_to_csv(const Dataset& d);

}  // namespace wss::cli
