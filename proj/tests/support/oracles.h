#pragma once

// Reference implementations written without the library, used as oracles.

#include <vector>

namespace oracle {

// Mean over i of -log( exp(-(p_i-y_i)^2/tau) / sum_j exp(-(p_i-y_j)^2/tau) ),
// evaluated directly in long double.
double bmc(const std::vector<double>& p, const std::vector<double>& y, double tau);

// Rank by counting (ties get the mean position), then textbook Pearson.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace oracle
