#ifndef BOWTIE_LINEAR_HPP
#define BOWTIE_LINEAR_HPP

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bowtie/dataset.hpp"

namespace bowtie {

enum class LinearFamily : std::uint8_t { gaussian_ols, gaussian_lasso, gaussian_ridge, poisson };

struct LinearModel {
  LinearFamily family = LinearFamily::gaussian_ols;
  double intercept = 0.0;
  std::vector<double> coefficients; // per schema column
  std::vector<std::string> schema;
  double lambda = 0.0;

  // standardization captured from the training data; empty when none was
  // applied. predict() expects raw feature rows and re-applies it.
  std::vector<double> col_mean, col_sd;

  double adjusted_r2 = std::numeric_limits<double>::quiet_NaN();
  double deviance = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> std_errors; // OLS / Poisson, [intercept, coefficients...]
  // |beta_penalized| / |beta_ols| in the penalty norm (L1 lasso, L2 ridge)
  double shrinkage_ratio = std::numeric_limits<double>::quiet_NaN();
  std::size_t irls_iterations = 0;
};

// Least squares with adjusted R² and coefficient standard errors. Requires
// cols < rows; a rank-deficient design is rejected naming the dependent
// columns.
LinearModel fit_ols(const Dataset& d);

// Log-link Poisson GLM by IRLS; converges when the largest coefficient change
// drops below 1e-8, capped at 100 iterations.
LinearModel fit_poisson(const Dataset& d);

// Coordinate descent for 0.5*|y - Xb|^2/n + lambda*|b|_1 on a standardized
// dataset, soft-thresholding updates, 1e-7 max-coefficient-change tolerance.
LinearModel fit_lasso(const Dataset& d, double lambda);

// Closed-form (X'X + n*lambda*I)^-1 X'y on a standardized dataset; the
// intercept is never penalized.
LinearModel fit_ridge(const Dataset& d, double lambda);

// Smallest lambda with an all-zero lasso solution: max_j |x_j'(y - ybar)| / n.
double lasso_lambda_max(const Dataset& d);

// raw feature rows in, predictions out (response scale; exp() for Poisson)
std::vector<double> predict_linear(const LinearModel& m, const Dataset& d);
double predict_linear_row(const LinearModel& m, std::span<const double> row);

struct CVResult {
  std::vector<double> lambda_grid;
  std::vector<double> mean_loss;
  std::vector<double> sd_loss;
  double chosen_lambda = 0.0;
  std::size_t chosen_index = 0;
};

// Seeded k-fold CV over a lambda grid for the penalized families. Folds are a
// deterministic function of (seed, rows); loss is held-out mean squared error.
// The input dataset is raw; each training fold is standardized internally.
CVResult cross_validate(const Dataset& d, LinearFamily family,
                        std::span<const double> lambda_grid, std::size_t k,
                        std::uint64_t seed);

// log-spaced grid endpoints used for the pipeline's tuning searches
std::vector<double> log_lambda_grid(double lo, double hi, std::size_t points);

} // namespace bowtie

#endif
