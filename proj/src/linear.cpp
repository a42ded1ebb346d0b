#include "bowtie/linear.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bowtie/error.hpp"
#include "bowtie/rng.hpp"

namespace bowtie {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd to_matrix(const Dataset& d) {
  const auto n = static_cast<Eigen::Index>(d.rows());
  const auto p = static_cast<Eigen::Index>(d.cols());
  MatrixXd X(n, p);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < p; ++c) X(r, c) = d.at(r, c);
  return X;
}

VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<std::string> schema_names(const Dataset& d) {
  std::vector<std::string> names;
  names.reserve(d.cols());
  for (const auto& c : d.schema()) names.push_back(c.name);
  return names;
}

void capture_standardization(const Dataset& d, LinearModel& m) {
  if (d.standardized() && !d.column_means().empty()) {
    m.col_mean = d.column_means();
    m.col_sd = d.column_sds();
  }
}

double adjusted_r2(const VectorXd& y, const VectorXd& fitted, std::size_t p_used) {
  const double n = static_cast<double>(y.size());
  const double mean = y.mean();
  const double tss = (y.array() - mean).square().sum();
  const double rss = (y - fitted).squaredNorm();
  if (tss <= 0) return 0.0;
  const double r2 = 1.0 - rss / tss;
  const double denom = n - static_cast<double>(p_used) - 1.0;
  if (denom <= 0) return r2;
  return 1.0 - (1.0 - r2) * (n - 1.0) / denom;
}

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

// Full-sweep coordinate descent on the Gram system. beta is both the warm
// start and the result; returns the number of sweeps used.
std::size_t lasso_cd(const MatrixXd& gram, const VectorXd& xty, double n, double lambda,
                     VectorXd& beta, double tol = 1e-7, std::size_t max_sweeps = 100000) {
  const Eigen::Index p = gram.rows();
  VectorXd gram_beta = gram * beta;
  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double col_sq = gram(j, j) / n;
      if (col_sq <= 0) {
        beta[j] = 0.0;
        continue;
      }
      const double grad = (xty[j] - gram_beta[j]) / n;
      const double z = grad + col_sq * beta[j];
      const double updated = soft_threshold(z, lambda) / col_sq;
      const double change = updated - beta[j];
      if (change != 0.0) {
        gram_beta += gram.col(j) * change;
        beta[j] = updated;
        max_change = std::max(max_change, std::abs(change));
      }
    }
    if (max_change < tol) return sweep;
  }
  throw NumericError("lasso coordinate descent failed to converge in " +
                     std::to_string(max_sweeps) + " sweeps");
}

// basic least-squares coefficients for the shrinkage-ratio denominators
VectorXd centered_ols(const MatrixXd& X, const VectorXd& yc) {
  return X.colPivHouseholderQr().solve(yc);
}

void check_penalized_inputs(const Dataset& d, double lambda, const char* what) {
  if (!d.standardized())
    throw ValidationError(std::string(what) + " requires a standardized dataset");
  if (lambda < 0) throw ValidationError("lambda must be nonnegative");
  if (d.rows() == 0) throw ValidationError("empty dataset");
}

} // namespace

LinearModel fit_ols(const Dataset& d) {
  const std::size_t n = d.rows();
  const std::size_t p = d.cols();
  if (p >= n)
    throw ValidationError("OLS requires cols < rows (" + std::to_string(p) + " vs " +
                          std::to_string(n) + ")");
  MatrixXd X1(n, p + 1);
  X1.col(0).setOnes();
  X1.rightCols(p) = to_matrix(d);
  VectorXd y = to_vector(d.y());

  Eigen::ColPivHouseholderQR<MatrixXd> qr(X1);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(p + 1)) {
    // pivot order puts the dependent columns last
    auto perm = qr.colsPermutation().indices();
    std::ostringstream os;
    os << "rank-deficient design; dependent columns:";
    for (Eigen::Index k = qr.rank(); k < perm.size(); ++k) {
      const Eigen::Index col = perm[k];
      os << " " << (col == 0 ? "(intercept)" : d.schema()[col - 1].name);
    }
    throw NumericError(os.str());
  }
  VectorXd beta = qr.solve(y);
  VectorXd fitted = X1 * beta;

  LinearModel m;
  m.family = LinearFamily::gaussian_ols;
  m.intercept = beta[0];
  m.coefficients.assign(beta.data() + 1, beta.data() + 1 + p);
  m.schema = schema_names(d);
  capture_standardization(d, m);
  m.adjusted_r2 = adjusted_r2(y, fitted, p);

  const double rss = (y - fitted).squaredNorm();
  const double dof = static_cast<double>(n) - static_cast<double>(p) - 1.0;
  if (dof > 0) {
    const double sigma2 = rss / dof;
    MatrixXd xtx_inv =
        (X1.transpose() * X1).ldlt().solve(MatrixXd::Identity(p + 1, p + 1));
    m.std_errors.resize(p + 1);
    for (std::size_t k = 0; k <= p; ++k)
      m.std_errors[k] = std::sqrt(std::max(0.0, sigma2 * xtx_inv(k, k)));
  }
  return m;
}

LinearModel fit_poisson(const Dataset& d) {
  const std::size_t n = d.rows();
  const std::size_t p = d.cols();
  if (n == 0) throw ValidationError("empty dataset");
  for (double v : d.y())
    if (v < 0 || v != std::floor(v))
      throw ValidationError("Poisson regression requires nonnegative integer response; found " +
                            std::to_string(v));
  VectorXd y = to_vector(d.y());
  const double ybar = y.mean();
  if (ybar <= 0) throw NumericError("Poisson response is identically zero");

  MatrixXd X1(n, p + 1);
  X1.col(0).setOnes();
  X1.rightCols(p) = to_matrix(d);

  VectorXd beta = VectorXd::Zero(p + 1);
  beta[0] = std::log(ybar);

  auto poisson_deviance = [&](const VectorXd& b) {
    VectorXd mu = (X1 * b).cwiseMin(30.0).cwiseMax(-30.0).array().exp();
    double dev = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double yi = y[i];
      dev += yi > 0 ? yi * std::log(yi / mu[i]) - (yi - mu[i]) : mu[i];
    }
    return 2.0 * dev;
  };

  std::vector<double> trace;
  const std::size_t max_iter = 100;
  bool converged = false;
  double dev = poisson_deviance(beta);
  MatrixXd xtwx;
  for (std::size_t it = 0; it < max_iter; ++it) {
    VectorXd eta = (X1 * beta).cwiseMin(30.0).cwiseMax(-30.0);
    VectorXd mu = eta.array().exp();
    VectorXd z = eta + (y - mu).cwiseQuotient(mu);
    MatrixXd Xw = X1.array().colwise() * mu.array();
    xtwx = Xw.transpose() * X1;
    VectorXd xtwz = Xw.transpose() * z;
    VectorXd next = xtwx.ldlt().solve(xtwz);
    if (!next.allFinite()) {
      std::ostringstream os;
      os << "IRLS diverged at iteration " << it << "; max-change trace:";
      for (double t : trace) os << " " << t;
      throw NumericError(os.str());
    }

    // step-halve toward the previous iterate until the deviance stops rising;
    // plain IRLS oscillates on strongly correlated designs
    double next_dev = poisson_deviance(next);
    for (int half = 0; half < 30 && next_dev > dev + 1e-12; ++half) {
      next = 0.5 * (next + beta);
      next_dev = poisson_deviance(next);
    }

    const double change = (next - beta).cwiseAbs().maxCoeff();
    trace.push_back(change);
    beta = next;
    dev = next_dev;
    if (change < 1e-8) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "IRLS did not converge in " << max_iter << " iterations; max-change trace:";
    const std::size_t from = trace.size() > 10 ? trace.size() - 10 : 0;
    for (std::size_t k = from; k < trace.size(); ++k) os << " " << trace[k];
    throw NumericError(os.str());
  }

  LinearModel m;
  m.family = LinearFamily::poisson;
  m.intercept = beta[0];
  m.coefficients.assign(beta.data() + 1, beta.data() + 1 + p);
  m.schema = schema_names(d);
  capture_standardization(d, m);
  m.irls_iterations = trace.size();

  m.deviance = poisson_deviance(beta);

  MatrixXd cov = xtwx.ldlt().solve(MatrixXd::Identity(p + 1, p + 1));
  m.std_errors.resize(p + 1);
  for (std::size_t k = 0; k <= p; ++k)
    m.std_errors[k] = std::sqrt(std::max(0.0, cov(k, k)));
  return m;
}

double lasso_lambda_max(const Dataset& d) {
  const double n = static_cast<double>(d.rows());
  if (n == 0) throw ValidationError("empty dataset");
  MatrixXd X = to_matrix(d);
  VectorXd y = to_vector(d.y());
  VectorXd yc = y.array() - y.mean();
  return (X.transpose() * yc).cwiseAbs().maxCoeff() / n;
}

LinearModel fit_lasso(const Dataset& d, double lambda) {
  check_penalized_inputs(d, lambda, "lasso");
  const std::size_t n = d.rows();
  const std::size_t p = d.cols();
  MatrixXd X = to_matrix(d);
  VectorXd y = to_vector(d.y());
  const double ybar = y.mean();
  VectorXd yc = y.array() - ybar;

  MatrixXd gram = X.transpose() * X;
  VectorXd xty = X.transpose() * yc;
  VectorXd beta = VectorXd::Zero(p);
  lasso_cd(gram, xty, static_cast<double>(n), lambda, beta);

  LinearModel m;
  m.family = LinearFamily::gaussian_lasso;
  m.lambda = lambda;
  m.intercept = ybar;
  m.coefficients.assign(beta.data(), beta.data() + p);
  m.schema = schema_names(d);
  capture_standardization(d, m);
  m.adjusted_r2 = adjusted_r2(y, (X * beta).array() + ybar, p);

  VectorXd beta_ols = centered_ols(X, yc);
  const double denom = beta_ols.lpNorm<1>();
  m.shrinkage_ratio = denom > 0 ? beta.lpNorm<1>() / denom : 1.0;
  return m;
}

LinearModel fit_ridge(const Dataset& d, double lambda) {
  check_penalized_inputs(d, lambda, "ridge");
  const std::size_t n = d.rows();
  const std::size_t p = d.cols();
  MatrixXd X = to_matrix(d);
  VectorXd y = to_vector(d.y());
  const double ybar = y.mean();
  VectorXd yc = y.array() - ybar;

  MatrixXd system = X.transpose() * X;
  system.diagonal().array() += static_cast<double>(n) * lambda;
  VectorXd beta = system.ldlt().solve(X.transpose() * yc);

  LinearModel m;
  m.family = LinearFamily::gaussian_ridge;
  m.lambda = lambda;
  m.intercept = ybar;
  m.coefficients.assign(beta.data(), beta.data() + p);
  m.schema = schema_names(d);
  capture_standardization(d, m);
  m.adjusted_r2 = adjusted_r2(y, (X * beta).array() + ybar, p);

  VectorXd beta_ols = centered_ols(X, yc);
  const double denom = beta_ols.norm();
  m.shrinkage_ratio = denom > 0 ? beta.norm() / denom : 1.0;
  return m;
}

double predict_linear_row(const LinearModel& m, std::span<const double> row) {
  double eta = m.intercept;
  for (std::size_t c = 0; c < m.coefficients.size(); ++c) {
    double v = row[c];
    if (!m.col_mean.empty()) v = (v - m.col_mean[c]) / m.col_sd[c];
    eta += m.coefficients[c] * v;
  }
  return m.family == LinearFamily::poisson ? std::exp(eta) : eta;
}

std::vector<double> predict_linear(const LinearModel& m, const Dataset& d) {
  if (d.cols() != m.coefficients.size())
    throw ValidationError("schema mismatch: model expects " +
                          std::to_string(m.coefficients.size()) + " columns, got " +
                          std::to_string(d.cols()));
  for (std::size_t c = 0; c < d.cols(); ++c)
    if (d.schema()[c].name != m.schema[c])
      throw ValidationError("schema mismatch at column " + std::to_string(c) +
                            ": model has '" + m.schema[c] + "', data has '" +
                            d.schema()[c].name + "'");
  std::vector<double> out(d.rows());
  for (std::size_t r = 0; r < d.rows(); ++r) out[r] = predict_linear_row(m, d.row(r));
  return out;
}

std::vector<double> log_lambda_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0) || !(hi >= lo) || points == 0)
    throw ValidationError("invalid lambda grid parameters");
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = lo;
    return grid;
  }
  const double step = (std::log(hi) - std::log(lo)) / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k)
    grid[k] = std::exp(std::log(lo) + step * static_cast<double>(k));
  return grid;
}

CVResult cross_validate(const Dataset& d, LinearFamily family,
                        std::span<const double> lambda_grid, std::size_t k,
                        std::uint64_t seed) {
  if (family != LinearFamily::gaussian_lasso && family != LinearFamily::gaussian_ridge)
    throw ValidationError("cross-validation tunes the lasso or ridge families");
  if (lambda_grid.empty()) throw ValidationError("empty lambda grid");
  const std::size_t n = d.rows();
  if (k < 2) throw ValidationError("need at least 2 folds");
  if (n < k) throw ValidationError("fewer rows than folds");

  // deterministic fold assignment
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0xF01D5ULL));
  rng.shuffle(perm);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = i % k;

  // evaluate the grid in descending lambda order with warm starts
  std::vector<std::size_t> order(lambda_grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return lambda_grid[a] > lambda_grid[b]; });

  std::vector<std::vector<double>> fold_loss(lambda_grid.size(),
                                             std::vector<double>(k, 0.0));
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < n; ++i)
      (fold_of[i] == f ? test_idx : train_idx).push_back(i);

    Dataset train = d.subset(train_idx);
    if (!train.standardized()) train.standardize();
    const std::size_t nt = train.rows();
    const std::size_t p = train.cols();
    MatrixXd X = to_matrix(train);
    VectorXd y = to_vector(train.y());
    const double ybar = y.mean();
    VectorXd yc = y.array() - ybar;
    MatrixXd gram = X.transpose() * X;
    VectorXd xty = X.transpose() * yc;

    const std::vector<double>& mean = train.column_means();
    const std::vector<double>& sd = train.column_sds();

    VectorXd beta = VectorXd::Zero(p);
    for (std::size_t oi : order) {
      const double lambda = lambda_grid[oi];
      if (lambda < 0) throw ValidationError("lambda must be nonnegative");
      if (family == LinearFamily::gaussian_lasso) {
        lasso_cd(gram, xty, static_cast<double>(nt), lambda, beta);
      } else {
        MatrixXd system = gram;
        system.diagonal().array() += static_cast<double>(nt) * lambda;
        beta = system.ldlt().solve(xty);
      }
      double sse = 0;
      for (std::size_t i : test_idx) {
        double eta = ybar;
        auto row = d.row(i);
        for (std::size_t c = 0; c < p; ++c) {
          double v = row[c];
          if (!mean.empty()) v = (v - mean[c]) / sd[c];
          eta += beta[c] * v;
        }
        const double r = d.y()[i] - eta;
        sse += r * r;
      }
      fold_loss[oi][f] = sse / static_cast<double>(test_idx.size());
    }
  }

  CVResult cv;
  cv.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());
  cv.mean_loss.resize(lambda_grid.size());
  cv.sd_loss.resize(lambda_grid.size());
  for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
    double mean = 0;
    for (double v : fold_loss[g]) mean += v;
    mean /= static_cast<double>(k);
    double var = 0;
    for (double v : fold_loss[g]) var += (v - mean) * (v - mean);
    cv.mean_loss[g] = mean;
    cv.sd_loss[g] = k > 1 ? std::sqrt(var / static_cast<double>(k - 1)) : 0.0;
  }
  cv.chosen_index = static_cast<std::size_t>(
      std::min_element(cv.mean_loss.begin(), cv.mean_loss.end()) - cv.mean_loss.begin());
  cv.chosen_lambda = cv.lambda_grid[cv.chosen_index];
  return cv;
}

} // namespace bowtie
