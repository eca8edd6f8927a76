#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace roadres {
namespace stats {

struct Standardized {
  std::vector<double> values;  // (x - mean) / (2 sd)
  double mean = 0;
  double sd = 0;  // sample sd, n-1 denominator
};

/// Gelman 2-SD standardization. Throws ComputeError on < 2 values or sd == 0
/// (constant columns must be dropped upstream).
Standardized standardize_2sd(std::span<const double> values);

struct TTestResult {
  std::string label_a, label_b;
  double mean_a = 0, mean_b = 0;
  double sd_a = 0, sd_b = 0;
  std::size_t n_a = 0, n_b = 0;
  double diff = 0;       // mean_a - mean_b
  double ci_lo = 0, ci_hi = 0;  // 95%, t-based
  double t_stat = 0;
  double df = 0;         // Welch-Satterthwaite
  double p_value = 0;    // two-sided
  std::string significance;  // stars per significance_code()
};

/// Welch (unequal-variance) unpaired t-test. Each sample needs >= 2 values;
/// zero variance in both samples is an error.
TTestResult welch_ttest(std::span<const double> a, std::span<const double> b);

/// Significance codes: 0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 '' 1.
std::string significance_code(double p);

/// Per-column variance inflation factors: VIF_k = 1 / (1 - R^2_k) from
/// regressing column k on the others plus an intercept. Exact collinearity
/// yields +infinity.
std::vector<double> vif(const Eigen::MatrixXd& columns);

/// Fits a candidate set and reports its AIC; nullopt marks a failed fit
/// (the candidate is skipped with a log entry).
using AicFitter =
    std::function<std::optional<double>(const std::vector<std::string>& selected)>;

struct StepwiseResult {
  std::vector<std::string> selected;  // in order of addition
  double aic = 0;                     // of the final model
  std::vector<std::string> log;       // per-round decisions and skips
};

/// Greedy forward selection: each round adds the candidate with the largest
/// AIC decrease (ties broken by candidate name); stops when nothing improves.
StepwiseResult forward_stepwise_aic(std::vector<std::string> candidates, const AicFitter& fitter);

/// Percentage effect of a log-link coefficient: 100 * (1 - e^beta).
double rate_effect(double beta);

/// Ordinary least squares with intercept; returns coefficients (intercept
/// first) and the AIC under the Gaussian likelihood
/// (-2 loglik + 2 (#coefficients + 1 variance parameter)).
struct OlsFit {
  Eigen::VectorXd beta;
  double rss = 0;
  double aic = 0;
};

OlsFit ols_fit(const Eigen::MatrixXd& x_no_intercept, const Eigen::VectorXd& y);

// Distribution helpers (Boost.Math backed).
double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);
double chi_squared_sf(double x, double df);  // upper tail, fractional df ok
double normal_quantile(double p);

}  // namespace stats
}  // namespace roadres
