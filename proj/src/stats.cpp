#include "roadres/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "roadres/errors.hpp"

namespace roadres {
namespace stats {

namespace {

std::pair<double, double> mean_var(std::span<const double> x) {
  double mean = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, ss / static_cast<double>(x.size() - 1)};
}

}  // namespace

double student_t_cdf(double t, double df) {
  boost::math::students_t dist(df);
  return boost::math::cdf(dist, t);
}

double student_t_quantile(double p, double df) {
  boost::math::students_t dist(df);
  return boost::math::quantile(dist, p);
}

double chi_squared_sf(double x, double df) {
  if (df <= 0) return 1.0;
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

double normal_quantile(double p) {
  boost::math::normal dist;
  return boost::math::quantile(dist, p);
}

Standardized standardize_2sd(std::span<const double> values) {
  if (values.size() < 2) throw ComputeError("standardize_2sd: need at least 2 values");
  auto [mean, var] = mean_var(values);
  double sd = std::sqrt(var);
  if (!(sd > 0)) throw ComputeError("standardize_2sd: zero standard deviation (constant column)");
  Standardized out;
  out.mean = mean;
  out.sd = sd;
  out.values.reserve(values.size());
  for (double v : values) out.values.push_back((v - mean) / (2.0 * sd));
  return out;
}

std::string significance_code(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return "";
}

TTestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ComputeError("welch_ttest: each sample needs >= 2 values");
  auto [mean_a, var_a] = mean_var(a);
  auto [mean_b, var_b] = mean_var(b);
  if (!(var_a > 0) && !(var_b > 0))
    throw ComputeError("welch_ttest: zero variance in both samples");

  TTestResult r;
  r.mean_a = mean_a;
  r.mean_b = mean_b;
  r.sd_a = std::sqrt(var_a);
  r.sd_b = std::sqrt(var_b);
  r.n_a = a.size();
  r.n_b = b.size();
  r.diff = mean_a - mean_b;

  double va_n = var_a / static_cast<double>(a.size());
  double vb_n = var_b / static_cast<double>(b.size());
  double se = std::sqrt(va_n + vb_n);
  r.t_stat = r.diff / se;
  r.df = (va_n + vb_n) * (va_n + vb_n) /
         (va_n * va_n / static_cast<double>(a.size() - 1) +
          vb_n * vb_n / static_cast<double>(b.size() - 1));
  r.p_value = 2.0 * (1.0 - student_t_cdf(std::fabs(r.t_stat), r.df));
  double t_crit = student_t_quantile(0.975, r.df);
  r.ci_lo = r.diff - t_crit * se;
  r.ci_hi = r.diff + t_crit * se;
  r.significance = significance_code(r.p_value);
  return r;
}

std::vector<double> vif(const Eigen::MatrixXd& columns) {
  const Eigen::Index n = columns.rows();
  const Eigen::Index k = columns.cols();
  if (k < 2) throw ComputeError("vif: need at least 2 columns");
  if (n <= k) throw ComputeError("vif: need more rows than columns");

  std::vector<double> out(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::MatrixXd design(n, k);  // intercept + the other columns
    design.col(0).setOnes();
    Eigen::Index c = 1;
    for (Eigen::Index m = 0; m < k; ++m)
      if (m != j) design.col(c++) = columns.col(m);
    Eigen::VectorXd y = columns.col(j);
    Eigen::VectorXd beta = design.colPivHouseholderQr().solve(y);
    double ssr = (y - design * beta).squaredNorm();
    double sst = (y.array() - y.mean()).matrix().squaredNorm();
    if (!(sst > 0)) throw ComputeError("vif: constant column " + std::to_string(j));
    double one_minus_r2 = ssr / sst;
    out[static_cast<std::size_t>(j)] =
        one_minus_r2 < 1e-12 ? std::numeric_limits<double>::infinity() : 1.0 / one_minus_r2;
  }
  return out;
}

StepwiseResult forward_stepwise_aic(std::vector<std::string> candidates, const AicFitter& fitter) {
  StepwiseResult result;
  std::sort(candidates.begin(), candidates.end());

  auto base = fitter({});
  if (!base) throw ComputeError("forward_stepwise_aic: intercept-only fit failed");
  result.aic = *base;
  result.log.push_back("start aic=" + std::to_string(result.aic));

  std::vector<std::string> remaining = candidates;
  while (!remaining.empty()) {
    std::optional<std::string> best;
    double best_aic = result.aic;
    for (const auto& cand : remaining) {  // remaining is sorted: name tie-break
      std::vector<std::string> trial = result.selected;
      trial.push_back(cand);
      auto aic = fitter(trial);
      if (!aic) {
        result.log.push_back("skip " + cand + " (fit failed)");
        continue;
      }
      if (*aic < best_aic) {
        best = cand;
        best_aic = *aic;
      }
    }
    if (!best) break;  // no addition decreases AIC
    result.selected.push_back(*best);
    result.aic = best_aic;
    result.log.push_back("add " + *best + " aic=" + std::to_string(best_aic));
    remaining.erase(std::find(remaining.begin(), remaining.end(), *best));
  }
  return result;
}

double rate_effect(double beta) {
  if (!std::isfinite(beta)) throw ComputeError("rate_effect: non-finite beta");
  return 100.0 * (1.0 - std::exp(beta));
}

OlsFit ols_fit(const Eigen::MatrixXd& x_no_intercept, const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  Eigen::MatrixXd design(n, x_no_intercept.cols() + 1);
  design.col(0).setOnes();
  if (x_no_intercept.cols() > 0) design.rightCols(x_no_intercept.cols()) = x_no_intercept;
  OlsFit fit;
  fit.beta = design.colPivHouseholderQr().solve(y);
  fit.rss = (y - design * fit.beta).squaredNorm();
  double sigma2 = fit.rss / static_cast<double>(n);
  double loglik = -0.5 * static_cast<double>(n) *
                  (std::log(2.0 * 3.14159265358979323846 * sigma2) + 1.0);
  fit.aic = -2.0 * loglik + 2.0 * (static_cast<double>(design.cols()) + 1.0);
  return fit;
}

}  // namespace stats
}  // namespace roadres
