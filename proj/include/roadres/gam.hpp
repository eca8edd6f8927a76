#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace roadres {
namespace gam {

enum class Family { GaussianIdentity, NegBinLog };

/// Cubic regression spline basis with knots at the quantiles of x, centered
/// for identifiability (sum-to-zero over the fitting data). The penalty is
/// the integrated squared second derivative expressed in the constrained
/// coordinates; its null space is the (centered) linear function.
struct CrBasis {
  Eigen::MatrixXd basis;    // n x (k-1)
  Eigen::MatrixXd penalty;  // (k-1) x (k-1), symmetric PSD
  Eigen::VectorXd knots;    // k, strictly increasing
  Eigen::MatrixXd curvature_map;  // k x k: knot values -> second derivatives
  Eigen::MatrixXd constraint;     // k x (k-1): null space of the centering constraint

  /// Basis rows for new points (linear extrapolation outside the knots).
  Eigen::MatrixXd rows_at(const Eigen::VectorXd& x) const;
};

/// k >= 3 and at least k distinct x values required.
CrBasis cr_basis(const Eigen::VectorXd& x, int k);

/// Interaction-only tensor product of two centered marginal cr bases, with
/// one curvature penalty per marginal direction (each gets its own lambda).
struct TensorBasis {
  Eigen::MatrixXd basis;        // n x (k1-1)(k2-1)
  Eigen::MatrixXd penalty_1;    // margin-1 direction
  Eigen::MatrixXd penalty_2;    // margin-2 direction
  CrBasis margin_1, margin_2;

  Eigen::MatrixXd rows_at(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2) const;
};

TensorBasis tensor_basis(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, int k1, int k2);

/// Categorical column as integer codes over a fixed level list; the reference
/// level is absorbed into the intercept.
struct CategoricalColumn {
  std::vector<int> codes;
  std::vector<std::string> levels;
  int reference = 0;
};

struct DataTable {
  std::size_t n = 0;
  std::map<std::string, Eigen::VectorXd> numeric;
  std::map<std::string, CategoricalColumn> categorical;
};

struct SmoothTermSpec {
  std::string var;
  int k = 10;
};

struct TensorTermSpec {
  std::string var1;
  std::string var2;
  int k1 = 5;
  int k2 = 5;
};

std::vector<double> default_lambda_grid();  // 25 log-spaced points, 1e-4..1e8

struct GamSpec {
  std::string response;
  Family family = Family::GaussianIdentity;
  std::vector<std::string> linear_terms;  // categorical iff present as such in the table
  std::vector<SmoothTermSpec> smooth_terms;
  std::optional<TensorTermSpec> tensor_term;
  std::vector<double> lambda_grid = default_lambda_grid();
  std::optional<double> theta_fixed;  // NB dispersion, estimated when absent
  int max_irls_iterations = 200;
  double deviance_tolerance = 1e-8;
};

struct Coefficient {
  std::string name;
  double estimate = 0;
  double se = 0;
  double ci_lo = 0, ci_hi = 0;  // 95%, model-based
  double p_value = 1;
  std::string significance;
};

struct SmoothSummary {
  std::string name;
  double edf = 0;       // trace of the influence-matrix block
  double chi_sq = 0;    // Wald statistic on the block (approximate)
  double p_value = 1;
  std::string significance;
};

struct TermBlock {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  enum Kind { Linear, Smooth, Tensor } kind = Linear;
};

struct DesignInfo;  // prediction-time bases and standardizations

struct GamFit {
  std::vector<Coefficient> coefficients;  // intercept + linear terms
  std::vector<SmoothSummary> smooths;     // univariate smooths + tensor
  std::vector<double> lambdas;            // one per penalty, in design order
  double theta = 0;                       // NB only
  Eigen::VectorXd beta;
  Eigen::VectorXd fitted;     // response scale
  Eigen::VectorXd residuals;  // y - fitted
  Eigen::MatrixXd covariance; // model-based, (X'WX + S)^-1 * scale
  std::vector<TermBlock> blocks;
  double deviance = 0;
  double null_deviance = 0;
  double deviance_explained = 0;  // in [0, 1]
  double r2_adjusted = 0;
  double aic = 0;  // -2 loglik + 2 (edf_total + variance params)
  double gcv = 0;
  double edf_total = 0;
  double scale = 1;
  std::size_t n = 0;
  std::size_t dropped_rows = 0;  // listwise deletion of incomplete rows
  int irls_iterations = 0;
  int theta_iterations = 0;
  double final_deviance_change = 0;
  bool converged = false;
  std::vector<double> penalized_deviance_trace;  // final inner IRLS loop
  std::shared_ptr<const DesignInfo> design;
};

/// Penalized IRLS with GCV smoothing selection over the spec's lambda grid
/// (coordinate descent when there are several penalties; deterministic, ties
/// to the smaller lambda). NB theta is estimated by alternating moment
/// updates with IRLS unless fixed. Throws ComputeError on degenerate weights
/// or a rank-deficient penalized system; non-convergence is flagged, not
/// thrown.
GamFit fit_gam(const GamSpec& spec, const DataTable& data);

struct SummaryTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

/// Table-shaped report: linear coefficients with CIs and significance codes,
/// smooth terms with e.d.f., adjusted R^2, deviance explained, AIC.
SummaryTable summarize_fit(const GamFit& fit);

struct CurvePoint {
  std::string term;
  double x1 = 0;
  double x2 = 0;  // tensor terms only
  double fit = 0;
  double se = 0;
};

/// Partial-effect curves with pointwise standard errors for every smooth
/// term (univariate smooths on a 1-D grid, the tensor term on a 2-D grid).
std::vector<CurvePoint> smooth_curves(const GamFit& fit, int grid_points = 100,
                                      int tensor_grid = 20);

/// Negative binomial log-likelihood (log link), exposed for AIC cross-checks
/// and gradient tests.
double nb_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double theta);
double nb_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double theta);

}  // namespace gam
}  // namespace roadres
