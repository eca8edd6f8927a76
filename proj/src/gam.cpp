#include "roadres/gam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "roadres/errors.hpp"
#include "roadres/stats.hpp"

namespace roadres {
namespace gam {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// basis row in raw (knot-value) coordinates, with linear extrapolation
void raw_row(double xi, const VectorXd& knots, const MatrixXd& curvature, double* out) {
  const Index k = knots.size();
  for (Index j = 0; j < k; ++j) out[j] = 0;
  auto add_f_row = [&](Index row, double w) {
    for (Index j = 0; j < k; ++j) out[j] += w * curvature(row, j);
  };
  if (xi <= knots(0)) {
    double h = knots(1) - knots(0);
    // f(x0) + (x - x0) f'(x0), with f'(x0) = (y1 - y0)/h - h/3 m0 - h/6 m1
    double d = xi - knots(0);
    out[0] += 1.0 - d / h;
    out[1] += d / h;
    add_f_row(0, d * (-h / 3.0));
    add_f_row(1, d * (-h / 6.0));
    return;
  }
  if (xi >= knots(k - 1)) {
    double h = knots(k - 1) - knots(k - 2);
    double d = xi - knots(k - 1);
    out[k - 1] += 1.0 + d / h;
    out[k - 2] += -d / h;
    add_f_row(k - 2, d * (h / 6.0));
    add_f_row(k - 1, d * (h / 3.0));
    return;
  }
  // interval search: knots[j] <= xi < knots[j+1]
  Index lo = 0, hi = k - 1;
  while (hi - lo > 1) {
    Index mid = (lo + hi) / 2;
    if (knots(mid) <= xi)
      lo = mid;
    else
      hi = mid;
  }
  double h = knots(lo + 1) - knots(lo);
  double u = xi - knots(lo);
  double v = knots(lo + 1) - xi;
  out[lo] += v / h;
  out[lo + 1] += u / h;
  add_f_row(lo, (v * v * v / h - h * v) / 6.0);
  add_f_row(lo + 1, (u * u * u / h - h * u) / 6.0);
}

MatrixXd raw_rows(const VectorXd& x, const VectorXd& knots, const MatrixXd& curvature) {
  MatrixXd rows(x.size(), knots.size());
  std::vector<double> buf(static_cast<std::size_t>(knots.size()));
  for (Index i = 0; i < x.size(); ++i) {
    raw_row(x(i), knots, curvature, buf.data());
    for (Index j = 0; j < knots.size(); ++j) rows(i, j) = buf[static_cast<std::size_t>(j)];
  }
  return rows;
}

}  // namespace

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  grid.reserve(25);
  for (int i = 0; i < 25; ++i) grid.push_back(std::pow(10.0, -4.0 + 0.5 * i));
  return grid;
}

CrBasis cr_basis(const VectorXd& x, int k) {
  if (k < 3) throw ComputeError("cr_basis: basis dimension must be >= 3");
  std::vector<double> xs(x.data(), x.data() + x.size());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  const Index m = static_cast<Index>(xs.size());
  if (m < k)
    throw ComputeError("cr_basis: only " + std::to_string(m) + " distinct values; reduce k from " +
                       std::to_string(k));

  CrBasis out;
  out.knots.resize(k);
  for (int j = 0; j < k; ++j) {
    double p = static_cast<double>(j) / (k - 1);
    double h = p * static_cast<double>(m - 1);
    Index i0 = static_cast<Index>(std::floor(h));
    if (i0 >= m - 1) {
      out.knots(j) = xs[static_cast<std::size_t>(m - 1)];
    } else {
      double frac = h - static_cast<double>(i0);
      out.knots(j) = xs[static_cast<std::size_t>(i0)] +
                     frac * (xs[static_cast<std::size_t>(i0 + 1)] - xs[static_cast<std::size_t>(i0)]);
    }
  }

  // tridiagonal system tying knot values to natural-spline curvatures
  VectorXd h(k - 1);
  for (int j = 0; j < k - 1; ++j) h(j) = out.knots(j + 1) - out.knots(j);
  MatrixXd d = MatrixXd::Zero(k - 2, k);
  MatrixXd b = MatrixXd::Zero(k - 2, k - 2);
  for (int i = 0; i < k - 2; ++i) {
    d(i, i) = 1.0 / h(i);
    d(i, i + 1) = -1.0 / h(i) - 1.0 / h(i + 1);
    d(i, i + 2) = 1.0 / h(i + 1);
    b(i, i) = (h(i) + h(i + 1)) / 3.0;
    if (i + 1 < k - 2) {
      b(i, i + 1) = h(i + 1) / 6.0;
      b(i + 1, i) = h(i + 1) / 6.0;
    }
  }
  MatrixXd b_inv_d = b.ldlt().solve(d);  // (k-2) x k
  out.curvature_map = MatrixXd::Zero(k, k);
  out.curvature_map.middleRows(1, k - 2) = b_inv_d;
  MatrixXd penalty_full = d.transpose() * b_inv_d;  // integrated squared second derivative
  penalty_full = 0.5 * (penalty_full + penalty_full.transpose());

  MatrixXd raw = raw_rows(x, out.knots, out.curvature_map);
  // sum-to-zero constraint over the fitting data
  VectorXd c = raw.colwise().sum();
  Eigen::HouseholderQR<MatrixXd> qr(c);
  MatrixXd q = qr.householderQ();
  out.constraint = q.rightCols(k - 1);
  out.basis = raw * out.constraint;
  out.penalty = out.constraint.transpose() * penalty_full * out.constraint;
  out.penalty = 0.5 * (out.penalty + out.penalty.transpose());
  return out;
}

MatrixXd CrBasis::rows_at(const VectorXd& x) const {
  return raw_rows(x, knots, curvature_map) * constraint;
}

TensorBasis tensor_basis(const VectorXd& x1, const VectorXd& x2, int k1, int k2) {
  if (x1.size() != x2.size()) throw ComputeError("tensor_basis: coordinate lengths differ");
  TensorBasis out;
  out.margin_1 = cr_basis(x1, k1);
  out.margin_2 = cr_basis(x2, k2);
  const Index p1 = out.margin_1.basis.cols();
  const Index p2 = out.margin_2.basis.cols();
  out.basis.resize(x1.size(), p1 * p2);
  for (Index p = 0; p < p1; ++p)
    for (Index q = 0; q < p2; ++q)
      out.basis.col(p * p2 + q) =
          out.margin_1.basis.col(p).cwiseProduct(out.margin_2.basis.col(q));
  out.penalty_1 = MatrixXd::Zero(p1 * p2, p1 * p2);
  out.penalty_2 = MatrixXd::Zero(p1 * p2, p1 * p2);
  for (Index p = 0; p < p1; ++p)
    for (Index pp = 0; pp < p1; ++pp)
      for (Index q = 0; q < p2; ++q) {
        out.penalty_1(p * p2 + q, pp * p2 + q) = out.margin_1.penalty(p, pp);
      }
  for (Index q = 0; q < p2; ++q)
    for (Index qq = 0; qq < p2; ++qq)
      for (Index p = 0; p < p1; ++p) {
        out.penalty_2(p * p2 + q, p * p2 + qq) = out.margin_2.penalty(q, qq);
      }
  return out;
}

MatrixXd TensorBasis::rows_at(const VectorXd& x1, const VectorXd& x2) const {
  MatrixXd r1 = margin_1.rows_at(x1);
  MatrixXd r2 = margin_2.rows_at(x2);
  MatrixXd out(x1.size(), r1.cols() * r2.cols());
  for (Index p = 0; p < r1.cols(); ++p)
    for (Index q = 0; q < r2.cols(); ++q)
      out.col(p * r2.cols() + q) = r1.col(p).cwiseProduct(r2.col(q));
  return out;
}

double nb_loglik(const VectorXd& y, const VectorXd& mu, double theta) {
  double ll = 0;
  for (Index i = 0; i < y.size(); ++i) {
    double m = std::max(mu(i), 1e-10);
    ll += std::lgamma(y(i) + theta) - std::lgamma(theta) - std::lgamma(y(i) + 1.0) +
          theta * std::log(theta / (theta + m)) + y(i) * std::log(m / (theta + m));
  }
  return ll;
}

double nb_deviance(const VectorXd& y, const VectorXd& mu, double theta) {
  double dev = 0;
  for (Index i = 0; i < y.size(); ++i) {
    double m = std::max(mu(i), 1e-10);
    double term = -(y(i) + theta) * std::log((y(i) + theta) / (m + theta));
    if (y(i) > 0) term += y(i) * std::log(y(i) / m);
    dev += 2.0 * term;
  }
  return dev;
}

// ---------------------------------------------------------------------------
// design assembly
// ---------------------------------------------------------------------------

struct DesignInfo {
  struct NumericStd {
    std::string var;
    double mean = 0;
    double sd = 0;
  };
  std::vector<NumericStd> standardizations;

  struct SmoothInfo {
    std::string name;
    std::string var;
    CrBasis basis;
    Index offset = 0;
    double lo = 0, hi = 0;
  };
  std::vector<SmoothInfo> smooths;

  struct TensorInfo {
    std::string name;
    std::string var1, var2;
    TensorBasis basis;
    Index offset = 0;
    double lo1 = 0, hi1 = 0, lo2 = 0, hi2 = 0;
  };
  std::optional<TensorInfo> tensor;
};

namespace {

struct PenaltyBlock {
  MatrixXd s;       // block-local
  Index offset = 0;
  Index size = 0;
  std::string term;
};

struct Design {
  MatrixXd x;
  VectorXd y;
  std::vector<TermBlock> blocks;
  std::vector<PenaltyBlock> penalties;
  std::vector<std::string> linear_names;  // per linear column incl. intercept
  std::size_t dropped_rows = 0;
  std::shared_ptr<DesignInfo> info;
};

const VectorXd& numeric_column(const DataTable& data, const std::string& var) {
  auto it = data.numeric.find(var);
  if (it == data.numeric.end()) throw ComputeError("gam: unknown numeric variable '" + var + "'");
  if (static_cast<std::size_t>(it->second.size()) != data.n)
    throw ComputeError("gam: column length mismatch for '" + var + "'");
  return it->second;
}

Design build_design(const GamSpec& spec, const DataTable& data) {
  Design design;
  design.info = std::make_shared<DesignInfo>();
  if (data.n == 0) throw ComputeError("gam: empty data");

  // listwise deletion over the used columns
  std::vector<bool> keep(data.n, true);
  auto mask_numeric = [&](const std::string& var) {
    const VectorXd& col = numeric_column(data, var);
    for (std::size_t i = 0; i < data.n; ++i)
      if (!std::isfinite(col(static_cast<Index>(i)))) keep[i] = false;
  };
  mask_numeric(spec.response);
  for (const auto& var : spec.linear_terms)
    if (!data.categorical.count(var)) mask_numeric(var);
  for (const auto& s : spec.smooth_terms) mask_numeric(s.var);
  if (spec.tensor_term) {
    mask_numeric(spec.tensor_term->var1);
    mask_numeric(spec.tensor_term->var2);
  }
  std::vector<Index> rows;
  for (std::size_t i = 0; i < data.n; ++i)
    if (keep[i]) rows.push_back(static_cast<Index>(i));
  design.dropped_rows = data.n - rows.size();
  const Index n = static_cast<Index>(rows.size());
  if (n < 3) throw ComputeError("gam: fewer than 3 complete rows");

  auto take = [&](const VectorXd& col) {
    VectorXd out(n);
    for (Index i = 0; i < n; ++i) out(i) = col(rows[static_cast<std::size_t>(i)]);
    return out;
  };

  design.y = take(numeric_column(data, spec.response));

  // column count
  std::vector<std::pair<std::string, VectorXd>> linear_cols;
  linear_cols.emplace_back("(Intercept)", VectorXd::Ones(n));
  for (const auto& var : spec.linear_terms) {
    auto cat = data.categorical.find(var);
    if (cat != data.categorical.end()) {
      const CategoricalColumn& col = cat->second;
      if (col.codes.size() != data.n)
        throw ComputeError("gam: column length mismatch for '" + var + "'");
      for (int level = 0; level < static_cast<int>(col.levels.size()); ++level) {
        if (level == col.reference) continue;
        VectorXd dummy(n);
        double occurrences = 0;
        for (Index i = 0; i < n; ++i) {
          int code = col.codes[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
          if (code < 0 || code >= static_cast<int>(col.levels.size()))
            throw ComputeError("gam: bad categorical code in '" + var + "'");
          dummy(i) = code == level ? 1.0 : 0.0;
          occurrences += dummy(i);
        }
        // levels absent from the data would contribute an all-zero column
        if (occurrences == 0) continue;
        linear_cols.emplace_back(var + ":" + col.levels[static_cast<std::size_t>(level)],
                                 std::move(dummy));
      }
    } else {
      VectorXd raw = take(numeric_column(data, var));
      std::vector<double> values(raw.data(), raw.data() + raw.size());
      auto std2 = stats::standardize_2sd(values);
      design.info->standardizations.push_back({var, std2.mean, std2.sd});
      VectorXd scaled(n);
      for (Index i = 0; i < n; ++i) scaled(i) = std2.values[static_cast<std::size_t>(i)];
      linear_cols.emplace_back(var, std::move(scaled));
    }
  }

  std::vector<std::pair<std::string, CrBasis>> smooth_bases;
  std::vector<VectorXd> smooth_x;
  for (const auto& s : spec.smooth_terms) {
    VectorXd raw = take(numeric_column(data, s.var));
    smooth_bases.emplace_back("s(" + s.var + ")", cr_basis(raw, s.k));
    smooth_x.push_back(raw);
  }
  std::optional<TensorBasis> tensor;
  VectorXd tx1, tx2;
  if (spec.tensor_term) {
    tx1 = take(numeric_column(data, spec.tensor_term->var1));
    tx2 = take(numeric_column(data, spec.tensor_term->var2));
    tensor = tensor_basis(tx1, tx2, spec.tensor_term->k1, spec.tensor_term->k2);
  }

  Index p = static_cast<Index>(linear_cols.size());
  for (const auto& [name, basis] : smooth_bases) p += basis.basis.cols();
  if (tensor) p += tensor->basis.cols();

  design.x.resize(n, p);
  Index offset = 0;
  for (auto& [name, col] : linear_cols) {
    design.x.col(offset) = col;
    design.linear_names.push_back(name);
    ++offset;
  }
  design.blocks.push_back({"(linear)", 0, offset, TermBlock::Linear});

  for (std::size_t s = 0; s < smooth_bases.size(); ++s) {
    auto& [name, basis] = smooth_bases[s];
    Index size = basis.basis.cols();
    design.x.middleCols(offset, size) = basis.basis;
    design.blocks.push_back({name, offset, size, TermBlock::Smooth});
    design.penalties.push_back({basis.penalty, offset, size, name});
    design.info->smooths.push_back(
        {name, spec.smooth_terms[s].var, basis, offset, smooth_x[s].minCoeff(), smooth_x[s].maxCoeff()});
    offset += size;
  }
  if (tensor) {
    std::string name = "ti(" + spec.tensor_term->var1 + "," + spec.tensor_term->var2 + ")";
    Index size = tensor->basis.cols();
    design.x.middleCols(offset, size) = tensor->basis;
    design.blocks.push_back({name, offset, size, TermBlock::Tensor});
    design.penalties.push_back({tensor->penalty_1, offset, size, name});
    design.penalties.push_back({tensor->penalty_2, offset, size, name});
    design.info->tensor = DesignInfo::TensorInfo{
        name, spec.tensor_term->var1, spec.tensor_term->var2, *tensor, offset,
        tx1.minCoeff(), tx1.maxCoeff(), tx2.minCoeff(), tx2.maxCoeff()};
  }
  return design;
}

MatrixXd assemble_penalty(const Design& design, const std::vector<double>& lambdas) {
  MatrixXd s = MatrixXd::Zero(design.x.cols(), design.x.cols());
  for (std::size_t i = 0; i < design.penalties.size(); ++i) {
    const PenaltyBlock& block = design.penalties[i];
    s.block(block.offset, block.offset, block.size, block.size) += lambdas[i] * block.s;
  }
  return s;
}

const TermBlock& block_of_column(const Design& design, Index col) {
  for (const auto& b : design.blocks)
    if (col >= b.offset && col < b.offset + b.size) return b;
  return design.blocks.front();
}

Eigen::LDLT<MatrixXd> factorize_checked(const Design& design, const MatrixXd& a) {
  Eigen::LDLT<MatrixXd> ldlt(a);
  VectorXd dvec = ldlt.vectorD();
  double dmax = dvec.cwiseAbs().maxCoeff();
  Index bad = -1;
  for (Index i = 0; i < dvec.size(); ++i)
    if (!(std::fabs(dvec(i)) > dmax * 1e-12)) bad = i;
  if (bad >= 0 || !(dmax > 0)) {
    Index col = bad;
    if (bad >= 0) {
      Eigen::VectorXi idx = Eigen::VectorXi::LinSpaced(static_cast<int>(a.rows()), 0,
                                                       static_cast<int>(a.rows()) - 1);
      idx = ldlt.transpositionsP() * idx;
      col = idx(bad);
    }
    std::string term = col >= 0 ? block_of_column(design, col).name : "(unknown)";
    if (col >= 0 && block_of_column(design, col).kind == TermBlock::Linear &&
        col < static_cast<Index>(design.linear_names.size()))
      term = design.linear_names[static_cast<std::size_t>(col)];
    throw ComputeError("gam: penalized system is rank-deficient near term '" + term +
                       "' (pivot " + std::to_string(col) + ")");
  }
  return ldlt;
}

struct InnerFit {
  VectorXd beta;
  VectorXd mu;
  MatrixXd xtwx;       // weighted cross-product at convergence
  MatrixXd influence;  // (X'WX + S)^-1 X'WX
  Eigen::LDLT<MatrixXd> ldlt;
  double deviance = 0;
  double edf_total = 0;
  double gcv = std::numeric_limits<double>::infinity();
  double theta = 0;
  int iterations = 0;
  int theta_iterations = 0;
  double last_change = 0;
  bool converged = false;
  std::vector<double> pendev_trace;  // of the last inner IRLS loop
};

// MASS-style moment update: solve sum((y-mu)^2 / (mu + mu^2/theta)) = dfr.
double theta_moment(const VectorXd& y, const VectorXd& mu, double dfr, double theta0) {
  double t = std::max(theta0, 1e-3);
  for (int it = 0; it < 30; ++it) {
    t = std::fabs(t);
    double g = -dfr, dg = 0;
    for (Index i = 0; i < y.size(); ++i) {
      double m = std::max(mu(i), 1e-10);
      double denom = m + m * m / t;
      double r2 = (y(i) - m) * (y(i) - m);
      g += r2 / denom;
      dg += r2 * m * m / (t * t * denom * denom);
    }
    if (!(dg > 0)) break;
    double del = g / dg;
    t -= del;
    if (std::fabs(del) < 1e-8 * std::max(1.0, std::fabs(t))) break;
  }
  return std::clamp(t, 1e-3, 1e6);
}

InnerFit pirls(const GamSpec& spec, const Design& design, const std::vector<double>& lambdas,
               const MatrixXd* gaussian_xtx, const VectorXd* gaussian_xty) {
  const Index n = design.y.size();
  MatrixXd s = assemble_penalty(design, lambdas);
  InnerFit fit;

  if (spec.family == Family::GaussianIdentity) {
    fit.xtwx = gaussian_xtx ? *gaussian_xtx : MatrixXd(design.x.transpose() * design.x);
    VectorXd xty = gaussian_xty ? *gaussian_xty : VectorXd(design.x.transpose() * design.y);
    fit.ldlt = factorize_checked(design, fit.xtwx + s);
    fit.beta = fit.ldlt.solve(xty);
    fit.mu = design.x * fit.beta;
    fit.deviance = (design.y - fit.mu).squaredNorm();
    fit.pendev_trace.push_back(fit.deviance + fit.beta.dot(s * fit.beta));
    fit.iterations = 1;
    fit.converged = true;
  } else {
    const VectorXd& y = design.y;
    if ((y.array() < 0).any()) throw ComputeError("gam: negative response under NB family");
    fit.theta = spec.theta_fixed.value_or(1.0);
    VectorXd mu = (y.array() + 0.5).cwiseMax(0.1);
    VectorXd eta = mu.array().log();
    for (int outer = 0; outer < 50; ++outer) {
      ++fit.theta_iterations;
      double prev_pendev = std::numeric_limits<double>::infinity();
      fit.converged = false;
      fit.pendev_trace.clear();
      for (int iter = 0; iter < spec.max_irls_iterations; ++iter) {
        ++fit.iterations;
        VectorXd w(n), z(n);
        for (Index i = 0; i < n; ++i) {
          double m = std::max(mu(i), 1e-10);
          double wi = m * fit.theta / (fit.theta + m);
          if (!std::isfinite(wi) || !(wi > 0)) {
            const TermBlock* worst = nullptr;
            double worst_val = -1;
            if (fit.beta.size() == design.x.cols())
              for (const auto& b : design.blocks)
                for (Index j = b.offset; j < b.offset + b.size; ++j) {
                  double v = std::fabs(design.x(i, j) * fit.beta(j));
                  if (v > worst_val) {
                    worst_val = v;
                    worst = &b;
                  }
                }
            throw ComputeError("gam: degenerate IRLS weight at row " + std::to_string(i) +
                               (worst ? " (dominated by term '" + worst->name + "')" : ""));
          }
          w(i) = wi;
          z(i) = eta(i) + (y(i) - m) / m;
        }
        MatrixXd xw = design.x.transpose() * w.asDiagonal();
        fit.xtwx = xw * design.x;
        fit.ldlt = factorize_checked(design, fit.xtwx + s);
        fit.beta = fit.ldlt.solve(xw * z);
        eta = (design.x * fit.beta).cwiseMax(-300.0).cwiseMin(300.0);
        mu = eta.array().exp();
        fit.deviance = nb_deviance(y, mu, fit.theta);
        double pendev = fit.deviance + fit.beta.dot(s * fit.beta);
        fit.pendev_trace.push_back(pendev);
        fit.last_change = std::fabs(pendev - prev_pendev) / (std::fabs(pendev) + 0.1);
        if (fit.last_change < spec.deviance_tolerance) {
          fit.converged = true;
          break;
        }
        prev_pendev = pendev;
      }
      fit.mu = mu;
      fit.influence = fit.ldlt.solve(fit.xtwx);
      fit.edf_total = fit.influence.trace();
      if (spec.theta_fixed) break;
      double next =
          theta_moment(y, mu, static_cast<double>(n) - fit.edf_total, fit.theta);
      double change = std::fabs(next - fit.theta) / std::max(1.0, std::fabs(fit.theta));
      fit.theta = next;
      if (change < 1e-6) break;  // the current fit is numerically at this theta
    }
    // refresh deviance at the final theta
    fit.deviance = nb_deviance(design.y, fit.mu, fit.theta);
  }

  if (fit.influence.size() == 0) {
    fit.influence = fit.ldlt.solve(fit.xtwx);
    fit.edf_total = fit.influence.trace();
  }
  double denom = static_cast<double>(n) - fit.edf_total;
  fit.gcv = denom > 1e-6 ? static_cast<double>(n) * fit.deviance / (denom * denom)
                         : std::numeric_limits<double>::infinity();
  return fit;
}

}  // namespace

GamFit fit_gam(const GamSpec& spec, const DataTable& data) {
  if (spec.lambda_grid.empty()) throw ComputeError("gam: empty lambda grid");
  for (double g : spec.lambda_grid)
    if (!(g > 0)) throw ComputeError("gam: lambda grid values must be positive");

  Design design = build_design(spec, data);
  const Index n = design.y.size();
  const Index p = design.x.cols();

  // Gaussian weights never change; cache the cross-products across the grid.
  std::optional<MatrixXd> xtx;
  std::optional<VectorXd> xty;
  if (spec.family == Family::GaussianIdentity) {
    xtx = design.x.transpose() * design.x;
    xty = design.x.transpose() * design.y;
  }
  auto run = [&](const std::vector<double>& lambdas) {
    return pirls(spec, design, lambdas, xtx ? &*xtx : nullptr, xty ? &*xty : nullptr);
  };

  std::vector<double> grid = spec.lambda_grid;
  std::sort(grid.begin(), grid.end());
  std::vector<double> lambdas(design.penalties.size(), 1.0);
  if (!design.penalties.empty()) {
    for (int sweep = 0; sweep < 4; ++sweep) {
      bool changed = false;
      for (std::size_t s = 0; s < lambdas.size(); ++s) {
        double best_lambda = lambdas[s];
        double best_gcv = std::numeric_limits<double>::infinity();
        for (double g : grid) {
          std::vector<double> trial = lambdas;
          trial[s] = g;
          double gcv = run(trial).gcv;
          if (gcv < best_gcv) {  // strict: ties keep the smaller lambda
            best_gcv = gcv;
            best_lambda = g;
          }
        }
        if (best_lambda != lambdas[s]) changed = true;
        lambdas[s] = best_lambda;
      }
      if (!changed) break;
    }
  }

  InnerFit inner = run(lambdas);

  GamFit fit;
  fit.lambdas = lambdas;
  fit.theta = inner.theta;
  fit.beta = inner.beta;
  fit.fitted = inner.mu;
  fit.residuals = design.y - inner.mu;
  fit.blocks = design.blocks;
  fit.deviance = inner.deviance;
  fit.edf_total = inner.edf_total;
  fit.gcv = inner.gcv;
  fit.n = static_cast<std::size_t>(n);
  fit.dropped_rows = design.dropped_rows;
  fit.irls_iterations = inner.iterations;
  fit.theta_iterations = inner.theta_iterations;
  fit.final_deviance_change = inner.last_change;
  fit.converged = inner.converged;
  fit.penalized_deviance_trace = inner.pendev_trace;
  fit.design = design.info;

  double rss = fit.residuals.squaredNorm();
  double sst = (design.y.array() - design.y.mean()).matrix().squaredNorm();
  double resid_df = static_cast<double>(n) - fit.edf_total;

  double loglik;
  if (spec.family == Family::GaussianIdentity) {
    fit.scale = resid_df > 0 ? rss / resid_df : std::numeric_limits<double>::quiet_NaN();
    fit.null_deviance = sst;
    double sigma2 = rss / static_cast<double>(n);
    loglik = -0.5 * static_cast<double>(n) *
             (std::log(2.0 * 3.14159265358979323846 * sigma2) + 1.0);
  } else {
    fit.scale = 1.0;
    VectorXd mu0 = VectorXd::Constant(n, design.y.mean());
    fit.null_deviance = nb_deviance(design.y, mu0, fit.theta);
    loglik = nb_loglik(design.y, fit.fitted, fit.theta);
  }
  fit.aic = -2.0 * loglik + 2.0 * (fit.edf_total + 1.0);
  fit.deviance_explained =
      fit.null_deviance > 0
          ? std::clamp((fit.null_deviance - fit.deviance) / fit.null_deviance, 0.0, 1.0)
          : 0.0;
  double r2 = sst > 0 ? 1.0 - rss / sst : 0.0;
  fit.r2_adjusted =
      resid_df > 0 ? 1.0 - (static_cast<double>(n) - 1.0) / resid_df * (1.0 - r2) : r2;

  fit.covariance = inner.ldlt.solve(MatrixXd::Identity(p, p)) * fit.scale;

  const bool use_t = spec.family == Family::GaussianIdentity && resid_df > 0;
  const double crit =
      use_t ? stats::student_t_quantile(0.975, resid_df) : stats::normal_quantile(0.975);
  Index n_linear = design.blocks.front().size;
  for (Index j = 0; j < n_linear; ++j) {
    Coefficient c;
    c.name = design.linear_names[static_cast<std::size_t>(j)];
    c.estimate = fit.beta(j);
    c.se = std::sqrt(std::max(0.0, fit.covariance(j, j)));
    c.ci_lo = c.estimate - crit * c.se;
    c.ci_hi = c.estimate + crit * c.se;
    if (c.se > 0) {
      double stat = std::fabs(c.estimate / c.se);
      c.p_value = use_t ? 2.0 * (1.0 - stats::student_t_cdf(stat, resid_df))
                        : std::erfc(stat / std::sqrt(2.0));
    } else {
      c.p_value = 1.0;
    }
    c.significance = stats::significance_code(c.p_value);
    fit.coefficients.push_back(std::move(c));
  }

  for (const auto& block : design.blocks) {
    if (block.kind == TermBlock::Linear) continue;
    SmoothSummary s;
    s.name = block.name;
    s.edf = inner.influence.block(block.offset, block.offset, block.size, block.size).trace();
    VectorXd beta_block = fit.beta.segment(block.offset, block.size);
    MatrixXd cov_block = fit.covariance.block(block.offset, block.offset, block.size, block.size);
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(cov_block);
    s.chi_sq = beta_block.dot(cod.pseudoInverse() * beta_block);
    s.p_value = stats::chi_squared_sf(s.chi_sq, std::max(s.edf, 0.01));
    s.significance = stats::significance_code(s.p_value);
    fit.smooths.push_back(std::move(s));
  }
  return fit;
}

SummaryTable summarize_fit(const GamFit& fit) {
  SummaryTable table;
  table.columns = {"section", "term", "estimate", "ci_lo", "ci_hi", "edf", "p_value",
                   "significance"};
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  for (const auto& c : fit.coefficients)
    table.rows.push_back({"linear", c.name, num(c.estimate), num(c.ci_lo), num(c.ci_hi), "",
                          num(c.p_value), c.significance});
  for (const auto& s : fit.smooths)
    table.rows.push_back({"smooth", s.name, "", "", "", num(s.edf), num(s.p_value),
                          s.significance});
  table.rows.push_back({"fit", "r2_adjusted", num(fit.r2_adjusted), "", "", "", "", ""});
  table.rows.push_back(
      {"fit", "deviance_explained", num(fit.deviance_explained), "", "", "", "", ""});
  table.rows.push_back({"fit", "aic", num(fit.aic), "", "", "", "", ""});
  table.rows.push_back({"fit", "edf_total", num(fit.edf_total), "", "", "", "", ""});
  table.rows.push_back({"fit", "n", std::to_string(fit.n), "", "", "", "", ""});
  table.rows.push_back({"fit", "dropped_rows", std::to_string(fit.dropped_rows), "", "", "", "", ""});
  if (fit.theta > 0) table.rows.push_back({"fit", "theta", num(fit.theta), "", "", "", "", ""});
  table.rows.push_back({"fit", "converged", fit.converged ? "true" : "false", "", "", "", "", ""});
  return table;
}

std::vector<CurvePoint> smooth_curves(const GamFit& fit, int grid_points, int tensor_grid) {
  std::vector<CurvePoint> points;
  if (!fit.design) return points;
  const DesignInfo& info = *fit.design;

  auto emit = [&](const std::string& term, const MatrixXd& rows, Index offset,
                  const VectorXd& x1, const VectorXd* x2) {
    VectorXd beta = fit.beta.segment(offset, rows.cols());
    MatrixXd cov = fit.covariance.block(offset, offset, rows.cols(), rows.cols());
    VectorXd effect = rows * beta;
    for (Index i = 0; i < rows.rows(); ++i) {
      double var = rows.row(i) * cov * rows.row(i).transpose();
      CurvePoint p;
      p.term = term;
      p.x1 = x1(i);
      p.x2 = x2 ? (*x2)(i) : 0.0;
      p.fit = effect(i);
      p.se = std::sqrt(std::max(0.0, var));
      points.push_back(p);
    }
  };

  for (const auto& s : info.smooths) {
    VectorXd grid = VectorXd::LinSpaced(grid_points, s.lo, s.hi);
    emit(s.name, s.basis.rows_at(grid), s.offset, grid, nullptr);
  }
  if (info.tensor) {
    const auto& t = *info.tensor;
    VectorXd g1 = VectorXd::LinSpaced(tensor_grid, t.lo1, t.hi1);
    VectorXd g2 = VectorXd::LinSpaced(tensor_grid, t.lo2, t.hi2);
    VectorXd x1(tensor_grid * tensor_grid), x2(tensor_grid * tensor_grid);
    for (int i = 0; i < tensor_grid; ++i)
      for (int j = 0; j < tensor_grid; ++j) {
        x1(i * tensor_grid + j) = g1(i);
        x2(i * tensor_grid + j) = g2(j);
      }
    emit(t.name, t.basis.rows_at(x1, x2), t.offset, x1, &x2);
  }
  return points;
}

}  // namespace gam
}  // namespace roadres
