#include "qpp/lme.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>

#include "qpp/stats.hpp"

namespace qpp::lme {

namespace {

constexpr double kSigma2Floor = 1e-10;
constexpr double kWaldThreshold = 1.96;

struct QueryBlock {
  Eigen::MatrixXd x;  // fixed-effect design
  Eigen::MatrixXd z;  // random-effect design
  Eigen::VectorXd y;
};

struct Problem {
  std::vector<QueryBlock> blocks;
  std::size_t n_rows = 0;
  std::size_t p = 0;  // fixed effects
  std::size_t q = 0;  // random effects per query (1 or 2)
  std::vector<std::string> coef_names;
};

Problem assemble(const LmeDesign& design, const LmeSpec& spec) {
  Problem prob;
  prob.coef_names.push_back("(Intercept)");
  if (spec.has_slope()) prob.coef_names.push_back("QPP Predictor");
  if (spec.model == LmeModel::full && spec.type_intercept)
    for (const auto& level : design.type_levels) prob.coef_names.push_back("Type[" + level + "]");
  if (spec.model == LmeModel::full && spec.type_slope)
    for (const auto& level : design.type_levels)
      prob.coef_names.push_back("Type[" + level + "]:QPP Predictor");
  prob.p = prob.coef_names.size();
  prob.q = spec.has_slope() ? 2 : 1;

  // Rows grouped by query id; design rows are already sorted (qid, covariate).
  std::map<std::string, std::vector<const LmeRow*>> groups;
  for (const auto& row : design.rows) groups[row.query_id].push_back(&row);

  for (const auto& [qid, rows] : groups) {
    QueryBlock block;
    auto n = static_cast<Eigen::Index>(rows.size());
    block.x.setZero(n, static_cast<Eigen::Index>(prob.p));
    block.z.setZero(n, static_cast<Eigen::Index>(prob.q));
    block.y.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const LmeRow& row = *rows[static_cast<std::size_t>(r)];
      block.y(r) = row.sare;
      Eigen::Index c = 0;
      block.x(r, c++) = 1.0;
      if (spec.has_slope()) block.x(r, c++) = row.covariate;
      if (spec.model == LmeModel::full && spec.type_intercept)
        for (const auto& level : design.type_levels)
          block.x(r, c++) = row.query_type == level ? 1.0 : 0.0;
      if (spec.model == LmeModel::full && spec.type_slope)
        for (const auto& level : design.type_levels)
          block.x(r, c++) = row.query_type == level ? row.covariate : 0.0;
      block.z(r, 0) = 1.0;
      if (prob.q == 2) block.z(r, 1) = row.covariate;
    }
    prob.n_rows += rows.size();
    prob.blocks.push_back(std::move(block));
  }
  return prob;
}

Eigen::MatrixXd lambda_factor(std::size_t q, std::span<const double> theta) {
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q),
                                                 static_cast<Eigen::Index>(q));
  if (q == 1) {
    lambda(0, 0) = theta[0];
  } else {
    lambda(0, 0) = theta[0];
    lambda(1, 0) = theta[1];
    lambda(1, 1) = theta[2];
  }
  return lambda;
}

struct Evaluation {
  double loglik = 0.0;
  double deviance = 0.0;
  double sigma2 = 0.0;
  bool floored = false;
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov_beta;
};

// Gaussian marginal likelihood with the fixed effects profiled out by GLS and
// the residual variance concentrated out analytically. The random-effects
// covariance is sigma2 * Lambda Lambda', so V = sigma2 * (Z Lambda Lambda' Z' + I).
Evaluation evaluate(const Problem& prob, std::span<const double> theta) {
  auto p = static_cast<Eigen::Index>(prob.p);
  Eigen::MatrixXd lambda = lambda_factor(prob.q, theta);
  Eigen::MatrixXd xtvx = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xtvy = Eigen::VectorXd::Zero(p);
  double ytvy = 0.0;
  double logdet = 0.0;
  // Per-block solves are cached for the residual pass via the accumulators:
  // rss = y'V0^-1 y - 2 b'beta + beta'A beta.
  for (const auto& block : prob.blocks) {
    Eigen::MatrixXd m = block.z * lambda;
    Eigen::MatrixXd v0 = m * m.transpose();
    v0.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(v0);
    logdet += 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    Eigen::MatrixXd vix = llt.solve(block.x);
    Eigen::VectorXd viy = llt.solve(block.y);
    xtvx += block.x.transpose() * vix;
    xtvy += block.x.transpose() * viy;
    ytvy += block.y.dot(viy);
  }
  Evaluation eval;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtvx);
  eval.beta = ldlt.solve(xtvy);
  double rss = ytvy - 2.0 * eval.beta.dot(xtvy) + eval.beta.dot(xtvx * eval.beta);
  double n = static_cast<double>(prob.n_rows);
  double sigma2 = rss / n;
  if (sigma2 < kSigma2Floor) {
    sigma2 = kSigma2Floor;
    eval.floored = true;
  }
  eval.sigma2 = sigma2;
  eval.loglik = -0.5 * (n * std::log(2.0 * std::numbers::pi * sigma2) + logdet + rss / sigma2);
  eval.deviance = -2.0 * eval.loglik;
  eval.cov_beta = sigma2 * ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  return eval;
}

// Downhill simplex on the profiled deviance.
std::vector<double> nelder_mead(const std::function<double(std::span<const double>)>& f,
                                std::vector<double> start, std::size_t max_iter = 4000) {
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;
  std::size_t d = start.size();
  std::vector<std::vector<double>> simplex;
  simplex.push_back(start);
  for (std::size_t i = 0; i < d; ++i) {
    auto v = start;
    v[i] += 0.1 + 0.25 * std::fabs(v[i]);
    simplex.push_back(v);
  }
  std::vector<double> values(simplex.size());
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = f(simplex[i]);

  auto centroid = [&](std::size_t exclude) {
    std::vector<double> c(d, 0.0);
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i == exclude) continue;
      for (std::size_t k = 0; k < d; ++k) c[k] += simplex[i][k];
    }
    for (double& x : c) x /= static_cast<double>(d);
    return c;
  };
  auto blend = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
    std::vector<double> out(d);
    for (std::size_t k = 0; k < d; ++k) out[k] = a[k] + t * (b[k] - a[k]);
    return out;
  };

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    std::vector<std::size_t> order(simplex.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    if (std::fabs(values[worst] - values[best]) <
        1e-13 * (1.0 + std::fabs(values[best])))
      break;

    auto c = centroid(worst);
    auto reflected = blend(c, simplex[worst], -alpha);
    double fr = f(reflected);
    if (fr < values[best]) {
      auto expanded = blend(c, simplex[worst], -gamma);
      double fe = f(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
    } else if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
    } else {
      auto contracted = blend(c, simplex[worst], rho);
      double fc = f(contracted);
      if (fc < values[worst]) {
        simplex[worst] = contracted;
        values[worst] = fc;
      } else {
        for (std::size_t i = 0; i < simplex.size(); ++i) {
          if (i == best) continue;
          simplex[i] = blend(simplex[best], simplex[i], shrink);
          values[i] = f(simplex[i]);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[best]) best = i;
  return simplex[best];
}

void check_full_design(const LmeDesign& design, const LmeSpec& spec) {
  if (spec.model != LmeModel::full || (!spec.type_intercept && !spec.type_slope)) return;
  std::map<std::string, std::set<std::string>> queries_per_type;
  for (const auto& row : design.rows) queries_per_type[row.query_type].insert(row.query_id);
  if (queries_per_type.size() < 2)
    throw DataError("full model requires >= 2 query types present");
  for (const auto& [type, queries] : queries_per_type)
    if (queries.size() < 2)
      throw DataError("query type '" + type + "' has a single query; full model design singular");
}

}  // namespace

std::size_t LmeDesign::num_queries() const {
  std::set<std::string> qids;
  for (const auto& row : rows) qids.insert(row.query_id);
  return qids.size();
}

std::string LmeSpec::name() const {
  switch (model) {
    case LmeModel::average:
      return "LME_average";
    case LmeModel::qpp:
      return "LME_QPP";
    case LmeModel::full:
      if (type_intercept && type_slope) return "LME_full";
      return type_intercept ? "LME_full(type-main)" : "LME_full(type-slope)";
  }
  return "?";
}

double LmeFit::wald_z(std::size_t coef) const {
  return se[coef] > 0.0 ? gamma[coef] / se[coef] : 0.0;
}

LmeDesign build_design(const SareTable& sare, const QueryTypeMap& types,
                       const std::vector<std::string>& predictor_order) {
  if (predictor_order.empty()) throw ConfigError("predictor order must be non-empty");
  std::vector<std::size_t> columns;
  for (const auto& name : predictor_order) columns.push_back(sare.column_index(name));

  std::vector<std::string> untyped;
  for (const auto& [qid, _] : sare.rows())
    if (!types.contains(qid)) untyped.push_back(qid);
  if (!untyped.empty()) {
    std::string msg = "queries without a type label:";
    for (const auto& q : untyped) msg += " " + q;
    throw DataError(msg);
  }

  LmeDesign design;
  design.predictor_order = predictor_order;
  std::map<std::string, std::size_t> type_counts;
  for (const auto& [qid, values] : sare.rows()) {
    const std::string& type = types.label(qid);
    ++type_counts[type];
    for (std::size_t j = 0; j < columns.size(); ++j) {
      double v = values[columns[j]];
      if (is_missing(v))
        throw DataError("missing sARE cell for query '" + qid + "', predictor '" +
                        predictor_order[j] + "'");
      design.rows.push_back({qid, static_cast<double>(j), type, v});
    }
  }

  // Reference category = most frequent type, ties broken alphabetically
  // (the map iterates alphabetically, so the first max wins).
  std::size_t best = 0;
  for (const auto& [type, count] : type_counts) {
    if (count > best) {
      best = count;
      design.reference_type = type;
    }
  }
  for (const auto& [type, _] : type_counts)
    if (type != design.reference_type) design.type_levels.push_back(type);
  return design;
}

double profiled_deviance(const LmeDesign& design, const LmeSpec& spec,
                         std::span<const double> theta) {
  Problem prob = assemble(design, spec);
  return evaluate(prob, theta).deviance;
}

LmeFit fit(const LmeDesign& design, const LmeSpec& spec,
           const std::vector<std::vector<double>>& extra_starts) {
  if (design.rows.empty()) throw DataError("empty design");
  if (design.num_queries() < 2) throw DataError("lme fit requires >= 2 queries");
  if (spec.has_slope()) {
    std::set<double> covariates;
    for (const auto& row : design.rows) covariates.insert(row.covariate);
    if (covariates.size() < 2)
      throw DataError("slope models require >= 2 predictors in the design");
  }
  check_full_design(design, spec);

  Problem prob = assemble(design, spec);
  std::size_t d = prob.q == 1 ? 1 : 3;

  // Moment-based start: between-query variance of mean OLS residuals
  // relative to the residual variance.
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(prob.p),
                                              static_cast<Eigen::Index>(prob.p));
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(prob.p));
  for (const auto& block : prob.blocks) {
    xtx += block.x.transpose() * block.x;
    xty += block.x.transpose() * block.y;
  }
  Eigen::VectorXd beta_ols = xtx.ldlt().solve(xty);
  double ss_total = 0.0, ss_between = 0.0;
  for (const auto& block : prob.blocks) {
    Eigen::VectorXd r = block.y - block.x * beta_ols;
    ss_total += r.squaredNorm();
    double m = r.mean();
    ss_between += m * m * static_cast<double>(r.size());
  }
  double s2 = std::max(ss_total / static_cast<double>(prob.n_rows), 1e-12);
  double between = std::max(ss_between / static_cast<double>(prob.n_rows), 0.0);
  double within = std::max(s2 - between, 0.1 * s2);
  double lam = std::sqrt(std::max(between, 1e-8) / within);

  std::vector<std::vector<double>> starts;
  auto make_start = [&](double l11, double l22) {
    return d == 1 ? std::vector<double>{l11} : std::vector<double>{l11, 0.0, l22};
  };
  starts.push_back(make_start(lam, 0.25 * lam + 0.01));       // moment-based
  starts.push_back(make_start(2.0 * lam, 0.5 * lam + 0.02));  // inflated
  starts.push_back(make_start(0.25 * lam, 0.05 * lam));       // deflated
  starts.push_back(make_start(1.0, 0.5));                     // diagonal
  starts.push_back(make_start(1e-3, 1e-3));                   // near-zero
  for (auto s : extra_starts) {
    s.resize(d, 0.0);  // nested-model optima pad with zeros (identical V)
    starts.push_back(std::move(s));
  }

  auto objective = [&](std::span<const double> theta) { return evaluate(prob, theta).deviance; };

  std::vector<double> best_theta;
  double best_dev = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    auto theta = nelder_mead(objective, start);
    double dev = objective(theta);
    if (dev < best_dev) {
      best_dev = dev;
      best_theta = theta;
    }
  }
  // Polish: restart the simplex at the incumbent until it stops improving.
  for (int round = 0; round < 3; ++round) {
    auto theta = nelder_mead(objective, best_theta);
    double dev = objective(theta);
    if (dev < best_dev - 1e-12) {
      best_dev = dev;
      best_theta = theta;
    } else {
      break;
    }
  }

  Evaluation eval = evaluate(prob, best_theta);
  LmeFit result;
  result.spec = spec;
  result.coef_names = prob.coef_names;
  result.theta = best_theta;
  result.gamma.assign(eval.beta.data(), eval.beta.data() + eval.beta.size());
  result.se.resize(prob.p);
  for (std::size_t i = 0; i < prob.p; ++i)
    result.se[i] = std::sqrt(std::max(eval.cov_beta(static_cast<Eigen::Index>(i),
                                                    static_cast<Eigen::Index>(i)),
                                      0.0));
  result.sigma2_eps = eval.sigma2;
  result.sigma2_0 = eval.sigma2 * best_theta[0] * best_theta[0];
  if (prob.q == 2) {
    result.sigma_01 = eval.sigma2 * best_theta[0] * best_theta[1];
    result.sigma2_1 = eval.sigma2 * (best_theta[1] * best_theta[1] + best_theta[2] * best_theta[2]);
  }
  result.loglik = eval.loglik;
  result.deviance = eval.deviance;

  // Convergence: central-difference gradient of the profiled log-likelihood,
  // relative to its magnitude.
  double max_grad = 0.0;
  for (std::size_t i = 0; i < best_theta.size(); ++i) {
    double h = 1e-5 * (1.0 + std::fabs(best_theta[i]));
    auto hi = best_theta, lo = best_theta;
    hi[i] += h;
    lo[i] -= h;
    double g = (objective(hi) - objective(lo)) / (2.0 * h) / -2.0;  // d loglik / d theta
    max_grad = std::max(max_grad, std::fabs(g));
  }
  result.grad_max_rel = max_grad / std::max(1.0, std::fabs(result.loglik));
  result.converged = result.grad_max_rel < 1e-5 && !eval.floored;
  return result;
}

VarianceDecomposition pseudo_r2(const LmeFit& fit_average, const LmeFit& fit_qpp,
                                const LmeFit& fit_full) {
  VarianceDecomposition out;
  if (fit_average.sigma2_eps > 1e-12)
    out.pseudo_r2_eps = (fit_average.sigma2_eps - fit_qpp.sigma2_eps) / fit_average.sigma2_eps;
  if (fit_qpp.sigma2_0 > 1e-12)
    out.pseudo_r2_0 = (fit_qpp.sigma2_0 - fit_full.sigma2_0) / fit_qpp.sigma2_0;
  if (fit_qpp.sigma2_1 > 1e-12)
    out.pseudo_r2_1 = (fit_qpp.sigma2_1 - fit_full.sigma2_1) / fit_qpp.sigma2_1;
  return out;
}

SelectionReport select_model(const LmeDesign& design, double alpha) {
  SelectionReport report;
  report.fit_average = fit(design, LmeSpec::average());
  report.fit_qpp = fit(design, LmeSpec::qpp(), {report.fit_average.theta});
  report.chosen = report.fit_average;

  // Step 1: average -> qpp. Adds gamma_10 plus the slope variance and the
  // intercept/slope covariance.
  SelectionCandidate qpp_step;
  qpp_step.name = report.fit_qpp.spec.name();
  qpp_step.deviance = report.fit_qpp.deviance;
  qpp_step.lrt_stat = report.fit_average.deviance - report.fit_qpp.deviance;
  qpp_step.lrt_df = 3;
  qpp_step.lrt_p = stats::chi2_sf(qpp_step.lrt_stat, static_cast<double>(qpp_step.lrt_df));
  qpp_step.max_new_wald_z = std::fabs(report.fit_qpp.wald_z(1));
  qpp_step.accepted = qpp_step.lrt_p < alpha && qpp_step.max_new_wald_z > kWaldThreshold;
  report.candidates.push_back(qpp_step);

  bool qpp_accepted = qpp_step.accepted;
  if (qpp_accepted) report.chosen = report.fit_qpp;

  // The canonical full model (used for the variance decomposition even when
  // the selection stops earlier).
  std::optional<LmeFit> full_interaction;
  try {
    full_interaction = fit(design, LmeSpec::full(true, true), {report.fit_qpp.theta});
    report.fit_full = full_interaction;
  } catch (const DataError&) {
    // Type structure too thin for the full model; selection stops at qpp.
  }

  // Step 2: current model -> full, trying the type-main-effect variant and
  // the interaction variant; the better accepted one is kept. The comparison
  // baseline is whatever the chain currently holds (qpp if accepted, else
  // average), so a type effect can still be detected when the mean slope is
  // washed out across types.
  const LmeFit baseline = report.chosen;
  // Parameters: fixed effects plus variance components (2 for intercept-only
  // models, 4 for slope models).
  auto param_count = [](const LmeFit& f) {
    return f.gamma.size() + (f.spec.has_slope() ? 4u : 2u);
  };
  std::size_t new_fixed_from = baseline.gamma.size();
  std::vector<LmeSpec> variants = {LmeSpec::full(true, false), LmeSpec::full(true, true)};
  double best_full_deviance = 0.0;
  bool have_full = false;
  for (const auto& variant : variants) {
    SelectionCandidate cand;
    cand.name = variant.name();
    try {
      LmeFit f = variant.type_slope && full_interaction
                     ? *full_interaction
                     : fit(design, variant, {report.fit_qpp.theta});
      cand.deviance = f.deviance;
      cand.lrt_stat = baseline.deviance - f.deviance;
      cand.lrt_df = param_count(f) - param_count(baseline);
      cand.lrt_p = stats::chi2_sf(cand.lrt_stat, static_cast<double>(cand.lrt_df));
      double max_z = 0.0;
      for (std::size_t i = new_fixed_from; i < f.coef_names.size(); ++i)
        max_z = std::max(max_z, std::fabs(f.wald_z(i)));
      cand.max_new_wald_z = max_z;
      cand.accepted = cand.lrt_p < alpha && max_z > kWaldThreshold;
      if (cand.accepted && (!have_full || f.deviance < best_full_deviance)) {
        report.chosen = f;
        best_full_deviance = f.deviance;
        have_full = true;
      }
    } catch (const DataError& e) {
      cand.feasible = false;
      cand.note = e.what();
    }
    report.candidates.push_back(cand);
  }

  if (full_interaction)
    report.decomposition = pseudo_r2(report.fit_average, report.fit_qpp, *full_interaction);
  return report;
}

}  // namespace qpp::lme
