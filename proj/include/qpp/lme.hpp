#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qpp/core.hpp"

namespace qpp::lme {

struct LmeRow {
  std::string query_id;
  double covariate;  // predictor index 0..J-1 in the supplied order
  std::string query_type;
  double sare;
};

/// Long-format design: one row per (query, predictor).
struct LmeDesign {
  std::vector<LmeRow> rows;
  std::vector<std::string> predictor_order;
  std::string reference_type;
  std::vector<std::string> type_levels;  // non-reference types present, sorted

  std::size_t num_queries() const;
};

LmeDesign build_design(const SareTable& sare, const QueryTypeMap& types,
                       const std::vector<std::string>& predictor_order);

enum class LmeModel { average, qpp, full };

struct LmeSpec {
  LmeModel model = LmeModel::average;
  // Only meaningful for the full model: which query-type terms enter the
  // fixed effects.
  bool type_intercept = false;
  bool type_slope = false;

  static LmeSpec average() { return {LmeModel::average, false, false}; }
  static LmeSpec qpp() { return {LmeModel::qpp, false, false}; }
  static LmeSpec full(bool intercept = true, bool slope = true) {
    return {LmeModel::full, intercept, slope};
  }

  bool has_slope() const { return model != LmeModel::average; }
  std::string name() const;
};

struct LmeFit {
  LmeSpec spec;
  std::vector<std::string> coef_names;
  std::vector<double> gamma;  // fixed-effect estimates
  std::vector<double> se;     // GLS standard errors
  std::vector<double> theta;  // relative Cholesky factor at the optimum
  double sigma2_0 = 0.0;      // random-intercept variance
  double sigma_01 = 0.0;      // intercept/slope covariance (slope models)
  double sigma2_1 = 0.0;      // random-slope variance (slope models)
  double sigma2_eps = 0.0;    // residual variance
  double loglik = 0.0;
  double deviance = 0.0;      // -2 * loglik
  bool converged = false;
  double grad_max_rel = 0.0;  // max |d loglik / d theta| / max(1, |loglik|)

  double wald_z(std::size_t coef) const;
};

/// Profiled deviance at a given variance parameterization: fixed effects and
/// the residual variance are concentrated out analytically. theta has one
/// component (intercept models) or three (lower-triangular factor of the
/// relative random-effects covariance, slope models).
double profiled_deviance(const LmeDesign& design, const LmeSpec& spec,
                         std::span<const double> theta);

/// Full-ML fit via multi-start Nelder-Mead on the profiled deviance.
/// extra_starts are tried in addition to the built-in deterministic starts
/// (used to seed a larger model from a nested one's optimum).
LmeFit fit(const LmeDesign& design, const LmeSpec& spec,
           const std::vector<std::vector<double>>& extra_starts = {});

struct VarianceDecomposition {
  std::optional<double> pseudo_r2_eps;
  std::optional<double> pseudo_r2_0;
  std::optional<double> pseudo_r2_1;
};

/// Proportional reduction in variance components across the nested chain.
/// A component is empty when its denominator is below 1e-12.
VarianceDecomposition pseudo_r2(const LmeFit& fit_average, const LmeFit& fit_qpp,
                                const LmeFit& fit_full);

struct SelectionCandidate {
  std::string name;
  bool feasible = true;
  std::string note;
  double deviance = 0.0;
  double lrt_stat = 0.0;   // deviance drop vs the current model
  std::size_t lrt_df = 0;  // parameters added vs the current model
  double lrt_p = 1.0;
  double max_new_wald_z = 0.0;  // largest |z| among newly added fixed effects
  bool accepted = false;
};

struct SelectionReport {
  LmeFit fit_average;
  LmeFit fit_qpp;
  std::optional<LmeFit> fit_full;  // best full candidate that could be fitted
  std::vector<SelectionCandidate> candidates;
  LmeFit chosen;
  VarianceDecomposition decomposition;
};

/// Fits average -> qpp -> full in sequence. A step is accepted when the
/// likelihood-ratio drop beats the chi-square critical value at alpha = 0.05
/// and at least one newly added fixed effect has |z| > 1.96. The full step
/// tries a type-main-effect variant and a type-interaction variant and keeps
/// the better accepted one.
SelectionReport select_model(const LmeDesign& design, double alpha = 0.05);

}  // namespace qpp::lme
