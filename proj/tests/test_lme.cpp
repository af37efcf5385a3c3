#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qpp/lme.hpp"

using namespace qpp;
using namespace qpp::lme;

namespace {

const std::vector<std::string> kTypeCycle = {"Evidence-based", "Factoid", "Experience",
                                             "Instruction",    "Reason",  "Not a Question"};

struct SimParams {
  std::size_t n = 40;
  std::size_t j = 6;
  double gamma00 = 0.30;
  double gamma10 = 0.0;
  double sigma0 = 0.05;
  double sigma1 = 0.0;
  double sigma_eps = 0.02;
  double type_slope_effect = 0.0;  // added to gamma10 for "Experience" queries
};

LmeDesign simulate(const SimParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::string> predictors;
  for (std::size_t k = 0; k < p.j; ++k) predictors.push_back("P" + std::to_string(k));
  SareTable sare(predictors);
  QueryTypeMap types;
  for (std::size_t i = 0; i < p.n; ++i) {
    char qid[8];
    std::snprintf(qid, sizeof(qid), "q%03zu", i);
    const std::string& type = kTypeCycle[i % kTypeCycle.size()];
    types.assign(qid, type);
    double b0 = p.sigma0 * gauss(rng);
    double b1 = p.sigma1 * gauss(rng);
    for (std::size_t k = 0; k < p.j; ++k) {
      double slope = p.gamma10 + (type == "Experience" ? p.type_slope_effect : 0.0);
      double v = p.gamma00 + slope * static_cast<double>(k) + b0 +
                 b1 * static_cast<double>(k) + p.sigma_eps * gauss(rng);
      sare.set_cell(qid, predictors[k], v);
    }
  }
  return build_design(sare, types, predictors);
}

}  // namespace

TEST_CASE("build_design: long format, reference type, permuted order") {
  SareTable sare({"A", "B", "C"});
  QueryTypeMap types;
  for (const auto& qid : {"q1", "q2"}) {
    types.assign(qid, "Factoid");
    sare.set_cell(qid, "A", 0.1);
    sare.set_cell(qid, "B", 0.2);
    sare.set_cell(qid, "C", 0.3);
  }
  auto design = build_design(sare, types, {"A", "B", "C"});
  CHECK(design.rows.size() == 6);
  CHECK(design.num_queries() == 2);
  CHECK(design.reference_type == "Factoid");

  auto permuted = build_design(sare, types, {"C", "A", "B"});
  for (const auto& row : permuted.rows) {
    double expected = row.covariate == 0.0 ? 0.3 : (row.covariate == 1.0 ? 0.1 : 0.2);
    CHECK(row.sare == expected);
  }
}

TEST_CASE("build_design rejects a query without a type, naming it") {
  SareTable sare({"A", "B"});
  QueryTypeMap types;
  types.assign("q1", "Factoid");
  for (const auto& qid : {"q1", "q7"}) {
    sare.set_cell(qid, "A", 0.1);
    sare.set_cell(qid, "B", 0.2);
  }
  try {
    build_design(sare, types, {"A", "B"});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("q7") != std::string::npos);
  }
}

TEST_CASE("constant sARE: intercept = c, residual variance at the floor") {
  SareTable sare({"A", "B", "C"});
  QueryTypeMap types;
  for (int i = 0; i < 6; ++i) {
    std::string qid = "q" + std::to_string(i);
    types.assign(qid, kTypeCycle[i % 3]);
    for (const auto& name : {"A", "B", "C"}) sare.set_cell(qid, name, 0.42);
  }
  auto design = build_design(sare, types, {"A", "B", "C"});
  auto fit_avg = fit(design, LmeSpec::average());
  CHECK(fit_avg.gamma[0] == doctest::Approx(0.42).epsilon(1e-8));
  CHECK(fit_avg.sigma2_eps <= 1e-9);
  CHECK_FALSE(fit_avg.converged);  // floored variance is flagged

  auto fit_slope = fit(design, LmeSpec::qpp());
  CHECK(std::fabs(fit_slope.gamma[1]) < 1e-8);
}

TEST_CASE("profiled deviance at theta = 0 equals the OLS deviance") {
  auto design = simulate({.n = 12, .j = 4, .gamma10 = -0.01, .sigma1 = 0.004}, 11);

  // OLS oracle for y = a + b * covariate computed from the closed form.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double n = static_cast<double>(design.rows.size());
  for (const auto& r : design.rows) {
    sx += r.covariate;
    sy += r.sare;
    sxx += r.covariate * r.covariate;
    sxy += r.covariate * r.sare;
  }
  double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  double a = (sy - b * sx) / n;
  double rss = 0;
  for (const auto& r : design.rows) {
    double res = r.sare - a - b * r.covariate;
    rss += res * res;
  }
  double sigma2 = rss / n;
  double ols_deviance = n * std::log(2.0 * std::acos(-1.0) * sigma2) + n;

  double theta0[3] = {0.0, 0.0, 0.0};
  CHECK(profiled_deviance(design, LmeSpec::qpp(), theta0) ==
        doctest::Approx(ols_deviance).epsilon(1e-8));
}

TEST_CASE("optimum beats a brute-force grid over the variance parameters") {
  auto design = simulate({.n = 30, .j = 5, .gamma10 = -0.012, .sigma1 = 0.006}, 21);
  auto best = fit(design, LmeSpec::qpp());
  CHECK(best.converged);

  double grid_min = std::numeric_limits<double>::infinity();
  for (double t0 = 0.0; t0 <= 8.0; t0 += 0.25)
    for (double t1 = -2.0; t1 <= 2.0; t1 += 0.25)
      for (double t2 = 0.0; t2 <= 2.0; t2 += 0.25) {
        double theta[3] = {t0, t1, t2};
        grid_min = std::min(grid_min, profiled_deviance(design, LmeSpec::qpp(), theta));
      }
  CHECK(best.deviance <= grid_min + 1e-6);
}

TEST_CASE("recentering the covariate changes only the intercept") {
  auto design = simulate({.n = 24, .j = 5, .gamma10 = -0.01, .sigma1 = 0.005}, 31);
  auto base = fit(design, LmeSpec::qpp());

  LmeDesign shifted = design;
  for (auto& row : shifted.rows) row.covariate += 5.0;
  auto moved = fit(shifted, LmeSpec::qpp());

  CHECK(moved.gamma[1] == doctest::Approx(base.gamma[1]).epsilon(1e-6));
  CHECK(moved.sigma2_eps == doctest::Approx(base.sigma2_eps).epsilon(1e-6));
  CHECK(moved.deviance == doctest::Approx(base.deviance).epsilon(1e-8));
  CHECK(moved.gamma[0] == doctest::Approx(base.gamma[0] - 5.0 * base.gamma[1]).epsilon(1e-4));
}

TEST_CASE("log-likelihood is invariant to the order of design rows") {
  auto design = simulate({.n = 18, .j = 4, .gamma10 = -0.01}, 41);
  auto base = fit(design, LmeSpec::qpp());

  LmeDesign scrambled = design;
  std::mt19937_64 rng(5);
  std::shuffle(scrambled.rows.begin(), scrambled.rows.end(), rng);
  auto moved = fit(scrambled, LmeSpec::qpp());
  CHECK(moved.loglik == doctest::Approx(base.loglik).epsilon(1e-10));
}

TEST_CASE("deviance is monotone along the nested chain") {
  std::vector<LmeDesign> corpus;
  corpus.push_back(simulate({.n = 24, .j = 5, .gamma10 = -0.01, .sigma1 = 0.005}, 51));
  corpus.push_back(simulate({.n = 18, .j = 4}, 52));                       // pure noise
  corpus.push_back(simulate({.n = 24, .j = 4, .sigma0 = 1e-6,
                             .sigma_eps = 1e-5}, 53));                     // near-degenerate
  corpus.push_back(
      simulate({.n = 30, .j = 5, .gamma10 = -0.02, .type_slope_effect = 0.05}, 54));
  for (const auto& design : corpus) {
    auto a = fit(design, LmeSpec::average());
    auto q = fit(design, LmeSpec::qpp(), {a.theta});
    auto f = fit(design, LmeSpec::full(), {q.theta});
    CHECK(q.deviance <= a.deviance + 1e-8);
    CHECK(f.deviance <= q.deviance + 1e-8);
  }
}

TEST_CASE("pseudo_r2 formula substitution") {
  LmeFit avg, qpp_fit, full;
  avg.sigma2_eps = 0.04;
  qpp_fit.sigma2_eps = 0.03;
  full.sigma2_eps = 0.03;
  qpp_fit.sigma2_0 = 0.02;
  full.sigma2_0 = 0.02;
  qpp_fit.sigma2_1 = 0.001;
  full.sigma2_1 = 0.001;
  auto d = pseudo_r2(avg, qpp_fit, full);
  REQUIRE(d.pseudo_r2_eps.has_value());
  CHECK(*d.pseudo_r2_eps == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(*d.pseudo_r2_0 == 0.0);
  CHECK(*d.pseudo_r2_1 == 0.0);

  qpp_fit.sigma2_1 = 0.0;  // denominator below threshold -> undefined
  auto undef = pseudo_r2(avg, qpp_fit, full);
  CHECK_FALSE(undef.pseudo_r2_1.has_value());
}

TEST_CASE("full model requires >= 2 types and no singleton type") {
  SareTable sare({"A", "B"});
  QueryTypeMap types;
  for (int i = 0; i < 4; ++i) {
    std::string qid = "q" + std::to_string(i);
    types.assign(qid, i < 3 ? "Factoid" : "Reason");  // Reason has one query
    sare.set_cell(qid, "A", 0.1 * i);
    sare.set_cell(qid, "B", 0.2 * i);
  }
  auto design = build_design(sare, types, {"A", "B"});
  try {
    fit(design, LmeSpec::full());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("Reason") != std::string::npos);
  }
}

TEST_CASE("select_model on a planted slope picks the qpp model") {
  auto design = simulate({.n = 60, .j = 8, .gamma10 = -0.015, .sigma1 = 0.002,
                          .sigma_eps = 0.01}, 61);
  auto report = select_model(design);
  CHECK(report.chosen.spec.model == LmeModel::qpp);
  CHECK(report.fit_qpp.deviance <= report.fit_average.deviance);
  REQUIRE(report.decomposition.pseudo_r2_eps.has_value());
  CHECK(*report.decomposition.pseudo_r2_eps > 0.0);
}

TEST_CASE("select_model reports every candidate with its deviance") {
  auto design = simulate({.n = 36, .j = 6, .gamma10 = -0.01}, 71);
  auto report = select_model(design);
  CHECK(report.candidates.size() >= 2);
  for (const auto& c : report.candidates) {
    CHECK_FALSE(c.name.empty());
    if (c.feasible) CHECK(std::isfinite(c.deviance));
  }
}
