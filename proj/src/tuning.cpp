#include "qpp/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qpp/eval.hpp"
#include "qpp/ingest.hpp"
#include "qpp/stats.hpp"

namespace qpp::tuning {

std::string GridPoint::describe() const {
  std::string s = "k=" + std::to_string(k);
  if (tau)
    s += " tau_upper=" + std::to_string(tau->first) + " tau_lower=" + std::to_string(tau->second);
  if (lambda) s += " lambda=" + ingest::format_double(*lambda);
  return s;
}

namespace {

bool uses_tau(const std::string& predictor) {
  return predictor == "pairRatio" || predictor == "A-pairRatio";
}

bool uses_lambda(const std::string& predictor) {
  return predictor == "WAND(NQC)" || predictor == "WD(NQC)";
}

bool tau_feasible(std::size_t k, std::pair<std::size_t, std::size_t> tau) {
  return tau.first >= 2 && tau.first <= tau.second && tau.second + 1 <= k;
}

}  // namespace

std::vector<GridPoint> enumerate_grid(const std::string& predictor, const TuningGrid& grid,
                                      std::vector<GridPoint>* skipped) {
  std::vector<std::size_t> cutoffs = grid.cutoffs;
  std::sort(cutoffs.begin(), cutoffs.end());

  std::vector<std::pair<std::size_t, std::size_t>> tau_pairs = grid.tau_pairs;
  if (tau_pairs.empty()) {
    for (std::size_t a : cutoffs)
      for (std::size_t b : cutoffs)
        if (a <= b) tau_pairs.emplace_back(a, b);
  }
  std::sort(tau_pairs.begin(), tau_pairs.end());

  std::vector<double> lambdas = grid.lambdas;
  if (lambdas.empty())
    for (int i = 0; i <= 10; ++i) lambdas.push_back(static_cast<double>(i) / 10.0);
  std::sort(lambdas.begin(), lambdas.end());

  std::vector<GridPoint> points;
  for (std::size_t k : cutoffs) {
    if (uses_tau(predictor)) {
      for (auto tau : tau_pairs) {
        GridPoint p{k, tau, std::nullopt};
        if (tau_feasible(k, tau))
          points.push_back(p);
        else if (skipped)
          skipped->push_back(p);
      }
    } else if (uses_lambda(predictor)) {
      for (double l : lambdas) points.push_back({k, std::nullopt, l});
    } else {
      points.push_back({k, std::nullopt, std::nullopt});
    }
  }
  return points;
}

TuningResult tune(const std::string& predictor,
                  const std::map<std::string, ScoredRanking>& rankings,
                  const VectorStore* sparse_store, const VectorStore* dense_store,
                  const VectorStore* query_vectors, const EffectivenessTable& effectiveness,
                  const std::string& metric, const TuningGrid& grid) {
  if (rankings.size() < 2) throw ConfigError("tuning needs >= 2 queries");
  auto metric_column = effectiveness.column(metric);

  TuningResult result;
  result.predictor = predictor;
  auto points = enumerate_grid(predictor, grid, &result.skipped);
  if (points.empty()) throw ConfigError("no feasible grid points for predictor '" + predictor + "'");

  bool have_best = false;
  for (const auto& point : points) {
    predictors::ComputeConfig config;
    config.predictors = {predictor};
    config.k = point.k;
    if (point.tau) config.pair_ratio = {point.tau->first, point.tau->second};
    if (point.lambda) config.interpolation.lambda = *point.lambda;
    config.rsd.seed = stats::fnv1a(predictor + "|" + point.describe());

    double tau_value;
    try {
      auto computed =
          predictors::compute_all(rankings, sparse_store, dense_store, query_vectors, config);
      tau_value =
          eval::kendall_tau_columns(computed.table.column(predictor), metric_column).tau;
    } catch (const NumericError&) {
      // Degenerate point (constant column, too few pairs): feasible but
      // uninformative; score it as no correlation.
      tau_value = -std::numeric_limits<double>::infinity();
    }
    result.trace.emplace_back(point, tau_value);
    // Strict '>' keeps the first (smallest-parameter) point on ties; the
    // enumeration order is k, then tau, then lambda ascending.
    if (!have_best || tau_value > result.best_tau) {
      result.best = point;
      result.best_tau = tau_value;
      have_best = true;
    }
  }
  return result;
}

}  // namespace qpp::tuning
