#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qpp/core.hpp"
#include "qpp/predictors.hpp"

namespace qpp::tuning {

struct TuningGrid {
  std::vector<std::size_t> cutoffs = {5, 10, 20, 50, 100, 200, 500, 1000};
  /// (tau_upper, tau_lower) pairs for pairRatio variants; empty = all ordered
  /// pairs drawn from the cutoff grid.
  std::vector<std::pair<std::size_t, std::size_t>> tau_pairs;
  /// Interpolation weights for WAND(NQC)/WD(NQC); empty = {0.0, 0.1, ..., 1.0}.
  std::vector<double> lambdas;
};

struct GridPoint {
  std::size_t k = 0;
  std::optional<std::pair<std::size_t, std::size_t>> tau;
  std::optional<double> lambda;

  std::string describe() const;
};

struct TuningResult {
  std::string predictor;
  GridPoint best;
  double best_tau = 0.0;
  std::vector<std::pair<GridPoint, double>> trace;  // one row per feasible point
  std::vector<GridPoint> skipped;                   // infeasible points
};

/// Enumerates the predictor-applicable subset of the grid in deterministic
/// order (k, then tau_upper/tau_lower, then lambda). Infeasible points
/// (e.g. tau_lower >= k) are skipped and recorded.
std::vector<GridPoint> enumerate_grid(const std::string& predictor, const TuningGrid& grid,
                                      std::vector<GridPoint>* skipped = nullptr);

/// Maximizes Kendall's tau of the predictor against the metric column over
/// the grid. Ties break toward smaller k, then smaller tau_upper, then
/// smaller lambda. RSD seeds are derived per grid point from a hash of the
/// predictor name and parameters.
TuningResult tune(const std::string& predictor,
                  const std::map<std::string, ScoredRanking>& rankings,
                  const VectorStore* sparse_store, const VectorStore* dense_store,
                  const VectorStore* query_vectors, const EffectivenessTable& effectiveness,
                  const std::string& metric, const TuningGrid& grid);

}  // namespace qpp::tuning
