#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qpp/core.hpp"
#include "qpp/similarity.hpp"

namespace qpp::predictors {

/// Rank blocks for pairRatio: upper block covers ranks [1..tau_upper],
/// lower block ranks [tau_lower..k].
struct PairRatioParams {
  std::size_t tau_upper = 10;
  std::size_t tau_lower = 50;

  /// Throws ConfigError unless 2 <= tau_upper <= tau_lower <= k - 1.
  void validate(std::size_t k) const;
};

struct RsdParams {
  std::size_t num_samples = 100;
  double frac_low = 0.60;
  double frac_high = 0.80;
  std::uint64_t seed = 0;
};

struct InterpolationParams {
  double lambda = 0.5;  // weight on the coherence predictor
};

double max_score(const ScoredRanking& ranking, std::size_t k);

/// Population std of the top-k scores divided by |mean of top-k scores|.
double nqc(const ScoredRanking& ranking, std::size_t k);

/// Bootstrap score dispersion: num_samples seeded draws of m scores without
/// replacement (m uniform in [ceil(frac_low*k), floor(frac_high*k)]) from the
/// top-k; mean of the per-sample population stds, normalized like nqc.
double rsd_uni(const ScoredRanking& ranking, std::size_t k, const RsdParams& params);

/// Pearson correlation between the top-k scores and their diffusion W * scores.
double autocorrelation(const similarity::SimMatrix& w, const ScoredRanking& ranking);

/// Average neighbour degree of the pruned graph; isolated nodes contribute 0.
double wand(const similarity::PrunedGraph& graph);

/// Edge density 2|E| / (k(k-1)).
double wd(const similarity::PrunedGraph& graph);

/// Mean off-diagonal similarity of the upper rank block over that of the
/// lower rank block.
double pair_ratio(const similarity::SimMatrix& w, const PairRatioParams& params);

/// pair_ratio on the query-adjusted matrix A.
double a_pair_ratio(const similarity::SimMatrix& w, const ScoredRanking& ranking,
                    const DenseVector& query_vec, const VectorStore& store,
                    const PairRatioParams& params);

/// Min-max normalizes both columns over their shared query set and blends
/// them as lambda * coherence + (1 - lambda) * nqc.
std::map<std::string, double> interpolate(const std::map<std::string, double>& coherence,
                                          const std::map<std::string, double>& nqc_values,
                                          const InterpolationParams& params);

/// The full predictor battery in canonical order.
const std::vector<std::string>& all_predictor_names();
bool predictor_needs_sparse(const std::string& name);
bool predictor_needs_dense(const std::string& name);
bool predictor_needs_query_vectors(const std::string& name);

struct ComputeConfig {
  std::vector<std::string> predictors;  // empty = all thirteen
  std::size_t k = 100;
  PairRatioParams pair_ratio;
  RsdParams rsd;
  InterpolationParams interpolation;
  bool cosine = false;
  unsigned jobs = 1;
};

struct ComputeResult {
  PredictorTable table;
  /// One entry per missing cell: "qid/predictor: reason".
  std::vector<std::string> missing_reasons;
};

/// Computes every requested predictor for every ranking. Per-query failures
/// become missing cells with a recorded reason; a predictor whose input store
/// is absent altogether is rejected up front.
ComputeResult compute_all(const std::map<std::string, ScoredRanking>& rankings,
                          const VectorStore* sparse_store, const VectorStore* dense_store,
                          const VectorStore* query_vectors, const ComputeConfig& config);

}  // namespace qpp::predictors
