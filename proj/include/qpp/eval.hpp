#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "qpp/core.hpp"

namespace qpp::eval {

/// NDCG with raw-grade gains and log2(rank + 1) discounts; 0 when the query
/// has no relevant judged document.
double ndcg_at(const ScoredRanking& ranking, const Qrels& qrels, std::size_t cutoff = 10);

/// Binarized (grade >= rel_threshold) average precision at a cutoff,
/// normalized by the total number of relevant documents in the qrels.
double map_at(const ScoredRanking& ranking, const Qrels& qrels, std::size_t cutoff = 100,
              int rel_threshold = 2);

/// Reciprocal rank of the first relevant document within the cutoff, else 0.
double mrr_at(const ScoredRanking& ranking, const Qrels& qrels, std::size_t cutoff = 10,
              int rel_threshold = 2);

struct KendallResult {
  double tau;
  double z;        // normal approximation statistic
  double p_value;  // two-sided
};

/// Tie-corrected Kendall's tau-b over aligned vectors.
double kendall_tau(std::span<const double> x, std::span<const double> y);
KendallResult kendall_tau_test(std::span<const double> x, std::span<const double> y);

/// Aligns two qid-keyed columns, dropping queries missing from either, then
/// computes tau-b. Throws NumericError with fewer than 2 shared queries.
KendallResult kendall_tau_columns(const std::map<std::string, double>& x,
                                  const std::map<std::string, double>& y);

/// Per-query scaled absolute rank error |r_p - r_e| / |Q| between the rank of
/// each query under the predictor and under the effectiveness metric (both
/// descending, ties averaged). Columns are aligned on their shared queries.
std::map<std::string, double> sare(const std::map<std::string, double>& predictor,
                                   const std::map<std::string, double>& effectiveness);

struct MetricSpec {
  std::string name;       // e.g. "NDCG@10"
  std::size_t cutoff;
  int rel_threshold;      // ignored for NDCG
};

/// Parses "NDCG@10", "MAP@100", "MRR@10" style names.
MetricSpec parse_metric(const std::string& name, int rel_threshold = 2);

/// Evaluates the named metrics for every query present in both run and qrels;
/// queries absent from the qrels are skipped and counted.
struct EvaluateResult {
  EffectivenessTable table;
  std::size_t skipped_unjudged = 0;
};
EvaluateResult evaluate(const std::map<std::string, ScoredRanking>& runs, const Qrels& qrels,
                        const std::vector<std::string>& metrics, int rel_threshold = 2);

}  // namespace qpp::eval
