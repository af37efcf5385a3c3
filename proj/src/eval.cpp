#include "qpp/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "qpp/stats.hpp"

namespace qpp::eval {

double ndcg_at(const ScoredRanking& ranking, const Qrels& qrels, std::size_t cutoff) {
  const auto& judged = qrels.judged(ranking.query_id());
  std::vector<int> grades;
  for (const auto& [_, g] : judged)
    if (g > 0) grades.push_back(g);
  if (grades.empty()) return 0.0;

  auto top = ranking.head(cutoff);
  double dcg = 0.0;
  for (std::size_t r = 0; r < top.size(); ++r)
    dcg += static_cast<double>(qrels.grade(ranking.query_id(), top[r].doc_id)) /
           std::log2(static_cast<double>(r) + 2.0);

  std::sort(grades.begin(), grades.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(grades.size(), cutoff); ++r)
    idcg += static_cast<double>(grades[r]) / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

double map_at(const ScoredRanking& ranking, const Qrels& qrels, std::size_t cutoff,
              int rel_threshold) {
  const auto& judged = qrels.judged(ranking.query_id());
  std::size_t total_relevant = 0;
  for (const auto& [_, g] : judged)
    if (g >= rel_threshold) ++total_relevant;
  if (total_relevant == 0) return 0.0;

  auto top = ranking.head(cutoff);
  double sum_precision = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < top.size(); ++r) {
    if (qrels.grade(ranking.query_id(), top[r].doc_id) >= rel_threshold) {
      ++hits;
      sum_precision += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum_precision / static_cast<double>(total_relevant);
}

double mrr_at(const ScoredRanking& ranking, const Qrels& qrels, std::size_t cutoff,
              int rel_threshold) {
  auto top = ranking.head(cutoff);
  for (std::size_t r = 0; r < top.size(); ++r)
    if (qrels.grade(ranking.query_id(), top[r].doc_id) >= rel_threshold)
      return 1.0 / static_cast<double>(r + 1);
  return 0.0;
}

namespace {

struct PairCounts {
  double concordant = 0, discordant = 0, tied_x_only = 0, tied_y_only = 0;
};

PairCounts count_pairs(std::span<const double> x, std::span<const double> y) {
  PairCounts c;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0)
        c.tied_x_only += 1.0;
      else if (dy == 0.0)
        c.tied_y_only += 1.0;
      else if ((dx > 0.0) == (dy > 0.0))
        c.concordant += 1.0;
      else
        c.discordant += 1.0;
    }
  return c;
}

bool all_tied(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
}

// Sizes of tie groups of a vector.
std::vector<std::size_t> tie_groups(std::span<const double> v) {
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> groups;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    if (j > i) groups.push_back(j - i + 1);
    i = j + 1;
  }
  return groups;
}

}  // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw NumericError("kendall tau requires two equal-length vectors of size >= 2");
  if (all_tied(x) || all_tied(y))
    throw NumericError("kendall tau undefined on an all-tied vector");
  PairCounts c = count_pairs(x, y);
  double cd = c.concordant + c.discordant;
  return (c.concordant - c.discordant) /
         std::sqrt((cd + c.tied_x_only) * (cd + c.tied_y_only));
}

KendallResult kendall_tau_test(std::span<const double> x, std::span<const double> y) {
  KendallResult result{kendall_tau(x, y), 0.0, 1.0};
  PairCounts c = count_pairs(x, y);
  double n = static_cast<double>(x.size());
  auto tie_sums = [](const std::vector<std::size_t>& groups) {
    double s1 = 0, s2 = 0, s3 = 0;  // sums of t(t-1)(2t+5), t(t-1), t(t-1)(t-2)
    for (std::size_t t : groups) {
      double td = static_cast<double>(t);
      s1 += td * (td - 1) * (2 * td + 5);
      s2 += td * (td - 1);
      s3 += td * (td - 1) * (td - 2);
    }
    return std::array<double, 3>{s1, s2, s3};
  };
  auto [xt1, xt2, xt3] = tie_sums(tie_groups(x));
  auto [yt1, yt2, yt3] = tie_sums(tie_groups(y));
  double v0 = n * (n - 1) * (2 * n + 5);
  double var = (v0 - xt1 - yt1) / 18.0 + xt2 * yt2 / (2.0 * n * (n - 1));
  if (n > 2) var += xt3 * yt3 / (9.0 * n * (n - 1) * (n - 2));
  if (var > 0.0) {
    result.z = (c.concordant - c.discordant) / std::sqrt(var);
    result.p_value = stats::normal_two_sided_p(result.z);
  }
  return result;
}

KendallResult kendall_tau_columns(const std::map<std::string, double>& x,
                                  const std::map<std::string, double>& y) {
  std::vector<double> xs, ys;
  for (const auto& [qid, v] : x) {
    auto it = y.find(qid);
    if (it != y.end()) {
      xs.push_back(v);
      ys.push_back(it->second);
    }
  }
  if (xs.size() < 2) throw NumericError("kendall tau needs >= 2 shared queries");
  return kendall_tau_test(xs, ys);
}

std::map<std::string, double> sare(const std::map<std::string, double>& predictor,
                                   const std::map<std::string, double>& effectiveness) {
  std::vector<std::string> qids;
  std::vector<double> p, e;
  for (const auto& [qid, v] : predictor) {
    auto it = effectiveness.find(qid);
    if (it != effectiveness.end()) {
      qids.push_back(qid);
      p.push_back(v);
      e.push_back(it->second);
    }
  }
  if (qids.size() < 2) throw NumericError("sare needs >= 2 shared queries");
  auto rp = stats::fractional_ranks_desc(p);
  auto re = stats::fractional_ranks_desc(e);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < qids.size(); ++i)
    out[qids[i]] = std::fabs(rp[i] - re[i]) / static_cast<double>(qids.size());
  return out;
}

MetricSpec parse_metric(const std::string& name, int rel_threshold) {
  auto at = name.find('@');
  if (at == std::string::npos || at + 1 >= name.size())
    throw ConfigError("metric must look like NDCG@10 / MAP@100 / MRR@10, got '" + name + "'");
  std::string base = name.substr(0, at);
  std::size_t cutoff = std::stoul(name.substr(at + 1));
  if (base != "NDCG" && base != "MAP" && base != "MRR")
    throw ConfigError("unknown metric '" + base + "'");
  return {name, cutoff, rel_threshold};
}

EvaluateResult evaluate(const std::map<std::string, ScoredRanking>& runs, const Qrels& qrels,
                        const std::vector<std::string>& metrics, int rel_threshold) {
  std::vector<MetricSpec> specs;
  for (const auto& m : metrics) specs.push_back(parse_metric(m, rel_threshold));
  EvaluateResult result;
  result.table = EffectivenessTable(metrics);
  for (const auto& [qid, ranking] : runs) {
    if (!qrels.has_query(qid)) {
      ++result.skipped_unjudged;
      continue;
    }
    std::vector<double> row;
    for (const auto& spec : specs) {
      if (spec.name.starts_with("NDCG"))
        row.push_back(ndcg_at(ranking, qrels, spec.cutoff));
      else if (spec.name.starts_with("MAP"))
        row.push_back(map_at(ranking, qrels, spec.cutoff, spec.rel_threshold));
      else
        row.push_back(mrr_at(ranking, qrels, spec.cutoff, spec.rel_threshold));
    }
    result.table.set_row(qid, std::move(row));
  }
  return result;
}

}  // namespace qpp::eval
