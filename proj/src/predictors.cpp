#include "qpp/predictors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "qpp/stats.hpp"

namespace qpp::predictors {

namespace {
constexpr double kDegenerateNormalizer = 1e-12;
}

void PairRatioParams::validate(std::size_t k) const {
  if (tau_upper < 2)
    throw ConfigError("pairRatio tau_upper must be >= 2 (upper block needs a pair)");
  if (tau_upper > tau_lower) throw ConfigError("pairRatio requires tau_upper <= tau_lower");
  if (tau_lower + 1 > k)
    throw ConfigError("pairRatio lower block [tau_lower..k] needs a pair: tau_lower=" +
                      std::to_string(tau_lower) + ", k=" + std::to_string(k));
}

double max_score(const ScoredRanking& ranking, std::size_t k) {
  // Entries are sorted descending, so the head's first score is the max.
  (void)k;
  return ranking.entries().front().score;
}

double nqc(const ScoredRanking& ranking, std::size_t k) {
  auto scores = ranking.head_scores(k);
  double mu = stats::mean(scores);
  if (std::fabs(mu) <= kDegenerateNormalizer)
    throw NumericError("nqc normalizer degenerate: |mean top-k score| <= 1e-12 for query '" +
                       ranking.query_id() + "'");
  return stats::population_std(scores) / std::fabs(mu);
}

double rsd_uni(const ScoredRanking& ranking, std::size_t k, const RsdParams& params) {
  if (params.frac_low <= 0.0 || params.frac_low > params.frac_high || params.frac_high > 1.0)
    throw ConfigError("rsd fractions must satisfy 0 < frac_low <= frac_high <= 1");
  auto scores = ranking.head_scores(k);
  std::size_t n = scores.size();
  if (n < 2) throw NumericError("rsd requires k >= 2");
  auto lo = static_cast<std::size_t>(std::ceil(params.frac_low * static_cast<double>(n)));
  auto hi = static_cast<std::size_t>(std::floor(params.frac_high * static_cast<double>(n)));
  if (lo < 2) throw NumericError("rsd sample floor below 2; k too small");
  if (hi < lo) hi = lo;
  double mu = stats::mean(scores);
  if (std::fabs(mu) <= kDegenerateNormalizer)
    throw NumericError("rsd normalizer degenerate: |mean top-k score| <= 1e-12 for query '" +
                       ranking.query_id() + "'");

  // Fixed sampling procedure (kept bit-reproducible across platforms):
  // one mt19937_64 stream; sample size m = lo + raw % (hi - lo + 1);
  // the sample itself via partial Fisher-Yates with j = i + raw % (n - i).
  std::mt19937_64 rng(params.seed);
  std::vector<double> pool(scores);
  double sum_std = 0.0;
  for (std::size_t b = 0; b < params.num_samples; ++b) {
    std::size_t m = lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
      std::swap(pool[i], pool[j]);
    }
    sum_std += stats::population_std(std::span<const double>(pool.data(), m));
  }
  return sum_std / static_cast<double>(params.num_samples) / std::fabs(mu);
}

double autocorrelation(const similarity::SimMatrix& w, const ScoredRanking& ranking) {
  if (w.k() < 3) throw NumericError("autocorrelation requires k >= 3");
  auto scores = ranking.head_scores(w.k());
  if (scores.size() != w.k())
    throw DataError("ranking shorter than similarity matrix for query '" + ranking.query_id() +
                    "'");
  // Diffused scores: plain matrix product W * scores, diagonal included.
  std::vector<double> diffused(w.k(), 0.0);
  for (std::size_t i = 0; i < w.k(); ++i)
    for (std::size_t j = 0; j < w.k(); ++j) diffused[i] += w.at(i, j) * scores[j];
  return stats::pearson(scores, diffused);
}

double wand(const similarity::PrunedGraph& graph) {
  double sum = 0.0;
  for (std::size_t i = 0; i < graph.k; ++i) {
    if (graph.adjacency[i].empty()) continue;
    double neighbour_degrees = 0.0;
    for (std::size_t j : graph.adjacency[i])
      neighbour_degrees += static_cast<double>(graph.degree(j));
    sum += neighbour_degrees / static_cast<double>(graph.degree(i));
  }
  return sum / static_cast<double>(graph.k);
}

double wd(const similarity::PrunedGraph& graph) {
  if (graph.k < 2) throw NumericError("density requires k >= 2");
  double possible = static_cast<double>(graph.k) * static_cast<double>(graph.k - 1) / 2.0;
  return static_cast<double>(graph.num_edges()) / possible;
}

namespace {

// Mean off-diagonal entry of the principal submatrix over ranks [first..last],
// 1-based inclusive.
double block_mean(const similarity::SimMatrix& w, std::size_t first, std::size_t last) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = first - 1; i < last; ++i)
    for (std::size_t j = i + 1; j < last; ++j) {
      sum += w.at(i, j);
      ++count;
    }
  return sum / static_cast<double>(count);
}

}  // namespace

double pair_ratio(const similarity::SimMatrix& w, const PairRatioParams& params) {
  params.validate(w.k());
  double m_up = block_mean(w, 1, params.tau_upper);
  double m_lo = block_mean(w, params.tau_lower, w.k());
  if (std::fabs(m_lo) <= kDegenerateNormalizer)
    throw NumericError("pairRatio lower-block mean degenerate (|mean| <= 1e-12)");
  return m_up / m_lo;
}

double a_pair_ratio(const similarity::SimMatrix& w, const ScoredRanking& ranking,
                    const DenseVector& query_vec, const VectorStore& store,
                    const PairRatioParams& params) {
  return pair_ratio(similarity::adjust_matrix(w, ranking, query_vec, store), params);
}

namespace {

std::map<std::string, double> min_max_normalize(const std::map<std::string, double>& column) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& [_, v] : column) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) throw NumericError("min-max normalization undefined on a constant column");
  std::map<std::string, double> out;
  for (const auto& [qid, v] : column) out[qid] = (v - lo) / (hi - lo);
  return out;
}

}  // namespace

std::map<std::string, double> interpolate(const std::map<std::string, double>& coherence,
                                          const std::map<std::string, double>& nqc_values,
                                          const InterpolationParams& params) {
  if (params.lambda < 0.0 || params.lambda > 1.0)
    throw ConfigError("interpolation lambda must be in [0, 1]");
  std::map<std::string, double> coh, score;
  for (const auto& [qid, v] : coherence) {
    auto it = nqc_values.find(qid);
    if (it != nqc_values.end()) {
      coh[qid] = v;
      score[qid] = it->second;
    }
  }
  if (coh.size() < 2) throw NumericError("interpolation needs >= 2 shared queries");
  auto ncoh = min_max_normalize(coh);
  auto nscore = min_max_normalize(score);
  std::map<std::string, double> out;
  for (const auto& [qid, v] : ncoh)
    out[qid] = params.lambda * v + (1.0 - params.lambda) * nscore.at(qid);
  return out;
}

const std::vector<std::string>& all_predictor_names() {
  static const std::vector<std::string> names = {
      "Max",       "NQC",     "RSD(uni)",  "AC",       "WAND",      "WD",       "WAND(NQC)",
      "WD(NQC)",   "AC-embs", "WAND-embs", "WD-embs",  "pairRatio", "A-pairRatio"};
  return names;
}

bool predictor_needs_sparse(const std::string& name) {
  return name == "AC" || name == "WAND" || name == "WD" || name == "WAND(NQC)" ||
         name == "WD(NQC)";
}

bool predictor_needs_dense(const std::string& name) {
  return name == "AC-embs" || name == "WAND-embs" || name == "WD-embs" || name == "pairRatio" ||
         name == "A-pairRatio";
}

bool predictor_needs_query_vectors(const std::string& name) { return name == "A-pairRatio"; }

namespace {

bool is_known_predictor(const std::string& name) {
  const auto& all = all_predictor_names();
  return std::find(all.begin(), all.end(), name) != all.end();
}

// Base coherence column each interpolated predictor blends with NQC.
std::optional<std::string> interpolation_base(const std::string& name) {
  if (name == "WAND(NQC)") return "WAND";
  if (name == "WD(NQC)") return "WD";
  return std::nullopt;
}

struct PerQuery {
  std::map<std::string, double> values;            // predictor -> value
  std::vector<std::pair<std::string, std::string>> failures;  // predictor -> reason
};

}  // namespace

ComputeResult compute_all(const std::map<std::string, ScoredRanking>& rankings,
                          const VectorStore* sparse_store, const VectorStore* dense_store,
                          const VectorStore* query_vectors, const ComputeConfig& config) {
  std::vector<std::string> requested =
      config.predictors.empty() ? all_predictor_names() : config.predictors;
  for (const auto& name : requested) {
    if (!is_known_predictor(name)) throw ConfigError("unknown predictor '" + name + "'");
    if (predictor_needs_sparse(name) && !sparse_store)
      throw ConfigError("predictor '" + name + "' requires a sparse vector store");
    if (predictor_needs_dense(name) && !dense_store)
      throw ConfigError("predictor '" + name + "' requires a dense vector store");
    if (predictor_needs_query_vectors(name) && !query_vectors)
      throw ConfigError("predictor '" + name + "' requires query vectors");
  }

  // The direct (non-interpolated) predictors to evaluate per query; the
  // interpolated columns also need their base and NQC.
  std::set<std::string> direct;
  for (const auto& name : requested) {
    if (auto base = interpolation_base(name)) {
      direct.insert(*base);
      direct.insert("NQC");
    } else {
      direct.insert(name);
    }
  }

  std::vector<const ScoredRanking*> order;
  for (const auto& [_, r] : rankings) order.push_back(&r);
  std::vector<PerQuery> results(order.size());

  auto compute_query = [&](std::size_t idx) {
    const ScoredRanking& ranking = *order[idx];
    PerQuery& out = results[idx];
    auto run = [&](const std::string& name, auto&& fn) {
      if (!direct.contains(name)) return;
      try {
        out.values[name] = fn();
      } catch (const std::runtime_error& e) {
        out.failures.emplace_back(name, e.what());
      }
    };

    run("Max", [&] { return max_score(ranking, config.k); });
    run("NQC", [&] { return nqc(ranking, config.k); });
    run("RSD(uni)", [&] {
      RsdParams p = config.rsd;
      p.seed ^= stats::fnv1a(ranking.query_id());
      return rsd_uni(ranking, config.k, p);
    });

    bool needs_sparse_matrix =
        direct.contains("AC") || direct.contains("WAND") || direct.contains("WD");
    if (needs_sparse_matrix) {
      try {
        auto w = similarity::build_sim_matrix(ranking, *sparse_store, config.k, config.cosine);
        run("AC", [&] { return autocorrelation(w, ranking); });
        if (direct.contains("WAND") || direct.contains("WD")) {
          auto g = similarity::prune_graph(w);
          run("WAND", [&] { return wand(g); });
          run("WD", [&] { return wd(g); });
        }
      } catch (const std::runtime_error& e) {
        for (const auto& name : {"AC", "WAND", "WD"})
          if (direct.contains(name)) out.failures.emplace_back(name, e.what());
      }
    }

    bool needs_dense_matrix = direct.contains("AC-embs") || direct.contains("WAND-embs") ||
                              direct.contains("WD-embs") || direct.contains("pairRatio") ||
                              direct.contains("A-pairRatio");
    if (needs_dense_matrix) {
      try {
        auto w = similarity::build_sim_matrix(ranking, *dense_store, config.k, config.cosine);
        run("AC-embs", [&] { return autocorrelation(w, ranking); });
        if (direct.contains("WAND-embs") || direct.contains("WD-embs")) {
          auto g = similarity::prune_graph(w);
          run("WAND-embs", [&] { return wand(g); });
          run("WD-embs", [&] { return wd(g); });
        }
        run("pairRatio", [&] { return pair_ratio(w, config.pair_ratio); });
        run("A-pairRatio", [&] {
          if (!query_vectors->contains(ranking.query_id()))
            throw DataError("no query vector for query '" + ranking.query_id() + "'");
          return a_pair_ratio(w, ranking, query_vectors->dense_at(ranking.query_id()),
                              *dense_store, config.pair_ratio);
        });
      } catch (const std::runtime_error& e) {
        for (const auto& name : {"AC-embs", "WAND-embs", "WD-embs", "pairRatio", "A-pairRatio"})
          if (direct.contains(name)) out.failures.emplace_back(name, e.what());
      }
    }
  };

  unsigned jobs = config.jobs ? config.jobs : std::thread::hardware_concurrency();
  if (jobs <= 1 || order.size() <= 1) {
    for (std::size_t i = 0; i < order.size(); ++i) compute_query(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < std::min<std::size_t>(jobs, order.size()); ++t)
      workers.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < order.size(); i = next.fetch_add(1))
          compute_query(i);
      });
    for (auto& w : workers) w.join();
  }

  // Interpolated columns blend cross-query normalized values.
  std::map<std::string, std::map<std::string, double>> interp_columns;
  std::map<std::string, std::string> result_notes_for_interp;
  for (const auto& name : requested) {
    auto base = interpolation_base(name);
    if (!base) continue;
    std::map<std::string, double> coh, score;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto& qid = order[i]->query_id();
      auto b = results[i].values.find(*base);
      auto s = results[i].values.find("NQC");
      if (b != results[i].values.end()) coh[qid] = b->second;
      if (s != results[i].values.end()) score[qid] = s->second;
    }
    try {
      interp_columns[name] = interpolate(coh, score, config.interpolation);
    } catch (const std::runtime_error& e) {
      interp_columns[name] = {};
      result_notes_for_interp[name] = e.what();
    }
  }

  ComputeResult result;
  result.table = PredictorTable(requested);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& qid = order[i]->query_id();
    std::vector<double> row(requested.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < requested.size(); ++c) {
      const auto& name = requested[c];
      if (interpolation_base(name)) {
        auto col = interp_columns.find(name);
        if (col != interp_columns.end()) {
          auto v = col->second.find(qid);
          if (v != col->second.end()) row[c] = v->second;
        }
      } else {
        auto v = results[i].values.find(name);
        if (v != results[i].values.end()) row[c] = v->second;
      }
    }
    result.table.set_row(qid, std::move(row));
    for (const auto& [name, reason] : results[i].failures)
      result.missing_reasons.push_back(qid + "/" + name + ": " + reason);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& qid = order[i]->query_id();
    for (const auto& name : requested) {
      if (!interpolation_base(name)) continue;
      auto col = interp_columns.find(name);
      if (col == interp_columns.end() || !col->second.contains(qid)) {
        auto note = result_notes_for_interp.find(name);
        result.missing_reasons.push_back(
            qid + "/" + name + ": " +
            (note != result_notes_for_interp.end() ? note->second
                                                   : "interpolation input missing"));
      }
    }
  }
  return result;
}

}  // namespace qpp::predictors
