#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "qpp/predictors.hpp"
#include "qpp/similarity.hpp"

using namespace qpp;
using namespace qpp::predictors;

namespace {

ScoredRanking scores_ranking(const std::vector<double>& scores) {
  std::vector<ScoredEntry> entries;
  for (std::size_t i = 0; i < scores.size(); ++i)
    entries.push_back({"d" + std::to_string(i), scores[i]});
  return ScoredRanking("q", std::move(entries));
}

// Reference re-implementation of the documented RSD sampling procedure,
// written independently of the library code.
double rsd_reference(const std::vector<double>& scores, std::uint64_t seed,
                     std::size_t num_samples) {
  std::size_t n = scores.size();
  auto lo = static_cast<std::size_t>(std::ceil(0.60 * static_cast<double>(n)));
  auto hi = static_cast<std::size_t>(std::floor(0.80 * static_cast<double>(n)));
  std::mt19937_64 rng(seed);
  std::vector<double> pool(scores);
  double total = 0.0;
  for (std::size_t b = 0; b < num_samples; ++b) {
    std::size_t m = lo + rng() % (hi - lo + 1);
    for (std::size_t i = 0; i < m; ++i) std::swap(pool[i], pool[i + rng() % (n - i)]);
    double mu = 0.0;
    for (std::size_t i = 0; i < m; ++i) mu += pool[i];
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t i = 0; i < m; ++i) var += (pool[i] - mu) * (pool[i] - mu);
    total += std::sqrt(var / static_cast<double>(m));
  }
  double mean_all = 0.0;
  for (double s : scores) mean_all += s;
  mean_all /= static_cast<double>(n);
  return total / static_cast<double>(num_samples) / std::fabs(mean_all);
}

similarity::SimMatrix two_block_matrix() {
  similarity::SimMatrix w(4, {"a", "b", "c", "d"}, similarity::Provenance::dense);
  w.set(0, 1, 0.8);
  w.set(2, 3, 0.4);
  return w;
}

similarity::SimMatrix random_matrix(std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < k; ++i) ids.push_back("d" + std::to_string(i));
  similarity::SimMatrix w(k, ids, similarity::Provenance::dense);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) w.set(i, j, i == j ? 1.0 : u(rng));
  return w;
}

}  // namespace

TEST_CASE("max_score") {
  CHECK(max_score(scores_ranking({0.2, 0.9, 0.5}), 3) == 0.9);
  CHECK(max_score(scores_ranking({0.7}), 1) == 0.7);
  CHECK(max_score(scores_ranking({3.0, 3.0, 3.0}), 3) == 3.0);
}

TEST_CASE("nqc hand example and edge cases") {
  CHECK(nqc(scores_ranking({4.0, 2.0, 0.0}), 3) == doctest::Approx(0.816497).epsilon(1e-6));
  CHECK(nqc(scores_ranking({5.0, 5.0, 5.0}), 3) == 0.0);
  CHECK_THROWS_AS(nqc(scores_ranking({1.0, -1.0}), 2), NumericError);
}

TEST_CASE("rsd matches the independent reference implementation") {
  std::vector<double> scores;
  for (int i = 10; i >= 1; --i) scores.push_back(i);
  RsdParams params;
  params.seed = 7;
  double lib = rsd_uni(scores_ranking(scores), 10, params);
  CHECK(lib == rsd_reference(scores, 7, 100));  // bit-equal by contract

  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.5, 10.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> s(20 + static_cast<std::size_t>(rng() % 30));
    for (auto& v : s) v = u(rng);
    std::sort(s.rbegin(), s.rend());
    RsdParams p;
    p.seed = 1000 + static_cast<std::uint64_t>(trial);
    CHECK(rsd_uni(scores_ranking(s), s.size(), p) == rsd_reference(s, p.seed, 100));
  }
}

TEST_CASE("rsd determinism over 20 repetitions; constant scores give 0") {
  std::vector<double> scores;
  for (int i = 30; i >= 1; --i) scores.push_back(0.1 * i);
  RsdParams params;
  params.seed = 1234;
  double first = rsd_uni(scores_ranking(scores), 30, params);
  for (int rep = 0; rep < 19; ++rep)
    CHECK(rsd_uni(scores_ranking(scores), 30, params) == first);

  CHECK(rsd_uni(scores_ranking(std::vector<double>(10, 2.0)), 10, params) == 0.0);
}

TEST_CASE("rsd rejects degenerate sizes") {
  RsdParams params;
  CHECK_THROWS_AS(rsd_uni(scores_ranking({1.0}), 1, params), NumericError);
}

TEST_CASE("autocorrelation: identity diffusion gives 1") {
  auto w = random_matrix(3, 1);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) w.set(i, j, i == j ? 1.0 : 0.0);
  CHECK(autocorrelation(w, scores_ranking({3.0, 2.0, 1.0})) == doctest::Approx(1.0));
}

TEST_CASE("autocorrelation 3x3 hand example = 0.9332") {
  similarity::SimMatrix w(3, {"a", "b", "c"}, similarity::Provenance::dense);
  w.set(0, 0, 1.0);
  w.set(1, 1, 1.0);
  w.set(2, 2, 1.0);
  w.set(0, 1, 0.5);
  w.set(0, 2, 0.2);
  w.set(1, 2, 0.4);
  double ac = autocorrelation(w, scores_ranking({3.0, 2.0, 1.0}));
  CHECK(ac == doctest::Approx(0.9332).epsilon(1e-4));
}

TEST_CASE("autocorrelation is invariant under positive score scaling and stays in [-1,1]") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t k = 3 + rng() % 10;
    auto w = random_matrix(k, 500 + static_cast<std::uint64_t>(trial));
    std::vector<double> scores(k);
    for (auto& s : scores) s = 1.0 + u(rng);
    std::sort(scores.rbegin(), scores.rend());
    double base = autocorrelation(w, scores_ranking(scores));
    CHECK(base >= -1.0);
    CHECK(base <= 1.0);
    double c = 0.5 + 5.0 * u(rng);
    std::vector<double> scaled(scores);
    for (auto& s : scaled) s *= c;
    CHECK(autocorrelation(w, scores_ranking(scaled)) ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("wand hand examples") {
  similarity::SimMatrix w(3, {"a", "b", "c"}, similarity::Provenance::dense);
  w.set(0, 1, 0.8);
  w.set(0, 2, 0.2);
  w.set(1, 2, 0.6);
  auto g = similarity::prune_graph(w);  // edges (0,1) and (1,2)
  CHECK(wand(g) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(wd(g) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  // All off-diagonals equal: zero edges after strict thresholding.
  similarity::SimMatrix flat(3, {"a", "b", "c"}, similarity::Provenance::dense);
  flat.set(0, 1, 0.5);
  flat.set(0, 2, 0.5);
  flat.set(1, 2, 0.5);
  auto empty = similarity::prune_graph(flat);
  CHECK(wand(empty) == 0.0);
  CHECK(wd(empty) == 0.0);
}

TEST_CASE("wand/wd on a complete graph") {
  // One weak pair pulls the mean down, leaving the rest fully connected is
  // hard to arrange exactly; build the graph directly instead.
  similarity::PrunedGraph g;
  g.k = 5;
  g.adjacency.assign(5, {});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j) {
      g.adjacency[i].push_back(j);
      g.adjacency[j].push_back(i);
      g.edge_weights[{i, j}] = 1.0;
    }
  CHECK(wand(g) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(wd(g) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("wand/wd equal brute-force evaluation on random graphs, k <= 6") {
  std::mt19937_64 rng(321);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t k = 3 + rng() % 4;  // 3..6
    auto w = random_matrix(k, 900 + static_cast<std::uint64_t>(trial));
    auto g = similarity::prune_graph(w);

    // Brute force directly from the matrix and threshold definition.
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        sum += w.at(i, j);
        ++pairs;
      }
    double threshold = sum / static_cast<double>(pairs);
    std::vector<std::set<std::size_t>> adj(k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j)
        if (w.at(i, j) > threshold) {
          adj[i].insert(j);
          adj[j].insert(i);
        }
    std::size_t edges = 0;
    double wand_bf = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      edges += adj[i].size();
      if (adj[i].empty()) continue;
      double nd = 0.0;
      for (std::size_t j : adj[i]) nd += static_cast<double>(adj[j].size());
      wand_bf += nd / static_cast<double>(adj[i].size());
    }
    wand_bf /= static_cast<double>(k);
    double wd_bf = static_cast<double>(edges) / (static_cast<double>(k) *
                                                 static_cast<double>(k - 1));

    CHECK(wand(g) == wand_bf);
    CHECK(wd(g) == wd_bf);
    CHECK(wd(g) >= 0.0);
    CHECK(wd(g) <= 1.0);
    CHECK(wand(g) <= static_cast<double>(k - 1));
  }
}

TEST_CASE("pair_ratio two-block example = 2.0 and order sensitivity") {
  PairRatioParams params{2, 3};
  auto w = two_block_matrix();
  CHECK(pair_ratio(w, params) == 2.0);

  // Swapping the blocks (reverse rank order) inverts the ratio.
  similarity::SimMatrix rev(4, {"d", "c", "b", "a"}, similarity::Provenance::dense);
  rev.set(0, 1, 0.4);
  rev.set(2, 3, 0.8);
  CHECK(pair_ratio(rev, params) == 0.5);
}

TEST_CASE("pair_ratio uniform matrix gives 1, scaling invariance, validation") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  similarity::SimMatrix w(6, {"a", "b", "c", "d", "e", "f"}, similarity::Provenance::dense);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i; j < 6; ++j) w.set(i, j, i == j ? 1.0 : 0.3);
  PairRatioParams params{3, 4};
  CHECK(pair_ratio(w, params) == 1.0);

  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_matrix(6, 40 + static_cast<std::uint64_t>(trial));
    double base = pair_ratio(m, params);
    double c = 0.5 + 5.0 * u(rng);
    similarity::SimMatrix scaled(6, m.doc_ids(), m.provenance());
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = i; j < 6; ++j) scaled.set(i, j, c * m.at(i, j));
    CHECK(pair_ratio(scaled, params) == doctest::Approx(base).epsilon(1e-12));
  }

  CHECK_THROWS_AS(pair_ratio(w, PairRatioParams{1, 4}), ConfigError);
  CHECK_THROWS_AS(pair_ratio(w, PairRatioParams{5, 4}), ConfigError);
  CHECK_THROWS_AS(pair_ratio(w, PairRatioParams{2, 6}), ConfigError);
}

TEST_CASE("a_pair_ratio hand example = 8.0 and invariances") {
  VectorStore store(StoreKind::dense, 1);
  store.add("a", DenseVector({1.0}));
  store.add("b", DenseVector({1.0}));
  store.add("c", DenseVector({0.5}));
  store.add("d", DenseVector({0.5}));
  ScoredRanking r("q", {{"a", 4.0}, {"b", 3.0}, {"c", 2.0}, {"d", 1.0}});
  PairRatioParams params{2, 3};
  auto w = two_block_matrix();

  CHECK(a_pair_ratio(w, r, DenseVector({1.0}), store, params) == doctest::Approx(8.0));
  // All dots equal 1 => A = W.
  VectorStore unit(StoreKind::dense, 1);
  for (const auto& id : {"a", "b", "c", "d"}) unit.add(id, DenseVector({1.0}));
  CHECK(a_pair_ratio(w, r, DenseVector({1.0}), unit, params) == pair_ratio(w, params));
  // Scaling the query vector cancels in the ratio.
  CHECK(a_pair_ratio(w, r, DenseVector({3.7}), store, params) ==
        doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("positive scaling leaves Max/NQC/RSD values related/unchanged per contract") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.5, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(15);
    for (auto& v : s) v = 1.0 + u(rng);
    std::sort(s.rbegin(), s.rend());
    double c = 0.5 + 5.0 * u(rng);
    std::vector<double> scaled(s);
    for (auto& v : scaled) v *= c;
    auto r1 = scores_ranking(s);
    auto r2 = scores_ranking(scaled);
    RsdParams params;
    params.seed = static_cast<std::uint64_t>(trial);
    CHECK(nqc(r2, 15) == doctest::Approx(nqc(r1, 15)).epsilon(1e-12));
    CHECK(rsd_uni(r2, 15, params) == doctest::Approx(rsd_uni(r1, 15, params)).epsilon(1e-12));
    CHECK(max_score(r2, 15) == doctest::Approx(c * max_score(r1, 15)).epsilon(1e-12));
  }
}

TEST_CASE("interpolate endpoints and midpoint") {
  std::map<std::string, double> coh = {{"q1", 10.0}, {"q2", 20.0}, {"q3", 15.0}};
  std::map<std::string, double> nqc_col = {{"q1", 0.9}, {"q2", 0.1}, {"q3", 0.5}};

  auto lam0 = interpolate(coh, nqc_col, InterpolationParams{0.0});
  CHECK(lam0.at("q1") > lam0.at("q3"));
  CHECK(lam0.at("q3") > lam0.at("q2"));  // argsort equals NQC's
  auto lam1 = interpolate(coh, nqc_col, InterpolationParams{1.0});
  CHECK(lam1.at("q2") > lam1.at("q3"));
  CHECK(lam1.at("q3") > lam1.at("q1"));  // argsort equals coherence's

  std::map<std::string, double> c2 = {{"q1", 0.0}, {"q2", 1.0}};
  std::map<std::string, double> n2 = {{"q1", 1.0}, {"q2", 0.0}};
  auto mid = interpolate(c2, n2, InterpolationParams{0.5});
  CHECK(mid.at("q1") == 0.5);
  CHECK(mid.at("q2") == 0.5);

  std::map<std::string, double> flat = {{"q1", 1.0}, {"q2", 1.0}};
  CHECK_THROWS_AS(interpolate(flat, n2, InterpolationParams{0.5}), NumericError);
}

TEST_CASE("compute_all: minimal request, store requirements, full battery") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::map<std::string, ScoredRanking> runs;
  VectorStore dense(StoreKind::dense, 4);
  VectorStore sparse(StoreKind::sparse);
  VectorStore queries(StoreKind::dense, 4);
  for (int q = 0; q < 5; ++q) {
    std::string qid = "q" + std::to_string(q);
    std::vector<double> theta(4);
    for (auto& v : theta) v = std::fabs(gauss(rng)) + 0.2;
    queries.add(qid, DenseVector(theta));
    std::vector<ScoredEntry> entries;
    for (int d = 0; d < 12; ++d) {
      std::string did = qid + "_d" + std::to_string(d);
      std::vector<double> phi(4);
      std::map<std::string, double> terms;
      for (std::size_t i = 0; i < 4; ++i) {
        phi[i] = theta[i] + (0.1 + 0.2 * q) * gauss(rng);  // coherence varies by query
        terms["t" + std::to_string(i)] = std::fabs(phi[i]) + 0.01;
      }
      dense.add(did, DenseVector(phi));
      sparse.add(did, SparseVector(terms));
      entries.push_back({did, dot(DenseVector(phi), DenseVector(theta))});
    }
    runs.emplace(qid, ScoredRanking(qid, std::move(entries)));
  }

  ComputeConfig minimal;
  minimal.predictors = {"Max", "NQC"};
  minimal.k = 10;
  auto res = compute_all(runs, nullptr, nullptr, nullptr, minimal);
  CHECK(res.table.names() == std::vector<std::string>{"Max", "NQC"});
  CHECK(res.table.num_queries() == 5);
  CHECK(res.missing_reasons.empty());

  ComputeConfig needs_dense;
  needs_dense.predictors = {"AC-embs"};
  CHECK_THROWS_AS(compute_all(runs, &sparse, nullptr, nullptr, needs_dense), ConfigError);

  ComputeConfig full;
  full.k = 10;
  full.pair_ratio = {2, 8};
  auto all = compute_all(runs, &sparse, &dense, &queries, full);
  CHECK(all.table.names() == all_predictor_names());
  CHECK(all.table.names().size() == 13);
  for (const auto& qid : {"q0", "q1", "q2", "q3", "q4"})
    for (const auto& name : all.table.names())
      CHECK_FALSE(is_missing(all.table.cell(qid, name)));

  // Same inputs, same seed: identical tables (determinism, incl. RSD).
  auto again = compute_all(runs, &sparse, &dense, &queries, full);
  for (const auto& qid : {"q0", "q1", "q2", "q3", "q4"})
    for (const auto& name : all.table.names())
      CHECK(again.table.cell(qid, name) == all.table.cell(qid, name));

  // Parallel execution produces the identical table.
  ComputeConfig parallel = full;
  parallel.jobs = 4;
  auto par = compute_all(runs, &sparse, &dense, &queries, parallel);
  for (const auto& qid : {"q0", "q1", "q2", "q3", "q4"})
    for (const auto& name : all.table.names())
      CHECK(par.table.cell(qid, name) == all.table.cell(qid, name));
}

TEST_CASE("compute_all records per-query failures as missing with reasons") {
  // Second query has constant scores: NQC defined (mean nonzero) but AC
  // degenerate (zero score variance).
  std::map<std::string, ScoredRanking> runs;
  VectorStore sparse(StoreKind::sparse);
  std::vector<ScoredEntry> var_entries, flat_entries;
  for (int d = 0; d < 5; ++d) {
    sparse.add("a" + std::to_string(d), SparseVector({{"t", 1.0 + d}}));
    sparse.add("b" + std::to_string(d), SparseVector({{"t", 2.0 + d}}));
    var_entries.push_back({"a" + std::to_string(d), 5.0 - d});
    flat_entries.push_back({"b" + std::to_string(d), 1.0});
  }
  runs.emplace("q1", ScoredRanking("q1", var_entries));
  runs.emplace("q2", ScoredRanking("q2", flat_entries));

  ComputeConfig config;
  config.predictors = {"AC"};
  config.k = 5;
  auto res = compute_all(runs, &sparse, nullptr, nullptr, config);
  CHECK_FALSE(is_missing(res.table.cell("q1", "AC")));
  CHECK(is_missing(res.table.cell("q2", "AC")));
  REQUIRE(res.missing_reasons.size() == 1);
  CHECK(res.missing_reasons[0].find("q2") != std::string::npos);
}
