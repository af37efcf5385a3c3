// Generates the bundled synthetic fixture: 20 queries, 100 documents each,
// 8-dimensional embeddings with a planted coherence gradient that is tied to
// retrieval effectiveness, sparse term vectors, graded qrels and query types.
// Deterministic for a fixed seed, so the outputs can be committed verbatim.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "qpp/core.hpp"
#include "qpp/ingest.hpp"

namespace {

constexpr std::size_t kQueries = 20;
constexpr std::size_t kDocsPerQuery = 100;
constexpr std::size_t kDim = 8;
constexpr std::uint64_t kSeed = 20250817;

std::string query_id(std::size_t q) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "q%02zu", q + 1);
  return buf;
}

std::string doc_id(std::size_t q, std::size_t d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "q%02zu_d%03zu", q + 1, d + 1);
  return buf;
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

int main(int argc, char** argv) {
  std::string out_dir = argc > 1 ? argv[1] : "data/fixture";

  std::mt19937_64 rng(kSeed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const std::vector<std::string> type_cycle = {"Evidence-based", "Factoid", "Experience",
                                               "Instruction",   "Reason",  "Not a Question"};

  qpp::VectorStore dense(qpp::StoreKind::dense, kDim);
  qpp::VectorStore queries(qpp::StoreKind::dense, kDim);
  qpp::VectorStore sparse(qpp::StoreKind::sparse);
  std::map<std::string, qpp::ScoredRanking> runs;
  qpp::Qrels qrels;
  qpp::QueryTypeMap types;

  for (std::size_t q = 0; q < kQueries; ++q) {
    const std::string qid = query_id(q);
    types.assign(qid, type_cycle[q % type_cycle.size()]);

    // Coherence gradient across queries: 1.0 for q01 down to 0.05 for q20.
    const double coherence = 1.0 - 0.95 * static_cast<double>(q) / (kQueries - 1);

    std::vector<double> theta(kDim);
    for (auto& v : theta) v = round6(std::abs(gauss(rng)) + 0.25);
    queries.add(qid, qpp::DenseVector(theta));

    // Coherent queries keep their documents close to the query direction;
    // incoherent ones scatter them.
    const double noise_scale = 0.15 + 1.4 * (1.0 - coherence);

    std::vector<qpp::ScoredEntry> entries;
    for (std::size_t d = 0; d < kDocsPerQuery; ++d) {
      const std::string did = doc_id(q, d);
      const double pull = 1.0 - 0.7 * static_cast<double>(d) / (kDocsPerQuery - 1);
      std::vector<double> phi(kDim);
      for (std::size_t i = 0; i < kDim; ++i)
        phi[i] = round6(pull * theta[i] + noise_scale * gauss(rng));
      dense.add(did, qpp::DenseVector(phi));

      const double score = qpp::dot(qpp::DenseVector(phi), qpp::DenseVector(theta));
      entries.push_back({did, round6(score)});

      // Sparse view: eight shared topic terms weighted by the embedding
      // magnitude, plus a few document-specific terms.
      std::map<std::string, double> terms;
      for (std::size_t i = 0; i < kDim; ++i) {
        const double w = round6(std::max(0.0, phi[i]));
        if (w > 0.0) terms["t" + std::to_string(i)] = w;
      }
      const std::size_t extra = 2 + rng() % 3;
      for (std::size_t e = 0; e < extra; ++e)
        terms["x" + std::to_string(rng() % 40)] = round6(0.2 + 0.8 * unif(rng));
      sparse.add(did, qpp::SparseVector(std::move(terms)));
    }
    runs.emplace(qid, qpp::validate_ranking(qid, std::move(entries)));

    // Judgments: coherent queries rank their relevant documents near the
    // top, incoherent ones bury them, so effectiveness tracks coherence.
    const auto& ranked = runs.at(qid).entries();
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      const double top_weight = 1.0 - static_cast<double>(r) / (kDocsPerQuery - 1);
      const double p_rel = 0.08 + 0.85 * coherence * top_weight * top_weight;
      int grade = 0;
      const double u = unif(rng);
      if (u < p_rel * 0.4)
        grade = 3;
      else if (u < p_rel)
        grade = 2;
      else if (u < p_rel + 0.08)
        grade = 1;
      if (grade > 0) qrels.set(qid, ranked[r].doc_id, grade);
    }
    // Every query keeps at least one relevant document so no metric is
    // degenerate.
    if (!qrels.has_query(qid)) qrels.set(qid, ranked[0].doc_id, 2);
  }

  auto write = [&](const std::string& name, auto&& fn) {
    std::ofstream out(out_dir + "/" + name);
    if (!out) {
      std::cerr << "cannot write " << out_dir << "/" << name << "\n";
      std::exit(1);
    }
    fn(out);
  };
  write("run.txt", [&](std::ostream& o) { qpp::ingest::write_run(o, runs, "fixture"); });
  write("qrels.txt", [&](std::ostream& o) { qpp::ingest::write_qrels(o, qrels); });
  write("dense.txt", [&](std::ostream& o) { qpp::ingest::write_dense_vectors(o, dense); });
  write("queries.txt", [&](std::ostream& o) { qpp::ingest::write_dense_vectors(o, queries); });
  write("sparse.txt", [&](std::ostream& o) { qpp::ingest::write_sparse_vectors(o, sparse); });
  write("types.tsv", [&](std::ostream& o) { qpp::ingest::write_query_types(o, types); });
  return 0;
}
