#include "qpp/similarity.hpp"

#include <cmath>
#include <ostream>

#include "qpp/ingest.hpp"

namespace qpp::similarity {

SimMatrix::SimMatrix(std::size_t k, std::vector<std::string> doc_ids, Provenance provenance)
    : k_(k), entries_(k * k, 0.0), doc_ids_(std::move(doc_ids)), provenance_(provenance) {
  if (k_ == 0) throw DataError("similarity matrix must have k >= 1");
  if (doc_ids_.size() != k_) throw DataError("doc_ids length does not match k");
}

void SimMatrix::set(std::size_t i, std::size_t j, double value) {
  if (!std::isfinite(value)) throw DataError("non-finite similarity entry");
  entries_[i * k_ + j] = value;
  entries_[j * k_ + i] = value;
}

namespace {

double norm(const SparseVector& v) {
  double s = 0.0;
  for (const auto& [_, w] : v.components()) s += w * w;
  return std::sqrt(s);
}

double norm(const DenseVector& v) {
  double s = 0.0;
  for (double x : v.values()) s += x * x;
  return std::sqrt(s);
}

}  // namespace

SimMatrix build_sim_matrix(const ScoredRanking& ranking, const VectorStore& store, std::size_t k,
                           bool cosine) {
  auto top = ranking.head(k);
  std::vector<std::string> ids(top.size());
  for (std::size_t i = 0; i < top.size(); ++i) {
    ids[i] = top[i].doc_id;
    if (!store.contains(ids[i]))
      throw DataError("no vector for top-k doc '" + ids[i] + "' (query '" + ranking.query_id() +
                      "')");
  }
  Provenance prov = store.kind() == StoreKind::sparse ? Provenance::sparse : Provenance::dense;
  SimMatrix w(ids.size(), ids, prov);
  std::vector<double> norms(ids.size(), 1.0);
  if (cosine) {
    for (std::size_t i = 0; i < ids.size(); ++i)
      norms[i] = store.kind() == StoreKind::sparse ? norm(store.sparse_at(ids[i]))
                                                   : norm(store.dense_at(ids[i]));
  }
  // Each unordered pair (and the diagonal) computed once, then mirrored.
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i; j < ids.size(); ++j) {
      double sim = store.kind() == StoreKind::sparse
                       ? dot(store.sparse_at(ids[i]), store.sparse_at(ids[j]))
                       : dot(store.dense_at(ids[i]), store.dense_at(ids[j]));
      if (cosine) sim = (norms[i] > 0 && norms[j] > 0) ? sim / (norms[i] * norms[j]) : 0.0;
      w.set(i, j, sim);
    }
  }
  return w;
}

SimMatrix adjust_matrix(const SimMatrix& w, const ScoredRanking& ranking,
                        const DenseVector& query_vec, const VectorStore& store) {
  if (w.provenance() != Provenance::dense)
    throw DataError("adjusted matrix requires a dense-provenance similarity matrix");
  if (store.kind() != StoreKind::dense) throw DataError("adjusted matrix requires a dense store");
  if (query_vec.dim() != store.dim())
    throw DataError("query vector dim " + std::to_string(query_vec.dim()) +
                    " does not match store dim " + std::to_string(store.dim()));
  std::vector<double> query_dots(w.k());
  for (std::size_t i = 0; i < w.k(); ++i)
    query_dots[i] = dot(store.dense_at(w.doc_ids()[i]), query_vec);
  SimMatrix a(w.k(), w.doc_ids(), Provenance::adjusted);
  for (std::size_t i = 0; i < w.k(); ++i)
    for (std::size_t j = i; j < w.k(); ++j)
      a.set(i, j, w.at(i, j) * query_dots[i] * query_dots[j]);
  (void)ranking;
  return a;
}

PrunedGraph prune_graph(const SimMatrix& w) {
  if (w.k() < 2) throw DataError("graph pruning needs k >= 2 (no document pairs)");
  // Threshold = mean off-diagonal similarity, each unordered pair once.
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < w.k(); ++i)
    for (std::size_t j = i + 1; j < w.k(); ++j) {
      sum += w.at(i, j);
      ++pairs;
    }
  PrunedGraph g;
  g.k = w.k();
  g.threshold = sum / static_cast<double>(pairs);
  g.adjacency.resize(w.k());
  for (std::size_t i = 0; i < w.k(); ++i)
    for (std::size_t j = i + 1; j < w.k(); ++j)
      if (w.at(i, j) > g.threshold) {
        g.adjacency[i].push_back(j);
        g.adjacency[j].push_back(i);
        g.edge_weights[{i, j}] = w.at(i, j);
      }
  return g;
}

void export_matrix_csv(const SimMatrix& w, std::ostream& out) {
  for (std::size_t i = 0; i < w.k(); ++i) {
    for (std::size_t j = 0; j < w.k(); ++j) {
      if (j) out << ',';
      out << ingest::format_double(w.at(i, j));
    }
    out << '\n';
  }
}

}  // namespace qpp::similarity
