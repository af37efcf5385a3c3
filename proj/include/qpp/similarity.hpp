#pragma once

#include <iosfwd>
#include <map>
#include <vector>

#include "qpp/core.hpp"

namespace qpp::similarity {

enum class Provenance { sparse, dense, adjusted };

/// Symmetric k x k pairwise similarity matrix over the top-k documents,
/// in retrieval rank order.
class SimMatrix {
 public:
  SimMatrix(std::size_t k, std::vector<std::string> doc_ids, Provenance provenance);

  std::size_t k() const { return k_; }
  Provenance provenance() const { return provenance_; }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }

  double at(std::size_t i, std::size_t j) const { return entries_[i * k_ + j]; }
  /// Sets both (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double value);

 private:
  std::size_t k_;
  std::vector<double> entries_;
  std::vector<std::string> doc_ids_;
  Provenance provenance_;
};

/// Coherence graph after mean-thresholding: edge (i, j) kept iff its
/// similarity is strictly greater than the mean off-diagonal similarity.
struct PrunedGraph {
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> adjacency;            // sorted neighbour lists
  std::map<std::pair<std::size_t, std::size_t>, double> edge_weights;  // keyed (i < j)
  double threshold = 0.0;

  std::size_t num_edges() const { return edge_weights.size(); }
  std::size_t degree(std::size_t i) const { return adjacency[i].size(); }
};

/// Inner products of the top-min(k, |ranking|) document vectors.
/// With cosine set, each product is normalized by the vector norms
/// (zero-norm vectors yield 0).
SimMatrix build_sim_matrix(const ScoredRanking& ranking, const VectorStore& store, std::size_t k,
                           bool cosine = false);

/// A[i][j] = W[i][j] * (phi_i . theta_q) * (phi_j . theta_q).
SimMatrix adjust_matrix(const SimMatrix& w, const ScoredRanking& ranking,
                        const DenseVector& query_vec, const VectorStore& store);

PrunedGraph prune_graph(const SimMatrix& w);

/// k rows of k comma-separated values, rank order, round-trip precision.
void export_matrix_csv(const SimMatrix& w, std::ostream& out);

}  // namespace qpp::similarity
