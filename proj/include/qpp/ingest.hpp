#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "qpp/core.hpp"

namespace qpp::ingest {

/// Corpus-level statistics backing TF.IDF construction.
struct CorpusStats {
  std::size_t num_docs = 0;
  std::map<std::string, std::size_t> doc_freq;
};

struct QrelsParseResult {
  Qrels qrels;
  std::size_t duplicate_warnings = 0;  // (qid, docid) pairs overwritten last-wins
};

/// TREC run format: qid Q0 docid rank score tag. Rankings are re-sorted by
/// score descending; the file's rank column is ignored.
std::map<std::string, ScoredRanking> parse_run(std::istream& in);
void write_run(std::ostream& out, const std::map<std::string, ScoredRanking>& runs,
               const std::string& tag = "qpp");

/// TREC qrels format: qid iter docid grade. Duplicate pairs keep the last grade.
QrelsParseResult parse_qrels(std::istream& in);
void write_qrels(std::ostream& out, const Qrels& qrels);

/// Header "dim D", then rows "id v1 ... vD".
VectorStore parse_dense_vectors(std::istream& in);
void write_dense_vectors(std::ostream& out, const VectorStore& store);

/// Rows "id term:weight term:weight ...". A bare id is an empty vector.
VectorStore parse_sparse_vectors(std::istream& in);
void write_sparse_vectors(std::ostream& out, const VectorStore& store);

/// Tab-separated "qid<TAB>label" rows.
QueryTypeMap parse_query_types(std::istream& in, bool strict = false);
void write_query_types(std::ostream& out, const QueryTypeMap& types);

/// ValueTable (predictor/effectiveness/sARE) as TSV: header "qid" + names,
/// missing cells as "NA". Leading '#' lines are treated as comments.
ValueTable parse_table(std::istream& in);
void write_table(std::ostream& out, const ValueTable& table,
                 const std::vector<std::string>& header_comments = {});

/// TF.IDF weights: tf(term, doc) * ln(N / df(term)); terms present in every
/// document get weight 0 and are dropped.
CorpusStats corpus_stats(const std::vector<std::pair<std::string, std::vector<std::string>>>& corpus);
VectorStore build_tfidf(const std::vector<std::pair<std::string, std::vector<std::string>>>& corpus);

/// Shortest round-trip decimal rendering of a double.
std::string format_double(double v);

}  // namespace qpp::ingest
