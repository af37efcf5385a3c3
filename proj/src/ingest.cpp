#include "qpp/ingest.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace qpp::ingest {

namespace {

// Strips a trailing '\r' so CRLF files parse like LF files.
bool next_line(std::istream& in, std::string& line, std::size_t& lineno) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++lineno;
  return true;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string f;
  while (ss >> f) fields.push_back(f);
  return fields;
}

double parse_real(const std::string& s, std::size_t lineno, const std::string& what) {
  double v;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("cannot parse " + what + " '" + s + "'", lineno);
  if (!std::isfinite(v)) throw ParseError("non-finite " + what + " '" + s + "'", lineno);
  return v;
}

long parse_int(const std::string& s, std::size_t lineno, const std::string& what) {
  long v;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("cannot parse " + what + " '" + s + "'", lineno);
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::map<std::string, ScoredRanking> parse_run(std::istream& in) {
  std::map<std::string, std::vector<ScoredEntry>> raw;
  std::vector<std::string> order;  // qids in first-seen order (only used for grouping)
  std::string line;
  std::size_t lineno = 0;
  while (next_line(in, line, lineno)) {
    if (line.empty()) continue;
    auto fields = split_ws(line);
    if (fields.size() != 6)
      throw ParseError("expected 6 fields (qid Q0 docid rank score tag), got " +
                           std::to_string(fields.size()),
                       lineno);
    double score = parse_real(fields[4], lineno, "score");
    raw[fields[0]].push_back({fields[2], score});
  }
  std::map<std::string, ScoredRanking> out;
  for (auto& [qid, entries] : raw) out.emplace(qid, ScoredRanking(qid, std::move(entries)));
  return out;
}

void write_run(std::ostream& out, const std::map<std::string, ScoredRanking>& runs,
               const std::string& tag) {
  for (const auto& [qid, ranking] : runs) {
    std::size_t rank = 1;
    for (const auto& e : ranking.entries())
      out << qid << " Q0 " << e.doc_id << ' ' << rank++ << ' ' << format_double(e.score) << ' '
          << tag << '\n';
  }
}

QrelsParseResult parse_qrels(std::istream& in) {
  QrelsParseResult result;
  std::string line;
  std::size_t lineno = 0;
  std::set<std::pair<std::string, std::string>> seen;
  while (next_line(in, line, lineno)) {
    if (line.empty()) continue;
    auto fields = split_ws(line);
    if (fields.size() != 4)
      throw ParseError("expected 4 fields (qid iter docid grade), got " +
                           std::to_string(fields.size()),
                       lineno);
    long grade = parse_int(fields[3], lineno, "grade");
    if (grade < 0) throw ParseError("negative grade '" + fields[3] + "'", lineno);
    if (!seen.insert({fields[0], fields[2]}).second) ++result.duplicate_warnings;
    result.qrels.set(fields[0], fields[2], static_cast<int>(grade));
  }
  return result;
}

void write_qrels(std::ostream& out, const Qrels& qrels) {
  for (const auto& [qid, docs] : qrels.by_query())
    for (const auto& [docid, grade] : docs) out << qid << " 0 " << docid << ' ' << grade << '\n';
}

VectorStore parse_dense_vectors(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!next_line(in, line, lineno)) throw ParseError("empty dense vector file, expected 'dim D'");
  auto header = split_ws(line);
  if (header.size() != 2 || header[0] != "dim")
    throw ParseError("expected header 'dim D'", lineno);
  long dim = parse_int(header[1], lineno, "dimension");
  if (dim <= 0) throw ParseError("dimension must be positive", lineno);

  VectorStore store(StoreKind::dense, static_cast<std::size_t>(dim));
  while (next_line(in, line, lineno)) {
    if (line.empty()) continue;
    auto fields = split_ws(line);
    if (fields.size() != static_cast<std::size_t>(dim) + 1)
      throw ParseError("row for '" + fields[0] + "' has " + std::to_string(fields.size() - 1) +
                           " values, expected " + std::to_string(dim),
                       lineno);
    std::vector<double> values(static_cast<std::size_t>(dim));
    for (long i = 0; i < dim; ++i)
      values[static_cast<std::size_t>(i)] =
          parse_real(fields[static_cast<std::size_t>(i) + 1], lineno, "vector component");
    store.add(fields[0], DenseVector(std::move(values)));
  }
  return store;
}

void write_dense_vectors(std::ostream& out, const VectorStore& store) {
  out << "dim " << store.dim() << '\n';
  for (const auto& [id, vec] : store.dense_vectors()) {
    out << id;
    for (double v : vec.values()) out << ' ' << format_double(v);
    out << '\n';
  }
}

VectorStore parse_sparse_vectors(std::istream& in) {
  VectorStore store(StoreKind::sparse);
  std::string line;
  std::size_t lineno = 0;
  while (next_line(in, line, lineno)) {
    if (line.empty()) continue;
    auto fields = split_ws(line);
    std::map<std::string, double> components;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto pos = fields[i].rfind(':');
      if (pos == std::string::npos || pos == 0 || pos == fields[i].size() - 1)
        throw ParseError("expected 'term:weight', got '" + fields[i] + "'", lineno);
      double w = parse_real(fields[i].substr(pos + 1), lineno, "weight");
      if (w < 0) throw ParseError("negative weight in '" + fields[i] + "'", lineno);
      components[fields[i].substr(0, pos)] = w;
    }
    store.add(fields[0], SparseVector(std::move(components)));
  }
  return store;
}

void write_sparse_vectors(std::ostream& out, const VectorStore& store) {
  for (const auto& [id, vec] : store.sparse_vectors()) {
    out << id;
    for (const auto& [term, w] : vec.components()) out << ' ' << term << ':' << format_double(w);
    out << '\n';
  }
}

QueryTypeMap parse_query_types(std::istream& in, bool strict) {
  QueryTypeMap types;
  std::string line;
  std::size_t lineno = 0;
  while (next_line(in, line, lineno)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab == line.size() - 1)
      throw ParseError("expected 'qid<TAB>label'", lineno);
    try {
      types.assign(line.substr(0, tab), line.substr(tab + 1));
    } catch (const DataError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  if (strict) types.validate_strict();
  return types;
}

void write_query_types(std::ostream& out, const QueryTypeMap& types) {
  for (const auto& [qid, label] : types.assignment()) out << qid << '\t' << label << '\n';
}

ValueTable parse_table(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (next_line(in, line, lineno)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) header.push_back(f);
    break;
  }
  if (header.empty() || header[0] != "qid")
    throw ParseError("expected header starting with 'qid'", lineno);
  ValueTable table(std::vector<std::string>(header.begin() + 1, header.end()));
  while (next_line(in, line, lineno)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != header.size())
      throw ParseError("row has " + std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(header.size()),
                       lineno);
    std::vector<double> values(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i)
      values[i - 1] = fields[i] == "NA" ? std::numeric_limits<double>::quiet_NaN()
                                        : parse_real(fields[i], lineno, "value");
    table.set_row(fields[0], std::move(values));
  }
  return table;
}

void write_table(std::ostream& out, const ValueTable& table,
                 const std::vector<std::string>& header_comments) {
  for (const auto& c : header_comments) out << "# " << c << '\n';
  out << "qid";
  for (const auto& name : table.names()) out << '\t' << name;
  out << '\n';
  for (const auto& [qid, values] : table.rows()) {
    out << qid;
    for (double v : values) out << '\t' << (is_missing(v) ? "NA" : format_double(v));
    out << '\n';
  }
}

CorpusStats corpus_stats(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& corpus) {
  CorpusStats stats;
  stats.num_docs = corpus.size();
  for (const auto& [doc_id, tokens] : corpus) {
    std::set<std::string> uniq(tokens.begin(), tokens.end());
    for (const auto& t : uniq) ++stats.doc_freq[t];
  }
  return stats;
}

VectorStore build_tfidf(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& corpus) {
  if (corpus.empty()) throw DataError("empty corpus");
  CorpusStats stats = corpus_stats(corpus);
  VectorStore store(StoreKind::sparse);
  for (const auto& [doc_id, tokens] : corpus) {
    std::map<std::string, std::size_t> tf;
    for (const auto& t : tokens) ++tf[t];
    std::map<std::string, double> components;
    for (const auto& [term, count] : tf) {
      double idf = std::log(static_cast<double>(stats.num_docs) /
                            static_cast<double>(stats.doc_freq.at(term)));
      double w = static_cast<double>(count) * idf;
      if (w > 0.0) components[term] = w;
    }
    store.add(doc_id, SparseVector(std::move(components)));
  }
  return store;
}

}  // namespace qpp::ingest
