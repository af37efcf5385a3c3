// Command-line front end: predict, evaluate, correlate, tune, sare, lme,
// simmatrix. Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical failure.

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "qpp/eval.hpp"
#include "qpp/ingest.hpp"
#include "qpp/lme.hpp"
#include "qpp/predictors.hpp"
#include "qpp/similarity.hpp"
#include "qpp/stats.hpp"
#include "qpp/tuning.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using nlohmann::json;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw qpp::ConfigError("cannot open input file '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw qpp::ConfigError("cannot open output file '" + path + "'");
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> standard_header(std::uint64_t seed, const std::string& params,
                                         bool stamp) {
  std::vector<std::string> header = {std::string("qpp-toolkit ") + kVersion,
                                     "seed=" + std::to_string(seed)};
  if (!params.empty()) header.push_back(params);
  if (stamp) {
    auto now = std::chrono::system_clock::now();
    header.push_back("generated=" +
                     std::to_string(std::chrono::duration_cast<std::chrono::seconds>(
                                        now.time_since_epoch())
                                        .count()));
  }
  return header;
}

struct PredictOptions {
  std::string run_path, sparse_path, dense_path, query_vecs_path, out_path;
  std::string predictor_list;
  std::size_t k = 100;
  std::size_t tau_upper = 10, tau_lower = 50;
  double lambda = 0.5;
  std::size_t rsd_samples = 100;
  std::uint64_t seed = 42;
  unsigned jobs = 1;
  bool cosine = false;
  bool stamp = false;
  bool explain = false;
};

void add_predict_options(CLI::App* cmd, PredictOptions& opt) {
  cmd->add_option("--run", opt.run_path, "TREC run file")->required();
  cmd->add_option("--sparse", opt.sparse_path, "sparse document vectors");
  cmd->add_option("--dense", opt.dense_path, "dense document vectors");
  cmd->add_option("--query-vecs", opt.query_vecs_path, "dense query vectors");
  cmd->add_option("--predictors", opt.predictor_list,
                  "comma-separated predictor names (default: all thirteen)");
  cmd->add_option("-k,--cutoff", opt.k, "top-k cutoff");
  cmd->add_option("--tau-upper", opt.tau_upper, "pairRatio upper block end rank");
  cmd->add_option("--tau-lower", opt.tau_lower, "pairRatio lower block start rank");
  cmd->add_option("--lambda", opt.lambda, "interpolation weight for *(NQC) predictors");
  cmd->add_option("--rsd-samples", opt.rsd_samples, "RSD bootstrap iterations");
  cmd->add_option("--seed", opt.seed, "base RNG seed");
  cmd->add_option("--jobs", opt.jobs, "worker threads (0 = all cores)");
  cmd->add_flag("--cosine", opt.cosine, "cosine similarity instead of inner product");
  cmd->add_flag("--stamp", opt.stamp, "include a timestamp in output headers");
  cmd->add_flag("--explain", opt.explain, "print the resolved configuration");
}

qpp::predictors::ComputeConfig to_compute_config(const PredictOptions& opt) {
  qpp::predictors::ComputeConfig config;
  config.predictors = split_list(opt.predictor_list);
  config.k = opt.k;
  config.pair_ratio = {opt.tau_upper, opt.tau_lower};
  config.rsd.num_samples = opt.rsd_samples;
  config.rsd.seed = opt.seed;
  config.interpolation.lambda = opt.lambda;
  config.cosine = opt.cosine;
  config.jobs = opt.jobs;
  return config;
}

std::string predict_params_line(const PredictOptions& opt) {
  return "k=" + std::to_string(opt.k) + " tau_upper=" + std::to_string(opt.tau_upper) +
         " tau_lower=" + std::to_string(opt.tau_lower) +
         " lambda=" + qpp::ingest::format_double(opt.lambda) +
         " rsd_samples=" + std::to_string(opt.rsd_samples) +
         " cosine=" + (opt.cosine ? "1" : "0");
}

int run_predict(const PredictOptions& opt) {
  if (opt.explain) {
    std::cerr << "predict: " << predict_params_line(opt) << " seed=" << opt.seed << "\n";
  }
  auto run_in = open_input(opt.run_path);
  auto rankings = qpp::ingest::parse_run(run_in);

  std::optional<qpp::VectorStore> sparse, dense, queries;
  if (!opt.sparse_path.empty()) {
    auto in = open_input(opt.sparse_path);
    sparse = qpp::ingest::parse_sparse_vectors(in);
  }
  if (!opt.dense_path.empty()) {
    auto in = open_input(opt.dense_path);
    dense = qpp::ingest::parse_dense_vectors(in);
  }
  if (!opt.query_vecs_path.empty()) {
    auto in = open_input(opt.query_vecs_path);
    queries = qpp::ingest::parse_dense_vectors(in);
  }

  auto result = qpp::predictors::compute_all(rankings, sparse ? &*sparse : nullptr,
                                             dense ? &*dense : nullptr,
                                             queries ? &*queries : nullptr,
                                             to_compute_config(opt));
  for (const auto& reason : result.missing_reasons) std::cerr << "missing: " << reason << "\n";

  auto out = open_output(opt.out_path);
  qpp::ingest::write_table(out, result.table,
                           standard_header(opt.seed, predict_params_line(opt), opt.stamp));
  return 0;
}

int run_evaluate(const std::string& run_path, const std::string& qrels_path,
                 const std::string& metric_list, int rel_threshold, const std::string& out_path,
                 bool stamp) {
  auto run_in = open_input(run_path);
  auto rankings = qpp::ingest::parse_run(run_in);
  auto qrels_in = open_input(qrels_path);
  auto qrels = qpp::ingest::parse_qrels(qrels_in);
  if (qrels.duplicate_warnings)
    std::cerr << "warning: " << qrels.duplicate_warnings
              << " duplicate qrels entries (last grade kept)\n";

  auto metrics = split_list(metric_list);
  auto result = qpp::eval::evaluate(rankings, qrels.qrels, metrics, rel_threshold);
  if (result.skipped_unjudged)
    std::cerr << "warning: " << result.skipped_unjudged
              << " queries in the run have no judgments and were skipped\n";
  if (result.table.rows().empty()) std::cerr << "warning: empty evaluation table\n";

  auto out = open_output(out_path);
  qpp::ingest::write_table(out, result.table,
                           standard_header(0, "metrics=" + metric_list + " rel_threshold=" +
                                                  std::to_string(rel_threshold),
                                           stamp));
  return 0;
}

int run_correlate(const std::string& predictors_path, const std::string& effectiveness_path,
                  const std::string& predictor, const std::string& metric,
                  const std::string& out_path) {
  auto pin = open_input(predictors_path);
  auto ptable = qpp::ingest::parse_table(pin);
  auto ein = open_input(effectiveness_path);
  auto etable = qpp::ingest::parse_table(ein);

  std::vector<std::string> pnames =
      predictor.empty() ? ptable.names() : std::vector<std::string>{predictor};
  std::vector<std::string> mnames =
      metric.empty() ? etable.names() : std::vector<std::string>{metric};

  std::ostringstream body;
  body << "predictor\tmetric\ttau\tp_value\tsignificant\n";
  for (const auto& p : pnames)
    for (const auto& m : mnames) {
      auto r = qpp::eval::kendall_tau_columns(ptable.column(p), etable.column(m));
      body << p << '\t' << m << '\t' << qpp::ingest::format_double(r.tau) << '\t'
           << qpp::ingest::format_double(r.p_value) << '\t' << (r.p_value < 0.05 ? "*" : "")
           << '\n';
    }
  if (out_path.empty()) {
    std::cout << body.str();
  } else {
    auto out = open_output(out_path);
    out << body.str();
  }
  return 0;
}

qpp::tuning::TuningGrid parse_grid_file(const std::string& path) {
  qpp::tuning::TuningGrid grid;
  auto in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw qpp::ParseError("expected key=value", lineno);
    std::string key = line.substr(0, eq);
    auto values = split_list(line.substr(eq + 1));
    if (key == "cutoffs") {
      grid.cutoffs.clear();
      for (const auto& v : values) grid.cutoffs.push_back(std::stoul(v));
    } else if (key == "tau_pairs") {
      for (const auto& v : values) {
        auto colon = v.find(':');
        if (colon == std::string::npos)
          throw qpp::ParseError("tau pair must look like upper:lower", lineno);
        grid.tau_pairs.emplace_back(std::stoul(v.substr(0, colon)),
                                    std::stoul(v.substr(colon + 1)));
      }
    } else if (key == "lambdas") {
      for (const auto& v : values) grid.lambdas.push_back(std::stod(v));
    } else {
      throw qpp::ParseError("unknown grid key '" + key + "'", lineno);
    }
  }
  return grid;
}

int run_tune(const std::string& run_path, const std::string& qrels_path,
             const std::string& sparse_path, const std::string& dense_path,
             const std::string& query_vecs_path, const std::string& predictor,
             const std::string& metric, const std::string& grid_path,
             const std::string& trace_path, const std::string& best_path, bool stamp) {
  auto run_in = open_input(run_path);
  auto rankings = qpp::ingest::parse_run(run_in);
  auto qrels_in = open_input(qrels_path);
  auto qrels = qpp::ingest::parse_qrels(qrels_in);
  auto effectiveness = qpp::eval::evaluate(rankings, qrels.qrels, {metric}).table;

  std::optional<qpp::VectorStore> sparse, dense, queries;
  if (!sparse_path.empty()) {
    auto in = open_input(sparse_path);
    sparse = qpp::ingest::parse_sparse_vectors(in);
  }
  if (!dense_path.empty()) {
    auto in = open_input(dense_path);
    dense = qpp::ingest::parse_dense_vectors(in);
  }
  if (!query_vecs_path.empty()) {
    auto in = open_input(query_vecs_path);
    queries = qpp::ingest::parse_dense_vectors(in);
  }

  qpp::tuning::TuningGrid grid;
  if (!grid_path.empty()) grid = parse_grid_file(grid_path);

  auto result = qpp::tuning::tune(predictor, rankings, sparse ? &*sparse : nullptr,
                                  dense ? &*dense : nullptr, queries ? &*queries : nullptr,
                                  effectiveness, metric, grid);

  auto trace = open_output(trace_path);
  for (const auto& c : standard_header(0, "predictor=" + predictor + " metric=" + metric, stamp))
    trace << "# " << c << '\n';
  trace << "point\ttau\n";
  for (const auto& [point, tau] : result.trace)
    trace << point.describe() << '\t' << qpp::ingest::format_double(tau) << '\n';
  for (const auto& point : result.skipped) trace << point.describe() << "\tinfeasible\n";

  auto best = open_output(best_path);
  best << result.best.describe() << " tau=" << qpp::ingest::format_double(result.best_tau)
       << '\n';
  return 0;
}

int run_sare(const std::string& predictors_path, const std::string& effectiveness_path,
             const std::string& metric, const std::string& out_path, bool stamp) {
  auto pin = open_input(predictors_path);
  auto ptable = qpp::ingest::parse_table(pin);
  auto ein = open_input(effectiveness_path);
  auto etable = qpp::ingest::parse_table(ein);
  auto metric_column = etable.column(metric);

  qpp::SareTable sare_table(ptable.names());
  for (const auto& name : ptable.names()) {
    auto values = qpp::eval::sare(ptable.column(name), metric_column);
    for (const auto& [qid, v] : values) sare_table.set_cell(qid, name, v);
  }
  auto out = open_output(out_path);
  qpp::ingest::write_table(out, sare_table, standard_header(0, "metric=" + metric, stamp));
  return 0;
}

json fit_to_json(const qpp::lme::LmeFit& fit) {
  json coefs = json::array();
  for (std::size_t i = 0; i < fit.coef_names.size(); ++i)
    coefs.push_back({{"name", fit.coef_names[i]},
                     {"estimate", fit.gamma[i]},
                     {"se", fit.se[i]},
                     {"z", fit.wald_z(i)}});
  return {{"model", fit.spec.name()},
          {"coefficients", coefs},
          {"variance_components",
           {{"sigma2_0", fit.sigma2_0},
            {"sigma_01", fit.sigma_01},
            {"sigma2_1", fit.sigma2_1},
            {"sigma2_eps", fit.sigma2_eps}}},
          {"loglik", fit.loglik},
          {"deviance", fit.deviance},
          {"converged", fit.converged},
          {"grad_max_rel", fit.grad_max_rel}};
}

int run_lme(const std::string& sare_path, const std::string& types_path,
            const std::string& order_list, bool strict_types, const std::string& out_path) {
  auto sin = open_input(sare_path);
  auto sare_table = qpp::ingest::parse_table(sin);
  auto tin = open_input(types_path);
  auto types = qpp::ingest::parse_query_types(tin, strict_types);
  auto order = split_list(order_list);
  if (order.empty()) order = sare_table.names();

  auto design = qpp::lme::build_design(sare_table, types, order);
  auto report = qpp::lme::select_model(design);

  json doc;
  doc["toolkit_version"] = kVersion;
  doc["predictor_order"] = order;
  doc["reference_type"] = design.reference_type;
  doc["fits"] = json::array({fit_to_json(report.fit_average), fit_to_json(report.fit_qpp)});
  if (report.fit_full) doc["fits"].push_back(fit_to_json(*report.fit_full));
  doc["selection"] = json::array();
  for (const auto& c : report.candidates)
    doc["selection"].push_back({{"candidate", c.name},
                                {"feasible", c.feasible},
                                {"note", c.note},
                                {"deviance", c.deviance},
                                {"lrt_stat", c.lrt_stat},
                                {"lrt_df", c.lrt_df},
                                {"lrt_p", c.lrt_p},
                                {"max_new_wald_z", c.max_new_wald_z},
                                {"accepted", c.accepted}});
  doc["chosen"] = fit_to_json(report.chosen);
  json decomposition;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) {
      decomposition[key] = *v;
      decomposition[std::string(key) + "_negative"] = *v < 0.0;
    } else {
      decomposition[key] = nullptr;
    }
  };
  put("pseudo_r2_eps", report.decomposition.pseudo_r2_eps);
  put("pseudo_r2_0", report.decomposition.pseudo_r2_0);
  put("pseudo_r2_1", report.decomposition.pseudo_r2_1);
  doc["pseudo_r2"] = decomposition;

  if (out_path.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    auto out = open_output(out_path);
    out << doc.dump(2) << '\n';
  }
  return 0;
}

int run_simmatrix(const std::string& run_path, const std::string& sparse_path,
                  const std::string& dense_path, const std::string& query_id, std::size_t k,
                  bool cosine, bool adjusted, const std::string& query_vecs_path,
                  const std::string& out_path) {
  auto run_in = open_input(run_path);
  auto rankings = qpp::ingest::parse_run(run_in);
  auto it = rankings.find(query_id);
  if (it == rankings.end()) throw qpp::DataError("query '" + query_id + "' not in run file");

  std::optional<qpp::VectorStore> store;
  if (!dense_path.empty()) {
    auto in = open_input(dense_path);
    store = qpp::ingest::parse_dense_vectors(in);
  } else if (!sparse_path.empty()) {
    auto in = open_input(sparse_path);
    store = qpp::ingest::parse_sparse_vectors(in);
  } else {
    throw qpp::ConfigError("simmatrix needs --dense or --sparse vectors");
  }

  auto w = qpp::similarity::build_sim_matrix(it->second, *store, k, cosine);
  if (adjusted) {
    if (query_vecs_path.empty())
      throw qpp::ConfigError("--adjusted requires --query-vecs");
    auto qin = open_input(query_vecs_path);
    auto queries = qpp::ingest::parse_dense_vectors(qin);
    w = qpp::similarity::adjust_matrix(w, it->second, queries.dense_at(query_id), *store);
  }
  auto out = open_output(out_path);
  qpp::similarity::export_matrix_csv(w, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query performance prediction toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file (flags win)");

  PredictOptions popt;
  auto* predict = app.add_subcommand("predict", "compute predictor columns");
  add_predict_options(predict, popt);
  predict->add_option("--out", popt.out_path, "output predictor TSV")->required();

  std::string e_run, e_qrels, e_metrics = "NDCG@10,MAP@100,MRR@10", e_out;
  int e_rel = 2;
  bool e_stamp = false;
  auto* evaluate = app.add_subcommand("evaluate", "compute effectiveness metrics");
  evaluate->add_option("--run", e_run)->required();
  evaluate->add_option("--qrels", e_qrels)->required();
  evaluate->add_option("--metrics", e_metrics, "comma-separated metric names");
  evaluate->add_option("--rel-threshold", e_rel, "binarization grade for MAP/MRR");
  evaluate->add_option("--out", e_out)->required();
  evaluate->add_flag("--stamp", e_stamp);

  std::string c_pred, c_eff, c_predictor, c_metric, c_out;
  auto* correlate = app.add_subcommand("correlate", "Kendall tau of predictors vs metrics");
  correlate->add_option("--predictors", c_pred)->required();
  correlate->add_option("--effectiveness", c_eff)->required();
  correlate->add_option("--predictor", c_predictor, "single predictor (default: all)");
  correlate->add_option("--metric", c_metric, "single metric (default: all)");
  correlate->add_option("--out", c_out, "output TSV (default: stdout)");

  std::string t_run, t_qrels, t_sparse, t_dense, t_qvecs, t_predictor, t_metric, t_grid,
      t_trace, t_best;
  bool t_stamp = false;
  auto* tune = app.add_subcommand("tune", "grid-search predictor hyperparameters");
  tune->add_option("--run", t_run)->required();
  tune->add_option("--qrels", t_qrels)->required();
  tune->add_option("--sparse", t_sparse);
  tune->add_option("--dense", t_dense);
  tune->add_option("--query-vecs", t_qvecs);
  tune->add_option("--predictor", t_predictor)->required();
  tune->add_option("--metric", t_metric)->required();
  tune->add_option("--grid", t_grid, "grid config file (key=value lists)");
  tune->add_option("--out-trace", t_trace)->required();
  tune->add_option("--out-best", t_best)->required();
  tune->add_flag("--stamp", t_stamp);

  std::string s_pred, s_eff, s_metric, s_out;
  bool s_stamp = false;
  auto* sare = app.add_subcommand("sare", "per-query scaled absolute rank error");
  sare->add_option("--predictors", s_pred)->required();
  sare->add_option("--effectiveness", s_eff)->required();
  sare->add_option("--metric", s_metric)->required();
  sare->add_option("--out", s_out)->required();
  sare->add_flag("--stamp", s_stamp);

  std::string l_sare, l_types, l_order, l_out;
  bool l_strict = false;
  auto* lme = app.add_subcommand("lme", "mixed-model variance decomposition of sARE");
  lme->add_option("--sare", l_sare)->required();
  lme->add_option("--types", l_types)->required();
  lme->add_option("--order", l_order, "comma-separated predictor order (default: file order)");
  lme->add_flag("--strict-types", l_strict, "require the canonical six-type taxonomy");
  lme->add_option("--out", l_out, "output JSON (default: stdout)");

  std::string m_run, m_sparse, m_dense, m_qvecs, m_query, m_out;
  std::size_t m_k = 100;
  bool m_cosine = false, m_adjusted = false;
  auto* simmatrix = app.add_subcommand("simmatrix", "export a similarity matrix as CSV");
  simmatrix->add_option("--run", m_run)->required();
  simmatrix->add_option("--sparse", m_sparse);
  simmatrix->add_option("--dense", m_dense);
  simmatrix->add_option("--query-vecs", m_qvecs);
  simmatrix->add_option("--query", m_query)->required();
  simmatrix->add_option("-k,--cutoff", m_k);
  simmatrix->add_flag("--cosine", m_cosine);
  simmatrix->add_flag("--adjusted", m_adjusted, "export the query-adjusted matrix A");
  simmatrix->add_option("--out", m_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (predict->parsed()) return run_predict(popt);
    if (evaluate->parsed()) return run_evaluate(e_run, e_qrels, e_metrics, e_rel, e_out, e_stamp);
    if (correlate->parsed()) return run_correlate(c_pred, c_eff, c_predictor, c_metric, c_out);
    if (tune->parsed())
      return run_tune(t_run, t_qrels, t_sparse, t_dense, t_qvecs, t_predictor, t_metric, t_grid,
                      t_trace, t_best, t_stamp);
    if (sare->parsed()) return run_sare(s_pred, s_eff, s_metric, s_out, s_stamp);
    if (lme->parsed()) return run_lme(l_sare, l_types, l_order, l_strict, l_out);
    if (simmatrix->parsed())
      return run_simmatrix(m_run, m_sparse, m_dense, m_query, m_k, m_cosine, m_adjusted, m_qvecs,
                           m_out);
  } catch (const qpp::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const qpp::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
