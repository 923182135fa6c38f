#include "chainstack_cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "chainstack/cauchy.hpp"
#include "chainstack/combine.hpp"
#include "chainstack/csv.hpp"
#include "chainstack/diagnostics.hpp"
#include "chainstack/error.hpp"
#include "chainstack/parallel.hpp"
#include "chainstack/psis.hpp"
#include "chainstack/stacking.hpp"
#include "chainstack_cli/json_text.hpp"

#ifndef CHAINSTACK_VERSION
#define CHAINSTACK_VERSION "0.0.0"
#endif

namespace chainstack::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kModule = "cli";

struct InputOptions {
  std::string in_dir;
  std::size_t skip = 0;
  std::string param;
  double threshold = 1.05;
  bool no_cluster = false;
};

struct StackOptions {
  double lambda = 1.001;
  double tol = 1e-9;
  std::size_t max_iter = 100000;
  std::string method = "stacking";
  bool monitor = false;
  std::string out_dir;
};

struct ResampleOptions {
  std::size_t s_thin = 0;
  std::uint64_t seed = 1;
};

struct SimulateOptions {
  double a = 10.0;
  double p0 = 0.5;
  std::size_t n = 100;
  std::size_t chains = 8;
  std::size_t iters = 4000;
  std::size_t warmup = 500;
  double step = 0.5;
  std::uint64_t seed = 1;
  std::string out_dir;
};

std::size_t effective_threads(std::size_t flag) {
  if (const char* env = std::getenv("CHAINSTACK_THREADS")) {
    std::size_t value = 0;
    const std::string_view text(env);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc{} && ptr == text.data() + text.size()) return resolve_threads(value);
  }
  return resolve_threads(flag);
}

Json manifest_json(const std::string& command, const Json& inputs, const Json& config) {
  Json m;
  m["tool"] = "chainstack";
  m["version"] = CHAINSTACK_VERSION;
  m["command"] = command;
  m["inputs"] = inputs;
  m["config"] = config;
  return m;
}

Json envelope(const std::string& command, const Json& inputs, const Json& config) {
  Json j;
  j["schema"] = 1;
  j["manifest"] = manifest_json(command, inputs, config);
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, kModule, "cannot write file").at(path.string());
  out << text << '\n';
  if (!out) throw Error(ErrorCode::io, kModule, "write failed").at(path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::io, kModule, "cannot create output directory").at(dir.string());
}

Json vector_json(const std::vector<double>& v) { return Json(v); }

Json matrix_rows(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Everything up to and including the LOO matrix, shared by diagnose/psis/stack/resample.
struct Ingested {
  DrawManifest manifest;
  Json inputs;
  DrawSet draws;
  std::vector<ChainDiagnostics> per_chain;
  Eigen::MatrixXd pairwise;
  ClusterAssignment clusters;
  DrawSet merged;
  std::vector<double> ess;
};

Ingested ingest(const InputOptions& in, std::size_t threads) {
  const fs::path dir(in.in_dir);
  auto manifest = discover_inputs(dir);
  Json inputs = Json::array();
  for (const auto& c : manifest.chains) {
    Json e;
    e["chain_id"] = c.chain_id;
    e["log_lik"] = c.log_lik.lexically_relative(dir).generic_string();
    if (c.params) e["params"] = c.params->lexically_relative(dir).generic_string();
    inputs.push_back(std::move(e));
  }
  auto draws = load_draw_set(manifest, in.skip, threads);
  const SeriesChooser summary = in.param.empty() ? SeriesChooser(mean_log_lik_series) : parameter_series(in.param);
  auto per_chain = diagnose_chains(draws, summary, threads);
  auto pairwise = pairwise_mixing(draws, summary, threads);
  auto clusters = in.no_cluster ? singleton_clusters(draws.size()) : cluster_chains(pairwise, in.threshold);
  for (std::size_t m = 0; m < per_chain.size(); ++m) per_chain[m].cluster = clusters.labels[m];
  auto merged = merge_clusters(draws, clusters);
  auto ess = cluster_ess(per_chain, clusters);
  return {std::move(manifest), std::move(inputs), std::move(draws), std::move(per_chain),
          std::move(pairwise), std::move(clusters), std::move(merged), std::move(ess)};
}

Json input_config(const InputOptions& in) {
  Json c;
  c["skip"] = in.skip;
  c["series"] = in.param.empty() ? std::string("mean_log_lik") : in.param;
  c["threshold"] = in.threshold;
  c["cluster"] = !in.no_cluster;
  return c;
}

Json clusters_json(const Ingested& ing) {
  Json out = Json::array();
  const auto members = ing.clusters.members();
  for (std::size_t k = 0; k < members.size(); ++k) {
    Json c;
    c["id"] = ing.merged.chain(k).chain_id();
    Json ids = Json::array();
    for (auto m : members[k]) ids.push_back(ing.draws.chain(m).chain_id());
    c["members"] = std::move(ids);
    c["draws"] = ing.merged.chain(k).draws();
    c["ess"] = ing.ess[k];
    out.push_back(std::move(c));
  }
  return out;
}

Json diagnostics_json(const Ingested& ing, const Json& env) {
  Json j = env;
  Json per = Json::array();
  for (const auto& d : ing.per_chain) {
    Json e;
    e["chain_id"] = d.chain_id;
    e["split_rhat"] = d.split_rhat;
    e["ess"] = d.ess;
    e["cluster"] = d.cluster;
    per.push_back(std::move(e));
  }
  j["per_chain"] = std::move(per);
  j["pairwise"] = matrix_rows(ing.pairwise);
  j["clusters"] = clusters_json(ing);
  return j;
}

Json khat_json(const KhatSummary& s) {
  Json bins = Json::array();
  for (std::size_t b = 0; b < 4; ++b) {
    Json e;
    e["label"] = std::string(KhatSummary::labels[b]);
    e["range"] = std::string(KhatSummary::ranges[b]);
    e["count"] = s.counts[b];
    e["proportion"] = s.proportion(b);
    bins.push_back(std::move(e));
  }
  Json j;
  j["total"] = s.total;
  j["bins"] = std::move(bins);
  return j;
}

Json loo_json(const Ingested& ing, const LooMatrix& loo, const Json& env) {
  Json j = env;
  Json ids = Json::array();
  for (const auto& c : ing.merged.chains()) ids.push_back(c.chain_id());
  j["columns"] = std::move(ids);
  j["n_obs"] = loo.n_obs();
  j["log_loo"] = matrix_rows(loo.log_loo);
  j["khat"] = matrix_rows(loo.khat);
  j["khat_summary"] = khat_json(summarize_khat(loo.khat));
  return j;
}

struct Stacked {
  ChainWeights weights;
  double objective = 0.0;
  std::size_t iterations = 0;
};

Stacked choose_weights(const LooMatrix& loo, const StackingConfig& cfg, const std::string& method) {
  const std::size_t k = loo.n_chains();
  if (method == "stacking") {
    auto r = optimize_weights(loo, cfg);
    return {std::move(r.weights), r.objective, r.iterations};
  }
  auto w = method == "uniform" ? uniform_weights(k) : pseudo_bma_weights(loo);
  const double obj = objective(w, loo, cfg);
  return {std::move(w), obj, 0};
}

Json stack_config(const InputOptions& in, const StackOptions& st) {
  Json c = input_config(in);
  c["method"] = st.method;
  c["lambda"] = st.lambda;
  c["tol"] = st.tol;
  c["max_iter"] = st.max_iter;
  c["monitor"] = st.monitor;
  return c;
}

struct PipelineOutput {
  Ingested ing;
  LooMatrix loo;
  Stacked stacked;
  Json env;
  Json weights_doc;
};

PipelineOutput run_pipeline(const InputOptions& in, const StackOptions& st, std::size_t threads, const std::string& command,
                            Json config) {
  auto ing = ingest(in, threads);
  auto loo = loo_matrix(ing.merged, threads);
  StackingConfig cfg;
  cfg.lambda = st.lambda;
  cfg.tol = st.tol;
  cfg.max_iter = st.max_iter;
  cfg.ess = ing.ess;
  auto stacked = choose_weights(loo, cfg, st.method);

  const Json env = envelope(command, ing.inputs, config);
  Json w = env;
  Json weights = Json::array();
  for (std::size_t k = 0; k < stacked.weights.size(); ++k) {
    Json e;
    e["cluster"] = ing.merged.chain(k).chain_id();
    e["weight"] = stacked.weights[k];
    weights.push_back(std::move(e));
  }
  w["method"] = st.method;
  w["weights"] = std::move(weights);
  w["objective"] = stacked.objective;
  w["iterations"] = stacked.iterations;
  w["stacked_ess"] = stacked_ess(stacked.weights, ing.ess);
  if (st.monitor) {
    std::vector<std::size_t> order(loo.n_chains());
    std::iota(order.begin(), order.end(), std::size_t{0});
    w["monitor_curve"] = vector_json(monitor_curve(loo, cfg, order).lpd_loo);
  }
  w["khat_summary"] = khat_json(summarize_khat(loo.khat));
  w["clusters"] = clusters_json(ing);
  return {std::move(ing), std::move(loo), std::move(stacked), env, std::move(w)};
}

Json plan_json(const PipelineOutput& p, const ResamplePlan& plan, const ResampleOptions& rs) {
  Json j = p.env;
  j["s_thin"] = rs.s_thin;
  j["seed"] = rs.seed;
  Json per = Json::array();
  for (std::size_t k = 0; k < plan.counts.size(); ++k) {
    Json e;
    e["cluster"] = p.ing.merged.chain(k).chain_id();
    e["weight"] = p.stacked.weights[k];
    e["count"] = plan.counts[k];
    e["indices"] = plan.indices[k];
    per.push_back(std::move(e));
  }
  j["clusters"] = std::move(per);
  return j;
}

/// Writes the thinned draws; parameters when every cluster has them, log-likelihoods always.
void write_resampled(const fs::path& dir, const ChainDraws& chain) {
  write_matrix_csv(dir / "resampled.log_lik.csv", chain.log_lik());
  if (chain.params()) write_matrix_csv(dir / "resampled.params.csv", chain.params()->values, chain.params()->names);
}

void add_input_options(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("--in", in.in_dir, "Directory of per-chain CSVs (manifest.json or *.log_lik.csv)")->required();
  cmd->add_option("--skip", in.skip, "Draw rows to drop from the top of every chain");
  cmd->add_option("--param", in.param, "Parameter column used for mixing and ESS (default: mean log-likelihood)");
  cmd->add_option("--threshold", in.threshold, "Two-chain split-R-hat below which chains share a cluster");
  cmd->add_flag("--no-cluster", in.no_cluster, "Treat every chain as its own cluster");
}

void add_stack_options(CLI::App* cmd, StackOptions& st) {
  cmd->add_option("--lambda", st.lambda, "Dirichlet pooling scale (> 1)");
  cmd->add_option("--tol", st.tol, "Optimizer tolerance");
  cmd->add_option("--max-iter", st.max_iter, "Optimizer iteration cap");
  cmd->add_option("--method", st.method, "Weighting rule")->check(CLI::IsMember({"stacking", "pseudo-bma", "uniform"}));
  cmd->add_flag("--monitor", st.monitor, "Also report the stacked LOO density on cluster prefixes");
}

Json error_json(const Error& e) {
  Json inner;
  inner["code"] = std::string(to_string(e.code()));
  inner["module"] = e.module();
  if (e.where()) {
    inner["where"] = *e.where();
    if (e.code() == ErrorCode::io || e.code() == ErrorCode::parse) inner["path"] = *e.where();
  }
  inner["message"] = e.what();
  Json j;
  j["schema"] = 1;
  j["error"] = std::move(inner);
  return j;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Combine non-mixing parallel MCMC runs by PSIS-LOO stacking", "chainstack"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", CHAINSTACK_VERSION);
  std::size_t threads_flag = 0;
  app.add_option("--threads", threads_flag, "Worker threads (0 = available parallelism; CHAINSTACK_THREADS overrides)");

  InputOptions in;
  StackOptions st;
  ResampleOptions rs;
  SimulateOptions sim;
  std::string out_file;
  double theory_a = 10.0;
  double theory_p0 = 0.5;

  auto* diagnose = app.add_subcommand("diagnose", "Per-chain split-R-hat and ESS, pairwise mixing, clusters");
  add_input_options(diagnose, in);
  diagnose->add_option("--out", out_file, "Write the JSON here instead of stdout");

  auto* psis = app.add_subcommand("psis", "PSIS-LOO densities and Pareto k per observation and cluster");
  add_input_options(psis, in);
  psis->add_option("--out", out_file, "Write the JSON here instead of stdout");

  auto* stack = app.add_subcommand("stack", "Full pipeline: diagnose, cluster, PSIS-LOO, stacking weights");
  add_input_options(stack, in);
  add_stack_options(stack, st);
  stack->add_option("--out-dir", st.out_dir, "Also write diagnostics.json, loo.json, weights.json (and monitor.json)");
  stack->add_option("--s-thin", rs.s_thin, "Also thin to this many unweighted draws (needs --out-dir)");
  stack->add_option("--seed", rs.seed, "Seed for thinning");

  auto* resample = app.add_subcommand("resample", "Stack, then thin the weighted clusters to unweighted draws");
  add_input_options(resample, in);
  add_stack_options(resample, st);
  resample->add_option("--s-thin", rs.s_thin, "Number of unweighted draws")->required();
  resample->add_option("--seed", rs.seed, "Thinning seed");
  resample->add_option("--out-dir", st.out_dir, "Directory for resampled CSVs and plan.json")->required();

  auto* simulate = app.add_subcommand("simulate-cauchy", "Non-mixing Metropolis chains on the Cauchy mixture example");
  simulate->add_option("--a", sim.a, "Half-distance between mixture centers");
  simulate->add_option("--p0", sim.p0, "Weight of the right component");
  simulate->add_option("--n", sim.n, "Observations");
  simulate->add_option("--chains", sim.chains, "Chains");
  simulate->add_option("--iters", sim.iters, "Retained draws per chain");
  simulate->add_option("--warmup", sim.warmup, "Discarded draws per chain");
  simulate->add_option("--step", sim.step, "Random-walk proposal scale");
  simulate->add_option("--seed", sim.seed, "Seed for data and chains");
  simulate->add_option("--out-dir", sim.out_dir, "Output directory")->required();

  auto* theory = app.add_subcommand("theory", "Large-sample posterior geometry and elpd limits");
  theory->add_option("--a", theory_a, "Half-distance between mixture centers");
  theory->add_option("--p0", theory_p0, "Weight of the right component");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << CHAINSTACK_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    Error wrapped(ErrorCode::parse, kModule, e.what());
    err << to_json_text(error_json(wrapped)) << '\n';
    return exit_code_for(ErrorCode::parse);
  }

  const std::size_t threads = effective_threads(threads_flag);

  try {
    auto emit = [&](const Json& doc) {
      const auto text = to_json_text(doc);
      if (out_file.empty()) out << text << '\n';
      else write_text(out_file, text);
    };

    if (*diagnose) {
      auto ing = ingest(in, threads);
      emit(diagnostics_json(ing, envelope("diagnose", ing.inputs, input_config(in))));
    } else if (*psis) {
      auto ing = ingest(in, threads);
      auto loo = loo_matrix(ing.merged, threads);
      emit(loo_json(ing, loo, envelope("psis", ing.inputs, input_config(in))));
    } else if (*stack || *resample) {
      const bool thinning = *resample || rs.s_thin > 0;
      if (thinning && st.out_dir.empty())
        throw Error(ErrorCode::contract, kModule, "--s-thin needs --out-dir");
      Json config = stack_config(in, st);
      if (thinning) {
        config["s_thin"] = rs.s_thin;
        config["seed"] = rs.seed;
      }
      const std::string command = *resample ? "resample" : "stack";
      auto p = run_pipeline(in, st, threads, command, config);
      if (!st.out_dir.empty()) {
        const fs::path dir(st.out_dir);
        ensure_dir(dir);
        write_text(dir / "diagnostics.json", to_json_text(diagnostics_json(p.ing, p.env)));
        write_text(dir / "loo.json", to_json_text(loo_json(p.ing, p.loo, p.env)));
        write_text(dir / "weights.json", to_json_text(p.weights_doc));
        if (p.weights_doc.contains("monitor_curve")) {
          Json m = p.env;
          m["monitor_curve"] = p.weights_doc["monitor_curve"];
          write_text(dir / "monitor.json", to_json_text(m));
        }
      }
      if (thinning) {
        WeightedDrawSet wds(p.ing.merged, p.stacked.weights);
        const auto plan = thin_resample(wds, rs.s_thin, rs.seed);
        const fs::path dir(st.out_dir);
        write_resampled(dir, materialize(wds, plan));
        const auto plan_doc = plan_json(p, plan, rs);
        write_text(dir / "plan.json", to_json_text(plan_doc));
        emit(*resample ? plan_doc : p.weights_doc);
      } else {
        emit(p.weights_doc);
      }
    } else if (*simulate) {
      cauchy::Scenario sc{sim.a, sim.p0, sim.n, sim.seed};
      cauchy::SimulationSettings settings{sim.chains, sim.iters, sim.warmup, sim.step, threads};
      const auto run = cauchy::simulate(sc, settings);
      const fs::path dir(sim.out_dir);
      ensure_dir(dir);
      DrawManifest manifest;
      manifest.n_obs = run.draws.n_obs();
      manifest.provenance = {"simulate-cauchy", "scenario.json"};
      for (const auto& c : run.draws.chains()) {
        ChainFileEntry e{c.chain_id(), dir / (c.chain_id() + ".log_lik.csv"), dir / (c.chain_id() + ".params.csv")};
        write_matrix_csv(e.log_lik, c.log_lik());
        write_matrix_csv(*e.params, c.params()->values, c.params()->names);
        manifest.chains.push_back(std::move(e));
      }
      write_manifest(dir, manifest);

      Json config;
      config["a"] = sim.a;
      config["p0"] = sim.p0;
      config["n"] = sim.n;
      config["chains"] = sim.chains;
      config["iters"] = sim.iters;
      config["warmup"] = sim.warmup;
      config["step"] = sim.step;
      config["seed"] = sim.seed;
      Json doc = envelope("simulate-cauchy", Json::array(), config);
      doc["inits"] = vector_json(run.inits);
      doc["acceptance"] = vector_json(run.acceptance);
      doc["data"] = vector_json(run.data);
      write_text(dir / "scenario.json", to_json_text(doc));
      Json summary = envelope("simulate-cauchy", Json::array(), config);
      summary["out_dir"] = sim.out_dir;
      summary["acceptance"] = vector_json(run.acceptance);
      emit(summary);
    } else if (*theory) {
      Json config;
      config["a"] = theory_a;
      config["p0"] = theory_p0;
      Json doc = envelope("theory", Json::array(), config);
      const auto modes = cauchy::limiting_modes(theory_a, theory_p0);
      doc["xi"] = theory_a > 2.0 ? Json(cauchy::xi(theory_a)) : Json(nullptr);
      doc["modes"] = vector_json(modes.modes);
      doc["bimodal"] = modes.bimodal;
      doc["concentration_point"] = cauchy::concentration_point(theory_a, theory_p0);
      doc["elpd_bayes_limit"] = cauchy::elpd_bayes_limit(theory_a, theory_p0);
      doc["elpd_true"] = cauchy::elpd_true(theory_a, theory_p0);
      const auto opt = cauchy::optimal_mixture(theory_a, theory_p0, modes.modes);
      doc["elpd_stacking_opt"] = opt.elpd;
      doc["stacking_weights"] = vector_json(opt.weights.values());
      emit(doc);
    }
  } catch (const ConvergenceError& e) {
    Json j = error_json(e);
    j["error"]["best_weights"] = vector_json(e.best().weights.values());
    err << to_json_text(j) << '\n';
    return exit_code_for(e.code());
  } catch (const Error& e) {
    err << to_json_text(error_json(e)) << '\n';
    return exit_code_for(e.code());
  }
  return 0;
}

}  // namespace chainstack::cli
