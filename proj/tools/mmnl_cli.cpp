// Command-line front end: simulate, fit, mcmc, assess and compare workflows
// with reproducible seeding and file outputs.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmnl/assessment.hpp"
#include "mmnl/batch_vb.hpp"
#include "mmnl/data_io.hpp"
#include "mmnl/errors.hpp"
#include "mmnl/mcmc.hpp"
#include "mmnl/parallel.hpp"
#include "mmnl/svi.hpp"

namespace {

using nlohmann::json;
using namespace mmnl;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitIo = 5;

struct CommonOpts {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--seed", opts.seed, "Master RNG seed")->capture_default_str();
  cmd->add_option("--threads", opts.threads,
                  "Worker threads (0 = all cores); results do not depend on it")
      ->capture_default_str();
  cmd->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
}

std::string out_path(const CommonOpts& opts, const std::string& name) {
  std::filesystem::create_directories(opts.out_dir);
  return (std::filesystem::path(opts.out_dir) / name).string();
}

void echo_config(const json& resolved) {
  std::cerr << "resolved config: " << resolved.dump() << "\n";
}

// ---------------------------------------------------------------- simulate
struct SimulateOpts {
  CommonOpts common;
  std::string preset;
  int H = 500, J = 5, K = 3, T = 10, T_max = -1;
  double omega_scale = 0.25;
  double zeta_lo = -2.0, zeta_hi = 2.0;
  double covariate_sd = 0.5;
};

int run_simulate(const SimulateOpts& o) {
  SimSpec spec;
  spec.H = o.H;
  spec.J = o.J;
  spec.K = o.K;
  spec.T_min = o.T;
  spec.T_max = o.T_max < 0 ? o.T : o.T_max;
  spec.covariate_sd = o.covariate_sd;
  double omega_scale = o.omega_scale;
  if (o.preset == "desk") {
    spec.H = 500;
    spec.J = 5;
    spec.K = 3;
    spec.T_min = spec.T_max = 10;
    omega_scale = 0.25;
  } else if (o.preset == "large-high-het" || o.preset == "large-low-het") {
    spec.H = 10000;
    spec.J = 12;
    spec.K = 10;
    spec.T_min = spec.T_max = 25;
    omega_scale = o.preset == "large-high-het" ? 1.0 : 0.25;
  } else if (!o.preset.empty()) {
    throw std::invalid_argument("unknown preset: " + o.preset);
  }
  spec.zeta_true = Vector::LinSpaced(spec.K, o.zeta_lo, o.zeta_hi);
  spec.Omega_true = omega_scale * Matrix::Identity(spec.K, spec.K);
  spec.seed = o.common.seed;

  json cfg{{"command", "simulate"}, {"preset", o.preset},
           {"H", spec.H},           {"J", spec.J},
           {"K", spec.K},           {"T_min", spec.T_min},
           {"T_max", spec.T_max},   {"omega_scale", omega_scale},
           {"zeta_lo", o.zeta_lo},  {"zeta_hi", o.zeta_hi},
           {"covariate_sd", spec.covariate_sd},
           {"seed", o.common.seed}};
  echo_config(cfg);

  const auto sim = simulate_dataset(spec);
  save_dataset(sim.dataset, out_path(o.common, "dataset.csv"), cfg.dump());
  save_truth(sim.truth, out_path(o.common, "truth.json"), cfg.dump());
  std::cout << "wrote " << out_path(o.common, "dataset.csv") << " ("
            << sim.dataset.H() << " agents) and truth.json\n";
  return kExitOk;
}

// --------------------------------------------------------------------- fit
struct FitOpts {
  CommonOpts common;
  std::string data_path;
  std::string backend = "laplace";
  std::string mode = "batch";
  double xi_threshold = 0.005;
  int max_sweeps = 500;
  int smoothing_window = 5;
  int slr_iters = 40;
  double slr_weight = 0.25;
  int batch_size = 25;
  double alpha = 0.4;
  double phi = 0.4;
  double kappa = 2.0;
  int batch_cap = 0;
  int history_window = 20;
  std::string alpha_schedule = "adaptive";
};

int run_fit(const FitOpts& o) {
  json cfg{{"command", "fit"},
           {"data", o.data_path},
           {"backend", o.backend},
           {"mode", o.mode},
           {"xi_threshold", o.xi_threshold},
           {"max_sweeps", o.max_sweeps},
           {"smoothing_window", o.smoothing_window},
           {"slr_iters", o.slr_iters},
           {"slr_weight", o.slr_weight},
           {"seed", o.common.seed},
           {"threads", o.common.threads}};
  if (o.mode == "svi") {
    cfg["batch_size"] = o.batch_size;
    cfg["alpha"] = o.alpha;
    cfg["phi"] = o.phi;
    cfg["kappa"] = o.kappa;
    cfg["batch_cap"] = o.batch_cap;
    cfg["history_window"] = o.history_window;
    cfg["alpha_schedule"] = o.alpha_schedule;
  }
  echo_config(cfg);

  BackendConfig backend;
  backend.kind = backend_from_name(o.backend);
  backend.slr.iterations = o.slr_iters;
  backend.slr.weight = o.slr_weight;
  backend.slr.validate();
  if (o.mode != "batch" && o.mode != "svi") {
    throw std::invalid_argument("mode must be batch or svi");
  }
  StopConfig stop;
  stop.xi_threshold = o.xi_threshold;
  stop.max_sweeps = o.max_sweeps;
  stop.smoothing_window = o.smoothing_window;
  stop.validate();

  const auto dataset = load_dataset(o.data_path);
  const Hyperpriors priors = Hyperpriors::vague(dataset.K);

  FitBundle bundle;
  if (o.mode == "batch") {
    bundle.fit = fit_batch(dataset, priors, backend, stop, o.common.seed, o.common.threads);
  } else if (o.mode == "svi") {
    SviConfig svi;
    svi.initial_batch = o.batch_size;
    svi.initial_alpha = o.alpha;
    svi.initial_phi = o.phi;
    svi.kappa = o.kappa;
    svi.batch_cap = o.batch_cap;
    svi.history_window = o.history_window;
    svi.decaying_stepsize = o.alpha_schedule == "decay";
    bundle.fit = fit_svi(dataset, priors, backend, svi, stop, o.common.seed, o.common.threads);
  } else {
    throw std::invalid_argument("mode must be batch or svi");
  }
  bundle.priors = priors;
  bundle.J = dataset.J;
  bundle.K = dataset.K;
  for (const auto& agent : dataset.agents) bundle.agent_ids.push_back(agent.agent_id);
  bundle.config_echo = cfg.dump();

  save_fit(bundle, out_path(o.common, "fit.json"));
  save_trace_csv(bundle.fit, out_path(o.common, "trace.csv"), cfg.dump());
  std::cout << "fit " << (bundle.fit.converged ? "converged" : "stopped") << " after "
            << bundle.fit.trace.size() << " iterations ("
            << bundle.fit.total_seconds << " s); wrote fit.json and trace.csv\n";
  return kExitOk;
}

// -------------------------------------------------------------------- mcmc
struct McmcOpts {
  CommonOpts common;
  std::string data_path;
  int chains = 4;
  int iters = 10000;
  int thin = 2;
  double burn_in = 0.5;
  double rw_scale = 0.4;
};

int run_mcmc(const McmcOpts& o) {
  json cfg{{"command", "mcmc"}, {"data", o.data_path}, {"chains", o.chains},
           {"iters", o.iters},  {"thin", o.thin},      {"burn_in", o.burn_in},
           {"rw_scale", o.rw_scale},
           {"seed", o.common.seed}};
  echo_config(cfg);

  const auto dataset = load_dataset(o.data_path);
  const Hyperpriors priors = Hyperpriors::vague(dataset.K);
  McmcConfig mcfg;
  mcfg.chains = o.chains;
  mcfg.iterations = o.iters;
  mcfg.thin = o.thin;
  mcfg.burn_in = o.burn_in;
  mcfg.init_rw_scale = o.rw_scale;
  const auto draws = run_chains(dataset, priors, mcfg, o.common.seed, o.common.threads);

  json header = cfg;
  header["burn_scans_per_chain"] = mcfg.burn_scans();
  header["retained_scans_per_chain"] = mcfg.retained_scans();
  header["retained_draws_per_chain"] = mcfg.retained_draws();
  save_draws(draws, out_path(o.common, "draws.csv"), header.dump());

  const auto report = psrf_report(draws);
  const std::string psrf_path = out_path(o.common, "psrf.csv");
  std::ofstream psrf(psrf_path);
  if (!psrf) throw IoError("cannot open for writing: " + psrf_path);
  psrf.precision(17);
  psrf << "# " << header.dump() << "\nparameter,psrf\n";
  for (const auto& entry : report) psrf << entry.name << "," << entry.psrf << "\n";
  std::cout << "wrote draws.csv (" << draws.total_draws() << " draws) and psrf.csv\n";
  return kExitOk;
}

// ------------------------------------------------------------------ assess
struct AssessOpts {
  CommonOpts common;
  std::string fit_path;
  std::string draws_path;
  std::string ref_fit_path;
  std::string ref_draws_path;
  std::string ref_truth_path;
  std::string data_path;
  std::string query_source = "random";
  int queries = 100;
  double query_sd = 0.5;
  int J = 0;
  int outer = kVbOuterDraws;
  int inner = kInnerDraws;
  int mcmc_outer = kMcmcOuterDraws;
  int true_draws = kTruePcdDraws;
};

struct SourceInfo {
  PosteriorSource source;
  int K = 0;
  int J = 0;  // 0 when unknown
  std::string label;
};

SourceInfo load_source(const std::string& fit_path, const std::string& draws_path,
                       const std::string& truth_path) {
  if (!fit_path.empty()) {
    auto bundle = load_fit(fit_path);
    return SourceInfo{VariationalPosterior{bundle.fit.global}, bundle.K, bundle.J,
                      fit_path};
  }
  if (!draws_path.empty()) {
    auto draws = load_draws(draws_path);
    const int k = draws.K;
    return SourceInfo{McmcPosterior{std::move(draws)}, k, 0, draws_path};
  }
  auto truth = load_truth(truth_path);
  const int k = static_cast<int>(truth.zeta.size());
  return SourceInfo{TrueParams{truth.zeta, truth.Omega}, k, 0, truth_path};
}

int pcd_outer(const SourceInfo& info, const AssessOpts& o) {
  if (std::holds_alternative<McmcPosterior>(info.source)) return o.mcmc_outer;
  if (std::holds_alternative<TrueParams>(info.source)) return 1;
  return o.outer;
}

int pcd_inner(const SourceInfo& info, const AssessOpts& o) {
  if (std::holds_alternative<TrueParams>(info.source)) return o.true_draws;
  return o.inner;
}

int run_assess(const AssessOpts& o) {
  json cfg{{"command", "assess"},
           {"fit", o.fit_path},
           {"draws", o.draws_path},
           {"ref_fit", o.ref_fit_path},
           {"ref_draws", o.ref_draws_path},
           {"ref_truth", o.ref_truth_path},
           {"data", o.data_path},
           {"query_source", o.query_source},
           {"queries", o.queries},
           {"query_sd", o.query_sd},
           {"outer", o.outer},
           {"inner", o.inner},
           {"mcmc_outer", o.mcmc_outer},
           {"true_draws", o.true_draws},
           {"seed", o.common.seed}};
  echo_config(cfg);

  if (o.fit_path.empty() && o.draws_path.empty()) {
    throw std::invalid_argument("assess needs --fit or --draws");
  }
  SourceInfo primary = load_source(o.fit_path, o.draws_path, "");
  SourceInfo reference =
      (o.ref_fit_path.empty() && o.ref_draws_path.empty() && o.ref_truth_path.empty())
          ? primary
          : load_source(o.ref_fit_path, o.ref_draws_path, o.ref_truth_path);
  if (primary.K != reference.K) {
    throw std::invalid_argument("source and reference have different K");
  }

  std::vector<PredictiveQuery> queries;
  int J = primary.J > 0 ? primary.J : reference.J;
  if (o.J > 0) J = o.J;
  if (o.query_source == "data") {
    if (o.data_path.empty()) {
      throw std::invalid_argument("--query-source data needs --data");
    }
    const auto dataset = load_dataset(o.data_path);
    if (dataset.K != primary.K) throw std::invalid_argument("dataset K mismatch");
    J = dataset.J;
    RngStream rng = RngStream::derive(o.common.seed, RngDomain::kAssessment, 0xd0ULL, 0);
    for (int q = 0; q < o.queries; ++q) {
      const int h = static_cast<int>(rng.uniform_int(dataset.H()));
      const auto& agent = dataset.agents[h];
      if (agent.events.empty()) {
        --q;
        continue;
      }
      const int t = static_cast<int>(rng.uniform_int(agent.events.size()));
      queries.push_back({agent.events[t].x,
                         "agent" + std::to_string(agent.agent_id) + "_event" +
                             std::to_string(agent.events[t].event_id)});
    }
  } else if (o.query_source == "random") {
    if (J <= 0) {
      throw std::invalid_argument("need --J (or a fit file) for random queries");
    }
    RngStream rng = RngStream::derive(o.common.seed, RngDomain::kAssessment, 0xa1ULL, 1);
    for (int q = 0; q < o.queries; ++q) {
      Matrix x(J, primary.K);
      for (int j = 0; j < J; ++j) {
        for (int k = 0; k < primary.K; ++k) x(j, k) = o.query_sd * rng.normal();
      }
      queries.push_back({std::move(x), "query" + std::to_string(q + 1)});
    }
  } else {
    throw std::invalid_argument("query-source must be data or random");
  }

  std::vector<Vector> p_primary(queries.size()), p_reference(queries.size());
  std::vector<double> tvs(queries.size());
  parallel_for(queries.size(), o.common.threads, [&](std::size_t q) {
    // One substream per query, shared by both sides (common random numbers;
    // a source compared against itself gives exactly zero TV).
    RngStream r1 = RngStream::derive(o.common.seed, RngDomain::kAssessment, 100 + q, 1);
    RngStream r2 = RngStream::derive(o.common.seed, RngDomain::kAssessment, 100 + q, 1);
    p_primary[q] = estimated_pcd(queries[q].x, primary.source, pcd_outer(primary, o),
                                 pcd_inner(primary, o), r1);
    p_reference[q] = estimated_pcd(queries[q].x, reference.source,
                                   pcd_outer(reference, o), pcd_inner(reference, o), r2);
    tvs[q] = tv_distance(p_primary[q], p_reference[q]);
  });

  const std::string tv_path = out_path(o.common, "tv.csv");
  std::ofstream tv_csv(tv_path);
  if (!tv_csv) throw IoError("cannot open for writing: " + tv_path);
  tv_csv.precision(17);
  tv_csv << "# " << cfg.dump() << "\nlabel";
  for (int j = 1; j <= J; ++j) tv_csv << ",p" << j;
  for (int j = 1; j <= J; ++j) tv_csv << ",ref_p" << j;
  tv_csv << ",tv\n";
  for (std::size_t q = 0; q < queries.size(); ++q) {
    tv_csv << queries[q].label;
    for (int j = 0; j < J; ++j) tv_csv << "," << p_primary[q][j];
    for (int j = 0; j < J; ++j) tv_csv << "," << p_reference[q][j];
    tv_csv << "," << tvs[q] << "\n";
  }

  const TvSummary summary = summarize_tv(tvs);
  json out{{"config", cfg},   {"count", summary.count}, {"min", summary.min},
           {"q1", summary.q1}, {"median", summary.median},
           {"mean", summary.mean},
           {"q3", summary.q3}, {"max", summary.max}};
  const std::string summary_path = out_path(o.common, "tv_summary.json");
  std::ofstream summary_json(summary_path);
  if (!summary_json) throw IoError("cannot open for writing: " + summary_path);
  summary_json << out.dump(2) << "\n";
  std::cout << "TV vs " << reference.label << ": mean " << summary.mean << ", max "
            << summary.max << " over " << summary.count << " queries\n";
  return kExitOk;
}

// ----------------------------------------------------------------- compare
struct CompareOpts {
  CommonOpts common;
  std::string data_path;
  int folds = 5;
  std::vector<std::string> backends{"laplace", "ncvmp", "slr"};
  std::string mode = "batch";
  int outer = kVbOuterDraws;
  int inner = kInnerDraws;
};

int run_compare(const CompareOpts& o) {
  json cfg{{"command", "compare"}, {"data", o.data_path}, {"folds", o.folds},
           {"backends", o.backends},
           {"mode", o.mode},       {"outer", o.outer},    {"inner", o.inner},
           {"seed", o.common.seed}};
  echo_config(cfg);

  const auto dataset = load_dataset(o.data_path);
  const Hyperpriors priors = Hyperpriors::vague(dataset.K);
  const auto folds = kfold_split(dataset, o.folds, o.common.seed);

  const std::string out_file = out_path(o.common, "pred_loglik.csv");
  std::ofstream out(out_file);
  if (!out) throw IoError("cannot open for writing: " + out_file);
  out.precision(17);
  out << "# " << cfg.dump() << "\nfold,backend,predictive_loglik,train_seconds\n";

  for (int f = 0; f < o.folds; ++f) {
    ChoiceDataset train;
    train.J = dataset.J;
    train.K = dataset.K;
    std::vector<AgentData> test_agents;
    std::vector<bool> held(dataset.H(), false);
    for (const int h : folds[f]) held[h] = true;
    for (int h = 0; h < dataset.H(); ++h) {
      if (held[h]) {
        test_agents.push_back(dataset.agents[h]);
      } else {
        train.agents.push_back(dataset.agents[h]);
      }
    }
    for (const auto& name : o.backends) {
      BackendConfig backend;
      backend.kind = backend_from_name(name);
      StopConfig stop;
      FitResult fit;
      if (o.mode == "batch") {
        fit = fit_batch(train, priors, backend, stop, o.common.seed, o.common.threads);
      } else {
        fit = fit_svi(train, priors, backend, SviConfig{}, stop, o.common.seed,
                      o.common.threads);
      }
      const double ll =
          predictive_loglik(VariationalPosterior{fit.global}, test_agents, o.outer,
                            o.inner, o.common.seed, o.common.threads);
      out << f + 1 << "," << name << "," << ll << "," << fit.total_seconds << "\n";
      std::cout << "fold " << f + 1 << " " << name << ": predictive log-likelihood "
                << ll << "\n";
    }
  }
  std::cout << "wrote pred_loglik.csv\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian mixed multinomial logit estimation: variational backends, "
               "stochastic variational inference, MCMC reference and assessment"};
  app.require_subcommand(1);
  // Usage: mmnl --config run.toml <subcommand> ...; the file holds
  // [subcommand] sections whose keys are the option names.
  app.set_config("--config", "", "Read option defaults from an INI/TOML file");

  SimulateOpts sim_opts;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic choice dataset");
  add_common(sim, sim_opts.common);
  sim->add_option("--preset", sim_opts.preset, "desk | large-high-het | large-low-het");
  sim->add_option("--H", sim_opts.H, "Agents")->capture_default_str();
  sim->add_option("--J", sim_opts.J, "Alternatives")->capture_default_str();
  sim->add_option("--K", sim_opts.K, "Covariates")->capture_default_str();
  sim->add_option("--T", sim_opts.T, "Events per agent")->capture_default_str();
  sim->add_option("--T-max", sim_opts.T_max, "Upper event count (uniform range)");
  sim->add_option("--omega-scale", sim_opts.omega_scale, "Omega = scale * I")
      ->capture_default_str();
  sim->add_option("--zeta-lo", sim_opts.zeta_lo)->capture_default_str();
  sim->add_option("--zeta-hi", sim_opts.zeta_hi)->capture_default_str();
  sim->add_option("--covariate-sd", sim_opts.covariate_sd)->capture_default_str();

  FitOpts fit_opts;
  auto* fit = app.add_subcommand("fit", "Fit the variational approximation");
  add_common(fit, fit_opts.common);
  fit->add_option("--data", fit_opts.data_path, "Dataset CSV")->required();
  fit->add_option("--backend", fit_opts.backend, "laplace | ncvmp | slr")
      ->capture_default_str();
  fit->add_option("--mode", fit_opts.mode, "batch | svi")->capture_default_str();
  fit->add_option("--xi-threshold", fit_opts.xi_threshold)->capture_default_str();
  fit->add_option("--max-sweeps", fit_opts.max_sweeps)->capture_default_str();
  fit->add_option("--smoothing-window", fit_opts.smoothing_window)
      ->capture_default_str();
  fit->add_option("--slr-iters", fit_opts.slr_iters)->capture_default_str();
  fit->add_option("--slr-weight", fit_opts.slr_weight)->capture_default_str();
  fit->add_option("--batch-size", fit_opts.batch_size, "Initial minibatch size (svi)")
      ->capture_default_str();
  fit->add_option("--alpha", fit_opts.alpha, "Initial stepsize (svi)")
      ->capture_default_str();
  fit->add_option("--phi", fit_opts.phi, "Initial growth threshold (svi)")
      ->capture_default_str();
  fit->add_option("--kappa", fit_opts.kappa, "Batch growth factor (svi)")
      ->capture_default_str();
  fit->add_option("--batch-cap", fit_opts.batch_cap, "Cap on minibatch size, 0 = H")
      ->capture_default_str();
  fit->add_option("--history-window", fit_opts.history_window)->capture_default_str();
  fit->add_option("--alpha-schedule", fit_opts.alpha_schedule, "adaptive | decay")
      ->capture_default_str();

  McmcOpts mcmc_opts;
  auto* mcmc = app.add_subcommand("mcmc", "Run the reference posterior sampler");
  add_common(mcmc, mcmc_opts.common);
  mcmc->add_option("--data", mcmc_opts.data_path, "Dataset CSV")->required();
  mcmc->add_option("--chains", mcmc_opts.chains)->capture_default_str();
  mcmc->add_option("--iters", mcmc_opts.iters)->capture_default_str();
  mcmc->add_option("--thin", mcmc_opts.thin)->capture_default_str();
  mcmc->add_option("--burn-in", mcmc_opts.burn_in)->capture_default_str();
  mcmc->add_option("--rw-scale", mcmc_opts.rw_scale)->capture_default_str();

  AssessOpts assess_opts;
  auto* assess =
      app.add_subcommand("assess", "Predictive choice distributions and TV distances");
  add_common(assess, assess_opts.common);
  assess->add_option("--fit", assess_opts.fit_path, "Fit JSON as the primary source");
  assess->add_option("--draws", assess_opts.draws_path,
                     "Draws CSV as the primary source");
  assess->add_option("--ref-fit", assess_opts.ref_fit_path);
  assess->add_option("--ref-draws", assess_opts.ref_draws_path);
  assess->add_option("--ref-truth", assess_opts.ref_truth_path);
  assess->add_option("--data", assess_opts.data_path, "Dataset for data-driven queries");
  assess->add_option("--query-source", assess_opts.query_source, "random | data")
      ->capture_default_str();
  assess->add_option("--queries", assess_opts.queries)->capture_default_str();
  assess->add_option("--query-sd", assess_opts.query_sd)->capture_default_str();
  assess->add_option("--J", assess_opts.J, "Alternatives for random queries");
  assess->add_option("--outer", assess_opts.outer)->capture_default_str();
  assess->add_option("--inner", assess_opts.inner)->capture_default_str();
  assess->add_option("--mcmc-outer", assess_opts.mcmc_outer)->capture_default_str();
  assess->add_option("--true-draws", assess_opts.true_draws)->capture_default_str();

  CompareOpts compare_opts;
  auto* compare =
      app.add_subcommand("compare", "K-fold predictive log-likelihood across backends");
  add_common(compare, compare_opts.common);
  compare->add_option("--data", compare_opts.data_path, "Dataset CSV")->required();
  compare->add_option("--folds", compare_opts.folds)->capture_default_str();
  compare->add_option("--backends", compare_opts.backends)->delimiter(',');
  compare->add_option("--mode", compare_opts.mode, "batch | svi")->capture_default_str();
  compare->add_option("--outer", compare_opts.outer)->capture_default_str();
  compare->add_option("--inner", compare_opts.inner)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sim->parsed()) return run_simulate(sim_opts);
    if (fit->parsed()) return run_fit(fit_opts);
    if (mcmc->parsed()) return run_mcmc(mcmc_opts);
    if (assess->parsed()) return run_assess(assess_opts);
    if (compare->parsed()) return run_compare(compare_opts);
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const DataFormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitConfig;
}
