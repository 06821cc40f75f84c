#include "mpforge_cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "mpforge/concentration.hpp"
#include "mpforge/config.hpp"
#include "mpforge/error.hpp"
#include "mpforge/general_recursion.hpp"
#include "mpforge/general_se.hpp"
#include "mpforge/log.hpp"
#include "mpforge/parallel.hpp"
#include "mpforge/serialize.hpp"
#include "mpforge/solvers.hpp"
#include "mpforge/state_evolution.hpp"

namespace mpforge::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_config:
    case ErrorKind::invalid_parameter:
    case ErrorKind::invalid_dimension:
    case ErrorKind::invalid_observation:
    case ErrorKind::unsupported_model: return config_error;
    case ErrorKind::numeric_error: return numeric_failure;
    case ErrorKind::internal_error:
    case ErrorKind::io_error: return failure;
  }
  return failure;
}

void report_error(std::ostream& err, std::string_view kind, const std::string& message, const std::string& field) {
  Json j;
  j["error"] = kind;
  j["message"] = message;
  if (!field.empty()) j["field"] = field;
  err << j.dump() << '\n';
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    report_error(err, to_string(e.kind()), e.what(), e.field());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    report_error(err, "internal-error", e.what(), "");
    return failure;
  }
}

ExperimentConfig load(const Options& opt) {
  ExperimentConfig cfg = opt.config_path.empty() ? ExperimentConfig{} : load_experiment_config(opt.config_path);
  if (opt.seed) cfg.seed = *opt.seed;
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  validate_config(cfg);
  return cfg;
}

std::string prepare_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) fail(ErrorKind::io_error, "cannot create output directory '" + cfg.output_dir + "'", "--out");
  return cfg.output_dir;
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void announce(std::ostream& out, std::string_view command, const std::vector<std::string>& outputs) {
  Json j;
  j["command"] = command;
  j["outputs"] = outputs;
  out << j.dump() << '\n';
}

Provenance provenance(std::string command, const ExperimentConfig& cfg) {
  Provenance p;
  p.command = std::move(command);
  p.config_hash = config_hash(cfg);
  p.seed = cfg.seed;
  return p;
}

SolverConfig run_solver_config(const ExperimentConfig& cfg, std::size_t trial) {
  SolverConfig s = cfg.solver;
  s.max_iters = cfg.iterations;
  s.init_seed = trial_init_seed(cfg.seed, trial);
  return s;
}

// JSONL text of one (size, trial) run
std::string run_one(const ExperimentConfig& cfg, std::int64_t n, std::size_t trial, const Provenance& prov) {
  std::ostringstream os;
  const SolverConfig s = run_solver_config(cfg, trial);
  const RunTag tag{n, trial};
  const ModelSpec& m = cfg.model;
  if (cfg.algorithm == "amp") {
    ProblemInstance inst = sample_iid_gaussian_instance(m, n, cfg.seed, trial);
    write_trace_jsonl(os, run_amp(inst, m.prior, s), tag, prov);
    return os.str();
  }
  ProblemInstance inst = sample_instance(m, n, cfg.seed, trial);
  if (cfg.algorithm == "vamp") {
    write_trace_jsonl(os, run_vamp(inst, m.prior, s), tag, prov);
  } else if (cfg.algorithm == "gvamp") {
    write_trace_jsonl(os, run_gvamp(inst, m.prior, m.channel, s), tag, prov);
  } else if (cfg.algorithm == "general-gvamp") {
    GeneralInputs g = translate_gvamp(inst, m.prior, m.channel, s);
    write_general_jsonl(os, run_general_gvamp(g, cfg.iterations), cfg.algorithm, tag, prov);
  } else {
    GeneralInputs g = translate_vamp(inst, m.prior, s);
    write_general_jsonl(os, run_general_vamp(g, cfg.iterations), cfg.algorithm, tag, prov);
  }
  return os.str();
}

SETrajectory compute_se(const ExperimentConfig& cfg) {
  const SEOptions opts = se_options(cfg);
  const ModelSpec& m = cfg.model;
  if (cfg.algorithm == "amp") return run_se_amp(m, cfg.iterations, cfg.solver, opts);
  if (cfg.algorithm == "vamp") return run_se_vamp(m, se_init(m, cfg.solver), cfg.iterations, cfg.solver, opts);
  if (cfg.algorithm == "gvamp") return run_se_gvamp(m, se_init(m, cfg.solver), cfg.iterations, cfg.solver, opts);
  GeneralKind kind = cfg.algorithm == "general-vamp" ? GeneralKind::vamp : GeneralKind::gvamp;
  return run_se_general(GeneralSeModel::from(m, kind), se_init(m, cfg.solver), cfg.iterations, cfg.solver,
                        general_se_options(cfg));
}

std::string read_file(const std::string& path, const char* field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io_error, "cannot read '" + path + "'", field);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int cmd_run(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load(opt);
    std::string dir = prepare_dir(cfg);
    Provenance prov = provenance("run", cfg);
    std::vector<std::pair<std::int64_t, std::size_t>> tasks;
    for (auto n : cfg.sizes)
      for (int t = 0; t < cfg.trials; ++t) tasks.emplace_back(n, static_cast<std::size_t>(t));
    std::vector<std::string> chunks(tasks.size());
    parallel_for(tasks.size(), opt.workers,
                 [&](std::size_t i) { chunks[i] = run_one(cfg, tasks[i].first, tasks[i].second, prov); });
    std::string text;
    for (const auto& c : chunks) text += c;
    std::string path = join(dir, "trace.jsonl");
    write_text_file(path, text);
    announce(out, "run", {path});
    return static_cast<int>(ok);
  });
}

int cmd_se(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load(opt);
    std::string dir = prepare_dir(cfg);
    SETrajectory se = compute_se(cfg);
    for (const auto& w : se.warnings) log_warn(w);
    std::ostringstream os;
    write_se_csv(os, se);
    std::string path = join(dir, "se.csv");
    write_with_sidecar(path, os.str(), provenance("se", cfg));
    announce(out, "se", {path});
    return static_cast<int>(ok);
  });
}

int cmd_concentrate(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load(opt);
    std::string dir = prepare_dir(cfg);
    Provenance prov = provenance("concentrate", cfg);
    std::vector<TrialRecord> records = run_trials(harness_config(cfg, opt.workers));
    DeviationSummary summary = summarize(records, cfg.epsilons);
    for (const auto& n : summary.notices) log_warn(n);
    std::ostringstream rec, sum;
    write_records_jsonl(rec, records, prov);
    write_summary_csv(sum, summary);
    std::string rpath = join(dir, "records.jsonl"), spath = join(dir, "summary.csv");
    write_text_file(rpath, rec.str());
    write_with_sidecar(spath, sum.str(), prov);
    announce(out, "concentrate", {rpath, spath});
    return static_cast<int>(ok);
  });
}

int cmd_check_translation(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load(opt);
    std::string dir = prepare_dir(cfg);
    const std::int64_t n = cfg.sizes.front();
    ProblemInstance inst = sample_instance(cfg.model, n, cfg.seed, 0);
    SolverConfig s = run_solver_config(cfg, 0);
    bool vamp = cfg.algorithm == "vamp" || cfg.algorithm == "general-vamp";
    TranslationReport rep = vamp ? check_translation_equivalence_vamp(inst, cfg.model.prior, s, cfg.iterations)
                                 : check_translation_equivalence(inst, cfg.model.prior, cfg.model.channel, s,
                                                                 cfg.iterations);
    std::string path = join(dir, "translation.json");
    write_text_file(path, translation_report_json(rep, provenance("check-translation", cfg)));
    announce(out, "check-translation", {path});
    if (!rep.pass) {
      report_error(err, "translation-mismatch",
                   fmt::format("max relative discrepancy {:.3e} exceeds {:.1e}", rep.max_discrepancy, rep.tolerance),
                   "");
      return static_cast<int>(failure);
    }
    return static_cast<int>(ok);
  });
}

int cmd_plotdata(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opt.summary_path.empty()) fail(ErrorKind::invalid_config, "plotdata needs --summary PATH", "--summary");
    std::string text = read_file(opt.summary_path, "--summary");
    std::string dir = opt.out_dir.empty() ? fs::path(opt.summary_path).parent_path().string() : opt.out_dir;
    if (dir.empty()) dir = ".";
    std::error_code ec;
    fs::create_directories(dir, ec);

    Provenance prov;
    prov.command = "plotdata";
    std::string sidecar = opt.summary_path + ".provenance.json";
    if (fs::exists(sidecar)) {
      Json j = Json::parse(read_file(sidecar, "--summary"), nullptr, false);
      if (!j.is_discarded()) {
        prov.config_hash = j.value("config_hash", "");
        prov.seed = j.value("seed", std::uint64_t{0});
      }
    }
    std::vector<std::string> outputs;
    for (const auto& [figure, csv] : plotdata_from_summary(text)) {
      std::string path = join(dir, "plot_" + figure + ".csv");
      write_with_sidecar(path, csv, prov);
      outputs.push_back(path);
    }
    announce(out, "plotdata", outputs);
    return static_cast<int>(ok);
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"mpforge: message-passing solvers, state evolution and concentration experiments"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "Experiment config file");
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--workers", opt.workers, "Worker threads (default: available parallelism)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", opt.out_dir, "Output directory (overrides output.dir)");
  };
  CLI::App* run = app.add_subcommand("run", "Run the configured solver and write trace.jsonl");
  CLI::App* se = app.add_subcommand("se", "Write the state-evolution trajectory to se.csv");
  CLI::App* conc = app.add_subcommand("concentrate", "Run concentration trials, write records and summary");
  CLI::App* tr = app.add_subcommand("check-translation", "Compare a solver with its general-recursion form");
  CLI::App* plot = app.add_subcommand("plotdata", "Convert a summary CSV to long-format plot tables");
  for (CLI::App* sub : {run, se, conc, tr}) add_common(sub);
  plot->add_option("--summary", opt.summary_path, "summary.csv from concentrate")->required();
  plot->add_option("--out", opt.out_dir, "Output directory (default: next to the summary)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error(err, "invalid-config", e.what(), "");
    return static_cast<int>(config_error);
  }
  for (CLI::App* sub : {run, se, conc, tr})
    if (sub->count("--seed")) opt.seed = seed;

  if (*run) return cmd_run(opt, out, err);
  if (*se) return cmd_se(opt, out, err);
  if (*conc) return cmd_concentrate(opt, out, err);
  if (*tr) return cmd_check_translation(opt, out, err);
  return cmd_plotdata(opt, out, err);
}

}  // namespace mpforge::cli
