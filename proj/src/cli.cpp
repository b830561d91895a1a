// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "agprune/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "agprune/config.hpp"
#include "agprune/report.hpp"

namespace agprune {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunFlags {
  std::string config_path;
  std::optional<std::string> agent;
  std::optional<double> target_sparsity;
  std::optional<double> tau;
  std::optional<std::size_t> max_iter;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> accounting;
  std::string out_dir = "agprune_out";
  bool log_timing = false;
  bool fallback = false;
};

struct ReportFlags {
  std::string run_log;
  std::string out_dir;
};

int exit_code(StopReason reason) {
  switch (reason) {
    case StopReason::target_reached: return kExitTargetReached;
    case StopReason::agent_stop: return kExitAgentStop;
    case StopReason::max_iterations: return kExitMaxIterations;
    case StopReason::agent_failure: return kExitAgentFailure;
  }
  return kExitAgentFailure;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out << j.dump(2) << "\n";
  if (!out) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

CliConfig resolve_config(const RunFlags& f) {
  CliConfig c = f.config_path.empty() ? CliConfig{} : load_cli_config(f.config_path);
  if (f.agent) {
    c.agent_mode = parse_agent_mode(*f.agent);
  }
  if (f.target_sparsity) {
    c.run.target_sparsity = *f.target_sparsity;
  }
  if (f.tau) {
    c.run.rollback_threshold = *f.tau;
  }
  if (f.max_iter) {
    c.run.max_iterations = *f.max_iter;
  }
  if (f.seed) {
    c.set_seed(*f.seed);
  }
  if (f.accounting) {
    c.run.accounting = parse_accounting(*f.accounting);
  }
  if (f.log_timing) {
    c.log_timing = true;
  }
  if (f.fallback) {
    c.run.fallback_to_heuristic = true;
  }
  c.validate();
  return c;
}

int cmd_run(const RunFlags& flags, std::ostream& out) {
  const CliConfig config = resolve_config(flags);
  ModelGraph model = build_model(config.model);
  const Corpus corpus = load_corpus(config.corpus, config.model);

  const fs::path dir = flags.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  }
  write_json_file(dir / "config.json", to_json(config));

  std::ofstream log(dir / "run_log.jsonl", std::ios::trunc);
  if (!log) {
    throw IoError("cannot open '" + (dir / "run_log.jsonl").string() + "' for writing");
  }

  std::unique_ptr<Agent> agent;
  if (config.agent_mode == AgentMode::llm) {
    agent = std::make_unique<LlmAgent>(config.endpoint);
  } else {
    agent = std::make_unique<HeuristicAgent>(config.heuristic);
  }

  const auto observer = [&](const IterationLog& entry, const ModelGraph&, const Checkpoint&) {
    log << to_json(entry, config.log_timing).dump() << "\n";
    log.flush();
    if (!log) {
      throw IoError("failed writing the run log");
    }
    char line[160];
    std::snprintf(line, sizeof(line), "iter %3zu  sparsity %.4f  ppl %.4f%s\n", entry.iteration,
                  entry.sparsity_after, entry.ppl_after, entry.rolled_back ? "  (rolled back)" : "");
    out << line;
  };

  const RunResult result = run(config.run, model, corpus, *agent, observer);
  log.close();
  write_container(dir / "final.ckpt", model, result.state.ppl_current, result.state.iteration);

  json failed = json::array();
  for (const auto& x : result.failed_exchanges) {
    failed.push_back(to_json(x));
  }
  const auto& s = result.state;
  json summary = {{"stop_reason", to_string(s.stop_reason)},
                  {"failure", s.failure_message},
                  {"iterations", s.iteration},
                  {"final_sparsity", s.sparsity},
                  {"ppl_baseline", s.ppl_baseline},
                  {"ppl_final", s.ppl_current},
                  {"rollback_count", s.rollback_count},
                  {"prompt_version", kPromptVersion},
                  {"report", to_json(summarize(result.logs))},
                  {"failed_exchanges", std::move(failed)}};
  write_json_file(dir / "summary.json", summary);

  out << "stop: " << to_string(s.stop_reason);
  if (!s.failure_message.empty()) {
    out << " (" << s.failure_message << ")";
  }
  out << "\n";
  return exit_code(s.stop_reason);
}

int cmd_report(const ReportFlags& flags, std::ostream& out) {
  const auto logs = read_run_log(flags.run_log);
  fs::path dir = flags.out_dir;
  if (dir.empty()) {
    dir = fs::path(flags.run_log).parent_path();
    if (dir.empty()) {
      dir = ".";
    }
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  }
  write_report(logs, dir);
  const auto summary = summarize(logs);
  out << "iterations: " << summary.iterations << "\n"
      << "rollback rate: " << format_pct(summary.rollback_rate_pct) << "\n"
      << "target achievement: " << format_pct(summary.target_achievement_pct) << "\n"
      << "ppl degradation: " << format_pct(summary.ppl_degradation_pct) << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Agent-guided pruning of a small transformer language model", "agprune"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Run the pruning loop");
  run_cmd->add_option("--config", run_flags.config_path, "JSON configuration file");
  run_cmd->add_option("--agent", run_flags.agent, "llm | heuristic");
  run_cmd->add_option("--target-sparsity", run_flags.target_sparsity, "Target global sparsity");
  run_cmd->add_option("--tau", run_flags.tau, "Rollback threshold on relative PPL increase");
  run_cmd->add_option("--max-iter", run_flags.max_iter, "Maximum iterations");
  run_cmd->add_option("--seed", run_flags.seed, "Seed for the model, corpus and splits");
  run_cmd->add_option("--accounting", run_flags.accounting, "prunable | all");
  run_cmd->add_option("--out-dir", run_flags.out_dir, "Output directory")->capture_default_str();
  run_cmd->add_flag("--log-timing", run_flags.log_timing, "Record wall time in the run log");
  run_cmd->add_flag("--fallback-heuristic", run_flags.fallback,
                    "Use the heuristic when the agent fails");

  ReportFlags report_flags;
  auto* report_cmd = app.add_subcommand("report", "Summarize a run log into CSV and JSON");
  report_cmd->add_option("run_log", report_flags.run_log, "Path to run_log.jsonl")->required();
  report_cmd->add_option("--out-dir", report_flags.out_dir,
                         "Output directory (defaults to the log's directory)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : kExitConfigError;
  }

  try {
    if (run_cmd->parsed()) {
      return cmd_run(run_flags, out);
    }
    return cmd_report(report_flags, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const RunLogError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const AgentFailure& e) {
    err << "agent failure: " << e.what() << "\n";
    return kExitAgentFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace agprune
