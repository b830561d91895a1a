// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSONL run log (one object per iteration) and the figure-style CSV series
// and iteration statistics derived from it.

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "agprune/orchestrator.hpp"

namespace agprune {

/// Reports a malformed log line (1-based).
class RunLogError : public Error {
 public:
  RunLogError(std::size_t line, const std::string& what)
      : Error("run log line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Stable key names. wall_time_ms is written only when include_timing is set
/// so that offline runs produce byte-identical logs.
nlohmann::json to_json(const IterationLog& log, bool include_timing = false);
IterationLog iteration_log_from_json(const nlohmann::json& j);

std::vector<IterationLog> read_run_log(const std::filesystem::path& path);

struct RunSummary {
  std::size_t iterations = 0;
  std::size_t successful_iterations = 0;
  std::size_t rollbacks = 0;
  double rollback_rate_pct = 0.0;  // rollbacks / iterations · 100
  double target_sparsity = 0.0;
  double final_sparsity = 0.0;
  double target_achievement_pct = 0.0;
  double ppl_baseline = 0.0;
  double ppl_final = 0.0;
  double ppl_degradation_pct = 0.0;
};

RunSummary summarize(std::span<const IterationLog> logs);
nlohmann::json to_json(const RunSummary& summary);

/// Percentage with one decimal, e.g. "9.5%".
std::string format_pct(double pct);

struct ReportFiles {
  std::filesystem::path sparsity;
  std::filesystem::path perplexity;
  std::filesystem::path sparsity_gain;
  std::filesystem::path ppl_change;
  std::filesystem::path summary;
};

/// Writes sparsity.csv, perplexity.csv, sparsity_gain.csv, ppl_change.csv and
/// summary.json into out_dir. Reads nothing but the supplied records.
ReportFiles write_report(std::span<const IterationLog> logs, const std::filesystem::path& out_dir);

}  // namespace agprune
