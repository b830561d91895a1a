// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "agprune/report.hpp"

#include <cstdio>
#include <fstream>

namespace agprune {

namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

LayerProfile profile_from_json(const json& j) {
  LayerProfile p;
  p.layer = j.at("layer").get<std::string>();
  p.sensitivity = j.at("s").get<double>();
  p.gradient = j.at("g").get<double>();
  p.z_sens = j.at("z_sens").get<double>();
  p.z_grad = j.at("z_grad").get<double>();
  p.sparsity = j.at("sparsity").get<double>();
  return p;
}

}  // namespace

json to_json(const IterationLog& log, bool include_timing) {
  json exchanges = json::array();
  for (const auto& e : log.exchanges) {
    exchanges.push_back(to_json(e));
  }
  json j = {{"iteration", log.iteration},
            {"agent", log.agent},
            {"target_sparsity", log.target_sparsity},
            {"sparsity_before", log.sparsity_before},
            {"sparsity_after", log.sparsity_after},
            {"sparsity_attempted", log.sparsity_attempted},
            {"ppl_before", log.ppl_before},
            {"ppl_after", log.ppl_after},
            {"ppl_attempted", log.ppl_attempted},
            {"rolled_back", log.rolled_back},
            {"gradients_refreshed", log.gradients_refreshed},
            {"profiles", profiles_to_json(log.profiles)},
            {"decision", to_json(log.decision)},
            {"feedback", log.feedback ? to_json(*log.feedback) : json(nullptr)},
            {"agent_exchanges", std::move(exchanges)}};
  if (include_timing) {
    j["wall_time_ms"] = log.wall_time_ms;
  }
  return j;
}

IterationLog iteration_log_from_json(const json& j) {
  IterationLog log;
  log.iteration = j.at("iteration").get<std::size_t>();
  log.agent = j.at("agent").get<std::string>();
  log.target_sparsity = j.at("target_sparsity").get<double>();
  log.sparsity_before = j.at("sparsity_before").get<double>();
  log.sparsity_after = j.at("sparsity_after").get<double>();
  log.sparsity_attempted = j.at("sparsity_attempted").get<double>();
  log.ppl_before = j.at("ppl_before").get<double>();
  log.ppl_after = j.at("ppl_after").get<double>();
  log.ppl_attempted = j.at("ppl_attempted").get<double>();
  log.rolled_back = j.at("rolled_back").get<bool>();
  log.gradients_refreshed = j.at("gradients_refreshed").get<bool>();
  for (const auto& p : j.at("profiles")) {
    log.profiles.push_back(profile_from_json(p));
  }
  log.decision = decision_from_json(j.at("decision"));
  if (!j.at("feedback").is_null()) {
    log.feedback = feedback_from_json(j.at("feedback"));
  }
  for (const auto& e : j.at("agent_exchanges")) {
    log.exchanges.push_back({e.at("attempt").get<int>(), e.at("request").get<std::string>(),
                             e.at("status").get<int>(), e.at("response").get<std::string>(),
                             e.at("error").get<std::string>()});
  }
  log.wall_time_ms = j.value("wall_time_ms", 0.0);
  return log;
}

std::vector<IterationLog> read_run_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open run log '" + path.string() + "'");
  }
  std::vector<IterationLog> logs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      logs.push_back(iteration_log_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw RunLogError(lineno, e.what());
    } catch (const Error& e) {
      throw RunLogError(lineno, e.what());
    }
  }
  return logs;
}

RunSummary summarize(std::span<const IterationLog> logs) {
  RunSummary s;
  s.iterations = logs.size();
  for (const auto& log : logs) {
    s.rollbacks += log.rolled_back ? 1 : 0;
  }
  s.successful_iterations = s.iterations - s.rollbacks;
  if (logs.empty()) {
    return s;
  }
  s.rollback_rate_pct =
      static_cast<double>(s.rollbacks) / static_cast<double>(s.iterations) * 100.0;
  s.target_sparsity = logs.back().target_sparsity;
  s.final_sparsity = logs.back().sparsity_after;
  s.target_achievement_pct =
      s.target_sparsity > 0.0 ? s.final_sparsity / s.target_sparsity * 100.0 : 0.0;
  s.ppl_baseline = logs.front().ppl_before;
  s.ppl_final = logs.back().ppl_after;
  s.ppl_degradation_pct = (s.ppl_final - s.ppl_baseline) / s.ppl_baseline * 100.0;
  return s;
}

std::string format_pct(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", pct);
  return buf;
}

json to_json(const RunSummary& s) {
  return {{"total_iterations", s.iterations},
          {"successful_iterations", s.successful_iterations},
          {"rollbacks", s.rollbacks},
          {"rollback_rate", format_pct(s.rollback_rate_pct)},
          {"rollback_rate_pct", s.rollback_rate_pct},
          {"target_sparsity", s.target_sparsity},
          {"final_sparsity", s.final_sparsity},
          {"target_achievement_pct", s.target_achievement_pct},
          {"ppl_baseline", s.ppl_baseline},
          {"ppl_final", s.ppl_final},
          {"ppl_degradation_pct", s.ppl_degradation_pct}};
}

ReportFiles write_report(std::span<const IterationLog> logs, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  }
  ReportFiles files{out_dir / "sparsity.csv", out_dir / "perplexity.csv",
                    out_dir / "sparsity_gain.csv", out_dir / "ppl_change.csv",
                    out_dir / "report_summary.json"};

  auto sparsity = open_out(files.sparsity);
  auto ppl = open_out(files.perplexity);
  auto gain = open_out(files.sparsity_gain);
  auto change = open_out(files.ppl_change);
  sparsity << "iteration,sparsity_before,sparsity_after,rolled_back\n";
  ppl << "iteration,ppl_before,ppl_after,rolled_back\n";
  gain << "iteration,sparsity_gain,attempted_gain,rolled_back\n";
  change << "iteration,ppl_change_pct,attempted_change_pct,rolled_back\n";
  for (const auto& log : logs) {
    const std::string it = std::to_string(log.iteration);
    const std::string rb = log.rolled_back ? "1" : "0";
    sparsity << it << ',' << num(log.sparsity_before) << ',' << num(log.sparsity_after) << ','
             << rb << '\n';
    ppl << it << ',' << num(log.ppl_before) << ',' << num(log.ppl_after) << ',' << rb << '\n';
    gain << it << ',' << num(log.sparsity_after - log.sparsity_before) << ','
         << num(log.sparsity_attempted - log.sparsity_before) << ',' << rb << '\n';
    change << it << ',' << num((log.ppl_after - log.ppl_before) / log.ppl_before * 100.0) << ','
           << num((log.ppl_attempted - log.ppl_before) / log.ppl_before * 100.0) << ',' << rb
           << '\n';
  }
  auto summary = open_out(files.summary);
  summary << to_json(summarize(logs)).dump(2) << '\n';
  for (auto* s : {&sparsity, &ppl, &gain, &change, &summary}) {
    s->flush();
    if (!*s) {
      throw IoError("failed writing report files in '" + out_dir.string() + "'");
    }
  }
  return files;
}

}  // namespace agprune
