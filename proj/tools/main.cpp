// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner CLI. Subcommands:
//   run            execute a configured experiment over its seed list
//   params         committee parameter table for (n, f, epsilon) points
//   amortize       amortized-cost series C(r)/r for a configuration
//   impossibility  adversarial-scheduler demonstration and contrast run
//   accept         acceptance experiment suite

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "apmbrb/experiment.hpp"

namespace fs = std::filesystem;
using namespace apmbrb;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
}

int cmd_run(const std::string& config_path, std::vector<std::uint64_t> seeds,
            const std::string& out_dir, bool quiet) {
  ExperimentConfig cfg = ExperimentConfig::from_json(read_file(config_path));
  if (!seeds.empty()) cfg.seeds = seeds;

  bool any_violation = false;
  for (std::uint64_t seed : cfg.seeds) {
    RunTranscript t = run(cfg.to_sim(seed));
    CheckOptions opts;
    opts.require_quiesced = cfg.scheduler != SchedulerKind::kAdversarial;
    CheckReport rep = check_invariants(t, opts);
    if (!rep.ok) any_violation = true;
    if (!quiet) {
      std::cout << "seed " << seed << ": steps=" << t.steps
                << " quiesced=" << (t.quiesced ? "yes" : "no")
                << " deliveries=" << t.deliveries.size() << " honest_bits=" << t.honest_bits
                << " violations=" << rep.violations.size() << "\n";
      for (const auto& v : rep.violations)
        std::cout << "  [" << v.kind << "] node " << v.node << ": " << v.detail << "\n";
    }
    if (!out_dir.empty())
      write_file(fs::path(out_dir) / ("transcript_" + std::to_string(seed) + ".json"),
                 transcript_json(t));
  }
  return any_violation ? 1 : 0;
}

int cmd_params(std::vector<std::string> points, const std::string& out_path) {
  std::vector<ParamsRequest> rows;
  for (const auto& p : points) {
    ParamsRequest r{};
    char comma;
    std::istringstream ss(p);
    if (!(ss >> r.n >> comma >> r.f >> comma >> r.epsilon))
      throw CLI::ValidationError("--point", "expected n,f,epsilon: " + p);
    rows.push_back(r);
  }
  std::string csv = params_table_csv(rows);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    write_file(out_path, csv);
  }
  return 0;
}

int cmd_amortize(const std::string& config_path, std::vector<std::uint64_t> seeds,
                 const std::string& out_dir) {
  ExperimentConfig cfg = ExperimentConfig::from_json(read_file(config_path));
  if (!seeds.empty()) cfg.seeds = seeds;
  int rc = 0;
  for (std::uint64_t seed : cfg.seeds) {
    RunTranscript t = run(cfg.to_sim(seed));
    AmortizationReport rep = amortization_curve(t);
    if (rep.series.empty()) {
      std::cerr << "seed " << seed
                << ": rounds <= phi, amortization unobservable (increase rounds)\n";
      rc = 1;
      continue;
    }
    std::ostringstream csv;
    csv << "r,amortized_bits_per_round\n";
    for (const auto& [r, v] : rep.series) csv << r << ',' << v << '\n';
    if (!out_dir.empty())
      write_file(fs::path(out_dir) / ("amortize_" + std::to_string(seed) + ".csv"), csv.str());
    std::cout << "seed " << seed << ": delta=" << rep.delta_bar << " C(R)/R=" << rep.value_at_end
              << " (ratio " << rep.ratio_end << "), C(phi)/phi ratio 2delta=" << rep.ratio_phi
              << ", plateau_c=" << rep.plateau_constant
              << (rep.decreasing ? "" : " [not decreasing]") << "\n";
  }
  return rc;
}

int cmd_impossibility(std::uint32_t n, std::uint32_t f, std::uint32_t n_c, std::uint64_t budget,
                      std::uint64_t seed, const std::string& out_path) {
  ImpossibilityReport rep = adversarial_demo(n, f, n_c, budget, seed);
  std::string json = rep.to_json();
  if (!out_path.empty()) write_file(out_path, json);
  std::cout << json << "\n";
  return rep.held_at_f ? 0 : 1;
}

int cmd_accept(std::vector<int> only, unsigned threads, const std::string& out_path) {
  auto results = run_acceptance_suite(only, threads, [](const CriterionResult& r) {
    std::cout << (r.pass ? "[PASS]" : "[FAIL]") << " criterion " << r.number << ": " << r.name
              << " (" << r.seconds << "s)\n       " << r.details << "\n";
    std::cout.flush();
  });
  if (!out_path.empty()) {
    std::ostringstream os;
    for (const auto& r : results)
      os << (r.pass ? "PASS" : "FAIL") << "," << r.number << ",\"" << r.name << "\",\""
         << r.details << "\"," << r.seconds << "\n";
    write_file(out_path, os.str());
  }
  return all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Amortized probabilistic multi-shot reliable broadcast: simulator and harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir, out_path;
  std::vector<std::uint64_t> seeds;
  bool quiet = false;

  auto* run_cmd = app.add_subcommand("run", "execute a configured experiment");
  run_cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
  run_cmd->add_option("--seed", seeds, "seed list override");
  run_cmd->add_option("--out", out_dir, "directory for transcript JSON files");
  run_cmd->add_flag("--quiet", quiet, "suppress per-seed summary lines");

  std::vector<std::string> points;
  auto* params_cmd = app.add_subcommand("params", "emit the committee parameter table (CSV)");
  params_cmd->add_option("--point", points, "n,f,epsilon (repeatable)")->required();
  params_cmd->add_option("--out", out_path, "output CSV path (default stdout)");

  auto* amortize_cmd = app.add_subcommand("amortize", "amortized cost series C(r)/r");
  amortize_cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
  amortize_cmd->add_option("--seed", seeds, "seed list override");
  amortize_cmd->add_option("--out", out_dir, "directory for series CSV files");

  std::uint32_t imp_n = 40, imp_f = 13, imp_nc = 9;
  std::uint64_t imp_budget = 100000, imp_seed = 1;
  auto* imp_cmd = app.add_subcommand("impossibility", "adversarial scheduling demonstration");
  imp_cmd->add_option("--n", imp_n, "node count");
  imp_cmd->add_option("--f", imp_f, "fault bound");
  imp_cmd->add_option("--n-c", imp_nc, "committee size (uncapped)");
  imp_cmd->add_option("--budget", imp_budget, "starvation budget in steps");
  imp_cmd->add_option("--seed", imp_seed, "run seed");
  imp_cmd->add_option("--out", out_path, "report JSON path");

  std::vector<int> only;
  unsigned threads = 0;
  auto* accept_cmd = app.add_subcommand("accept", "run the acceptance experiment suite");
  accept_cmd->add_option("--only", only, "criterion numbers (default all)");
  accept_cmd->add_option("--threads", threads, "worker threads (default hardware)");
  accept_cmd->add_option("--out", out_path, "result CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(config_path, seeds, out_dir, quiet);
    if (*params_cmd) return cmd_params(points, out_path);
    if (*amortize_cmd) return cmd_amortize(config_path, seeds, out_dir);
    if (*imp_cmd) return cmd_impossibility(imp_n, imp_f, imp_nc, imp_budget, imp_seed, out_path);
    if (*accept_cmd) return cmd_accept(only, threads, out_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
