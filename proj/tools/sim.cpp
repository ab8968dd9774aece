// Scenario runner: configuration, evolution, snapshots and audit reports.
//
//   sim check-algebra [--verbose] [--seed S]
//   sim run <cfg>     [--out DIR] [--snapshot-every N] [--threads K] [--seed S]
//   sim relax <cfg>   [--out DIR] [--threads K]
//   sim audit <snap...> [--out DIR] [--m M] [--q Q] [--fd-order N]

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "protograv/scenarios.hpp"
#include "protograv/snapshot.hpp"

namespace fs = std::filesystem;
using namespace protograv;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw SimError("cannot open for writing: " + path.string());
  f << text;
}

int cmd_check_algebra(unsigned long long seed, bool verbose, bool corrupt) {
  std::string table;
  const AlgebraReport rep = run_check_algebra(seed, corrupt, verbose ? &table : nullptr);
  if (verbose) std::cout << table;
  std::cout << "anticommutator defect  " << fmt_num(rep.anticommutator_defect) << "\n";
  std::cout << "metric defect          " << fmt_num(rep.metric_defect) << "\n";
  std::cout << "boosted metric defect  " << fmt_num(rep.boost_metric_defect) << "\n";
  std::cout << "current covariance     " << fmt_num(rep.current_covariance_defect) << "\n";
  std::cout << "bilinearity defect     " << fmt_num(rep.bilinearity_defect) << "\n";
  std::cout << (rep.pass ? "PASS" : "FAIL") << "\n";
  return rep.pass ? 0 : 1;
}

int cmd_run(const std::string& cfg_path, const std::string& out_dir, int snapshot_every,
            unsigned long long seed) {
  const Config cfg = parse_config_file(cfg_path);
  fs::create_directories(out_dir);

  if (cfg.scenario == "boost_degeneracy") {
    const BoostReport rep = run_boost_degeneracy(seed);
    write_text(fs::path(out_dir) / "boosts.csv", rep.csv);
    std::cout << "boosts " << rep.n_boosts << "  max residual " << fmt_num(rep.max_residual) << "\n";
    const bool ok = rep.max_residual < 1e-12;
    std::cout << (ok ? "PASS" : "FAIL") << "\n";
    return ok ? 0 : 1;
  }
  if (cfg.scenario == "higgs_relax") {
    const HiggsOutputs out = run_higgs_relax(cfg);
    write_text(fs::path(out_dir) / "relax_log.csv", out.log_csv);
    save_snapshot((fs::path(out_dir) / "relaxed.snap").string(), out.relaxed);
    std::cout << "converged " << (out.result.converged ? "yes" : "no") << " in "
              << out.result.iterations << " iterations\n";
    std::cout << "max |g(lambda) - target| " << fmt_num(out.max_metric_error) << "\n";
    return out.result.converged ? 0 : 1;
  }
  if (cfg.scenario == "einstein_residual") {
    const EinsteinOutputs out = run_einstein_scenario(cfg);
    write_text(fs::path(out_dir) / "einstein.csv", out.report);
    std::cout << out.report;
    return out.flat_identity_exact ? 0 : 1;
  }

  // evolution scenarios
  SnapshotSink sink;
  if (snapshot_every > 0) {
    sink = [&](int step, const StateSlice& st) {
      char name[32];
      std::snprintf(name, sizeof(name), "snap_%06d.snap", step);
      save_snapshot((fs::path(out_dir) / name).string(), st);
    };
  }
  const EvolutionOutputs out = run_evolution_scenario(cfg, snapshot_every, sink);
  write_text(fs::path(out_dir) / "audit.csv", out.audit_csv);
  if (!out.action_csv.empty()) write_text(fs::path(out_dir) / "action.csv", out.action_csv);
  std::cout << "steps " << cfg.steps << "  final t " << fmt_num(out.final_state.time) << "\n";
  std::cout << "constraint defect " << fmt_num(out.final_constraint_defect) << "\n";
  if (!out.trajectory_csv.empty()) {
    write_text(fs::path(out_dir) / "trajectory.csv", out.trajectory_csv);
    std::cout << "track deviation " << fmt_num(out.track_deviation) << "  deflection "
              << fmt_num(out.deflection) << "\n";
  }
  return 0;
}

int cmd_relax(const std::string& cfg_path, const std::string& out_dir) {
  const Config cfg = parse_config_file(cfg_path);
  if (cfg.scenario != "higgs_relax")
    throw ConfigError("relax expects a config with scenario = higgs_relax");
  fs::create_directories(out_dir);
  const HiggsOutputs out = run_higgs_relax(cfg);
  write_text(fs::path(out_dir) / "relax_log.csv", out.log_csv);
  save_snapshot((fs::path(out_dir) / "relaxed.snap").string(), out.relaxed);
  std::cout << "converged " << (out.result.converged ? "yes" : "no") << " in "
            << out.result.iterations << " iterations\n";
  std::cout << "final penalty " << fmt_num(out.result.log.back().penalty) << "\n";
  std::cout << "max |g(lambda) - target| " << fmt_num(out.max_metric_error) << "\n";
  return out.result.converged ? 0 : 1;
}

int cmd_audit(const std::vector<std::string>& snaps, const std::string& out_dir, double m,
              double q, int fd_order) {
  std::vector<StateSlice> slices;
  slices.reserve(snaps.size());
  for (const std::string& path : snaps) slices.push_back(load_snapshot(path));
  const std::string csv = audit_snapshots(slices, m, q, fd_order);
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "audit.csv", csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bilinear Dirac / electromagnetic / proto-gravity lattice simulator"};
  app.require_subcommand(1);

  unsigned long long seed = 12345;
  int threads = 1;
  std::string out_dir = "out";

  auto* check = app.add_subcommand("check-algebra", "run the Clifford identity suite");
  bool verbose = false, corrupt = false;
  check->add_flag("--verbose", verbose, "print the per-(mu,nu) anticommutator table");
  check->add_flag("--self-test-corrupt", corrupt, "corrupt the representation (test hook)")
      ->group("");  // hidden
  check->add_option("--seed", seed, "random seed");

  auto* run = app.add_subcommand("run", "evolve a configured scenario");
  std::string cfg_path;
  int snapshot_every = 0;
  run->add_option("config", cfg_path, "config file path")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--snapshot-every", snapshot_every, "write a snapshot every N steps");
  run->add_option("--threads", threads, "worker threads");
  run->add_option("--seed", seed, "random seed");

  auto* relax = app.add_subcommand("relax", "relax lambda toward the constraint minimum");
  relax->add_option("config", cfg_path, "config file path")->required();
  relax->add_option("--out", out_dir, "output directory");
  relax->add_option("--threads", threads, "worker threads");

  auto* audit = app.add_subcommand("audit", "audit stored snapshots");
  std::vector<std::string> snaps;
  double am = 0.2, aq = 0.0;
  int afd = 2;
  audit->add_option("snapshots", snaps, "snapshot paths (>= 3, consecutive)")->required();
  audit->add_option("--out", out_dir, "output directory");
  audit->add_option("--m", am, "mass used for on-shell time derivatives");
  audit->add_option("--q", aq, "charge coupling");
  audit->add_option("--fd-order", afd, "spatial difference order (2 or 4)");

  CLI11_PARSE(app, argc, argv);

  try {
    set_worker_threads(threads);
    if (check->parsed()) return cmd_check_algebra(seed, verbose, corrupt);
    if (run->parsed()) return cmd_run(cfg_path, out_dir, snapshot_every, seed);
    if (relax->parsed()) return cmd_relax(cfg_path, out_dir);
    if (audit->parsed()) return cmd_audit(snaps, out_dir, am, aq, afd);
  } catch (const SimError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
