// Command-line front end: single runs, sweeps, trace checks, baseline numbers.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "slim_hbbft/slim_hbbft.hpp"

namespace fs = std::filesystem;
using namespace slim_hbbft;

namespace {

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kUsage = 2;

void print_report(const LemmaReport& r, std::ostream& os) {
  auto line = [&](const char* name, bool v) { os << "  " << name << ": " << (v ? "ok" : "VIOLATED") << "\n"; };
  line("agreement", r.agreement_holds);
  line("totality", r.totality_holds);
  line("validity", r.validity_holds);
  line("lemma1", r.lemma1_holds);
  line("lemma2", r.lemma2_holds);
  line("censorship", r.censorship_ordering_holds);
  line("aba_agreement", r.aba_agreement_holds);
  line("aba_validity", r.aba_validity_holds);
  line("proof_uniqueness", r.proof_uniqueness_holds);
  line("prioritization", r.prioritization_holds);
  os << "  biased_validity_violations: " << r.biased_validity_violations << "\n";
  for (const auto& c : r.counterexamples) {
    os << "counterexample: " << c.property << " at event " << c.event_index << ": " << c.detail << "\n";
  }
}

struct RunArgs {
  std::uint32_t n = 4, f = 1, kappa = 0, batch_size = 1, sec_param = 32, epochs = 1, payload_bytes = 32;
  std::uint32_t promotion_steps = 1;
  std::uint64_t seed = 0, max_steps = 0;
  std::string adversary = "none", scheduler = "fair", trace_out, block_log;
};

int cmd_run(const RunArgs& a) {
  Cell cell{a.n, a.f, a.kappa ? a.kappa : a.f + 1, a.seed, a.adversary, a.epochs, {}};
  cell.spec.sec_param = a.sec_param;
  cell.spec.batch_size = a.batch_size;
  cell.spec.payload_bytes = a.payload_bytes;
  cell.spec.promotion_steps = a.promotion_steps;
  cell.spec.scheduler = a.scheduler;
  cell.spec.max_steps = a.max_steps;
  SimConfig cfg = cell_config(cell);
  SimResult r = simulate(cfg);

  std::ostringstream log;
  for (std::size_t p = 0; p < r.blocks.size(); ++p) {
    for (const auto& b : r.blocks[p]) log << "party=" << p << " " << b.log_line() << "\n";
  }
  if (a.block_log.empty()) {
    std::cout << log.str();
  } else {
    std::ofstream(a.block_log) << log.str();
  }

  std::string jsonl = r.trace.to_jsonl();
  if (!a.trace_out.empty()) {
    fs::path out = a.trace_out;
    if (auto dir = trace_dir_from_env(std::nullopt); dir && !out.is_absolute()) out = *dir / out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream(out) << jsonl;
    std::cout << "trace: " << out.string() << "\n";
  }
  auto metrics = compute_metrics(r.trace);
  auto report = check_lemmas(r.trace);
  std::cout << "steps: " << r.steps << "  messages: " << metrics.total_messages << "  bytes: " << metrics.total_bytes
            << "  baseline: " << metrics.baseline << "  trace digest: " << r.trace.digest().hex() << "\n";
  print_report(report, std::cout);
  if (r.timed_out) {
    std::cout << "liveness timeout after " << r.steps << " steps\n";
    return kViolation;
  }
  return report.all_hold() ? kOk : kViolation;
}

int cmd_sweep(const std::string& config, const std::string& out_dir, bool traces) {
  auto exp = load_experiment(config);
  fs::path out = out_dir;
  fs::create_directories(out);
  auto trace_dir = trace_dir_from_env(traces ? std::optional<fs::path>(out / "traces") : std::nullopt);
  ExperimentResult r;
  try {
    r = run_experiment(exp, trace_dir);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::LivenessTimeout) throw;
    std::cerr << "error: " << e.what() << "\n";
    return kViolation;
  }
  std::ofstream(out / "results.csv") << results_csv(r);
  std::ofstream(out / "phases.csv") << phases_csv(r);

  nlohmann::json summary{{"exponent", r.exponent}, {"cells", r.cells.size()}};
  bool ok = true;
  for (const auto& c : r.cells) ok &= c.lemmas.all_hold() && c.byte_errors.empty();
  for (const auto& s : r.summary) {
    summary["by_n"].push_back({{"n", s.n},
                               {"runs", s.runs},
                               {"mean_bytes_per_epoch", s.mean_bytes},
                               {"baseline_bytes", s.baseline},
                               {"ratio", s.ratio},
                               {"mean_aba_rounds", s.mean_aba_rounds}});
    std::cout << "n=" << s.n << " runs=" << s.runs << " mean_bytes=" << s.mean_bytes << " baseline=" << s.baseline
              << " ratio=" << s.ratio << "\n";
  }
  summary["all_properties_hold"] = ok;
  std::ofstream(out / "summary.json") << summary.dump(2) << "\n";
  std::cout << "cells: " << r.cells.size() << "  exponent: " << r.exponent << "  properties: " << (ok ? "ok" : "VIOLATED")
            << "\n";
  for (const auto& c : r.cells) {
    for (const auto& ce : c.lemmas.counterexamples) {
      std::cout << "counterexample: " << c.cell.id() << " " << ce.property << " at event " << ce.event_index << ": "
                << ce.detail << "\n";
    }
    for (const auto& b : c.byte_errors) std::cout << "byte accounting: " << c.cell.id() << " " << b << "\n";
  }
  return ok ? kOk : kViolation;
}

int cmd_check(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot read " << path << "\n";
    return kUsage;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  Trace t;
  LemmaReport report;
  try {
    t = Trace::from_jsonl(ss.str());
    report = check_lemmas(t);
  } catch (const Error& e) {
    std::cout << "counterexample: malformed trace: " << e.what() << "\n";
    return kViolation;
  }
  std::cout << "events: " << t.events.size() << "\n";
  print_report(report, std::cout);
  return report.all_hold() ? kOk : kViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slim-HBBFT asynchronous atomic broadcast simulator"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one simulation and check its trace");
  run_cmd->add_option("--n", run.n, "Number of parties (3f+1)");
  run_cmd->add_option("--f", run.f, "Fault bound");
  run_cmd->add_option("--kappa", run.kappa, "Committee size (default f+1)");
  run_cmd->add_option("--batch-size", run.batch_size, "Requests per proposal");
  run_cmd->add_option("--payload-bytes", run.payload_bytes, "Bytes per request payload");
  run_cmd->add_option("--sec-param", run.sec_param, "Share/signature size K in bytes");
  run_cmd->add_option("--seed", run.seed, "Master seed");
  run_cmd->add_option("--epochs", run.epochs, "Epochs to run");
  run_cmd->add_option("--promotion-steps", run.promotion_steps, "P-PB steps per promotion (1 or 4)");
  run_cmd->add_option("--adversary", run.adversary, "none|crash|mute|equivocate|withhold|garbage");
  run_cmd->add_option("--scheduler", run.scheduler, "fair|targeted-delay|adversarial");
  run_cmd->add_option("--max-steps", run.max_steps, "Step cap (default 10000*n*epochs)");
  run_cmd->add_option("--trace-out", run.trace_out, "Write the JSONL trace here");
  run_cmd->add_option("--block-log", run.block_log, "Write per-party block log here instead of stdout");

  std::string config, out_dir = "sweep_out";
  bool traces = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an experiment config and write CSVs");
  sweep_cmd->add_option("--config", config, "Experiment config file")->required();
  sweep_cmd->add_option("--out", out_dir, "Output directory");
  sweep_cmd->add_flag("--traces", traces, "Also write every trace");

  std::string trace_path;
  auto* check_cmd = app.add_subcommand("check", "Check a JSONL trace");
  check_cmd->add_option("--trace", trace_path, "Trace file")->required();

  std::uint32_t bn = 4;
  double bv = 256, bk = 32;
  auto* base_cmd = app.add_subcommand("baseline", "Print n^2 v + K n^3 log2 n");
  base_cmd->add_option("--n", bn)->required();
  base_cmd->add_option("--v", bv, "Batch size in bytes")->required();
  base_cmd->add_option("--k", bk, "Security parameter in bytes")->required();

  std::uint32_t kn = 4, kf = 1, kk = 32;
  std::uint64_t kseed = 0;
  std::string kout;
  auto* keygen_cmd = app.add_subcommand("keygen", "Write a dealer key file");
  keygen_cmd->add_option("--n", kn);
  keygen_cmd->add_option("--f", kf);
  keygen_cmd->add_option("--sec-param", kk);
  keygen_cmd->add_option("--seed", kseed);
  keygen_cmd->add_option("--out", kout)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*sweep_cmd) return cmd_sweep(config, out_dir, traces);
    if (*check_cmd) return cmd_check(trace_path);
    if (*base_cmd) {
      std::cout << std::fixed;
      std::cout.precision(1);
      std::cout << baseline_bytes(bn, bv, bk) << "\n";
      return kOk;
    }
    if (*keygen_cmd) {
      validate_params(kn, kf, kf + 1, 1, kk, kseed);
      DealerSetup::generate(kn, kf, kk, kseed).save(kout);
      std::cout << "wrote " << kout << "\n";
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
