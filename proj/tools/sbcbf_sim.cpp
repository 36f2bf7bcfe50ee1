// Command-line front end: run scenarios, sweep sample counts, certify
// sampled geometry, or just validate a config.
//
// Exit codes: 0 success, 2 parse/validation error, 3 infeasible filter QP,
// 4 runtime/numerical failure.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sbcbf/sbcbf.hpp"

namespace fs = std::filesystem;
using namespace sbcbf;

namespace {

int cmd_run(const std::string& scenario_path, const std::string& out_dir, bool svg,
            bool oracle_check) {
  const ScenarioConfig cfg = load_scenario(scenario_path);
  RunOptions opts;
  opts.oracle_check = oracle_check;
  const TrajectoryLog log = run_scenario(cfg, opts);

  fs::create_directories(out_dir);
  const std::string stem = fs::path(scenario_path).stem().string();
  const std::string csv_path = (fs::path(out_dir) / (stem + ".csv")).string();
  emit_csv(log, csv_path);
  if (svg) emit_svg_plot(log, cfg, (fs::path(out_dir) / (stem + ".svg")).string());

  std::cout << "scenario: " << stem << "\n"
            << "config_hash: " << log.config_hash << "\n"
            << "epsilon_certified: " << log.epsilon_certified << "\n"
            << "records: " << log.records.size() << "\n"
            << "mean_qp_time_s: " << log.mean_qp_time << "\n"
            << "mean_assemble_time_s: " << log.mean_assemble_time << "\n"
            << "csv: " << csv_path << "\n";
  if (log.status == RunStatus::LeftDomain) {
    std::cerr << "error: state left the barrier domain at step " << log.abort_step << "\n";
    return 4;
  }
  if (log.status == RunStatus::InfeasibleSteps) {
    std::cerr << "error: filter QP infeasible on " << log.infeasible_steps << " step(s)\n";
    return 3;
  }
  double min_b = std::numeric_limits<double>::infinity();
  for (const auto& rec : log.records) min_b = std::min(min_b, rec.b);
  std::cout << "min_b: " << min_b << "\n";
  return 0;
}

int cmd_tradeoff(const std::string& scenario_path, const std::string& samples_csv,
                 const std::string& out_dir) {
  const ScenarioConfig cfg = load_scenario(scenario_path);
  std::vector<std::size_t> counts;
  std::stringstream ss(samples_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    counts.push_back(static_cast<std::size_t>(std::stoul(tok)));
  }
  if (counts.empty()) throw ValidationError("--samples list is empty");
  const TradeoffReport report = run_tradeoff(cfg, counts);

  fs::create_directories(out_dir);
  const std::string stem = fs::path(scenario_path).stem().string();
  const std::string csv_path = (fs::path(out_dir) / (stem + "_tradeoff.csv")).string();
  emit_csv(report, csv_path);
  emit_csv(report, std::cout);
  std::cout << "csv: " << csv_path << "\n";
  return 0;
}

int cmd_certify(const std::string& scenario_path) {
  const ScenarioConfig cfg = load_scenario(scenario_path);
  const ScenarioSetup setup = build_setup(cfg);
  std::cout << "body: n=" << setup.body.offset_set.points.size()
            << " rho=" << setup.rho_body << "\n";
  for (std::size_t i = 0; i < setup.obstacle_samples.size(); ++i) {
    const bool is_workspace = i + 1 == setup.obstacle_samples.size();
    std::cout << (is_workspace ? "workspace" : "obstacle") << (is_workspace ? "" : std::to_string(i))
              << ": n=" << setup.obstacle_samples[i].points.size()
              << " rho=" << setup.obstacle_samples[i].rho.value_or(0.0) << "\n";
  }
  std::cout << "epsilon_certified: " << setup.barrier.epsilon << "\n"
            << "gamma: " << setup.barrier.gamma << "\n"
            << "r: " << setup.barrier.r() << "\n"
            << "r_bar: " << setup.barrier.r_bar << "\n"
            << "guaranteed_clearance_m: " << std::sqrt(setup.barrier.gamma) << "\n";
  return 0;
}

int cmd_validate(const std::string& scenario_path) {
  load_scenario(scenario_path);  // throws on any problem
  std::cout << "ok\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampling-based safety-filter simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "out", samples = "50,100,200,400";
  bool svg = false, oracle_check = false;

  auto* run = app.add_subcommand("run", "Simulate a scenario and write CSV/SVG logs");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--out-dir", out_dir, "Output directory");
  run->add_flag("--svg", svg, "Also write an SVG plot");
  run->add_flag("--oracle-check", oracle_check, "Log a dense-resampling distance oracle");

  auto* tradeoff = app.add_subcommand("tradeoff", "Sweep sample counts on one scenario");
  tradeoff->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  tradeoff->add_option("--samples", samples, "Comma-separated sample counts");
  tradeoff->add_option("--out-dir", out_dir, "Output directory");

  auto* certify = app.add_subcommand("certify", "Print the certified sampling bounds");
  certify->add_option("scenario", scenario_path, "Scenario JSON file")->required();

  auto* validate = app.add_subcommand("validate", "Parse and validate a scenario config");
  validate->add_option("scenario", scenario_path, "Scenario JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(scenario_path, out_dir, svg, oracle_check);
    if (tradeoff->parsed()) return cmd_tradeoff(scenario_path, samples, out_dir);
    if (certify->parsed()) return cmd_certify(scenario_path);
    return cmd_validate(scenario_path);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InfeasibleQp& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
