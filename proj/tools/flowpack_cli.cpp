#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "flowpack/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitEstimator = 3;
constexpr int kExitVerdict = 4;

struct Invocation {
  std::string config;
  std::string out;
};

int run(const std::string& command, const Invocation& inv) {
  using namespace flowpack;
  ExperimentConfig config;
  try {
    config = load_config(inv.config);
    if (!inv.out.empty()) config.out_dir = inv.out;
    if (config.out_dir.empty()) config.out_dir = "flowpack_out";
    if (command == "verify-vp" && config.measures.empty())
      throw ConfigError("measures", "verify-vp needs at least one measure");
    if (command == "local-entropy" && config.measures.empty())
      throw ConfigError("measures", "local-entropy needs at least one measure");
    if (command == "frostman" && !config.frostman)
      throw ConfigError("frostman", "frostman block is required");
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  }

  VPReport report;
  try {
    if (command == "verify-vp") {
      report = verify_variational_principle(config);
    } else {
      Stages stages;
      stages.packing = command == "estimate-packing";
      stages.bowen = command == "estimate-bowen";
      stages.local_entropy = command == "local-entropy";
      stages.frostman = command == "frostman";
      report = run_stages(config, stages, config.out_dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEstimator;
  }

  for (const auto& r : report.per_eps) {
    if (r.packing) std::cout << "eps " << r.eps << " packing " << r.packing->value << "\n";
    if (!r.packing_error.empty()) std::cout << "eps " << r.eps << " packing error: " << r.packing_error << "\n";
    if (r.bowen) std::cout << "eps " << r.eps << " bowen " << r.bowen->value << "\n";
    if (!r.bowen_error.empty()) std::cout << "eps " << r.eps << " bowen error: " << r.bowen_error << "\n";
  }
  for (const auto& m : report.measures) {
    if (m.value) std::cout << "measure " << m.id << " upper local entropy " << *m.value << "\n";
    else std::cout << "measure " << m.id << " error: " << m.error << "\n";
  }
  if (report.frostman) {
    const auto& f = *report.frostman;
    if (f.achieved)
      std::cout << "frostman s " << f.s << " achieved " << *f.achieved << " atoms " << f.atoms
                << "\n";
    else
      std::cout << "frostman error: " << f.error << "\n";
  }
  for (const auto& v : report.verdicts)
    std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << " margin " << v.margin << "\n";
  std::cout << "results written to " << config.out_dir.string() << "\n";

  if (report.estimator_error) return kExitEstimator;
  if (!report.all_pass()) return kExitVerdict;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Packing and Bowen entropy estimation for flows"};
  app.require_subcommand(1);
  Invocation inv;
  const char* commands[][2] = {
      {"estimate-packing", "Estimate packing entropy over the eps schedule"},
      {"estimate-bowen", "Estimate Bowen entropy over the eps schedule"},
      {"local-entropy", "Upper local entropy of the configured measures"},
      {"frostman", "Run the Frostman-type measure construction"},
      {"verify-vp", "Compare both sides of the variational principle"},
  };
  for (auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", inv.config, "Experiment config (JSON)")->required();
    sub->add_option("--out", inv.out, "Output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  return run(app.get_subcommands().front()->get_name(), inv);
}
