#ifndef FLOWPACK_EXPERIMENT_HPP
#define FLOWPACK_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "flowpack/covering.hpp"
#include "flowpack/measures.hpp"
#include "flowpack/packing.hpp"
#include "flowpack/subsets.hpp"

namespace flowpack {

struct LocalEntropyConfig {
  double eps = 0.0;  // 0 uses the last entry of the eps schedule
  std::vector<double> t_list;
  std::size_t samples = 30;
  double dt = 0.0;
};

struct FrostmanConfig {
  std::optional<double> s;  // overrides s_factor * packing estimate
  double s_factor = 0.8;
  double eps = 0.0;         // 0 uses the last entry of the eps schedule
  int p_max = 3;
  double dt = 0.0;
  std::size_t entropy_samples = 30;
  FrostmanOptions options;
};

struct Tolerances {
  double lower_bound = 0.15;
  double prop26 = 0.05;
  double frostman = 0.1;
};

struct ExperimentConfig {
  nlohmann::json system;
  nlohmann::json subset;
  std::vector<double> eps;
  std::pair<double, double> t_window{6.0, 16.0};
  double dt = 0.0;
  std::uint64_t seed = 1;
  std::size_t samples = 2000;
  std::vector<std::string> estimators;
  int packing_restarts = 1;
  PackingOptions packing;
  CoverOptions covering;
  double covering_eta = 0.1;
  std::vector<nlohmann::json> measures;
  LocalEntropyConfig local_entropy;
  std::optional<FrostmanConfig> frostman;
  Tolerances tolerances;
  std::filesystem::path out_dir;
  std::filesystem::path base_dir;  // relative paths resolve against this
};

// Throws ConfigError naming the offending field path.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

std::unique_ptr<Subset> make_subset(const FlowSystem& system, const ExperimentConfig& config);

// Builds a measure from its config entry; throws ConfigError on bad entries.
DiscreteMeasure make_config_measure(const FlowSystem& system, const nlohmann::json& spec,
                                    const std::filesystem::path& base_dir,
                                    std::uint64_t default_seed);

struct Verdict {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs; the check passes iff margin >= 0
  bool pass = false;
  std::vector<std::string> refs;
};

struct EpsResult {
  double eps = 0.0;
  std::optional<EntropyEstimate> packing;
  std::optional<EntropyEstimate> bowen;
  std::string packing_error;
  std::string bowen_error;
};

struct MeasureEntropy {
  std::string id;
  double eps = 0.0;
  std::optional<double> value;
  std::string error;
};

struct FrostmanSummary {
  double s = 0.0;
  double eps = 0.0;
  std::optional<double> achieved;
  double step1_sum = 0.0;
  double unnormalized_mass = 0.0;
  std::size_t atoms = 0;
  std::size_t mass_violations = 0;
  std::size_t invariant_violations = 0;
  std::string error;
};

struct VPReport {
  std::string system;
  std::string subset;
  std::vector<EpsResult> per_eps;
  std::vector<MeasureEntropy> measures;
  std::optional<FrostmanSummary> frostman;
  std::vector<Verdict> verdicts;
  bool estimator_error = false;

  bool all_pass() const;
};

struct Stages {
  bool packing = false;
  bool bowen = false;
  bool local_entropy = false;
  bool frostman = false;
  bool verdicts = false;
};

Stages stages_from_estimators(const std::vector<std::string>& estimators);

// Runs the selected stages, writing CSV files and summary.json into out_dir
// when it is non-empty.
VPReport run_stages(const ExperimentConfig& config, const Stages& stages,
                    const std::filesystem::path& out_dir);

VPReport run_experiment(const ExperimentConfig& config);
VPReport verify_variational_principle(const ExperimentConfig& config);

nlohmann::ordered_json report_to_json(const VPReport& report);

}  // namespace flowpack

#endif
