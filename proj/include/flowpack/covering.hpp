#ifndef FLOWPACK_COVERING_HPP
#define FLOWPACK_COVERING_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flowpack/packing.hpp"

namespace flowpack {

struct CoverFamily {
  std::vector<BallSpec> balls;
  std::string target_probe_id;
  bool coverage_verified = false;
};

class CoverageError : public Error {
 public:
  CoverageError(const std::string& what, Point p, std::size_t index)
      : Error(what), witness(p), witness_index(index) {}
  Point witness;
  std::size_t witness_index;
};

struct FiveROptions {
  ReparamOptions reparam;
  double dt = 0.0;                  // 0 selects default_dt(min eps)
  std::optional<double> theta;      // skips calibration when set
  int theta_trials = 200;
  std::uint64_t theta_seed = 1;
};

struct FiveRResult {
  PackingFamily subfamily;
  CoverFamily inflated;
  double theta = 0.0;
  std::size_t probes_in_input = 0;  // probes covered by the input union
};

FiveRResult five_r_select(const FlowSystem& system, std::span<const BallSpec> family, double eta,
                          const ProbeSet& probes, const FiveROptions& options = {});

struct CoverOptions {
  ReparamOptions reparam;
  double dt = 0.0;
  double delta = 0.01;
  int restarts = 1;
  double t_step = 1.0;
};

CoverFamily cover_from_packing(const FlowSystem& system, std::span<const Point> Z_probes,
                               double t, double eps, double delta, std::uint64_t seed,
                               const CoverOptions& options = {});

double estimate_M(const FlowSystem& system, std::span<const Point> Z_probes, double s,
                  double eps, double N, std::uint64_t seed, const CoverOptions& options = {});

EntropyEstimate estimate_bowen_entropy(const FlowSystem& system,
                                       std::span<const Point> Z_probes, double eps,
                                       std::pair<double, double> t_window, std::uint64_t seed,
                                       const CoverOptions& options = {});

}  // namespace flowpack

#endif
