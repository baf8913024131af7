#ifndef FLOWPACK_PACKING_HPP
#define FLOWPACK_PACKING_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flowpack/errors.hpp"
#include "flowpack/reparam.hpp"

namespace flowpack {

struct ProbeSet {
  std::string id;
  std::vector<Point> points;
};

struct PackingFamily {
  std::vector<BallSpec> balls;
  std::string probe_set_id;
  double min_t = 0.0;
};

struct EntropyEstimate {
  double value = 0.0;
  double eps = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  double dt = 0.0;
  std::string method;
  double fit_residual = 0.0;
  std::uint64_t seed = 0;
  // Diagnostics.
  double raw_slope = 0.0;
  std::vector<double> t_values;
  std::vector<double> counts;
  std::optional<std::pair<double, double>> critical_bracket;
};

struct PackingOptions {
  ReparamOptions reparam;
  double dt = 0.0;  // 0 selects default_dt(eps)
  double t_spread = 5.0;
  double t_step = 1.0;
  std::size_t probe_count = 5000;
  bool critical_check = true;
  int critical_iterations = 6;
  std::size_t critical_candidates = 1000;
  bool keep_order = false;  // select_family_in_range scans samples in the given order
};

class InsufficientMassError : public Error {
 public:
  InsufficientMassError(const std::string& what, PackingFamily family, double sum)
      : Error(what), best(std::move(family)), best_sum(sum) {}
  PackingFamily best;
  double best_sum;
};

bool balls_disjoint(const FlowSystem& system, const BallSpec& b1, const BallSpec& b2,
                    std::span<const Point> probes, double dt, const ReparamOptions& options = {});

// Probes used are probes.points plus all candidates.
PackingFamily greedy_packing(const FlowSystem& system, std::span<const Point> candidates,
                             double t, double eps, const ProbeSet& probes,
                             std::uint64_t order_seed, double dt = 0.0,
                             const ReparamOptions& options = {});

double packing_sum(const PackingFamily& family, double s);

// Pairwise disjointness of the family on probes.points plus its own centers.
bool revalidate_family(const FlowSystem& system, const PackingFamily& family,
                       const ProbeSet& probes, double dt, const ReparamOptions& options = {});

double estimate_P(const FlowSystem& system, std::span<const Point> Z_samples, double s,
                  double eps, double N, int restarts, std::uint64_t seed,
                  const PackingOptions& options = {});

PackingFamily select_family_in_range(const FlowSystem& system, std::span<const Point> Z_samples,
                                     double s, double eps, double N, double a, double b,
                                     std::uint64_t seed, const PackingOptions& options = {});

EntropyEstimate estimate_packing_entropy(const FlowSystem& system,
                                         std::span<const Point> Z_samples, double eps,
                                         std::pair<double, double> t_window, double dt,
                                         int restarts, std::uint64_t seed,
                                         const PackingOptions& options = {});

struct GrowthFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};

// Least-squares fit of log(count) against t over entries with count >= 1.
GrowthFit fit_log_growth(std::span<const double> t, std::span<const double> counts);

std::vector<double> t_grid(double t_min, double t_max, double step);

}  // namespace flowpack

#endif
