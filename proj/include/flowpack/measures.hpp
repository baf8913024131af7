#ifndef FLOWPACK_MEASURES_HPP
#define FLOWPACK_MEASURES_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "flowpack/packing.hpp"
#include "flowpack/subsets.hpp"

namespace flowpack {

struct Atom {
  Point point;
  double weight = 0.0;
};

struct DiscreteMeasure {
  std::vector<Atom> atoms;
  double total_mass = 0.0;
};

// Validates weights (finite, > 0) and sets total_mass.
DiscreteMeasure make_measure(std::vector<Atom> atoms);
DiscreteMeasure point_mass(const Point& x);
DiscreteMeasure empirical_measure(std::span<const Point> points);
// Empirical measure of `count` draws from system.sample(): the Bernoulli lift
// on shift suspensions, the Lebesgue lift on the torus and cat systems.
DiscreteMeasure lift_measure(const FlowSystem& system, std::size_t count, std::uint64_t seed);
// `count` atoms equally spaced in time along a periodic orbit.
DiscreteMeasure orbit_measure(const FlowSystem& system, const PeriodicOrbit& orbit,
                              std::size_t count);
// w_a * (a / |a|) + w_b * (b / |b|).
DiscreteMeasure mixture(const DiscreteMeasure& a, double w_a, const DiscreteMeasure& b,
                        double w_b);

nlohmann::ordered_json measure_to_json(const FlowSystem& system, const DiscreteMeasure& mu);
DiscreteMeasure measure_from_json(const FlowSystem& system, const nlohmann::json& doc);

double measure_of_ball(const FlowSystem& system, const DiscreteMeasure& mu, const BallSpec& ball,
                       double dt, const ReparamOptions& options = {});

struct LocalEntropy {
  double lower = 0.0;
  double upper = 0.0;
  std::vector<double> t_used;  // t_list snapped to the dt grid, truncated at zero mass
  std::vector<double> u;       // -(1/t) log(mu(B)/|mu|)
};

LocalEntropy local_entropy_at(const FlowSystem& system, const DiscreteMeasure& mu,
                              const Point& x, double eps, std::span<const double> t_list,
                              double dt, const ReparamOptions& options = {});

double upper_local_entropy(const FlowSystem& system, const DiscreteMeasure& mu, double eps,
                           std::span<const double> t_list, std::size_t sample_count,
                           std::uint64_t seed, double dt, const ReparamOptions& options = {});

struct FrostmanState {
  int level = 1;
  std::vector<Point> K;
  std::vector<double> m;
  double gamma = 0.0;
  DiscreteMeasure mu;  // unnormalized, weights exp(-m s)
  double s = 0.0;
  double eps = 0.0;
  std::vector<std::size_t> parent;  // index into the previous level's K (empty at level 1)
};

class ConstructionError : public Error {
 public:
  ConstructionError(const std::string& what, int level, std::optional<std::size_t> parent)
      : Error(what), level(level), parent(parent) {}
  int level;
  std::optional<std::size_t> parent;
};

struct FrostmanOptions {
  PackingOptions packing = [] {
    PackingOptions p;
    p.t_spread = 1.0;
    return p;
  }();
  double n_start = 4.0;          // duration floor tried first at level 1
  double floor_step = 1.0;       // floor increment between attempts
  int floor_attempts = 8;
  std::size_t root_samples = 1500;
  std::size_t node_samples = 256;
  int pool_doublings = 3;         // the pool doubles per floor attempt up to this many times
  std::size_t separation_probes = 4;  // per atom, for the gamma check
  int gamma_halvings = 40;
  // Families are selected disjoint at eps * (1 + select_margin); the margin
  // keeps nearby perturbations of siblings apart, so gamma shrinks less.
  double select_margin = 0.0;
};

struct FrostmanResult {
  DiscreteMeasure measure;  // final level, normalized to mass 1
  std::vector<FrostmanState> history;
  double step1_sum = 0.0;
  double unnormalized_mass = 0.0;
};

FrostmanResult frostman_construct(const FlowSystem& system, const Subset& K, double s, double eps,
                                  int p_max, std::uint64_t seed, double dt,
                                  const FrostmanOptions& options = {});

// Partial product of (1 + 2^-n) over n = 1..terms.
double frostman_constant(int terms = 80);

struct MassViolation {
  int level = 0;
  std::size_t atom = 0;
  int later_level = 0;
  double mass = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

std::vector<MassViolation> check_mass_bounds(const FlowSystem& system,
                                             std::span<const FrostmanState> history, double dt);

// Re-checks every FrostmanState invariant; returns one message per violation.
std::vector<std::string> check_frostman_invariants(const FlowSystem& system,
                                                   std::span<const FrostmanState> history,
                                                   double dt, const ReparamOptions& options = {});

nlohmann::ordered_json frostman_to_json(const FlowSystem& system,
                                        std::span<const FrostmanState> history);

}  // namespace flowpack

#endif
