#include "flowpack/covering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ball_engine.hpp"

namespace flowpack {

namespace {

std::string z_probe_id(std::size_t n, std::uint64_t seed) {
  return "Z[" + std::to_string(n) + "]@" + std::to_string(seed);
}

// Maximal greedy packing over the probe pool at duration t, inflated to
// radius 2*eps + delta and checked to cover every pool point.
std::vector<std::size_t> covering_centers(detail::BallEngine& engine,
                                          std::span<const std::size_t> ids, double t, double eps,
                                          double delta, std::span<const std::size_t> order) {
  std::vector<double> durations(ids.size(), t);
  auto scan = detail::greedy_scan(engine, ids, durations, eps, ids, order,
                                  [](std::size_t) { return false; });
  const double radius = 2.0 * eps + delta;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    std::ptrdiff_t slot = scan.blocker[k];
    if (slot == -1) continue;
    bool covered = slot >= 0 &&
                   engine.contains(ids[scan.accepted[static_cast<std::size_t>(slot)]], t, radius,
                                   ids[k]);
    for (std::size_t a = 0; !covered && a < scan.accepted.size(); ++a)
      covered = engine.contains(ids[scan.accepted[a]], t, radius, ids[k]);
    if (!covered)
      throw CoverageError("probe " + std::to_string(k) + " is not covered by the inflated packing",
                          engine.point(ids[k]), k);
  }
  return scan.accepted;
}

}  // namespace

FiveRResult five_r_select(const FlowSystem& system, std::span<const BallSpec> family, double eta,
                          const ProbeSet& probes, const FiveROptions& options) {
  if (!(eta > 0.0 && eta < 1.0)) throw InputError("eta must lie in (0, 1)");
  const double shrink = (1.0 - eta) * (1.0 - eta);
  double min_eps = std::numeric_limits<double>::infinity();
  for (const BallSpec& b : family) {
    if (!(b.t > 1.0 / shrink))
      throw InputError("five_r_select needs every t > 1/(1-eta)^2");
    min_eps = std::min(min_eps, b.eps);
  }
  FiveRResult result;
  result.subfamily.probe_set_id = probes.id;
  result.inflated.target_probe_id = probes.id;
  if (family.empty()) {
    result.inflated.coverage_verified = true;
    return result;
  }
  result.theta = options.theta ? *options.theta
                               : calibrate_theta(system, eta, options.theta_trials,
                                                 options.theta_seed, options.reparam);
  for (const BallSpec& b : family)
    if (!(b.eps < result.theta / 2.0))
      throw InputError("five_r_select needs every eps < theta/2 (theta = " +
                       std::to_string(result.theta) + ")");

  double dt = options.dt > 0.0 ? options.dt : default_dt(min_eps);
  detail::BallEngine engine(system, dt, options.reparam);
  std::vector<std::size_t> centers;
  for (const BallSpec& b : family) centers.push_back(engine.add(b.center));
  std::vector<std::size_t> probe_ids = centers;
  std::vector<std::size_t> outer;
  for (const Point& p : probes.points) {
    outer.push_back(engine.add(p));
    probe_ids.push_back(outer.back());
  }

  std::vector<std::size_t> order(family.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return family[a].t < family[b].t; });
  std::vector<std::size_t> kept;
  for (std::size_t k : order) {
    bool free = true;
    for (std::size_t q : kept) {
      double eps = std::max(family[q].eps, family[k].eps);
      if (!engine.disjoint(centers[q], family[q].t, centers[k], family[k].t, eps, probe_ids)) {
        free = false;
        break;
      }
    }
    if (free) kept.push_back(k);
  }

  result.subfamily.min_t = family[kept.front()].t;
  for (std::size_t k : kept) {
    result.subfamily.balls.push_back(family[k]);
    result.subfamily.balls.back().closed = true;
    result.inflated.balls.push_back(BallSpec{family[k].center, shrink * family[k].t,
                                             5.0 * family[k].eps, false});
  }

  for (std::size_t p = 0; p < outer.size(); ++p) {
    bool inside = false;
    for (std::size_t k = 0; k < family.size() && !inside; ++k)
      inside = engine.contains(centers[k], family[k].t, family[k].eps, outer[p]);
    if (!inside) continue;
    ++result.probes_in_input;
    bool covered = false;
    for (std::size_t q = 0; q < kept.size() && !covered; ++q) {
      const BallSpec& big = result.inflated.balls[q];
      covered = engine.contains(centers[kept[q]], big.t, big.eps, outer[p]);
    }
    if (!covered)
      throw CoverageError("probe " + std::to_string(p) + " lies in the input union but not in "
                          "the inflated union",
                          probes.points[p], p);
  }
  result.inflated.coverage_verified = true;
  return result;
}

CoverFamily cover_from_packing(const FlowSystem& system, std::span<const Point> Z_probes,
                               double t, double eps, double delta, std::uint64_t seed,
                               const CoverOptions& options) {
  if (!(delta > 0.0)) throw InputError("delta must be positive");
  if (!(eps > 0.0)) throw InputError("eps must be positive");
  if (!(t > 0.0)) throw InputError("duration must be positive");
  CoverFamily cover;
  cover.target_probe_id = z_probe_id(Z_probes.size(), seed);
  double dt = options.dt > 0.0 ? options.dt : default_dt(eps);
  detail::BallEngine engine(system, dt, options.reparam);
  engine.set_horizon(t);
  std::vector<std::size_t> ids;
  for (const Point& p : Z_probes) ids.push_back(engine.add(p));
  Rng rng(seed);
  auto order = shuffled_indices(ids.size(), rng);
  for (std::size_t k : covering_centers(engine, ids, t, eps, delta, order))
    cover.balls.push_back(BallSpec{Z_probes[k], t, 2.0 * eps + delta, true});
  cover.coverage_verified = true;
  return cover;
}

double estimate_M(const FlowSystem& system, std::span<const Point> Z_probes, double s,
                  double eps, double N, std::uint64_t seed, const CoverOptions& options) {
  if (!(N >= 1.0)) throw InputError("N must be >= 1");
  if (options.restarts < 1) throw InputError("restarts must be >= 1");
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    CoverFamily cover = cover_from_packing(system, Z_probes, N, eps, options.delta,
                                           mix_seed(seed, static_cast<std::uint64_t>(r)), options);
    best = std::min(best, static_cast<double>(cover.balls.size()) * std::exp(-s * N));
  }
  return best;
}

EntropyEstimate estimate_bowen_entropy(const FlowSystem& system,
                                       std::span<const Point> Z_probes, double eps,
                                       std::pair<double, double> t_window, std::uint64_t seed,
                                       const CoverOptions& options) {
  if (!(eps > 0.0)) throw InputError("eps must be positive");
  auto [t_min, t_max] = t_window;
  if (!(t_min > 0.0) || !(t_max >= t_min + 4.0))
    throw InputError("t window must satisfy t_max >= t_min + 4");
  if (options.restarts < 1) throw InputError("restarts must be >= 1");
  double dt = options.dt > 0.0 ? options.dt : default_dt(eps);

  EntropyEstimate est;
  est.eps = eps;
  est.t_min = t_min;
  est.t_max = t_max;
  est.dt = dt;
  est.method = "bowen-cover";
  est.seed = seed;
  est.t_values = t_grid(t_min, t_max, options.t_step);

  detail::BallEngine engine(system, dt, options.reparam);
  engine.set_horizon(t_max);
  std::vector<std::size_t> ids;
  for (const Point& p : Z_probes) ids.push_back(engine.add(p));
  std::vector<std::vector<std::size_t>> orders;
  for (int r = 0; r < options.restarts; ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    orders.push_back(shuffled_indices(ids.size(), rng));
  }
  for (double t : est.t_values) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (const auto& order : orders)
      best = std::min(best, covering_centers(engine, ids, t, eps, options.delta, order).size());
    est.counts.push_back(static_cast<double>(best));
  }
  std::size_t usable = 0;
  for (double c : est.counts) usable += c >= 1.0;
  if (usable < 3) throw EstimationError("fewer than 3 usable t grid points");

  GrowthFit fit = fit_log_growth(est.t_values, est.counts);
  est.raw_slope = fit.slope;
  est.value = std::max(0.0, fit.slope);
  est.fit_residual = fit.residual;

  // s is subcritical while M^s_N still grows from the first to the last N.
  if (fit.slope > 0.0) {
    double lo = 0.0, hi = 2.0 * fit.slope;
    double c0 = std::log(est.counts.front()), c1 = std::log(est.counts.back());
    for (int it = 0; it < 40; ++it) {
      double mid = 0.5 * (lo + hi);
      if (c1 - mid * est.t_values.back() >= c0 - mid * est.t_values.front()) lo = mid;
      else hi = mid;
    }
    est.critical_bracket = std::make_pair(lo, hi);
  }
  return est;
}

}  // namespace flowpack
