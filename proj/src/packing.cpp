#include "flowpack/packing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ball_engine.hpp"

namespace flowpack {

namespace {

double resolve_dt(double dt, double eps) { return dt > 0.0 ? dt : default_dt(eps); }

// Smallest multiple of dt that is >= t.
double snap_up(double t, double dt) { return dt * std::ceil(t / dt - 1e-9); }

struct Pool {
  detail::BallEngine engine;
  std::vector<std::size_t> ids;    // candidate k -> engine id
  std::vector<std::size_t> probes;  // engine ids used as probes

  Pool(const FlowSystem& system, std::span<const Point> candidates,
       std::span<const Point> extra_probes, double dt, const ReparamOptions& options)
      : engine(system, dt, options) {
    ids.reserve(candidates.size());
    for (const Point& p : candidates) ids.push_back(engine.add(p));
    probes = ids;
    for (const Point& p : extra_probes) probes.push_back(engine.add(p));
  }
};

PackingFamily to_family(const Pool& pool, const detail::GreedyScan& scan,
                        std::span<const double> durations, double eps, std::string probe_id,
                        double min_t) {
  PackingFamily family;
  family.probe_set_id = std::move(probe_id);
  family.min_t = min_t;
  for (std::size_t k : scan.accepted)
    family.balls.push_back(BallSpec{pool.engine.point(pool.ids[k]), durations[k], eps, true});
  return family;
}

std::string z_probe_id(std::size_t n, std::uint64_t seed) {
  return "Z[" + std::to_string(n) + "]@" + std::to_string(seed);
}

std::vector<double> random_durations(std::size_t n, double N, double spread, double dt,
                                     std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> d(n);
  for (auto& t : d) t = std::max(snap_up(N, dt), snap_up(N + spread * uniform01(rng), dt));
  return d;
}

void validate_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InputError("eps must be positive");
}

}  // namespace

bool balls_disjoint(const FlowSystem& system, const BallSpec& b1, const BallSpec& b2,
                    std::span<const Point> probes, double dt, const ReparamOptions& options) {
  if (probes.empty()) throw InputError("balls_disjoint needs a nonempty probe set");
  detail::BallEngine engine(system, dt, options);
  std::size_t c1 = engine.add(b1.center);
  std::size_t c2 = engine.add(b2.center);
  std::vector<std::size_t> ids;
  for (const Point& p : probes) ids.push_back(engine.add(p));
  double eps = std::max(b1.eps, b2.eps);
  return engine.disjoint(c1, b1.t, c2, b2.t, eps, ids);
}

PackingFamily greedy_packing(const FlowSystem& system, std::span<const Point> candidates,
                             double t, double eps, const ProbeSet& probes,
                             std::uint64_t order_seed, double dt,
                             const ReparamOptions& options) {
  validate_eps(eps);
  if (!(t > 0.0)) throw InputError("duration must be positive");
  PackingFamily family;
  family.probe_set_id = probes.id;
  family.min_t = t;
  if (candidates.empty()) return family;
  dt = resolve_dt(dt, eps);
  Pool pool(system, candidates, probes.points, dt, options);
  pool.engine.set_horizon(t);
  std::vector<double> durations(candidates.size(), t);
  Rng rng(order_seed);
  auto order = shuffled_indices(candidates.size(), rng);
  auto scan = detail::greedy_scan(pool.engine, pool.ids, durations, eps, pool.probes, order,
                                  [](std::size_t) { return false; });
  if (!detail::verify_maximal(pool.engine, scan, pool.ids, durations, eps, pool.probes))
    throw std::logic_error("greedy packing failed its maximality check");
  return to_family(pool, scan, durations, eps, probes.id, t);
}

double packing_sum(const PackingFamily& family, double s) {
  double sum = 0.0;
  for (const BallSpec& b : family.balls) sum += std::exp(-s * b.t);
  return sum;
}

bool revalidate_family(const FlowSystem& system, const PackingFamily& family,
                       const ProbeSet& probes, double dt, const ReparamOptions& options) {
  if (family.probe_set_id != probes.id) return false;
  for (const BallSpec& b : family.balls)
    if (b.t < family.min_t - 1e-9) return false;
  std::vector<Point> centers;
  for (const BallSpec& b : family.balls) centers.push_back(b.center);
  Pool pool(system, centers, probes.points, dt, options);
  for (std::size_t i = 0; i < family.balls.size(); ++i)
    for (std::size_t j = i + 1; j < family.balls.size(); ++j) {
      double eps = std::max(family.balls[i].eps, family.balls[j].eps);
      if (!pool.engine.disjoint(pool.ids[i], family.balls[i].t, pool.ids[j], family.balls[j].t,
                                eps, pool.probes))
        return false;
    }
  return true;
}

double estimate_P(const FlowSystem& system, std::span<const Point> Z_samples, double s,
                  double eps, double N, int restarts, std::uint64_t seed,
                  const PackingOptions& options) {
  validate_eps(eps);
  if (!(N >= 1.0)) throw InputError("N must be >= 1");
  if (restarts < 1) throw InputError("restarts must be >= 1");
  if (!(s >= 0.0)) throw InputError("s must be >= 0");
  if (Z_samples.empty()) return 0.0;
  double dt = resolve_dt(options.dt, eps);
  Pool pool(system, Z_samples, {}, dt, options.reparam);
  pool.engine.set_horizon(N + options.t_spread + dt);
  double best = 0.0;
  for (int r = 0; r < restarts; ++r) {
    auto durations = random_durations(Z_samples.size(), N, options.t_spread, dt,
                                      mix_seed(seed, 2 * static_cast<std::uint64_t>(r) + 1));
    Rng rng(mix_seed(seed, 2 * static_cast<std::uint64_t>(r)));
    auto order = shuffled_indices(Z_samples.size(), rng);
    auto scan = detail::greedy_scan(pool.engine, pool.ids, durations, eps, pool.probes, order,
                                    [](std::size_t) { return false; });
    double sum = 0.0;
    for (std::size_t k : scan.accepted) sum += std::exp(-s * durations[k]);
    best = std::max(best, sum);
  }
  return best;
}

PackingFamily select_family_in_range(const FlowSystem& system, std::span<const Point> Z_samples,
                                     double s, double eps, double N, double a, double b,
                                     std::uint64_t seed, const PackingOptions& options) {
  validate_eps(eps);
  if (!(a >= 0.0 && a < b)) throw InputError("need 0 <= a < b");
  if (!(s >= 0.0)) throw InputError("s must be >= 0");
  if (s == 0.0 && b - a <= 1.0) throw InputError("no duration makes a single weight below b - a");
  double dt = resolve_dt(options.dt, eps);
  double n1 = std::max(N, dt);
  if (s > 0.0 && b - a <= 1.0) {
    double need = -std::log(b - a) / s;
    if (n1 <= need) n1 = dt * (std::floor(need / dt) + 1.0);
  }
  n1 = snap_up(n1, dt);
  while (s > 0.0 && std::exp(-s * n1) >= b - a) n1 += dt;

  std::string probe_id = z_probe_id(Z_samples.size(), seed);
  if (Z_samples.empty())
    throw InputError("select_family_in_range needs samples");

  Pool pool(system, Z_samples, {}, dt, options.reparam);
  pool.engine.set_horizon(n1 + options.t_spread + dt);
  auto durations = random_durations(Z_samples.size(), n1, options.t_spread, dt, mix_seed(seed, 1));
  Rng rng(mix_seed(seed, 0));
  std::vector<std::size_t> order(Z_samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!options.keep_order) order = shuffled_indices(Z_samples.size(), rng);
  double sum = 0.0;
  auto scan = detail::greedy_scan(pool.engine, pool.ids, durations, eps, pool.probes, order,
                                  [&](std::size_t k) {
                                    sum += std::exp(-s * durations[k]);
                                    return sum > b;
                                  });
  // Each weight is below b - a, so dropping the latest ones while the sum is
  // still >= b lands strictly inside (a, b).
  while (sum >= b && !scan.accepted.empty()) {
    sum -= std::exp(-s * durations[scan.accepted.back()]);
    scan.accepted.pop_back();
  }
  PackingFamily family = to_family(pool, scan, durations, eps, probe_id, n1);
  sum = packing_sum(family, s);
  if (!(sum > a) || !(sum < b))
    throw InsufficientMassError("insufficient packing mass: best sum " + std::to_string(sum) +
                                    " does not exceed " + std::to_string(a),
                                std::move(family), sum);
  return family;
}

GrowthFit fit_log_growth(std::span<const double> t, std::span<const double> counts) {
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (counts[k] >= 1.0) {
      xs.push_back(t[k]);
      ys.push_back(std::log(counts[k]));
    }
  GrowthFit fit;
  if (xs.size() < 2) return fit;
  double n = static_cast<double>(xs.size());
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    double e = ys[k] - (fit.intercept + fit.slope * xs[k]);
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

std::vector<double> t_grid(double t_min, double t_max, double step) {
  if (!(step > 0.0)) throw InputError("t step must be positive");
  std::vector<double> ts;
  for (int k = 0;; ++k) {
    double t = t_min + k * step;
    if (t > t_max + 1e-9) break;
    ts.push_back(t);
  }
  return ts;
}

EntropyEstimate estimate_packing_entropy(const FlowSystem& system,
                                         std::span<const Point> Z_samples, double eps,
                                         std::pair<double, double> t_window, double dt,
                                         int restarts, std::uint64_t seed,
                                         const PackingOptions& options) {
  validate_eps(eps);
  auto [t_min, t_max] = t_window;
  if (!(t_min > 0.0) || !(t_max >= t_min + 4.0))
    throw InputError("t window must satisfy t_max >= t_min + 4");
  if (restarts < 1) throw InputError("restarts must be >= 1");
  dt = resolve_dt(dt, eps);

  EntropyEstimate est;
  est.eps = eps;
  est.t_min = t_min;
  est.t_max = t_max;
  est.dt = dt;
  est.method = "packing-growth";
  est.seed = seed;
  est.t_values = t_grid(t_min, t_max, options.t_step);

  Pool pool(system, Z_samples, {}, dt, options.reparam);
  pool.engine.set_horizon(t_max);
  std::vector<std::vector<std::size_t>> orders;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    orders.push_back(shuffled_indices(Z_samples.size(), rng));
  }
  for (double t : est.t_values) {
    std::vector<double> durations(Z_samples.size(), t);
    std::size_t best = 0;
    for (const auto& order : orders) {
      auto scan = detail::greedy_scan(pool.engine, pool.ids, durations, eps, pool.probes, order,
                                      [](std::size_t) { return false; });
      best = std::max(best, scan.accepted.size());
    }
    est.counts.push_back(static_cast<double>(best));
  }
  std::size_t usable = 0;
  for (double c : est.counts) usable += c >= 1.0;
  if (usable < 3) throw EstimationError("fewer than 3 usable t grid points");

  GrowthFit fit = fit_log_growth(est.t_values, est.counts);
  est.raw_slope = fit.slope;
  est.value = std::max(0.0, fit.slope);
  est.fit_residual = fit.residual;

  if (options.critical_check && fit.slope > 0.0 && options.critical_iterations > 0) {
    Rng rng(mix_seed(seed, 977));
    auto pick = shuffled_indices(Z_samples.size(), rng);
    pick.resize(std::min(pick.size(), options.critical_candidates));
    std::vector<Point> subset;
    for (std::size_t k : pick) subset.push_back(Z_samples[k]);
    PackingOptions sub = options;
    sub.dt = dt;
    double lo = 0.0, hi = 2.0 * fit.slope;
    for (int it = 0; it < options.critical_iterations; ++it) {
      double mid = 0.5 * (lo + hi);
      try {
        select_family_in_range(system, subset, mid, eps, t_max, 1.0, 2.0, seed, sub);
        lo = mid;
      } catch (const InsufficientMassError&) {
        hi = mid;
      }
    }
    est.critical_bracket = std::make_pair(lo, hi);
  }
  return est;
}

}  // namespace flowpack
