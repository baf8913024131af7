#include "flowpack/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ball_engine.hpp"

namespace flowpack {

namespace {

std::vector<Feature> origin_features(const FlowSystem& system, const DiscreteMeasure& mu) {
  std::vector<Feature> out;
  out.reserve(mu.atoms.size());
  for (const Atom& a : mu.atoms) out.push_back(system.feature(a.point));
  return out;
}

std::size_t grid_steps(double t, double dt) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t / dt)));
}

// mass[r] = total weight of atoms whose alignment with x reaches exactly r
// leading columns (r <= max_columns).
std::vector<double> mass_by_reach(const FlowSystem& system, const DiscreteMeasure& mu,
                                  std::span<const Feature> origins, const Point& x, double eps,
                                  double dt, const ReparamOptions& options,
                                  std::size_t max_columns) {
  std::vector<double> mass(max_columns + 1, 0.0);
  FeatureTrack center(system, x, dt);
  const Feature c0 = center.at(0);
  const double bound = eps + kDistanceSlack;
  auto center_at = [&](std::size_t i) -> const Feature& { return center.at(i); };
  auto limit_at = [&](std::size_t j) {
    return row_limit_for(static_cast<double>(j) * dt, dt, options.eta_margin);
  };
  for (std::size_t k = 0; k < mu.atoms.size(); ++k) {
    if (!system.within(c0, origins[k], bound)) continue;
    const Point& y = mu.atoms[k].point;
    auto other_at = [&](std::size_t j) -> Feature {
      return j == 0 ? origins[k] : system.feature(system.evaluate(y, static_cast<double>(j) * dt));
    };
    std::size_t r = alignment_reach(system, center_at, other_at, limit_at, max_columns, eps);
    mass[r] += mu.atoms[k].weight;
  }
  return mass;
}

LocalEntropy local_entropy_from(const FlowSystem& system, const DiscreteMeasure& mu,
                                std::span<const Feature> origins, const Point& x, double eps,
                                std::span<const double> t_list, double dt,
                                const ReparamOptions& options) {
  if (t_list.size() < 3) throw InputError("t_list needs at least 3 entries");
  for (std::size_t k = 0; k < t_list.size(); ++k) {
    if (!(t_list[k] > 0.0)) throw InputError("t_list entries must be positive");
    if (k > 0 && !(t_list[k] > t_list[k - 1])) throw InputError("t_list must be increasing");
  }
  if (!(eps > 0.0)) throw InputError("eps must be positive");
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  if (mu.atoms.empty()) throw InputError("measure has no atoms");

  std::vector<std::size_t> steps;
  for (double t : t_list) steps.push_back(grid_steps(t, dt));
  auto mass = mass_by_reach(system, mu, origins, x, eps, dt, options, steps.back() + 1);
  // inside[r] = mass of atoms reaching at least r columns.
  std::vector<double> inside(mass.size() + 1, 0.0);
  for (std::size_t r = mass.size(); r-- > 0;) inside[r] = inside[r + 1] + mass[r];

  LocalEntropy out;
  for (std::size_t n : steps) {
    double m = inside[n + 1];
    if (!(m > 0.0)) break;
    double t = static_cast<double>(n) * dt;
    out.t_used.push_back(t);
    out.u.push_back(std::max(0.0, -std::log(std::min(1.0, m / mu.total_mass)) / t));
  }
  if (out.u.empty()) throw EstimationError("atomless at center: every ball has measure 0");
  auto tail = out.u.begin() + static_cast<std::ptrdiff_t>(out.u.size() / 2);
  out.lower = *std::min_element(tail, out.u.end());
  out.upper = *std::max_element(tail, out.u.end());
  return out;
}

}  // namespace

DiscreteMeasure make_measure(std::vector<Atom> atoms) {
  DiscreteMeasure mu;
  for (const Atom& a : atoms)
    if (!(a.weight > 0.0) || !std::isfinite(a.weight))
      throw InputError("atom weights must be positive and finite");
  mu.atoms = std::move(atoms);
  mu.total_mass = 0.0;
  for (const Atom& a : mu.atoms) mu.total_mass += a.weight;
  return mu;
}

DiscreteMeasure point_mass(const Point& x) { return make_measure({Atom{x, 1.0}}); }

DiscreteMeasure empirical_measure(std::span<const Point> points) {
  if (points.empty()) throw InputError("empirical measure needs points");
  std::vector<Atom> atoms;
  const double w = 1.0 / static_cast<double>(points.size());
  for (const Point& p : points) atoms.push_back(Atom{p, w});
  return make_measure(std::move(atoms));
}

DiscreteMeasure lift_measure(const FlowSystem& system, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw InputError("lift measure needs at least one atom");
  Rng rng(seed);
  std::vector<Point> pts;
  pts.reserve(count);
  for (std::size_t k = 0; k < count; ++k) pts.push_back(system.sample(rng));
  return empirical_measure(pts);
}

DiscreteMeasure orbit_measure(const FlowSystem& system, const PeriodicOrbit& orbit,
                              std::size_t count) {
  if (count == 0) throw InputError("orbit measure needs at least one atom");
  std::vector<Point> pts;
  for (std::size_t k = 0; k < count; ++k)
    pts.push_back(system.evaluate(
        orbit.start, orbit.period * static_cast<double>(k) / static_cast<double>(count)));
  return empirical_measure(pts);
}

DiscreteMeasure mixture(const DiscreteMeasure& a, double w_a, const DiscreteMeasure& b,
                        double w_b) {
  if (!(w_a > 0.0) || !(w_b > 0.0)) throw InputError("mixture weights must be positive");
  std::vector<Atom> atoms;
  for (const Atom& x : a.atoms) atoms.push_back(Atom{x.point, w_a * x.weight / a.total_mass});
  for (const Atom& x : b.atoms) atoms.push_back(Atom{x.point, w_b * x.weight / b.total_mass});
  return make_measure(std::move(atoms));
}

nlohmann::ordered_json measure_to_json(const FlowSystem& system, const DiscreteMeasure& mu) {
  nlohmann::ordered_json doc;
  doc["system"] = system.name();
  doc["total_mass"] = mu.total_mass;
  auto& atoms = doc["atoms"] = nlohmann::ordered_json::array();
  for (const Atom& a : mu.atoms) {
    nlohmann::ordered_json atom;
    atom["chart"] = system.to_chart(a.point);
    atom["weight"] = a.weight;
    atoms.push_back(std::move(atom));
  }
  return doc;
}

DiscreteMeasure measure_from_json(const FlowSystem& system, const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("atoms") || !doc["atoms"].is_array())
    throw InputError("measure document needs an 'atoms' array");
  std::vector<Atom> atoms;
  for (const auto& a : doc["atoms"]) {
    if (!a.contains("chart") || !a.contains("weight") || !a["weight"].is_number())
      throw InputError("each atom needs 'chart' and numeric 'weight'");
    atoms.push_back(Atom{system.from_chart(a["chart"]), a["weight"].get<double>()});
  }
  return make_measure(std::move(atoms));
}

double measure_of_ball(const FlowSystem& system, const DiscreteMeasure& mu, const BallSpec& ball,
                       double dt, const ReparamOptions& options) {
  if (mu.atoms.empty()) throw InputError("measure has no atoms");
  if (!(ball.eps > 0.0) || !(ball.t > 0.0)) throw InputError("ball needs t > 0 and eps > 0");
  detail::BallEngine engine(system, dt, options);
  FeatureTrack center(system, ball.center, dt);
  const double bound = ball.eps + kDistanceSlack;
  double sum = 0.0;
  for (const Atom& a : mu.atoms) {
    if (!system.within(center.at(0), system.feature(a.point), bound)) continue;
    FeatureTrack other(system, a.point, dt);
    if (engine.contains(center, ball.t, ball.eps, other)) sum += a.weight;
  }
  return sum;
}

LocalEntropy local_entropy_at(const FlowSystem& system, const DiscreteMeasure& mu,
                              const Point& x, double eps, std::span<const double> t_list,
                              double dt, const ReparamOptions& options) {
  auto origins = origin_features(system, mu);
  return local_entropy_from(system, mu, origins, x, eps, t_list, dt, options);
}

double upper_local_entropy(const FlowSystem& system, const DiscreteMeasure& mu, double eps,
                           std::span<const double> t_list, std::size_t sample_count,
                           std::uint64_t seed, double dt, const ReparamOptions& options) {
  if (sample_count == 0) throw InputError("sample_count must be >= 1");
  if (mu.atoms.empty()) throw InputError("measure has no atoms");
  auto origins = origin_features(system, mu);
  std::vector<double> cumulative(mu.atoms.size());
  double run = 0.0;
  for (std::size_t k = 0; k < mu.atoms.size(); ++k) cumulative[k] = run += mu.atoms[k].weight;
  Rng rng(seed);
  double sum = 0.0;
  for (std::size_t n = 0; n < sample_count; ++n) {
    double target = uniform01(rng) * run;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                          mu.atoms.size() - 1);
    sum += local_entropy_from(system, mu, origins, mu.atoms[k].point, eps, t_list, dt, options)
               .upper;
  }
  return sum / static_cast<double>(sample_count);
}

double frostman_constant(int terms) {
  double c = 1.0;
  for (int n = 1; n <= terms; ++n) c *= 1.0 + std::ldexp(1.0, -n);
  return c;
}

namespace {

struct LevelBuild {
  std::vector<Point> K;
  std::vector<double> m;
  std::vector<std::size_t> parent;
};

// Farthest-point order starting from pool[0], so that the accepted children are
// spread out and the next separation scale stays large.
void spread_order(const FlowSystem& system, std::vector<Point>& pool) {
  const std::size_t n = pool.size();
  if (n < 3) return;
  std::vector<Feature> f;
  f.reserve(n);
  for (const Point& p : pool) f.push_back(system.feature(p));
  std::vector<double> gap(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> order{0};
  std::vector<char> used(n, 0);
  used[0] = 1;
  for (std::size_t step = 1; step < n; ++step) {
    const Feature& last = f[order.back()];
    std::size_t pick = n;
    for (std::size_t k = 0; k < n; ++k) {
      if (used[k]) continue;
      gap[k] = std::min(gap[k], system.distance(last, f[k]));
      if (pick == n || gap[k] > gap[pick]) pick = k;
    }
    used[pick] = 1;
    order.push_back(pick);
  }
  std::vector<Point> sorted;
  sorted.reserve(n);
  for (std::size_t k : order) sorted.push_back(pool[k]);
  pool = std::move(sorted);
}

// select_family_in_range with a ladder of rising duration floors and pool sizes.
PackingFamily select_with_ladder(const FlowSystem& system, const Subset& K,
                                 const Point* near, double radius, double s, double eps,
                                 double floor, double a, double b, std::uint64_t seed,
                                 const PackingOptions& packing, const FrostmanOptions& options,
                                 int level, std::optional<std::size_t> parent) {
  Rng rng(mix_seed(seed, 0));
  double best = 0.0;
  for (int attempt = 0; attempt < options.floor_attempts; ++attempt) {
    std::size_t base = near ? options.node_samples : options.root_samples;
    std::size_t count = base << std::min(attempt, options.pool_doublings);
    std::vector<Point> pool;
    if (near) {
      pool.push_back(*near);
      auto more = K.draw_near(*near, radius, count, rng);
      pool.insert(pool.end(), more.begin(), more.end());
    } else {
      pool = K.draw(count, rng);
    }
    if (pool.empty()) break;
    spread_order(system, pool);
    try {
      return select_family_in_range(system, pool, s, eps * (1.0 + options.select_margin),
                                    floor + options.floor_step * static_cast<double>(attempt), a,
                                    b, mix_seed(seed, 1 + static_cast<std::uint64_t>(attempt)),
                                    packing);
    } catch (const InsufficientMassError& e) {
      best = std::max(best, e.best_sum);
    }
  }
  std::string where = parent ? " under parent atom " + std::to_string(*parent) : "";
  throw ConstructionError("insufficient packing mass at level " + std::to_string(level) + where +
                              ": best sum " + std::to_string(best) + " vs lower target " +
                              std::to_string(a),
                          level, parent);
}

// Largest gamma <= min(cap, min pairwise / 4), halving from there, such that
// for probes z near x and w near y != x (within gamma), w is outside
// B(z, m(x), eps).
double choose_gamma(const FlowSystem& system, const LevelBuild& lv, double eps, double dt,
                    std::optional<double> cap, const FrostmanOptions& options, Rng& rng,
                    int level) {
  const std::size_t n = lv.K.size();
  double g = system.diameter_bound() / 4.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) g = std::min(g, system.metric(lv.K[a], lv.K[b]) / 4.0);
  if (cap) g = std::min(g, *cap * (1.0 - 1e-9));
  if (!(g > 0.0)) throw ConstructionError("coincident atoms leave no separation scale", level, {});

  std::vector<Feature> origins;
  for (const Point& p : lv.K) origins.push_back(system.feature(p));
  for (int halving = 0; halving <= options.gamma_halvings; ++halving, g *= 0.5) {
    detail::BallEngine engine(system, dt, ReparamOptions{});
    std::vector<std::vector<std::size_t>> near(n);
    for (std::size_t x = 0; x < n; ++x) {
      near[x].push_back(engine.add(lv.K[x]));
      for (std::size_t p = 0; p < options.separation_probes; ++p) {
        Point z = system.sample_near(lv.K[x], g, rng);
        if (system.metric(z, lv.K[x]) <= g) near[x].push_back(engine.add(z));
      }
    }
    const double reach = eps + 2.0 * g + kDistanceSlack;
    bool ok = true;
    for (std::size_t x = 0; x < n && ok; ++x)
      for (std::size_t y = 0; y < n && ok; ++y) {
        if (x == y || !system.within(origins[x], origins[y], reach)) continue;
        for (std::size_t z : near[x])
          for (std::size_t w : near[y]) {
            if (!system.within(engine.origin(z), engine.origin(w), eps + kDistanceSlack))
              continue;
            if (engine.contains(z, lv.m[x], eps, w)) {
              ok = false;
              break;
            }
          }
      }
    if (ok) return g;
  }
  throw ConstructionError("no separation scale passed the probe check", level, {});
}

FrostmanState to_state(const LevelBuild& lv, int level, double gamma, double s, double eps) {
  FrostmanState st;
  st.level = level;
  st.K = lv.K;
  st.m = lv.m;
  st.parent = lv.parent;
  st.gamma = gamma;
  st.s = s;
  st.eps = eps;
  std::vector<Atom> atoms;
  for (std::size_t k = 0; k < lv.K.size(); ++k)
    atoms.push_back(Atom{lv.K[k], std::exp(-lv.m[k] * s)});
  st.mu = make_measure(std::move(atoms));
  return st;
}

}  // namespace

FrostmanResult frostman_construct(const FlowSystem& system, const Subset& K, double s, double eps,
                                  int p_max, std::uint64_t seed, double dt,
                                  const FrostmanOptions& options) {
  if (!(s > 0.0)) throw InputError("s must be positive");
  if (!(eps > 0.0)) throw InputError("eps must be positive");
  if (p_max < 1) throw InputError("p_max must be >= 1");
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  PackingOptions packing = options.packing;
  packing.dt = dt;
  packing.keep_order = true;
  Rng rng(mix_seed(seed, 0x9a77a));

  FrostmanResult result;
  LevelBuild lv;
  PackingFamily root = select_with_ladder(system, K, nullptr, 0.0, s, eps, options.n_start, 1.0,
                                          2.0, mix_seed(seed, 1), packing, options, 1, {});
  for (const BallSpec& b : root.balls) {
    lv.K.push_back(b.center);
    lv.m.push_back(b.t);
  }
  double gamma = choose_gamma(system, lv, eps, dt, std::nullopt, options, rng, 1);
  result.history.push_back(to_state(lv, 1, gamma, s, eps));
  result.step1_sum = result.history.back().mu.total_mass;

  for (int level = 2; level <= p_max; ++level) {
    const FrostmanState& prev = result.history.back();
    double floor = *std::max_element(prev.m.begin(), prev.m.end());
    double widen = 1.0 + std::ldexp(1.0, -level);
    LevelBuild next;
    for (std::size_t p = 0; p < prev.K.size(); ++p) {
      double a = prev.mu.atoms[p].weight;
      std::uint64_t node_seed =
          mix_seed(seed, (static_cast<std::uint64_t>(level) << 32) | static_cast<std::uint64_t>(p));
      PackingFamily fam =
          select_with_ladder(system, K, &prev.K[p], prev.gamma / 4.0 * (1.0 - 1e-9), s, eps, floor,
                             a, widen * a, node_seed, packing, options, level, p);
      for (const BallSpec& b : fam.balls) {
        next.K.push_back(b.center);
        next.m.push_back(b.t);
        next.parent.push_back(p);
      }
    }
    gamma = choose_gamma(system, next, eps, dt, prev.gamma / 4.0, options, rng, level);
    result.history.push_back(to_state(next, level, gamma, s, eps));
  }

  const DiscreteMeasure& last = result.history.back().mu;
  result.unnormalized_mass = last.total_mass;
  std::vector<Atom> atoms;
  for (const Atom& a : last.atoms) atoms.push_back(Atom{a.point, a.weight / last.total_mass});
  result.measure = make_measure(std::move(atoms));
  return result;
}

std::vector<MassViolation> check_mass_bounds(const FlowSystem& system,
                                             std::span<const FrostmanState> history, double) {
  std::vector<MassViolation> out;
  const double C = frostman_constant();
  for (std::size_t i = 0; i < history.size(); ++i) {
    const FrostmanState& st = history[i];
    for (std::size_t k = 0; k < st.K.size(); ++k) {
      const Feature fx = system.feature(st.K[k]);
      double lower = std::exp(-st.m[k] * st.s);
      double upper = C * lower;
      for (std::size_t j = i + 1; j < history.size(); ++j) {
        double mass = 0.0;
        for (const Atom& a : history[j].mu.atoms)
          if (system.distance(fx, system.feature(a.point)) <= st.gamma) mass += a.weight;
        if (mass < lower * (1.0 - 1e-12) || mass > upper * (1.0 + 1e-12))
          out.push_back(MassViolation{st.level, k, history[j].level, mass, lower, upper});
      }
    }
  }
  return out;
}

std::vector<std::string> check_frostman_invariants(const FlowSystem& system,
                                                   std::span<const FrostmanState> history,
                                                   double dt, const ReparamOptions& options) {
  std::vector<std::string> out;
  auto tag = [](const FrostmanState& st) { return "level " + std::to_string(st.level) + ": "; };
  for (std::size_t i = 0; i < history.size(); ++i) {
    const FrostmanState& st = history[i];
    const std::size_t n = st.K.size();
    if (st.m.size() != n || st.mu.atoms.size() != n) {
      out.push_back(tag(st) + "K, m and mu sizes differ");
      continue;
    }
    for (std::size_t k = 0; k < n; ++k) {
      double w = std::exp(-st.m[k] * st.s);
      if (std::fabs(st.mu.atoms[k].weight - w) > 1e-12 * w)
        out.push_back(tag(st) + "atom " + std::to_string(k) + " weight is not exp(-m s)");
    }
    double total = 0.0;
    for (const Atom& a : st.mu.atoms) total += a.weight;
    if (std::fabs(total - st.mu.total_mass) > 1e-12 * std::max(1.0, total))
      out.push_back(tag(st) + "total mass does not match the weights");

    detail::BallEngine engine(system, dt, options);
    std::vector<std::size_t> ids;
    for (const Point& p : st.K) ids.push_back(engine.add(p));
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        if (!engine.disjoint(ids[a], st.m[a], ids[b], st.m[b], st.eps, ids))
          out.push_back(tag(st) + "balls of atoms " + std::to_string(a) + " and " +
                        std::to_string(b) + " intersect");
        if (!(system.metric(st.K[a], st.K[b]) > 2.0 * st.gamma))
          out.push_back(tag(st) + "gamma balls of atoms " + std::to_string(a) + " and " +
                        std::to_string(b) + " intersect");
      }

    if (i == 0) continue;
    const FrostmanState& prev = history[i - 1];
    double prev_max = *std::max_element(prev.m.begin(), prev.m.end());
    for (std::size_t k = 0; k < n; ++k)
      if (st.m[k] < prev_max)
        out.push_back(tag(st) + "atom " + std::to_string(k) + " duration below the floor");
    if (!(st.gamma < prev.gamma / 4.0)) out.push_back(tag(st) + "gamma not below gamma_prev/4");
    if (st.parent.size() != n) {
      out.push_back(tag(st) + "missing parent links");
      continue;
    }
    std::vector<double> child_sum(prev.K.size(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      if (st.parent[k] >= prev.K.size()) {
        out.push_back(tag(st) + "atom " + std::to_string(k) + " has no valid parent");
        continue;
      }
      child_sum[st.parent[k]] += st.mu.atoms[k].weight;
    }
    double widen = 1.0 + std::ldexp(1.0, -st.level);
    for (std::size_t p = 0; p < prev.K.size(); ++p) {
      double a = prev.mu.atoms[p].weight;
      if (!(child_sum[p] > a) || !(child_sum[p] < widen * a))
        out.push_back(tag(st) + "children of parent " + std::to_string(p) +
                      " have mass outside the target interval");
    }
  }
  return out;
}

nlohmann::ordered_json frostman_to_json(const FlowSystem& system,
                                        std::span<const FrostmanState> history) {
  auto levels = nlohmann::ordered_json::array();
  for (const FrostmanState& st : history) {
    nlohmann::ordered_json lv;
    lv["level"] = st.level;
    lv["s"] = st.s;
    lv["eps"] = st.eps;
    lv["gamma"] = st.gamma;
    lv["total_mass"] = st.mu.total_mass;
    auto& atoms = lv["atoms"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < st.K.size(); ++k) {
      nlohmann::ordered_json a;
      a["chart"] = system.to_chart(st.K[k]);
      a["m"] = st.m[k];
      a["weight"] = st.mu.atoms[k].weight;
      if (!st.parent.empty()) a["parent"] = st.parent[k];
      atoms.push_back(std::move(a));
    }
    levels.push_back(std::move(lv));
  }
  return levels;
}

}  // namespace flowpack
