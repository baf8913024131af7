// Acceptance run: one PASS/FAIL line per criterion, details on the lines below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "oracles.hpp"

#include "flowpack/covering.hpp"
#include "flowpack/measures.hpp"
#include "flowpack/packing.hpp"
#include "flowpack/subsets.hpp"

using namespace flowpack;

namespace {

const double kLog2 = std::log(2.0);
const double kCatEntropy = std::log((3.0 + std::sqrt(5.0)) / 2.0);

struct Outcome {
  bool pass = false;
  std::vector<std::string> details;
};

std::string fmt(const char* f, double a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <class... Args>
std::string fmtn(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> t_range(double lo, double hi, double step) {
  std::vector<double> t;
  for (double x = lo; x <= hi + 1e-9; x += step) t.push_back(x);
  return t;
}

// Shared state: later criteria reuse the estimates of earlier ones.
struct Setup {
  ShiftSuspension shift;
  CatSuspension cat;
  TorusLinearFlow torus{1.0, std::sqrt(2.0)};

  std::vector<Point> shift_Z, cat_Z, torus_Z;
  std::optional<EntropyEstimate> shift_packing, cat_packing, torus_packing;

  Setup() {
    Rng c0(7), z1(11);
    shift_Z = Neighborhood(shift, shift.sample(c0), 0.02).draw(3000, z1);
    Rng c1(7), z2(11);
    cat_Z = Neighborhood(cat, cat.sample(c1), 0.2).draw(6000, z2);
    Rng z3(11);
    torus_Z = WholeSpace(torus).draw(2000, z3);
  }
};

PackingOptions packing_options() {
  PackingOptions o;
  o.critical_check = false;
  return o;
}

EntropyEstimate& shift_packing(Setup& s) {
  if (!s.shift_packing)
    s.shift_packing = estimate_packing_entropy(s.shift, s.shift_Z, 0.25, {6.0, 16.0}, 0.0625, 1,
                                               1, packing_options());
  return *s.shift_packing;
}

EntropyEstimate& cat_packing(Setup& s) {
  if (!s.cat_packing)
    s.cat_packing = estimate_packing_entropy(s.cat, s.cat_Z, 0.5, {4.0, 10.0}, 0.1, 1, 1,
                                             packing_options());
  return *s.cat_packing;
}

EntropyEstimate& torus_packing(Setup& s) {
  if (!s.torus_packing)
    s.torus_packing = estimate_packing_entropy(s.torus, s.torus_Z, 0.1, {6.0, 16.0}, 0.025, 1, 1,
                                               packing_options());
  return *s.torus_packing;
}

Outcome criterion1(Setup& s) {
  auto t0 = std::chrono::steady_clock::now();
  const auto& e = shift_packing(s);
  double sec = seconds_since(t0);
  Outcome o;
  o.pass = std::fabs(e.value - kLog2) <= 0.2 * kLog2 && sec <= 600.0;
  o.details.push_back(fmtn("shift suspension packing %.4f, target %.4f +- 20%%, %.1f s",
                           e.value, kLog2, sec));
  return o;
}

Outcome criterion2(Setup& s) {
  auto t0 = std::chrono::steady_clock::now();
  const auto& e = cat_packing(s);
  double sec = seconds_since(t0);
  Outcome o;
  o.pass = std::fabs(e.value - kCatEntropy) <= 0.2 * kCatEntropy && sec <= 900.0;
  o.details.push_back(fmtn("cat suspension packing %.4f, target %.4f +- 20%%, %.1f s", e.value,
                           kCatEntropy, sec));
  return o;
}

Outcome criterion3(Setup& s) {
  const auto& p = torus_packing(s);
  CoverOptions co;
  co.dt = 0.025;
  auto b = estimate_bowen_entropy(s.torus, s.torus_Z, 0.1, {6.0, 16.0}, 1, co);
  bool non_growing = true;
  for (std::size_t k = 1; k < p.counts.size(); ++k)
    if (p.counts[k] > p.counts[0]) non_growing = false;
  Outcome o;
  o.pass = p.value <= 0.05 && b.value <= 0.05 && non_growing;
  std::string counts;
  for (double c : p.counts) counts += fmt(" %.0f", c);
  o.details.push_back(fmtn("torus packing %.4f, bowen %.4f (<= 0.05)", p.value, b.value));
  o.details.push_back("R(t):" + counts);
  return o;
}

Outcome criterion4(Setup& s) {
  struct Case {
    const FlowSystem* sys;
    const std::vector<Point>* Z;
    std::vector<double> eps;
    std::pair<double, double> window;
    double dt;
  };
  std::vector<Case> cases{
      {&s.shift, &s.shift_Z, {0.5, 0.25}, {6.0, 16.0}, 0.0625},
      {&s.cat, &s.cat_Z, {1.0, 0.5}, {4.0, 10.0}, 0.1},
      {&s.torus, &s.torus_Z, {0.2, 0.1}, {6.0, 16.0}, 0.025},
  };
  Outcome o;
  o.pass = true;
  for (const auto& c : cases) {
    for (double eps : c.eps) {
      const std::uint64_t seed = 1;  // paired
      EntropyEstimate p;
      if (c.sys == &s.shift && eps == 0.25) p = shift_packing(s);
      else if (c.sys == &s.cat && eps == 0.5) p = cat_packing(s);
      else if (c.sys == &s.torus && eps == 0.1) p = torus_packing(s);
      else p = estimate_packing_entropy(*c.sys, *c.Z, eps, c.window, c.dt, 1, seed, packing_options());
      CoverOptions co;
      co.dt = c.dt;
      auto b = estimate_bowen_entropy(*c.sys, *c.Z, eps, c.window, seed, co);
      bool ok = b.value <= p.value + 0.05;
      o.pass = o.pass && ok;
      o.details.push_back(fmtn("%s eps %.3g: bowen %.4f <= packing %.4f + 0.05 %s",
                               c.sys->name().c_str(), eps, b.value, p.value, ok ? "ok" : "VIOLATED"));
    }
  }
  return o;
}

Outcome criterion5(Setup& s) {
  struct Case {
    const FlowSystem* sys;
    double packing;
    double eps;
    std::vector<double> t_list;
    double dt;
    std::size_t lift_atoms;
  };
  std::vector<Case> cases{
      {&s.shift, shift_packing(s).value, 2.0, t_range(8, 18, 1), 0.0625, 1000000},
      {&s.cat, cat_packing(s).value, 2.0, t_range(4, 12, 1), 0.1, 1000000},
      {&s.torus, torus_packing(s).value, 0.5, t_range(8, 18, 1), 0.1, 100000},
  };
  const std::size_t samples = 10;
  Outcome o;
  o.pass = true;
  for (const auto& c : cases) {
    auto lift = lift_measure(*c.sys, c.lift_atoms, 5);
    double lift_h = upper_local_entropy(*c.sys, lift, c.eps, c.t_list, samples, 3, c.dt);
    bool ok = lift_h <= c.packing + 0.15;
    o.details.push_back(fmtn("%s lift: %.4f <= packing %.4f + 0.15 %s", c.sys->name().c_str(),
                             lift_h, c.packing, ok ? "ok" : "VIOLATED"));
    o.pass = o.pass && ok;
    if (c.sys == &s.shift) {
      bool near = std::fabs(lift_h - kLog2) <= 0.2 * kLog2;
      o.details.push_back(fmtn("shift lift within 20%% of log 2: %.4f %s", lift_h,
                               near ? "ok" : "VIOLATED"));
      o.pass = o.pass && near;
    }
    if (auto orbit = c.sys->periodic_orbit()) {
      auto orb = orbit_measure(*c.sys, *orbit, 64);
      double orb_h = upper_local_entropy(*c.sys, orb, c.eps, c.t_list, samples, 3, c.dt);
      bool ok2 = orb_h <= c.packing + 0.15;
      o.details.push_back(fmtn("%s periodic orbit: %.4f <= packing %.4f + 0.15 %s",
                               c.sys->name().c_str(), orb_h, c.packing, ok2 ? "ok" : "VIOLATED"));
      o.pass = o.pass && ok2;
      if (c.sys == &s.shift) {
        // The mixture integrates the two local values, so its oracle is the
        // weighted mean of the verified components.
        auto mix = mixture(lift, 0.5, orb, 0.5);
        double mix_h = upper_local_entropy(*c.sys, mix, c.eps, c.t_list, samples, 3, c.dt);
        double oracle = 0.5 * lift_h + 0.5 * orb_h;
        bool ok3 = std::fabs(mix_h - oracle) <= 0.25 * oracle && mix_h <= c.packing + 0.15;
        o.details.push_back(fmtn("shift mixture: %.4f, component oracle %.4f +- 25%% %s", mix_h,
                                 oracle, ok3 ? "ok" : "VIOLATED"));
        o.pass = o.pass && ok3;
      }
    }
  }
  return o;
}

Outcome criterion6(Setup& s) {
  const double s_used = 0.8 * shift_packing(s).value;
  const double eps = 0.1, dt = 0.0625;
  FrostmanOptions fo;
  fo.floor_attempts = 12;
  fo.select_margin = 0.25;
  WholeSpace K(s.shift);
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  try {
    auto res = frostman_construct(s.shift, K, s_used, eps, 3, 1, dt, fo);
    const double C = frostman_constant();
    auto violations = check_mass_bounds(s.shift, res.history, dt);
    auto invariants = check_frostman_invariants(s.shift, res.history, dt);
    const auto& last = res.history.back();
    double lo = *std::min_element(last.m.begin(), last.m.end());
    double hi = *std::max_element(last.m.begin(), last.m.end());
    auto ts = t_range(std::max(dt, 2 * lo - hi), hi, dt);
    double achieved = upper_local_entropy(s.shift, res.measure, eps, ts, 30, 3, dt);
    bool step1 = res.step1_sum > 1.0 && res.step1_sum < 2.0;
    bool c_stable = std::fabs(frostman_constant(40) - C) < 1e-10;
    o.pass = step1 && violations.empty() && invariants.empty() && c_stable &&
             achieved >= s_used - 0.1;
    o.details.push_back(fmtn("s %.4f, step-1 sum %.4f, C %.6f, mass violations %zu, invariant "
                             "violations %zu",
                             s_used, res.step1_sum, C, violations.size(), invariants.size()));
    o.details.push_back(fmtn("achieved upper local entropy %.4f (>= %.4f), %zu atoms, %.1f s",
                             achieved, s_used - 0.1, res.measure.atoms.size(), seconds_since(t0)));
  } catch (const ConstructionError& e) {
    o.pass = false;
    o.details.push_back(fmtn("s %.4f: construction failed at level %d after %.1f s", s_used,
                             e.level, seconds_since(t0)));
    o.details.push_back(e.what());
  }
  return o;
}

Outcome criterion7(Setup& s) {
  Rng rng(21);
  std::vector<Point> seeds;
  for (int k = 0; k < 5; ++k) seeds.push_back(s.shift.sample(rng));
  std::vector<BallSpec> family;
  for (int k = 0; k < 50; ++k)
    family.push_back(BallSpec{s.shift.sample_near(seeds[k % 5], 0.15, rng), 8.0, 0.1, true});
  ProbeSet probes{"acceptance-7", {}};
  for (int k = 0; k < 5000; ++k)
    probes.points.push_back(k % 2 ? s.shift.sample(rng)
                                  : s.shift.sample_near(family[k % 50].center, 0.1, rng));
  FiveROptions fo;
  fo.dt = 0.025;
  Outcome o;
  try {
    auto r = five_r_select(s.shift, family, 0.1, probes, fo);
    bool disjoint = revalidate_family(s.shift, r.subfamily, probes, fo.dt);
    int witnesses = 0;
    for (const auto& p : probes.points) {
      bool in_input = false, in_cover = false;
      for (const auto& b : family)
        if ((in_input = ball_contains(s.shift, b, p, fo.dt).contained)) break;
      if (!in_input) continue;
      for (const auto& b : r.inflated.balls)
        if ((in_cover = ball_contains(s.shift, b, p, fo.dt).contained)) break;
      witnesses += !in_cover;
    }
    o.pass = disjoint && r.inflated.coverage_verified && witnesses == 0;
    o.details.push_back(fmtn("theta %.4f, subfamily %zu of 50, probes in input union %zu, "
                             "witnesses %d, disjoint %s",
                             r.theta, r.subfamily.balls.size(), r.probes_in_input, witnesses,
                             disjoint ? "yes" : "no"));
  } catch (const CoverageError& e) {
    o.details.push_back(std::string("coverage failure: ") + e.what());
  }
  return o;
}

Outcome criterion8(Setup& s) {
  const double eta = 0.5;
  double theta = calibrate_theta(s.shift, eta, 200, 1);
  Rng rng(31);
  int paths = 0, failures = 0, attempts = 0;
  while (paths < 200 && attempts < 20000) {
    ++attempts;
    double r = theta * uniform(rng, 0.1, 0.999);
    Point x = s.shift.sample(rng);
    Point y = s.shift.sample_near(x, r, rng);
    double t = uniform(rng, 0.5, 20.0);
    auto m = ball_contains(s.shift, BallSpec{x, t, r, true}, y, default_dt(r));
    if (!m.contained) continue;
    ++paths;
    failures += !check_distortion(*m.path, eta);
  }
  int big_fail = 0, big_paths = 0;
  for (int k = 0; k < 2000 && big_fail == 0; ++k) {
    double r = 4.0 * theta;
    Point x = s.shift.sample(rng);
    Point y = s.shift.sample_near(x, r, rng);
    double t = uniform(rng, 0.5, 20.0);
    auto m = ball_contains(s.shift, BallSpec{x, t, r, true}, y, default_dt(r));
    if (!m.contained) continue;
    ++big_paths;
    big_fail += !check_distortion(*m.path, eta);
  }
  Outcome o;
  o.pass = paths == 200 && failures == 0 && big_fail > 0;
  o.details.push_back(fmtn("theta(0.5) = %.4f; %d paths below theta, %d distortion failures", theta,
                           paths, failures));
  o.details.push_back(fmtn("at 4 theta: failing path found %s after %d paths",
                           big_fail ? "yes" : "no", big_paths));
  return o;
}

Outcome criterion9(Setup& s) {
  const FlowSystem* systems[] = {&s.torus, &s.shift, &s.cat};
  Rng rng(41);
  int mismatches = 0, positives = 0;
  for (int k = 0; k < 500; ++k) {
    const FlowSystem& sys = *systems[k % 3];
    double dt = uniform(rng, 0.1, 1.0);
    double t = dt * uniform(rng, 1.5, 7.3);
    Point x = sys.sample(rng);
    double eps = uniform(rng, 0.02, 0.3) * sys.diameter_bound();
    Point y = sys.sample_near(x, eps * uniform(rng, 0.3, 1.5), rng);
    auto g = oracle::admissibility(sys, x, y, t, eps, dt);
    if (g.ok.size() > 12 || g.s.size() > 12) {
      ++mismatches;
      continue;
    }
    bool expected = oracle::count_paths(g) > 0;
    bool got = ball_contains(sys, BallSpec{x, t, eps, true}, y, dt).contained;
    mismatches += got != expected;
    positives += expected;
  }
  Outcome o;
  o.pass = mismatches == 0;
  o.details.push_back(fmtn("500 instances, %d mismatches, %d contained", mismatches, positives));
  return o;
}

// Runs `body` on 1000 cases and counts failures.
int property(const std::function<bool(Rng&, int)>& body, std::uint64_t seed) {
  Rng rng(seed);
  int bad = 0;
  for (int k = 0; k < 1000; ++k) bad += !body(rng, k);
  return bad;
}

Outcome criterion10(Setup& s) {
  const FlowSystem* systems[] = {&s.torus, &s.shift, &s.cat};
  auto pick = [&](int k) -> const FlowSystem& { return *systems[k % 3]; };
  std::vector<std::pair<std::string, int>> suites;

  suites.emplace_back("metric axioms", property([&](Rng& rng, int k) {
    const auto& sys = pick(k);
    Point a = sys.sample(rng), b = sys.sample(rng), c = sys.sample(rng);
    double ab = sys.metric(a, b), ba = sys.metric(b, a), bc = sys.metric(b, c),
           ac = sys.metric(a, c);
    return sys.metric(a, a) == 0.0 && ab == ba && ab >= 0.0 && ac <= ab + bc + 1e-12 &&
           ab <= sys.diameter_bound() + 1e-12;
  }, 101));

  suites.emplace_back("group law", property([&](Rng& rng, int k) {
    const auto& sys = pick(k);
    Point x = sys.sample(rng);
    double a = uniform(rng, -10, 10), b = uniform(rng, -10, 10);
    return sys.metric(sys.evaluate(sys.evaluate(x, a), b), sys.evaluate(x, a + b)) <= 1e-6 &&
           sys.metric(sys.evaluate(x, 0.0), x) <= 1e-12;
  }, 102));

  suites.emplace_back("ball_contains reflexive and monotone in eps", property([&](Rng& rng, int k) {
    const auto& sys = pick(k);
    Point x = sys.sample(rng);
    double t = uniform(rng, 0.3, 6.0), eps = uniform(rng, 0.01, 0.4) * sys.diameter_bound();
    if (!ball_contains(sys, BallSpec{x, t, eps, true}, x, 0.1).contained) return false;
    Point y = sys.sample_near(x, eps * uniform(rng, 0.1, 1.2), rng);
    if (!ball_contains(sys, BallSpec{x, t, eps, true}, y, 0.1).contained) return true;
    return ball_contains(sys, BallSpec{x, t, eps * uniform(rng, 1.0, 2.0), true}, y, 0.1)
        .contained;
  }, 103));

  suites.emplace_back("ball_contains anti-monotone in t", property([&](Rng& rng, int k) {
    const auto& sys = pick(k);
    Point x = sys.sample(rng);
    double dt = 0.1, eps = uniform(rng, 0.05, 0.4) * sys.diameter_bound();
    double t2 = dt * std::floor(uniform(rng, 5, 60)), t1 = dt * std::floor(uniform(rng, 1, t2 / dt));
    Point y = sys.sample_near(x, eps * uniform(rng, 0.1, 1.0), rng);
    if (!ball_contains(sys, BallSpec{x, t2, eps, true}, y, dt).contained) return true;
    return ball_contains(sys, BallSpec{x, t1, eps, true}, y, dt).contained;
  }, 104));

  suites.emplace_back("returned paths revalidate", property([&](Rng& rng, int k) {
    const auto& sys = pick(k);
    Point x = sys.sample(rng);
    double t = uniform(rng, 0.3, 6.0), eps = uniform(rng, 0.05, 0.5) * sys.diameter_bound();
    Point y = sys.sample_near(x, eps, rng);
    auto m = ball_contains(sys, BallSpec{x, t, eps, true}, y, 0.1);
    if (!m.contained) return true;
    const auto& p = *m.path;
    if (p.tau.front() != 0.0 || p.tau.size() != p.grid_times.size()) return false;
    for (std::size_t j = 0; j < p.tau.size(); ++j) {
      if (j > 0 && p.tau[j] < p.tau[j - 1]) return false;
      if (sys.metric(sys.evaluate(x, p.tau[j]), sys.evaluate(y, p.grid_times[j])) > eps + 1e-12)
        return false;
    }
    return true;
  }, 105));

  suites.emplace_back("packing sum decreasing in s", property([&](Rng& rng, int) {
    PackingFamily f;
    int n = 1 + static_cast<int>(uniform_index(rng, 20));
    for (int i = 0; i < n; ++i) f.balls.push_back(BallSpec{Point{}, uniform(rng, 1, 20), 0.1, true});
    double s1 = uniform(rng, 0, 2), s2 = s1 + uniform(rng, 1e-3, 2);
    return packing_sum(f, s2) < packing_sum(f, s1);
  }, 106));

  suites.emplace_back("family certificates revalidate", property([&](Rng& rng, int k) {
    const auto& sys = pick(k);
    ProbeSet probes{"p" + std::to_string(k), {}};
    for (int i = 0; i < 20; ++i) probes.points.push_back(sys.sample(rng));
    std::vector<Point> cand;
    for (int i = 0; i < 8; ++i) cand.push_back(sys.sample(rng));
    double eps = uniform(rng, 0.05, 0.4) * sys.diameter_bound();
    auto fam = greedy_packing(sys, cand, uniform(rng, 0.5, 3.0), eps, probes, k, 0.1);
    return !fam.balls.empty() && revalidate_family(sys, fam, probes, 0.1);
  }, 107));

  suites.emplace_back("determinism", property([&](Rng& rng, int k) {
    const auto& sys = pick(k);
    std::uint64_t seed = rng();
    Rng a(seed), b(seed);
    std::vector<Point> ca, cb;
    for (int i = 0; i < 6; ++i) {
      ca.push_back(sys.sample(a));
      cb.push_back(sys.sample(b));
    }
    ProbeSet pa{"d", ca}, pb{"d", cb};
    double eps = 0.3 * sys.diameter_bound();
    auto fa = greedy_packing(sys, ca, 2.0, eps, pa, seed, 0.1);
    auto fb = greedy_packing(sys, cb, 2.0, eps, pb, seed, 0.1);
    if (fa.balls.size() != fb.balls.size()) return false;
    for (std::size_t i = 0; i < fa.balls.size(); ++i)
      if (!(fa.balls[i].center == fb.balls[i].center)) return false;
    return true;
  }, 108));

  // Frostman states: 1000 per-atom invariant checks spread over constructions.
  int frostman_bad = 0;
  std::size_t atoms_checked = 0;
  for (std::uint64_t seed = 1; atoms_checked < 1000 && seed <= 20; ++seed) {
    WholeSpace K(s.shift);
    try {
      auto res = frostman_construct(s.shift, K, 0.3, 0.1, 3, seed, 0.0625);
      frostman_bad += static_cast<int>(check_frostman_invariants(s.shift, res.history, 0.0625).size());
      frostman_bad += static_cast<int>(check_mass_bounds(s.shift, res.history, 0.0625).size());
      for (const auto& st : res.history) atoms_checked += st.K.size();
    } catch (const ConstructionError&) {
      ++frostman_bad;
    }
  }
  if (atoms_checked < 1000) ++frostman_bad;
  suites.emplace_back(fmtn("Frostman state invariants (%zu atoms)", atoms_checked), frostman_bad);

  Outcome o;
  o.pass = true;
  for (const auto& [name, bad] : suites) {
    o.pass = o.pass && bad == 0;
    o.details.push_back(fmtn("%s: %d failures", name.c_str(), bad));
  }
  return o;
}

}  // namespace

// Optional arguments select criteria by number; none runs all ten.
int main(int argc, char** argv) {
  std::vector<bool> selected(11, argc <= 1);
  for (int k = 1; k < argc; ++k) {
    int n = std::atoi(argv[k]);
    if (n >= 1 && n <= 10) selected[n] = true;
  }
  Setup setup;
  using Fn = Outcome (*)(Setup&);
  const std::pair<const char*, Fn> criteria[] = {
      {"known entropy, 2-shift suspension", criterion1},
      {"known entropy, cat-map suspension", criterion2},
      {"zero entropy, torus linear flow", criterion3},
      {"bowen <= packing + 0.05 on every system and eps", criterion4},
      {"measure entropies below packing; Bernoulli near log 2", criterion5},
      {"Frostman construction at s = 0.8 * packing", criterion6},
      {"5r selection covers the input union", criterion7},
      {"calibrated theta bounds distortion", criterion8},
      {"ball_contains matches path enumeration", criterion9},
      {"1000-case invariant suites", criterion10},
  };
  int failed = 0, ran = 0, index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    if (!selected[index]) continue;
    ++ran;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn(setup);
    } catch (const std::exception& e) {
      o.pass = false;
      o.details.push_back(std::string("exception: ") + e.what());
    }
    std::printf("criterion %d: %s  %s (%.1f s)\n", index, o.pass ? "PASS" : "FAIL", name,
                seconds_since(t0));
    for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
