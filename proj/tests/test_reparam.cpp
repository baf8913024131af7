#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "flowpack/errors.hpp"
#include "flowpack/reparam.hpp"

using namespace flowpack;

namespace {

bool all_cells(const FreeSpaceGrid& g, bool value) {
  for (auto c : g.cells)
    if ((c != 0) != value) return false;
  return true;
}

}  // namespace

TEST_CASE("free space of a point against itself contains the diagonal") {
  ShiftSuspension sys;
  Rng rng(1);
  Point x = sys.sample(rng);
  BallSpec ball{x, 3.0, 0.2, true};
  auto g = build_free_space(sys, ball, x, 0.25);
  REQUIRE(g.s_grid.size() == 13);
  for (std::size_t j = 0; j < g.s_grid.size(); ++j) CHECK(g.admissible(j, j));
  CHECK(g.tau_grid.size() == 19);  // rows up to 1.5 * t
}

TEST_CASE("free space examples on the horizontal torus flow") {
  TorusLinearFlow flow(1.0, 0.0);
  Point c = TorusLinearFlow::at(0, 0), y = TorusLinearFlow::at(0, 0.3);
  auto none = build_free_space(flow, BallSpec{c, 5.0, 0.2, true}, y, 0.1);
  CHECK(all_cells(none, false));
  auto every = build_free_space(flow, BallSpec{c, 5.0, flow.diameter_bound(), true}, y, 0.1);
  CHECK(all_cells(every, true));
}

TEST_CASE("ball_contains examples") {
  TorusLinearFlow flow(1.0, 0.0);
  Point c = TorusLinearFlow::at(0, 0), y = TorusLinearFlow::at(0, 0.3);
  CHECK_FALSE(ball_contains(flow, BallSpec{c, 5.0, 0.2, true}, y, 0.1).contained);
  auto m = ball_contains(flow, BallSpec{c, 5.0, 0.35, true}, y, 0.1);
  REQUIRE(m.contained);
  // The identity is a witness; the returned path is the minimal one.
  auto g = build_free_space(flow, BallSpec{c, 5.0, 0.35, true}, y, 0.1);
  for (std::size_t j = 0; j < g.s_grid.size(); ++j) CHECK(g.admissible(j, j));

  CatSuspension cat;
  Rng rng(2);
  Point x = cat.sample(rng);
  CHECK(ball_contains(cat, BallSpec{x, 7.3, 0.05, false}, x, 0.1).contained);
  for (double t : {7.35, 0.04}) {
    BallSpec ball{x, t, 0.05, false};
    auto self = ball_contains(cat, ball, x, 0.1);
    REQUIRE(self.contained);
    CHECK(self.path->tau.front() == 0.0);
    auto g = build_free_space(cat, ball, x, 0.1);
    // tau = t is a candidate for the final column when t is off the grid.
    CHECK(std::count(g.tau_grid.begin(), g.tau_grid.end(), t) == 1);
    CHECK(g.admissible(static_cast<std::size_t>(
                           std::find(g.tau_grid.begin(), g.tau_grid.end(), t) - g.tau_grid.begin()),
                       g.s_grid.size() - 1));
  }
}

TEST_CASE("check_distortion examples") {
  ReparamPath id{{0, 0.5, 1, 2, 3}, {0, 0.5, 1, 2, 3}};
  for (double eta : {0.01, 0.5, 0.99}) CHECK(check_distortion(id, eta));
  ReparamPath stretched{{0, 1, 2}, {0, 1.5, 3}};
  CHECK_FALSE(check_distortion(stretched, 0.4));
  // |tau - s| < eta for s <= 1, strict.
  CHECK_FALSE(check_distortion(ReparamPath{{0, 0.5}, {0, 0.9}}, 0.4));
  CHECK(check_distortion(ReparamPath{{0, 0.5}, {0, 0.85}}, 0.4));
}

TEST_CASE("input validation and the cell budget") {
  TorusLinearFlow flow(1.0, 0.0);
  Point c = TorusLinearFlow::at(0, 0);
  CHECK_THROWS_AS(ball_contains(flow, BallSpec{c, 0.0, 0.1, true}, c, 0.1), InputError);
  CHECK_THROWS_AS(ball_contains(flow, BallSpec{c, 1.0, -0.1, true}, c, 0.1), InputError);
  CHECK_THROWS_AS(ball_contains(flow, BallSpec{c, 1.0, 0.1, true}, c, 0.0), InputError);
  ReparamOptions tiny;
  tiny.max_cells = 100;
  CHECK_THROWS_AS(ball_contains(flow, BallSpec{c, 10.0, 0.1, true}, c, 0.1, tiny), ResourceError);
  CHECK_THROWS_AS(build_free_space(flow, BallSpec{c, 10.0, 0.1, true}, c, 0.1, tiny),
                  ResourceError);
}

TEST_CASE("calibrate_theta") {
  TorusLinearFlow flow(1.0, std::sqrt(2.0));
  double theta = calibrate_theta(flow, 0.5, 50, 7);
  CHECK(theta > 0.0);
  CHECK(calibrate_theta(flow, 0.5, 0, 7) == doctest::Approx(flow.diameter_bound() / 2));
  CHECK_THROWS_AS(calibrate_theta(flow, 1.5, 10, 7), InputError);

  ShiftSuspension shift;
  double prev = 0.0;
  for (double eta : {0.1, 0.3, 0.5, 0.9}) {
    double th = calibrate_theta(shift, eta, 40, 3);
    CHECK(th >= prev);
    prev = th;
  }
}

TEST_CASE("ball_contains agrees with exhaustive path enumeration") {
  TorusLinearFlow torus(1.0, std::sqrt(2.0));
  ShiftSuspension shift;
  CatSuspension cat;
  const FlowSystem* systems[] = {&torus, &shift, &cat};
  Rng rng(41);
  int mismatches = 0, positives = 0;
  for (int k = 0; k < 1000; ++k) {
    const FlowSystem& sys = *systems[k % 3];
    double dt = uniform(rng, 0.05, 0.4);
    double t = dt * uniform(rng, 0.5, 7.3);  // at most 12 rows and 9 columns
    Point x = sys.sample(rng);
    double eps = uniform(rng, 0.02, 0.6) * sys.diameter_bound();
    Point y = sys.sample_near(x, eps * uniform(rng, 0.2, 1.5), rng);
    auto g = oracle::admissibility(sys, x, y, t, eps, dt);
    REQUIRE(g.ok.size() <= 12);
    REQUIRE(g.s.size() <= 12);
    bool expected = oracle::count_paths(g) > 0;
    bool got = ball_contains(sys, BallSpec{x, t, eps, true}, y, dt).contained;
    if (got != expected) ++mismatches;
    positives += expected;
  }
  CHECK(mismatches == 0);
  CHECK(positives > 100);
  CHECK(positives < 1000);
}

TEST_CASE("ball membership properties over 1000 cases") {
  TorusLinearFlow torus(1.0, std::sqrt(2.0));
  ShiftSuspension shift;
  CatSuspension cat;
  const FlowSystem* systems[] = {&torus, &shift, &cat};
  Rng rng(43);
  int reflexive = 0, eps_monotone = 0, t_monotone = 0, revalidation = 0;
  for (int k = 0; k < 1000; ++k) {
    const FlowSystem& sys = *systems[k % 3];
    Point x = sys.sample(rng);
    double t = uniform(rng, 0.5, 6.0);
    double dt = 0.1;
    double eps = uniform(rng, 0.01, 0.4) * sys.diameter_bound();
    Point y = sys.sample_near(x, eps * uniform(rng, 0.1, 1.2), rng);

    if (!ball_contains(sys, BallSpec{x, t, eps, true}, x, dt).contained) ++reflexive;

    auto m = ball_contains(sys, BallSpec{x, t, eps, true}, y, dt);
    if (m.contained) {
      if (!ball_contains(sys, BallSpec{x, t, eps * uniform(rng, 1.0, 2.0), true}, y, dt)
               .contained)
        ++eps_monotone;
      // A shorter ball on the same grid: restrict alpha.
      double t1 = dt * std::floor(uniform(rng, 0.1, 1.0) * t / dt);
      if (t1 > 0 && !ball_contains(sys, BallSpec{x, t1, eps, true}, y, dt).contained)
        ++t_monotone;
      const auto& p = *m.path;
      if (p.tau.front() != 0.0) ++revalidation;
      for (std::size_t j = 0; j < p.tau.size(); ++j) {
        if (j > 0 && p.tau[j] < p.tau[j - 1]) ++revalidation;
        double d = sys.metric(sys.evaluate(x, p.tau[j]), sys.evaluate(y, p.grid_times[j]));
        if (d > eps + 1e-12) ++revalidation;
      }
    }
  }
  CHECK(reflexive == 0);
  CHECK(eps_monotone == 0);
  CHECK(t_monotone == 0);
  CHECK(revalidation == 0);
}

TEST_CASE("find_monotone_path agrees with ball_contains") {
  ShiftSuspension sys;
  Rng rng(47);
  for (int k = 0; k < 200; ++k) {
    Point x = sys.sample(rng);
    Point y = sys.sample_near(x, 0.5, rng);
    BallSpec ball{x, 2.5, 0.4, true};
    auto grid = build_free_space(sys, ball, y, 0.1);
    auto path = find_monotone_path(grid);
    auto m = ball_contains(sys, ball, y, 0.1);
    REQUIRE(path.has_value() == m.contained);
    if (path) {
      REQUIRE(path->size() == m.path->tau.size());
      for (std::size_t j = 0; j < path->size(); ++j)
        CHECK(grid.tau_grid[(*path)[j]] == doctest::Approx(m.path->tau[j]));
    }
  }
}
