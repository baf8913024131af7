#include "flowpack/flows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "flowpack/errors.hpp"

namespace flowpack {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::uint64_t kGridMask = ~std::uint64_t{0x7ff};

double circle_gap(double a, double b, double circumference) {
  double d = std::fabs(a - b);
  return std::min(d, circumference - d);
}

// Signed offset in (-c/2, c/2] taking a to b on a circle of circumference c.
double circle_offset(double a, double b, double c) {
  double d = std::fmod(b - a, c);
  if (d > 0.5 * c) d -= c;
  if (d <= -0.5 * c) d += c;
  return d;
}

// Splits h into an integer number of roof crossings and a height in [0, roof).
long long wrap_height(double& h, double roof) {
  double n = std::floor(h / roof);
  h -= n * roof;
  if (h >= roof) {
    h -= roof;
    n += 1.0;
  }
  if (h < 0.0) h = 0.0;
  return static_cast<long long>(n);
}

std::uint64_t midpoint_turns(std::uint64_t a, std::uint64_t b) {
  auto diff = static_cast<std::int64_t>(b - a);
  return a + (static_cast<std::uint64_t>(diff / 2) & kGridMask);
}

double checked_number(const nlohmann::json& j, const char* what) {
  if (!j.is_number()) throw InputError(std::string("chart entry ") + what + " is not a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw InputError(std::string("chart entry ") + what + " is not finite");
  return v;
}

void expect_chart(const nlohmann::json& chart, std::size_t size, const char* system) {
  if (!chart.is_array() || chart.size() != size)
    throw InputError(std::string(system) + " chart must be an array of " + std::to_string(size) +
                     " numbers");
}

// ---- 256-bit symbol ring -------------------------------------------------

using Ring = std::array<std::uint64_t, 4>;

int ring_bit(const Ring& r, long long index) {
  long long j = ((index % 256) + 256) % 256;
  return static_cast<int>((r[j >> 6] >> (j & 63)) & 1u);
}

void set_ring_bit(Ring& r, long long index, int value) {
  long long j = ((index % 256) + 256) % 256;
  std::uint64_t mask = std::uint64_t{1} << (j & 63);
  if (value) r[j >> 6] |= mask;
  else r[j >> 6] &= ~mask;
}

// new bit i = old bit i + n.
Ring rotate_ring(const Ring& r, long long n) {
  long long m = ((n % 256) + 256) % 256;
  std::size_t q = static_cast<std::size_t>(m >> 6);
  unsigned s = static_cast<unsigned>(m & 63);
  Ring out{};
  for (std::size_t k = 0; k < 4; ++k) {
    std::uint64_t lo = r[(k + q) & 3];
    std::uint64_t hi = r[(k + q + 1) & 3];
    out[k] = s == 0 ? lo : (lo >> s) | (hi << (64 - s));
  }
  return out;
}

// ---- cat map -------------------------------------------------------------

struct Mat2 {
  std::uint64_t a, b, c, d;
};

Mat2 mul(const Mat2& x, const Mat2& y) {
  return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c,
          x.c * y.b + x.d * y.d};
}

Mat2 cat_power(long long n) {
  Mat2 base = n >= 0 ? Mat2{2, 1, 1, 1} : Mat2{1, ~std::uint64_t{0}, ~std::uint64_t{0}, 2};
  unsigned long long e = n >= 0 ? static_cast<unsigned long long>(n)
                                : static_cast<unsigned long long>(-(n + 1)) + 1;
  Mat2 acc{1, 0, 0, 1};
  while (e) {
    if (e & 1) acc = mul(acc, base);
    base = mul(base, base);
    e >>= 1;
  }
  return acc;
}

}  // namespace

std::uint64_t to_turns(double x) {
  double f = x - std::floor(x);
  auto k = static_cast<std::uint64_t>(std::nearbyint(std::ldexp(f, 53)));
  if (k >= (std::uint64_t{1} << 53)) k -= std::uint64_t{1} << 53;
  return k << 11;
}

double from_turns(std::uint64_t u) { return std::ldexp(static_cast<double>(u >> 11), -53); }

// ---- FlowSystem ----------------------------------------------------------

Point FlowSystem::evaluate(const Point& x, double t) const {
  if (!std::isfinite(t)) throw InputError("flow time must be finite");
  if (!std::isfinite(x.height)) throw InputError("point height must be finite");
  return advance(x, t);
}

void FlowSystem::certify_on_samples(std::size_t count) {
  Rng rng(0x5eedf10dULL);
  std::vector<Point> samples;
  samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) samples.push_back(sample(rng));
  min_displacement_ = certify_fixed_point_free(*this, samples);
}

// ---- torus ---------------------------------------------------------------

TorusLinearFlow::TorusLinearFlow(double vx, double vy) : vx_(vx), vy_(vy) {
  if (!std::isfinite(vx) || !std::isfinite(vy) || (vx == 0.0 && vy == 0.0))
    throw InputError("torus flow direction must be finite and nonzero");
  certify_on_samples();
}

Point TorusLinearFlow::at(double x, double y) {
  Point p;
  p.cells[0] = to_turns(x);
  p.cells[1] = to_turns(y);
  return p;
}

nlohmann::ordered_json TorusLinearFlow::params() const {
  return {{"direction", {vx_, vy_}}};
}

Point TorusLinearFlow::advance(const Point& x, double t) const {
  Point y = x;
  y.cells[0] += to_turns(t * vx_);
  y.cells[1] += to_turns(t * vy_);
  return y;
}

Feature TorusLinearFlow::feature(const Point& x) const {
  Feature f;
  f.v[0] = from_turns(x.cells[0]);
  f.v[1] = from_turns(x.cells[1]);
  return f;
}

double TorusLinearFlow::distance(const Feature& a, const Feature& b) const {
  double dx = a.v[0] - b.v[0];
  double dy = a.v[1] - b.v[1];
  dx -= std::round(dx);
  dy -= std::round(dy);
  return std::hypot(dx, dy);
}

bool TorusLinearFlow::within(const Feature& a, const Feature& b, double bound) const {
  double dx = a.v[0] - b.v[0];
  double dy = a.v[1] - b.v[1];
  dx -= std::round(dx);
  dy -= std::round(dy);
  if (std::fabs(dx) > bound || std::fabs(dy) > bound) return false;
  return std::hypot(dx, dy) <= bound;
}

double TorusLinearFlow::diameter_bound() const { return std::sqrt(0.5); }

Point TorusLinearFlow::sample(Rng& rng) const {
  Point p;
  p.cells[0] = rng() & kGridMask;
  p.cells[1] = rng() & kGridMask;
  return p;
}

Point TorusLinearFlow::sample_near(const Point& x, double radius, Rng& rng) const {
  double r = radius;
  for (int attempt = 0; attempt < 64; ++attempt) {
    double rho = r * std::sqrt(uniform01(rng));
    double ang = kTwoPi * uniform01(rng);
    Point y = x;
    y.cells[0] += to_turns(rho * std::cos(ang));
    y.cells[1] += to_turns(rho * std::sin(ang));
    if (metric(x, y) <= radius) return y;
    r *= 0.5;
  }
  return x;
}

Point TorusLinearFlow::sample_fiber(double coordinate, Rng& rng) const {
  Point p;
  p.cells[0] = to_turns(coordinate);
  p.cells[1] = rng() & kGridMask;
  return p;
}

Point TorusLinearFlow::midpoint(const Point& a, const Point& b) const {
  Point m;
  m.cells[0] = midpoint_turns(a.cells[0], b.cells[0]);
  m.cells[1] = midpoint_turns(a.cells[1], b.cells[1]);
  return m;
}

nlohmann::json TorusLinearFlow::to_chart(const Point& x) const {
  return {from_turns(x.cells[0]), from_turns(x.cells[1])};
}

Point TorusLinearFlow::from_chart(const nlohmann::json& chart) const {
  expect_chart(chart, 2, "torus");
  return at(checked_number(chart[0], "x"), checked_number(chart[1], "y"));
}

// ---- shift suspension ----------------------------------------------------

ShiftSuspension::ShiftSuspension(int window, double roof, double metric_scale)
    : window_(window), roof_(roof), scale_(metric_scale) {
  if (window < 1 || window > 30) throw InputError("shift window must be in [1, 30]");
  if (!(roof > 0.0) || !std::isfinite(roof)) throw InputError("roof must be positive");
  if (!(metric_scale > 0.0) || !std::isfinite(metric_scale))
    throw InputError("metric_scale must be positive");
  certify_on_samples();
}

int ShiftSuspension::symbol(const Point& p, int index) { return ring_bit(p.cells, index); }

Point ShiftSuspension::with_symbols(std::span<const int> symbols, int first_index,
                                    double height) {
  Point p;
  for (std::size_t k = 0; k < symbols.size(); ++k)
    set_ring_bit(p.cells, first_index + static_cast<long long>(k), symbols[k] != 0);
  p.height = height;
  return p;
}

Point ShiftSuspension::shifted(const Point& p, long long n) {
  Point q = p;
  q.cells = rotate_ring(p.cells, n);
  return q;
}

nlohmann::ordered_json ShiftSuspension::params() const {
  return {{"window", window_}, {"roof", roof_}, {"metric_scale", scale_}};
}

Point ShiftSuspension::advance(const Point& x, double t) const {
  Point y = x;
  y.height = x.height + t;
  long long n = wrap_height(y.height, roof_);
  if (n != 0) y.cells = rotate_ring(x.cells, n);
  return y;
}

Feature ShiftSuspension::feature(const Point& x) const {
  Feature f;
  Ring r = rotate_ring(x.cells, -window_);
  int bits = 2 * window_ + 2;
  f.word = r[0] & ((std::uint64_t{1} << bits) - 1);
  f.v[0] = x.height;
  return f;
}

double ShiftSuspension::distance(const Feature& a, const Feature& b) const {
  // scale * max(circle gap of heights, sup_i 2^-|i| |E_i(a) - E_i(b)|) where
  // E_i blends symbols i and i+1 by the relative height; the blend makes the
  // metric continuous across the roof seam.
  double best = circle_gap(a.v[0], b.v[0], roof_);
  double ua = a.v[0] / roof_;
  double ub = b.v[0] / roof_;
  auto term = [&](int i) {
    unsigned k = static_cast<unsigned>(i + window_);
    double a0 = static_cast<double>((a.word >> k) & 1u);
    double a1 = static_cast<double>((a.word >> (k + 1)) & 1u);
    double b0 = static_cast<double>((b.word >> k) & 1u);
    double b1 = static_cast<double>((b.word >> (k + 1)) & 1u);
    return std::fabs(((1.0 - ua) * a0 + ua * a1) - ((1.0 - ub) * b0 + ub * b1));
  };
  double weight = 1.0;
  for (int r = 0; r <= window_; ++r, weight *= 0.5) {
    if (weight <= best) break;
    best = std::max(best, weight * term(r));
    if (r > 0) best = std::max(best, weight * term(-r));
  }
  return scale_ * best;
}

// Same terms as distance(), compared against the bound one at a time.
bool ShiftSuspension::within(const Feature& a, const Feature& b, double bound) const {
  if (scale_ * circle_gap(a.v[0], b.v[0], roof_) > bound) return false;
  if (a.word == b.word && a.v[0] == b.v[0]) return true;
  double ua = a.v[0] / roof_;
  double ub = b.v[0] / roof_;
  auto term = [&](int i) {
    unsigned k = static_cast<unsigned>(i + window_);
    double a0 = static_cast<double>((a.word >> k) & 1u);
    double a1 = static_cast<double>((a.word >> (k + 1)) & 1u);
    double b0 = static_cast<double>((b.word >> k) & 1u);
    double b1 = static_cast<double>((b.word >> (k + 1)) & 1u);
    return std::fabs(((1.0 - ua) * a0 + ua * a1) - ((1.0 - ub) * b0 + ub * b1));
  };
  double weight = 1.0;
  for (int r = 0; r <= window_; ++r, weight *= 0.5) {
    if (scale_ * weight <= bound) return true;
    if (scale_ * (weight * term(r)) > bound) return false;
    if (r > 0 && scale_ * (weight * term(-r)) > bound) return false;
  }
  return true;
}

double ShiftSuspension::diameter_bound() const { return scale_ * std::max(0.5 * roof_, 1.0); }

Point ShiftSuspension::sample(Rng& rng) const {
  Point p;
  for (auto& c : p.cells) c = rng();
  p.height = roof_ * uniform01(rng);
  return p;
}

Point ShiftSuspension::sample_near(const Point& x, double radius, Rng& rng) const {
  double r = radius / scale_;
  double height_span = std::min(0.5 * r, 0.5 * roof_) * (1.0 - 1e-12);
  int first_free = r >= 2.0 ? 0 : static_cast<int>(std::ceil(1.0 + std::log2(2.0 / r)));
  for (int attempt = 0; attempt < 64; ++attempt) {
    Point y = x;
    for (int j = 0; j < kRing; ++j) {
      int signed_index = j < kRing / 2 ? j : j - kRing;
      if (std::abs(signed_index) >= first_free)
        set_ring_bit(y.cells, signed_index, static_cast<int>(rng() >> 63));
    }
    y = advance(y, uniform(rng, -height_span, height_span));
    if (metric(x, y) <= radius) return y;
    height_span *= 0.5;
    ++first_free;
  }
  return x;
}

Point ShiftSuspension::sample_fiber(double coordinate, Rng& rng) const {
  Point p;
  for (auto& c : p.cells) c = rng();
  p.height = 0.0;
  return advance(p, coordinate);
}

Point ShiftSuspension::midpoint(const Point& a, const Point& b) const {
  return advance(a, 0.5 * circle_offset(a.height, b.height, roof_));
}

std::optional<PeriodicOrbit> ShiftSuspension::periodic_orbit() const {
  std::vector<int> word(kRing);
  for (int i = 0; i < kRing; ++i) word[static_cast<std::size_t>(i)] = (i % 4) >= 2;
  return PeriodicOrbit{with_symbols(word, 0, 0.0), 4.0 * roof_};
}

nlohmann::json ShiftSuspension::to_chart(const Point& x) const {
  return {x.cells[0], x.cells[1], x.cells[2], x.cells[3], x.height};
}

Point ShiftSuspension::from_chart(const nlohmann::json& chart) const {
  expect_chart(chart, 5, "shift-suspension");
  Point p;
  for (std::size_t k = 0; k < 4; ++k) {
    if (!chart[k].is_number_unsigned() && !(chart[k].is_number_integer() && chart[k].get<long long>() >= 0))
      throw InputError("shift-suspension chart words must be unsigned integers");
    p.cells[k] = chart[k].get<std::uint64_t>();
  }
  double h = checked_number(chart[4], "height");
  return advance(p, h);
}

// ---- cat suspension ------------------------------------------------------

CatSuspension::CatSuspension(double roof, double metric_scale)
    : roof_(roof), scale_(metric_scale) {
  if (!(roof > 0.0) || !std::isfinite(roof)) throw InputError("roof must be positive");
  if (!(metric_scale > 0.0) || !std::isfinite(metric_scale))
    throw InputError("metric_scale must be positive");
  certify_on_samples();
}

Point CatSuspension::at(double u1, double u2, double h) {
  Point p;
  p.cells[0] = to_turns(u1);
  p.cells[1] = to_turns(u2);
  p.height = h;
  return p;
}

Point CatSuspension::mapped(const Point& p, long long n) {
  Mat2 m = cat_power(n);
  Point q = p;
  q.cells[0] = m.a * p.cells[0] + m.b * p.cells[1];
  q.cells[1] = m.c * p.cells[0] + m.d * p.cells[1];
  return q;
}

nlohmann::ordered_json CatSuspension::params() const {
  return {{"roof", roof_}, {"metric_scale", scale_}};
}

Point CatSuspension::advance(const Point& x, double t) const {
  Point y = x;
  y.height = x.height + t;
  long long n = wrap_height(y.height, roof_);
  if (n != 0) {
    Point m = mapped(x, n);
    y.cells = m.cells;
  }
  return y;
}

Feature CatSuspension::feature(const Point& x) const {
  double w = x.height / roof_;
  std::uint64_t image[2] = {2 * x.cells[0] + x.cells[1], x.cells[0] + x.cells[1]};
  Feature f;
  for (std::size_t k = 0; k < 2; ++k) {
    double th0 = kTwoPi * from_turns(x.cells[k]);
    double th1 = kTwoPi * from_turns(image[k]);
    f.v[2 * k] = ((1.0 - w) * std::cos(th0) + w * std::cos(th1)) / kTwoPi;
    f.v[2 * k + 1] = ((1.0 - w) * std::sin(th0) + w * std::sin(th1)) / kTwoPi;
  }
  f.v[4] = x.height;
  return f;
}

double CatSuspension::distance(const Feature& a, const Feature& b) const {
  double best = circle_gap(a.v[4], b.v[4], roof_);
  best = std::max(best, std::hypot(a.v[0] - b.v[0], a.v[1] - b.v[1]));
  best = std::max(best, std::hypot(a.v[2] - b.v[2], a.v[3] - b.v[3]));
  return scale_ * best;
}

bool CatSuspension::within(const Feature& a, const Feature& b, double bound) const {
  if (scale_ * circle_gap(a.v[4], b.v[4], roof_) > bound) return false;
  if (scale_ * std::hypot(a.v[0] - b.v[0], a.v[1] - b.v[1]) > bound) return false;
  return scale_ * std::hypot(a.v[2] - b.v[2], a.v[3] - b.v[3]) <= bound;
}

double CatSuspension::diameter_bound() const {
  return scale_ * std::max(0.5 * roof_, 1.0 / std::numbers::pi);
}

Point CatSuspension::sample(Rng& rng) const {
  Point p;
  p.cells[0] = rng() & kGridMask;
  p.cells[1] = rng() & kGridMask;
  p.height = roof_ * uniform01(rng);
  return p;
}

Point CatSuspension::sample_near(const Point& x, double radius, Rng& rng) const {
  double r = radius / scale_;
  double span = std::min(r / 8.0, 0.25);
  double height_span = std::min(0.5 * r, 0.5 * roof_) * (1.0 - 1e-12);
  for (int attempt = 0; attempt < 64; ++attempt) {
    Point y = x;
    y.cells[0] += to_turns(uniform(rng, -span, span));
    y.cells[1] += to_turns(uniform(rng, -span, span));
    y = advance(y, uniform(rng, -height_span, height_span));
    if (metric(x, y) <= radius) return y;
    span *= 0.5;
    height_span *= 0.5;
  }
  return x;
}

Point CatSuspension::sample_fiber(double coordinate, Rng& rng) const {
  Point p;
  p.cells[0] = rng() & kGridMask;
  p.cells[1] = rng() & kGridMask;
  return advance(p, coordinate);
}

Point CatSuspension::midpoint(const Point& a, const Point& b) const {
  Point m = a;
  m.cells[0] = midpoint_turns(a.cells[0], b.cells[0]);
  m.cells[1] = midpoint_turns(a.cells[1], b.cells[1]);
  return advance(m, 0.5 * circle_offset(a.height, b.height, roof_));
}

std::optional<PeriodicOrbit> CatSuspension::periodic_orbit() const {
  return PeriodicOrbit{Point{}, roof_};
}

nlohmann::json CatSuspension::to_chart(const Point& x) const {
  return {from_turns(x.cells[0]), from_turns(x.cells[1]), x.height};
}

Point CatSuspension::from_chart(const nlohmann::json& chart) const {
  expect_chart(chart, 3, "cat-suspension");
  Point p = at(checked_number(chart[0], "u1"), checked_number(chart[1], "u2"), 0.0);
  return advance(p, checked_number(chart[2], "height"));
}

// ---- factory and trajectories --------------------------------------------

std::unique_ptr<FlowSystem> make_system(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("id") || !spec["id"].is_string())
    throw ConfigError("system.id", "missing system identifier");
  std::string id = spec["id"].get<std::string>();
  auto num = [&](const char* key, double fallback) {
    if (!spec.contains(key)) return fallback;
    if (!spec[key].is_number()) throw ConfigError(std::string("system.") + key, "must be a number");
    return spec[key].get<double>();
  };
  try {
    if (id == "torus-linear") {
      double vx = 1.0, vy = std::sqrt(2.0);
      if (spec.contains("direction")) {
        const auto& d = spec["direction"];
        if (!d.is_array() || d.size() != 2 || !d[0].is_number() || !d[1].is_number())
          throw ConfigError("system.direction", "must be a pair of numbers");
        vx = d[0].get<double>();
        vy = d[1].get<double>();
      }
      return std::make_unique<TorusLinearFlow>(vx, vy);
    }
    if (id == "shift-suspension") {
      double w = num("window", 16);
      if (w != std::floor(w)) throw ConfigError("system.window", "must be an integer");
      return std::make_unique<ShiftSuspension>(static_cast<int>(w), num("roof", 1.0),
                                               num("metric_scale", 8.0));
    }
    if (id == "cat-suspension")
      return std::make_unique<CatSuspension>(num("roof", 1.0), num("metric_scale", 8.0));
  } catch (const InputError& e) {
    throw ConfigError("system", e.what());
  }
  throw ConfigError("system.id", "unknown system '" + id + "'");
}

std::vector<double> time_grid(double t, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("dt must be positive");
  if (!(t > 0.0) || !std::isfinite(t)) throw InputError("duration must be positive");
  auto steps = static_cast<std::size_t>(std::floor(t / dt + 1e-9));
  std::vector<double> grid;
  grid.reserve(steps + 2);
  for (std::size_t k = 0; k <= steps; ++k) grid.push_back(static_cast<double>(k) * dt);
  if (std::fabs(grid.back() - t) <= 1e-9 * std::max(1.0, t)) grid.back() = t;
  else grid.push_back(t);
  if (grid.size() == 1) grid.push_back(t);
  return grid;
}

Trajectory sample_trajectory(const FlowSystem& system, const Point& x, double t, double dt) {
  Trajectory tr;
  tr.base = x;
  tr.times = time_grid(t, dt);
  tr.points.reserve(tr.times.size());
  for (double s : tr.times) tr.points.push_back(system.evaluate(x, s));
  return tr;
}

double certify_fixed_point_free(const FlowSystem& system, std::span<const Point> samples) {
  if (samples.empty()) throw InputError("certify_fixed_point_free needs samples");
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double best = 0.0;
    for (int k = 1; k <= 10; ++k)
      best = std::max(best, system.metric(system.evaluate(samples[i], 0.1 * k), samples[i]));
    if (best < 1e-6)
      throw FixedPointError("fixed-point suspected at sample " + std::to_string(i) + " " +
                                system.to_chart(samples[i]).dump(),
                            i);
    worst = std::min(worst, best);
  }
  return worst;
}

}  // namespace flowpack
