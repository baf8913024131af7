#include "flowpack/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace flowpack {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

const json* find(const json& obj, const char* key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const json& obj, const std::string& path, const char* key, double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number() || !std::isfinite(v->get<double>()))
    throw ConfigError(join(path, key), "must be a finite number");
  return v->get<double>();
}

double positive(const json& obj, const std::string& path, const char* key, double fallback) {
  double x = number(obj, path, key, fallback);
  if (!(x > 0.0)) throw ConfigError(join(path, key), "must be positive");
  return x;
}

double nonnegative(const json& obj, const std::string& path, const char* key, double fallback) {
  double x = number(obj, path, key, fallback);
  if (!(x >= 0.0)) throw ConfigError(join(path, key), "must be >= 0");
  return x;
}

std::uint64_t count(const json& obj, const std::string& path, const char* key,
                    std::uint64_t fallback, std::uint64_t min_value = 1) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0))
    throw ConfigError(join(path, key), "must be a nonnegative integer");
  auto x = v->get<std::uint64_t>();
  if (x < min_value)
    throw ConfigError(join(path, key), "must be >= " + std::to_string(min_value));
  return x;
}

bool flag(const json& obj, const std::string& path, const char* key, bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(join(path, key), "must be a boolean");
  return v->get<bool>();
}

const json& section(const json& obj, const char* key) {
  static const json empty = json::object();
  const json* v = find(obj, key);
  if (!v) return empty;
  if (!v->is_object()) throw ConfigError(key, "must be an object");
  return *v;
}

std::string text(const json& obj, const std::string& path, const char* key) {
  const json* v = find(obj, key);
  if (!v || !v->is_string()) throw ConfigError(join(path, key), "must be a string");
  return v->get<std::string>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::vector<double> number_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "must be an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) throw ConfigError(path + "[" + std::to_string(k) + "]", "must be a number");
    out.push_back(v[k].get<double>());
  }
  return out;
}

std::vector<double> parse_t_list(const json& v, const std::string& path) {
  std::vector<double> ts;
  if (v.is_object()) {
    double lo = positive(v, path, "t_min", 1.0);
    double hi = positive(v, path, "t_max", 1.0);
    double step = positive(v, path, "step", 1.0);
    ts = t_grid(lo, hi, step);
  } else {
    ts = number_list(v, path);
  }
  if (ts.size() < 3) throw ConfigError(path, "needs at least 3 times");
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (!(ts[k] > 0.0)) throw ConfigError(path, "times must be positive");
    if (k > 0 && !(ts[k] > ts[k - 1])) throw ConfigError(path, "times must be increasing");
  }
  return ts;
}

void validate_measure(const json& spec, const std::string& path, const fs::path& base) {
  if (!spec.is_object()) throw ConfigError(path, "must be an object");
  std::string kind = text(spec, path, "kind");
  if (kind == "lift" || kind == "periodic-orbit") {
    count(spec, path, "atoms", 1);
    count(spec, path, "seed", 0, 0);
  } else if (kind == "point-mass") {
    if (!find(spec, "point")) throw ConfigError(join(path, "point"), "missing chart coordinates");
  } else if (kind == "file") {
    fs::path p = resolve(base, text(spec, path, "path"));
    if (!fs::exists(p)) throw ConfigError(join(path, "path"), "file not found: " + p.string());
  } else if (kind == "mixture") {
    const json* comps = find(spec, "components");
    if (!comps || !comps->is_array() || comps->empty())
      throw ConfigError(join(path, "components"), "must be a nonempty array");
    for (std::size_t k = 0; k < comps->size(); ++k) {
      std::string cp = join(path, "components") + "[" + std::to_string(k) + "]";
      positive((*comps)[k], cp, "weight", 1.0);
      const json* inner = find((*comps)[k], "measure");
      if (!inner) throw ConfigError(join(cp, "measure"), "missing");
      validate_measure(*inner, join(cp, "measure"), base);
    }
  } else {
    throw ConfigError(join(path, "kind"), "unknown measure kind '" + kind + "'");
  }
}

std::string measure_id(const json& spec, std::size_t index) {
  if (const json* id = find(spec, "id"); id && id->is_string()) return id->get<std::string>();
  return spec.value("kind", std::string("measure")) + "#" + std::to_string(index);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

ojson estimate_json(const EntropyEstimate& e) {
  ojson j;
  j["value"] = e.value;
  j["method"] = e.method;
  j["eps"] = e.eps;
  j["t_window"] = {e.t_min, e.t_max};
  j["dt"] = e.dt;
  j["fit_residual"] = e.fit_residual;
  j["seed"] = e.seed;
  j["raw_slope"] = e.raw_slope;
  j["t_values"] = e.t_values;
  j["counts"] = e.counts;
  if (e.critical_bracket)
    j["critical_bracket"] = {e.critical_bracket->first, e.critical_bracket->second};
  else
    j["critical_bracket"] = nullptr;
  return j;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << body;
}

std::vector<double> frostman_t_list(const FrostmanState& last, double dt) {
  double lo = *std::min_element(last.m.begin(), last.m.end());
  double hi = *std::max_element(last.m.begin(), last.m.end());
  double start = std::max(dt, 2.0 * lo - hi);
  std::vector<double> ts;
  for (double t = start; t <= hi + 1e-9; t += dt) ts.push_back(t);
  while (ts.size() < 3) ts.insert(ts.begin(), std::max(dt, ts.front() - dt) * 0.5);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("$", "config must be a JSON object");
  ExperimentConfig c;
  c.base_dir = base_dir;

  const json* sys = find(doc, "system");
  if (!sys || !sys->is_object()) throw ConfigError("system", "missing system block");
  c.system = *sys;
  make_system(c.system);

  c.subset = find(doc, "subset") ? doc["subset"] : json{{"kind", "whole"}};
  {
    const json& s = c.subset;
    if (!s.is_object()) throw ConfigError("subset", "must be an object");
    std::string kind = text(s, "subset", "kind");
    if (kind == "fiber") {
      number(s, "subset", "coordinate", 0.0);
    } else if (kind == "neighborhood") {
      if (!find(s, "center")) throw ConfigError("subset.center", "missing chart coordinates");
      positive(s, "subset", "radius", 1.0);
    } else if (kind == "samples") {
      fs::path p = resolve(base_dir, text(s, "subset", "path"));
      if (!fs::exists(p)) throw ConfigError("subset.path", "file not found: " + p.string());
    } else if (kind != "whole") {
      throw ConfigError("subset.kind", "unknown subset kind '" + kind + "'");
    }
  }

  const json* eps = find(doc, "eps");
  if (!eps) throw ConfigError("eps", "missing eps schedule");
  c.eps = eps->is_number() ? std::vector<double>{eps->get<double>()} : number_list(*eps, "eps");
  if (c.eps.empty()) throw ConfigError("eps", "schedule is empty");
  for (std::size_t k = 0; k < c.eps.size(); ++k) {
    if (!(c.eps[k] > 0.0)) throw ConfigError("eps[" + std::to_string(k) + "]", "must be positive");
    if (k > 0 && !(c.eps[k] < c.eps[k - 1]))
      throw ConfigError("eps", "schedule must be strictly decreasing");
  }

  if (const json* tw = find(doc, "t_window")) {
    auto v = number_list(*tw, "t_window");
    if (v.size() != 2) throw ConfigError("t_window", "must be [t_min, t_max]");
    if (!(v[0] > 0.0) || !(v[1] >= v[0] + 4.0))
      throw ConfigError("t_window", "needs t_min > 0 and t_max >= t_min + 4");
    c.t_window = {v[0], v[1]};
  }
  c.dt = nonnegative(doc, "", "dt", 0.0);
  c.seed = count(doc, "", "seed", 1, 0);
  c.samples = count(doc, "", "samples", 2000);

  static const std::set<std::string> known{"packing", "bowen", "local-entropy", "frostman"};
  if (const json* est = find(doc, "estimators")) {
    if (!est->is_array()) throw ConfigError("estimators", "must be an array of names");
    for (std::size_t k = 0; k < est->size(); ++k) {
      std::string p = "estimators[" + std::to_string(k) + "]";
      if (!(*est)[k].is_string()) throw ConfigError(p, "must be a string");
      std::string name = (*est)[k].get<std::string>();
      if (!known.count(name)) throw ConfigError(p, "unknown estimator '" + name + "'");
      c.estimators.push_back(name);
    }
  } else {
    c.estimators = {"packing"};
  }

  const json& rp = section(doc, "reparam");
  ReparamOptions reparam;
  reparam.max_cells = positive(rp, "reparam", "max_cells", reparam.max_cells);
  reparam.eta_margin = nonnegative(rp, "reparam", "eta_margin", reparam.eta_margin);

  const json& pk = section(doc, "packing");
  c.packing.reparam = reparam;
  c.packing_restarts = static_cast<int>(count(pk, "packing", "restarts", 1));
  c.packing.probe_count = count(pk, "packing", "probe_count", c.packing.probe_count, 0);
  c.packing.t_spread = nonnegative(pk, "packing", "t_spread", c.packing.t_spread);
  c.packing.t_step = positive(pk, "packing", "t_step", c.packing.t_step);
  c.packing.critical_check = flag(pk, "packing", "critical_check", c.packing.critical_check);
  c.packing.critical_iterations =
      static_cast<int>(count(pk, "packing", "critical_iterations", 6, 0));
  c.packing.critical_candidates =
      count(pk, "packing", "critical_candidates", c.packing.critical_candidates);

  const json& cv = section(doc, "covering");
  c.covering.reparam = reparam;
  c.covering_eta = number(cv, "covering", "eta", c.covering_eta);
  if (!(c.covering_eta > 0.0 && c.covering_eta < 1.0))
    throw ConfigError("covering.eta", "must lie in (0, 1)");
  c.covering.delta = positive(cv, "covering", "delta", c.covering.delta);
  c.covering.restarts = static_cast<int>(count(cv, "covering", "restarts", 1));
  c.covering.t_step = c.packing.t_step;

  if (const json* ms = find(doc, "measures")) {
    if (!ms->is_array()) throw ConfigError("measures", "must be an array");
    for (std::size_t k = 0; k < ms->size(); ++k) {
      validate_measure((*ms)[k], "measures[" + std::to_string(k) + "]", base_dir);
      c.measures.push_back((*ms)[k]);
    }
  }

  const json& le = section(doc, "local_entropy");
  c.local_entropy.eps = nonnegative(le, "local_entropy", "eps", 0.0);
  c.local_entropy.t_list = find(le, "t_list")
                               ? parse_t_list(le["t_list"], "local_entropy.t_list")
                               : t_grid(c.t_window.first, c.t_window.second, c.packing.t_step);
  c.local_entropy.samples = count(le, "local_entropy", "samples", c.local_entropy.samples);
  c.local_entropy.dt = nonnegative(le, "local_entropy", "dt", 0.0);

  if (const json* fr = find(doc, "frostman")) {
    if (!fr->is_object()) throw ConfigError("frostman", "must be an object");
    FrostmanConfig f;
    if (find(*fr, "s")) f.s = positive(*fr, "frostman", "s", 1.0);
    f.s_factor = positive(*fr, "frostman", "s_factor", f.s_factor);
    f.eps = nonnegative(*fr, "frostman", "eps", 0.0);
    f.p_max = static_cast<int>(count(*fr, "frostman", "p_max", 3));
    f.dt = nonnegative(*fr, "frostman", "dt", 0.0);
    f.entropy_samples = count(*fr, "frostman", "entropy_samples", f.entropy_samples);
    FrostmanOptions& o = f.options;
    o.packing.reparam = reparam;
    o.packing.t_spread = nonnegative(*fr, "frostman", "t_spread", o.packing.t_spread);
    o.n_start = positive(*fr, "frostman", "n_start", o.n_start);
    o.floor_step = positive(*fr, "frostman", "floor_step", o.floor_step);
    o.floor_attempts = static_cast<int>(count(*fr, "frostman", "floor_attempts", 8));
    o.root_samples = count(*fr, "frostman", "root_samples", o.root_samples);
    o.node_samples = count(*fr, "frostman", "node_samples", o.node_samples);
    o.separation_probes = count(*fr, "frostman", "separation_probes", o.separation_probes, 0);
    o.pool_doublings = static_cast<int>(count(*fr, "frostman", "pool_doublings", 3, 0));
    o.select_margin = nonnegative(*fr, "frostman", "select_margin", o.select_margin);
    c.frostman = f;
  }

  const json& tol = section(doc, "tolerances");
  c.tolerances.lower_bound = nonnegative(tol, "tolerances", "lower_bound", 0.15);
  c.tolerances.prop26 = nonnegative(tol, "tolerances", "prop26", 0.05);
  c.tolerances.frostman = nonnegative(tol, "tolerances", "frostman", 0.1);

  const json& out = section(doc, "output");
  if (find(out, "dir")) c.out_dir = resolve(base_dir, text(out, "output", "dir"));
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

std::unique_ptr<Subset> make_subset(const FlowSystem& system, const ExperimentConfig& config) {
  const json& s = config.subset;
  std::string kind = s.value("kind", std::string("whole"));
  if (kind == "fiber") return std::make_unique<Fiber>(system, s.value("coordinate", 0.0));
  if (kind == "neighborhood") {
    Point center;
    try {
      center = system.from_chart(s["center"]);
    } catch (const Error& e) {
      throw ConfigError("subset.center", e.what());
    }
    return std::make_unique<Neighborhood>(system, center, s["radius"].get<double>());
  }
  if (kind == "samples") {
    fs::path p = resolve(config.base_dir, s["path"].get<std::string>());
    std::ifstream in(p);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("subset.path", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.contains("points") || !doc["points"].is_array() || doc["points"].empty())
      throw ConfigError("subset.path", "samples file needs a nonempty 'points' array");
    std::vector<Point> pts;
    try {
      for (const auto& chart : doc["points"]) pts.push_back(system.from_chart(chart));
    } catch (const Error& e) {
      throw ConfigError("subset.path", e.what());
    }
    return std::make_unique<FiniteSamples>(system, std::move(pts), "samples:" + p.filename().string());
  }
  return std::make_unique<WholeSpace>(system);
}

DiscreteMeasure make_config_measure(const FlowSystem& system, const json& spec,
                                    const fs::path& base_dir, std::uint64_t default_seed) {
  std::string kind = spec.value("kind", std::string());
  try {
    if (kind == "lift")
      return lift_measure(system, spec.value("atoms", std::size_t{20000}),
                          spec.value("seed", default_seed));
    if (kind == "periodic-orbit") {
      auto orbit = system.periodic_orbit();
      if (!orbit) throw ConfigError("measures", system.name() + " has no built-in periodic orbit");
      return orbit_measure(system, *orbit, spec.value("atoms", std::size_t{64}));
    }
    if (kind == "point-mass") return point_mass(system.from_chart(spec["point"]));
    if (kind == "file") {
      std::ifstream in(resolve(base_dir, spec["path"].get<std::string>()));
      return measure_from_json(system, json::parse(in));
    }
    if (kind == "mixture") {
      std::optional<DiscreteMeasure> acc;
      double acc_w = 0.0;
      for (const auto& comp : spec["components"]) {
        double w = comp.value("weight", 1.0);
        DiscreteMeasure m = make_config_measure(system, comp["measure"], base_dir, default_seed);
        if (!acc) {
          std::vector<Atom> atoms;
          for (const Atom& a : m.atoms) atoms.push_back(Atom{a.point, w * a.weight / m.total_mass});
          acc = make_measure(std::move(atoms));
        } else {
          acc = mixture(*acc, acc_w, m, w);
        }
        acc_w += w;
      }
      return *acc;
    }
  } catch (const json::exception& e) {
    throw ConfigError("measures", e.what());
  } catch (const InputError& e) {
    throw ConfigError("measures", e.what());
  }
  throw ConfigError("measures", "unknown measure kind '" + kind + "'");
}

bool VPReport::all_pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

Stages stages_from_estimators(const std::vector<std::string>& estimators) {
  Stages s;
  for (const auto& e : estimators) {
    s.packing |= e == "packing";
    s.bowen |= e == "bowen";
    s.local_entropy |= e == "local-entropy";
    s.frostman |= e == "frostman";
  }
  return s;
}

VPReport run_stages(const ExperimentConfig& config, const Stages& stages,
                    const fs::path& out_dir) {
  auto system = make_system(config.system);
  auto subset = make_subset(*system, config);
  VPReport report;
  report.system = system->name();
  report.subset = subset->id();

  Rng zrng(mix_seed(config.seed, 0x5a));
  std::vector<Point> Z = subset->draw(config.samples, zrng);

  std::ostringstream packing_csv, bowen_csv, measures_csv;
  packing_csv << "system,set,eps,t,R,s_fit,residual,seed\n";
  bowen_csv << "system,set,eps,t,cover_size,s_fit,residual,seed\n";
  measures_csv << "system,set,measure,eps,upper_local_entropy,samples,seed\n";
  auto rows = [&](std::ostringstream& csv, const EntropyEstimate& e) {
    for (std::size_t k = 0; k < e.t_values.size(); ++k)
      csv << report.system << ',' << report.subset << ',' << fmt(e.eps) << ','
          << fmt(e.t_values[k]) << ',' << fmt(e.counts[k]) << ',' << fmt(e.value) << ','
          << fmt(e.fit_residual) << ',' << e.seed << '\n';
  };

  const bool need_packing = stages.packing || stages.verdicts ||
                            (stages.frostman && config.frostman && !config.frostman->s);
  for (double eps : config.eps) {
    EpsResult r;
    r.eps = eps;
    double dt = config.dt > 0.0 ? config.dt : default_dt(eps);
    if (need_packing) {
      try {
        r.packing = estimate_packing_entropy(*system, Z, eps, config.t_window, dt,
                                             config.packing_restarts, config.seed, config.packing);
        rows(packing_csv, *r.packing);
      } catch (const Error& e) {
        r.packing_error = e.what();
        report.estimator_error = true;
      }
    }
    if (stages.bowen || stages.verdicts) {
      CoverOptions co = config.covering;
      co.dt = dt;
      try {
        r.bowen = estimate_bowen_entropy(*system, Z, eps, config.t_window, config.seed, co);
        rows(bowen_csv, *r.bowen);
      } catch (const Error& e) {
        r.bowen_error = e.what();
        report.estimator_error = true;
      }
    }
    report.per_eps.push_back(std::move(r));
  }

  if (stages.local_entropy || stages.verdicts) {
    double eps = config.local_entropy.eps > 0.0 ? config.local_entropy.eps : config.eps.back();
    double dt = config.local_entropy.dt > 0.0 ? config.local_entropy.dt
                : config.dt > 0.0             ? config.dt
                                              : default_dt(eps);
    for (std::size_t k = 0; k < config.measures.size(); ++k) {
      MeasureEntropy me;
      me.id = measure_id(config.measures[k], k);
      me.eps = eps;
      try {
        DiscreteMeasure mu = make_config_measure(*system, config.measures[k], config.base_dir,
                                                 mix_seed(config.seed, 0x3e + k));
        me.value = upper_local_entropy(*system, mu, eps, config.local_entropy.t_list,
                                       config.local_entropy.samples, config.seed, dt,
                                       config.packing.reparam);
        measures_csv << report.system << ',' << report.subset << ',' << me.id << ','
                     << fmt(eps) << ',' << fmt(*me.value) << ',' << config.local_entropy.samples
                     << ',' << config.seed << '\n';
      } catch (const Error& e) {
        me.error = e.what();
        report.estimator_error = true;
      }
      report.measures.push_back(std::move(me));
    }
  }

  std::optional<FrostmanResult> frostman;
  if (stages.frostman && config.frostman) {
    const FrostmanConfig& fc = *config.frostman;
    FrostmanSummary fs_;
    fs_.eps = fc.eps > 0.0 ? fc.eps : config.eps.back();
    double dt = fc.dt > 0.0 ? fc.dt : config.dt > 0.0 ? config.dt : default_dt(fs_.eps);
    std::optional<double> s = fc.s;
    if (!s) {
      double best = -1.0;
      for (const EpsResult& r : report.per_eps)
        if (r.packing) best = std::max(best, r.packing->value);
      if (best > 0.0) s = fc.s_factor * best;
    }
    if (!s) {
      fs_.error = "no positive packing estimate to derive s from";
      report.estimator_error = true;
    } else {
      fs_.s = *s;
      try {
        frostman = frostman_construct(*system, *subset, *s, fs_.eps, fc.p_max, config.seed, dt,
                                      fc.options);
        fs_.step1_sum = frostman->step1_sum;
        fs_.unnormalized_mass = frostman->unnormalized_mass;
        fs_.atoms = frostman->measure.atoms.size();
        fs_.mass_violations = check_mass_bounds(*system, frostman->history, dt).size();
        fs_.invariant_violations =
            check_frostman_invariants(*system, frostman->history, dt, fc.options.packing.reparam)
                .size();
        auto ts = frostman_t_list(frostman->history.back(), dt);
        fs_.achieved = upper_local_entropy(*system, frostman->measure, fs_.eps, ts,
                                           fc.entropy_samples, config.seed, dt,
                                           fc.options.packing.reparam);
      } catch (const Error& e) {
        fs_.error = e.what();
        report.estimator_error = true;
      }
    }
    report.frostman = fs_;
  }

  if (stages.verdicts) {
    double packing_best = -1.0;
    std::string packing_ref;
    for (const EpsResult& r : report.per_eps)
      if (r.packing && r.packing->value > packing_best) {
        packing_best = r.packing->value;
        packing_ref = "packing@" + fmt(r.eps);
      }
    double measure_best = -1.0;
    std::string measure_ref;
    for (const MeasureEntropy& m : report.measures)
      if (m.value && *m.value > measure_best) {
        measure_best = *m.value;
        measure_ref = "measure:" + m.id;
      }
    if (packing_best >= 0.0 && measure_best >= 0.0) {
      Verdict v{"lower-bound", measure_best, packing_best + config.tolerances.lower_bound, 0.0,
                false, {measure_ref, packing_ref}};
      v.margin = v.rhs - v.lhs;
      v.pass = v.margin >= 0.0;
      report.verdicts.push_back(v);
    }
    for (const EpsResult& r : report.per_eps)
      if (r.packing && r.bowen) {
        Verdict v{"bowen<=packing@" + fmt(r.eps), r.bowen->value,
                  r.packing->value + config.tolerances.prop26, 0.0, false,
                  {"bowen@" + fmt(r.eps), "packing@" + fmt(r.eps)}};
        v.margin = v.rhs - v.lhs;
        v.pass = v.margin >= 0.0;
        report.verdicts.push_back(v);
      }
    if (report.frostman && report.frostman->achieved) {
      const FrostmanSummary& f = *report.frostman;
      Verdict v{"frostman", f.s - config.tolerances.frostman, *f.achieved, 0.0, false,
                {"frostman"}};
      v.margin = v.rhs - v.lhs;
      v.pass = v.margin >= 0.0 && f.mass_violations == 0 && f.invariant_violations == 0;
      report.verdicts.push_back(v);
    }
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    if (need_packing) write_text(out_dir / "packing.csv", packing_csv.str());
    if (stages.bowen || stages.verdicts) write_text(out_dir / "bowen.csv", bowen_csv.str());
    if (stages.local_entropy || stages.verdicts)
      write_text(out_dir / "measures.csv", measures_csv.str());
    if (frostman) {
      write_text(out_dir / "frostman.json", frostman_to_json(*system, frostman->history).dump(2));
      write_text(out_dir / "frostman_measure.json",
                 measure_to_json(*system, frostman->measure).dump(2));
    }
    write_text(out_dir / "summary.json", report_to_json(report).dump(2) + "\n");
  }
  return report;
}

VPReport run_experiment(const ExperimentConfig& config) {
  return run_stages(config, stages_from_estimators(config.estimators), config.out_dir);
}

VPReport verify_variational_principle(const ExperimentConfig& config) {
  if (config.measures.empty())
    throw ConfigError("measures", "verify-vp needs at least one measure");
  Stages s;
  s.packing = s.bowen = s.local_entropy = s.verdicts = true;
  s.frostman = config.frostman.has_value();
  return run_stages(config, s, config.out_dir);
}

nlohmann::ordered_json report_to_json(const VPReport& report) {
  ojson j;
  j["system"] = report.system;
  j["subset"] = report.subset;
  auto& per = j["per_eps"] = ojson::array();
  for (const EpsResult& r : report.per_eps) {
    ojson e;
    e["eps"] = r.eps;
    if (r.packing) e["packing"] = estimate_json(*r.packing);
    if (!r.packing_error.empty()) e["packing_error"] = r.packing_error;
    if (r.bowen) e["bowen"] = estimate_json(*r.bowen);
    if (!r.bowen_error.empty()) e["bowen_error"] = r.bowen_error;
    per.push_back(std::move(e));
  }
  auto& ver = j["verdicts"] = ojson::array();
  for (const Verdict& v : report.verdicts) {
    ojson e;
    e["name"] = v.name;
    e["pass"] = v.pass;
    e["lhs"] = v.lhs;
    e["rhs"] = v.rhs;
    e["margin"] = v.margin;
    e["refs"] = v.refs;
    ver.push_back(std::move(e));
  }
  auto& ms = j["measures"] = ojson::array();
  for (const MeasureEntropy& m : report.measures) {
    ojson e;
    e["id"] = m.id;
    e["eps"] = m.eps;
    e["upper_local_entropy"] = m.value ? ojson(*m.value) : ojson(nullptr);
    if (!m.error.empty()) e["error"] = m.error;
    ms.push_back(std::move(e));
  }
  if (report.frostman) {
    const FrostmanSummary& f = *report.frostman;
    ojson e;
    e["s"] = f.s;
    e["eps"] = f.eps;
    e["achieved"] = f.achieved ? ojson(*f.achieved) : ojson(nullptr);
    e["step1_sum"] = f.step1_sum;
    e["unnormalized_mass"] = f.unnormalized_mass;
    e["atoms"] = f.atoms;
    e["mass_violations"] = f.mass_violations;
    e["invariant_violations"] = f.invariant_violations;
    if (!f.error.empty()) e["error"] = f.error;
    j["frostman"] = std::move(e);
  } else {
    j["frostman"] = nullptr;
  }
  j["estimator_error"] = report.estimator_error;
  return j;
}

}  // namespace flowpack
