#include "cumlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "cumlab/cumtensor.hpp"
#include "cumlab/datagen.hpp"
#include "cumlab/detect.hpp"
#include "cumlab/hermite.hpp"
#include "cumlab/ldlr.hpp"
#include "cumlab/learn.hpp"
#include "cumlab/likelihood.hpp"
#include "cumlab/rng.hpp"

#ifndef CUMLAB_VERSION
#define CUMLAB_VERSION "0.1.0"
#endif

namespace cumlab {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- plumbing

struct MetricRow {
  int run;
  double value;
};

struct PointResult {
  std::map<std::string, std::vector<MetricRow>> metrics;
  std::map<std::string, std::string> files;  // path relative to out dir -> content
  std::string error;
  double wall_seconds = 0.0;
};

struct Point {
  int id = 0;
  Coords coords;
  std::uint64_t seed = 0;
  std::function<void(PointResult&)> task;
};

using Fragments = std::map<int, std::map<std::string, std::vector<MetricRow>>>;

struct Plan {
  std::string kind;
  std::vector<std::string> coord_names;
  std::vector<std::string> metrics;
  std::vector<Point> points;
  json config;
  std::uint64_t root_seed = 0;
  // Extra CSVs built from the assembled fragments of every point.
  std::function<std::map<std::string, std::string>(const Plan&, const Fragments&)> summarise;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + tmp.string());
    os << content;
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string fmt(double x) { return format_double(x); }
std::string fmt(long long x) { return std::to_string(x); }

std::string coord_prefix(const Point& p) {
  std::string s = std::to_string(p.id);
  for (const auto& [k, v] : p.coords) s += "," + v;
  return s;
}

// ---------------------------------------------------------------- config access

void check_keys(const json& cfg, const std::set<std::string>& allowed) {
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : cfg.items()) {
    if (k == "experiment" || k == "seed" || k == "comment") continue;
    if (!allowed.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
}

double get_num(const json& cfg, const std::string& key, std::optional<double> def = {}) {
  if (!cfg.contains(key)) {
    if (def) return *def;
    throw ConfigError("missing required key '" + key + "'");
  }
  const json& v = cfg.at(key);
  if (!v.is_number()) throw ConfigError("key '" + key + "' must be a number");
  return v.get<double>();
}

long long get_int(const json& cfg, const std::string& key, std::optional<long long> def = {}) {
  double x = get_num(cfg, key, def ? std::optional<double>(static_cast<double>(*def)) : std::nullopt);
  if (x != std::floor(x)) throw ConfigError("key '" + key + "' must be an integer");
  return static_cast<long long>(x);
}

std::vector<double> get_list(const json& cfg, const std::string& key,
                             std::optional<std::vector<double>> def = {}) {
  if (!cfg.contains(key)) {
    if (def) return *def;
    throw ConfigError("missing required key '" + key + "'");
  }
  const json& v = cfg.at(key);
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("key '" + key + "' must hold numbers");
      out.push_back(e.get<double>());
    }
  } else {
    throw ConfigError("key '" + key + "' must be a number or an array of numbers");
  }
  if (out.empty()) throw ConfigError("grid '" + key + "' is empty");
  return out;
}

std::vector<long long> get_int_list(const json& cfg, const std::string& key,
                                    std::optional<std::vector<double>> def = {}) {
  std::vector<long long> out;
  for (double x : get_list(cfg, key, def)) {
    if (x != std::floor(x)) throw ConfigError("key '" + key + "' must hold integers");
    out.push_back(static_cast<long long>(x));
  }
  return out;
}

std::vector<std::string> get_str_list(const json& cfg, const std::string& key,
                                      std::vector<std::string> def) {
  if (!cfg.contains(key)) return def;
  const json& v = cfg.at(key);
  std::vector<std::string> out;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
  } else if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError("key '" + key + "' must hold strings");
      out.push_back(e.get<std::string>());
    }
  } else {
    throw ConfigError("key '" + key + "' must be a string or an array of strings");
  }
  if (out.empty()) throw ConfigError("grid '" + key + "' is empty");
  return out;
}

std::string get_str(const json& cfg, const std::string& key, std::string def) {
  if (!cfg.contains(key)) return def;
  if (!cfg.at(key).is_string()) throw ConfigError("key '" + key + "' must be a string");
  return cfg.at(key).get<std::string>();
}

bool get_bool(const json& cfg, const std::string& key, bool def) {
  if (!cfg.contains(key)) return def;
  if (!cfg.at(key).is_boolean()) throw ConfigError("key '" + key + "' must be a boolean");
  return cfg.at(key).get<bool>();
}

GDistribution parse_g(const std::string& s) {
  try {
    return parse_g_distribution(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

// ---------------------------------------------------------------- experiments

Plan plan_lr_curve(const json& cfg) {
  check_keys(cfg, {"beta", "g", "d", "theta", "gamma"});
  Plan plan;
  plan.kind = "lr-curve";
  auto betas = get_list(cfg, "beta");
  auto gs = get_str_list(cfg, "g", {"rademacher"});
  auto ds = get_int_list(cfg, "d");
  const bool by_gamma = cfg.contains("gamma");
  require(!(by_gamma && cfg.contains("theta")), "give either 'theta' or 'gamma', not both");
  auto sched = by_gamma ? get_list(cfg, "gamma") : get_list(cfg, "theta");
  const std::string sched_name = by_gamma ? "gamma" : "theta";
  for (double b : betas) require(b >= 0 && std::isfinite(b), "beta must be finite and >= 0");
  for (auto d : ds) require(d >= 1 && d <= 10'000'000, "d must lie in [1, 1e7]");
  if (by_gamma)
    for (double gm : sched) require(gm > 0, "gamma must be > 0");
  plan.coord_names = {"g", "beta", "d", sched_name, "n"};
  plan.metrics = {"log_norm_sq"};
  for (const auto& gname : gs) {
    GDistribution g = parse_g(gname);
    for (double beta : betas)
      for (long long d : ds)
        for (double s : sched) {
          double n = by_gamma ? std::ceil(d / s - 1e-9)
                              : static_cast<double>(samples_for_theta(static_cast<int>(d), s));
          Point p;
          p.coords = {{"g", gname}, {"beta", fmt(beta)}, {"d", fmt(d)}, {sched_name, fmt(s)},
                      {"n", fmt(n)}};
          p.task = [=](PointResult& r) {
            r.metrics["log_norm_sq"].push_back({0, lr_norm_sq_log(n, static_cast<int>(d), beta, g)});
          };
          plan.points.push_back(std::move(p));
        }
  }
  plan.summarise = [sched_name](const Plan& pl, const Fragments& fr) {
    std::ostringstream os;
    os << "g,beta,d," << sched_name << ",n,log_norm_sq,gamma_beta\n";
    for (const auto& p : pl.points) {
      auto it = fr.find(p.id);
      if (it == fr.end() || !it->second.count("log_norm_sq")) continue;
      GDistribution g = parse_g(p.coords[0].second);
      double gb = gamma_beta(parse_double(p.coords[1].second), g).value;
      os << p.coords[0].second << ',' << p.coords[1].second << ',' << p.coords[2].second << ','
         << p.coords[3].second << ',' << p.coords[4].second << ','
         << fmt(it->second.at("log_norm_sq").front().value) << ',' << fmt(gb) << '\n';
    }
    return std::map<std::string, std::string>{{"lr_curve.csv", os.str()}};
  };
  return plan;
}

Plan plan_ldlr_bounds(const json& cfg) {
  check_keys(cfg, {"beta", "g", "d", "n", "theta", "D", "D_exponent", "exact_budget", "wishart"});
  Plan plan;
  plan.kind = "ldlr-bounds";
  auto betas = get_list(cfg, "beta");
  auto gs = get_str_list(cfg, "g", {"rademacher"});
  auto ds = get_int_list(cfg, "d");
  const bool by_theta = cfg.contains("theta");
  require(by_theta != cfg.contains("n"), "give exactly one of 'n' or 'theta'");
  const bool d_rule = cfg.contains("D_exponent");
  require(d_rule != cfg.contains("D"), "give exactly one of 'D' or 'D_exponent'");
  std::vector<double> nlist = by_theta ? get_list(cfg, "theta") : get_list(cfg, "n");
  std::vector<long long> Dlist = d_rule ? std::vector<long long>{} : get_int_list(cfg, "D");
  const double d_exp = d_rule ? get_num(cfg, "D_exponent") : 0.0;
  const auto budget = static_cast<std::uint64_t>(get_num(cfg, "exact_budget", 1e7));
  for (auto d : ds) require(d >= 1, "d must be >= 1");
  for (auto D : Dlist) require(D >= 0 && D <= 10000, "D must lie in [0, 10000]");
  plan.coord_names = {"kind", "g", "beta", "d", "n", "D", "gamma"};
  plan.metrics = {"log_lower", "log_upper", "log_exact", "asym_lower", "asym_upper"};

  for (const auto& gname : gs) {
    GDistribution g = parse_g(gname);
    for (double beta : betas)
      for (long long d : ds)
        for (double nv : nlist) {
          long long n = by_theta ? samples_for_theta(static_cast<int>(d), nv)
                                 : static_cast<long long>(nv);
          require(n >= 0, "n must be >= 0");
          std::vector<long long> Ds = Dlist;
          if (d_rule)
            Ds = {static_cast<long long>(
                std::ceil(std::pow(std::log(static_cast<double>(std::max<long long>(n, 2))), d_exp) - 1e-9))};
          for (long long D : Ds) {
            Point p;
            p.coords = {{"kind", "bounds"}, {"g", gname}, {"beta", fmt(beta)}, {"d", fmt(d)},
                        {"n", fmt(n)}, {"D", fmt(D)}, {"gamma", ""}};
            p.task = [=](PointResult& r) {
              BoundReport b = make_bound_report(n, d, static_cast<int>(D), beta, g, budget);
              if (b.log_lower) r.metrics["log_lower"].push_back({0, *b.log_lower});
              r.metrics["log_upper"].push_back({0, b.log_upper});
              if (b.log_exact) r.metrics["log_exact"].push_back({0, *b.log_exact});
              r.metrics["asym_lower"].push_back({0, b.asym_lower});
              r.metrics["asym_upper"].push_back({0, b.asym_upper});
            };
            plan.points.push_back(std::move(p));
          }
        }
  }
  if (cfg.contains("wishart")) {
    const json& w = cfg.at("wishart");
    require(w.is_object(), "'wishart' must be an object");
    for (const auto& [k, v] : w.items())
      require(k == "gamma" || k == "beta" || k == "D", "unknown wishart key '" + k + "'");
    plan.metrics.push_back("wishart_limit");
    for (double gm : get_list(w, "gamma", std::vector<double>{1.0})) {
      require(gm > 0, "wishart gamma must be > 0");
      for (double beta : get_list(w, "beta"))
        for (long long D : get_int_list(w, "D")) {
          require(D >= 0, "wishart D must be >= 0");
          Point p;
          p.coords = {{"kind", "wishart"}, {"g", ""}, {"beta", fmt(beta)}, {"d", ""},
                      {"n", ""}, {"D", fmt(D)}, {"gamma", fmt(gm)}};
          p.task = [=](PointResult& r) {
            r.metrics["wishart_limit"].push_back({0, ldlr_wishart_limit(static_cast<int>(D), beta, gm)});
          };
          plan.points.push_back(std::move(p));
        }
    }
  }
  plan.summarise = [](const Plan& pl, const Fragments& fr) {
    std::ostringstream b, w;
    b << BoundReport::csv_header() << '\n';
    w << "gamma,beta,D,wishart_limit\n";
    bool any_w = false;
    for (const auto& p : pl.points) {
      auto it = fr.find(p.id);
      if (it == fr.end()) continue;
      const auto& m = it->second;
      auto val = [&](const std::string& k) {
        return m.count(k) ? fmt(m.at(k).front().value) : std::string();
      };
      if (p.coords[0].second == "bounds") {
        if (!m.count("log_upper")) continue;
        b << p.coords[4].second << ',' << p.coords[3].second << ',' << p.coords[5].second << ','
          << p.coords[2].second << ',' << p.coords[1].second << ',' << val("log_lower") << ','
          << val("log_upper") << ',' << val("log_exact") << ',' << val("asym_lower") << ','
          << val("asym_upper") << '\n';
      } else if (m.count("wishart_limit")) {
        any_w = true;
        w << p.coords[6].second << ',' << p.coords[2].second << ',' << p.coords[5].second << ','
          << val("wishart_limit") << '\n';
      }
    }
    std::map<std::string, std::string> out{{"bounds.csv", b.str()}};
    if (any_w) out["wishart.csv"] = w.str();
    return out;
  };
  return plan;
}

Plan plan_search_curve(const json& cfg) {
  check_keys(cfg, {"d", "theta", "beta", "g", "runs"});
  Plan plan;
  plan.kind = "search-curve";
  auto ds = get_int_list(cfg, "d", std::vector<double>{6, 8, 10, 12});
  auto thetas = get_list(cfg, "theta");
  const double beta = get_num(cfg, "beta", 10.0);
  const std::string gname = get_str(cfg, "g", "rademacher");
  const GDistribution g = parse_g(gname);
  const long long runs = get_int(cfg, "runs", 50);
  require(runs >= 1, "runs must be >= 1");
  require(beta >= 0, "beta must be >= 0");
  for (auto d : ds) require(d >= 1 && d <= kMaxSearchDim, "d must lie in [1, 30]");
  for (double t : thetas) require(t >= 0 && t <= 4, "theta must lie in [0, 4]");
  plan.coord_names = {"d", "theta", "n", "beta", "g"};
  plan.metrics = {"success"};
  for (long long d : ds)
    for (double t : thetas) {
      Point p;
      p.coords = {{"d", fmt(d)}, {"theta", fmt(t)}, {"n", fmt(samples_for_theta(static_cast<int>(d), t))},
                  {"beta", fmt(beta)}, {"g", gname}};
      plan.points.push_back(std::move(p));
    }
  for (auto& p : plan.points) {
    int d = std::stoi(p.coords[0].second);
    double t = parse_double(p.coords[1].second);
    p.task = [d, t, beta, g, runs, &p](PointResult& r) {
      Rng root(p.seed);
      long long n = samples_for_theta(d, t);
      for (int run = 0; run < runs; ++run) {
        Rng rr = root.fork(static_cast<std::uint64_t>(run));
        Rng spike_rng = rr.fork(0);
        ModelSpec spec;
        spec.kind = ModelKind::SpikedCumulant;
        spec.d = d;
        spec.beta = beta;
        spec.g = g;
        spec.spike = draw_spike(d, spike_rng);
        RowMatrix x = sample_class(spec, static_cast<int>(n), rr.fork(1));
        bool ok = exhaustive_search(x, beta, g, spec.spike).success;
        r.metrics["success"].push_back({run, ok ? 1.0 : 0.0});
      }
    };
  }
  plan.summarise = [](const Plan& pl, const Fragments& fr) {
    std::ostringstream os;
    os << "theta,success_rate,runs,d,beta,seed\n";
    for (const auto& p : pl.points) {
      auto it = fr.find(p.id);
      if (it == fr.end() || !it->second.count("success")) continue;
      const auto& rows = it->second.at("success");
      double s = 0;
      for (const auto& row : rows) s += row.value;
      os << p.coords[1].second << ',' << fmt(s / rows.size()) << ',' << rows.size() << ','
         << p.coords[0].second << ',' << p.coords[3].second << ',' << pl.root_seed << '\n';
    }
    return std::map<std::string, std::string>{{"search_curve.csv", os.str()}};
  };
  return plan;
}

Plan plan_train_sweep(const json& cfg) {
  check_keys(cfg, {"model", "g", "d", "beta", "n", "n_over_d", "n_power", "test_n", "runs", "methods",
                   "alpha", "train", "rf", "save_trajectories"});
  Plan plan;
  plan.kind = "train-sweep";
  const std::string model = get_str(cfg, "model", "cumulant");
  require(model == "wishart" || model == "cumulant", "model must be 'wishart' or 'cumulant'");
  const std::string gname = get_str(cfg, "g", "rademacher");
  const GDistribution g = parse_g(gname);
  auto ds = get_int_list(cfg, "d");
  auto betas = get_list(cfg, "beta");
  int nsel = cfg.contains("n") + cfg.contains("n_over_d") + cfg.contains("n_power");
  require(nsel == 1, "give exactly one of 'n', 'n_over_d', 'n_power'");
  const std::string nkey = cfg.contains("n") ? "n" : cfg.contains("n_over_d") ? "n_over_d" : "n_power";
  auto ngrid = get_list(cfg, nkey);
  const long long test_n = get_int(cfg, "test_n", 2000);
  const long long runs = get_int(cfg, "runs", 1);
  auto methods = get_str_list(cfg, "methods", {"nn", "rf"});
  auto alphas = get_list(cfg, "alpha", std::vector<double>{1.0});
  const bool save = get_bool(cfg, "save_trajectories", true);
  require(test_n >= 1 && runs >= 1, "test_n and runs must be >= 1");
  for (const auto& m : methods) require(m == "nn" || m == "rf", "methods must be 'nn' or 'rf'");
  for (double a : alphas) require(a >= 1, "alpha must be >= 1");

  TrainConfig tc;
  tc.epochs = model == "wishart" ? 50 : 200;
  if (cfg.contains("train")) {
    const json& t = cfg.at("train");
    require(t.is_object(), "'train' must be an object");
    for (const auto& [k, v] : t.items())
      require(std::set<std::string>{"lr", "weight_decay", "epochs", "batch_size", "width",
                                    "initial_overlap"}.count(k),
              "unknown train key '" + k + "'");
    tc.learning_rate = get_num(t, "lr", tc.learning_rate);
    tc.weight_decay = get_num(t, "weight_decay", tc.weight_decay);
    tc.epochs = static_cast<int>(get_int(t, "epochs", tc.epochs));
    tc.batch_size = static_cast<int>(get_int(t, "batch_size", tc.batch_size));
    tc.width = static_cast<int>(get_int(t, "width", 0));
    if (t.contains("initial_overlap")) tc.initial_overlap = get_num(t, "initial_overlap");
  }
  require(tc.epochs >= 1 && tc.batch_size >= 1 && tc.learning_rate > 0, "invalid train settings");
  RandomFeaturesConfig rc;
  if (cfg.contains("rf")) {
    const json& t = cfg.at("rf");
    require(t.is_object(), "'rf' must be an object");
    for (const auto& [k, v] : t.items())
      require(k == "ridge" || k == "width", "unknown rf key '" + k + "'");
    rc.ridge = get_num(t, "ridge", rc.ridge);
    rc.width = static_cast<int>(get_int(t, "width", 0));
  }
  require(rc.ridge > 0, "rf ridge must be > 0");

  plan.coord_names = {"model", "g", "d", "beta", "n", "alpha"};
  for (const auto& m : methods) {
    if (m == "nn")
      for (auto s : {"nn_early_stop_acc", "nn_final_acc", "nn_final_overlap", "nn_final_ipr"})
        plan.metrics.push_back(s);
    if (m == "rf") plan.metrics.push_back("rf_acc");
  }
  const bool do_nn = std::count(methods.begin(), methods.end(), "nn") > 0;
  const bool do_rf = std::count(methods.begin(), methods.end(), "rf") > 0;

  for (long long d : ds) {
    require(d >= 1 && d <= 4096, "d must lie in [1, 4096]");
    for (double beta : betas)
      for (double nv : ngrid) {
        long long n = nkey == "n" ? static_cast<long long>(nv)
                      : nkey == "n_over_d" ? static_cast<long long>(std::ceil(nv * d - 1e-9))
                                           : samples_for_theta(static_cast<int>(d), nv);
        require(n >= 1, "n must be >= 1");
        for (double alpha : alphas) {
          Point p;
          p.coords = {{"model", model}, {"g", gname}, {"d", fmt(d)}, {"beta", fmt(beta)},
                      {"n", fmt(n)}, {"alpha", fmt(alpha)}};
          plan.points.push_back(std::move(p));
        }
      }
  }
  const ModelKind kind = model == "wishart" ? ModelKind::SpikedWishart : ModelKind::SpikedCumulant;
  for (auto& p : plan.points) {
    const int d = std::stoi(p.coords[2].second);
    const double beta = parse_double(p.coords[3].second);
    const int n = std::stoi(p.coords[4].second);
    const double alpha = parse_double(p.coords[5].second);
    p.task = [=, &p](PointResult& r) {
      for (int run = 0; run < runs; ++run) {
        Rng spike_rng = Rng(p.seed).fork(hash_words({static_cast<std::uint64_t>(run), 0}));
        ModelSpec pos;
        pos.kind = kind;
        pos.d = d;
        pos.beta = beta;
        pos.g = g;
        pos.spike = draw_spike(d, spike_rng);
        ModelSpec neg;
        neg.kind = ModelKind::Null;
        neg.d = d;
        DataMatrix train = make_dataset(pos, neg, n, p.seed, hash_words({static_cast<std::uint64_t>(run), 1}));
        DataMatrix test = make_dataset(pos, neg, static_cast<int>(test_n), p.seed,
                                       hash_words({static_cast<std::uint64_t>(run), 2}));
        if (do_nn) {
          TrainConfig c = tc;
          c.alpha_lazy = alpha;
          c.seed = hash_words({p.seed, static_cast<std::uint64_t>(run), 3});
          auto t0 = std::chrono::steady_clock::now();
          TrainReport rep = train_2lnn(train, test, pos.spike, c);
          double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          r.metrics["nn_early_stop_acc"].push_back({run, rep.early_stop_accuracy});
          r.metrics["nn_final_acc"].push_back({run, rep.test_accuracy.back()});
          r.metrics["nn_final_overlap"].push_back({run, rep.overlap.back()});
          r.metrics["nn_final_ipr"].push_back({run, rep.ipr.back()});
          if (save) {
            std::string stem = "trajectories/p" + std::to_string(p.id) + "_r" + std::to_string(run);
            r.files[stem + ".csv"] = rep.csv();
            json s = {{"point", p.id},
                      {"run", run},
                      {"coords", json::object()},
                      {"config", {{"learning_rate", c.learning_rate},
                                  {"weight_decay", c.weight_decay},
                                  {"epochs", c.epochs},
                                  {"batch_size", c.batch_size},
                                  {"width", c.width > 0 ? c.width : 5 * d},
                                  {"alpha_lazy", c.alpha_lazy},
                                  {"seed", c.seed}}},
                      {"early_stop_accuracy", rep.early_stop_accuracy},
                      {"wall_seconds", secs}};
            for (const auto& [k, v] : p.coords) s["coords"][k] = v;
            r.files[stem + ".json"] = s.dump(2) + "\n";
          }
        }
        if (do_rf) {
          RandomFeaturesConfig c = rc;
          c.seed = hash_words({p.seed, static_cast<std::uint64_t>(run), 4});
          r.metrics["rf_acc"].push_back({run, fit_random_features(train, test, c)});
        }
      }
    };
  }
  return plan;
}

Plan plan_nlgp(const json& cfg) {
  check_keys(cfg, {"gain", "xi", "d", "boundary", "n", "n_over_d", "runs", "models", "cp", "export_tensors"});
  Plan plan;
  plan.kind = "nlgp-localisation";
  const double gain = get_num(cfg, "gain", 3.0);
  const double xi = get_num(cfg, "xi", 1.0);
  const long long d = get_int(cfg, "d", 20);
  const std::string bname = get_str(cfg, "boundary", "open");
  require(bname == "open" || bname == "periodic", "boundary must be 'open' or 'periodic'");
  const Boundary boundary = bname == "open" ? Boundary::Open : Boundary::Periodic;
  require(cfg.contains("n") != cfg.contains("n_over_d"), "give exactly one of 'n' or 'n_over_d'");
  auto ngrid = cfg.contains("n") ? get_list(cfg, "n") : get_list(cfg, "n_over_d");
  const bool ratio = cfg.contains("n_over_d");
  const long long runs = get_int(cfg, "runs", 3);
  auto models = get_str_list(cfg, "models", {"nlgp", "gpmatch"});
  const bool export_t = get_bool(cfg, "export_tensors", false);
  CpOptions cp;
  if (cfg.contains("cp")) {
    const json& c = cfg.at("cp");
    require(c.is_object(), "'cp' must be an object");
    for (const auto& [k, v] : c.items())
      require(k == "restarts" || k == "tol" || k == "max_iters", "unknown cp key '" + k + "'");
    cp.restarts = static_cast<int>(get_int(c, "restarts", cp.restarts));
    cp.tol = get_num(c, "tol", cp.tol);
    cp.max_iters = static_cast<int>(get_int(c, "max_iters", cp.max_iters));
  }
  require(gain > 0 && xi > 0, "gain and xi must be > 0");
  require(d >= 1 && d <= kMaxCumulantDim, "d must lie in [1, 64]");
  require(runs >= 1, "runs must be >= 1");
  for (const auto& m : models) require(m == "nlgp" || m == "gpmatch", "models must be 'nlgp' or 'gpmatch'");

  plan.coord_names = {"model", "gain", "xi", "d", "n"};
  plan.metrics = {"ipr", "cp_weight"};
  for (const auto& m : models)
    for (double nv : ngrid) {
      long long n = ratio ? static_cast<long long>(std::ceil(nv * d - 1e-9)) : static_cast<long long>(nv);
      require(n >= 2, "n must be >= 2");
      Point p;
      p.coords = {{"model", m}, {"gain", fmt(gain)}, {"xi", fmt(xi)}, {"d", fmt(d)}, {"n", fmt(n)}};
      plan.points.push_back(std::move(p));
    }
  for (auto& p : plan.points) {
    ModelSpec spec;
    spec.kind = parse_model_kind(p.coords[0].second);
    spec.d = static_cast<int>(d);
    spec.gain = gain;
    spec.xi = xi;
    spec.boundary = boundary;
    const int n = std::stoi(p.coords[4].second);
    p.task = [=, &p](PointResult& r) {
      Sampler sampler(spec);
      for (int run = 0; run < runs; ++run) {
        Rng rr = Rng(p.seed).fork(static_cast<std::uint64_t>(run));
        RowMatrix x = sampler.sample(n, rr.fork(0));
        FourthCumulant T = empirical_fourth_cumulant(x);
        Rng cp_rng = rr.fork(1);
        CpResult res = rank1_cp(T, cp_rng, cp);
        r.metrics["ipr"].push_back({run, ipr(res.factor)});
        r.metrics["cp_weight"].push_back({run, res.weight});
        if (export_t) {
          std::string stem = "tensors/p" + std::to_string(p.id) + "_r" + std::to_string(run);
          std::ostringstream bin;
          for (double v : T.data()) {
            std::uint64_t u = std::bit_cast<std::uint64_t>(v);
            for (int i = 0; i < 8; ++i) bin.put(static_cast<char>(u >> (8 * i)));
          }
          r.files[stem + ".bin"] = bin.str();
          json side = {{"d", d}, {"n", n}, {"seed", rr.stream()}, {"root_seed", p.seed},
                       {"model", p.coords[0].second}, {"gain", gain}, {"xi", xi}, {"boundary", bname},
                       {"layout", "row-major d^4 little-endian f64"}};
          r.files[stem + ".bin.json"] = side.dump(2) + "\n";
        }
      }
    };
  }
  return plan;
}

Plan plan_generate(const json& cfg) {
  check_keys(cfg, {"model", "negative", "n", "format"});
  Plan plan;
  plan.kind = "generate";
  require(cfg.contains("model") && cfg.at("model").is_object(), "'model' object is required");
  const json& m = cfg.at("model");
  for (const auto& [k, v] : m.items())
    require(std::set<std::string>{"kind", "d", "beta", "g", "gain", "xi", "boundary"}.count(k),
            "unknown model key '" + k + "'");
  ModelSpec pos;
  try {
    pos.kind = parse_model_kind(get_str(m, "kind", "cumulant"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  pos.d = static_cast<int>(get_int(m, "d"));
  pos.beta = get_num(m, "beta", 0.0);
  pos.g = parse_g(get_str(m, "g", "rademacher"));
  pos.gain = get_num(m, "gain", 1.0);
  pos.xi = get_num(m, "xi", 1.0);
  const std::string bname = get_str(m, "boundary", "open");
  require(bname == "open" || bname == "periodic", "boundary must be 'open' or 'periodic'");
  pos.boundary = bname == "open" ? Boundary::Open : Boundary::Periodic;
  require(pos.d >= 1, "model d must be >= 1");
  require(pos.beta >= 0, "model beta must be >= 0");
  const bool nlgp_like = pos.kind == ModelKind::NLGP || pos.kind == ModelKind::GPMatch;
  ModelSpec neg = pos;
  try {
    neg.kind = parse_model_kind(get_str(cfg, "negative", nlgp_like ? "gpmatch" : "null"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const long long n = get_int(cfg, "n");
  require(n >= 1, "n must be >= 1");
  auto formats = get_str_list(cfg, "format", {"csv", "binary"});
  for (const auto& f : formats) require(f == "csv" || f == "binary", "format must be 'csv' or 'binary'");

  plan.coord_names = {"model", "negative", "d", "n"};
  plan.metrics = {};
  Point p;
  p.coords = {{"model", model_kind_name(pos.kind)}, {"negative", model_kind_name(neg.kind)},
              {"d", fmt(static_cast<long long>(pos.d))}, {"n", fmt(n)}};
  plan.points.push_back(std::move(p));
  Point& pt = plan.points.back();
  pt.task = [pos, neg, n, formats, &pt](PointResult& r) mutable {
    const bool spiked = pos.kind == ModelKind::SpikedWishart || pos.kind == ModelKind::SpikedCumulant;
    if (spiked) {
      Rng sr = Rng(pt.seed).fork(0);
      pos.spike = draw_spike(pos.d, sr);
      neg.spike = pos.spike;
      std::ostringstream os;
      os << "u\n";
      for (int i = 0; i < pos.d; ++i) os << fmt(pos.spike(i)) << '\n';
      r.files["spike.csv"] = os.str();
    }
    if (neg.kind == ModelKind::SpikedWishart || neg.kind == ModelKind::SpikedCumulant) {
      if (neg.spike.size() != neg.d) {
        Rng sr = Rng(pt.seed).fork(0);
        neg.spike = draw_spike(neg.d, sr);
      }
    }
    DataMatrix data = make_dataset(pos, neg, static_cast<int>(n), pt.seed, 1);
    for (const auto& f : formats) {
      std::ostringstream os;
      if (f == "csv") {
        write_csv(data, os);
        r.files["dataset.csv"] = os.str();
      } else {
        write_binary(data, os);
        r.files["dataset.bin"] = os.str();
      }
    }
  };
  return plan;
}

Plan build_plan(const std::string& kind, const json& cfg) {
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  if (cfg.contains("experiment")) {
    if (!cfg.at("experiment").is_string() || cfg.at("experiment").get<std::string>() != kind)
      throw ConfigError("config 'experiment' field does not match subcommand '" + kind + "'");
  }
  if (kind == "lr-curve") return plan_lr_curve(cfg);
  if (kind == "ldlr-bounds") return plan_ldlr_bounds(cfg);
  if (kind == "search-curve") return plan_search_curve(cfg);
  if (kind == "train-sweep") return plan_train_sweep(cfg);
  if (kind == "nlgp-localisation") return plan_nlgp(cfg);
  if (kind == "generate") return plan_generate(cfg);
  throw ConfigError("unknown experiment kind '" + kind + "'");
}

// ---------------------------------------------------------------- execution

void execute(std::vector<Point*>& todo, std::vector<PointResult>& results, int jobs) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      PointResult& r = results[i];
      auto t0 = std::chrono::steady_clock::now();
      try {
        todo[i]->task(r);
      } catch (const std::exception& e) {
        r.metrics.clear();
        r.files.clear();
        r.error = e.what();
      }
      r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const int nthreads = std::max(1, std::min<int>(jobs, static_cast<int>(todo.size())));
  if (nthreads == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

std::string fragment_csv(const Point& p, const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  for (const auto& row : rows) os << coord_prefix(p) << ',' << row.run << ',' << fmt(row.value) << '\n';
  return os.str();
}

std::string metric_header(const Plan& plan) {
  std::string h = "point";
  for (const auto& c : plan.coord_names) h += "," + c;
  return h + ",run,value\n";
}

Fragments load_fragments(const Plan& plan, const fs::path& out) {
  Fragments fr;
  const std::size_t ncoord = plan.coord_names.size();
  for (const auto& metric : plan.metrics) {
    for (const auto& p : plan.points) {
      fs::path f = out / "points" / metric / (std::to_string(p.id) + ".csv");
      if (!fs::exists(f)) continue;
      auto& rows = fr[p.id][metric];
      std::istringstream is(read_file(f));
      std::string line;
      while (std::getline(is, line)) {
        auto cells = split(line, ',');
        if (cells.size() != ncoord + 3) throw std::runtime_error("corrupt fragment " + f.string());
        rows.push_back({std::stoi(cells[ncoord + 1]), parse_double(cells[ncoord + 2])});
      }
    }
  }
  return fr;
}

json manifest_json(const Plan& plan) {
  json m;
  m["experiment"] = plan.kind;
  m["version"] = version_string();
  m["rng"] = "philox4x32-10";
  m["root_seed"] = plan.root_seed;
  m["config"] = plan.config;
  m["coords"] = plan.coord_names;
  m["metrics"] = plan.metrics;
  json pts = json::array();
  for (const auto& p : plan.points) {
    json c = json::object();
    for (const auto& [k, v] : p.coords) c[k] = v;
    pts.push_back({{"id", p.id}, {"coords", c}, {"seed", p.seed}});
  }
  m["points"] = pts;
  return m;
}

int run_plan(Plan& plan, const RunOptions& opts) {
  const fs::path out(opts.out_dir);
  fs::create_directories(out);
  for (std::size_t i = 0; i < plan.points.size(); ++i) {
    Point& p = plan.points[i];
    p.id = static_cast<int>(i);
    p.seed = point_seed(plan.root_seed, plan.kind, p.coords);
  }
  std::vector<Point*> todo;
  if (opts.only_points.empty()) {
    for (auto& p : plan.points) todo.push_back(&p);
  } else {
    for (int id : opts.only_points) {
      if (id < 0 || id >= static_cast<int>(plan.points.size()))
        throw ConfigError("point id " + std::to_string(id) + " outside the grid (0.." +
                          std::to_string(plan.points.size() - 1) + ")");
      todo.push_back(&plan.points[id]);
    }
  }
  std::vector<PointResult> results(todo.size());
  execute(todo, results, opts.jobs);

  json timing = json::object();
  for (std::size_t i = 0; i < todo.size(); ++i) {
    const Point& p = *todo[i];
    const PointResult& r = results[i];
    timing[std::to_string(p.id)] = r.wall_seconds;
    fs::path errf = out / "points" / "_errors" / (std::to_string(p.id) + ".txt");
    if (!r.error.empty()) {
      write_atomic(errf, r.error);
    } else if (fs::exists(errf)) {
      fs::remove(errf);
    }
    for (const auto& metric : plan.metrics) {
      fs::path f = out / "points" / metric / (std::to_string(p.id) + ".csv");
      auto it = r.metrics.find(metric);
      if (it != r.metrics.end())
        write_atomic(f, fragment_csv(p, it->second));
      else if (fs::exists(f))
        fs::remove(f);
    }
    for (const auto& [rel, content] : r.files) write_atomic(out / rel, content);
  }

  // Assemble from fragments of every point so partial reruns restore full files.
  for (const auto& metric : plan.metrics) {
    std::string body = metric_header(plan);
    for (const auto& p : plan.points) {
      fs::path f = out / "points" / metric / (std::to_string(p.id) + ".csv");
      if (fs::exists(f)) body += read_file(f);
    }
    write_atomic(out / (metric + ".csv"), body);
  }
  Fragments fr = load_fragments(plan, out);
  if (plan.summarise)
    for (const auto& [name, content] : plan.summarise(plan, fr)) write_atomic(out / name, content);

  bool failed = false;
  std::string errs = "point";
  for (const auto& c : plan.coord_names) errs += "," + c;
  errs += ",error\n";
  for (const auto& p : plan.points) {
    fs::path errf = out / "points" / "_errors" / (std::to_string(p.id) + ".txt");
    if (!fs::exists(errf)) continue;
    failed = true;
    std::string msg = read_file(errf);
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    errs += coord_prefix(p) + "," + msg + "\n";
  }
  if (failed)
    write_atomic(out / "errors.csv", errs);
  else if (fs::exists(out / "errors.csv"))
    fs::remove(out / "errors.csv");

  write_atomic(out / "manifest.json", manifest_json(plan).dump(2) + "\n");
  write_atomic(out / "timing.json", timing.dump(2) + "\n");
  return failed ? kExitPartialFailure : kExitOk;
}

}  // namespace

std::string version_string() { return CUMLAB_VERSION; }

std::uint64_t point_seed(std::uint64_t root, const std::string& experiment, const Coords& coords) {
  std::uint64_t h = hash_words({root, fnv1a(experiment)});
  for (const auto& [k, v] : coords) h = hash_words({h, fnv1a(k), fnv1a(v)});
  return h;
}

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {"generate", "lr-curve", "ldlr-bounds", "search-curve",
                                                 "train-sweep", "nlgp-localisation"};
  return kinds;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* s = std::getenv("CUMLAB_SEED");
  if (!s || !*s) return std::nullopt;
  std::string str(s);
  std::uint64_t v = 0;
  auto r = std::from_chars(str.data(), str.data() + str.size(), v);
  if (r.ec != std::errc() || r.ptr != str.data() + str.size())
    throw ConfigError("CUMLAB_SEED must be an unsigned 64-bit integer, got '" + str + "'");
  return v;
}

int run_experiment(const std::string& kind, const json& config, const RunOptions& opts) {
  if (opts.jobs < 1) throw ConfigError("--jobs must be >= 1");
  Plan plan = build_plan(kind, config);
  plan.config = config;
  if (config.contains("seed")) {
    const json& s = config.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      throw ConfigError("seed must be a non-negative integer");
    plan.root_seed = s.get<std::uint64_t>();
  }
  if (opts.seed_override) {
    plan.root_seed = *opts.seed_override;
    plan.config["seed"] = *opts.seed_override;
  }
  return run_plan(plan, opts);
}

int emit_plotdata(const std::string& results_dir) {
  const fs::path dir(results_dir);
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw std::runtime_error("no results: " + mpath.string() + " not found");
  json m = json::parse(read_file(mpath));
  const auto coords = m.at("coords").get<std::vector<std::string>>();
  const auto metrics = m.at("metrics").get<std::vector<std::string>>();
  if (metrics.empty()) throw std::runtime_error("no results: manifest lists no metrics");
  std::vector<std::string> missing;
  for (const auto& metric : metrics) {
    fs::path f = dir / (metric + ".csv");
    if (!fs::exists(f)) {
      missing.push_back(metric);
      continue;
    }
    std::istringstream is(read_file(f));
    std::string line;
    std::getline(is, line);
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> groups;
    while (std::getline(is, line)) {
      auto cells = split(line, ',');
      if (cells.size() != coords.size() + 3) throw std::runtime_error("malformed row in " + f.string());
      std::string key;
      for (std::size_t c = 1; c <= coords.size(); ++c) key += (c > 1 ? "," : "") + cells[c];
      if (!groups.count(key)) order.push_back(key);
      groups[key].push_back(parse_double(cells.back()));
    }
    if (order.empty()) {
      missing.push_back(metric);
      continue;
    }
    std::ostringstream os;
    for (std::size_t c = 0; c < coords.size(); ++c) os << coords[c] << ',';
    os << "mean,sd,count\n";
    for (const auto& key : order) {
      const auto& v = groups[key];
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= v.size();
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      double sd = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
      os << key << ',' << fmt(mean) << ',' << fmt(sd) << ',' << v.size() << '\n';
    }
    write_atomic(dir / ("plot_" + metric + ".csv"), os.str());
  }
  if (!missing.empty()) {
    std::string msg = "missing metrics:";
    for (const auto& s : missing) msg += " " + s;
    throw std::runtime_error(msg);
  }
  return kExitOk;
}

}  // namespace cumlab
