// bwc: command-line front end for brickwall compilation, metrics and planning.
//
// Every command reads one JSON config (--config) merged over built-in defaults;
// command-line flags override both. Output files carry a "# config-hash" header
// (JSON files a "config_hash" key) computed from the merged config.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "bwc/compile.hpp"
#include "bwc/errors.hpp"
#include "bwc/io.hpp"
#include "bwc/metrics.hpp"
#include "bwc/optimizer.hpp"

using nlohmann::json;
using namespace bwc;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitCapacity = 3;
constexpr int kExitNumerical = 4;

json defaults() {
  return json::parse(R"({
    "model": {"name": "cluster_ising", "params": {"g": -0.75, "gx": 1.0, "gzz": 1.0, "gz1z": 1.0}},
    "n_sites": 8,
    "depth": 3,
    "dt": 0.1,
    "order": 2,
    "dt_grid": [],
    "depths": [],
    "trotter_orders": [],
    "mpo": {"substeps": 100, "cutoff": 1e-16, "max_bond": 0, "mode": "auto"},
    "optimizer": {"epsilon": 1e-6, "max_sweeps": 20000, "init": "near_identity", "init_sigma": 0.01,
                  "init_circuit": "", "anneal": "none", "anneal_start_dt": 1.0, "anneal_rungs": 6,
                  "anneal_start_g": -1.0, "anneal_g_step": 0.05, "seed": 0},
    "outputs": {"dir": "out", "cache": ""},
    "circuit": "",
    "compile": {"source": "circuit", "connectivity": "linear", "elide_identities": false},
    "plan": {"t": [1, 2, 4, 8], "eta": 0.03, "table": "", "n_max": 1000},
    "echo": {"eta_layer": 0.05, "applications": [1, 2, 3, 4, 5, 6], "shots": 8192}
  })");
}

// Overlays `patch` on `base`; keys must already exist with a compatible type.
void merge(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ArgumentError(path + ": expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string p = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ArgumentError("unknown config key '" + p + "'");
    json& dst = base[it.key()];
    if (dst.is_object()) {
      merge(dst, it.value(), p);
      continue;
    }
    const bool ok = (dst.is_number() && it.value().is_number()) || dst.type() == it.value().type();
    if (!ok) throw ArgumentError("config key '" + p + "' has the wrong type");
    dst = it.value();
  }
}

template <class T>
T get(const json& cfg, const json::json_pointer& ptr) {
  try {
    return cfg.at(ptr).get<T>();
  } catch (const json::exception&) {
    throw ArgumentError("config key '" + ptr.to_string() + "' has the wrong type");
  }
}

struct Context {
  json cfg;
  std::string hash;
  std::string out_dir;
  int jobs = 1;

  std::string out(const std::string& name) const { return (std::filesystem::path(out_dir) / name).string(); }
};

ModelTarget target_from(const json& cfg, double dt) {
  ModelTarget t;
  t.model = parse_model(get<std::string>(cfg, "/model/name"_json_pointer));
  t.n_sites = get<int>(cfg, "/n_sites"_json_pointer);
  t.params.g = get<double>(cfg, "/model/params/g"_json_pointer);
  t.params.gx = get<double>(cfg, "/model/params/gx"_json_pointer);
  t.params.gzz = get<double>(cfg, "/model/params/gzz"_json_pointer);
  t.params.gz1z = get<double>(cfg, "/model/params/gz1z"_json_pointer);
  t.dt = dt;
  t.mpo.substeps = get<int>(cfg, "/mpo/substeps"_json_pointer);
  t.mpo.cutoff = get<double>(cfg, "/mpo/cutoff"_json_pointer);
  t.mpo.max_bond = get<std::size_t>(cfg, "/mpo/max_bond"_json_pointer);
  const auto mode = get<std::string>(cfg, "/mpo/mode"_json_pointer);
  if (mode == "auto") t.mode = TargetMode::Auto;
  else if (mode == "propagator") t.mode = TargetMode::Propagator;
  else if (mode == "dense") t.mode = TargetMode::DenseExact;
  else throw ArgumentError("mpo.mode must be auto, propagator or dense");
  if (t.n_sites < 2) throw ArgumentError("n_sites must be at least 2");
  if (!std::isfinite(dt) || dt < 0) throw ArgumentError("dt must be finite and non-negative");
  if (t.mpo.substeps < 1) throw ArgumentError("mpo.substeps must be positive");
  return t;
}

OptimizerConfig optimizer_from(const json& cfg) {
  OptimizerConfig o;
  o.epsilon = get<double>(cfg, "/optimizer/epsilon"_json_pointer);
  o.max_sweeps = get<int>(cfg, "/optimizer/max_sweeps"_json_pointer);
  o.init = parse_init(get<std::string>(cfg, "/optimizer/init"_json_pointer));
  o.init_sigma = get<double>(cfg, "/optimizer/init_sigma"_json_pointer);
  if (o.init == InitStrategy::Explicit) {
    const auto path = get<std::string>(cfg, "/optimizer/init_circuit"_json_pointer);
    if (path.empty()) throw ArgumentError("optimizer.init_circuit is required for init = explicit");
    o.explicit_circuit = circuit_from_json(read_file(path));
  }
  o.anneal = parse_anneal(get<std::string>(cfg, "/optimizer/anneal"_json_pointer));
  o.anneal_start_dt = get<double>(cfg, "/optimizer/anneal_start_dt"_json_pointer);
  o.anneal_rungs = get<int>(cfg, "/optimizer/anneal_rungs"_json_pointer);
  o.anneal_start_g = get<double>(cfg, "/optimizer/anneal_start_g"_json_pointer);
  o.anneal_g_step = get<double>(cfg, "/optimizer/anneal_g_step"_json_pointer);
  o.seed = get<std::uint64_t>(cfg, "/optimizer/seed"_json_pointer);
  o.validate();
  return o;
}

std::string header(const Context& ctx) { return "# config-hash " + ctx.hash + "\n"; }

// Empty means <out>/cache; "none" disables the propagator cache.
std::string cache_dir(const Context& ctx) {
  auto dir = get<std::string>(ctx.cfg, "/outputs/cache"_json_pointer);
  if (dir == "none") return "";
  return dir.empty() ? ctx.out("cache") : dir;
}

struct RunOutput {
  BrickwallCircuit circuit;
  MetricsReport report;
};

RunOutput run_optimize(const Context& ctx, double dt, int depth) {
  ModelTarget t = target_from(ctx.cfg, dt);
  OptimizerConfig o = optimizer_from(ctx.cfg);
  Mpo target = cached_target(t, cache_dir(ctx));
  OptimizeResult res = o.anneal == AnnealKind::None ? optimize(target, depth, o) : optimize(t, depth, o);
  auto h = build_model(t.model, t.n_sites, t.params);
  RunOutput out{res.circuit, evaluate(target, res.circuit, to_mpo(h), dt)};
  out.report.sweeps_used = res.sweeps_used;
  out.report.converged = res.converged;
  return out;
}

int cmd_optimize(const Context& ctx) {
  const double dt = get<double>(ctx.cfg, "/dt"_json_pointer);
  const int depth = get<int>(ctx.cfg, "/depth"_json_pointer);
  if (depth < 1) throw ArgumentError("depth must be positive");
  RunOutput r = run_optimize(ctx, dt, depth);
  write_file(ctx.out("circuit.json"), circuit_to_json(r.circuit, ctx.hash));
  std::ostringstream csv;
  csv << header(ctx);
  write_metrics_csv(csv, {r.report});
  write_file(ctx.out("report.csv"), csv.str());
  std::cout << metrics_csv_header() << '\n' << metrics_csv_row(r.report) << '\n';
  return 0;
}

void print_fit(std::ostream& os, const std::string& label, const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3) return;
  LineFit f = fit_scaling(pts);
  char buf[160];
  std::snprintf(buf, sizeof buf, "fit_slope %s %.6f r2=%.6f\n", label.c_str(), f.slope, f.r2);
  os << buf;
}

// Runs `count` tasks on up to `jobs` threads; results land at their own index.
template <class Fn>
void parallel_for(int count, int jobs, Fn fn) {
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::min(jobs, count); ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

int cmd_scan(const Context& ctx) {
  auto grid = get<std::vector<double>>(ctx.cfg, "/dt_grid"_json_pointer);
  auto depths = get<std::vector<int>>(ctx.cfg, "/depths"_json_pointer);
  auto orders = get<std::vector<int>>(ctx.cfg, "/trotter_orders"_json_pointer);
  if (grid.empty()) throw ArgumentError("dt_grid is empty");
  for (double dt : grid)
    if (!(dt > 0) || !std::isfinite(dt)) throw ArgumentError("dt_grid values must be positive and finite");
  if (depths.empty() && orders.empty()) throw ArgumentError("scan needs depths or trotter_orders");
  std::sort(grid.begin(), grid.end());
  std::ostringstream fits;

  if (!depths.empty()) {
    const int count = static_cast<int>(depths.size() * grid.size());
    std::vector<MetricsReport> rows(count);
    parallel_for(count, ctx.jobs, [&](int i) {
      rows[i] = run_optimize(ctx, grid[i % grid.size()], depths[i / grid.size()]).report;
    });
    std::ostringstream csv;
    csv << header(ctx);
    write_metrics_csv(csv, rows);
    write_file(ctx.out("scan.csv"), csv.str());
    for (std::size_t d = 0; d < depths.size(); ++d) {
      std::vector<std::pair<double, double>> pts;
      for (std::size_t g = 0; g < grid.size(); ++g) pts.push_back({grid[g], rows[d * grid.size() + g].delta});
      print_fit(fits, "depth=" + std::to_string(depths[d]), pts);
    }
  }
  for (int order : orders) {
    std::vector<MetricsReport> rows;
    std::vector<std::pair<double, double>> pts;
    for (double dt : grid) {
      ModelTarget t = target_from(ctx.cfg, dt);
      auto h = build_model(t.model, t.n_sites, t.params);
      rows.push_back(evaluate(cached_target(t, cache_dir(ctx)), trotter_circuit(h, dt, order), to_mpo(h), dt));
      pts.push_back({dt, rows.back().delta});
    }
    std::ostringstream csv;
    csv << header(ctx);
    write_metrics_csv(csv, rows);
    write_file(ctx.out("trotter_k" + std::to_string(order) + ".csv"), csv.str());
    print_fit(fits, "trotter_order=" + std::to_string(order), pts);
  }
  write_file(ctx.out("scan_fits.txt"), header(ctx) + fits.str());
  std::cout << fits.str();
  return 0;
}

int cmd_trotter(const Context& ctx) {
  const double dt = get<double>(ctx.cfg, "/dt"_json_pointer);
  const int order = get<int>(ctx.cfg, "/order"_json_pointer);
  ModelTarget t = target_from(ctx.cfg, dt);
  auto h = build_model(t.model, t.n_sites, t.params);
  MetricsReport r = evaluate(cached_target(t, cache_dir(ctx)), trotter_circuit(h, dt, order), to_mpo(h), dt);
  std::ostringstream csv;
  csv << header(ctx);
  write_metrics_csv(csv, {r});
  write_file(ctx.out("trotter.csv"), csv.str());
  std::cout << metrics_csv_header() << '\n' << metrics_csv_row(r) << '\n';
  return 0;
}

BrickwallCircuit input_circuit(const Context& ctx) {
  const auto path = get<std::string>(ctx.cfg, "/circuit"_json_pointer);
  if (path.empty()) throw ArgumentError("no circuit file given (--circuit)");
  return circuit_from_json(read_file(path));
}

int cmd_metrics(const Context& ctx) {
  BrickwallCircuit c = input_circuit(ctx);
  const double dt = get<double>(ctx.cfg, "/dt"_json_pointer);
  ModelTarget t = target_from(ctx.cfg, dt);
  if (t.n_sites != c.n_sites) throw ArgumentError("circuit has " + std::to_string(c.n_sites) + " sites, config n_sites " +
                                                  std::to_string(t.n_sites));
  auto h = build_model(t.model, t.n_sites, t.params);
  MetricsReport r = evaluate(cached_target(t, cache_dir(ctx)), c, to_mpo(h), dt);
  std::ostringstream csv;
  csv << header(ctx);
  write_metrics_csv(csv, {r});
  write_file(ctx.out("metrics.csv"), csv.str());
  std::cout << metrics_csv_header() << '\n' << metrics_csv_row(r) << '\n';
  if (t.model == Model::Pxp) std::printf("pxp_constraint_commutator %.17g\n", pxp_constraint_commutator(brickwall_to_mpo(c)));
  return 0;
}

int cmd_compile(const Context& ctx) {
  ExportOptions opt;
  opt.connectivity = parse_connectivity(get<std::string>(ctx.cfg, "/compile/connectivity"_json_pointer));
  opt.elide_identities = get<bool>(ctx.cfg, "/compile/elide_identities"_json_pointer);
  const auto source = get<std::string>(ctx.cfg, "/compile/source"_json_pointer);
  GateList g;
  if (source == "circuit") {
    g = export_gatelist(input_circuit(ctx), opt);
  } else if (source == "trotter") {
    ModelTarget t = target_from(ctx.cfg, get<double>(ctx.cfg, "/dt"_json_pointer));
    g = export_trotter(build_model(t.model, t.n_sites, t.params), t.dt, get<int>(ctx.cfg, "/order"_json_pointer), opt);
  } else {
    throw ArgumentError("compile.source must be circuit or trotter");
  }
  write_file(ctx.out("circuit.gates"), header(ctx) + render_gatelist(g));
  std::cout << "CNOT_COUNT " << g.cnot_count() << '\n' << "CNOT_LAYERS " << g.cnot_layer_count() << '\n';
  return 0;
}

// Reads (dt, fidelity) columns from a CSV with a header row; '#' lines are skipped.
FidelityTable read_table(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  int dt_col = -1, f_col = -1, lineno = 0;
  std::vector<std::pair<double, double>> pts;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (dt_col < 0) {
      for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
        if (cells[i] == "dt") dt_col = i;
        if (cells[i] == "fidelity") f_col = i;
      }
      if (dt_col < 0 || f_col < 0) throw ArgumentError(path + ": header needs dt and fidelity columns");
      continue;
    }
    if (static_cast<int>(cells.size()) <= std::max(dt_col, f_col))
      throw ArgumentError(path + ":" + std::to_string(lineno) + ": missing columns");
    try {
      pts.push_back({std::stod(cells[dt_col]), std::stod(cells[f_col])});
    } catch (const std::exception&) {
      throw ArgumentError(path + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> dts, fs;
  for (auto [d, f] : pts) {
    dts.push_back(d);
    fs.push_back(f);
  }
  return FidelityTable(dts, fs);
}

int cmd_plan(const Context& ctx) {
  const auto table_path = get<std::string>(ctx.cfg, "/plan/table"_json_pointer);
  if (table_path.empty()) throw ArgumentError("plan.table is required (--table)");
  FidelityTable table = read_table(table_path);
  const double eta = get<double>(ctx.cfg, "/plan/eta"_json_pointer);
  const int n_max = get<int>(ctx.cfg, "/plan/n_max"_json_pointer);
  std::ostringstream summary, rows;
  summary << header(ctx) << "t,eta,dt_opt,n_opt,infidelity_opt,interior_minimum\n";
  rows << header(ctx) << "t,n,dt,infidelity,clamped\n";
  char buf[256];
  for (double t : get<std::vector<double>>(ctx.cfg, "/plan/t"_json_pointer)) {
    TimestepPlan p = plan_timestep(t, eta, table, n_max);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d,%.17g,%s\n", t, eta, p.dt_opt, p.n_opt, p.infidelity_opt,
                  p.interior_minimum() ? "true" : "false");
    summary << buf;
    for (const auto& r : p.rows) {
      std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g,%s\n", t, r.n, r.dt, r.infidelity, r.clamped ? "true" : "false");
      rows << buf;
    }
  }
  write_file(ctx.out("plan.csv"), summary.str());
  write_file(ctx.out("plan_rows.csv"), rows.str());
  std::cout << summary.str().substr(header(ctx).size());
  return 0;
}

int cmd_echo(const Context& ctx) {
  BrickwallCircuit c = input_circuit(ctx);
  EchoOptions opt;
  opt.eta_layer = get<double>(ctx.cfg, "/echo/eta_layer"_json_pointer);
  opt.shots = get<int>(ctx.cfg, "/echo/shots"_json_pointer);
  opt.cnot_layers = export_gatelist(c).cnot_layer_count();
  auto apps = get<std::vector<int>>(ctx.cfg, "/echo/applications"_json_pointer);
  std::mt19937_64 rng(get<std::uint64_t>(ctx.cfg, "/optimizer/seed"_json_pointer));
  auto pts = noisy_echo(c, apps, opt, rng);
  std::ostringstream csv;
  csv << header(ctx) << "applications,fidelity,local_fidelity,normalized_fidelity,normalized_local_fidelity\n";
  std::vector<double> x, yg, yl;
  char buf[256];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", p.applications, p.fidelity, p.local_fidelity,
                  p.normalized_fidelity, p.normalized_local_fidelity);
    csv << buf;
    x.push_back(static_cast<double>(p.applications) * opt.cnot_layers);
    yg.push_back(p.normalized_fidelity);
    yl.push_back(p.normalized_local_fidelity);
  }
  write_file(ctx.out("echo.csv"), csv.str());
  std::printf("CNOT_LAYERS %d\nfit_eta global %.6g local %.6g\n", opt.cnot_layers, fit_decay(x, yg), fit_decay(x, yl));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brickwall circuit compilation of 1D three-body propagators"};
  app.require_subcommand(1);
  std::string config_path, out_dir, circuit, connectivity, model, table, source;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs_opt, n_sites, depth, order;
  std::optional<double> dt, eta, g;
  std::vector<double> t_grid;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "RNG seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", jobs_opt, "worker threads for scan")->check(CLI::PositiveNumber);

  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Context&);
  };
  const Cmd cmds[] = {{"optimize", "optimize one brickwall circuit", cmd_optimize},
                      {"scan", "dt x depth grid with scaling fits", cmd_scan},
                      {"trotter", "metrics of a product-formula circuit", cmd_trotter},
                      {"metrics", "metrics of a stored circuit", cmd_metrics},
                      {"compile", "CNOT gate list and layer count", cmd_compile},
                      {"plan", "optimal time step from a fidelity table", cmd_plan},
                      {"echo", "synthetic noisy echo of a stored circuit", cmd_echo}};
  std::vector<CLI::App*> subs;
  for (const auto& c : cmds) {
    CLI::App* s = app.add_subcommand(c.name, c.help);
    s->fallthrough();
    s->add_option("--circuit", circuit, "circuit JSON file");
    s->add_option("--model", model, "cluster_ising | pxp | nnni");
    s->add_option("--g", g, "cluster Ising coupling");
    s->add_option("--n", n_sites, "number of sites");
    s->add_option("--depth", depth, "brickwall depth");
    s->add_option("--dt", dt, "time step");
    s->add_option("--order", order, "product-formula order");
    subs.push_back(s);
  }
  subs[4]->add_option("--connectivity", connectivity, "linear | next_nearest");
  subs[4]->add_option("--source", source, "circuit | trotter");
  subs[5]->add_option("--table", table, "CSV with dt and fidelity columns");
  subs[5]->add_option("--t", t_grid, "total times");
  subs[5]->add_option("--eta", eta, "decay per time step");
  subs[6]->add_option("--eta", eta, "decay per CNOT layer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  std::size_t which = 0;
  for (; which < subs.size(); ++which)
    if (subs[which]->parsed()) break;

  try {
    Context ctx;
    ctx.cfg = defaults();
    if (!config_path.empty()) {
      json file;
      try {
        file = json::parse(read_file(config_path));
      } catch (const json::parse_error& e) {
        throw ArgumentError(config_path + ": " + e.what());
      }
      merge(ctx.cfg, file, "");
    }
    json& cfg = ctx.cfg;
    if (seed) cfg["optimizer"]["seed"] = *seed;
    if (!out_dir.empty()) cfg["outputs"]["dir"] = out_dir;
    if (!circuit.empty()) cfg["circuit"] = circuit;
    if (!model.empty()) cfg["model"]["name"] = model;
    if (g) cfg["model"]["params"]["g"] = *g;
    if (n_sites) cfg["n_sites"] = *n_sites;
    if (depth) cfg["depth"] = *depth;
    if (dt) cfg["dt"] = *dt;
    if (order) cfg["order"] = *order;
    if (!connectivity.empty()) cfg["compile"]["connectivity"] = connectivity;
    if (!source.empty()) cfg["compile"]["source"] = source;
    if (!table.empty()) cfg["plan"]["table"] = table;
    if (!t_grid.empty()) cfg["plan"]["t"] = t_grid;
    if (eta) cfg[which == 6 ? "echo" : "plan"][which == 6 ? "eta_layer" : "eta"] = *eta;
    ctx.jobs = jobs_opt.value_or(1);
    ctx.out_dir = get<std::string>(cfg, "/outputs/dir"_json_pointer);
    json hashed = cfg;
    hashed.erase("outputs");  // where results go does not change them
    ctx.hash = hex64(fnv1a(hashed.dump()));
    return cmds[which].fn(ctx);
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kExitCapacity;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
