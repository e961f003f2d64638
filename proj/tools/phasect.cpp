// phasect command-line tool.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "phasect/error.hpp"
#include "phasect/io.hpp"
#include "phasect/phantoms.hpp"
#include "phasect/phasediagram.hpp"
#include "phasect/predict.hpp"
#include "phasect/sensing.hpp"
#include "phasect/solvers.hpp"
#include "phasect/theory.hpp"

#ifndef PHASECT_VERSION
#define PHASECT_VERSION "0.0.0"
#endif

using namespace phasect;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

// Parses "a:b", "a:b:step" or "v1,v2,...". Ranges are inclusive.
std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(std::stod(tok));
    if (parts.size() < 2 || parts.size() > 3) throw InvalidArgument("bad range: " + text);
    const double step = parts.size() == 3 ? parts[2] : 1.0;
    if (!(step > 0.0)) throw InvalidArgument("range step must be positive: " + text);
    const auto count = static_cast<long>(std::floor((parts[1] - parts[0]) / step + 1e-9));
    for (long k = 0; k <= count; ++k) out.push_back(parts[0] + static_cast<double>(k) * step);
    return out;
  }
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t used = 0;
    out.push_back(std::stod(tok, &used));
    if (used != tok.size()) throw InvalidArgument("bad list entry: " + tok);
  }
  if (out.empty()) throw InvalidArgument("empty list");
  return out;
}

std::vector<int> to_ints(const std::vector<double>& v) {
  std::vector<int> out;
  for (double d : v) out.push_back(static_cast<int>(std::lround(d)));
  return out;
}

bool has_flag(const std::vector<std::string>& args, const std::string& name) {
  for (const auto& a : args)
    if (a == name || a.rfind(name + "=", 0) == 0) return true;
  return false;
}

// Appends key=value lines from --config FILE for keys not given as flags.
std::vector<std::string> inject_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
    else if (args[k].rfind("--config=", 0) == 0) path = args[k].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::string line;
  std::vector<std::string> extra;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(eq == std::string::npos ? line : line.substr(0, eq));
    if (key.empty()) continue;
    const std::string flag = "--" + key;
    if (has_flag(args, flag)) continue;
    if (eq == std::string::npos) {
      extra.push_back(flag);
    } else {
      const std::string value = trim(line.substr(eq + 1));
      if (value == "true") extra.push_back(flag);
      else if (value != "false") {
        extra.push_back(flag);
        extra.push_back(value);
      }
    }
  }
  // Drop --config itself so a replayed manifest does not depend on the file.
  std::vector<std::string> out;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config") {
      ++k;
      continue;
    }
    if (args[k].rfind("--config=", 0) == 0) continue;
    out.push_back(args[k]);
  }
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json parameters = json::object();
  std::uint64_t master_seed = 0;
  std::vector<std::string> outputs;
  Clock::time_point start = Clock::now();

  void write(const fs::path& path) const {
    json j = {{"command", command},
              {"argv", argv},
              {"parameters", parameters},
              {"version", PHASECT_VERSION},
              {"master_seed", master_seed},
              {"outputs", outputs},
              {"wall_time_s", std::chrono::duration<double>(Clock::now() - start).count()}};
    write_json(path, j);
  }
};

json option_values(const CLI::App* app) {
  json out = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (opt->get_type_size() == 0) out[name] = true;
      else out[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

fs::path manifest_for(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

Matrix heat_map(const Lattice& lat) {
  const Index nx = lat.x.size(), ny = lat.y.size();
  Matrix img(ny, nx);
  for (Index r = 0; r < ny; ++r)
    for (Index c = 0; c < nx; ++c) img(r, c) = lat.values(c, ny - 1 - r);
  return img;
}

struct RunData {
  GridSpec spec;
  RateGrid rates;
};

RunData load_run(const fs::path& dir) {
  RunData d;
  d.spec = grid_spec_from_json(read_json(dir / "grid.json"));
  d.rates = success_rates(d.spec, read_results_csv(dir / "results.csv"));
  return d;
}

fs::path extra_path(const fs::path& out, std::size_t k) {
  fs::path p = out;
  p.replace_extension();
  return fs::path(p.string() + ".extra" + std::to_string(k) + out.extension().string());
}

int dispatch(const std::vector<std::string>& raw_args);

int run_app(std::vector<std::string> args) {
  args = inject_config(std::move(args));

  CLI::App app{"Phase diagrams for sparse recovery from tomographic and Gaussian measurements",
               "phasect"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", PHASECT_VERSION);
  app.require_subcommand(1);
  app.fallthrough(false);
  std::string config_unused;
  app.add_option("--config", config_unused, "File of key=value lines (explicit flags win)");

  Manifest manifest;
  manifest.argv = args;
  std::function<void()> action;

  // matrix
  auto* mat = app.add_subcommand("matrix", "Build a measurement matrix (Matrix Market + JSON sidecar)");
  struct {
    std::string geometry, out;
    int nside = 64, views = 26;
    Index rays = 0, m = 0, n = 0;
    double offset = 20.0, radius = 0.0;
    std::uint64_t seed = 1;
  } mo;
  mat->add_option("--geometry", mo.geometry, "fanbeam | fanbeam_rand | random_rays | gaussian")->required();
  mat->add_option("--nside", mo.nside, "Image side length in pixels");
  mat->add_option("--views", mo.views, "Number of projection views (CT geometries)");
  mat->add_option("--rays", mo.rays, "Number of rays for random_rays (default views*2*nside)");
  mat->add_option("--m", mo.m, "Rows of a Gaussian matrix (default views*2*nside)");
  mat->add_option("--n", mo.n, "Columns of a Gaussian matrix (default disk pixel count)");
  mat->add_option("--offset", mo.offset, "Angular offset of the first view in degrees");
  mat->add_option("--radius", mo.radius, "Source radius in pixel units (0 = 2*nside)");
  mat->add_option("--seed", mo.seed, "Random seed");
  mat->add_option("--out", mo.out, "Output .mtx path")->required();
  mat->callback([&] {
    action = [&] {
      const GeometryKind g = parse_geometry_kind(mo.geometry);
      const Index rows = static_cast<Index>(mo.views) * 2 * mo.nside;
      std::optional<SensingMatrix> a;
      switch (g) {
        case GeometryKind::fanbeam: a = build_fanbeam(mo.nside, mo.views, mo.offset, mo.radius); break;
        case GeometryKind::fanbeam_rand:
          a = build_fanbeam_random(mo.nside, mo.views, mo.seed, mo.radius);
          break;
        case GeometryKind::random_rays:
          a = build_random_rays(mo.nside, mo.rays > 0 ? mo.rays : rows, mo.seed);
          break;
        case GeometryKind::gaussian:
          a = build_gaussian(mo.m > 0 ? mo.m : rows, mo.n > 0 ? mo.n : DiskMask(mo.nside).n_pixels(),
                             mo.seed);
          break;
      }
      write_matrix_market(mo.out, *a);
      manifest.master_seed = mo.seed;
      manifest.outputs = {mo.out, sidecar_path(mo.out).string()};
      manifest.write(manifest_for(mo.out));
      std::cout << "wrote " << mo.out << " (" << a->rows() << " x " << a->cols() << ")\n";
    };
  });

  // phantom
  auto* ph = app.add_subcommand("phantom", "Generate a test image (CSV + JSON sidecar)");
  struct {
    std::string cls, out, render;
    int nside = 64, grains = 0;
    Index n = 0, sparsity = 0;
    int max_iter = 5000;
    std::uint64_t seed = 1;
  } po;
  ph->add_option("--class", po.cls, "signedspikes | spikes | altprojisotv | grains")->required();
  ph->add_option("--nside", po.nside, "Image side length in pixels");
  ph->add_option("--n", po.n, "Vector length for spike classes (default disk pixel count)");
  ph->add_option("--sparsity", po.sparsity,
                 "Nonzeros (spikes), gradient nonzeros (altprojisotv) or minimum support (grains)");
  ph->add_option("--grains", po.grains, "Number of grains (grains class, instead of --sparsity)");
  ph->add_option("--max-iter", po.max_iter, "Iteration cap for altprojisotv");
  ph->add_option("--seed", po.seed, "Random seed");
  ph->add_option("--out", po.out, "Output CSV path")->required();
  ph->add_option("--render", po.render, "Optional PGM rendering of the image");
  ph->callback([&] {
    action = [&] {
      const ImageClass cls = parse_image_class(po.cls);
      const DiskMask mask(po.nside);
      const bool spikes = cls == ImageClass::signedspikes || cls == ImageClass::spikes;
      const Index n = spikes && po.n > 0 ? po.n : mask.n_pixels();
      Vector x;
      if (cls == ImageClass::grains && po.grains > 0) {
        x = gen_grains(mask, po.grains, po.seed);
      } else {
        if (po.sparsity <= 0) throw InvalidArgument("--sparsity is required");
        switch (cls) {
          case ImageClass::signedspikes: x = gen_signedspikes(n, po.sparsity, po.seed); break;
          case ImageClass::spikes: x = gen_spikes(n, po.sparsity, po.seed); break;
          case ImageClass::altprojisotv: x = gen_altprojisotv(mask, po.sparsity, po.seed, po.max_iter); break;
          case ImageClass::grains: x = gen_grains_with_support(mask, po.sparsity, po.seed); break;
        }
      }
      write_vector_csv(po.out, x);
      const double lo = std::min(0.0, x.minCoeff()), hi = std::max(x.maxCoeff(), lo + 1e-12);
      json side = {{"class", to_string(cls)},      {"seed", po.seed},
                   {"n_side", po.nside},           {"n", x.size()},
                   {"sparsity_target", po.sparsity}, {"grains", po.grains},
                   {"pixel_sparsity", pixel_sparsity(x)},
                   {"window", {lo, hi}}};
      if (x.size() == mask.n_pixels())
        side["gradient_sparsity"] = gradient_sparsity(GradientOperator(mask), x);
      write_json(sidecar_path(po.out), side);
      manifest.master_seed = po.seed;
      manifest.outputs = {po.out, sidecar_path(po.out).string()};
      if (!po.render.empty()) {
        if (x.size() != mask.n_pixels()) throw InvalidArgument("--render needs a disk-sized image");
        write_pgm(po.render, mask.to_square(x), lo, hi);
        manifest.outputs.push_back(po.render);
      }
      manifest.write(manifest_for(po.out));
      std::cout << "wrote " << po.out << " (" << x.size() << " values)\n";
    };
  });

  // solve
  auto* so = app.add_subcommand("solve", "Recover an image from measurements");
  struct {
    std::string matrix, rhs, phantom, problem = "p1", solver = "cp", out, preset;
    double lambda = 1e-4, feas_tol = 1e-8;
    int iterations = 20000, log_every = 100, nside = 0;
  } sopt;
  so->add_option("--matrix", sopt.matrix, "Measurement matrix (.mtx)")->required();
  so->add_option("--rhs", sopt.rhs, "Measurement vector CSV");
  so->add_option("--phantom", sopt.phantom, "Reference image CSV; measurements are computed from it");
  so->add_option("--problem", sopt.problem, "p1 | lp | tv");
  so->add_option("--solver", sopt.solver, "cp (primal-dual) | lp (interior-point oracle; p1/lp only)");
  so->add_option("--lambda", sopt.lambda, "Primal-dual balancing parameter");
  so->add_option("--iterations", sopt.iterations, "Iteration budget K");
  so->add_option("--feas-tol", sopt.feas_tol, "Early-exit tolerance (0 runs all K iterations)");
  so->add_option("--log-every", sopt.log_every, "History interval");
  so->add_option("--nside", sopt.nside, "Image side for TV (default from the matrix sidecar)");
  so->add_option("--preset", sopt.preset, "desk: lambda=1e-2");
  so->add_option("--out", sopt.out, "Output image CSV; history and summary go next to it")->required();
  so->callback([&] {
    action = [&] {
      if (sopt.rhs.empty() == sopt.phantom.empty())
        throw InvalidArgument("give exactly one of --rhs and --phantom");
      if (sopt.preset == "desk" && so->count("--lambda") == 0) sopt.lambda = 1e-2;
      else if (!sopt.preset.empty() && sopt.preset != "desk") throw InvalidArgument("unknown preset " + sopt.preset);
      const SensingMatrix a = read_matrix_market(sopt.matrix);
      std::optional<Vector> reference;
      Vector b;
      if (!sopt.phantom.empty()) {
        reference = read_vector_csv(sopt.phantom);
        b = apply(a, *reference);
      } else {
        b = read_vector_csv(sopt.rhs);
      }
      SolverConfig cfg;
      cfg.kind = parse_problem_kind(sopt.problem);
      cfg.lambda = sopt.lambda;
      cfg.max_iter = sopt.iterations;
      cfg.feas_tol = sopt.feas_tol;
      cfg.log_every = sopt.log_every;
      Solution sol;
      if (sopt.solver == "lp") {
        sol = lp_oracle(cfg.kind, a, b);
      } else if (sopt.solver == "cp") {
        const int nside = sopt.nside > 0 ? sopt.nside : a.geometry().n_side;
        std::optional<DiskMask> mask;
        if (cfg.kind == ProblemKind::TV) {
          if (nside <= 0) throw InvalidArgument("TV needs --nside");
          mask.emplace(nside);
        }
        sol = solve_cp(cfg, a, b, mask ? &*mask : nullptr, reference ? &*reference : nullptr);
      } else {
        throw InvalidArgument("unknown solver " + sopt.solver);
      }
      write_vector_csv(sopt.out, sol.x);
      std::string hist = "iteration,objective,residual,image_rmse\n";
      char buf[160];
      for (const auto& h : sol.history) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,", h.iteration, h.objective, h.residual);
        hist += buf;
        if (h.image_rmse) {
          std::snprintf(buf, sizeof buf, "%.17g", *h.image_rmse);
          hist += buf;
        }
        hist += '\n';
      }
      const fs::path hist_path = sopt.out + ".history.csv";
      write_text_atomic(hist_path, hist);
      json summary = {{"problem", to_string(cfg.kind)}, {"solver", sopt.solver},
                      {"lambda", cfg.lambda},          {"K", cfg.max_iter},
                      {"iterations_run", sol.iterations_run}, {"objective", sol.primal_objective},
                      {"residual", sol.data_residual}};
      if (reference) {
        const RecoveryResult rec = check_recovery(sol.x, *reference, default_epsilon(cfg.kind));
        summary["relative_error"] = rec.relative_error;
        summary["recovered"] = rec.success;
      }
      write_json(sidecar_path(sopt.out), summary);
      manifest.outputs = {sopt.out, hist_path.string(), sidecar_path(sopt.out).string()};
      manifest.write(manifest_for(sopt.out));
      std::cout << summary.dump() << "\n";
    };
  });

  // diagram
  auto* dg = app.add_subcommand("diagram", "Sweep a DT or ALMT phase diagram");
  struct {
    std::string type = "almt", geometry = "fanbeam", cls = "signedspikes", problem = "p1", out;
    std::string sampling, delta, sparsity, preset, solver = "auto";
    int nside = 64, realizations = 100, workers = 1, iterations = 20000;
    Index n_pixels = 0, oracle_max = 2000;
    std::size_t task_budget = 0;
    std::uint64_t seed = 1;
    double offset = 20.0, lambda = 1e-4, feas_tol = 1e-8, epsilon = 0.0;
  } dopt;
  dg->add_option("--type", dopt.type, "almt | dt");
  dg->add_option("--geometry", dopt.geometry, "fanbeam | fanbeam_rand | random_rays | gaussian");
  dg->add_option("--class", dopt.cls, "signedspikes | spikes | altprojisotv | grains");
  dg->add_option("--problem", dopt.problem, "p1 | lp | tv");
  dg->add_option("--nside", dopt.nside, "Image side length in pixels");
  dg->add_option("--n-pixels", dopt.n_pixels, "Image size for gaussian diagrams with spike classes");
  dg->add_option("--sampling", dopt.sampling,
                 "Sampling levels: views (fan-beam) or m (gaussian, random_rays); list or a:b[:step]");
  dg->add_option("--delta", dopt.delta, "Sampling levels as m/N fractions (gaussian, random_rays)");
  dg->add_option("--sparsity", dopt.sparsity, "Sparsity levels: s/N (almt) or rho=s/m (dt)");
  dg->add_option("--realizations", dopt.realizations, "Problems per cell");
  dg->add_option("--seed", dopt.seed, "Master seed");
  dg->add_option("--offset", dopt.offset, "Fan-beam view offset in degrees");
  dg->add_option("--solver", dopt.solver, "auto (LP oracle where it fits, else CP) | cp");
  dg->add_option("--oracle-max-variables", dopt.oracle_max, "Size bound for the LP oracle");
  dg->add_option("--lambda", dopt.lambda, "Primal-dual balancing parameter");
  dg->add_option("--iterations", dopt.iterations, "Primal-dual iteration budget K");
  dg->add_option("--feas-tol", dopt.feas_tol, "Primal-dual early-exit tolerance");
  dg->add_option("--epsilon", dopt.epsilon, "Recovery threshold (0 = problem default)");
  dg->add_option("--workers", dopt.workers, "Worker threads (PHASECT_WORKERS overrides)");
  dg->add_option("--task-budget", dopt.task_budget, "Stop after this many new tasks (0 = no limit)");
  dg->add_option("--preset", dopt.preset, "desk: nside 16, 20 realizations, 10x10 grid, lambda 1e-2");
  dg->add_option("--out", dopt.out, "Output directory")->required();
  dg->callback([&] {
    action = [&] {
      const DiagramKind kind = parse_diagram_kind(dopt.type);
      const GeometryKind geometry = parse_geometry_kind(dopt.geometry);
      const bool desk = dopt.preset == "desk";
      if (!dopt.preset.empty() && !desk) throw InvalidArgument("unknown preset " + dopt.preset);
      auto unset = [&](const char* flag) { return dg->count(flag) == 0; };
      if (desk) {
        if (unset("--nside")) dopt.nside = 16;
        if (unset("--realizations")) dopt.realizations = 20;
        if (unset("--lambda")) dopt.lambda = 1e-2;
      }
      GridOverrides ov;
      ov.realizations = dopt.realizations;
      ov.master_seed = dopt.seed;
      if (dopt.n_pixels > 0) ov.n_pixels = dopt.n_pixels;
      const bool views = geometry == GeometryKind::fanbeam || geometry == GeometryKind::fanbeam_rand;
      if (!dopt.sampling.empty()) {
        ov.sampling_levels = parse_list(dopt.sampling);
      } else if (desk) {
        ov.sampling_levels = parse_list("1:10");
        if (!views)
          for (double& v : *ov.sampling_levels) v *= 2.0 * dopt.nside;
      }
      if (!dopt.sparsity.empty()) ov.sparsity_levels = parse_list(dopt.sparsity);
      else if (desk)
        ov.sparsity_levels = kind == DiagramKind::ALMT ? parse_list("0.05:0.5:0.05") : parse_list("0.0625:1:0.0625");

      GridSpec spec = plan_grid(kind, geometry, parse_image_class(dopt.cls), parse_problem_kind(dopt.problem),
                                dopt.nside, ov);
      if (!dopt.delta.empty()) {
        if (views) throw InvalidArgument("--delta applies to gaussian and random_rays");
        spec.sampling_levels.clear();
        for (double d : parse_list(dopt.delta))
          spec.sampling_levels.push_back(std::floor(d * static_cast<double>(spec.image_size()) + 0.5));
      }
      spec.offset_deg = dopt.offset;
      spec.solver.cp.lambda = dopt.lambda;
      spec.solver.cp.max_iter = dopt.iterations;
      spec.solver.cp.feas_tol = dopt.feas_tol;
      spec.solver.epsilon = dopt.epsilon;
      spec.solver.oracle.max_variables = dopt.oracle_max;
      if (dopt.solver == "cp") spec.solver.prefer_lp_oracle = false;
      else if (dopt.solver != "auto") throw InvalidArgument("unknown solver " + dopt.solver);
      plan_grid(kind, geometry, spec.image_class, spec.problem, spec.n_side,
                GridOverrides{spec.sampling_levels, spec.sparsity_levels, spec.realizations,
                              spec.master_seed, ov.n_pixels});

      int workers = dopt.workers;
      if (const char* env = std::getenv("PHASECT_WORKERS")) {
        try {
          workers = std::stoi(env);
        } catch (const std::exception&) {
          throw InvalidArgument(std::string("bad PHASECT_WORKERS value: ") + env);
        }
      }
      const fs::path dir = dopt.out;
      fs::create_directories(dir);
      write_json(dir / "grid.json", grid_spec_to_json(spec));
      RunOptions ro;
      ro.workers = workers;
      ro.checkpoint_dir = dir;
      if (dopt.task_budget > 0) ro.task_budget = dopt.task_budget;
      std::cerr << "planned " << spec.planned_problems() << " problems (" << spec.sparsity_levels.size()
                << " x " << spec.sampling_levels.size() << " x " << spec.realizations << "), N = "
                << spec.image_size() << "\n";
      const DiagramResult res = run_diagram(spec, ro);
      manifest.master_seed = spec.master_seed;
      if (!res.complete) {
        std::cout << "interrupted after " << res.tasks_computed << " new tasks; "
                  << res.results.size() << "/" << spec.planned_problems()
                  << " recorded in checkpoint.csv (rerun to resume)\n";
        return;
      }
      write_results_csv(dir / "results.csv", spec.kind, res.results);
      write_rates_csv(dir / "rates.csv", res.rates);
      int errors = 0;
      for (const auto& r : res.results) errors += r.status == CellStatus::error;
      manifest.outputs = {(dir / "grid.json").string(), (dir / "results.csv").string(),
                          (dir / "rates.csv").string()};
      manifest.write(dir / "manifest.json");
      std::cout << "wrote " << (dir / "results.csv").string() << " (" << res.results.size() << " rows, "
                << errors << " solver errors)\n";
    };
  });

  // contour
  auto* ct = app.add_subcommand("contour", "Extract an iso-rate contour from a diagram run");
  struct {
    std::string run, out;
    double level = 0.5;
  } co;
  ct->add_option("--run", co.run, "Diagram output directory")->required();
  ct->add_option("--level", co.level, "Success-rate level in (0, 1)");
  ct->add_option("--out", co.out, "Output curve CSV; extra branches get .extraK suffixes")->required();
  ct->callback([&] {
    action = [&] {
      const RunData d = load_run(co.run);
      ContourResult c = extract_contour(d.rates, co.level);
      if (c.empty()) throw Error("no contour at level " + std::to_string(co.level) + ": the rates never cross it");
      c.main.provenance = "contour level=" + std::to_string(co.level) + " run=" + co.run;
      export_curve(c.main, co.out);
      manifest.outputs = {co.out, co.out + ".json"};
      for (std::size_t k = 0; k < c.extras.size(); ++k) {
        const fs::path p = extra_path(co.out, k + 1);
        c.extras[k].provenance = c.main.provenance + " branch=" + std::to_string(k + 1);
        export_curve(c.extras[k], p.string());
        manifest.outputs.push_back(p.string());
      }
      manifest.master_seed = d.spec.master_seed;
      manifest.write(manifest_for(co.out));
      std::cout << "wrote " << co.out << " (" << c.main.size() << " points, " << c.extras.size()
                << " extra branches)\n";
    };
  });

  // width
  auto* wd = app.add_subcommand("width", "Transition width along each grid line of a diagram run");
  struct {
    std::string run, out;
    double lo = 0.05, hi = 0.95;
  } wo;
  wd->add_option("--run", wo.run, "Diagram output directory")->required();
  wd->add_option("--lo", wo.lo, "Lower success level");
  wd->add_option("--hi", wo.hi, "Upper success level");
  wd->add_option("--out", wo.out, "Output CSV (x,width; nan where undefined)")->required();
  wd->callback([&] {
    action = [&] {
      const RunData d = load_run(wo.run);
      const auto widths = transition_width(d.rates, wo.lo, wo.hi);
      const Lattice lat = to_lattice(d.rates);
      std::string text = "x,width\n";
      char buf[80];
      for (std::size_t k = 0; k < widths.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", lat.x(static_cast<Index>(k)),
                      widths[k] ? *widths[k] : std::nan(""));
        text += buf;
      }
      write_text_atomic(wo.out, text);
      manifest.master_seed = d.spec.master_seed;
      manifest.outputs = {wo.out};
      manifest.write(manifest_for(wo.out));
      std::cout << "wrote " << wo.out << "\n";
    };
  });

  // theory
  auto* th = app.add_subcommand("theory", "Theoretical Gaussian phase-transition curve");
  struct {
    std::string curve = "l1", coords = "almt", out;
    int points = 99;
    double lo = 0.025, hi = 0.975;
  } to;
  th->add_option("--curve", to.curve, "l1 | l1_nonneg");
  th->add_option("--coords", to.coords, "almt (beta grid) | dt (rho grid)");
  th->add_option("--points", to.points, "Number of grid points");
  th->add_option("--from", to.lo, "First grid value");
  th->add_option("--to", to.hi, "Last grid value");
  th->add_option("--out", to.out, "Output curve CSV")->required();
  th->callback([&] {
    action = [&] {
      CurveKind kind;
      if (to.curve == "l1") kind = CurveKind::theoretical_l1;
      else if (to.curve == "l1_nonneg") kind = CurveKind::theoretical_l1_nonneg;
      else throw InvalidArgument("unknown curve " + to.curve);
      if (to.points < 2 || !(to.lo > 0.0 && to.lo < to.hi && to.hi <= 1.0))
        throw InvalidArgument("need --points >= 2 and 0 < --from < --to <= 1");
      std::vector<double> grid;
      for (int k = 0; k < to.points; ++k)
        grid.push_back(to.lo + (to.hi - to.lo) * k / (to.points - 1));
      Curve c = parse_coords(to.coords) == Coords::ALMT ? almt_curve(kind, grid) : dt_curve_from_psi(kind, grid);
      export_curve(c, to.out);
      manifest.outputs = {to.out, to.out + ".json"};
      manifest.write(manifest_for(to.out));
      std::cout << "wrote " << to.out << " (" << c.size() << " points)\n";
    };
  });

  // convert
  auto* cv = app.add_subcommand("convert", "Convert a curve between DT and ALMT coordinates");
  struct {
    std::string in, from, to, out;
  } cvo;
  cv->add_option("--in", cvo.in, "Input curve CSV")->required();
  cv->add_option("--from", cvo.from, "almt | dt")->required();
  cv->add_option("--to", cvo.to, "almt | dt")->required();
  cv->add_option("--out", cvo.out, "Output curve CSV")->required();
  cv->callback([&] {
    action = [&] {
      const Curve c = import_curve(cvo.in, parse_coords(cvo.from));
      Curve r = convert_coords(c, parse_coords(cvo.to));
      r.provenance = "converted from " + cvo.in;
      export_curve(r, cvo.out);
      manifest.outputs = {cvo.out, cvo.out + ".json"};
      manifest.write(manifest_for(cvo.out));
      std::cout << "wrote " << cvo.out << " (" << r.size() << " points)\n";
    };
  });

  // predict
  auto* pr = app.add_subcommand("predict", "Critical number of views for a given sparsity");
  struct {
    std::string contour, coords, out;
    double sparsity = 0, n_pixels = 0, rays_per_view = 0;
  } pro;
  pr->add_option("--contour", pro.contour, "Curve CSV")->required();
  pr->add_option("--coords", pro.coords, "almt | dt")->required();
  pr->add_option("--sparsity", pro.sparsity, "Absolute sparsity s")->required();
  pr->add_option("--n-pixels", pro.n_pixels, "Total masked pixels N")->required();
  pr->add_option("--rays-per-view", pro.rays_per_view, "Rays per projection (2*nside)")->required();
  pr->add_option("--out", pro.out, "Optional JSON output path");
  pr->callback([&] {
    action = [&] {
      PredictionInput in;
      in.s = pro.sparsity;
      in.n = pro.n_pixels;
      in.rays_per_view = pro.rays_per_view;
      in.curve = import_curve(pro.contour, parse_coords(pro.coords));
      const Prediction p = predict(in);
      const json j = {{"views_fractional", p.views_fractional},
                      {"views_ceil", p.views_ceil},
                      {"m_critical", p.m_critical}};
      if (!pro.out.empty()) {
        write_json(pro.out, j);
        manifest.outputs = {pro.out};
        manifest.write(manifest_for(pro.out));
      }
      std::cout << j.dump() << "\n";
    };
  });

  // recovery-curve
  auto* rc = app.add_subcommand("recovery-curve", "Reconstruction error versus number of views");
  struct {
    std::string geometry = "fanbeam", cls = "altprojisotv", problem = "tv", views = "1:26", phantom, out,
                preset;
    int nside = 64, iterations = 20000;
    Index sparsity = 0;
    double lambda = 1e-4, feas_tol = 1e-8, offset = 20.0;
    std::uint64_t seed = 1;
  } ro;
  rc->add_option("--geometry", ro.geometry, "fanbeam | fanbeam_rand | random_rays | gaussian");
  rc->add_option("--nside", ro.nside, "Image side length in pixels");
  rc->add_option("--class", ro.cls, "Image class when generating the phantom");
  rc->add_option("--sparsity", ro.sparsity, "Sparsity target when generating the phantom");
  rc->add_option("--phantom", ro.phantom, "Phantom CSV (instead of generating one)");
  rc->add_option("--problem", ro.problem, "p1 | lp | tv");
  rc->add_option("--views", ro.views, "View counts, list or a:b[:step]");
  rc->add_option("--lambda", ro.lambda, "Primal-dual balancing parameter");
  rc->add_option("--iterations", ro.iterations, "Iteration budget K");
  rc->add_option("--feas-tol", ro.feas_tol, "Early-exit tolerance");
  rc->add_option("--offset", ro.offset, "Fan-beam view offset in degrees");
  rc->add_option("--seed", ro.seed, "Random seed");
  rc->add_option("--preset", ro.preset, "desk: nside 16, lambda 1e-2");
  rc->add_option("--out", ro.out, "Output CSV (views,image_rmse,data_rmse,iterations)")->required();
  rc->callback([&] {
    action = [&] {
      if (ro.preset == "desk") {
        if (rc->count("--nside") == 0) ro.nside = 16;
        if (rc->count("--lambda") == 0) ro.lambda = 1e-2;
      } else if (!ro.preset.empty()) {
        throw InvalidArgument("unknown preset " + ro.preset);
      }
      const DiskMask mask(ro.nside);
      Vector x;
      if (!ro.phantom.empty()) {
        x = read_vector_csv(ro.phantom);
      } else {
        if (ro.sparsity <= 0) throw InvalidArgument("--sparsity is required without --phantom");
        GridSpec tmp;
        tmp.n_side = ro.nside;
        tmp.image_class = parse_image_class(ro.cls);
        x = cell_phantom(tmp, ro.sparsity, ro.seed);
      }
      SolverConfig cfg;
      cfg.kind = parse_problem_kind(ro.problem);
      cfg.lambda = ro.lambda;
      cfg.max_iter = ro.iterations;
      cfg.feas_tol = ro.feas_tol;
      const auto rows = recovery_curve(mask, x, parse_geometry_kind(ro.geometry),
                                       to_ints(parse_list(ro.views)), cfg, ro.seed, ro.offset);
      std::string text = "views,image_rmse,data_rmse,iterations\n";
      char buf[128];
      const double scale = x.cwiseAbs().maxCoeff();
      std::optional<int> recovered_at;
      double sharpest = 1.0;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d\n", r.views, r.image_rmse, r.data_rmse, r.iterations);
        text += buf;
        if (!recovered_at && r.image_rmse <= 1e-3 * scale) recovered_at = r.views;
        if (k > 0 && rows[k - 1].image_rmse > 0.0) sharpest = std::min(sharpest, r.image_rmse / rows[k - 1].image_rmse);
      }
      write_text_atomic(ro.out, text);
      json side = {{"recovered_at", recovered_at ? json(*recovered_at) : json(nullptr)},
                   {"sharpest_drop_ratio", sharpest},
                   {"abrupt", sharpest < 0.1},
                   {"lambda", cfg.lambda},
                   {"K", cfg.max_iter}};
      write_json(sidecar_path(ro.out), side);
      manifest.master_seed = ro.seed;
      manifest.outputs = {ro.out, sidecar_path(ro.out).string()};
      manifest.write(manifest_for(ro.out));
      std::cout << "wrote " << ro.out << "; " << side.dump() << "\n";
    };
  });

  // render
  auto* rd = app.add_subcommand("render", "8-bit PGM of a diagram (0 black, 1 white) or an image");
  struct {
    std::string run, image, out;
    int nside = 0;
    double lo = NAN, hi = NAN;
  } rdo;
  rd->add_option("--run", rdo.run, "Diagram output directory (heat map, one pixel per cell)");
  rd->add_option("--image", rdo.image, "Image CSV on the disk mask");
  rd->add_option("--nside", rdo.nside, "Image side length for --image");
  rd->add_option("--lo", rdo.lo, "Window minimum for --image (default min(0, min x))");
  rd->add_option("--hi", rdo.hi, "Window maximum for --image (default max x)");
  rd->add_option("--out", rdo.out, "Output PGM path")->required();
  rd->callback([&] {
    action = [&] {
      if (rdo.run.empty() == rdo.image.empty()) throw InvalidArgument("give exactly one of --run and --image");
      if (!rdo.run.empty()) {
        const RunData d = load_run(rdo.run);
        write_pgm(rdo.out, heat_map(to_lattice(d.rates)), 0.0, 1.0);
      } else {
        if (rdo.nside <= 0) throw InvalidArgument("--image needs --nside");
        const DiskMask mask(rdo.nside);
        const Vector x = read_vector_csv(rdo.image);
        if (x.size() != mask.n_pixels()) throw DimensionMismatch("image size does not match the disk mask");
        const double lo = std::isnan(rdo.lo) ? std::min(0.0, x.minCoeff()) : rdo.lo;
        const double hi = std::isnan(rdo.hi) ? std::max(x.maxCoeff(), lo + 1e-12) : rdo.hi;
        write_pgm(rdo.out, mask.to_square(x), lo, hi);
      }
      manifest.outputs = {rdo.out};
      manifest.write(manifest_for(rdo.out));
      std::cout << "wrote " << rdo.out << "\n";
    };
  });

  // replay
  auto* rp = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  struct {
    std::string manifest, out;
  } rpo;
  rp->add_option("--manifest", rpo.manifest, "Manifest JSON")->required();
  rp->add_option("--out", rpo.out, "Replace the recorded --out value");
  int replay_code = 0;
  rp->callback([&] {
    action = [&] {
      const json m = read_json(rpo.manifest);
      auto argv = m.at("argv").get<std::vector<std::string>>();
      if (!rpo.out.empty()) {
        bool replaced = false;
        for (std::size_t k = 0; k + 1 < argv.size(); ++k)
          if (argv[k] == "--out") {
            argv[k + 1] = rpo.out;
            replaced = true;
          }
        if (!replaced) argv.insert(argv.end(), {"--out", rpo.out});
      }
      replay_code = dispatch(argv);
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (const CLI::App* sub : app.get_subcommands()) {
    manifest.command = sub->get_name();
    manifest.parameters = option_values(sub);
  }
  if (!action) return 1;
  action();
  return replay_code;
}

int dispatch(const std::vector<std::string>& args) {
  try {
    return run_app(args);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args);
}
