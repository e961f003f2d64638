// Desk-scale acceptance run: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phasect/error.hpp"
#include "phasect/phasediagram.hpp"
#include "phasect/predict.hpp"
#include "phasect/rng.hpp"
#include "phasect/solvers.hpp"
#include "phasect/theory.hpp"

using namespace phasect;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path workdir;
  int workers = 1;
  // Grids shared between criteria.
  std::map<std::string, RateGrid> grids;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<double> range(double from, double to, double step) {
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double v = from + k * step;
    if (v > to + 1e-9) break;
    out.push_back(v);
  }
  return out;
}

SolverPolicy cp_policy(ProblemKind kind) {
  SolverPolicy p;
  p.cp.kind = kind;
  p.cp.lambda = 1e-2;
  p.cp.max_iter = 20000;
  p.cp.feas_tol = 1e-8;
  return p;
}

RateGrid run(Context& ctx, const std::string& name, const GridSpec& spec) {
  auto it = ctx.grids.find(name);
  if (it != ctx.grids.end()) return it->second;
  const fs::path dir = ctx.workdir / name;
  fs::remove_all(dir);
  RunOptions opts;
  opts.workers = ctx.workers;
  opts.checkpoint_dir = dir;
  const DiagramResult res = run_diagram(spec, opts);
  write_results_csv(dir / "results.csv", spec.kind, res.results);
  write_rates_csv(dir / "rates.csv", res.rates);
  int errors = 0;
  for (const auto& r : res.results)
    if (r.status == CellStatus::error) ++errors;
  if (errors > 0) std::printf("  note: %s had %d solver errors\n", name.c_str(), errors);
  ctx.grids[name] = res.rates;
  return res.rates;
}

// Ordinate of the 50% contour on column ix; saturates at the lattice
// edge when the whole column lies on one side of the level.
double transition_at(const Lattice& lat, Index ix) {
  if (auto y = contour_ordinate_at(lat, 0.5, ix)) return *y;
  bool all_above = true;
  for (Index iy = 0; iy < lat.y.size(); ++iy)
    if (std::isfinite(lat.values(ix, iy)) && lat.values(ix, iy) < 0.5) all_above = false;
  return all_above ? lat.y.maxCoeff() : lat.y.minCoeff();
}

GridSpec gaussian_dt(Index n, std::vector<double> m_levels, ImageClass cls, ProblemKind kind,
                     int realizations) {
  GridOverrides ov;
  ov.n_pixels = n;
  ov.realizations = realizations;
  ov.sampling_levels = std::move(m_levels);
  ov.sparsity_levels = range(1.0 / 16, 1.0, 1.0 / 16);
  return plan_grid(DiagramKind::DT, GeometryKind::gaussian, cls, kind, 16, ov);
}

std::vector<double> dt_m_levels(Index n) {
  std::vector<double> m;
  for (double d : range(0.1, 1.0, 0.1)) m.push_back(std::round(d * static_cast<double>(n)));
  return m;
}

Outcome criterion1(Context& ctx) {
  const RateGrid g = run(ctx, "c1_gaussian_p1", gaussian_dt(128, dt_m_levels(128), ImageClass::signedspikes,
                                                            ProblemKind::P1, 25));
  const Lattice lat = to_lattice(g);
  double worst = 0.0;
  int cols = 0;
  std::string where;
  for (Index ix = 0; ix < lat.x.size(); ++ix) {
    const double delta = lat.x[ix];
    if (delta < 0.2 - 1e-9) continue;
    const double emp = transition_at(lat, ix);
    const double theo = interpolate(dt_curve_on_delta_grid(CurveKind::theoretical_l1, {delta}), delta);
    const double dev = std::abs(emp - theo);
    if (dev > worst) {
      worst = dev;
      where = fmt("%.2f", delta);
    }
    ++cols;
  }
  return {cols > 0 && worst <= 0.07,
          "max |rho_emp - rho_theory| = " + fmt("%.4f", worst) + " at delta " + where + " over " +
              std::to_string(cols) + " columns (tol 0.07)"};
}

Outcome criterion2(Context& ctx) {
  const RateGrid p1 = run(ctx, "c1_gaussian_p1", gaussian_dt(128, dt_m_levels(128), ImageClass::signedspikes,
                                                             ProblemKind::P1, 25));
  const RateGrid lp =
      run(ctx, "c2_gaussian_lp", gaussian_dt(128, dt_m_levels(128), ImageClass::spikes, ProblemKind::LP, 25));
  const Lattice a = to_lattice(p1);
  const Lattice b = to_lattice(lp);
  double worst = std::numeric_limits<double>::infinity();
  for (Index ix = 0; ix < a.x.size(); ++ix) worst = std::min(worst, transition_at(b, ix) - transition_at(a, ix));
  return {worst >= -0.02, "min (rho_LP - rho_P1) = " + fmt("%.4f", worst) + " (margin -0.02)"};
}

Outcome criterion3(Context& ctx) {
  GridOverrides ov;
  ov.realizations = 25;
  ov.sampling_levels = range(1, 6, 1);
  ov.sparsity_levels = range(1.0 / 16, 1.0, 1.0 / 16);
  const GridSpec ct = plan_grid(DiagramKind::DT, GeometryKind::fanbeam, ImageClass::signedspikes, ProblemKind::P1,
                                16, ov);
  const Index n = ct.image_size();
  std::vector<double> m;
  for (std::size_t j = 0; j < ct.sampling_levels.size(); ++j) m.push_back(static_cast<double>(ct.measurements(j)));
  const RateGrid a = run(ctx, "c3_fanbeam_p1", ct);
  const RateGrid b = run(ctx, "c3_gaussian_p1", gaussian_dt(n, m, ImageClass::signedspikes, ProblemKind::P1, 25));
  const Lattice la = to_lattice(a);
  const Lattice lb = to_lattice(b);
  double worst = 0.0;
  std::string cols;
  for (std::size_t j = 2; j < ct.sampling_levels.size(); ++j) {
    const double d = std::abs(transition_at(la, static_cast<Index>(j)) - transition_at(lb, static_cast<Index>(j)));
    worst = std::max(worst, d);
    cols += " " + fmt("%.3f", d);
  }
  return {worst <= 0.10, "N=" + std::to_string(n) + ", |rho_CT - rho_gauss| for views 3..6:" + cols +
                             " (tol 0.10)"};
}

GridSpec tv_grid(GeometryKind geometry) {
  GridOverrides ov;
  ov.realizations = 20;
  ov.sparsity_levels = range(0.05, 0.5, 0.05);
  std::vector<double> levels = range(1, 10, 1);
  if (geometry == GeometryKind::random_rays)
    for (double& v : levels) v *= 2 * 16;
  ov.sampling_levels = levels;
  GridSpec spec = plan_grid(DiagramKind::ALMT, geometry, ImageClass::altprojisotv, ProblemKind::TV, 16, ov);
  spec.solver = cp_policy(ProblemKind::TV);
  return spec;
}

Outcome criterion4(Context& ctx) {
  const RateGrid g = run(ctx, "c4_fanbeam_tv", tv_grid(GeometryKind::fanbeam));
  int bad_rows = 0;
  for (Index i = 0; i < g.rate.rows(); ++i) {
    int violations = 0;
    double drop = 0.0;
    for (Index j = 0; j + 1 < g.rate.cols(); ++j) {
      const double d = g.rate(i, j) - g.rate(i, j + 1);
      if (d > 0.0) {
        ++violations;
        drop = std::max(drop, d);
      }
    }
    if (violations > 1 || drop > 0.1 + 1e-12) ++bad_rows;
  }
  const auto widths = transition_width(g);
  std::vector<double> w;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const double frac = g.sparsity_coords[i];
    if (frac >= 0.1 - 1e-9 && frac <= 0.5 + 1e-9 && widths[i]) w.push_back(*widths[i]);
  }
  double median = std::numeric_limits<double>::quiet_NaN();
  if (!w.empty()) {
    std::sort(w.begin(), w.end());
    median = w.size() % 2 ? w[w.size() / 2] : 0.5 * (w[w.size() / 2 - 1] + w[w.size() / 2]);
  }
  const bool pass = bad_rows == 0 && !w.empty() && median <= 0.25;
  return {pass, std::to_string(bad_rows) + " non-monotone rows; median width " + fmt("%.4f", median) + " over " +
                    std::to_string(w.size()) + " rows (tol 0.25)"};
}

double grid_mean(const RateGrid& g) {
  double sum = 0.0;
  int count = 0;
  for (Index i = 0; i < g.rate.size(); ++i)
    if (std::isfinite(g.rate.data()[i])) {
      sum += g.rate.data()[i];
      ++count;
    }
  return count ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

Outcome criterion5(Context& ctx) {
  const RateGrid eq = run(ctx, "c4_fanbeam_tv", tv_grid(GeometryKind::fanbeam));
  const RateGrid rr = run(ctx, "c5_random_rays_tv", tv_grid(GeometryKind::random_rays));
  const double a = grid_mean(eq);
  const double b = grid_mean(rr);
  return {b <= a + 0.05, "mean rate random_rays " + fmt("%.4f", b) + " vs equiangular " + fmt("%.4f", a) +
                             " (allowance 0.05)"};
}

Outcome criterion6(Context&) {
  Rng rng(6);
  int agree = 0;
  int checked = 0;
  double worst_obj = 0.0;
  for (int k = 0; k < 50; ++k) {
    const bool ct = k % 2 == 1;
    const ProblemKind kind = (k / 2) % 2 ? ProblemKind::LP : ProblemKind::P1;
    std::optional<SensingMatrix> a;
    Index n = 0;
    if (ct) {
      const int views = 1 + static_cast<int>(rng.below(4));
      a = build_fanbeam(8, views);
      n = a->cols();
    } else {
      n = 30 + static_cast<Index>(rng.below(31));
      const Index m = n / 4 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - n / 4)));
      a = build_gaussian(m, n, rng());
    }
    const Index s = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(std::max<Index>(1, a->rows() / 2))));
    const Vector x = kind == ProblemKind::LP ? gen_spikes(n, s, rng()) : gen_signedspikes(n, s, rng());
    const Vector b = apply(*a, x);
    SolverConfig cfg;
    cfg.kind = kind;
    cfg.lambda = 1e-2;
    cfg.max_iter = 1000000;
    cfg.feas_tol = 1e-12;
    const double eps = default_epsilon(kind);
    const Solution cp = solve_cp(cfg, *a, b);
    const Solution lp = lp_oracle(kind, *a, b);
    const bool dc = check_recovery(cp.x, x, eps).success;
    const bool dl = check_recovery(lp.x, x, eps).success;
    if (dc == dl) {
      ++agree;
      const double oc = cp.x.lpNorm<1>();
      const double ol = lp.x.lpNorm<1>();
      worst_obj = std::max(worst_obj, std::abs(oc - ol) / std::max(ol, 1e-300));
      ++checked;
    }
    if (n > 60) return {false, "instance exceeds N = 60"};
  }
  return {agree >= 49 && worst_obj <= 1e-5, std::to_string(agree) + "/50 decisions agree; max relative objective gap " +
                                                fmt("%.3g", worst_obj) + " (tol 1e-5)"};
}

// dist^2(g, cone of the subdifferential) minimised over the scale t >= 0.
// Off-support terms are (|g| - t)_+^2, or (g - t)_+^2 when one-sided.
double polar_distance_sq(const std::vector<double>& on, std::vector<double> off) {
  std::sort(off.begin(), off.end(), std::greater<>());
  double on_sum = 0.0;
  double on_sq = 0.0;
  for (double v : on) {
    on_sum += v;
    on_sq += v * v;
  }
  const auto s = static_cast<double>(on.size());
  auto value = [&](double t) {
    double h = on_sq - 2.0 * t * on_sum + s * t * t;
    for (double v : off) {
      if (v <= t) break;
      h += (v - t) * (v - t);
    }
    return h;
  };
  // Stationary point on each segment where exactly k off terms are active.
  double best = value(0.0);
  double top = 0.0;
  for (std::size_t k = 0; k <= off.size(); ++k) {
    if (k > 0) top += off[k - 1];
    const double t = (on_sum + top) / (s + static_cast<double>(k));
    const double hi = k == 0 ? std::numeric_limits<double>::infinity() : off[k - 1];
    const double lo = k < off.size() ? std::max(off[k], 0.0) : 0.0;
    if (t >= lo && t <= hi) best = std::min(best, value(t));
  }
  return best;
}

double mc_statistical_dimension(double beta, bool one_sided, Index n, int draws, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const auto s = static_cast<Index>(std::lround(beta * static_cast<double>(n)));
  double total = 0.0;
  std::vector<double> on(static_cast<std::size_t>(s));
  std::vector<double> off(static_cast<std::size_t>(n - s));
  for (int d = 0; d < draws; ++d) {
    for (auto& v : on) v = normal(rng);
    for (auto& v : off) v = one_sided ? normal(rng) : std::abs(normal(rng));
    total += polar_distance_sq(on, off);
  }
  return total / draws / static_cast<double>(n);
}

Outcome criterion7(Context& ctx) {
  const Index n = 400;
  double worst = 0.0;
  double worst_nn = 0.0;
  for (double beta : {0.05, 0.1, 0.3, 0.5, 0.9}) {
    const double mc = mc_statistical_dimension(beta, false, n, 4000, 70 + static_cast<std::uint64_t>(beta * 100));
    worst = std::max(worst, std::abs(mc - psi_l1(beta)) / mc);
    const double mcn = mc_statistical_dimension(beta, true, n, 4000, 170 + static_cast<std::uint64_t>(beta * 100));
    worst_nn = std::max(worst_nn, std::abs(mcn - psi_l1_nonneg(beta)) / mcn);
  }

  // Gate for the one-sided curve: empirical Gaussian LP 50% crossing at N=200.
  GridOverrides ov;
  ov.n_pixels = 200;
  ov.realizations = 20;
  ov.sparsity_levels = std::vector<double>{0.1, 0.3, 0.5};
  ov.sampling_levels = range(20, 190, 5);
  const GridSpec spec = plan_grid(DiagramKind::ALMT, GeometryKind::gaussian, ImageClass::spikes, ProblemKind::LP,
                                  16, ov);
  const RateGrid g = run(ctx, "c7_gaussian_lp_gate", spec);
  double gate = 0.0;
  std::string gate_detail;
  Vector pos(static_cast<Index>(g.sampling_coords.size()));
  for (Index j = 0; j < pos.size(); ++j) pos[j] = g.sampling_coords[static_cast<std::size_t>(j)];
  for (Index i = 0; i < g.rate.rows(); ++i) {
    const auto c = line_crossing(pos, g.rate.row(i).transpose(), 0.5);
    const double beta = g.sparsity_coords[static_cast<std::size_t>(i)];
    const double d = c ? std::abs(*c - psi_l1_nonneg(beta)) : std::numeric_limits<double>::infinity();
    gate = std::max(gate, d);
    gate_detail += " " + fmt("%.3f", c ? *c : std::nan(""));
  }
  const bool gate_pass = gate <= 0.03;
  return {worst <= 0.01 && (gate_pass || worst_nn <= 0.01),
          "psi_l1 max relative MC error " + fmt("%.4f", worst) + " (tol 0.01); psi_nonneg MC error " +
              fmt("%.4f", worst_nn) + "; LP gate crossings" + gate_detail + " max deviation " + fmt("%.4f", gate) +
              (gate_pass ? " -> theoretical" : " -> downgraded to imported")};
}

Outcome criterion8(Context& ctx) {
  GridOverrides ov;
  ov.realizations = 20;
  ov.sparsity_levels = std::vector<double>{1.0};
  ov.sampling_levels = std::vector<double>{7, 8, 10, 13, 16};
  const GridSpec spec =
      plan_grid(DiagramKind::ALMT, GeometryKind::fanbeam, ImageClass::signedspikes, ProblemKind::P1, 16, ov);
  const Index n = spec.image_size();
  const auto min_views = static_cast<int>(std::ceil(static_cast<double>(n) / 32.0));
  const RateGrid g = run(ctx, "c8_full_sampling", spec);
  std::string detail = "N=" + std::to_string(n) + ", ceil(N/32)=" + std::to_string(min_views) + ", recovered:";
  bool pass = min_views <= 7;
  for (Index j = 0; j < g.successes.cols(); ++j) {
    detail += " " + std::to_string(g.successes(0, j)) + "/" + std::to_string(g.counts(0, j));
    pass = pass && g.successes(0, j) == 20 && g.counts(0, j) == 20;
  }
  return {pass, detail + " at views 7,8,10,13,16"};
}

double round_sig(double v, int digits) {
  const double scale = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(v)))));
  return std::round(v * scale) / scale;
}

Outcome criterion9(Context&) {
  const double n = 823592;
  const double r = 2048;
  bool pass = true;
  std::string detail;
  const std::pair<double, double> rows[] = {{71.7, 0.17829}, {185.8, 0.46198}};
  for (const auto& [views, frac] : rows) {
    const double f = views_to_sampling(views, n, r);
    const double v = sampling_to_views(frac, n, r);
    pass = pass && round_sig(f, 4) == round_sig(frac, 4) && round_sig(v, 4) == round_sig(views, 4);
    detail += fmt("%.1f", views) + " views -> " + fmt("%.5f", f) + ", " + fmt("%.5f", frac) + " -> " +
              fmt("%.2f", v) + " views; ";
  }
  const Curve almt = almt_curve(CurveKind::theoretical_l1, range(0.005, 0.995, 0.005));
  const Curve dt = convert_coords(almt, Coords::DT);
  double worst = 0.0;
  for (double frac : {0.01, 0.02, 0.05, 0.1, 0.2, 0.4}) {
    PredictionInput in;
    in.s = frac * n;
    in.n = n;
    in.rays_per_view = r;
    in.curve = almt;
    const double va = predict_views_almt(in);
    in.curve = dt;
    const double vd = predict_views_dt(in);
    worst = std::max(worst, std::abs(va - vd));
  }
  const double tol = 1e-3 * n / r;
  pass = pass && worst <= tol;
  return {pass, detail + "max |views_ALMT - views_DT| = " + fmt("%.3g", worst) + " (tol " + fmt("%.4f", tol) + ")"};
}

std::string normalized_results(const std::vector<CellResult>& results) {
  std::vector<std::string> rows;
  for (CellResult c : results) {
    c.wall_time_s = 0.0;
    rows.push_back(format_result_row(DiagramKind::ALMT, c));
  }
  std::sort(rows.begin(), rows.end());
  std::string out = results_csv_header() + "\n";
  for (const auto& row : rows) out += row + "\n";
  return out;
}

Outcome criterion10(Context& ctx) {
  GridOverrides ov;
  ov.realizations = 5;
  ov.sparsity_levels = std::vector<double>{0.1, 0.2, 0.3};
  ov.sampling_levels = std::vector<double>{2, 4, 6};
  const GridSpec spec =
      plan_grid(DiagramKind::ALMT, GeometryKind::fanbeam, ImageClass::signedspikes, ProblemKind::P1, 16, ov);
  auto run_with = [&](const std::string& name, int workers, std::optional<std::size_t> budget, bool fresh) {
    const fs::path dir = ctx.workdir / name;
    if (fresh) fs::remove_all(dir);
    RunOptions opts;
    opts.workers = workers;
    opts.checkpoint_dir = dir;
    opts.task_budget = budget;
    return run_diagram(spec, opts);
  };
  const std::string one = normalized_results(run_with("c10_w1", 1, std::nullopt, true).results);
  const std::string eight = normalized_results(run_with("c10_w8", 8, std::nullopt, true).results);

  const std::size_t total = spec.planned_problems();
  const DiagramResult half = run_with("c10_resume", 8, total / 2 + 1, true);
  // A killed writer can leave a torn final line.
  {
    std::ofstream out(ctx.workdir / "c10_resume" / "checkpoint.csv", std::ios::app);
    out << "ALMT,2,1,3,";
  }
  const DiagramResult resumed = run_with("c10_resume", 8, std::nullopt, false);
  const std::string res = normalized_results(resumed.results);
  const bool pass = !half.complete && resumed.complete && one == eight && one == res &&
                    resumed.tasks_computed + half.tasks_computed == total;
  std::ofstream(ctx.workdir / "c10_normalized_results.csv") << one;
  return {pass, std::to_string(total) + " tasks; 1 vs 8 workers " + (one == eight ? "identical" : "differ") +
                    "; interrupted after " + std::to_string(half.tasks_computed) + " and resumed with " +
                    std::to_string(resumed.tasks_computed) + ": " + (one == res ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale acceptance criteria"};
  std::vector<int> only;
  std::string workdir = (fs::temp_directory_path() / "phasect_acceptance").string();
  int workers = 1;
  bool strict = false;
  app.add_option("criteria", only, "Criteria to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--workdir", workdir, "Directory for diagram checkpoints and results");
  app.add_option("--workers", workers, "Worker threads for diagram runs")->check(CLI::PositiveNumber);
  app.add_flag("--strict", strict, "Exit 1 when any criterion fails");
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.workdir = workdir;
  ctx.workers = workers;
  fs::create_directories(ctx.workdir);

  const std::vector<std::function<Outcome(Context&)>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9, criterion10};
  std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (int k = 1; k <= 10; ++k) {
    if (!selected.empty() && !selected.count(k)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(k - 1)](ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s criterion %d: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", k, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return strict && failures > 0 ? 1 : 0;
}
