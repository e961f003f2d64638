#include "phasect/phasediagram.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "phasect/error.hpp"
#include "phasect/rng.hpp"

namespace phasect {

const char* to_string(DiagramKind k) { return k == DiagramKind::DT ? "dt" : "almt"; }

DiagramKind parse_diagram_kind(const std::string& text) {
  if (text == "dt" || text == "DT") return DiagramKind::DT;
  if (text == "almt" || text == "ALMT") return DiagramKind::ALMT;
  throw InvalidArgument("unknown diagram kind: " + text);
}

const char* to_string(CellStatus s) {
  switch (s) {
    case CellStatus::ok: return "ok";
    case CellStatus::infeasible: return "infeasible";
    case CellStatus::error: return "error";
  }
  return "?";
}

namespace {

Index round_half_up(double v) { return static_cast<Index>(std::floor(v + 0.5)); }

bool uses_views(GeometryKind g) {
  return g == GeometryKind::fanbeam || g == GeometryKind::fanbeam_rand;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void check_levels(const std::vector<double>& levels, const char* what, bool fractions) {
  if (levels.empty()) throw InvalidArgument(std::string("empty ") + what + " levels");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (k > 0 && !(levels[k] > levels[k - 1]))
      throw InvalidArgument(std::string(what) + " levels must be strictly ascending");
    if (fractions ? !(levels[k] > 0.0 && levels[k] <= 1.0) : !(levels[k] >= 1.0))
      throw InvalidArgument(std::string(what) + " level out of range");
  }
}

}  // namespace

Index GridSpec::image_size() const {
  const bool spikes = image_class == ImageClass::signedspikes || image_class == ImageClass::spikes;
  if (geometry == GeometryKind::gaussian && spikes && n_pixels > 0) return n_pixels;
  return DiskMask(n_side).n_pixels();
}

Index GridSpec::measurements(std::size_t j) const {
  const double level = sampling_levels.at(j);
  if (uses_views(geometry)) return static_cast<Index>(level) * 2 * n_side;
  return round_half_up(level);
}

Index GridSpec::sparsity(std::size_t i, std::size_t j) const {
  const double frac = sparsity_levels.at(i);
  if (kind == DiagramKind::ALMT)
    return std::clamp<Index>(round_half_up(frac * static_cast<double>(image_size())), 1, image_size());
  return std::max<Index>(1, round_half_up(frac * static_cast<double>(measurements(j))));
}

std::size_t GridSpec::planned_problems() const {
  return sparsity_levels.size() * sampling_levels.size() * static_cast<std::size_t>(realizations);
}

std::string GridSpec::hash() const {
  std::ostringstream os;
  os.precision(17);
  os << to_string(kind) << '|' << to_string(geometry) << '|' << n_side << '|' << image_size() << '|'
     << to_string(image_class) << '|' << to_string(problem) << '|' << realizations << '|'
     << master_seed << '|' << offset_deg << '|';
  for (double v : sampling_levels) os << v << ',';
  os << '|';
  for (double v : sparsity_levels) os << v << ',';
  const auto& c = solver.cp;
  os << '|' << c.lambda << ',' << c.max_iter << ',' << c.feas_tol << ',' << c.norm_tol << ','
     << solver.prefer_lp_oracle << ',' << solver.oracle.max_variables << ',' << solver.epsilon;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
  return buf;
}

GridSpec plan_grid(DiagramKind kind, GeometryKind geometry, ImageClass image_class,
                   ProblemKind problem, int n_side, const GridOverrides& overrides) {
  if (n_side < 2) throw InvalidArgument("n_side must be >= 2");
  if (problem == ProblemKind::LP && image_class == ImageClass::signedspikes)
    throw InvalidArgument("LP needs a nonnegative image class");
  GridSpec spec;
  spec.kind = kind;
  spec.geometry = geometry;
  spec.n_side = n_side;
  spec.image_class = image_class;
  spec.problem = problem;
  for (int v = 1; v <= 26; ++v)
    spec.sampling_levels.push_back(uses_views(geometry) ? v : static_cast<double>(v) * 2 * n_side);
  if (kind == DiagramKind::ALMT) {
    for (int k = 1; k <= 39; ++k) spec.sparsity_levels.push_back(0.025 * k);
  } else {
    for (int k = 1; k <= 32; ++k) spec.sparsity_levels.push_back(k / 32.0);
  }
  spec.realizations = 100;
  spec.solver.cp.kind = problem;
  spec.solver.cp.max_iter = 20000;
  spec.solver.cp.feas_tol = 1e-8;
  spec.solver.cp.lambda = 1e-4;

  if (overrides.sampling_levels) spec.sampling_levels = *overrides.sampling_levels;
  if (overrides.sparsity_levels) spec.sparsity_levels = *overrides.sparsity_levels;
  if (overrides.realizations) spec.realizations = *overrides.realizations;
  if (overrides.master_seed) spec.master_seed = *overrides.master_seed;
  if (overrides.n_pixels) spec.n_pixels = *overrides.n_pixels;

  check_levels(spec.sampling_levels, "sampling", false);
  check_levels(spec.sparsity_levels, "sparsity", true);
  if (spec.realizations < 1) throw InvalidArgument("realizations must be >= 1");
  return spec;
}

std::uint64_t cell_seed(const GridSpec& spec, std::size_t i, std::size_t j, int r) {
  const std::uint64_t tag = spec.kind == DiagramKind::DT ? 0x4454ULL : 0x414c4d54ULL;
  return mix_seed({spec.master_seed, tag, i, j, static_cast<std::uint64_t>(r)});
}

std::uint64_t matrix_seed(const GridSpec& spec, std::size_t j) {
  return mix_seed({spec.master_seed, 0x6d6174726978ULL, j});
}

std::shared_ptr<const SensingMatrix> MatrixCache::ct_matrix(std::size_t j) {
  std::lock_guard lock(mutex_);
  auto& slot = cache_[j];
  if (!slot) {
    const int views = static_cast<int>(spec_.sampling_levels.at(j));
    switch (spec_.geometry) {
      case GeometryKind::fanbeam:
        slot = std::make_shared<SensingMatrix>(build_fanbeam(spec_.n_side, views, spec_.offset_deg));
        break;
      case GeometryKind::fanbeam_rand:
        slot = std::make_shared<SensingMatrix>(
            build_fanbeam_random(spec_.n_side, views, matrix_seed(spec_, j)));
        break;
      case GeometryKind::random_rays:
        slot = std::make_shared<SensingMatrix>(
            build_random_rays(spec_.n_side, spec_.measurements(j), matrix_seed(spec_, j)));
        break;
      case GeometryKind::gaussian:
        throw InvalidArgument("gaussian matrices are not cached");
    }
  }
  return slot;
}

Vector cell_phantom(const GridSpec& spec, Index s, std::uint64_t seed) {
  switch (spec.image_class) {
    case ImageClass::signedspikes: return gen_signedspikes(spec.image_size(), s, seed);
    case ImageClass::spikes: return gen_spikes(spec.image_size(), s, seed);
    case ImageClass::altprojisotv: return gen_altprojisotv(DiskMask(spec.n_side), s, seed);
    case ImageClass::grains: return gen_grains_with_support(DiskMask(spec.n_side), s, seed);
  }
  throw InvalidArgument("unknown image class");
}

CellResult run_cell(const GridSpec& spec, std::size_t i, std::size_t j, int r, MatrixCache& cache) {
  if (i >= spec.sparsity_levels.size() || j >= spec.sampling_levels.size() || r < 0 ||
      r >= spec.realizations)
    throw InvalidArgument("run_cell: indices outside the grid");
  const auto start = std::chrono::steady_clock::now();
  CellResult res;
  res.i = static_cast<int>(i);
  res.j = static_cast<int>(j);
  res.r = r;
  res.seed = cell_seed(spec, i, j, r);
  res.s = spec.sparsity(i, j);
  res.m = spec.measurements(j);
  res.n_views = uses_views(spec.geometry) ? static_cast<int>(spec.sampling_levels[j]) : 0;
  const Index n = spec.image_size();

  if (res.s > n) {
    res.status = CellStatus::infeasible;
    res.relative_error = std::nan("");
    res.message = "sparsity exceeds image size";
    return res;
  }

  try {
    const Vector x0 = cell_phantom(spec, res.s, res.seed);
    std::shared_ptr<const SensingMatrix> a;
    if (spec.geometry == GeometryKind::gaussian)
      a = std::make_shared<SensingMatrix>(build_gaussian(res.m, n, mix_seed({res.seed, 0x41ULL})));
    else
      a = cache.ct_matrix(j);
    const Vector b = apply(*a, x0);

    const Index lp_vars = spec.problem == ProblemKind::P1 ? 2 * n : n;
    Solution sol;
    if (spec.problem != ProblemKind::TV && spec.solver.prefer_lp_oracle &&
        lp_vars <= spec.solver.oracle.max_variables) {
      sol = lp_oracle(spec.problem, *a, b, spec.solver.oracle);
    } else {
      SolverConfig cfg = spec.solver.cp;
      cfg.kind = spec.problem;
      const DiskMask mask(spec.n_side);
      sol = solve_cp(cfg, *a, b, spec.problem == ProblemKind::TV ? &mask : nullptr);
    }
    const double eps = spec.solver.epsilon > 0.0 ? spec.solver.epsilon : default_epsilon(spec.problem);
    const RecoveryResult rec = check_recovery(sol.x, x0, eps);
    res.relative_error = rec.relative_error;
    res.success = rec.success;
    res.iterations = sol.iterations_run;
  } catch (const std::exception& e) {
    res.status = CellStatus::error;
    res.success = false;
    res.relative_error = std::numeric_limits<double>::infinity();
    res.message = e.what();
  }
  res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

CellResult run_cell(const GridSpec& spec, std::size_t i, std::size_t j, int r) {
  MatrixCache cache(spec);
  return run_cell(spec, i, j, r, cache);
}

std::string results_csv_header() {
  return "diagram_kind,i,j,r,s,m,n_views,seed,relative_error,success,iterations,wall_time_s,status,"
         "message";
}

std::string format_result_row(DiagramKind kind, const CellResult& r) {
  std::string msg = r.message;
  std::replace_if(msg.begin(), msg.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ';');
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%lld,%lld,%d,%llu,%.17g,%d,%d,%.6f,%s,", to_string(kind),
                r.i, r.j, r.r, static_cast<long long>(r.s), static_cast<long long>(r.m), r.n_views,
                static_cast<unsigned long long>(r.seed), r.relative_error, r.success ? 1 : 0,
                r.iterations, r.wall_time_s, to_string(r.status));
  return buf + msg;
}

CellResult parse_result_row(const std::string& line) {
  std::vector<std::string> f;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) f.push_back(field);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  if (f.size() < 13) throw IoError("malformed result row: " + line);
  CellResult r;
  try {
    r.i = std::stoi(f[1]);
    r.j = std::stoi(f[2]);
    r.r = std::stoi(f[3]);
    r.s = std::stoll(f[4]);
    r.m = std::stoll(f[5]);
    r.n_views = std::stoi(f[6]);
    r.seed = std::stoull(f[7]);
    r.relative_error = std::strtod(f[8].c_str(), nullptr);
    r.success = f[9] == "1";
    r.iterations = std::stoi(f[10]);
    r.wall_time_s = std::stod(f[11]);
  } catch (const std::exception&) {
    throw IoError("malformed result row: " + line);
  }
  if (f[12] == "ok") r.status = CellStatus::ok;
  else if (f[12] == "infeasible") r.status = CellStatus::infeasible;
  else if (f[12] == "error") r.status = CellStatus::error;
  else throw IoError("unknown status in result row: " + line);
  if (f.size() > 13) r.message = f[13];
  return r;
}

namespace {

bool by_index(const CellResult& a, const CellResult& b) {
  return std::tie(a.i, a.j, a.r) < std::tie(b.i, b.j, b.r);
}

}  // namespace

void write_results_csv(const std::filesystem::path& path, DiagramKind kind,
                       std::vector<CellResult> results) {
  std::sort(results.begin(), results.end(), by_index);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << results_csv_header() << '\n';
  for (const auto& r : results) out << format_result_row(kind, r) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<CellResult> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<CellResult> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("diagram_kind", 0) == 0) continue;
    out.push_back(parse_result_row(line));
  }
  return out;
}

void write_rates_csv(const std::filesystem::path& path, const RateGrid& grid) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "i,j,rate,count\n";
  char buf[128];
  for (Index i = 0; i < grid.rate.rows(); ++i) {
    for (Index j = 0; j < grid.rate.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%lld,%lld,%.17g,%d\n", static_cast<long long>(i),
                    static_cast<long long>(j), grid.rate(i, j), grid.counts(i, j));
      out << buf;
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

RateGrid success_rates(const GridSpec& spec, const std::vector<CellResult>& results) {
  const auto ni = static_cast<Index>(spec.sparsity_levels.size());
  const auto nj = static_cast<Index>(spec.sampling_levels.size());
  RateGrid grid;
  grid.kind = spec.kind;
  grid.sparsity_coords = spec.sparsity_levels;
  const double n = static_cast<double>(spec.image_size());
  for (std::size_t j = 0; j < spec.sampling_levels.size(); ++j)
    grid.sampling_coords.push_back(static_cast<double>(spec.measurements(j)) / n);
  grid.successes = Eigen::MatrixXi::Zero(ni, nj);
  grid.counts = Eigen::MatrixXi::Zero(ni, nj);
  Eigen::MatrixXi infeasible = Eigen::MatrixXi::Zero(ni, nj);

  std::set<std::tuple<int, int, int>> seen;
  for (const auto& r : results) {
    if (r.i < 0 || r.i >= ni || r.j < 0 || r.j >= nj || r.r < 0 || r.r >= spec.realizations)
      throw InvalidArgument("result outside the grid");
    if (!seen.insert({r.i, r.j, r.r}).second) continue;
    grid.counts(r.i, r.j) += 1;
    if (r.success) grid.successes(r.i, r.j) += 1;
    if (r.status == CellStatus::infeasible) infeasible(r.i, r.j) += 1;
  }

  std::ostringstream gaps;
  int missing = 0;
  grid.rate.resize(ni, nj);
  for (Index i = 0; i < ni; ++i) {
    for (Index j = 0; j < nj; ++j) {
      if (grid.counts(i, j) != spec.realizations) {
        if (missing++ < 20) gaps << " (" << i << "," << j << "):" << grid.counts(i, j);
        continue;
      }
      grid.rate(i, j) = infeasible(i, j) > 0
                            ? std::nan("")
                            : static_cast<double>(grid.successes(i, j)) / spec.realizations;
    }
  }
  if (missing > 0)
    throw InvalidArgument("success_rates: " + std::to_string(missing) +
                          " incomplete cells (cell:count)" + gaps.str());
  return grid;
}

DiagramResult run_diagram(const GridSpec& spec, const RunOptions& options) {
  namespace fs = std::filesystem;
  if (options.checkpoint_dir.empty()) throw InvalidArgument("run_diagram: checkpoint_dir required");
  fs::create_directories(options.checkpoint_dir);
  const fs::path checkpoint = options.checkpoint_dir / "checkpoint.csv";
  const std::string hash_line = "# spec_hash=" + spec.hash();

  DiagramResult out;
  std::set<std::tuple<int, int, int>> done;
  if (fs::exists(checkpoint)) {
    std::ifstream in(checkpoint);
    std::string first;
    std::getline(in, first);
    if (first != hash_line)
      throw IoError("stale checkpoint " + checkpoint.string() + ": grid specification changed");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.rfind("diagram_kind", 0) == 0) continue;
      CellResult r;
      try {
        r = parse_result_row(line);
      } catch (const IoError&) {
        continue;  // torn final line from an interrupted append
      }
      if (done.insert({r.i, r.j, r.r}).second) out.results.push_back(r);
    }
  } else {
    std::ofstream init(checkpoint);
    init << hash_line << '\n' << results_csv_header() << '\n';
    if (!init) throw IoError("cannot create checkpoint " + checkpoint.string());
  }

  std::vector<std::tuple<int, int, int>> pending;
  for (int i = 0; i < static_cast<int>(spec.sparsity_levels.size()); ++i)
    for (int j = 0; j < static_cast<int>(spec.sampling_levels.size()); ++j)
      for (int r = 0; r < spec.realizations; ++r)
        if (!done.count({i, j, r})) pending.emplace_back(i, j, r);
  if (options.task_budget && *options.task_budget < pending.size()) {
    pending.resize(*options.task_budget);
    out.complete = false;
  }

  std::ofstream log(checkpoint, std::ios::app);
  if (!log) throw IoError("cannot append to checkpoint " + checkpoint.string());
  MatrixCache cache(spec);
  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pending.size()) return;
      const auto [i, j, r] = pending[k];
      CellResult res = run_cell(spec, static_cast<std::size_t>(i), static_cast<std::size_t>(j), r, cache);
      std::lock_guard lock(mutex);
      log << format_result_row(spec.kind, res) << '\n';
      log.flush();
      if (!log && !failure) failure = std::make_exception_ptr(IoError("checkpoint append failed"));
      out.results.push_back(std::move(res));
      ++out.tasks_computed;
    }
  };

  const int workers = std::max(1, options.workers);
  if (workers == 1 || pending.size() <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::sort(out.results.begin(), out.results.end(), by_index);
  if (out.complete) out.rates = success_rates(spec, out.results);
  return out;
}

std::vector<RecoveryRow> recovery_curve(const DiskMask& mask, const Vector& phantom,
                                        GeometryKind geometry, const std::vector<int>& views,
                                        const SolverConfig& config, std::uint64_t seed,
                                        double offset_deg) {
  if (views.empty()) throw InvalidArgument("recovery_curve: empty view list");
  if (phantom.size() != mask.n_pixels()) throw DimensionMismatch("recovery_curve: phantom size");
  const int n_side = mask.n_side();
  std::vector<RecoveryRow> rows;
  for (int v : views) {
    RecoveryRow row;
    row.views = v;
    try {
      const Index m = static_cast<Index>(v) * 2 * n_side;
      const std::uint64_t mseed = mix_seed({seed, static_cast<std::uint64_t>(v)});
      SensingMatrix a = [&] {
        switch (geometry) {
          case GeometryKind::fanbeam: return build_fanbeam(n_side, v, offset_deg);
          case GeometryKind::fanbeam_rand: return build_fanbeam_random(n_side, v, mseed);
          case GeometryKind::random_rays: return build_random_rays(n_side, m, mseed);
          case GeometryKind::gaussian: return build_gaussian(m, mask.n_pixels(), mseed);
        }
        throw InvalidArgument("unknown geometry");
      }();
      const Vector b = apply(a, phantom);
      const Solution sol = solve_cp(config, a, b, &mask, &phantom);
      row.image_rmse = (sol.x - phantom).norm() / std::sqrt(static_cast<double>(phantom.size()));
      row.data_rmse = sol.data_residual / std::sqrt(static_cast<double>(a.rows()));
      row.iterations = sol.iterations_run;
    } catch (const std::exception& e) {
      row.error = e.what();
      row.image_rmse = row.data_rmse = std::nan("");
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace phasect
