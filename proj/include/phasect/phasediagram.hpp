#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "phasect/phantoms.hpp"
#include "phasect/sensing.hpp"
#include "phasect/solvers.hpp"
#include "phasect/theory.hpp"
#include "phasect/types.hpp"

namespace phasect {

enum class DiagramKind { DT, ALMT };
const char* to_string(DiagramKind k);
DiagramKind parse_diagram_kind(const std::string& text);

/// How cells are solved: the LP oracle for P1/LP within its size bound,
/// Chambolle-Pock otherwise (always for TV).
struct SolverPolicy {
  SolverConfig cp;
  bool prefer_lp_oracle = true;
  LpOracleOptions oracle;
  /// Recovery threshold; <= 0 selects the problem default.
  double epsilon = 0.0;
};

struct GridSpec {
  DiagramKind kind = DiagramKind::ALMT;
  GeometryKind geometry = GeometryKind::fanbeam;
  int n_side = 64;
  /// Image size for Gaussian diagrams with spike classes; 0 means the
  /// disk-mask pixel count for n_side.
  Index n_pixels = 0;
  ImageClass image_class = ImageClass::signedspikes;
  ProblemKind problem = ProblemKind::P1;
  /// View counts for fanbeam / fanbeam_rand, raw m for gaussian / random_rays.
  std::vector<double> sampling_levels;
  /// ALMT: s/N fractions; DT: rho = s/m fractions.
  std::vector<double> sparsity_levels;
  int realizations = 100;
  std::uint64_t master_seed = 1;
  double offset_deg = 20.0;
  SolverPolicy solver;

  Index image_size() const;
  /// Number of measurements at sampling level j.
  Index measurements(std::size_t j) const;
  /// Absolute sparsity of cell (i, j) before the feasibility check.
  Index sparsity(std::size_t i, std::size_t j) const;
  std::size_t planned_problems() const;
  /// Stable digest of every field that affects results.
  std::string hash() const;
};

struct GridOverrides {
  std::optional<std::vector<double>> sampling_levels;
  std::optional<std::vector<double>> sparsity_levels;
  std::optional<int> realizations;
  std::optional<std::uint64_t> master_seed;
  std::optional<Index> n_pixels;
};

/// Defaults: ALMT 39 sparsity levels (0.025 ... 0.975) x 26 view levels;
/// DT 32 rho levels (k/32) x 26 view levels; 100 realizations.
GridSpec plan_grid(DiagramKind kind, GeometryKind geometry, ImageClass image_class,
                   ProblemKind problem, int n_side, const GridOverrides& overrides = {});

enum class CellStatus { ok, infeasible, error };
const char* to_string(CellStatus s);

struct CellResult {
  int i = 0;
  int j = 0;
  int r = 0;
  std::uint64_t seed = 0;
  Index s = 0;
  Index m = 0;
  int n_views = 0;
  double relative_error = 0.0;
  bool success = false;
  int iterations = 0;
  double wall_time_s = 0.0;
  CellStatus status = CellStatus::ok;
  std::string message;
};

/// Builds and caches the fixed CT matrix for each sampling level;
/// Gaussian matrices are drawn fresh per realization.
class MatrixCache {
 public:
  explicit MatrixCache(const GridSpec& spec) : spec_(spec) {}
  std::shared_ptr<const SensingMatrix> ct_matrix(std::size_t j);

 private:
  const GridSpec& spec_;
  std::mutex mutex_;
  std::map<std::size_t, std::shared_ptr<const SensingMatrix>> cache_;
};

std::uint64_t cell_seed(const GridSpec& spec, std::size_t i, std::size_t j, int r);
std::uint64_t matrix_seed(const GridSpec& spec, std::size_t j);

/// Generates the phantom for cell (i, j, r) (no solve).
Vector cell_phantom(const GridSpec& spec, Index s, std::uint64_t seed);

CellResult run_cell(const GridSpec& spec, std::size_t i, std::size_t j, int r);
CellResult run_cell(const GridSpec& spec, std::size_t i, std::size_t j, int r, MatrixCache& cache);

struct RateGrid {
  DiagramKind kind = DiagramKind::ALMT;
  /// Coordinates of sparsity rows (ALMT: s/N, DT: rho) and sampling
  /// columns (m/N for both kinds).
  std::vector<double> sparsity_coords;
  std::vector<double> sampling_coords;
  /// rate(i, j); NaN marks structurally infeasible cells.
  Matrix rate;
  Eigen::MatrixXi successes;
  Eigen::MatrixXi counts;
};

struct DiagramResult {
  std::vector<CellResult> results;
  RateGrid rates;
  std::size_t tasks_computed = 0;
  bool complete = true;
};

struct RunOptions {
  int workers = 1;
  std::filesystem::path checkpoint_dir;
  /// Stop after this many newly computed tasks (simulates an interruption).
  std::optional<std::size_t> task_budget;
};

/// Runs every (cell, realization) task; results are independent of the
/// worker count. Appends to `checkpoint_dir/checkpoint.csv` and skips
/// tasks already recorded there.
DiagramResult run_diagram(const GridSpec& spec, const RunOptions& options);

std::string results_csv_header();
std::string format_result_row(DiagramKind kind, const CellResult& r);
CellResult parse_result_row(const std::string& line);
void write_results_csv(const std::filesystem::path& path, DiagramKind kind,
                       std::vector<CellResult> results);
std::vector<CellResult> read_results_csv(const std::filesystem::path& path);
void write_rates_csv(const std::filesystem::path& path, const RateGrid& grid);

/// Aggregates complete results; throws InvalidArgument listing missing cells.
RateGrid success_rates(const GridSpec& spec, const std::vector<CellResult>& results);

/// Lattice view of a rate grid in diagram coordinates: values(ix, iy) at
/// (x[ix], y[iy]). ALMT: x = s/N, y = m/N. DT: x = delta, y = rho.
struct Lattice {
  Vector x;
  Vector y;
  Matrix values;
};
Lattice to_lattice(const RateGrid& grid);

struct ContourResult {
  Curve main;
  std::vector<Curve> extras;
  bool empty() const { return main.empty(); }
};

/// Marching squares on the lattice with linear edge interpolation. The
/// longest polyline is `main`; other branches are `extras`.
ContourResult extract_contour(const RateGrid& grid, double level);
ContourResult extract_contour(const Lattice& lattice, double level, Coords coords);

/// Crossing of `level` along one grid line (values v at positions pos).
/// With several crossings, the one nearest the band centre is returned.
std::optional<double> line_crossing(const Vector& pos, const Vector& v, double level);

/// Ordinate of the contour along the vertical line at x (nearest the
/// band centre when several branches cross it).
std::optional<double> contour_ordinate_at(const Lattice& lattice, double level, Index ix);

/// Distance between the lo and hi crossings along each line of the
/// transition axis (m/N for ALMT, rho for DT); nullopt where undefined.
std::vector<std::optional<double>> transition_width(const RateGrid& grid, double lo = 0.05,
                                                    double hi = 0.95);

struct RecoveryRow {
  int views = 0;
  double image_rmse = 0.0;
  double data_rmse = 0.0;
  int iterations = 0;
  std::string error;
};

/// Image and data RMSE of the reconstruction versus view count.
std::vector<RecoveryRow> recovery_curve(const DiskMask& mask, const Vector& phantom,
                                        GeometryKind geometry, const std::vector<int>& views,
                                        const SolverConfig& config, std::uint64_t seed = 1,
                                        double offset_deg = 20.0);

}  // namespace phasect
