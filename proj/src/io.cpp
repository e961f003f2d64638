#include "phasect/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "phasect/error.hpp"

namespace phasect {

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

nlohmann::json geometry_json(const SensingMatrix& a) {
  const Geometry& g = a.geometry();
  return {{"geometry", to_string(g.kind)}, {"n_side", g.n_side},   {"n_views", g.n_views},
          {"offset_deg", g.offset_deg},     {"seed", g.seed},       {"m", a.rows()},
          {"n", a.cols()},                  {"source_radius", g.source_radius},
          {"view_angles_deg", g.view_angles_deg}, {"id", a.id()}};
}

void write_matrix_market(const fs::path& path, const SensingMatrix& a) {
  std::ostringstream os;
  char buf[96];
  if (a.is_sparse()) {
    const SparseMatrix& s = a.sparse();
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << s.rows() << ' ' << s.cols() << ' ' << s.nonZeros() << '\n';
    for (Index r = 0; r < s.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(s, r); it; ++it) {
        std::snprintf(buf, sizeof buf, "%lld %lld %.17g\n", static_cast<long long>(it.row() + 1),
                      static_cast<long long>(it.col() + 1), it.value());
        os << buf;
      }
    }
  } else {
    const Matrix& d = a.dense();
    os << "%%MatrixMarket matrix array real general\n";
    os << d.rows() << ' ' << d.cols() << '\n';
    for (Index c = 0; c < d.cols(); ++c) {
      for (Index r = 0; r < d.rows(); ++r) {
        std::snprintf(buf, sizeof buf, "%.17g\n", d(r, c));
        os << buf;
      }
    }
  }
  write_text_atomic(path, os.str());
  write_json(sidecar_path(path), geometry_json(a));
}

SensingMatrix read_matrix_market(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  if (header.rfind("%%MatrixMarket matrix", 0) != 0) throw IoError("not a Matrix Market file: " + path.string());
  const bool coordinate = header.find("coordinate") != std::string::npos;
  std::string line;
  while (std::getline(in, line) && !line.empty() && line[0] == '%') {
  }
  std::istringstream dims(line);

  Geometry g;
  if (fs::exists(sidecar_path(path))) {
    const auto j = read_json(sidecar_path(path));
    g.kind = parse_geometry_kind(j.value("geometry", "gaussian"));
    g.n_side = j.value("n_side", 0);
    g.n_views = j.value("n_views", 0);
    g.offset_deg = j.value("offset_deg", 0.0);
    g.seed = j.value("seed", std::uint64_t{0});
    g.source_radius = j.value("source_radius", 0.0);
    g.view_angles_deg = j.value("view_angles_deg", std::vector<double>{});
  }

  long long rows = 0, cols = 0;
  if (coordinate) {
    long long nnz = 0;
    if (!(dims >> rows >> cols >> nnz)) throw IoError("bad Matrix Market size line");
    std::vector<Eigen::Triplet<double, Index>> trips;
    trips.reserve(static_cast<std::size_t>(nnz));
    for (long long k = 0; k < nnz; ++k) {
      long long r, c;
      double v;
      if (!(in >> r >> c >> v)) throw IoError("truncated Matrix Market file: " + path.string());
      trips.emplace_back(static_cast<Index>(r - 1), static_cast<Index>(c - 1), v);
    }
    SparseMatrix s(rows, cols);
    s.setFromTriplets(trips.begin(), trips.end());
    return SensingMatrix(std::move(s), g);
  }
  if (!(dims >> rows >> cols)) throw IoError("bad Matrix Market size line");
  Matrix d(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r)
      if (!(in >> d(r, c))) throw IoError("truncated Matrix Market file: " + path.string());
  return SensingMatrix(std::move(d), g);
}

void write_vector_csv(const fs::path& path, const Eigen::Ref<const Vector>& v) {
  std::string text;
  char buf[40];
  for (Index k = 0; k < v.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v(k));
    text += buf;
  }
  write_text_atomic(path, text);
}

Vector read_vector_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> vals;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str()) throw IoError("bad value '" + line + "' in " + path.string());
    vals.push_back(v);
  }
  return Eigen::Map<Vector>(vals.data(), static_cast<Index>(vals.size()));
}

void write_pgm(const fs::path& path, const Eigen::Ref<const Matrix>& values, double lo, double hi) {
  if (!(hi > lo)) throw InvalidArgument("write_pgm: need hi > lo");
  std::string text = "P5\n" + std::to_string(values.cols()) + " " + std::to_string(values.rows()) + "\n255\n";
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) {
      const double v = values(r, c);
      double t = std::isfinite(v) ? (v - lo) / (hi - lo) : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      text += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t)));
    }
  }
  write_text_atomic(path, text);
}

Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic> read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || w <= 0 || h <= 0) throw IoError("unsupported PGM: " + path.string());
  in.get();
  Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic> img(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int ch = in.get();
      if (ch == EOF) throw IoError("truncated PGM: " + path.string());
      img(r, c) = static_cast<unsigned char>(ch);
    }
  return img;
}

nlohmann::json grid_spec_to_json(const GridSpec& spec) {
  const SolverConfig& c = spec.solver.cp;
  return {{"kind", to_string(spec.kind)},
          {"geometry", to_string(spec.geometry)},
          {"n_side", spec.n_side},
          {"n_pixels", spec.n_pixels},
          {"image_class", to_string(spec.image_class)},
          {"problem", to_string(spec.problem)},
          {"sampling_levels", spec.sampling_levels},
          {"sparsity_levels", spec.sparsity_levels},
          {"realizations", spec.realizations},
          {"master_seed", spec.master_seed},
          {"offset_deg", spec.offset_deg},
          {"solver",
           {{"lambda", c.lambda},
            {"max_iter", c.max_iter},
            {"feas_tol", c.feas_tol},
            {"log_every", c.log_every},
            {"norm_tol", c.norm_tol},
            {"prefer_lp_oracle", spec.solver.prefer_lp_oracle},
            {"oracle_max_variables", spec.solver.oracle.max_variables},
            {"epsilon", spec.solver.epsilon}}},
          {"hash", spec.hash()}};
}

GridSpec grid_spec_from_json(const nlohmann::json& j) {
  try {
    GridSpec spec;
    spec.kind = parse_diagram_kind(j.at("kind").get<std::string>());
    spec.geometry = parse_geometry_kind(j.at("geometry").get<std::string>());
    spec.n_side = j.at("n_side").get<int>();
    spec.n_pixels = j.value("n_pixels", Index{0});
    spec.image_class = parse_image_class(j.at("image_class").get<std::string>());
    spec.problem = parse_problem_kind(j.at("problem").get<std::string>());
    spec.sampling_levels = j.at("sampling_levels").get<std::vector<double>>();
    spec.sparsity_levels = j.at("sparsity_levels").get<std::vector<double>>();
    spec.realizations = j.at("realizations").get<int>();
    spec.master_seed = j.at("master_seed").get<std::uint64_t>();
    spec.offset_deg = j.value("offset_deg", 20.0);
    const auto& s = j.at("solver");
    spec.solver.cp.kind = spec.problem;
    spec.solver.cp.lambda = s.at("lambda").get<double>();
    spec.solver.cp.max_iter = s.at("max_iter").get<int>();
    spec.solver.cp.feas_tol = s.at("feas_tol").get<double>();
    spec.solver.cp.log_every = s.value("log_every", 100);
    spec.solver.cp.norm_tol = s.value("norm_tol", 1e-8);
    spec.solver.prefer_lp_oracle = s.value("prefer_lp_oracle", true);
    spec.solver.oracle.max_variables = s.value("oracle_max_variables", Index{2000});
    spec.solver.epsilon = s.value("epsilon", 0.0);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("invalid grid specification: ") + e.what());
  }
}

}  // namespace phasect
