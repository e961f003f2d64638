#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "phasect/phasediagram.hpp"
#include "phasect/sensing.hpp"
#include "phasect/types.hpp"

namespace phasect {

namespace fs = std::filesystem;

/// Writes `text` to a sibling temporary file and renames it into place.
void write_text_atomic(const fs::path& path, const std::string& text);
void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

/// Path of the JSON sidecar that accompanies `path`.
inline fs::path sidecar_path(const fs::path& path) { return fs::path(path.string() + ".json"); }

nlohmann::json geometry_json(const SensingMatrix& a);

/// Coordinate format for sparse storage, array format for dense storage,
/// plus a geometry sidecar.
void write_matrix_market(const fs::path& path, const SensingMatrix& a);
/// Reads either format; geometry metadata comes from the sidecar when present.
SensingMatrix read_matrix_market(const fs::path& path);

/// One value per line, full precision.
void write_vector_csv(const fs::path& path, const Eigen::Ref<const Vector>& v);
Vector read_vector_csv(const fs::path& path);

/// 8-bit binary PGM. Values are mapped linearly from [lo, hi] to [0, 255]
/// and clamped; non-finite values render as 0. Row 0 is the top line.
void write_pgm(const fs::path& path, const Eigen::Ref<const Matrix>& values, double lo, double hi);
Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic> read_pgm(const fs::path& path);

nlohmann::json grid_spec_to_json(const GridSpec& spec);
GridSpec grid_spec_from_json(const nlohmann::json& j);

}  // namespace phasect
