#pragma once

#include "spdstats/spd_core.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spdstats::io {

/// Maximum |A - A^T| accepted (relative to max(1, max|A|)) before symmetrizing.
inline constexpr double kSymmetryTolerance = 1e-8;

/// Plain CSV: one row per line, comma-separated decimals, no header.
Matrix read_csv_matrix(const std::filesystem::path& path);
/// Values are written with 17 significant digits so they parse back exactly.
void write_csv_matrix(const std::filesystem::path& path, const Matrix& m);

/// Reads a square matrix, symmetrizes (A + A^T)/2 and validates it as SPD.
/// ShapeError for non-square or visibly asymmetric input, DomainError if
/// the result is not positive definite.
SpdMatrix read_spd_csv(const std::filesystem::path& path);

struct ManifestEntry {
  std::string path;  // as written in the manifest
  std::string group;
  std::optional<std::string> site;
};

struct Manifest {
  std::string matrix_format = "csv";
  std::vector<ManifestEntry> entries;
  /// Directory relative entry paths are resolved against.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry& e) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Loads every entry; ShapeError unless all matrices share one size.
/// DomainError::index() names the failing entry.
std::vector<SpdMatrix> load_matrices(const Manifest& manifest);

/// Distinct values of `labels` in order of first appearance, and the
/// position of each label in that list.
struct Grouping {
  std::vector<std::string> names;
  std::vector<std::size_t> index;
};
Grouping group_labels(const std::vector<std::string>& labels);

}  // namespace spdstats::io
