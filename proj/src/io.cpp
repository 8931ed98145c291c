#include "spdstats/io.hpp"

#include "spdstats/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace spdstats::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double parse_double(std::string_view token, const fs::path& path, std::size_t line) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r')) {
    token.remove_suffix(1);
  }
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || ec != std::errc() || end != token.data() + token.size()) {
    throw IoError(path.string() + ":" + std::to_string(line) + ": cannot parse '" +
                  std::string(token) + "' as a number");
  }
  return v;
}

}  // namespace

Matrix read_csv_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      const std::string_view token(line.data() + start,
                                   (comma == std::string::npos ? line.size() : comma) - start);
      row.push_back(parse_double(token, path, line_no));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(rows.front().size()) + " values, found " +
                    std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + " contains no matrix");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

void write_csv_matrix(const fs::path& path, const Matrix& m) {
  std::string out;
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      const int len = std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out.append(buf, static_cast<std::size_t>(len));
    }
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << out;
  if (!f) throw IoError("failed writing " + path.string());
}

SpdMatrix read_spd_csv(const fs::path& path) {
  const Matrix a = read_csv_matrix(path);
  if (a.rows() != a.cols()) {
    throw ShapeError(path.string() + ": matrix is " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + ", expected square");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance * scale) {
    throw ShapeError(path.string() + ": matrix is not symmetric (max |A - A^T| = " +
                     std::to_string(asym) + ")");
  }
  try {
    return validate_spd(SymMatrix::from_dense(a));
  } catch (const DomainError& e) {
    throw DomainError(path.string() + ": " + e.what(), e.min_eigenvalue());
  }
}

fs::path Manifest::resolve(const ManifestEntry& e) const {
  const fs::path p(e.path);
  return p.is_absolute() ? p : base_dir / p;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  Manifest m;
  m.base_dir = path.parent_path();
  try {
    m.matrix_format = j.value("matrix_format", std::string("csv"));
    if (m.matrix_format != "csv") {
      throw IoError("unsupported matrix_format '" + m.matrix_format + "' (only csv)");
    }
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.path = e.at("path").get<std::string>();
      entry.group = e.value("group", std::string("all"));
      if (e.contains("site") && !e.at("site").is_null()) entry.site = e.at("site").get<std::string>();
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw IoError("manifest " + path.string() + " does not match the schema: " + e.what());
  }
  if (m.entries.empty()) throw IoError("manifest " + path.string() + " has no entries");
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"path", e.path},
                       {"group", e.group},
                       {"site", e.site ? json(*e.site) : json(nullptr)}});
  }
  const json j = {{"matrix_format", manifest.matrix_format}, {"entries", entries}};
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write manifest " + path.string());
  f << j.dump(2) << '\n';
}

std::vector<SpdMatrix> load_matrices(const Manifest& manifest) {
  std::vector<SpdMatrix> out;
  out.reserve(manifest.entries.size());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto path = manifest.resolve(manifest.entries[i]);
    try {
      out.push_back(read_spd_csv(path));
    } catch (const DomainError& e) {
      throw DomainError(std::string("entry ") + std::to_string(i) + ": " + e.what(),
                        e.min_eigenvalue(), static_cast<std::ptrdiff_t>(i));
    }
    if (out.back().dim() != out.front().dim()) {
      throw ShapeError("entry " + std::to_string(i) + " (" + path.string() + ") is " +
                       std::to_string(out.back().dim()) + "x" + std::to_string(out.back().dim()) +
                       ", expected " + std::to_string(out.front().dim()) + "x" +
                       std::to_string(out.front().dim()));
    }
  }
  return out;
}

Grouping group_labels(const std::vector<std::string>& labels) {
  Grouping g;
  std::map<std::string, std::size_t> seen;
  for (const auto& l : labels) {
    auto [it, inserted] = seen.emplace(l, g.names.size());
    if (inserted) g.names.push_back(l);
    g.index.push_back(it->second);
  }
  return g;
}

}  // namespace spdstats::io
