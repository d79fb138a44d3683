#include "sldml/signal_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace sldml {
namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

SignalMatrix load_signal_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());

  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw Error(ErrorCode::EmptyFile, path.string() + ": no header");

  SignalMatrix s;
  std::unordered_set<std::string> seen;
  for (auto cell : split_commas(trim(line))) {
    std::string name(trim(cell));
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::MalformedRecord, path.string() + ": duplicate column name '" + name + "'");
    }
    s.signal_names.push_back(std::move(name));
  }
  const std::size_t n = s.signal_names.size();

  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto cells = split_commas(body);
    if (cells.size() != n) {
      throw Error(ErrorCode::RaggedRows, path.string() + ": line " + std::to_string(line_no) + " has " +
                                             std::to_string(cells.size()) + " cells, expected " + std::to_string(n));
    }
    for (std::size_t c = 0; c < n; ++c) {
      const auto cell = trim(cells[c]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(v)) {
        throw Error(ErrorCode::NonNumericCell, path.string() + ": row " + std::to_string(rows + 1) + ", column " +
                                                   std::to_string(c + 1) + " ('" + std::string(cell) + "')");
      }
      data.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::EmptyFile, path.string() + ": no data rows");

  // data is row-major samples x signals, which is exactly a column-major signals x samples matrix.
  s.values = Eigen::Map<const MatrixX<double>>(data.data(), Eigen::Index(n), Eigen::Index(rows));
  return s;
}

void write_signal_csv(const SignalMatrix& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (std::size_t i = 0; i < s.signal_names.size(); ++i) out << (i ? "," : "") << s.signal_names[i];
  out << '\n';
  char buf[64];
  for (Eigen::Index t = 0; t < s.samples(); ++t) {
    for (Eigen::Index i = 0; i < s.signals(); ++i) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), s.values(i, t));
      if (i) out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  const auto base = path.parent_path();

  DatasetManifest manifest;
  std::unordered_set<std::string> paths;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": not a JSON object");
    }
    if (!record.is_object()) throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no));
    ManifestEntry entry;
    for (auto [key, field] : {std::pair{"path", &entry.path}, std::pair{"label", &entry.label},
                              std::pair{"subject", &entry.subject}, std::pair{"modality", &entry.modality}}) {
      const auto it = record.find(key);
      if (it == record.end() || !it->is_string()) {
        throw Error(ErrorCode::MalformedRecord,
                    "line " + std::to_string(line_no) + ": missing string field '" + key + "'");
      }
      *field = it->get<std::string>();
    }
    if (record.size() != 4) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": unexpected extra keys");
    }
    std::filesystem::path p(entry.path);
    if (p.is_relative()) p = base / p;
    entry.path = p.lexically_normal().string();
    if (!paths.insert(entry.path).second) throw Error(ErrorCode::DuplicatePath, entry.path);
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& e : manifest.entries) {
    out << nlohmann::json{{"path", e.path}, {"label", e.label}, {"subject", e.subject}, {"modality", e.modality}}.dump()
        << '\n';
  }
}

}  // namespace sldml
