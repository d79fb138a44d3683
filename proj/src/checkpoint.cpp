#include <bit>
#include <cstring>
#include <fstream>

#include "sldml/trainer.hpp"

namespace sldml {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr std::size_t kMagicLen = 6;

}  // namespace

void save_checkpoint(const ModelParams<double>& params, const TrainConfig& cfg, const std::filesystem::path& path) {
  auto p = params;
  TrainConfig stored = cfg;
  stored.num_labels = p.num_labels;

  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  const auto slots = p.slots();
  for (const auto& s : slots) {
    const std::uint64_t len = std::uint64_t(s.size) * sizeof(float);
    tensors.push_back({{"name", s.name}, {"shape", s.shape}, {"dtype", "f32"}, {"byte_offset", offset},
                       {"byte_len", len}});
    offset += len;
  }
  const std::string header =
      nlohmann::json{{"format_version", kCheckpointVersion}, {"config", to_json(stored)}, {"tensors", tensors}}.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kCheckpointMagic, kMagicLen);
  const std::uint64_t header_len = header.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header.data(), std::streamsize(header.size()));
  for (const auto& s : slots) {
    const Eigen::VectorXf values = s.flat().cast<float>();
    out.write(reinterpret_cast<const char*>(values.data()), std::streamsize(values.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

static Checkpoint read_checkpoint(const std::filesystem::path& path, std::optional<int> expected_num_labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());

  char magic[kMagicLen] = {};
  in.read(magic, kMagicLen);
  if (!in || std::memcmp(magic, kCheckpointMagic, kMagicLen) != 0) throw Error(ErrorCode::BadMagic, path.string());

  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || header_len > (std::uint64_t(1) << 30)) throw Error(ErrorCode::IoError, "truncated header length");
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), std::streamsize(header_len));
  if (!in) throw Error(ErrorCode::IoError, "truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::IoError, std::string("header is not JSON: ") + e.what());
  }
  if (!header.contains("format_version") || !header["format_version"].is_number_integer()) {
    throw Error(ErrorCode::VersionUnsupported, "missing format_version");
  }
  if (header["format_version"].get<int>() != kCheckpointVersion) {
    throw Error(ErrorCode::VersionUnsupported, "format_version " + header["format_version"].dump());
  }

  Checkpoint ck;
  ck.config = train_config_from_json(header.at("config"));
  if (ck.config.num_labels < 2) throw Error(ErrorCode::ShapeManifestMismatch, "config.num_labels < 2");
  if (expected_num_labels && *expected_num_labels != ck.config.num_labels) {
    throw Error(ErrorCode::ShapeManifestMismatch, "checkpoint has num_labels=" + std::to_string(ck.config.num_labels) +
                                                      ", expected " + std::to_string(*expected_num_labels));
  }
  ck.params = zero_params<double>(ck.config.num_labels);
  auto slots = ck.params.slots();
  const auto& tensors = header.at("tensors");
  if (!tensors.is_array() || tensors.size() != slots.size()) {
    throw Error(ErrorCode::ShapeManifestMismatch, "tensor count differs from the architecture");
  }

  const auto data_start = in.tellg();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& t = tensors[i];
    const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
    const auto byte_len = t.at("byte_len").get<std::uint64_t>();
    if (t.at("name").get<std::string>() != slots[i].name || shape != slots[i].shape ||
        t.at("dtype").get<std::string>() != "f32" || byte_len != std::uint64_t(slots[i].size) * sizeof(float)) {
      throw Error(ErrorCode::ShapeManifestMismatch, "tensor " + std::to_string(i) + " ('" +
                                                        t.at("name").get<std::string>() + "') does not match " +
                                                        slots[i].name);
    }
    Eigen::VectorXf values(slots[i].size);
    in.seekg(data_start + std::streamoff(t.at("byte_offset").get<std::uint64_t>()));
    in.read(reinterpret_cast<char*>(values.data()), std::streamsize(byte_len));
    if (!in) throw Error(ErrorCode::IoError, "truncated tensor data for " + slots[i].name);
    slots[i].flat() = values.cast<double>();
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_num_labels) {
  try {
    return read_checkpoint(path, expected_num_labels);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": malformed header: " + e.what());
  }
}

}  // namespace sldml
