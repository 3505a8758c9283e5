#include "negadapt/io.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "negadapt/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swaps");

namespace negadapt::io {

namespace {

using nlohmann::json;

void rename_into_place(const std::string& tmp, const std::string& path) {
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move temporary file onto '" + path + "': " + ec.message());
  }
}

std::string temp_name(const std::string& path) { return path + ".tmp"; }

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

template <typename T>
void append_scalar(std::vector<std::uint8_t>& out, T value) {
  const std::size_t offset = out.size();
  out.resize(offset + sizeof(T));
  std::memcpy(out.data() + offset, &value, sizeof(T));
}

template <typename T>
T read_scalar(const std::string& blob, std::size_t& cursor, const char* field) {
  if (cursor + sizeof(T) > blob.size()) {
    throw IoError(std::string("checkpoint truncated at field ") + field);
  }
  T out;
  std::memcpy(&out, blob.data() + cursor, sizeof(T));
  cursor += sizeof(T);
  return out;
}

}  // namespace

void atomic_write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  const std::string tmp = temp_name(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw IoError("short write to '" + tmp + "'");
    }
  }
  rename_into_place(tmp, path);
}

void atomic_write_text(const std::string& path, const std::string& content) {
  std::vector<std::uint8_t> bytes(content.begin(), content.end());
  atomic_write_bytes(path, bytes);
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (const char c : text) {
    hash ^= static_cast<std::uint8_t>(c);
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < size; ++i) {
    crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  }
  return crc ^ 0xFFFFFFFFu;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  json doc;
  doc["format"] = "negadapt-manifest";
  doc["version"] = manifest.version;
  doc["system"] = qstate::to_string(manifest.system);
  doc["count"] = manifest.count;
  doc["seed"] = manifest.seed;
  doc["generator"] = manifest.generator;
  doc["dim"] = qstate::total_dim(manifest.system);
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json_text(const std::string& text) {
  const json doc = parse_json(text, "manifest");
  DatasetManifest manifest;
  try {
    if (doc.at("format").get<std::string>() != "negadapt-manifest") {
      throw ConfigError("manifest: unexpected format tag");
    }
    manifest.version = doc.at("version").get<int>();
    manifest.system = qstate::system_from_string(doc.at("system").get<std::string>());
    manifest.count = doc.at("count").get<std::int64_t>();
    manifest.seed = doc.at("seed").get<std::uint64_t>();
    manifest.generator = doc.value("generator", manifest.generator);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  if (manifest.count < 1) throw ConfigError("manifest: count must be >= 1");
  return manifest;
}

DatasetManifest load_manifest(const std::string& path) {
  return manifest_from_json_text(read_file(path));
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  atomic_write_text(path, manifest_to_json(manifest));
}

trainer::Dataset dataset_from_manifest(const DatasetManifest& manifest) {
  return trainer::build_dataset(manifest.system, manifest.seed, manifest.count);
}

void export_states_raw(const std::string& path, const DatasetManifest& manifest) {
  const int dim = qstate::total_dim(manifest.system);
  std::vector<std::uint8_t> bytes;
  bytes.reserve(16 + static_cast<std::size_t>(manifest.count) * dim * dim * 16);
  bytes.insert(bytes.end(), {'N', 'E', 'G', 'D'});
  append_scalar<std::uint32_t>(bytes, 1u);
  append_scalar<std::uint32_t>(bytes, static_cast<std::uint32_t>(dim));
  append_scalar<std::uint32_t>(bytes, static_cast<std::uint32_t>(manifest.count));
  for (std::int64_t i = 0; i < manifest.count; ++i) {
    const qstate::DensityMatrix rho =
        qstate::random_density_matrix(manifest.system, manifest.seed, static_cast<std::uint64_t>(i));
    for (const auto& entry : rho.mat.data()) {
      append_scalar<double>(bytes, entry.real());
      append_scalar<double>(bytes, entry.imag());
    }
  }
  atomic_write_bytes(path, bytes);
}

std::string config_to_json(const trainer::RunConfig& config) {
  json doc;
  doc["system"] = qstate::to_string(config.system);
  doc["mode"] = policynet::to_string(config.mode);
  doc["loss"] = trainer::to_string(config.loss);
  doc["iterations"] = config.iterations;
  doc["train_size"] = config.train_size;
  doc["val_size"] = config.val_size;
  doc["test_size"] = config.test_size;
  doc["learning_rate"] = config.learning_rate;
  doc["batch_start"] = config.batch_start;
  doc["batch_max"] = config.batch_max;
  doc["patience"] = config.patience;
  doc["max_epochs"] = config.max_epochs;
  doc["seeds"] = {{"data", config.seeds.data}, {"model", config.seeds.model}};
  doc["basis_list"] = config.basis_list_path;
  doc["deterministic"] = config.deterministic;
  return doc.dump(2) + "\n";
}

trainer::RunConfig config_from_json_text(const std::string& text) {
  const json doc = parse_json(text, "config");
  trainer::RunConfig config;
  try {
    if (doc.contains("system")) {
      config.system = qstate::system_from_string(doc["system"].get<std::string>());
    }
    if (doc.contains("mode")) {
      config.mode = policynet::mode_from_string(doc["mode"].get<std::string>());
    }
    if (doc.contains("loss")) config.loss = trainer::loss_from_string(doc["loss"].get<std::string>());
    config.iterations = doc.value("iterations", config.iterations);
    config.train_size = doc.value("train_size", config.train_size);
    config.val_size = doc.value("val_size", config.val_size);
    config.test_size = doc.value("test_size", config.test_size);
    config.learning_rate = doc.value("learning_rate", config.learning_rate);
    config.batch_start = doc.value("batch_start", config.batch_start);
    config.batch_max = doc.value("batch_max", config.batch_max);
    config.patience = doc.value("patience", config.patience);
    config.max_epochs = doc.value("max_epochs", config.max_epochs);
    if (doc.contains("seeds")) {
      config.seeds.data = doc["seeds"].value("data", config.seeds.data);
      config.seeds.model = doc["seeds"].value("model", config.seeds.model);
    }
    config.basis_list_path = doc.value("basis_list", config.basis_list_path);
    config.deterministic = doc.value("deterministic", config.deterministic);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  config.validate();
  return config;
}

trainer::RunConfig load_config(const std::string& path) {
  return config_from_json_text(read_file(path));
}

std::string config_hash(const trainer::RunConfig& config) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(config))));
  return buf;
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

json checkpoint_meta(const trainer::Checkpoint& checkpoint) {
  json meta;
  meta["format"] = "negadapt-checkpoint";
  meta["version"] = kCheckpointVersion;
  meta["config"] = json::parse(config_to_json(checkpoint.config));
  meta["best_val_loss"] = checkpoint.best_val_loss;
  meta["best_epoch"] = checkpoint.best_epoch;
  meta["train_pred_mean"] = checkpoint.train_pred_mean;
  meta["arch"] = {{"hidden", policynet::kHiddenSize},
                  {"head", policynet::kHeadWidth},
                  {"input_dim", checkpoint.params.input_dim()},
                  {"proposal_dim", checkpoint.params.proposal_dim()}};
  return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, const trainer::Checkpoint& checkpoint) {
  const std::string meta = checkpoint_meta(checkpoint).dump();

  std::vector<std::uint8_t> payload(meta.begin(), meta.end());
  for (const auto& [name, tensor] : checkpoint.params.named_tensors()) {
    append_scalar<std::uint32_t>(payload, static_cast<std::uint32_t>(name.size()));
    payload.insert(payload.end(), name.begin(), name.end());
    append_scalar<std::uint32_t>(payload, static_cast<std::uint32_t>(tensor->rows));
    append_scalar<std::uint32_t>(payload, static_cast<std::uint32_t>(tensor->cols));
    for (const double v : tensor->data) {
      append_scalar<float>(payload, static_cast<float>(v));
    }
  }

  std::vector<std::uint8_t> bytes;
  bytes.reserve(16 + payload.size());
  bytes.insert(bytes.end(), {'N', 'E', 'G', 'C'});
  append_scalar<std::uint32_t>(bytes, kCheckpointVersion);
  append_scalar<std::uint32_t>(bytes, static_cast<std::uint32_t>(meta.size()));
  append_scalar<std::uint32_t>(bytes, crc32(payload.data(), payload.size()));
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  atomic_write_bytes(path, bytes);
}

trainer::Checkpoint load_checkpoint(const std::string& path) {
  const std::string blob = read_file(path);
  if (blob.size() < 16 || blob.compare(0, 4, "NEGC") != 0) {
    throw ChecksumMismatchError("checkpoint '" + path + "' has a bad magic header");
  }
  std::size_t cursor = 4;
  const auto version = read_scalar<std::uint32_t>(blob, cursor, "version");
  if (version != kCheckpointVersion) {
    throw ChecksumMismatchError("checkpoint version " + std::to_string(version) + " unsupported");
  }
  const auto meta_len = read_scalar<std::uint32_t>(blob, cursor, "meta_len");
  const auto stored_crc = read_scalar<std::uint32_t>(blob, cursor, "crc32");
  if (blob.size() < 16 + meta_len) throw ChecksumMismatchError("checkpoint metadata truncated");
  const std::uint32_t actual_crc =
      crc32(reinterpret_cast<const std::uint8_t*>(blob.data()) + 16, blob.size() - 16);
  if (actual_crc != stored_crc) {
    throw ChecksumMismatchError("checkpoint '" + path + "' failed its CRC32 check");
  }

  trainer::Checkpoint checkpoint;
  const json meta = parse_json(blob.substr(16, meta_len), "checkpoint metadata");
  try {
    checkpoint.config = config_from_json_text(meta.at("config").dump());
    checkpoint.best_val_loss = meta.at("best_val_loss").get<double>();
    checkpoint.best_epoch = meta.at("best_epoch").get<int>();
    checkpoint.train_pred_mean = meta.at("train_pred_mean").get<double>();
  } catch (const json::exception& e) {
    throw ChecksumMismatchError(std::string("checkpoint metadata malformed: ") + e.what());
  }

  checkpoint.params = policynet::init_params(checkpoint.config.system, 0);
  cursor = 16 + meta_len;
  for (auto& [name, tensor] : checkpoint.params.named_tensors()) {
    const auto name_len = read_scalar<std::uint32_t>(blob, cursor, "tensor name length");
    if (cursor + name_len > blob.size()) throw ChecksumMismatchError("tensor name truncated");
    const std::string stored_name = blob.substr(cursor, name_len);
    cursor += name_len;
    if (stored_name != name) {
      throw ChecksumMismatchError("tensor order mismatch: expected " + name + ", found " +
                                  stored_name);
    }
    const auto rows = read_scalar<std::uint32_t>(blob, cursor, "rows");
    const auto cols = read_scalar<std::uint32_t>(blob, cursor, "cols");
    if (rows != static_cast<std::uint32_t>(tensor->rows) ||
        cols != static_cast<std::uint32_t>(tensor->cols)) {
      throw ChecksumMismatchError("tensor shape mismatch for " + name);
    }
    for (auto& v : tensor->data) {
      v = static_cast<double>(read_scalar<float>(blob, cursor, "tensor data"));
    }
  }
  if (cursor != blob.size()) throw ChecksumMismatchError("checkpoint has trailing bytes");
  return checkpoint;
}

}  // namespace negadapt::io
