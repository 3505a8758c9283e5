#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "negadapt/trainer.hpp"

namespace negadapt::io {

// All writers create the final path atomically (write-temp-then-rename).
void atomic_write_text(const std::string& path, const std::string& content);
void atomic_write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

std::uint64_t fnv1a64(const std::string& text);
std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

// Dataset manifest: states regenerate from (system, seed, count) instead of
// being stored.
struct DatasetManifest {
  qstate::SystemKind system = qstate::SystemKind::QubitQubit;
  std::int64_t count = 0;
  std::uint64_t seed = 0;
  std::string generator = "philox4x32-10/ginibre-hs";
  int version = 1;
};

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json_text(const std::string& text);
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& manifest);
trainer::Dataset dataset_from_manifest(const DatasetManifest& manifest);

// Raw state export: 16-byte header (magic "NEGD", u32 version, u32 dim,
// u32 count), then count * dim * dim little-endian (re, im) f64 pairs,
// row-major.
void export_states_raw(const std::string& path, const DatasetManifest& manifest);

// RunConfig JSON (mirrors the config schema; missing keys take defaults).
std::string config_to_json(const trainer::RunConfig& config);
trainer::RunConfig config_from_json_text(const std::string& text);
trainer::RunConfig load_config(const std::string& path);
std::string config_hash(const trainer::RunConfig& config);

// Checkpoint file: 16-byte header (magic "NEGC", u32 version, u32 metadata
// length, u32 CRC32 of everything after the header), a JSON metadata block,
// then named tensors as little-endian f32 with shape prefixes. Training math
// is 64-bit; quantization to 32-bit happens only here.
void save_checkpoint(const std::string& path, const trainer::Checkpoint& checkpoint);
trainer::Checkpoint load_checkpoint(const std::string& path);

}  // namespace negadapt::io
