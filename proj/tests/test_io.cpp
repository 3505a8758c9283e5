#include "negadapt/io.hpp"

#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "negadapt/errors.hpp"
#include "test_support.hpp"

using namespace negadapt;
using namespace negadapt::io;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("negadapt_io_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

trainer::Checkpoint tiny_checkpoint() {
  trainer::RunConfig config;
  config.iterations = 2;
  config.train_size = 8;
  config.val_size = 8;
  config.test_size = 8;
  config.max_epochs = 0;
  trainer::Checkpoint ckpt;
  ckpt.config = config;
  ckpt.params = policynet::init_params(config.system, 77);
  ckpt.best_val_loss = 0.0123;
  ckpt.best_epoch = 0;
  ckpt.train_pred_mean = 0.1;
  return ckpt;
}

}  // namespace

TEST_CASE("atomic text writes leave no temporary behind") {
  TempDir dir;
  const std::string path = dir.file("note.txt");
  atomic_write_text(path, "payload");
  CHECK(slurp(path) == "payload");
  CHECK(!std::filesystem::exists(path + ".tmp"));
  atomic_write_text(path, "replacement");
  CHECK(slurp(path) == "replacement");
}

TEST_CASE("fnv1a64 is stable and input-sensitive") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("abc") == fnv1a64("abc"));
  CHECK(fnv1a64("abc") != fnv1a64("abd"));
}

TEST_CASE("crc32 matches the standard check value") {
  const char* check = "123456789";
  CHECK(crc32(reinterpret_cast<const std::uint8_t*>(check), 9) == 0xCBF43926u);
}

TEST_CASE("manifest round trip and regeneration") {
  TempDir dir;
  DatasetManifest manifest;
  manifest.system = qstate::SystemKind::QubitQutrit;
  manifest.count = 12;
  manifest.seed = 99;
  const std::string path = dir.file("manifest.json");
  save_manifest(path, manifest);
  const DatasetManifest loaded = load_manifest(path);
  CHECK(loaded.system == manifest.system);
  CHECK(loaded.count == manifest.count);
  CHECK(loaded.seed == manifest.seed);

  const trainer::Dataset a = dataset_from_manifest(loaded);
  const trainer::Dataset b = trainer::build_dataset(manifest.system, 99, 12);
  REQUIRE(a.size() == b.size());
  CHECK(a.targets == b.targets);

  CHECK(manifest_to_json(manifest).find("\"dim\": 6") != std::string::npos);
}

TEST_CASE("manifest parsing rejects malformed input") {
  CHECK_THROWS_AS(manifest_from_json_text("not json"), ConfigError);
  CHECK_THROWS_AS(manifest_from_json_text(R"({"format":"other"})"), ConfigError);
  CHECK_THROWS_AS(
      manifest_from_json_text(
          R"({"format":"negadapt-manifest","version":1,"system":"qubit-qubit","count":0,"seed":1})"),
      ConfigError);
}

TEST_CASE("raw state export carries the documented header and exact payload") {
  TempDir dir;
  DatasetManifest manifest;
  manifest.system = qstate::SystemKind::QubitQubit;
  manifest.count = 3;
  manifest.seed = 4;
  const std::string path = dir.file("states.bin");
  export_states_raw(path, manifest);
  const std::string blob = slurp(path);
  // 16-byte header + count * dim^2 complex entries * 16 bytes each.
  REQUIRE(blob.size() == 16 + 3u * 4 * 4 * 16);
  CHECK(blob.compare(0, 4, "NEGD") == 0);
  std::uint32_t version, dim, count;
  std::memcpy(&version, blob.data() + 4, 4);
  std::memcpy(&dim, blob.data() + 8, 4);
  std::memcpy(&count, blob.data() + 12, 4);
  CHECK(version == 1);
  CHECK(dim == 4);
  CHECK(count == 3);

  const auto rho = qstate::random_density_matrix(manifest.system, manifest.seed, 0);
  double first_re, first_im;
  std::memcpy(&first_re, blob.data() + 16, 8);
  std::memcpy(&first_im, blob.data() + 24, 8);
  CHECK(first_re == rho.mat(0, 0).real());
  CHECK(first_im == rho.mat(0, 0).imag());
}

TEST_CASE("config json round trip with defaults") {
  const trainer::RunConfig defaults = config_from_json_text("{}");
  CHECK(defaults.train_size == (1 << 18));
  CHECK(defaults.val_size == (1 << 16));
  CHECK(defaults.learning_rate == 0.001);
  CHECK(defaults.batch_start == 32);
  CHECK(defaults.batch_max == 512);
  CHECK(defaults.patience == 10);

  trainer::RunConfig config;
  config.system = qstate::SystemKind::QubitQutrit;
  config.mode = policynet::RolloutMode::Fixed;
  config.loss = trainer::LossKind::Greedy;
  config.iterations = 6;
  config.train_size = 123;
  config.seeds = {5, 6};
  config.basis_list_path = "";
  const trainer::RunConfig round = config_from_json_text(config_to_json(config));
  CHECK(round.system == config.system);
  CHECK(round.mode == config.mode);
  CHECK(round.loss == config.loss);
  CHECK(round.iterations == 6);
  CHECK(round.train_size == 123);
  CHECK(round.seeds.data == 5);
  CHECK(round.seeds.model == 6);
  CHECK(config_hash(round) == config_hash(config));

  CHECK_THROWS_AS(config_from_json_text(R"({"system":"bogus"})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"iterations":1})"), BadIterationCountError);
  CHECK_THROWS_AS(config_from_json_text("[1,2]"), ConfigError);
}

TEST_CASE("checkpoint round trip quantizes to 32-bit storage") {
  TempDir dir;
  const trainer::Checkpoint original = tiny_checkpoint();
  const std::string path = dir.file("model.ckpt");
  save_checkpoint(path, original);
  const trainer::Checkpoint loaded = load_checkpoint(path);

  CHECK(loaded.best_val_loss == original.best_val_loss);
  CHECK(loaded.best_epoch == original.best_epoch);
  CHECK(loaded.train_pred_mean == original.train_pred_mean);
  CHECK(loaded.config.iterations == original.config.iterations);

  const auto named_orig = original.params.named_tensors();
  const auto named_load = loaded.params.named_tensors();
  for (std::size_t t = 0; t < named_orig.size(); ++t) {
    REQUIRE(named_load[t].second->numel() == named_orig[t].second->numel());
    for (std::size_t i = 0; i < named_orig[t].second->numel(); ++i) {
      const double quantized = static_cast<double>(static_cast<float>(named_orig[t].second->data[i]));
      CHECK(named_load[t].second->data[i] == quantized);
    }
  }

  // Saving the loaded checkpoint reproduces the file bitwise.
  const std::string again = dir.file("model2.ckpt");
  save_checkpoint(again, loaded);
  CHECK(slurp(again) == slurp(path));
}

TEST_CASE("reloaded checkpoints reproduce their recorded validation loss") {
  TempDir dir;
  trainer::RunConfig config;
  config.iterations = 2;
  config.train_size = 128;
  config.val_size = 64;
  config.test_size = 64;
  config.batch_start = 32;
  config.batch_max = 32;
  config.patience = 2;
  config.max_epochs = 3;
  config.seeds = {41, 42};
  const trainer::Checkpoint trained = trainer::train(config);
  const std::string path = dir.file("trained.ckpt");
  save_checkpoint(path, trained);
  const trainer::Checkpoint loaded = load_checkpoint(path);

  const trainer::Dataset val =
      trainer::build_dataset(config.system, config.seeds.data + 1, config.val_size);
  const double replayed = trainer::evaluate_loss(loaded.params, val, config, nullptr);
  // Weights round-trip through 32-bit storage; the loss shifts accordingly.
  CHECK(std::abs(replayed - loaded.best_val_loss) < 1e-5 + 1e-3 * loaded.best_val_loss);
}

TEST_CASE("corrupted checkpoints fail the CRC check") {
  TempDir dir;
  const std::string path = dir.file("model.ckpt");
  save_checkpoint(path, tiny_checkpoint());
  std::string blob = slurp(path);

  SUBCASE("flipped payload byte") {
    blob[blob.size() / 2] = static_cast<char>(blob[blob.size() / 2] ^ 0x40);
    const std::string bad = dir.file("bad.ckpt");
    atomic_write_text(bad, blob);
    CHECK_THROWS_AS(load_checkpoint(bad), ChecksumMismatchError);
  }
  SUBCASE("bad magic") {
    blob[0] = 'X';
    const std::string bad = dir.file("bad_magic.ckpt");
    atomic_write_text(bad, blob);
    CHECK_THROWS_AS(load_checkpoint(bad), ChecksumMismatchError);
  }
  SUBCASE("truncated file") {
    const std::string bad = dir.file("short.ckpt");
    atomic_write_text(bad, blob.substr(0, blob.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(bad), ChecksumMismatchError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint(dir.file("nope.ckpt")), IoError); }
}
