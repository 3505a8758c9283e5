#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

namespace {

namespace fs = std::filesystem;

std::string cli_bin() {
  const char* env = std::getenv("NEGADAPT_CLI_BIN");
  REQUIRE_MESSAGE(env != nullptr, "NEGADAPT_CLI_BIN must point at the negadapt binary");
  return env;
}

int run(const std::string& args) {
  const std::string cmd = cli_bin() + " " + args + " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("negadapt_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

const char* kTinyConfig = R"({
  "system": "qubit-qubit",
  "mode": "adaptive",
  "loss": "greedy",
  "iterations": 2,
  "train_size": 256,
  "val_size": 64,
  "test_size": 128,
  "batch_start": 32,
  "batch_max": 64,
  "patience": 2,
  "max_epochs": 5,
  "seeds": {"data": 3, "model": 4}
})";

}  // namespace

TEST_CASE("gen writes deterministic manifests and raw exports") {
  TempDir dir;
  const std::string m1 = dir.file("a.json");
  const std::string m2 = dir.file("b.json");
  const std::string r1 = dir.file("a.bin");
  const std::string r2 = dir.file("b.bin");
  CHECK(run("gen --system qubit-qubit --count 64 --seed 7 --out " + m1 + " --export " + r1) == 0);
  CHECK(run("gen --system qubit-qubit --count 64 --seed 7 --out " + m2 + " --export " + r2) == 0);
  CHECK(slurp(m1) == slurp(m2));
  CHECK(slurp(r1) == slurp(r2));
  CHECK(slurp(r1).size() == 16 + 64u * 16 * 16);

  const std::string mq = dir.file("q.json");
  CHECK(run("gen --system qubit-qutrit --count 8 --seed 1 --out " + mq) == 0);
  CHECK(slurp(mq).find("\"dim\": 6") != std::string::npos);
}

TEST_CASE("gen rejects bad arguments with exit code 2") {
  TempDir dir;
  CHECK(run("gen --system qutrit-qutrit --count 4 --out " + dir.file("x.json")) == 2);
  CHECK(run("gen --system qubit-qubit --count 0 --out " + dir.file("x.json")) == 2);
  CHECK(run("bogus-subcommand") == 2);
}

TEST_CASE("train, eval and report round trip") {
  TempDir dir;
  const std::string config = dir.file("config.json");
  write_file(config, kTinyConfig);

  const std::string trained = dir.file("trained");
  const std::string trained_again = dir.file("trained_again");
  REQUIRE(run("train --config " + config + " --out " + trained + " --deterministic --quiet") == 0);
  REQUIRE(fs::exists(trained + "/checkpoint.ckpt"));
  REQUIRE(fs::exists(trained + "/history.csv"));

  SUBCASE("identical deterministic runs produce identical checkpoints") {
    REQUIRE(run("train --config " + config + " --out " + trained_again +
                " --deterministic --quiet") == 0);
    CHECK(slurp(trained + "/checkpoint.ckpt") == slurp(trained_again + "/checkpoint.ckpt"));
    CHECK(slurp(trained + "/history.csv") == slurp(trained_again + "/history.csv"));
  }

  SUBCASE("untrained checkpoint evaluates to an in-range l1") {
    // The untrained-vs-trained l1 ordering is asserted in the acceptance
    // suite against a desk-scale checkpoint; toy runs at this size do not
    // reliably beat a constant predictor on l1.
    const std::string init = dir.file("init");
    REQUIRE(run("train --config " + config + " --out " + init + " --init-only --quiet") == 0);
    const std::string eval_init = dir.file("eval_init");
    REQUIRE(run("eval --checkpoint " + init + "/checkpoint.ckpt --out " + eval_init +
                " --sample-size 0") == 0);
    const auto l1_of = [&](const std::string& path) {
      const std::string csv = slurp(path + "/metrics.csv");
      // second line: model_id,n,l1,...
      const auto line_start = csv.find('\n') + 1;
      auto field_start = csv.find(',', line_start) + 1;
      field_start = csv.find(',', field_start) + 1;
      return std::stod(csv.substr(field_start));
    };
    const double init_l1 = l1_of(eval_init);
    CHECK(init_l1 >= 0.0);
    CHECK(init_l1 <= 0.5);
  }

  SUBCASE("eval accepts an explicit test manifest") {
    const std::string manifest = dir.file("test_manifest.json");
    REQUIRE(run("gen --system qubit-qubit --count 128 --seed 99 --out " + manifest) == 0);
    const std::string eval_dir = dir.file("eval_manifest");
    CHECK(run("eval --checkpoint " + trained + "/checkpoint.ckpt --out " + eval_dir +
              " --test-manifest " + manifest + " --sample-size 0") == 0);
    CHECK(fs::exists(eval_dir + "/metrics.json"));
  }

  SUBCASE("corrupted checkpoints exit with the i/o code") {
    std::string blob = slurp(trained + "/checkpoint.ckpt");
    blob[blob.size() - 3] = static_cast<char>(blob[blob.size() - 3] ^ 0x11);
    const std::string bad = dir.file("bad.ckpt");
    write_file(bad, blob);
    CHECK(run("eval --checkpoint " + bad + " --out " + dir.file("eval_bad")) == 4);
    CHECK(run("eval --checkpoint " + dir.file("missing.ckpt") + " --out " +
              dir.file("eval_missing")) == 4);
  }
}

TEST_CASE("series trains repeats and report consumes its real outputs") {
  TempDir dir;
  const std::string config = dir.file("config.json");
  write_file(config, kTinyConfig);
  const std::string series_dir = dir.file("series");
  REQUIRE(run("series --config " + config + " --repeats 2 --out " + series_dir + " --quiet") == 0);
  CHECK(fs::exists(series_dir + "/run_0/checkpoint.ckpt"));
  CHECK(fs::exists(series_dir + "/run_1/checkpoint.ckpt"));
  CHECK(fs::exists(series_dir + "/run_0/metrics.json"));
  CHECK(fs::exists(series_dir + "/aggregate.csv"));
  CHECK(fs::exists(series_dir + "/series.json"));
  const std::string aggregate = slurp(series_dir + "/aggregate.csv");
  CHECK(aggregate.find("n,l1_mean,l1_best,r2_mean,r2_best") == 0);
  CHECK(aggregate.find("\n2,") != std::string::npos);

  const std::string report_dir = dir.file("report");
  REQUIRE(run("report --in " + series_dir + " --out " + report_dir) == 0);
  CHECK(fs::exists(report_dir + "/report_qubit-qubit_adaptive_greedy.csv"));
}

TEST_CASE("report merges per-n metrics into one row per strategy and n") {
  TempDir dir;
  const std::string in_dir = dir.file("runs");
  int counter = 0;
  const auto put_metrics = [&](const std::string& mode, int n, double l1) {
    const std::string d = in_dir + "/r" + std::to_string(counter++);
    fs::create_directories(d);
    write_file(d + "/metrics.json",
               std::string("{\"model_id\":\"m") + std::to_string(counter) +
                   "\",\"system\":\"qubit-qubit\",\"mode\":\"" + mode +
                   "\",\"loss\":\"last\",\"n\":" + std::to_string(n) +
                   ",\"l1\":" + std::to_string(l1) + ",\"r2\":0.9}");
  };
  put_metrics("adaptive", 2, 0.09);
  put_metrics("adaptive", 3, 0.04);
  put_metrics("adaptive", 5, 0.02);
  put_metrics("fixed", 5, 0.04);

  const std::string out_dir = dir.file("report");
  REQUIRE(run("report --in " + in_dir + " --out " + out_dir) == 0);
  const std::string adaptive = slurp(out_dir + "/report_qubit-qubit_adaptive_last.csv");
  CHECK(adaptive.find("\n2,") != std::string::npos);
  CHECK(adaptive.find("\n3,") != std::string::npos);
  CHECK(adaptive.find("\n5,") != std::string::npos);
  CHECK(fs::exists(out_dir + "/report_qubit-qubit_fixed_last.csv"));
  CHECK(fs::exists(out_dir + "/report_index.json"));

  CHECK(run("report --in " + dir.file("empty_dir") + " --out " + out_dir) == 4);
  fs::create_directories(dir.file("empty_dir"));
  CHECK(run("report --in " + dir.file("empty_dir") + " --out " + out_dir) == 2);
}
