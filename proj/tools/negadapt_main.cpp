#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "negadapt/errors.hpp"
#include "negadapt/evalkit.hpp"
#include "negadapt/io.hpp"
#include "negadapt/policynet.hpp"
#include "negadapt/qstate.hpp"
#include "negadapt/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace negadapt;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

trainer::EpochLogger stderr_logger(bool quiet) {
  if (quiet) return nullptr;
  return [](const trainer::EpochStat& s) {
    std::fprintf(stderr, "epoch %4d  batch %4d  val_loss %.6e%s\n", s.epoch, s.batch_size,
                 s.val_loss, s.improved ? "  *" : "");
  };
}

std::string history_csv(const trainer::Checkpoint& ckpt) {
  std::string out = "epoch,batch_size,val_loss,improved\n";
  char buf[128];
  for (const auto& s : ckpt.history) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.12e,%d\n", s.epoch, s.batch_size, s.val_loss,
                  s.improved ? 1 : 0);
    out += buf;
  }
  return out;
}

json metrics_json(const evalkit::RunMetrics& m, const trainer::RunConfig& config) {
  json doc;
  doc["model_id"] = m.model_id;
  doc["system"] = qstate::to_string(config.system);
  doc["mode"] = policynet::to_string(config.mode);
  doc["loss"] = trainer::to_string(config.loss);
  doc["n"] = m.n;
  doc["l1"] = m.l1;
  doc["r2"] = m.r2;
  doc["r2_conventional"] = m.r2_conventional;
  doc["train_pred_mean"] = m.train_pred_mean;
  doc["test_size"] = m.pairs.size();
  doc["config_hash"] = io::config_hash(config);
  return doc;
}

// Shared by `eval` and `series`: metrics CSV/JSON plus the 2-D histogram.
evalkit::RunMetrics write_evaluation(const trainer::Checkpoint& ckpt,
                                     const trainer::Dataset& test, const std::string& out_dir,
                                     const std::string& model_id, std::int64_t sample_size) {
  ensure_dir(out_dir);
  const evalkit::RunMetrics metrics = evalkit::evaluate_checkpoint(ckpt, test, model_id);
  const std::vector<evalkit::RunMetrics> one{metrics};
  io::atomic_write_text(join(out_dir, "metrics.csv"), evalkit::metrics_csv(one));
  io::atomic_write_text(join(out_dir, "metrics.json"),
                        metrics_json(metrics, ckpt.config).dump(2) + "\n");
  if (sample_size > 0 && static_cast<std::int64_t>(metrics.pairs.size()) >= sample_size) {
    const evalkit::Histogram2D hist = evalkit::histogram2d(metrics.pairs, sample_size);
    io::atomic_write_text(join(out_dir, "histogram.csv"), evalkit::histogram_csv(hist));
    json sidecar;
    sidecar["bins"] = evalkit::Histogram2D::kBins;
    sidecar["range"] = {0.0, 0.5};
    sidecar["sample_size"] = sample_size;
    sidecar["axes"] = {"true negativity (rows)", "estimated negativity (columns)"};
    sidecar["config_hash"] = io::config_hash(ckpt.config);
    io::atomic_write_text(join(out_dir, "histogram.meta.json"), sidecar.dump(2) + "\n");
  }
  return metrics;
}

int cmd_gen(const std::string& system_name, std::int64_t count, std::uint64_t seed,
            const std::string& out, const std::string& export_path) {
  if (count < 1) throw ConfigError("gen: count must be >= 1");
  io::DatasetManifest manifest;
  manifest.system = qstate::system_from_string(system_name);
  manifest.count = count;
  manifest.seed = seed;
  io::save_manifest(out, manifest);
  if (!export_path.empty()) io::export_states_raw(export_path, manifest);
  std::fprintf(stderr, "wrote manifest for %lld %s states (seed %llu) to %s\n",
               static_cast<long long>(count), system_name.c_str(),
               static_cast<unsigned long long>(seed), out.c_str());
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, bool deterministic,
              bool init_only, bool quiet) {
  trainer::RunConfig config = io::load_config(config_path);
  if (deterministic) config.deterministic = true;
  if (init_only) config.max_epochs = 0;
  ensure_dir(out_dir);
  const trainer::Checkpoint ckpt = trainer::train(config, stderr_logger(quiet));
  io::save_checkpoint(join(out_dir, "checkpoint.ckpt"), ckpt);
  io::atomic_write_text(join(out_dir, "history.csv"), history_csv(ckpt));
  io::atomic_write_text(join(out_dir, "config.json"), io::config_to_json(config));
  std::fprintf(stderr, "best val loss %.6e at epoch %d\n", ckpt.best_val_loss, ckpt.best_epoch);
  return kExitOk;
}

int cmd_series(const std::string& config_path, int repeats, const std::string& out_dir,
               bool deterministic, bool quiet) {
  trainer::RunConfig config = io::load_config(config_path);
  if (deterministic) config.deterministic = true;
  ensure_dir(out_dir);
  const auto checkpoints =
      trainer::train_series(config, repeats, trainer::worker_cap(), stderr_logger(quiet));

  const trainer::Dataset test =
      trainer::build_dataset(config.system, config.seeds.data + 2, config.test_size);
  std::vector<evalkit::RunMetrics> all;
  for (std::size_t r = 0; r < checkpoints.size(); ++r) {
    const std::string run_dir = join(out_dir, "run_" + std::to_string(r));
    ensure_dir(run_dir);
    io::save_checkpoint(join(run_dir, "checkpoint.ckpt"), checkpoints[r]);
    io::atomic_write_text(join(run_dir, "history.csv"), history_csv(checkpoints[r]));
    const std::string model_id =
        "seed" + std::to_string(checkpoints[r].config.seeds.model);
    all.push_back(write_evaluation(checkpoints[r], test, run_dir, model_id, 4096));
  }
  const evalkit::Aggregate agg = evalkit::aggregate(all);
  io::atomic_write_text(join(out_dir, "aggregate.csv"),
                        evalkit::table_csv({{config.iterations, agg}}));
  json summary;
  summary["repeats"] = repeats;
  summary["config_hash"] = io::config_hash(config);
  summary["l1_best"] = agg.l1.best;
  summary["l1_mean"] = agg.l1.mean;
  summary["r2_best"] = agg.r2.best;
  summary["r2_mean"] = agg.r2.mean;
  io::atomic_write_text(join(out_dir, "series.json"), summary.dump(2) + "\n");
  io::atomic_write_text(join(out_dir, "config.json"), io::config_to_json(config));
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& out_dir,
             const std::string& manifest_path, std::int64_t sample_size) {
  const trainer::Checkpoint ckpt = io::load_checkpoint(checkpoint_path);
  trainer::Dataset test;
  if (!manifest_path.empty()) {
    test = io::dataset_from_manifest(io::load_manifest(manifest_path));
  } else {
    test = trainer::build_dataset(ckpt.config.system, ckpt.config.seeds.data + 2,
                                  ckpt.config.test_size);
  }
  const std::string model_id = fs::path(checkpoint_path).stem().string();
  const evalkit::RunMetrics metrics =
      write_evaluation(ckpt, test, out_dir, model_id, sample_size);
  std::fprintf(stderr, "l1 %.6f  r2 %.6f over %zu states\n", metrics.l1, metrics.r2,
               metrics.pairs.size());
  return kExitOk;
}

int cmd_report(const std::string& in_dir, const std::string& out_dir) {
  if (!fs::exists(in_dir)) throw IoError("report: input directory '" + in_dir + "' is missing");
  // Strategy key -> models, rebuilt from the metrics sidecars.
  std::map<std::string, std::vector<evalkit::RunMetrics>> groups;
  std::map<std::string, json> group_meta;
  for (const auto& entry : fs::recursive_directory_iterator(in_dir)) {
    if (!entry.is_regular_file() || entry.path().filename() != "metrics.json") continue;
    std::ifstream in(entry.path());
    json doc;
    try {
      in >> doc;
    } catch (const json::exception&) {
      continue;  // foreign file; not ours
    }
    if (!doc.contains("system") || !doc.contains("mode") || !doc.contains("loss")) continue;
    evalkit::RunMetrics m;
    m.model_id = doc.value("model_id", entry.path().parent_path().filename().string());
    m.n = doc.at("n").get<int>();
    m.l1 = doc.at("l1").get<double>();
    // NaN metrics (degenerate predictors) serialize as null.
    const auto number_or_nan = [&doc](const char* key) {
      return doc.contains(key) && doc[key].is_number()
                 ? doc[key].get<double>()
                 : std::numeric_limits<double>::quiet_NaN();
    };
    m.r2 = number_or_nan("r2");
    m.r2_conventional = number_or_nan("r2_conventional");
    m.train_pred_mean = doc.value("train_pred_mean", 0.0);
    const std::string key = doc.at("system").get<std::string>() + "_" +
                            doc.at("mode").get<std::string>() + "_" +
                            doc.at("loss").get<std::string>();
    groups[key].push_back(std::move(m));
    group_meta[key] = {{"system", doc.at("system")}, {"mode", doc.at("mode")},
                       {"loss", doc.at("loss")}};
  }
  if (groups.empty()) throw ConfigError("report: no metrics.json files under '" + in_dir + "'");

  ensure_dir(out_dir);
  json index;
  for (const auto& [key, models] : groups) {
    const auto accepted = evalkit::success_filter(models);
    std::map<int, std::vector<evalkit::RunMetrics>> by_n;
    for (const auto& m : accepted) by_n[m.n].push_back(m);
    std::vector<std::pair<int, evalkit::Aggregate>> rows;
    for (const auto& [n, group] : by_n) rows.emplace_back(n, evalkit::aggregate(group));
    const std::string csv_name = "report_" + key + ".csv";
    io::atomic_write_text(join(out_dir, csv_name), evalkit::table_csv(rows));
    index[key] = {{"file", csv_name},
                  {"models_total", models.size()},
                  {"models_accepted", accepted.size()},
                  {"meta", group_meta[key]}};
  }
  io::atomic_write_text(join(out_dir, "report_index.json"), index.dump(2) + "\n");
  std::fprintf(stderr, "wrote %zu strategy tables to %s\n", groups.size(), out_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive collective-measurement negativity estimation"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Write a dataset manifest (and optional raw state dump)");
  std::string gen_system = "qubit-qubit";
  std::int64_t gen_count = 0;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  std::string gen_export;
  gen->add_option("--system", gen_system, "qubit-qubit or qubit-qutrit");
  gen->add_option("--count", gen_count, "number of states")->required();
  gen->add_option("--seed", gen_seed, "dataset seed");
  gen->add_option("--out", gen_out, "manifest path")->required();
  gen->add_option("--export", gen_export, "optional raw state export path");

  // train
  auto* train = app.add_subcommand("train", "Train one model from a config file");
  std::string train_config;
  std::string train_out;
  bool train_det = false;
  bool train_init_only = false;
  bool train_quiet = false;
  train->add_option("--config", train_config, "RunConfig JSON")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_flag("--deterministic", train_det, "single-threaded bitwise-reproducible run");
  train->add_flag("--init-only", train_init_only, "emit the epoch-0 checkpoint without training");
  train->add_flag("--quiet", train_quiet, "suppress per-epoch logging");

  // series
  auto* series = app.add_subcommand("series", "Train repeated models and aggregate their metrics");
  std::string series_config;
  std::string series_out;
  int series_repeats = 5;
  bool series_det = false;
  bool series_quiet = false;
  series->add_option("--config", series_config, "RunConfig JSON")->required();
  series->add_option("--repeats", series_repeats, "independent model seeds (default 5)");
  series->add_option("--out", series_out, "output directory")->required();
  series->add_flag("--deterministic", series_det, "run repeats sequentially");
  series->add_flag("--quiet", series_quiet, "suppress per-epoch logging");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a test set");
  std::string eval_ckpt;
  std::string eval_out;
  std::string eval_manifest;
  std::int64_t eval_samples = 4096;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_option("--test-manifest", eval_manifest, "dataset manifest (defaults to the config's test split)");
  eval->add_option("--sample-size", eval_samples, "histogram sample size (0 disables)");

  // report
  auto* report = app.add_subcommand("report", "Merge per-model metrics into per-strategy tables");
  std::string report_in;
  std::string report_out;
  report->add_option("--in", report_in, "directory scanned recursively for metrics.json")->required();
  report->add_option("--out", report_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_system, gen_count, gen_seed, gen_out, gen_export);
    if (train->parsed())
      return cmd_train(train_config, train_out, train_det, train_init_only, train_quiet);
    if (series->parsed())
      return cmd_series(series_config, series_repeats, series_out, series_det, series_quiet);
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_out, eval_manifest, eval_samples);
    if (report->parsed()) return cmd_report(report_in, report_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitConfig;
}
