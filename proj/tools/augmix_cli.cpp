// Command-line front end: deterministic batch augmentation, dataset
// ingestion, toy-model training, and the robustness/calibration metric
// suite. Every subcommand emits a JSON report that embeds its resolved
// configuration and seed; feeding that report back through --config
// reproduces the run bit for bit.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "augmix/augmix.hpp"
#include "augmix/baseline_io.hpp"
#include "augmix/classifier.hpp"
#include "augmix/fourier.hpp"
#include "augmix/image_io.hpp"
#include "augmix/metrics.hpp"
#include "augmix/model_io.hpp"
#include "augmix/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string out_path;
  json config;  // defaults loaded from --config
};

json make_report(const std::string& command, std::uint64_t seed,
                 json config, json results) {
  json report;
  report["schema_version"] = augmix::kReportSchemaVersion;
  report["tool"] = "augmix";
  report["version"] = augmix::kVersion;
  report["command"] = command;
  report["seed"] = seed;
  report["config"] = std::move(config);
  report["results"] = std::move(results);
  return report;
}

void emit_report(const json& report, const std::string& out_path) {
  const std::string text = report.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write file: " + out_path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + out_path);
  }
}

// Defaults may come from a previous report (fields under "config") or from
// a bare config object.
json load_config_file(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("bad config JSON in " + path + ": " + e.what());
  }
  if (doc.contains("command") && doc.at("command").get<std::string>() != command)
    throw std::invalid_argument("config file was produced by subcommand '" +
                                doc.at("command").get<std::string>() +
                                "', not '" + command + "'");
  if (doc.contains("config")) return doc.at("config");
  return doc;
}

template <typename T>
void cfg_default(const json& cfg, const char* key, T& var) {
  if (cfg.contains(key)) var = cfg.at(key).get<T>();
}

std::vector<augmix::AugOpKind> parse_ops(const std::string& csv) {
  std::vector<augmix::AugOpKind> ops;
  std::stringstream ss(csv);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    const auto kind = augmix::op_from_string(name);
    if (!kind)
      throw std::invalid_argument("unknown augmentation op: " + name);
    ops.push_back(*kind);
  }
  if (ops.empty()) throw std::invalid_argument("empty op list");
  return ops;
}

std::string ops_to_csv(const std::vector<augmix::AugOpKind>& ops) {
  std::string out;
  for (const auto kind : ops) {
    if (!out.empty()) out += ',';
    out += std::string(augmix::to_string(kind));
  }
  return out;
}

struct AugMixFlags {
  int k = 3;
  double alpha = 1.0;
  int max_depth = 3;
  int max_severity = 10;
  int jsd_arity = 2;
  std::string ops = ops_to_csv({augmix::kOpCatalog.begin(),
                                augmix::kOpCatalog.end()});

  void load_defaults(const json& cfg) {
    cfg_default(cfg, "k", k);
    cfg_default(cfg, "alpha", alpha);
    cfg_default(cfg, "max_depth", max_depth);
    cfg_default(cfg, "max_severity", max_severity);
    cfg_default(cfg, "jsd_arity", jsd_arity);
    cfg_default(cfg, "ops", ops);
  }

  void bind(CLI::App* cmd) {
    cmd->add_option("--k", k, "number of augmentation chains");
    cmd->add_option("--alpha", alpha, "Dirichlet/Beta concentration");
    cmd->add_option("--max-depth", max_depth, "max ops per chain (1-3)");
    cmd->add_option("--max-severity", max_severity, "max severity level (1-10)");
    cmd->add_option("--jsd-arity", jsd_arity,
                    "augmented views per example (2 or 3)");
    cmd->add_option("--ops", ops, "comma-separated op subset");
  }

  augmix::AugMixConfig to_config() const {
    augmix::AugMixConfig cfg;
    cfg.k = k;
    cfg.alpha = alpha;
    cfg.max_depth = max_depth;
    cfg.max_severity = max_severity;
    cfg.jsd_arity = jsd_arity;
    cfg.ops = parse_ops(ops);
    augmix::validate_config(cfg);
    return cfg;
  }

  json to_json() const {
    return {{"k", k},
            {"alpha", alpha},
            {"max_depth", max_depth},
            {"max_severity", max_severity},
            {"jsd_arity", jsd_arity},
            {"ops", ops}};
  }
};

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

struct AugmentOpts {
  std::string input;
  std::string out_dir;
  int count = 1;
  int channels = 3;
  AugMixFlags mix;
};

std::vector<fs::path> collect_inputs(const std::string& input) {
  std::vector<fs::path> files;
  const fs::path p(input);
  if (fs::is_directory(p)) {
    for (const auto& entry : fs::directory_iterator(p)) {
      if (!entry.is_regular_file()) continue;
      const auto ext = entry.path().extension().string();
      if (ext == ".png" || ext == ".pgm" || ext == ".ppm")
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(p)) {
    files.push_back(p);
  } else {
    throw std::runtime_error("input not found: " + input);
  }
  if (files.empty())
    throw std::runtime_error("no PNG/PGM/PPM inputs under " + input);
  return files;
}

int run_augment(const AugmentOpts& opts, const GlobalOpts& global) {
  if (opts.count < 0) throw std::invalid_argument("--count must be >= 0");
  if (opts.channels != 1 && opts.channels != 3)
    throw std::invalid_argument("--channels must be 1 or 3");
  const augmix::AugMixConfig cfg = opts.mix.to_config();
  const auto inputs = collect_inputs(opts.input);

  fs::create_directories(opts.out_dir);
  augmix::PhiloxRng root(global.seed);

  json config = opts.mix.to_json();
  config["input"] = opts.input;
  config["out_dir"] = opts.out_dir;
  config["count"] = opts.count;
  config["channels"] = opts.channels;
  config["seed"] = global.seed;

  json outputs = json::array();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const augmix::Image img =
        augmix::load_image(inputs[i].string(), opts.channels);
    for (int v = 0; v < opts.count; ++v) {
      augmix::PhiloxRng rng = root.child(i).child(static_cast<std::uint64_t>(v));
      const augmix::Image out = augmix::augment_and_mix(img, cfg, rng);
      const std::string name = inputs[i].stem().string() + "_augmix_" +
                               std::to_string(v) + ".png";
      const fs::path out_path = fs::path(opts.out_dir) / name;
      augmix::save_image(out, out_path.string());
      outputs.push_back({{"input", inputs[i].string()},
                         {"output", out_path.string()}});
    }
  }

  json results;
  results["inputs"] = inputs.size();
  results["images_written"] = outputs.size();
  results["files"] = outputs;
  const json report = make_report("augment", global.seed, config, results);

  // sidecar manifest always lands next to the outputs
  emit_report(report, (fs::path(opts.out_dir) / "augmix_manifest.json").string());
  emit_report(report, global.out_path);
  std::cerr << "augment: wrote " << outputs.size() << " images to "
            << opts.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestOpts {
  std::vector<std::string> inputs;
  std::string classes_csv;
  int take_per_class = 0;  // 0 = no limit
  bool relabel = false;
  std::string out_bin;
};

int run_ingest(const IngestOpts& opts, const GlobalOpts& global) {
  if (opts.inputs.empty()) throw std::invalid_argument("no input batches");
  augmix::LabeledDataset merged;
  merged.num_classes = 10;
  for (const std::string& path : opts.inputs) {
    augmix::LabeledDataset batch = augmix::ingest_cifar10(path);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      merged.images.push_back(std::move(batch.images[i]));
      merged.labels.push_back(batch.labels[i]);
    }
  }

  std::vector<int> keep_classes;
  if (!opts.classes_csv.empty()) {
    std::stringstream ss(opts.classes_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const int cls = std::stoi(tok);
      if (cls < 0 || cls > 9)
        throw std::invalid_argument("--classes entries must be in [0,9]");
      keep_classes.push_back(cls);
    }
  }

  augmix::LabeledDataset selected;
  selected.num_classes = 10;
  std::map<int, int> taken;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const int label = merged.labels[i];
    int new_label = label;
    if (!keep_classes.empty()) {
      const auto it =
          std::find(keep_classes.begin(), keep_classes.end(), label);
      if (it == keep_classes.end()) continue;
      if (opts.relabel)
        new_label = static_cast<int>(it - keep_classes.begin());
    }
    if (opts.take_per_class > 0 && taken[label] >= opts.take_per_class)
      continue;
    ++taken[label];
    selected.images.push_back(std::move(merged.images[i]));
    selected.labels.push_back(new_label);
  }
  if (opts.relabel && !keep_classes.empty())
    selected.num_classes = static_cast<int>(keep_classes.size());

  if (!opts.out_bin.empty()) augmix::write_cifar10(selected, opts.out_bin);

  std::map<std::string, int> histogram;
  for (const int label : selected.labels)
    ++histogram[std::to_string(label)];

  json config;
  config["inputs"] = opts.inputs;
  config["classes"] = opts.classes_csv;
  config["take_per_class"] = opts.take_per_class;
  config["relabel"] = opts.relabel;
  config["out_bin"] = opts.out_bin;
  config["seed"] = global.seed;

  json results;
  results["examples"] = selected.size();
  results["num_classes"] = selected.num_classes;
  results["label_histogram"] = histogram;
  results["image_shape"] = {32, 32, 3};
  emit_report(make_report("ingest", global.seed, config, results),
              global.out_path);
  std::cerr << "ingest: " << selected.size() << " examples\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string data_bin;
  std::string test_bin;
  bool gray = false;
  int epochs = 10;
  int batch_size = 32;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool no_cosine = false;
  double lambda = 12.0;
  std::string mode = "none";
  bool jsd = false;
  bool stop_clean_grad = false;
  AugMixFlags mix;
  std::string model_out;
  std::string preds_out;
  std::string ladder_path;
  std::string ladder_out_dir;
};

augmix::AugMode parse_mode(const std::string& mode) {
  if (mode == "none") return augmix::AugMode::none;
  if (mode == "chain") return augmix::AugMode::chain;
  if (mode == "augmix") return augmix::AugMode::augmix;
  throw std::invalid_argument("unknown --mode: " + mode +
                              " (expected none|chain|augmix)");
}

augmix::LabeledDataset load_dataset(const std::string& path, bool gray) {
  augmix::LabeledDataset ds = augmix::ingest_cifar10(path);
  if (gray) {
    for (augmix::Image& img : ds.images)
      img = augmix::convert_channels(img, 1);
  }
  return ds;
}

json train_one(const TrainOpts& opts, const augmix::LabeledDataset& train_set,
               const augmix::LabeledDataset* test_set, std::uint64_t seed,
               const std::string& model_out, const std::string& preds_out) {
  augmix::TrainConfig cfg;
  cfg.epochs = opts.epochs;
  cfg.batch_size = opts.batch_size;
  cfg.learning_rate = opts.lr;
  cfg.momentum = opts.momentum;
  cfg.weight_decay = opts.weight_decay;
  cfg.cosine_schedule = !opts.no_cosine;
  cfg.lambda = opts.lambda;
  cfg.aug_mode = parse_mode(opts.mode);
  cfg.jsd = opts.jsd;
  cfg.stop_clean_gradient = opts.stop_clean_grad;
  cfg.augmix = opts.mix.to_config();
  cfg.seed = seed;
  augmix::validate_train_config(cfg);

  augmix::PhiloxRng rng(seed);
  const augmix::TrainResult trained = augmix::train(train_set, cfg, rng);
  const augmix::EvalResult train_eval =
      augmix::evaluate(trained.model, train_set);

  json results;
  results["epochs"] = cfg.epochs;
  results["train_error"] = train_eval.error_rate;
  results["epoch_loss"] = trained.epoch_loss;
  if (test_set) {
    const augmix::EvalResult test_eval =
        augmix::evaluate(trained.model, *test_set);
    results["test_error"] = test_eval.error_rate;
    if (!preds_out.empty()) {
      augmix::write_prediction_csv(test_eval.records, preds_out);
      results["preds_out"] = preds_out;
    }
  }
  if (!model_out.empty()) {
    augmix::save_model_json(trained.model, model_out);
    results["model_out"] = model_out;
  }
  return results;
}

int run_train(const TrainOpts& opts, const GlobalOpts& global) {
  const augmix::LabeledDataset train_set =
      load_dataset(opts.data_bin, opts.gray);
  std::optional<augmix::LabeledDataset> test_set;
  if (!opts.test_bin.empty()) test_set = load_dataset(opts.test_bin, opts.gray);

  json config = opts.mix.to_json();
  config["data"] = opts.data_bin;
  config["test"] = opts.test_bin;
  config["gray"] = opts.gray;
  config["epochs"] = opts.epochs;
  config["batch_size"] = opts.batch_size;
  config["lr"] = opts.lr;
  config["momentum"] = opts.momentum;
  config["weight_decay"] = opts.weight_decay;
  config["no_cosine"] = opts.no_cosine;
  config["lambda"] = opts.lambda;
  config["mode"] = opts.mode;
  config["jsd"] = opts.jsd;
  config["stop_clean_grad"] = opts.stop_clean_grad;
  config["model_out"] = opts.model_out;
  config["preds_out"] = opts.preds_out;
  config["ladder"] = opts.ladder_path;
  config["ladder_out_dir"] = opts.ladder_out_dir;
  config["seed"] = global.seed;

  if (!opts.ladder_path.empty()) {
    // Ablation ladder: one report per row, all from a single config file.
    if (opts.ladder_out_dir.empty())
      throw std::invalid_argument("--ladder requires --ladder-out-dir");
    std::ifstream in(opts.ladder_path);
    if (!in) throw std::runtime_error("cannot open file: " + opts.ladder_path);
    json ladder;
    try {
      in >> ladder;
    } catch (const json::exception& e) {
      throw std::runtime_error("bad ladder JSON in " + opts.ladder_path +
                               ": " + e.what());
    }
    if (!ladder.contains("rows") || !ladder.at("rows").is_array() ||
        ladder.at("rows").empty())
      throw std::invalid_argument("ladder file needs a non-empty rows array");
    fs::create_directories(opts.ladder_out_dir);

    json row_reports = json::array();
    for (const json& row : ladder.at("rows")) {
      TrainOpts row_opts = opts;
      const std::string name = row.at("name").get<std::string>();
      row_opts.mode = row.value("mode", opts.mode);
      row_opts.jsd = row.value("jsd", opts.jsd);
      row_opts.lambda = row.value("lambda", opts.lambda);
      row_opts.epochs = row.value("epochs", opts.epochs);

      json row_config = config;
      row_config["mode"] = row_opts.mode;
      row_config["jsd"] = row_opts.jsd;
      row_config["lambda"] = row_opts.lambda;
      row_config["epochs"] = row_opts.epochs;
      row_config["row_name"] = name;

      const json results = train_one(
          row_opts, train_set, test_set ? &*test_set : nullptr, global.seed,
          (fs::path(opts.ladder_out_dir) / (name + "_model.json")).string(),
          "");
      const json report =
          make_report("train", global.seed, row_config, results);
      emit_report(report,
                  (fs::path(opts.ladder_out_dir) / (name + ".json")).string());
      row_reports.push_back({{"name", name},
                             {"report", (fs::path(opts.ladder_out_dir) /
                                         (name + ".json"))
                                            .string()}});
      std::cerr << "train[" << name << "]: train_error="
                << results.at("train_error").get<double>();
      if (results.contains("test_error"))
        std::cerr << " test_error=" << results.at("test_error").get<double>();
      std::cerr << "\n";
    }
    json results;
    results["rows"] = row_reports;
    emit_report(make_report("train", global.seed, config, results),
                global.out_path);
    return 0;
  }

  const json results =
      train_one(opts, train_set, test_set ? &*test_set : nullptr, global.seed,
                opts.model_out, opts.preds_out);
  emit_report(make_report("train", global.seed, config, results),
              global.out_path);
  std::cerr << "train: train_error="
            << results.at("train_error").get<double>() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval-corruption
// ---------------------------------------------------------------------------

struct EvalCorruptionOpts {
  std::string preds_dir;
  std::string baseline_path;
  std::string dump_baseline;
};

int run_eval_corruption(const EvalCorruptionOpts& opts,
                        const GlobalOpts& global) {
  const fs::path root(opts.preds_dir);
  if (!fs::is_directory(root))
    throw std::runtime_error("not a directory: " + opts.preds_dir);

  std::vector<std::string> corruption_names;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory())
      corruption_names.push_back(entry.path().filename().string());
  }
  std::sort(corruption_names.begin(), corruption_names.end());
  if (corruption_names.empty())
    throw std::runtime_error("no corruption directories under " +
                             opts.preds_dir);

  std::vector<augmix::CorruptionResults> all_results;
  for (const std::string& name : corruption_names) {
    augmix::CorruptionResults results;
    results.corruption_name = name;
    for (int severity = 1; severity <= 5; ++severity) {
      const fs::path csv =
          root / name / std::to_string(severity) / "preds.csv";
      const auto records = augmix::read_prediction_csv(csv.string());
      if (records.empty())
        throw std::runtime_error("no records in " + csv.string());
      results.errors_by_severity[severity - 1] = augmix::error_rate(records);
    }
    all_results.push_back(std::move(results));
  }

  std::optional<augmix::BaselineErrorTable> baseline;
  if (!opts.baseline_path.empty())
    baseline = augmix::read_baseline_json(opts.baseline_path);

  json per_corruption = json::object();
  std::vector<double> ces;
  for (const augmix::CorruptionResults& results : all_results) {
    json entry;
    entry["errors_by_severity"] = results.errors_by_severity;
    entry["uce"] = augmix::unnormalized_ce(results);
    if (baseline) {
      const auto it = baseline->corruptions.find(results.corruption_name);
      if (it == baseline->corruptions.end())
        throw std::invalid_argument("baseline has no corruption entry for " +
                                    results.corruption_name);
      augmix::CorruptionResults ref;
      ref.corruption_name = results.corruption_name;
      ref.errors_by_severity = it->second;
      const double ce = augmix::normalized_ce(results, ref);
      entry["ce"] = ce;
      ces.push_back(ce);
    }
    per_corruption[results.corruption_name] = entry;
  }

  if (!opts.dump_baseline.empty()) {
    augmix::BaselineErrorTable table;
    for (const augmix::CorruptionResults& results : all_results)
      table.corruptions[results.corruption_name] = results.errors_by_severity;
    augmix::write_baseline_json(table, opts.dump_baseline);
  }

  json config;
  config["preds_dir"] = opts.preds_dir;
  config["baseline"] = opts.baseline_path;
  config["dump_baseline"] = opts.dump_baseline;
  config["seed"] = global.seed;

  json results;
  results["corruptions"] = per_corruption;
  if (!ces.empty()) results["mce"] = augmix::mce(ces);
  emit_report(make_report("eval-corruption", global.seed, config, results),
              global.out_path);
  if (!ces.empty())
    std::cerr << "eval-corruption: mCE=" << augmix::mce(ces) << "\n";
  else
    std::cerr << "eval-corruption: " << all_results.size()
              << " corruptions (no baseline, uCE only)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval-perturbation
// ---------------------------------------------------------------------------

struct EvalPerturbationOpts {
  std::string streams_dir;
  std::string baseline_path;
  std::string dump_baseline;
  std::string flip_mode = "adjacent";
};

int run_eval_perturbation(const EvalPerturbationOpts& opts,
                          const GlobalOpts& global) {
  augmix::FlipMode mode;
  if (opts.flip_mode == "adjacent") {
    mode = augmix::FlipMode::adjacent;
  } else if (opts.flip_mode == "vs-first") {
    mode = augmix::FlipMode::vs_first;
  } else {
    throw std::invalid_argument("unknown --flip-mode: " + opts.flip_mode);
  }

  const fs::path root(opts.streams_dir);
  if (!fs::is_directory(root))
    throw std::runtime_error("not a directory: " + opts.streams_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw std::runtime_error("no stream CSVs under " + opts.streams_dir);

  std::vector<augmix::PerturbationGroup> groups;
  for (const fs::path& file : files) {
    augmix::PerturbationGroup group;
    group.name = file.stem().string();
    group.streams = augmix::read_stream_csv(file.string());
    groups.push_back(std::move(group));
  }

  json per_perturbation = json::object();
  double fp_sum = 0.0;
  for (const augmix::PerturbationGroup& group : groups) {
    double fp = 0.0;
    for (const augmix::PredictionStream& stream : group.streams)
      fp += augmix::flip_probability(stream, mode);
    fp /= static_cast<double>(group.streams.size());
    per_perturbation[group.name] = {{"fp", fp},
                                    {"streams", group.streams.size()}};
    fp_sum += fp;
  }
  const double mfp = fp_sum / static_cast<double>(groups.size());

  json results;
  results["perturbations"] = per_perturbation;
  results["mfp"] = mfp;

  if (!opts.baseline_path.empty()) {
    const augmix::BaselineErrorTable baseline =
        augmix::read_baseline_json(opts.baseline_path);
    const augmix::FlipSummary summary =
        augmix::mfp_and_mfr(groups, baseline, mode);
    results["mfr"] = summary.mfr;
    for (const auto& [name, fr] : summary.fr_by_perturbation)
      results["perturbations"][name]["fr"] = fr;
  }

  if (!opts.dump_baseline.empty()) {
    augmix::BaselineErrorTable table;
    for (const auto& [name, entry] : per_perturbation.items())
      table.perturbations[name] = entry.at("fp").get<double>();
    augmix::write_baseline_json(table, opts.dump_baseline);
  }

  json config;
  config["streams_dir"] = opts.streams_dir;
  config["baseline"] = opts.baseline_path;
  config["dump_baseline"] = opts.dump_baseline;
  config["flip_mode"] = opts.flip_mode;
  config["seed"] = global.seed;
  emit_report(make_report("eval-perturbation", global.seed, config, results),
              global.out_path);
  std::cerr << "eval-perturbation: mFP=" << mfp;
  if (results.contains("mfr"))
    std::cerr << " mFR=" << results.at("mfr").get<double>();
  std::cerr << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

struct CalibrateOpts {
  std::string preds_path;
  int bin_size = 100;
};

int run_calibrate(const CalibrateOpts& opts, const GlobalOpts& global) {
  const auto records = augmix::read_prediction_csv(opts.preds_path);
  if (records.empty())
    throw std::runtime_error("no records in " + opts.preds_path);

  json config;
  config["preds"] = opts.preds_path;
  config["bin_size"] = opts.bin_size;
  config["seed"] = global.seed;

  json results;
  results["records"] = records.size();
  results["rmsce"] = augmix::rms_calibration_error(records, opts.bin_size);
  results["brier"] = augmix::brier_score(records, opts.bin_size);
  results["error_rate"] = augmix::error_rate(records);
  emit_report(make_report("calibrate", global.seed, config, results),
              global.out_path);
  std::cerr << "calibrate: rmsce=" << results.at("rmsce").get<double>()
            << " brier=" << results.at("brier").get<double>() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fourier
// ---------------------------------------------------------------------------

struct FourierOpts {
  std::string model_path;
  std::string data_bin;
  bool gray = false;
  int limit = 0;
  double epsilon = 4.0;
  std::string grid = "8x8";
  bool uncentered = false;
  std::string out_csv;
  std::string out_pgm;
};

std::pair<int, int> parse_grid(const std::string& grid) {
  const auto x = grid.find('x');
  if (x == std::string::npos)
    throw std::invalid_argument("--grid must look like 8x8");
  try {
    const int rows = std::stoi(grid.substr(0, x));
    const int cols = std::stoi(grid.substr(x + 1));
    if (rows < 1 || cols < 1) throw std::invalid_argument("");
    return {rows, cols};
  } catch (const std::logic_error&) {
    throw std::invalid_argument("--grid must look like 8x8");
  }
}

int run_fourier(const FourierOpts& opts, const GlobalOpts& global) {
  const auto [rows, cols] = parse_grid(opts.grid);
  const augmix::LinearModel model = augmix::load_model_json(opts.model_path);
  augmix::LabeledDataset data = load_dataset(opts.data_bin, opts.gray);
  if (opts.limit > 0 && data.size() > static_cast<std::size_t>(opts.limit)) {
    data.images.resize(static_cast<std::size_t>(opts.limit));
    data.labels.resize(static_cast<std::size_t>(opts.limit));
  }

  const auto classify = [&model](const augmix::Image& img) {
    const augmix::Posterior p = augmix::forward(model, img);
    return static_cast<int>(
        std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
  };

  augmix::PhiloxRng rng(global.seed);
  const augmix::SensitivityHeatmap map = augmix::sensitivity_heatmap(
      classify, data, opts.epsilon, rows, cols, rng, !opts.uncentered);
  const augmix::EvalResult clean = augmix::evaluate(model, data);

  if (!opts.out_csv.empty()) augmix::write_heatmap_csv(map, opts.out_csv);
  if (!opts.out_pgm.empty()) augmix::write_heatmap_pgm(map, opts.out_pgm);

  double lo = 1.0, hi = 0.0, mean = 0.0;
  for (const double v : map.grid) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    mean += v;
  }
  mean /= static_cast<double>(map.grid.size());

  json config;
  config["model"] = opts.model_path;
  config["data"] = opts.data_bin;
  config["gray"] = opts.gray;
  config["limit"] = opts.limit;
  config["epsilon"] = opts.epsilon;
  config["grid"] = opts.grid;
  config["uncentered"] = opts.uncentered;
  config["out_csv"] = opts.out_csv;
  config["out_pgm"] = opts.out_pgm;
  config["seed"] = global.seed;

  json results;
  results["clean_error"] = clean.error_rate;
  results["min_error"] = lo;
  results["max_error"] = hi;
  results["mean_error"] = mean;
  results["centered"] = map.centered;
  results["grid"] = map.grid;
  emit_report(make_report("fourier", global.seed, config, results),
              global.out_path);
  std::cerr << "fourier: clean_error=" << clean.error_rate << " cells=["
            << lo << "," << hi << "]\n";
  return 0;
}

std::string scan_config_path(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") return argv[i + 1];
  }
  return {};
}

std::string scan_subcommand(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg(argv[i]);
    if (!arg.empty() && arg[0] != '-') return arg;
    if (arg == "--config" || arg == "--out" || arg == "--seed") ++i;
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AugMix: deterministic augmentation, consistency training, "
               "and robustness metrics"};
  app.require_subcommand(1);

  GlobalOpts global;
  std::string config_path = scan_config_path(argc, argv);
  try {
    if (!config_path.empty()) {
      global.config =
          load_config_file(config_path, scan_subcommand(argc, argv));
      cfg_default(global.config, "seed", global.seed);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  app.add_option("--seed", global.seed, "random seed for all subcommands");
  app.add_option("--out", global.out_path, "write the JSON report here");
  std::string config_dummy;
  app.add_option("--config", config_dummy,
                 "JSON config or a previously emitted report");

  int exit_code = 0;

  AugmentOpts augment_opts;
  augment_opts.mix.load_defaults(global.config);
  cfg_default(global.config, "input", augment_opts.input);
  cfg_default(global.config, "out_dir", augment_opts.out_dir);
  cfg_default(global.config, "count", augment_opts.count);
  cfg_default(global.config, "channels", augment_opts.channels);
  auto* augment_cmd = app.add_subcommand(
      "augment", "write AugMix variants of PNG/PGM/PPM images");
  augment_cmd->fallthrough();
  augment_cmd->add_option("--input", augment_opts.input,
                          "input image or directory");
  augment_cmd->add_option("--out-dir", augment_opts.out_dir,
                          "output directory");
  augment_cmd->add_option("--count", augment_opts.count,
                          "variants per input image");
  augment_cmd->add_option("--channels", augment_opts.channels,
                          "decode inputs to 1 or 3 channels");
  augment_opts.mix.bind(augment_cmd);
  augment_cmd->callback(
      [&] { exit_code = run_augment(augment_opts, global); });

  IngestOpts ingest_opts;
  cfg_default(global.config, "inputs", ingest_opts.inputs);
  cfg_default(global.config, "classes", ingest_opts.classes_csv);
  cfg_default(global.config, "take_per_class", ingest_opts.take_per_class);
  cfg_default(global.config, "relabel", ingest_opts.relabel);
  cfg_default(global.config, "out_bin", ingest_opts.out_bin);
  auto* ingest_cmd = app.add_subcommand(
      "ingest", "summarize and optionally subset CIFAR-10 binary batches");
  ingest_cmd->fallthrough();
  ingest_cmd->add_option("--input", ingest_opts.inputs,
                         "CIFAR-10 binary batch file(s)");
  ingest_cmd->add_option("--classes", ingest_opts.classes_csv,
                         "keep only these labels (comma separated)");
  ingest_cmd->add_option("--take-per-class", ingest_opts.take_per_class,
                         "cap examples kept per class (0 = all)");
  ingest_cmd->add_flag("--relabel", ingest_opts.relabel,
                       "remap kept classes to 0..m-1");
  ingest_cmd->add_option("--out-bin", ingest_opts.out_bin,
                         "write the selection as a CIFAR-10 binary batch");
  ingest_cmd->callback([&] { exit_code = run_ingest(ingest_opts, global); });

  TrainOpts train_opts;
  train_opts.mix.load_defaults(global.config);
  cfg_default(global.config, "data", train_opts.data_bin);
  cfg_default(global.config, "test", train_opts.test_bin);
  cfg_default(global.config, "gray", train_opts.gray);
  cfg_default(global.config, "epochs", train_opts.epochs);
  cfg_default(global.config, "batch_size", train_opts.batch_size);
  cfg_default(global.config, "lr", train_opts.lr);
  cfg_default(global.config, "momentum", train_opts.momentum);
  cfg_default(global.config, "weight_decay", train_opts.weight_decay);
  cfg_default(global.config, "no_cosine", train_opts.no_cosine);
  cfg_default(global.config, "lambda", train_opts.lambda);
  cfg_default(global.config, "mode", train_opts.mode);
  cfg_default(global.config, "jsd", train_opts.jsd);
  cfg_default(global.config, "stop_clean_grad", train_opts.stop_clean_grad);
  cfg_default(global.config, "model_out", train_opts.model_out);
  cfg_default(global.config, "preds_out", train_opts.preds_out);
  cfg_default(global.config, "ladder", train_opts.ladder_path);
  cfg_default(global.config, "ladder_out_dir", train_opts.ladder_out_dir);
  auto* train_cmd = app.add_subcommand(
      "train", "train the softmax-regression model on a CIFAR-10 batch");
  train_cmd->fallthrough();
  train_cmd->add_option("--data", train_opts.data_bin, "training batch");
  train_cmd->add_option("--test", train_opts.test_bin, "held-out batch");
  train_cmd->add_flag("--gray", train_opts.gray, "train on luma grayscale");
  train_cmd->add_option("--epochs", train_opts.epochs, "training epochs");
  train_cmd->add_option("--batch-size", train_opts.batch_size, "batch size");
  train_cmd->add_option("--lr", train_opts.lr, "initial learning rate");
  train_cmd->add_option("--momentum", train_opts.momentum,
                        "Nesterov momentum");
  train_cmd->add_option("--weight-decay", train_opts.weight_decay,
                        "L2 penalty on the weights");
  train_cmd->add_flag("--no-cosine", train_opts.no_cosine,
                      "disable the cosine learning-rate schedule");
  train_cmd->add_option("--lambda", train_opts.lambda, "JSD coefficient");
  train_cmd->add_option("--mode", train_opts.mode,
                        "augmentation mode: none|chain|augmix");
  train_cmd->add_flag("--jsd", train_opts.jsd,
                      "add the Jensen-Shannon consistency loss");
  train_cmd->add_flag("--stop-clean-grad", train_opts.stop_clean_grad,
                      "block the JSD gradient through the clean view");
  train_cmd->add_option("--model-out", train_opts.model_out,
                        "write the trained model JSON here");
  train_cmd->add_option("--preds-out", train_opts.preds_out,
                        "write held-out predictions CSV here");
  train_cmd->add_option("--ladder", train_opts.ladder_path,
                        "ablation ladder JSON (rows of mode/jsd settings)");
  train_cmd->add_option("--ladder-out-dir", train_opts.ladder_out_dir,
                        "directory for per-row ladder reports");
  train_opts.mix.bind(train_cmd);
  train_cmd->callback([&] { exit_code = run_train(train_opts, global); });

  EvalCorruptionOpts corr_opts;
  cfg_default(global.config, "preds_dir", corr_opts.preds_dir);
  cfg_default(global.config, "baseline", corr_opts.baseline_path);
  cfg_default(global.config, "dump_baseline", corr_opts.dump_baseline);
  auto* corr_cmd = app.add_subcommand(
      "eval-corruption",
      "aggregate per-corruption predictions into uCE/CE/mCE");
  corr_cmd->fallthrough();
  corr_cmd->add_option("--preds-dir", corr_opts.preds_dir,
                       "directory laid out as <corruption>/<severity>/preds.csv");
  corr_cmd->add_option("--baseline", corr_opts.baseline_path,
                       "baseline error table JSON");
  corr_cmd->add_option("--dump-baseline", corr_opts.dump_baseline,
                       "write this run's error rates as a baseline table");
  corr_cmd->callback(
      [&] { exit_code = run_eval_corruption(corr_opts, global); });

  EvalPerturbationOpts pert_opts;
  cfg_default(global.config, "streams_dir", pert_opts.streams_dir);
  cfg_default(global.config, "baseline", pert_opts.baseline_path);
  cfg_default(global.config, "dump_baseline", pert_opts.dump_baseline);
  cfg_default(global.config, "flip_mode", pert_opts.flip_mode);
  auto* pert_cmd = app.add_subcommand(
      "eval-perturbation",
      "aggregate perturbation prediction streams into mFP/mFR");
  pert_cmd->fallthrough();
  pert_cmd->add_option("--streams-dir", pert_opts.streams_dir,
                       "directory of <perturbation>.csv stream files");
  pert_cmd->add_option("--baseline", pert_opts.baseline_path,
                       "baseline flip-rate table JSON");
  pert_cmd->add_option("--dump-baseline", pert_opts.dump_baseline,
                       "write this run's flip probabilities as a baseline");
  pert_cmd->add_option("--flip-mode", pert_opts.flip_mode,
                       "adjacent (default) or vs-first");
  pert_cmd->callback(
      [&] { exit_code = run_eval_perturbation(pert_opts, global); });

  CalibrateOpts cal_opts;
  cfg_default(global.config, "preds", cal_opts.preds_path);
  cfg_default(global.config, "bin_size", cal_opts.bin_size);
  auto* cal_cmd = app.add_subcommand(
      "calibrate", "RMS calibration error and Brier score of predictions");
  cal_cmd->fallthrough();
  cal_cmd->add_option("--preds", cal_opts.preds_path, "prediction CSV");
  cal_cmd->add_option("--bin-size", cal_opts.bin_size,
                      "predictions per adaptive bin");
  cal_cmd->callback([&] { exit_code = run_calibrate(cal_opts, global); });

  FourierOpts fourier_opts;
  cfg_default(global.config, "model", fourier_opts.model_path);
  cfg_default(global.config, "data", fourier_opts.data_bin);
  cfg_default(global.config, "gray", fourier_opts.gray);
  cfg_default(global.config, "limit", fourier_opts.limit);
  cfg_default(global.config, "epsilon", fourier_opts.epsilon);
  cfg_default(global.config, "grid", fourier_opts.grid);
  cfg_default(global.config, "uncentered", fourier_opts.uncentered);
  cfg_default(global.config, "out_csv", fourier_opts.out_csv);
  cfg_default(global.config, "out_pgm", fourier_opts.out_pgm);
  auto* fourier_cmd = app.add_subcommand(
      "fourier", "model error-rate heatmap under Fourier basis perturbations");
  fourier_cmd->fallthrough();
  fourier_cmd->add_option("--model", fourier_opts.model_path, "model JSON");
  fourier_cmd->add_option("--data", fourier_opts.data_bin,
                          "CIFAR-10 binary batch to evaluate on");
  fourier_cmd->add_flag("--gray", fourier_opts.gray,
                        "evaluate on luma grayscale");
  fourier_cmd->add_option("--limit", fourier_opts.limit,
                          "evaluate only the first N examples (0 = all)");
  fourier_cmd->add_option("--epsilon", fourier_opts.epsilon,
                          "perturbation L2 norm in unit pixels");
  fourier_cmd->add_option("--grid", fourier_opts.grid,
                          "frequency grid, e.g. 8x8");
  fourier_cmd->add_flag("--uncentered", fourier_opts.uncentered,
                        "keep the FFT cell layout (DC at [0,0])");
  fourier_cmd->add_option("--out-csv", fourier_opts.out_csv, "heatmap CSV");
  fourier_cmd->add_option("--out-pgm", fourier_opts.out_pgm, "heatmap PGM");
  fourier_cmd->callback(
      [&] { exit_code = run_fourier(fourier_opts, global); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}
