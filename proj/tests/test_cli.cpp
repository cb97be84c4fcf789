#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "augmix/image_io.hpp"
#include "augmix/metrics.hpp"
#include "augmix/model_io.hpp"
#include "augmix/rng.hpp"
#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;
using augmix::Image;
using augmix::LabeledDataset;
using augmix::PhiloxRng;
using augmix_test::TempDir;
using nlohmann::json;

struct CliRun {
  int exit_code = -1;
  std::string stdout_text;
  std::string stderr_text;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliRun run_cli(const TempDir& dir, const std::string& args) {
  const std::string out = dir.path("cli_stdout.txt");
  const std::string err = dir.path("cli_stderr.txt");
  const std::string cmd =
      std::string(AUGMIX_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
  const int raw = std::system(cmd.c_str());
  CliRun result;
  result.exit_code = WEXITSTATUS(raw);
  result.stdout_text = slurp(out);
  result.stderr_text = slurp(err);
  return result;
}

json parse_stdout(const CliRun& run) { return json::parse(run.stdout_text); }

// Two-class 32x32x3 dataset in the CIFAR container: vertical vs horizontal
// bright bars on a dark background.
LabeledDataset bar_cifar(int per_class, std::uint64_t seed) {
  LabeledDataset ds;
  ds.num_classes = 10;
  PhiloxRng rng(seed);
  for (int i = 0; i < per_class; ++i) {
    for (int cls = 0; cls < 2; ++cls) {
      Image img = augmix::Image::filled(32, 32, 3, 0.1);
      const int pos = 4 + static_cast<int>(rng.uniform_index(24));
      for (int t = 0; t < 32; ++t) {
        for (int w = -1; w <= 1; ++w) {
          const int r = cls == 0 ? t : pos + w;
          const int c = cls == 0 ? pos + w : t;
          if (r >= 0 && r < 32 && c >= 0 && c < 32)
            for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = 0.9;
        }
      }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(cls);
    }
  }
  return ds;
}

TEST(CliAugment, WritesDeterministicVariantsAndManifest) {
  TempDir dir("cli_augment");
  fs::create_directories(dir.path("in"));
  PhiloxRng rng(1);
  augmix::save_image(augmix_test::random_image(rng, 16, 16, 3),
                     dir.path("in/alpha.png"));
  augmix::save_image(augmix_test::random_image(rng, 16, 16, 1),
                     dir.path("in/beta.pgm"));

  const std::string args = "augment --input " + dir.path("in") +
                           " --out-dir " + dir.path("out1") +
                           " --count 2 --seed 5";
  const CliRun first = run_cli(dir, args);
  ASSERT_EQ(first.exit_code, 0) << first.stderr_text;
  EXPECT_TRUE(fs::exists(dir.path("out1/alpha_augmix_0.png")));
  EXPECT_TRUE(fs::exists(dir.path("out1/alpha_augmix_1.png")));
  EXPECT_TRUE(fs::exists(dir.path("out1/beta_augmix_0.png")));
  EXPECT_TRUE(fs::exists(dir.path("out1/augmix_manifest.json")));

  const json report = parse_stdout(first);
  EXPECT_EQ(report.at("command"), "augment");
  EXPECT_EQ(report.at("seed").get<std::uint64_t>(), 5u);
  EXPECT_EQ(report.at("config").at("k").get<int>(), 3);
  EXPECT_DOUBLE_EQ(report.at("config").at("alpha").get<double>(), 1.0);
  EXPECT_EQ(report.at("config").at("max_depth").get<int>(), 3);
  EXPECT_EQ(report.at("results").at("images_written").get<int>(), 4);

  const std::string args2 = "augment --input " + dir.path("in") +
                            " --out-dir " + dir.path("out2") +
                            " --count 2 --seed 5";
  ASSERT_EQ(run_cli(dir, args2).exit_code, 0);
  for (const char* name :
       {"alpha_augmix_0.png", "alpha_augmix_1.png", "beta_augmix_0.png",
        "beta_augmix_1.png"}) {
    EXPECT_EQ(slurp(dir.path("out1/") + name), slurp(dir.path("out2/") + name))
        << name;
  }

  // a different seed must change the bytes
  const std::string args3 = "augment --input " + dir.path("in") +
                            " --out-dir " + dir.path("out3") +
                            " --count 1 --seed 6";
  ASSERT_EQ(run_cli(dir, args3).exit_code, 0);
  EXPECT_NE(slurp(dir.path("out1/alpha_augmix_0.png")),
            slurp(dir.path("out3/alpha_augmix_0.png")));
}

TEST(CliAugment, CountZeroEmitsOnlyTheManifest) {
  TempDir dir("cli_augment0");
  fs::create_directories(dir.path("in"));
  PhiloxRng rng(2);
  augmix::save_image(augmix_test::random_image(rng, 8, 8, 1),
                     dir.path("in/x.png"));
  const CliRun run = run_cli(dir, "augment --input " + dir.path("in") +
                                      " --out-dir " + dir.path("out") +
                                      " --count 0");
  ASSERT_EQ(run.exit_code, 0);
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir.path("out"))) {
    ++files;
    EXPECT_EQ(entry.path().filename().string(), "augmix_manifest.json");
  }
  EXPECT_EQ(files, 1);
}

TEST(CliAugment, ErrorCodesDistinguishValidationFromIo) {
  TempDir dir("cli_augment_err");
  // unknown flag -> parse error -> 1
  EXPECT_EQ(run_cli(dir, "augment --nope").exit_code, 1);
  // bad op name -> validation -> 1
  fs::create_directories(dir.path("in"));
  PhiloxRng rng(3);
  augmix::save_image(augmix_test::random_image(rng, 4, 4, 1),
                     dir.path("in/x.png"));
  EXPECT_EQ(run_cli(dir, "augment --input " + dir.path("in") + " --out-dir " +
                             dir.path("out") + " --ops bogus")
                .exit_code,
            1);
  // missing input -> I/O error -> 2
  EXPECT_EQ(run_cli(dir, "augment --input " + dir.path("missing") +
                             " --out-dir " + dir.path("out"))
                .exit_code,
            2);
  EXPECT_EQ(run_cli(dir, "not-a-subcommand").exit_code, 1);
}

TEST(CliIngest, SummarizesFiltersAndRelabels) {
  TempDir dir("cli_ingest");
  LabeledDataset ds;
  ds.num_classes = 10;
  PhiloxRng rng(4);
  const std::vector<int> labels = {0, 3, 5, 3, 5, 5, 9};
  for (const int label : labels) {
    ds.images.push_back(
        augmix_test::quantized(augmix_test::random_image(rng, 32, 32, 3)));
    ds.labels.push_back(label);
  }
  augmix::write_cifar10(ds, dir.path("batch.bin"));

  const CliRun summary = run_cli(dir, "ingest --input " + dir.path("batch.bin"));
  ASSERT_EQ(summary.exit_code, 0) << summary.stderr_text;
  EXPECT_EQ(parse_stdout(summary).at("results").at("examples").get<int>(), 7);

  const CliRun subset = run_cli(
      dir, "ingest --input " + dir.path("batch.bin") +
               " --classes 3,5 --relabel --take-per-class 2 --out-bin " +
               dir.path("subset.bin"));
  ASSERT_EQ(subset.exit_code, 0) << subset.stderr_text;
  const json report = parse_stdout(subset);
  EXPECT_EQ(report.at("results").at("examples").get<int>(), 4);
  EXPECT_EQ(report.at("results").at("num_classes").get<int>(), 2);

  const LabeledDataset back = augmix::ingest_cifar10(dir.path("subset.bin"));
  ASSERT_EQ(back.size(), 4u);
  for (const int label : back.labels) EXPECT_LT(label, 2);

  EXPECT_EQ(run_cli(dir, "ingest --input " + dir.path("nope.bin")).exit_code,
            2);
}

TEST(CliTrain, TrainsEvaluatesAndWritesArtifacts) {
  TempDir dir("cli_train");
  augmix::write_cifar10(bar_cifar(20, 10), dir.path("train.bin"));
  augmix::write_cifar10(bar_cifar(10, 11), dir.path("test.bin"));

  const CliRun run = run_cli(
      dir, "train --data " + dir.path("train.bin") + " --test " +
               dir.path("test.bin") +
               " --gray --epochs 3 --batch-size 8 --lr 0.3 --mode none"
               " --model-out " + dir.path("model.json") + " --preds-out " +
               dir.path("preds.csv") + " --seed 3");
  ASSERT_EQ(run.exit_code, 0) << run.stderr_text;
  const json report = parse_stdout(run);
  EXPECT_TRUE(report.at("results").contains("train_error"));
  EXPECT_TRUE(report.at("results").contains("test_error"));
  EXPECT_EQ(report.at("results").at("epoch_loss").size(), 3u);

  const augmix::LinearModel model =
      augmix::load_model_json(dir.path("model.json"));
  EXPECT_EQ(model.num_classes, 10);
  EXPECT_EQ(model.input_dim, 1024);

  const auto preds = augmix::read_prediction_csv(dir.path("preds.csv"));
  EXPECT_EQ(preds.size(), 20u);
  EXPECT_EQ(preds.front().posterior.size(), 10u);
}

TEST(CliTrain, LadderEmitsOneReportPerRow) {
  TempDir dir("cli_ladder");
  augmix::write_cifar10(bar_cifar(6, 12), dir.path("train.bin"));
  {
    std::ofstream out(dir.path("ladder.json"));
    out << R"({"rows": [
      {"name": "standard", "mode": "none", "jsd": false},
      {"name": "chains", "mode": "chain", "jsd": false},
      {"name": "chains_jsd", "mode": "chain", "jsd": true},
      {"name": "augmix_jsd", "mode": "augmix", "jsd": true}
    ]})";
  }
  const CliRun run = run_cli(
      dir, "train --data " + dir.path("train.bin") +
               " --gray --epochs 1 --batch-size 6 --ladder " +
               dir.path("ladder.json") + " --ladder-out-dir " +
               dir.path("rows") + " --seed 4");
  ASSERT_EQ(run.exit_code, 0) << run.stderr_text;
  const json summary = parse_stdout(run);
  EXPECT_EQ(summary.at("results").at("rows").size(), 4u);
  for (const char* name : {"standard", "chains", "chains_jsd", "augmix_jsd"}) {
    const std::string path = dir.path("rows/") + name + ".json";
    ASSERT_TRUE(fs::exists(path)) << path;
    const json row = json::parse(slurp(path));
    EXPECT_EQ(row.at("config").at("row_name"), name);
    EXPECT_TRUE(row.at("results").contains("train_error"));
  }
  EXPECT_EQ(json::parse(slurp(dir.path("rows/chains_jsd.json")))
                .at("config").at("jsd").get<bool>(),
            true);
}

void write_preds_csv(const std::string& path, int n, double error_rate) {
  std::ofstream out(path);
  out << "example_id,true_label,pred_label,confidence\n";
  const int wrong = static_cast<int>(n * error_rate + 0.5);
  for (int i = 0; i < n; ++i)
    out << i << ",1," << (i < wrong ? 0 : 1) << ",0.8\n";
}

TEST(CliEvalCorruption, SelfNormalizationGivesExactlyHundred) {
  TempDir dir("cli_corr");
  const std::vector<std::string> corruptions = {"fog", "shot_noise"};
  double err = 0.1;
  for (const std::string& name : corruptions) {
    for (int severity = 1; severity <= 5; ++severity) {
      const fs::path d = fs::path(dir.path("preds")) / name /
                         std::to_string(severity);
      fs::create_directories(d);
      write_preds_csv((d / "preds.csv").string(), 50,
                      err + 0.05 * severity);
    }
    err += 0.2;
  }

  const CliRun dump = run_cli(
      dir, "eval-corruption --preds-dir " + dir.path("preds") +
               " --dump-baseline " + dir.path("baseline.json"));
  ASSERT_EQ(dump.exit_code, 0) << dump.stderr_text;
  const json no_baseline = parse_stdout(dump);
  EXPECT_FALSE(no_baseline.at("results").contains("mce"));
  EXPECT_TRUE(no_baseline.at("results").at("corruptions").contains("fog"));

  const CliRun normalized = run_cli(
      dir, "eval-corruption --preds-dir " + dir.path("preds") +
               " --baseline " + dir.path("baseline.json"));
  ASSERT_EQ(normalized.exit_code, 0) << normalized.stderr_text;
  const json report = parse_stdout(normalized);
  EXPECT_EQ(report.at("results").at("mce").get<double>(), 100.0);
  EXPECT_EQ(report.at("results")
                .at("corruptions").at("fog").at("ce").get<double>(),
            100.0);

  EXPECT_EQ(run_cli(dir, "eval-corruption --preds-dir " + dir.path("nope"))
                .exit_code,
            2);
}

TEST(CliEvalPerturbation, FlipRatesAndSelfNormalization) {
  TempDir dir("cli_pert");
  fs::create_directories(dir.path("streams"));
  {
    std::ofstream out(dir.path("streams/tilt.csv"));
    out << "video_id,frame_index,pred_label\n";
    // video a: 2 flips over 4 pairs; video b: constant
    const std::vector<int> a = {0, 1, 1, 0, 0};
    for (std::size_t t = 0; t < a.size(); ++t)
      out << "a," << t << "," << a[t] << "\n";
    for (int t = 0; t < 5; ++t) out << "b," << t << ",3\n";
  }
  {
    std::ofstream out(dir.path("streams/scale.csv"));
    out << "video_id,frame_index,pred_label\n";
    const std::vector<int> v = {0, 1, 0, 1, 0};  // 4 flips over 4 pairs
    for (std::size_t t = 0; t < v.size(); ++t)
      out << "v," << t << "," << v[t] << "\n";
  }

  const CliRun dump = run_cli(
      dir, "eval-perturbation --streams-dir " + dir.path("streams") +
               " --dump-baseline " + dir.path("baseline.json"));
  ASSERT_EQ(dump.exit_code, 0) << dump.stderr_text;
  const json report = parse_stdout(dump);
  // tilt: mean(0.5, 0) = 0.25; scale: 1.0 -> mFP 0.625
  EXPECT_DOUBLE_EQ(report.at("results").at("mfp").get<double>(), 0.625);

  const CliRun normalized = run_cli(
      dir, "eval-perturbation --streams-dir " + dir.path("streams") +
               " --baseline " + dir.path("baseline.json"));
  ASSERT_EQ(normalized.exit_code, 0) << normalized.stderr_text;
  EXPECT_EQ(parse_stdout(normalized).at("results").at("mfr").get<double>(),
            100.0);
}

TEST(CliCalibrate, ScoresFixturesThroughTheCsvPath) {
  TempDir dir("cli_cal");
  {
    std::vector<augmix::PredictionRecord> records;
    PhiloxRng rng(20);
    for (int i = 0; i < 10000; ++i) {
      augmix::PredictionRecord r;
      r.example_id = i;
      r.confidence = rng.next_double();
      r.true_label = 1;
      r.pred_label = rng.next_double() < r.confidence ? 1 : 0;
      records.push_back(r);
    }
    augmix::write_prediction_csv(records, dir.path("calibrated.csv"));
  }
  const CliRun calibrated = run_cli(
      dir, "calibrate --preds " + dir.path("calibrated.csv") +
               " --bin-size 1000");
  ASSERT_EQ(calibrated.exit_code, 0) << calibrated.stderr_text;
  EXPECT_LT(parse_stdout(calibrated).at("results").at("rmsce").get<double>(),
            0.02);

  {
    std::vector<augmix::PredictionRecord> records;
    for (int i = 0; i < 1000; ++i) {
      augmix::PredictionRecord r;
      r.example_id = i;
      r.confidence = 1.0;
      r.true_label = 1;
      r.pred_label = i % 2;
      records.push_back(r);
    }
    augmix::write_prediction_csv(records, dir.path("overconfident.csv"));
  }
  const CliRun over = run_cli(
      dir, "calibrate --preds " + dir.path("overconfident.csv"));
  ASSERT_EQ(over.exit_code, 0);
  const json report = parse_stdout(over);
  EXPECT_EQ(report.at("results").at("rmsce").get<double>(), 0.5);
  EXPECT_EQ(report.at("results").at("brier").get<double>(), 0.5);
}

TEST(CliFourier, ZeroEpsilonHeatmapEqualsCleanError) {
  TempDir dir("cli_fourier");
  augmix::write_cifar10(bar_cifar(10, 13), dir.path("train.bin"));
  ASSERT_EQ(run_cli(dir, "train --data " + dir.path("train.bin") +
                             " --gray --epochs 3 --lr 0.3 --model-out " +
                             dir.path("model.json") + " --seed 5")
                .exit_code,
            0);

  const CliRun run = run_cli(
      dir, "fourier --model " + dir.path("model.json") + " --data " +
               dir.path("train.bin") +
               " --gray --epsilon 0 --grid 4x4 --out-csv " +
               dir.path("map.csv") + " --out-pgm " + dir.path("map.pgm"));
  ASSERT_EQ(run.exit_code, 0) << run.stderr_text;
  const json report = parse_stdout(run);
  const double clean = report.at("results").at("clean_error").get<double>();
  const auto grid = report.at("results").at("grid").get<std::vector<double>>();
  ASSERT_EQ(grid.size(), 16u);
  for (const double cell : grid) EXPECT_EQ(cell, clean);
  EXPECT_TRUE(fs::exists(dir.path("map.csv")));
  EXPECT_TRUE(fs::exists(dir.path("map.pgm")));
  EXPECT_EQ(run_cli(dir, "fourier --model " + dir.path("model.json") +
                             " --data " + dir.path("train.bin") +
                             " --grid bogus")
                .exit_code,
            1);
}

TEST(CliConfig, ReportsReproduceBitForBitFromTheirOwnConfig) {
  TempDir dir("cli_config");
  {
    std::vector<augmix::PredictionRecord> records;
    PhiloxRng rng(30);
    for (int i = 0; i < 500; ++i) {
      augmix::PredictionRecord r;
      r.example_id = i;
      r.confidence = rng.next_double();
      r.true_label = 1;
      r.pred_label = rng.next_double() < r.confidence ? 1 : 0;
      records.push_back(r);
    }
    augmix::write_prediction_csv(records, dir.path("preds.csv"));
  }
  ASSERT_EQ(run_cli(dir, "calibrate --preds " + dir.path("preds.csv") +
                             " --bin-size 50 --out " + dir.path("r1.json"))
                .exit_code,
            0);
  ASSERT_EQ(run_cli(dir, "calibrate --config " + dir.path("r1.json") +
                             " --out " + dir.path("r2.json"))
                .exit_code,
            0);
  EXPECT_EQ(slurp(dir.path("r1.json")), slurp(dir.path("r2.json")));

  // the config block must refuse a mismatched subcommand
  EXPECT_EQ(run_cli(dir, "fourier --config " + dir.path("r1.json")).exit_code,
            1);

  // augment runs reproduce from their own manifest
  fs::create_directories(dir.path("in"));
  PhiloxRng rng(31);
  augmix::save_image(augmix_test::random_image(rng, 12, 12, 3),
                     dir.path("in/img.png"));
  ASSERT_EQ(run_cli(dir, "augment --input " + dir.path("in") +
                             " --out-dir " + dir.path("outA") +
                             " --count 1 --seed 77")
                .exit_code,
            0);
  ASSERT_EQ(
      run_cli(dir, "augment --config " + dir.path("outA/augmix_manifest.json") +
                       " --out-dir " + dir.path("outB"))
          .exit_code,
      0);
  EXPECT_EQ(slurp(dir.path("outA/img_augmix_0.png")),
            slurp(dir.path("outB/img_augmix_0.png")));
}

}  // namespace
