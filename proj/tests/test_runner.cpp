#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "doctest.h"
#include "vrlab/errors.hpp"
#include "vrlab/runner.hpp"

using namespace vrlab;
using namespace vrlab::runner;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string scratch_dir() {
  const std::string dir = "/tmp/vrlab_runner_test";
  std::filesystem::create_directories(dir);
  return dir;
}

MetricsRecord sample_record() {
  MetricsRecord r;
  r.run_id = "exp1";
  r.method = "svrg";
  r.epoch = 3;
  r.fraction = 0.25;
  r.train_loss = 0.5;
  r.train_error = 0.125;
  r.var_ratio = 0.01;
  r.iter_dist = 1.5;
  r.curvature = 2.0;
  r.wall_time_s = 0.75;
  return r;
}

}  // namespace

TEST_CASE("metrics csv round-trips records exactly") {
  const std::string path = scratch_dir() + "/roundtrip.csv";
  std::vector<MetricsRecord> records;
  records.push_back(sample_record());

  MetricsRecord sparse;
  sparse.run_id = "exp1";
  sparse.method = "sgd";
  sparse.epoch = 0;
  sparse.fraction = 1.0;
  sparse.train_loss = 0.6931471805599453;
  sparse.train_error = 0.5;
  records.push_back(sparse);

  emit_metrics_csv(records, path);
  const auto loaded = read_metrics_csv(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0] == records[0]);
  CHECK(loaded[1] == records[1]);

  const std::string text = slurp(path);
  std::istringstream lines(text);
  std::string first;
  std::getline(lines, first);
  CHECK(first == kMetricsHeader);
  std::string second;
  std::getline(lines, second);
  CHECK(second == "exp1,svrg,3,0.25,0.5,0.125,0.01,1.5,2,0.75");
  std::string third;
  std::getline(lines, third);
  CHECK(third == "exp1,sgd,0,1,0.6931471805599453,0.5,,,,");
}

TEST_CASE("nan cells survive the csv format") {
  const std::string path = scratch_dir() + "/nan.csv";
  MetricsRecord r = sample_record();
  r.train_loss = std::numeric_limits<double>::quiet_NaN();
  emit_metrics_csv({r}, path);
  const auto loaded = read_metrics_csv(path);
  REQUIRE(loaded.size() == 1);
  REQUIRE(loaded[0].train_loss.has_value());
  CHECK(std::isnan(*loaded[0].train_loss));
}

TEST_CASE("metrics reader rejects malformed files") {
  const std::string dir = scratch_dir();
  CHECK_THROWS_AS(read_metrics_csv(dir + "/does_not_exist.csv"), IoError);
  CHECK_THROWS_AS(emit_metrics_csv({}, dir + "/empty.csv"), InvalidArgument);

  const auto write = [&](const char* name, const std::string& body) {
    const std::string path = dir + "/" + name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
    return path;
  };

  CHECK_THROWS_AS(read_metrics_csv(write("blank.csv", "")), ParseError);
  CHECK_THROWS_AS(
      read_metrics_csv(write("header.csv", "time,loss\n1,2\n")), ParseError);
  CHECK_THROWS_AS(
      read_metrics_csv(write(
          "cells.csv", std::string(kMetricsHeader) + "\na,sgd,0,1\n")),
      ParseError);
  CHECK_THROWS_AS(
      read_metrics_csv(write(
          "number.csv",
          std::string(kMetricsHeader) + "\na,sgd,zero,1,,,,,,\n")),
      ParseError);
}

TEST_CASE("figure names parse") {
  CHECK(parse_figure("variance_ratio") == Figure::kVarianceRatio);
  CHECK(parse_figure("distance") == Figure::kDistance);
  CHECK(parse_figure("curvature") == Figure::kCurvature);
  CHECK(parse_figure("test_error") == Figure::kTestError);
  CHECK_THROWS_AS(parse_figure("losses"), InvalidArgument);
}

TEST_CASE("plot data groups by label and sorts by x") {
  std::vector<MetricsRecord> records;
  for (int epoch : {2, 0, 1}) {
    MetricsRecord r;
    r.run_id = "exp";
    r.method = "svrg";
    r.epoch = static_cast<std::size_t>(epoch);
    r.fraction = 0.5;
    r.var_ratio = static_cast<double>(epoch) + 0.25;
    records.push_back(r);
  }
  MetricsRecord other;
  other.run_id = "exp";
  other.method = "scsg";
  other.epoch = 1;
  other.fraction = 1.0;
  other.var_ratio = 3.0;
  records.push_back(other);

  const std::string path = scratch_dir() + "/plot.txt";
  emit_plot_data(records, Figure::kVarianceRatio, path);
  const std::string expected =
      "1 3 scsg@f=1\n"
      "\n"
      "0 0.25 svrg@f=0.5\n"
      "1 1.25 svrg@f=0.5\n"
      "2 2.25 svrg@f=0.5\n";
  CHECK(slurp(path) == expected);
}

TEST_CASE("plot of a missing metric is an empty series") {
  MetricsRecord r = sample_record();
  r.curvature.reset();
  const std::string path = scratch_dir() + "/noplot.txt";
  CHECK_THROWS_AS(emit_plot_data({r}, Figure::kCurvature, path), EmptySeries);
}

TEST_CASE("test error plot keys off holdout rows") {
  MetricsRecord train = sample_record();
  train.method = "sgd";
  MetricsRecord test = train;
  test.run_id = "exp1/test";
  test.train_error = 0.25;
  const std::string path = scratch_dir() + "/test_error.txt";
  emit_plot_data({train, test}, Figure::kTestError, path);
  CHECK(slurp(path) == "3 0.25 exp1/test@sgd\n");
}

TEST_CASE("build_problem assembles shapes and splits") {
  ExperimentConfig cfg = parse_config(R"(
[problem]
n = 60
height = 4
width = 4
hidden = 10
crop = 4
pad = 1
holdout_fraction = 0.2
)");
  const BuiltProblem built = build_problem(cfg);
  CHECK(built.train.size() == 60);
  CHECK(built.holdout.size() == 12);
  CHECK(built.model.layer_sizes == std::vector<std::size_t>{16, 10, 2});
  CHECK(built.transform.crop_size == 4);
  CHECK(built.transform.pad == 1);

  ExperimentConfig logistic = parse_config(R"(
[problem]
n = 16
height = 3
width = 3
model = logistic
hidden = none
batch_norm = false
crop = 3
pad = 0
flip_probability = 0
holdout_fraction = 0
)");
  const BuiltProblem lin = build_problem(logistic);
  CHECK(lin.model.layer_sizes == std::vector<std::size_t>{9, 1});
  CHECK(lin.holdout.examples.empty());
}

TEST_CASE("experiments persist per-epoch metrics and replay exactly") {
  const std::string dir = scratch_dir();
  ExperimentConfig cfg = parse_config(R"(
[problem]
n = 48
height = 4
width = 4
hidden = 8
crop = 4
pad = 1
holdout_fraction = 0.25
[optimizer]
method = svrg
batch_size = 8
lr = 0.05
[run]
epochs = 2
lr_drops = none
seed = 5
)");
  cfg.out_dir = dir;
  cfg.run_id = "replay";

  const auto records = run_experiment(cfg);
  REQUIRE(records.size() == 4);  // 2 epochs x (train + holdout)
  CHECK(records[0].run_id == "replay");
  CHECK(records[0].method == "svrg");
  CHECK(records[0].epoch == 0);
  CHECK(records[0].fraction == 1.0);
  REQUIRE(records[0].train_loss.has_value());
  CHECK_FALSE(records[0].wall_time_s.has_value());
  CHECK(records[1].run_id == "replay/test");
  CHECK(records[3].epoch == 1);

  const std::string path = metrics_path(cfg);
  CHECK(path == dir + "/replay_metrics.csv");
  const auto loaded = read_metrics_csv(path);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    CHECK(loaded[i] == records[i]);

  const std::string bytes_first = slurp(path);
  const auto rerun = run_experiment(cfg);
  CHECK(slurp(path) == bytes_first);
  REQUIRE(rerun.size() == records.size());
  CHECK(rerun[0] == records[0]);
}

TEST_CASE("switch epoch trains sgd first") {
  ExperimentConfig cfg = parse_config(R"(
[problem]
n = 32
height = 4
width = 4
hidden = 6
crop = 4
pad = 0
flip_probability = 0
holdout_fraction = 0
[optimizer]
method = svrg
batch_size = 8
[run]
epochs = 3
switch_epoch = 2
lr_drops = none
)");
  cfg.out_dir = scratch_dir();
  cfg.run_id = "switch";
  const auto records = run_experiment(cfg);
  REQUIRE(records.size() == 3);
  CHECK(records[0].method == "sgd");
  CHECK(records[1].method == "sgd");
  CHECK(records[2].method == "svrg");
}

TEST_CASE("diverging runs leave a nan marker and rethrow") {
  ExperimentConfig cfg = parse_config(R"(
[problem]
n = 32
height = 4
width = 4
hidden = 8
crop = 4
pad = 0
flip_probability = 0
holdout_fraction = 0
batch_norm = false
[optimizer]
method = sgd
batch_size = 8
lr = 1e12
momentum = 0.9
[run]
epochs = 8
lr_drops = none
)");
  cfg.out_dir = scratch_dir();
  cfg.run_id = "boom";
  CHECK_THROWS_AS(run_experiment(cfg), NumericError);
  const auto records = read_metrics_csv(metrics_path(cfg));
  REQUIRE(!records.empty());
  REQUIRE(records.back().train_loss.has_value());
  CHECK(std::isnan(*records.back().train_loss));
}

TEST_CASE("variance scan writes its own csv") {
  ExperimentConfig cfg = parse_config(R"(
[problem]
n = 48
height = 4
width = 4
hidden = 8
crop = 4
pad = 1
holdout_fraction = 0
[optimizer]
method = svrg
batch_size = 8
lr = 0.05
[run]
epochs = 1
lr_drops = none
fractions = 0.0, 1.0
seed = 9
)");
  cfg.out_dir = scratch_dir();
  cfg.run_id = "vscan";
  const auto records = run_variance_scan(cfg);
  REQUIRE(records.size() == 2);
  CHECK(records[0].fraction == 0.0);
  REQUIRE(records[0].var_ratio.has_value());
  CHECK(*records[0].var_ratio == 0.0);
  CHECK_FALSE(records[0].train_loss.has_value());
  REQUIRE(records[1].var_ratio.has_value());
  CHECK(*records[1].var_ratio > 0.0);

  const auto loaded = read_metrics_csv(cfg.out_dir + "/vscan_variance.csv");
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0] == records[0]);

  ExperimentConfig sgd_cfg = cfg;
  sgd_cfg.method = optim::Method::kSgd;
  CHECK_THROWS_AS(run_variance_scan(sgd_cfg), InvalidArgument);
}

TEST_CASE("curvature scan writes distances and quotients") {
  ExperimentConfig cfg = parse_config(R"(
[problem]
n = 48
height = 4
width = 4
hidden = 8
crop = 4
pad = 1
holdout_fraction = 0
[optimizer]
method = svrg
batch_size = 8
lr = 0.05
[run]
epochs = 1
lr_drops = none
fractions = 0.0, 0.5, 1.0
seed = 13
)");
  cfg.out_dir = scratch_dir();
  cfg.run_id = "cscan";
  const auto records = run_curvature_scan(cfg);
  REQUIRE(records.size() == 3);
  REQUIRE(records[0].iter_dist.has_value());
  CHECK(*records[0].iter_dist == 0.0);
  CHECK_FALSE(records[0].curvature.has_value());
  REQUIRE(records[2].iter_dist.has_value());
  CHECK(*records[2].iter_dist > 0.0);
  REQUIRE(records[2].curvature.has_value());
  CHECK(*records[2].curvature > 0.0);

  const auto loaded = read_metrics_csv(cfg.out_dir + "/cscan_curvature.csv");
  REQUIRE(loaded.size() == 3);
  CHECK_FALSE(loaded[0].curvature.has_value());

  ExperimentConfig scsg_cfg = cfg;
  scsg_cfg.method = optim::Method::kScsg;
  CHECK_THROWS_AS(run_curvature_scan(scsg_cfg), InvalidArgument);
}
