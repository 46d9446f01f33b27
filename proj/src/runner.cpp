#include "vrlab/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "vrlab/errors.hpp"
#include "vrlab/instrument.hpp"
#include "vrlab/problem.hpp"
#include "vrlab/rng.hpp"

namespace vrlab::runner {

namespace {

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw NumericError("cannot format value");
  return std::string(buf, ptr);
}

std::string format_cell(const std::optional<double>& x) {
  return x ? format_double(*x) : std::string();
}

double parse_cell_double(const std::string& cell, const std::string& where) {
  double out = 0.0;
  const auto [ptr, ec] =
      std::from_chars(cell.data(), cell.data() + cell.size(), out);
  if (ec != std::errc{} || ptr != cell.data() + cell.size())
    throw ParseError(where + ": bad number '" + cell + "'");
  return out;
}

std::optional<double> parse_cell_optional(const std::string& cell,
                                          const std::string& where) {
  if (cell.empty()) return std::nullopt;
  return parse_cell_double(cell, where);
}

// Create the directory part of `path` if it is missing; a failing write
// afterwards still reports through the usual IoError path.
void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
}

}  // namespace

void emit_metrics_csv(const std::vector<MetricsRecord>& records,
                      const std::string& path) {
  if (records.empty())
    throw InvalidArgument("emit_metrics_csv: no records to write");
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write metrics file '" + path + "'");
  out << kMetricsHeader << '\n';
  for (const MetricsRecord& r : records) {
    out << r.run_id << ',' << r.method << ',' << r.epoch << ','
        << format_double(r.fraction) << ',' << format_cell(r.train_loss) << ','
        << format_cell(r.train_error) << ',' << format_cell(r.var_ratio) << ','
        << format_cell(r.iter_dist) << ',' << format_cell(r.curvature) << ','
        << format_cell(r.wall_time_s) << '\n';
  }
  if (!out) throw IoError("failed writing metrics file '" + path + "'");
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open metrics file '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw ParseError("metrics file '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader)
    throw ParseError("metrics file '" + path + "' has an unexpected header");

  std::vector<MetricsRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream row(line);
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    const std::string where = path + " line " + std::to_string(line_no);
    if (cells.size() != 10)
      throw ParseError(where + ": expected 10 cells, got " +
                       std::to_string(cells.size()));
    MetricsRecord r;
    r.run_id = cells[0];
    r.method = cells[1];
    r.epoch = static_cast<std::size_t>(
        parse_cell_double(cells[2], where));
    r.fraction = parse_cell_double(cells[3], where);
    r.train_loss = parse_cell_optional(cells[4], where);
    r.train_error = parse_cell_optional(cells[5], where);
    r.var_ratio = parse_cell_optional(cells[6], where);
    r.iter_dist = parse_cell_optional(cells[7], where);
    r.curvature = parse_cell_optional(cells[8], where);
    r.wall_time_s = parse_cell_optional(cells[9], where);
    records.push_back(std::move(r));
  }
  return records;
}

Figure parse_figure(const std::string& name) {
  if (name == "variance_ratio") return Figure::kVarianceRatio;
  if (name == "distance") return Figure::kDistance;
  if (name == "curvature") return Figure::kCurvature;
  if (name == "test_error") return Figure::kTestError;
  throw InvalidArgument("unknown figure '" + name +
                        "' (expected variance_ratio, distance, curvature or "
                        "test_error)");
}

namespace {

bool is_test_row(const MetricsRecord& r) {
  const std::string suffix = "/test";
  return r.run_id.size() > suffix.size() &&
         r.run_id.compare(r.run_id.size() - suffix.size(), suffix.size(),
                          suffix) == 0;
}

}  // namespace

void emit_plot_data(const std::vector<MetricsRecord>& records, Figure figure,
                    const std::string& path) {
  // label -> (x, y) points
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const MetricsRecord& r : records) {
    switch (figure) {
      case Figure::kVarianceRatio:
        if (r.var_ratio)
          series[r.method + "@f=" + format_double(r.fraction)].emplace_back(
              static_cast<double>(r.epoch), *r.var_ratio);
        break;
      case Figure::kDistance:
        if (r.iter_dist)
          series[r.method + "@epoch=" + std::to_string(r.epoch)].emplace_back(
              r.fraction, *r.iter_dist);
        break;
      case Figure::kCurvature:
        if (r.curvature)
          series[r.method + "@f=" + format_double(r.fraction)].emplace_back(
              static_cast<double>(r.epoch), *r.curvature);
        break;
      case Figure::kTestError:
        if (is_test_row(r) && r.train_error)
          series[r.run_id + "@" + r.method].emplace_back(
              static_cast<double>(r.epoch), *r.train_error);
        break;
    }
  }
  if (series.empty())
    throw EmptySeries("no records carry the metrics this figure needs");

  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write plot file '" + path + "'");
  bool first = true;
  for (auto& [label, points] : series) {
    if (!first) out << '\n';
    first = false;
    std::stable_sort(points.begin(), points.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [x, y] : points)
      out << format_double(x) << ' ' << format_double(y) << ' ' << label << '\n';
  }
  if (!out) throw IoError("failed writing plot file '" + path + "'");
}

namespace {

problems::Dataset subset(const problems::Dataset& d, std::size_t start,
                         std::size_t count) {
  problems::Dataset out;
  out.shape = d.shape;
  out.classes = d.classes;
  out.examples.assign(
      d.examples.begin() + static_cast<std::ptrdiff_t>(start),
      d.examples.begin() + static_cast<std::ptrdiff_t>(start + count));
  return out;
}

problems::Architecture architecture_from(const std::string& name) {
  if (name == "mlp") return problems::Architecture::kMlp;
  if (name == "logistic") return problems::Architecture::kLogistic;
  if (name == "least_squares") return problems::Architecture::kLeastSquares;
  throw InvalidArgument("unknown model '" + name + "'");
}

optim::Method effective_method(const ExperimentConfig& cfg, std::size_t epoch) {
  if (cfg.switch_epoch && epoch < *cfg.switch_epoch) return optim::Method::kSgd;
  return cfg.method;
}

std::string scan_path(const ExperimentConfig& cfg, const std::string& kind) {
  return cfg.out_dir + "/" + cfg.run_id + "_" + kind + ".csv";
}

}  // namespace

BuiltProblem build_problem(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::array<std::size_t, 3> shape{cfg.problem.height, cfg.problem.width,
                                         cfg.problem.channels};
  BuiltProblem built;
  if (!cfg.problem.dataset_path.empty()) {
    const problems::Dataset full =
        problems::load_dataset(cfg.problem.dataset_path);
    if (full.shape != shape || full.classes != cfg.problem.classes)
      throw InvalidArgument(
          "dataset file does not match the configured shape or class count");
    const auto hold = static_cast<std::size_t>(std::llround(
        cfg.problem.holdout_fraction * static_cast<double>(full.size())));
    if (hold >= full.size())
      throw InvalidArgument("holdout fraction leaves no training data");
    built.train = subset(full, 0, full.size() - hold);
    built.holdout = subset(full, full.size() - hold, hold);
  } else {
    // Generate the holdout on top of the configured n so the training sum
    // keeps exactly n terms.
    const auto hold = static_cast<std::size_t>(std::llround(
        cfg.problem.holdout_fraction * static_cast<double>(cfg.problem.n)));
    const problems::Dataset full = problems::generate_synthetic_dataset(
        cfg.problem.n + hold, shape, cfg.problem.classes,
        rng::split(cfg.seed, 77));
    built.train = subset(full, 0, cfg.problem.n);
    built.holdout = subset(full, cfg.problem.n, hold);
  }

  problems::Model model;
  model.architecture = architecture_from(cfg.problem.model);
  model.activation = cfg.problem.activation == "elu"
                         ? problems::Activation::kElu
                         : problems::Activation::kRelu;
  model.batch_norm = cfg.problem.batch_norm;
  model.bias = cfg.problem.bias;
  model.weight_decay = cfg.optimizer.weight_decay;
  const std::size_t input =
      cfg.problem.crop * cfg.problem.crop * cfg.problem.channels;
  const std::size_t output =
      model.architecture == problems::Architecture::kMlp
          ? cfg.problem.classes
          : (cfg.problem.classes == 2 ? 1 : cfg.problem.classes);
  model.layer_sizes.clear();
  model.layer_sizes.push_back(input);
  for (std::size_t h : cfg.problem.hidden) model.layer_sizes.push_back(h);
  model.layer_sizes.push_back(output);
  model.validate();
  built.model = std::move(model);

  built.transform.flip_probability = cfg.problem.flip_probability;
  built.transform.pad = cfg.problem.pad;
  built.transform.crop_size = cfg.problem.crop;
  built.transform.validate(shape);
  return built;
}

std::string metrics_path(const ExperimentConfig& cfg) {
  return scan_path(cfg, "metrics");
}

std::vector<MetricsRecord> run_experiment(const ExperimentConfig& cfg) {
  BuiltProblem built = build_problem(cfg);
  problems::FiniteSumProblem problem(built.train, built.model, built.transform);
  ParamVector w0 =
      problems::initial_params(built.model, rng::split(cfg.seed, 11));
  optim::TrainLoop loop(problem, cfg.optimizer, effective_method(cfg, 0),
                        rng::split(cfg.seed, 22), std::move(w0));

  const std::string path = metrics_path(cfg);
  std::vector<MetricsRecord> records;
  try {
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      loop.set_method(effective_method(cfg, e));
      loop.set_learning_rate(
          optim::schedule_lr(e, cfg.optimizer.learning_rate, cfg.lr_drops));
      const auto start = std::chrono::steady_clock::now();
      loop.run_epoch();
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();

      const auto train_eval =
          problem.evaluate(loop.state().w, cfg.optimizer.batch_size);
      MetricsRecord rec;
      rec.run_id = cfg.run_id;
      rec.method = optim::method_name(loop.method());
      rec.epoch = e;
      rec.fraction = 1.0;
      rec.train_loss = train_eval.loss;
      rec.train_error = train_eval.error;
      if (cfg.record_wall_time) rec.wall_time_s = seconds;
      records.push_back(std::move(rec));

      if (!built.holdout.examples.empty()) {
        const auto test_eval = problem.evaluate(
            loop.state().w, built.holdout, cfg.optimizer.batch_size);
        MetricsRecord test = records.back();
        test.run_id = cfg.run_id + "/test";
        test.train_loss = test_eval.loss;
        test.train_error = test_eval.error;
        test.wall_time_s.reset();
        records.push_back(std::move(test));
      }
      emit_metrics_csv(records, path);
    }
  } catch (const NumericError&) {
    MetricsRecord err;
    err.run_id = cfg.run_id;
    err.method = optim::method_name(loop.method());
    err.epoch = loop.state().epoch;
    err.fraction = 1.0;
    err.train_loss = std::numeric_limits<double>::quiet_NaN();
    err.train_error = std::numeric_limits<double>::quiet_NaN();
    records.push_back(std::move(err));
    emit_metrics_csv(records, path);
    throw;
  }
  return records;
}

std::vector<MetricsRecord> run_variance_scan(const ExperimentConfig& cfg) {
  BuiltProblem built = build_problem(cfg);
  const optim::Method scan_method = effective_method(cfg, cfg.epochs);
  if (scan_method == optim::Method::kSgd)
    throw InvalidArgument(
        "variance scan: configure a variance-reduced method");

  problems::FiniteSumProblem problem(built.train, built.model, built.transform);
  ParamVector w0 =
      problems::initial_params(built.model, rng::split(cfg.seed, 11));
  optim::TrainLoop loop(problem, cfg.optimizer, effective_method(cfg, 0),
                        rng::split(cfg.seed, 22), std::move(w0));
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    loop.set_method(effective_method(cfg, e));
    loop.set_learning_rate(
        optim::schedule_lr(e, cfg.optimizer.learning_rate, cfg.lr_drops));
    loop.run_epoch();
  }
  loop.set_method(scan_method);
  loop.set_learning_rate(optim::schedule_lr(cfg.epochs, cfg.optimizer.learning_rate,
                                            cfg.lr_drops));
  const std::vector<instrument::VarianceReport> reports =
      instrument::variance_ratio_scan(loop, cfg.fractions,
                                      rng::split(cfg.seed, 33));

  std::vector<MetricsRecord> records;
  for (const instrument::VarianceReport& report : reports) {
    MetricsRecord rec;
    rec.run_id = cfg.run_id;
    rec.method = optim::method_name(scan_method);
    rec.epoch = report.epoch;
    rec.fraction = report.fraction;
    rec.var_ratio = report.ratio;
    records.push_back(std::move(rec));
  }
  if (!records.empty()) emit_metrics_csv(records, scan_path(cfg, "variance"));
  return records;
}

std::vector<MetricsRecord> run_curvature_scan(const ExperimentConfig& cfg) {
  BuiltProblem built = build_problem(cfg);
  const optim::Method scan_method = effective_method(cfg, cfg.epochs);
  if (scan_method != optim::Method::kSvrg)
    throw InvalidArgument("curvature scan: configure method svrg");

  problems::FiniteSumProblem problem(built.train, built.model, built.transform);
  ParamVector w0 =
      problems::initial_params(built.model, rng::split(cfg.seed, 11));
  optim::TrainLoop loop(problem, cfg.optimizer, effective_method(cfg, 0),
                        rng::split(cfg.seed, 22), std::move(w0));
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    loop.set_method(effective_method(cfg, e));
    loop.set_learning_rate(
        optim::schedule_lr(e, cfg.optimizer.learning_rate, cfg.lr_drops));
    loop.run_epoch();
  }
  loop.set_method(scan_method);
  loop.set_learning_rate(optim::schedule_lr(cfg.epochs, cfg.optimizer.learning_rate,
                                            cfg.lr_drops));
  const std::vector<instrument::CurvatureReport> reports =
      instrument::curvature_scan(loop, cfg.fractions, rng::split(cfg.seed, 44));

  std::vector<MetricsRecord> records;
  for (const instrument::CurvatureReport& report : reports) {
    MetricsRecord rec;
    rec.run_id = cfg.run_id;
    rec.method = optim::method_name(scan_method);
    rec.epoch = report.epoch;
    rec.fraction = report.fraction;
    rec.iter_dist = report.distance;
    rec.curvature = report.curvature;
    records.push_back(std::move(rec));
  }
  if (!records.empty()) emit_metrics_csv(records, scan_path(cfg, "curvature"));
  return records;
}

}  // namespace vrlab::runner
