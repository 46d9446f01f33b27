#include "vrlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <string_view>

#include "vrlab/errors.hpp"

namespace vrlab::runner {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string strip_comment(std::string_view s) {
  const auto pos = s.find_first_of("#;");
  return std::string(pos == std::string_view::npos ? s : s.substr(0, pos));
}

std::uint64_t parse_u64(const std::string& v, const std::string& where) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ParseError(where + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

std::size_t parse_count(const std::string& v, const std::string& where) {
  return static_cast<std::size_t>(parse_u64(v, where));
}

double parse_real(const std::string& v, const std::string& where) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ParseError(where + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError(where + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) parts.push_back(trim(item));
  return parts;
}

std::vector<std::size_t> parse_count_list(const std::string& v,
                                          const std::string& where) {
  std::vector<std::size_t> out;
  if (trim(v).empty() || trim(v) == "none") return out;
  for (const std::string& part : split_list(v))
    out.push_back(parse_count(part, where));
  return out;
}

std::vector<double> parse_real_list(const std::string& v,
                                    const std::string& where) {
  std::vector<double> out;
  if (trim(v).empty() || trim(v) == "none") return out;
  for (const std::string& part : split_list(v))
    out.push_back(parse_real(part, where));
  return out;
}

std::vector<std::pair<std::size_t, double>> parse_drops(
    const std::string& v, const std::string& where) {
  std::vector<std::pair<std::size_t, double>> out;
  if (trim(v).empty() || trim(v) == "none") return out;
  for (const std::string& part : split_list(v)) {
    const auto colon = part.find(':');
    if (colon == std::string::npos)
      throw ParseError(where + ": expected epoch:factor, got '" + part + "'");
    out.emplace_back(parse_count(trim(part.substr(0, colon)), where),
                     parse_real(trim(part.substr(colon + 1)), where));
  }
  return out;
}

using Setter =
    std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

struct KeySpec {
  std::string_view section;
  std::string_view key;
  Setter set;
};

void check_range(bool ok, const std::string& where, const std::string& message) {
  if (!ok) throw ParseError(where + ": " + message);
}

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"problem", "n",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.problem.n = parse_count(v, w);
         check_range(c.problem.n >= 1, w, "n must be >= 1");
       }},
      {"problem", "height",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.problem.height = parse_count(v, w);
         check_range(c.problem.height >= 1, w, "height must be >= 1");
       }},
      {"problem", "width",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.problem.width = parse_count(v, w);
         check_range(c.problem.width >= 1, w, "width must be >= 1");
       }},
      {"problem", "channels",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.problem.channels = parse_count(v, w);
         check_range(c.problem.channels >= 1, w, "channels must be >= 1");
       }},
      {"problem", "classes",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.problem.classes = parse_count(v, w);
         check_range(c.problem.classes >= 2, w, "classes must be >= 2");
       }},
      {"problem", "dataset",
       [](ExperimentConfig& c, const std::string& v, const std::string&) {
         c.problem.dataset_path = v;
       }},
      {"problem", "model",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         check_range(v == "mlp" || v == "logistic" || v == "least_squares", w,
                     "model must be mlp, logistic or least_squares");
         c.problem.model = v;
       }},
      {"problem", "hidden",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.problem.hidden = parse_count_list(v, w);
       }},
      {"problem", "activation",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         check_range(v == "relu" || v == "elu", w,
                     "activation must be relu or elu");
         c.problem.activation = v;
       }},
      {"problem", "batch_norm",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.problem.batch_norm = parse_bool(v, w);
       }},
      {"problem", "bias",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.problem.bias = parse_bool(v, w);
       }},
      {"problem", "flip_probability",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.problem.flip_probability = parse_real(v, w);
         check_range(c.problem.flip_probability >= 0.0 &&
                         c.problem.flip_probability <= 1.0,
                     w, "flip_probability must lie in [0,1]");
       }},
      {"problem", "pad",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.problem.pad = parse_count(v, w);
       }},
      {"problem", "crop",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.problem.crop = parse_count(v, w);
         check_range(c.problem.crop >= 1, w, "crop must be >= 1");
       }},
      {"problem", "holdout_fraction",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.problem.holdout_fraction = parse_real(v, w);
         check_range(c.problem.holdout_fraction >= 0.0 &&
                         c.problem.holdout_fraction < 1.0,
                     w, "holdout_fraction must lie in [0,1)");
       }},
      {"optimizer", "method",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         try {
           c.method = optim::parse_method(v);
         } catch (const InvalidArgument&) {
           throw ParseError(w + ": method must be sgd, svrg, streaming or scsg");
         }
       }},
      {"optimizer", "lr",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.optimizer.learning_rate = parse_real(v, w);
         check_range(c.optimizer.learning_rate > 0.0, w, "lr must be > 0");
       }},
      {"optimizer", "momentum",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.optimizer.momentum = parse_real(v, w);
         check_range(c.optimizer.momentum >= 0.0 && c.optimizer.momentum < 1.0,
                     w, "momentum must lie in [0,1)");
       }},
      {"optimizer", "batch_size",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.optimizer.batch_size = parse_count(v, w);
         check_range(c.optimizer.batch_size >= 1, w, "batch_size must be >= 1");
       }},
      {"optimizer", "weight_decay",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.optimizer.weight_decay = parse_real(v, w);
         check_range(c.optimizer.weight_decay >= 0.0, w,
                     "weight_decay must be >= 0");
       }},
      {"optimizer", "snapshot_interval",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.optimizer.snapshot_interval = parse_count(v, w);
       }},
      {"optimizer", "mega_batch",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.optimizer.mega_batch = parse_count(v, w);
         check_range(c.optimizer.mega_batch >= 1, w, "mega_batch must be >= 1");
       }},
      {"optimizer", "inner_steps",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.optimizer.inner_steps = parse_count(v, w);
         check_range(c.optimizer.inner_steps >= 1, w, "inner_steps must be >= 1");
       }},
      {"optimizer", "tail_average",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.optimizer.tail_average = parse_bool(v, w);
       }},
      {"optimizer", "tail_average_fraction",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.optimizer.tail_average_fraction = parse_real(v, w);
         check_range(c.optimizer.tail_average_fraction > 0.0 &&
                         c.optimizer.tail_average_fraction <= 1.0,
                     w, "tail_average_fraction must lie in (0,1]");
       }},
      {"optimizer", "snapshot_updates_bn",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.optimizer.snapshot_updates_bn = parse_bool(v, w);
       }},
      {"run", "epochs",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.epochs = parse_count(v, w);
         check_range(c.epochs >= 1, w, "epochs must be >= 1");
       }},
      {"run", "lr_drops",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.lr_drops = parse_drops(v, w);
       }},
      {"run", "switch_epoch",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         if (trim(v).empty() || v == "none")
           c.switch_epoch.reset();
         else
           c.switch_epoch = parse_count(v, w);
       }},
      {"run", "seed",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.seed = parse_u64(v, w);
       }},
      {"run", "fractions",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.fractions = parse_real_list(v, w);
         for (double f : c.fractions)
           check_range(f >= 0.0 && f <= 1.0, w, "fractions must lie in [0,1]");
         check_range(std::is_sorted(c.fractions.begin(), c.fractions.end()), w,
                     "fractions must be sorted ascending");
       }},
      {"run", "record_wall_time",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         c.record_wall_time = parse_bool(v, w);
       }},
      {"output", "out_dir",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         check_range(!v.empty(), w, "out_dir must not be empty");
         c.out_dir = v;
       }},
      {"output", "run_id",
       [](ExperimentConfig& c, const std::string& v, const std::string& w) {
         check_range(!v.empty() &&
                         v.find_first_of(",/\" \t\n") == std::string::npos,
                     w, "run_id must be nonempty without commas, slashes, "
                        "quotes or whitespace");
         c.run_id = v;
       }},
  };
  return table;
}

void assign(ExperimentConfig& cfg, const std::string& section,
            const std::string& key, const std::string& value,
            const std::string& where) {
  const KeySpec* match = nullptr;
  for (const KeySpec& spec : key_table()) {
    if (spec.key != key) continue;
    if (!section.empty() && spec.section != section) continue;
    match = &spec;
    break;
  }
  if (match == nullptr) {
    if (section.empty())
      throw ParseError(where + ": unknown key '" + key + "'");
    throw ParseError(where + ": unknown key '" + key + "' in section [" +
                     section + "]");
  }
  match->set(cfg, value, where + ": key '" + key + "'");
}

bool known_section(const std::string& name) {
  for (const KeySpec& spec : key_table())
    if (spec.section == name) return true;
  return false;
}

}  // namespace

void ExperimentConfig::validate() const {
  optimizer.validate();
  if (epochs == 0) throw InvalidArgument("config: epochs must be >= 1");
  if (problem.n == 0) throw InvalidArgument("config: n must be >= 1");
  if (problem.classes < 2) throw InvalidArgument("config: classes must be >= 2");
  if (!std::is_sorted(lr_drops.begin(), lr_drops.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; }))
    throw InvalidArgument("config: lr_drops must be sorted by epoch");
  for (const auto& [epoch, factor] : lr_drops)
    if (!(factor > 0.0))
      throw InvalidArgument("config: lr drop factors must be > 0");
  for (double f : fractions)
    if (!(f >= 0.0 && f <= 1.0))
      throw InvalidArgument("config: fractions must lie in [0,1]");
  if (!std::is_sorted(fractions.begin(), fractions.end()))
    throw InvalidArgument("config: fractions must be sorted ascending");
  if (run_id.empty()) throw InvalidArgument("config: run_id must not be empty");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ParseError(where + ": malformed section header '" + t + "'");
      section = trim(t.substr(1, t.size() - 2));
      if (!known_section(section))
        throw ParseError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError(where + ": expected key=value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key");
    assign(cfg, section, key, value, where);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ParseError("override '" + assignment + "': expected key=value");
  std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  std::string section;
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    section = key.substr(0, dot);
    key = key.substr(dot + 1);
    if (!known_section(section))
      throw ParseError("override '" + assignment + "': unknown section '" +
                       section + "'");
  }
  if (key.empty()) throw ParseError("override '" + assignment + "': empty key");
  assign(cfg, section, key, value, "override '" + assignment + "'");
  cfg.validate();
}

}  // namespace vrlab::runner
