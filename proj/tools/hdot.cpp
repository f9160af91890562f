// hdot: command-line front end for the hdot library.
//
// Exit codes: 0 success, 2 usage error, 3 data or validation error,
// 4 numeric failure.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hdot/hdot.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw hdot::DataError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw hdot::DataError("cannot write " + path);
  out << text;
  if (!out) throw hdot::DataError("write failed: " + path);
}

hdot::Taxonomy load_tree(const std::string& path) {
  try {
    return hdot::Taxonomy::parse(read_file(path));
  } catch (const hdot::ParseError& e) {
    throw hdot::DataError(path + ": " + e.what());
  }
}

hdot::Dataset load_data(const std::string& path) {
  try {
    return hdot::Dataset::from_csv(read_file(path));
  } catch (const hdot::ParseError& e) {
    throw hdot::DataError(path + ": " + e.what());
  }
}

// Shortest text that reads back as the same double.
std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Applies a key=value file to `app`: each key names a long option, and
/// options already given on the command line keep their values.
void apply_config(CLI::App* app, const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    const std::string where = path + ": line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw CLI::ConfigError(where + "expected key=value");
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t\r");
      const auto e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "config") throw CLI::ConfigError(where + "nested config");
    CLI::Option* opt = nullptr;
    try {
      opt = app->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw CLI::ConfigError(where + "unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

// ---------------------------------------------------------------------------

struct TrainFlags {
  double lr = hdot::TrainConfig{}.lr;
  std::size_t batch_size = hdot::TrainConfig{}.batch_size;
  std::size_t epochs = hdot::TrainConfig{}.epochs;
  std::size_t hidden = hdot::TrainConfig{}.hidden;
  std::string optimizer = "adam";
  std::string loss = "dot";
  std::string weights = "eq3-magnitude";
  std::string init = "zero-heads";
  std::string transform = "identity";

  hdot::TrainConfig resolve() const {
    hdot::TrainConfig c;
    c.lr = lr;
    c.batch_size = batch_size;
    c.epochs = epochs;
    c.hidden = hidden;
    c.optimizer = hdot::parse_optimizer(optimizer);
    c.loss = hdot::parse_loss_kind(loss);
    c.weights = hdot::parse_weight_mode(weights);
    c.head_init = init == "random" ? hdot::HeadInit::random : hdot::HeadInit::zero;
    c.transform = hdot::GroundTransform::parse(transform);
    c.validate();
    return c;
  }
};

void add_train_flags(CLI::App* app, TrainFlags& f, bool with_loss) {
  app->add_option("--lr", f.lr, "Learning rate")->capture_default_str();
  app->add_option("--batch-size", f.batch_size, "Mini-batch size")->capture_default_str();
  app->add_option("--epochs", f.epochs, "Training epochs")->capture_default_str();
  app->add_option("--hidden", f.hidden, "Trunk width")->capture_default_str();
  app->add_option("--optimizer", f.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  if (with_loss) {
    app->add_option("--loss", f.loss, "dot or ce")->check(CLI::IsMember({"dot", "ce"}))->capture_default_str();
    app->add_option("--weights", f.weights, "Level weights: eq3-magnitude, eq3-literal, uniform, leaf-only")
        ->check(CLI::IsMember({"eq3-magnitude", "info-gain", "eq3-literal", "uniform", "equal", "leaf-only"}))
        ->capture_default_str();
  }
  app->add_option("--init", f.init, "Head initialization: zero-heads or random")
      ->check(CLI::IsMember({"zero-heads", "random"}))
      ->capture_default_str();
  app->add_option("--transform", f.transform, "Ground transform: identity, power:p, huber:delta")
      ->capture_default_str();
}

struct GenFlags {
  std::string tree;
  std::size_t branching = 3;
  std::size_t depth = 3;
  std::size_t dim = 16;
  double sigma0 = 1.0;
  double decay = 0.5;
  double sigma_x = 0.8;
  std::size_t samples_per_leaf = 200;

  hdot::GenConfig resolve(std::uint64_t seed) const {
    hdot::GenConfig c;
    if (!tree.empty()) c.taxonomy = load_tree(tree);
    c.branching = branching;
    c.depth = depth;
    c.dim = dim;
    c.sigma0 = sigma0;
    c.decay = decay;
    c.sigma_x = sigma_x;
    c.samples_per_leaf = samples_per_leaf;
    c.seed = seed;
    c.validate();
    return c;
  }
};

void add_gen_flags(CLI::App* app, GenFlags& f) {
  app->add_option("--branching", f.branching, "Children per internal node")->capture_default_str();
  app->add_option("--depth", f.depth, "Leaf depth")->capture_default_str();
  app->add_option("--dim", f.dim, "Feature dimension")->capture_default_str();
  app->add_option("--sigma0", f.sigma0, "Offset scale of depth-1 means")->capture_default_str();
  app->add_option("--decay", f.decay, "Per-level offset decay")->capture_default_str();
  app->add_option("--sigma-x", f.sigma_x, "Sample noise around leaf means")->capture_default_str();
  app->add_option("--samples-per-leaf", f.samples_per_leaf, "Rows per leaf")->capture_default_str();
}

std::string format_report(const hdot::EvalReport& r, const std::string& format) {
  if (format == "json") return hdot::to_json(r).dump(2) + "\n";
  if (format == "csv") return hdot::to_csv(r);
  return hdot::to_table(r);
}

std::string format_report(const hdot::ComparisonReport& r, const std::string& format) {
  if (format == "json") return hdot::to_json(r).dump(2) + "\n";
  if (format == "csv") return hdot::to_csv(r);
  return hdot::to_table(r);
}

// ---------------------------------------------------------------------------

std::string matrix_csv(const hdot::Taxonomy& t, std::size_t level, const std::string& transform) {
  const std::size_t l = level == 0 ? t.num_levels() : level;
  if (l > t.num_levels()) {
    throw hdot::InvalidArgument("level " + std::to_string(l) + " exceeds the tree's " +
                                std::to_string(t.num_levels()) + " levels");
  }
  return hdot::build_ground_matrix(t, hdot::make_level_index(t, l), hdot::GroundTransform::parse(transform))
      .to_csv();
}

int cmd_tree(const std::string& path, bool matrix, std::size_t level, const std::string& transform) {
  const auto t = load_tree(path);
  std::printf("nodes=%zu leaves=%zu levels=%zu\n", t.size(), t.leaves().size(), t.num_levels());
  if (matrix) write_output("", matrix_csv(t, level, transform));
  return 0;
}

int cmd_gen(const GenFlags& flags, std::uint64_t seed, const std::string& out_data, const std::string& out_tree) {
  const auto cfg = flags.resolve(seed);
  const auto g = hdot::generate(cfg);
  write_output(out_data, g.data.to_csv());
  if (!out_tree.empty()) write_output(out_tree, g.taxonomy.serialize());
  if (out_data.empty() || out_data == "-") return 0;
  // Resolved configuration, in the key=value form --config accepts.
  std::printf("seed=%llu\n", static_cast<unsigned long long>(cfg.seed));
  if (!flags.tree.empty()) {
    std::printf("tree=%s\n", flags.tree.c_str());
  } else {
    std::printf("branching=%zu\ndepth=%zu\n", cfg.branching, cfg.depth);
  }
  std::printf("dim=%zu\nsigma0=%s\ndecay=%s\nsigma-x=%s\nsamples-per-leaf=%zu\n", cfg.dim,
              fmt_double(cfg.sigma0).c_str(), fmt_double(cfg.decay).c_str(), fmt_double(cfg.sigma_x).c_str(),
              cfg.samples_per_leaf);
  std::printf("# rows=%zu leaves=%zu\n", g.data.size(), g.taxonomy.leaves().size());
  return 0;
}

int cmd_loss(const std::string& tree_path, const std::string& input, const std::string& transform,
             const std::string& loss_name, std::size_t level, const std::string& out) {
  const auto t = load_tree(tree_path);
  const std::size_t l = level == 0 ? t.num_levels() : level;
  if (l > t.num_levels()) throw hdot::InvalidArgument("level exceeds the tree's depth");
  const auto index = hdot::make_level_index(t, l);
  const auto ground = hdot::build_ground_matrix(t, index, hdot::GroundTransform::parse(transform));
  const auto kind = hdot::parse_loss_kind(loss_name);

  const std::string text = read_file(input);  // errors below name lines of this file
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> column_class;  // CSV column (after target) -> class index
  std::string result = "row,loss\n";
  double total = 0.0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (column_class.empty()) {
      if (cells.empty() || cells[0] != "target") throw hdot::ParseError(line_no, "header must start with 'target'");
      if (cells.size() - 1 != index.size()) {
        throw hdot::ParseError(line_no, "expected " + std::to_string(index.size()) + " class columns at level " +
                                            std::to_string(l));
      }
      std::vector<bool> seen(index.size(), false);
      for (std::size_t c = 1; c < cells.size(); ++c) {
        std::size_t k = 0;
        try {
          k = index.index_of(cells[c]);
        } catch (const hdot::InvalidArgument&) {
          throw hdot::ParseError(line_no, "unknown class column '" + cells[c] + "'");
        }
        if (seen[k]) throw hdot::ParseError(line_no, "duplicate class column '" + cells[c] + "'");
        seen[k] = true;
        column_class.push_back(k);
      }
      continue;
    }
    if (cells.size() != column_class.size() + 1) throw hdot::ParseError(line_no, "wrong number of fields");
    std::size_t target = 0;
    try {
      target = index.index_of(cells[0]);
    } catch (const hdot::InvalidArgument&) {
      throw hdot::ParseError(line_no, "unknown target class '" + cells[0] + "'");
    }
    std::vector<double> s(index.size(), 0.0);
    for (std::size_t c = 0; c < column_class.size(); ++c) {
      const std::string& cell = cells[c + 1];
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw hdot::ParseError(line_no, "bad number '" + cell + "'");
      }
      if (!std::isfinite(v) || v < 0.0) throw hdot::ParseError(line_no, "probabilities must be finite and >= 0");
      s[column_class[c]] = v;
    }
    double value = 0.0;
    switch (kind) {
      case hdot::LossKind::dot: value = hdot::one_hot_loss(s, target, ground); break;
      case hdot::LossKind::ce: value = hdot::ce_loss(s, target).value; break;
      case hdot::LossKind::regression: value = hdot::regression_loss(s, target, ground); break;
    }
    result += std::to_string(rows) + "," + fmt_double(value) + "\n";
    total += value;
    ++rows;
  }
  if (column_class.empty()) throw hdot::ParseError(std::max<std::size_t>(line_no, 1), "empty input");
  result += "mean," + fmt_double(rows ? total / static_cast<double>(rows) : 0.0) + "\n";
  write_output(out, result);
  return 0;
}

int cmd_train(const std::string& tree_path, const std::string& data_path, const std::string& out,
              const TrainFlags& flags, std::uint64_t seed) {
  const auto t = load_tree(tree_path);
  const auto data = load_data(data_path);
  hdot::TrainConfig cfg = flags.resolve();
  cfg.seed = hdot::trial_train_seed(seed, 0);
  const hdot::Hierarchy h(t, cfg.transform);
  h.encode(data);
  const auto split = hdot::split_50_30_20(data.size(), hdot::trial_split_seed(seed, 0));
  const auto train_set = data.subset(split.train);
  const auto val_set = data.subset(split.val);
  auto m = hdot::make_model(h, data.dim, cfg);
  const auto result = hdot::train(m, h, train_set, cfg, &val_set);
  write_output(out, hdot::save_checkpoint(m, cfg, t.hash()));
  std::printf("best_epoch=%zu val_tie=%s final_loss=%s\n", result.best_epoch,
              fmt_double(result.val_tie[result.best_epoch - 1]).c_str(), fmt_double(result.epoch_loss.back()).c_str());
  return 0;
}

int cmd_eval(const std::string& tree_path, const std::string& data_path, const std::string& ckpt_path,
             const std::string& rows, std::uint64_t seed, const std::string& format, const std::string& out) {
  const auto t = load_tree(tree_path);
  const auto data = load_data(data_path);
  const auto ck = hdot::load_checkpoint(read_file(ckpt_path));
  if (ck.taxonomy_hash != t.hash()) throw hdot::DataError("checkpoint was trained on a different taxonomy");
  const hdot::Hierarchy h(t, ck.config.transform);
  if (ck.model.shape().level_widths != h.level_widths() || ck.model.shape().input_dim != data.dim) {
    throw hdot::DataError("checkpoint does not fit this tree and dataset");
  }
  hdot::Dataset scored = data;
  std::uint64_t split_hash = 0;
  if (rows == "test") {
    const auto split = hdot::split_50_30_20(data.size(), hdot::trial_split_seed(seed, 0));
    scored = data.subset(split.test);
    split_hash = split.hash();
  }
  const std::vector<std::size_t> ks{1, 2, 5, 10};
  std::vector<std::size_t> confusion;
  auto metrics = hdot::evaluate_model(ck.model, h, scored, ks, &confusion);
  metrics.split_hash = split_hash;
  const auto report = hdot::make_report("checkpoint", h, {metrics}, std::move(confusion));
  write_output(out, format_report(report, format));
  return 0;
}

int cmd_compare(const std::string& tree_path, const std::string& data_path, const GenFlags& gen,
                const TrainFlags& flags, std::size_t trials, std::size_t threads, std::uint64_t seed,
                const std::string& format, const std::string& out) {
  if (tree_path.empty() != data_path.empty()) {
    throw hdot::InvalidArgument("--tree and --data must be given together");
  }
  hdot::Taxonomy t = tree_path.empty() ? hdot::Taxonomy::parse("r\tx\n") : load_tree(tree_path);
  hdot::Dataset data;
  if (data_path.empty()) {
    auto g = hdot::generate(gen.resolve(seed));
    t = std::move(g.taxonomy);
    data = std::move(g.data);
  } else {
    data = load_data(data_path);
  }
  hdot::ExperimentConfig cfg;
  cfg.train = flags.resolve();
  cfg.trials = trials;
  cfg.threads = threads;
  cfg.seed = seed;
  const auto report = hdot::run_comparison(t, data, cfg);
  write_output(out, format_report(report, format));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchy-aware classification with discrete optimal transport losses."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::string tree_path, data_path, out_path, transform = "identity", format = "table";
  std::string config_path;
  std::size_t level = 0;
  std::uint64_t seed = 0;

  // tree
  bool matrix = false;
  auto* tree_cmd = app.add_subcommand("tree", "Validate a taxonomy and print its node, leaf and level counts");
  tree_cmd->add_option("file", tree_path, "Tab-separated parent/child edge file")->required();
  tree_cmd->add_flag("--matrix", matrix, "Also print the ground matrix as CSV");
  tree_cmd->add_option("--level", level, "Level for --matrix (default: leaf level)");
  tree_cmd->add_option("--transform", transform, "identity, power:p or huber:delta")->capture_default_str();

  // dump-matrix
  auto* dump_cmd = app.add_subcommand("dump-matrix", "Print a level's ground matrix as CSV");
  dump_cmd->add_option("file", tree_path, "Tab-separated parent/child edge file")->required();
  dump_cmd->add_option("--level", level, "Level (default: leaf level)");
  dump_cmd->add_option("--transform", transform, "identity, power:p or huber:delta")->capture_default_str();
  dump_cmd->add_option("-o,--out", out_path, "Output file (default: stdout)");

  // gen
  GenFlags gen;
  std::string out_tree;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a hierarchical Gaussian dataset");
  gen_cmd->add_option("--config", config_path, "key=value file; command-line flags take precedence");
  gen_cmd->add_option("--tree", gen.tree, "Use this taxonomy instead of a full tree");
  add_gen_flags(gen_cmd, gen);
  gen_cmd->add_option("--seed", seed, "Master seed")->capture_default_str();
  gen_cmd->add_option("-o,--out", out_path, "Dataset CSV (default: stdout)");
  gen_cmd->add_option("--out-tree", out_tree, "Also write the taxonomy here");

  // loss
  std::string loss_name = "dot", input_path;
  auto* loss_cmd = app.add_subcommand("loss", "Score prediction histograms against target classes");
  loss_cmd->add_option("--config", config_path, "key=value file; command-line flags take precedence");
  loss_cmd->add_option("--tree", tree_path, "Taxonomy file")->required();
  loss_cmd->add_option("--input", input_path, "CSV: 'target' column then one column per class")->required();
  loss_cmd->add_option("--transform", transform, "identity, power:p or huber:delta")->capture_default_str();
  loss_cmd->add_option("--loss", loss_name, "dot, ce or regression")
      ->check(CLI::IsMember({"dot", "ce", "regression"}))
      ->capture_default_str();
  loss_cmd->add_option("--level", level, "Level the classes belong to (default: leaf level)");
  loss_cmd->add_option("-o,--out", out_path, "Output CSV (default: stdout)");

  // train
  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a model on the 50% split and write a checkpoint");
  train_cmd->add_option("--config", config_path, "key=value file; command-line flags take precedence");
  train_cmd->add_option("--tree", tree_path, "Taxonomy file")->required();
  train_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  train_cmd->add_option("-o,--out", out_path, "Checkpoint file")->required();
  add_train_flags(train_cmd, train_flags, true);
  train_cmd->add_option("--seed", seed, "Master seed (split, init, shuffle)")->capture_default_str();

  // eval
  std::string ckpt_path, rows = "all";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--config", config_path, "key=value file; command-line flags take precedence");
  eval_cmd->add_option("--tree", tree_path, "Taxonomy file")->required();
  eval_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  eval_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint from 'train'")->required();
  eval_cmd->add_option("--rows", rows, "all, or the 20% test split of --seed")
      ->check(CLI::IsMember({"all", "test"}))
      ->capture_default_str();
  eval_cmd->add_option("--seed", seed, "Master seed of the split")->capture_default_str();
  eval_cmd->add_option("--format", format, "json, table or csv")
      ->check(CLI::IsMember({"json", "table", "csv"}))
      ->capture_default_str();
  eval_cmd->add_option("-o,--out", out_path, "Report file (default: stdout)");

  // compare
  TrainFlags compare_flags;
  GenFlags compare_gen;
  std::size_t trials = 10, threads = 1;
  auto* compare_cmd =
      app.add_subcommand("compare", "CE vs DOT and the DOT weight ablations on shared splits");
  compare_cmd->add_option("--config", config_path, "key=value file; command-line flags take precedence");
  compare_cmd->add_option("--tree", tree_path, "Taxonomy file (omit with --data to use generated data)");
  compare_cmd->add_option("--data", data_path, "Dataset CSV");
  add_gen_flags(compare_cmd, compare_gen);
  add_train_flags(compare_cmd, compare_flags, false);
  compare_cmd->add_option("--trials", trials, "Trials per method")->capture_default_str();
  compare_cmd->add_option("--threads", threads, "Worker threads for trials")->capture_default_str();
  compare_cmd->add_option("--seed", seed, "Master seed")->capture_default_str();
  compare_cmd->add_option("--format", format, "json, table or csv")
      ->check(CLI::IsMember({"json", "table", "csv"}))
      ->capture_default_str();
  compare_cmd->add_option("-o,--out", out_path, "Report file (default: stdout)");

  try {
    app.parse(argc, argv);
    if (!config_path.empty()) apply_config(app.get_subcommands().front(), config_path);
  } catch (const CLI::Error& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  } catch (const hdot::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }

  try {
    if (*tree_cmd) return cmd_tree(tree_path, matrix, level, transform);
    if (*dump_cmd) {
      write_output(out_path, matrix_csv(load_tree(tree_path), level, transform));
      return 0;
    }
    if (*gen_cmd) return cmd_gen(gen, seed, out_path, out_tree);
    if (*loss_cmd) return cmd_loss(tree_path, input_path, transform, loss_name, level, out_path);
    if (*train_cmd) return cmd_train(tree_path, data_path, out_path, train_flags, seed);
    if (*eval_cmd) return cmd_eval(tree_path, data_path, ckpt_path, rows, seed, format, out_path);
    if (*compare_cmd) {
      return cmd_compare(tree_path, data_path, compare_gen, compare_flags, trials, threads, seed, format,
                         out_path);
    }
  } catch (const hdot::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
