// SPDX-License-Identifier: Apache-2.0
#include "salatt/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "salatt/checkpoint.hpp"
#include "salatt/grad_check.hpp"
#include "salatt/run_config.hpp"
#include "salatt/weight_map.hpp"

namespace salatt {

namespace fs = std::filesystem;

namespace {
constexpr double kGradTolerance = 1e-4;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void require_parent(const std::string& what, const fs::path& path) {
  if (path.empty()) throw ConfigError(what + " is not set");
  const fs::path parent = path.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw ConfigError(what + " directory does not exist: " + parent.string());
  }
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Options shared by the commands that read a run configuration.
struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::string data, variant, checkpoint, metrics, profile;
  std::optional<std::size_t> seed, max_iterations;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key=value configuration file");
    cmd->add_option("--set", sets, "override one key, as key=value (repeatable)");
    cmd->add_option("--data", data, "data directory written by gen-toy");
    cmd->add_option("--variant", variant, "SalAtt, Holistic, TraAtt, RegAtt or ConAtt");
    cmd->add_option("--checkpoint", checkpoint, "checkpoint path");
    cmd->add_option("--metrics", metrics, "metrics CSV path");
    cmd->add_option("--profile", profile, "desk or paper");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--max-iterations", max_iterations, "iteration cap");
  }

  RunConfig resolve() const {
    ConfigPairs file;
    if (!config_file.empty()) {
      require_existing({{"config file", config_file}});
      file = read_config_file(config_file);
    }
    ConfigPairs flags;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      const std::string key = s.substr(0, eq);
      const auto& known = RunConfig::keys();
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw ConfigError("unknown config key '" + key + "'");
      }
      flags.emplace_back(key, s.substr(eq + 1));
    }
    auto add = [&](const char* key, const std::string& v) {
      if (!v.empty()) flags.emplace_back(key, v);
    };
    add("profile", profile);
    add("data_dir", data);
    add("variant", variant);
    add("checkpoint", checkpoint);
    add("metrics", metrics);
    if (seed) flags.emplace_back("seed", std::to_string(*seed));
    if (max_iterations) flags.emplace_back("max_iterations", std::to_string(*max_iterations));
    return resolve_config(file, flags);
  }
};

struct Prepared {
  DataDir data;
  AnswerVocab answers;
  ModelConfig model;
};

Prepared prepare(const RunConfig& config) {
  require_existing({{"data directory", config.data_dir}});
  DataDir data = load_data_dir(config.data_dir, config.l2_normalize);
  if (data.train.empty()) throw ConfigError("training split is empty; the answer vocabulary needs it");
  if (config.top_answers < 1) throw ConfigError("top_answers must be at least 1");
  AnswerVocab answers = build_answer_vocab(data.train, config.top_answers);
  assign_labels(data.train, answers);
  assign_labels(data.val, answers);
  ModelConfig model = config.model(data.feature_dim, data.question_vocab.size(), answers.size(), data.grid);
  return {std::move(data), std::move(answers), model};
}

ParamStore load_model_params(const RunConfig& config, const ModelConfig& model) {
  require_existing({{"checkpoint", config.checkpoint}});
  ParamStore params = load_checkpoint(config.checkpoint);
  check_params(model, params);
  return params;
}

int cmd_gen_toy(const std::string& out_dir, const ToyTaskSpec& spec, std::uint64_t seed, std::ostream& out) {
  if (out_dir.empty()) throw ConfigError("--out is required");
  fs::create_directories(out_dir);
  Rng rng(seed);
  const ToyTask task = build_toy_task(spec, rng);
  write_toy_data(out_dir, task, spec);
  const AnswerVocab answers = build_answer_vocab(task.train, 1000);
  out << "seed=" << seed << '\n'
      << "patterns=" << spec.patterns << '\n'
      << "questions=" << spec.templates << '\n'
      << "train=" << task.train.size() << '\n'
      << "val=" << task.val.size() << '\n'
      << "feature_dim=" << spec.feature_dim << '\n'
      << "noise=" << fmt(spec.noise) << '\n'
      << "grid=" << spec.grid.g() << "," << spec.grid.m() << "," << spec.grid.s() << '\n'
      << "answers=" << answers.size() << '\n'
      << "majority_baseline=" << fmt(majority_baseline(task.train, task.val)) << '\n';
  return 0;
}

int cmd_train(const ConfigFlags& flags, std::ostream& out) {
  const RunConfig config = flags.resolve();
  require_parent("checkpoint", config.checkpoint);
  require_parent("metrics", config.metrics);
  const Prepared p = prepare(config);

  Rng init_rng = Rng(config.train.seed).split(std::numeric_limits<std::uint64_t>::max());
  ParamStore params = init_params(p.model, init_rng, config.init_range);

  std::ofstream log(config.metrics, std::ios::binary | std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write metrics log " + config.metrics.string());
  log << "iteration,train_loss,val_vqa_acc,val_top1,seconds\n";
  TrainHooks hooks;
  hooks.on_evaluation = [&](const EvalRecord& r) {
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.3f", r.seconds);
    log << r.iteration << ',' << fmt(r.train_loss) << ',' << fmt(r.val_vqa_accuracy) << ','
        << fmt(r.val_top1_accuracy) << ',' << secs << '\n';
    log.flush();
  };
  const TrainState state =
      train_with_early_stopping(p.model, params, p.data.train, p.data.val, p.answers, config.train, hooks);
  if (!log) throw std::runtime_error("write failed for " + config.metrics.string());
  save_checkpoint(config.checkpoint, state.best_params);

  const EvalRecord& last = state.history.back();
  out << "variant=" << variant_name(p.model.variant) << '\n'
      << "parameters=" << params.scalar_count() << '\n'
      << "iterations=" << state.iteration << '\n'
      << "stopped_early=" << (state.stopped_early ? "true" : "false") << '\n'
      << "best_iteration=" << state.best_iteration << '\n'
      << "best_val_vqa_acc=" << fmt(state.best_val_accuracy) << '\n'
      << "final_val_vqa_acc=" << fmt(last.val_vqa_accuracy) << '\n'
      << "checkpoint=" << config.checkpoint.string() << '\n'
      << "metrics=" << config.metrics.string() << '\n';
  return 0;
}

const Dataset& pick_split(const Prepared& p, const std::string& split) {
  if (split == "val") return p.data.val;
  if (split == "train") return p.data.train;
  throw ConfigError("unknown split '" + split + "' (expected train or val)");
}

int cmd_eval(const ConfigFlags& flags, const std::string& split, std::ostream& out) {
  const RunConfig config = flags.resolve();
  const Prepared p = prepare(config);
  ParamStore params = load_model_params(config, p.model);
  const Dataset& data = pick_split(p, split);
  const EvalResult r = evaluate(p.model, params, data, p.answers);
  out << "split=" << split << '\n'
      << "samples=" << r.samples << '\n'
      << "vqa_accuracy=" << fmt(r.vqa_accuracy) << '\n'
      << "top1_accuracy=" << fmt(r.top1_accuracy) << '\n';
  return 0;
}

struct GradcheckFlags {
  std::vector<std::string> variants;
  std::uint64_t seed = 1;
  double init_range = 1.0;
  bool corrupt = false;
};

// Toy dimensions of the gradient check: d_I 8, d_C 6, one 5-unit question
// layer, 3×3 regions, 11 words, 4 answers.
ModelConfig gradcheck_model(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.feature_dim = 8;
  c.embed_dim = 4;
  c.question_layers = 1;
  c.question_hidden = 5;
  c.common_dim = 6;
  c.vocab_size = 11;
  c.answer_count = 4;
  c.dropout_rate = 0.2;
  c.grid = RegionGrid(4, 2, 1);
  return c;
}

int cmd_gradcheck(const GradcheckFlags& flags, std::ostream& out) {
  std::vector<Variant> variants;
  for (const auto& name : flags.variants) variants.push_back(parse_variant(name));
  if (variants.empty()) variants.assign(all_variants().begin(), all_variants().end());

  struct FaultGuard {
    explicit FaultGuard(bool on) { testing::set_backward_fault(on); }
    ~FaultGuard() { testing::set_backward_fault(false); }
  } guard(flags.corrupt);

  double worst = 0.0;
  std::size_t blocks = 0;
  for (Variant v : variants) {
    const ModelConfig model = gradcheck_model(v);
    Rng rng(flags.seed);
    ParamStore params = init_params(model, rng, flags.init_range);
    Tensor feats({model.grid.region_total(), model.feature_dim});
    for (double& x : feats.data()) x = rng.normal();
    std::vector<std::size_t> question(4);
    for (auto& t : question) t = 1 + rng.below(model.vocab_size - 1);
    const std::size_t label = rng.below(model.answer_count);
    const std::uint64_t dropout_seed = rng.next_u64();
    const LossFn loss = [&](Tape& tape, ParamStore& ps) {
      Rng drop(dropout_seed);
      const auto trace = forward(tape, model, ps, {feats, question}, {Mode::Train, &drop});
      return cross_entropy(trace.logits, label);
    };
    for (const auto& name : params.names()) {
      const GradCheckResult r = grad_check_param(params, name, loss);
      const bool ok = r.max_rel_error < kGradTolerance;
      out << variant_name(v) << ' ' << name << " max_rel_error=" << fmt(r.max_rel_error) << ' '
          << (ok ? "ok" : "FAIL") << '\n';
      worst = std::max(worst, r.max_rel_error);
      ++blocks;
    }
  }
  const bool pass = worst < kGradTolerance;
  out << "blocks=" << blocks << '\n'
      << "worst_rel_error=" << fmt(worst) << '\n'
      << "status=" << (pass ? "pass" : "fail") << '\n';
  return pass ? 0 : 1;
}

int cmd_visualize(const ConfigFlags& flags, const std::string& split, std::size_t sample_index,
                  const std::string& out_dir, std::ostream& out) {
  const RunConfig config = flags.resolve();
  require_existing({{"output directory", out_dir}});
  const Prepared p = prepare(config);
  ParamStore params = load_model_params(config, p.model);
  const Dataset& data = pick_split(p, split);
  if (sample_index >= data.size()) {
    throw ArgumentError("sample index " + std::to_string(sample_index) + " out of range for " + split +
                        " split of " + std::to_string(data.size()));
  }
  const VqaSample& s = data[sample_index];
  Tape tape;
  const ForwardTrace trace = forward(tape, p.model, params, {s.features->features, s.question});
  const std::size_t n = p.model.grid.n();
  const std::size_t regions = p.model.grid.region_total();

  // Variants without pre-selection weigh every region equally.
  const Tensor preselect = trace.preselect_weights.value_or(Tensor({regions}, 1.0 / static_cast<double>(regions)));
  const fs::path pre_path = fs::path(out_dir) / "preselect.pgm";
  const fs::path att_path = fs::path(out_dir) / "attention.pgm";
  write_pgm(pre_path, preselect.data(), n);
  write_pgm(att_path, trace.attention_map.data(), n);

  std::string question;
  for (std::size_t id : s.question) {
    if (!question.empty()) question += ' ';
    question += id < p.data.question_vocab.size() ? p.data.question_vocab[id] : "<unk>";
  }
  out << "sample=" << sample_index << '\n'
      << "question=" << question << '\n'
      << "answer=" << s.answer << '\n'
      << "predicted=" << p.answers.answer(argmax(trace.logits.value())) << '\n'
      << "preselect_source=" << (trace.preselect_weights ? "model" : "uniform") << '\n';
  auto print_vector = [&](const char* key, const Tensor& t) {
    out << key << '=';
    for (std::size_t i = 0; i < t.size(); ++i) out << (i ? " " : "") << fmt(t[i]);
    out << '\n';
  };
  print_vector("preselect_weights", preselect);
  print_vector("attention_map", trace.attention_map);
  for (std::size_t i = 0; i < regions; ++i) {
    const PixelRect r = region_bounds(p.model.grid, i, config.image_side);
    out << "region=" << i << " x0=" << r.x0 << " y0=" << r.y0 << " x1=" << r.x1 << " y1=" << r.y1 << '\n';
  }
  out << "preselect_pgm=" << pre_path.string() << '\n' << "attention_pgm=" << att_path.string() << '\n';
  return 0;
}
}  // namespace

void write_toy_data(const fs::path& dir, const ToyTask& task, const ToyTaskSpec& spec) {
  std::vector<RegionFeatureBlock> blocks;
  blocks.reserve(task.images.size());
  for (const auto& b : task.images) blocks.push_back(*b);
  write_features(dir / kFeaturesFile, blocks, spec.grid, spec.feature_dim);
  write_dataset(dir / kTrainFile, task.train);
  write_dataset(dir / kValFile, task.val);
  std::ofstream vocab(dir / kVocabFile, std::ios::binary | std::ios::trunc);
  if (!vocab) throw std::runtime_error("cannot write " + (dir / kVocabFile).string());
  for (const auto& w : task.question_vocab) vocab << w << '\n';
  if (!vocab) throw std::runtime_error("write failed for " + (dir / kVocabFile).string());
}

DataDir load_data_dir(const fs::path& dir, bool l2_normalize) {
  require_existing({{"feature file", dir / kFeaturesFile},
                    {"training data", dir / kTrainFile},
                    {"validation data", dir / kValFile},
                    {"question vocabulary", dir / kVocabFile}});
  DataDir d;
  const FeatureFileHeader h = read_feature_header(dir / kFeaturesFile);
  d.grid = RegionGrid(h.g, h.m, h.s);
  d.feature_dim = h.d_I;
  auto blocks = load_features(dir / kFeaturesFile);
  if (l2_normalize) {
    for (auto& b : blocks) l2_normalize_rows(b);
  }
  d.images = share_blocks(std::move(blocks));
  d.train = load_dataset(dir / kTrainFile, d.images);
  d.val = load_dataset(dir / kValFile, d.images);
  d.question_vocab = read_lines(dir / kVocabFile);
  if (d.question_vocab.empty()) throw ConfigError("question vocabulary is empty");
  map_unknown_tokens(d.train, d.question_vocab.size());
  map_unknown_tokens(d.val, d.question_vocab.size());
  return d;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Region pre-selection and element-wise attention for visual question answering"};
  app.name("salatt");
  app.require_subcommand(1);

  ToyTaskSpec toy;
  std::string toy_out;
  std::uint64_t toy_seed = 42;
  auto* gen = app.add_subcommand("gen-toy", "write a synthetic data directory");
  gen->add_option("--out", toy_out, "output directory")->required();
  gen->add_option("--seed", toy_seed, "random seed");
  gen->add_option("--patterns", toy.patterns, "number of planted patterns");
  gen->add_option("--questions", toy.templates, "number of question templates");
  gen->add_option("--train-size", toy.train_size, "training samples");
  gen->add_option("--val-size", toy.val_size, "validation samples");
  gen->add_option("--feature-dim", toy.feature_dim, "features per region");
  gen->add_option("--noise", toy.noise, "noise standard deviation");

  ConfigFlags train_flags;
  auto* train = app.add_subcommand("train", "train a model with early stopping");
  train_flags.attach(train);

  ConfigFlags eval_flags;
  std::string eval_split = "val";
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_flags.attach(eval);
  eval->add_option("--split", eval_split, "train or val");

  GradcheckFlags gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "compare gradients with finite differences");
  gradcheck->add_option("--variant", gc.variants, "variant to check (repeatable; default all)");
  gradcheck->add_option("--seed", gc.seed, "instance seed");
  gradcheck->add_option("--init-range", gc.init_range, "uniform parameter range");
  gradcheck->add_flag("--corrupt-backward", gc.corrupt, "skew the tanh backward pass (negative control)");

  ConfigFlags vis_flags;
  std::string vis_split = "val";
  std::string vis_out = ".";
  std::size_t vis_sample = 0;
  auto* visualize = app.add_subcommand("visualize", "write weight maps for one sample");
  vis_flags.attach(visualize);
  visualize->add_option("--split", vis_split, "train or val");
  visualize->add_option("--sample", vis_sample, "sample index within the split");
  visualize->add_option("--out-dir", vis_out, "directory for the PGM files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "salatt: error: " << one_line(e.what())
        << " (usage: salatt {gen-toy|train|eval|gradcheck|visualize} [options]; see --help)\n";
    return 2;
  }

  try {
    if (*gen) return cmd_gen_toy(toy_out, toy, toy_seed, out);
    if (*train) return cmd_train(train_flags, out);
    if (*eval) return cmd_eval(eval_flags, eval_split, out);
    if (*gradcheck) return cmd_gradcheck(gc, out);
    if (*visualize) return cmd_visualize(vis_flags, vis_split, vis_sample, vis_out, out);
  } catch (const ConfigError& e) {
    err << "salatt: config error: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "salatt: error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 1;
}

}  // namespace salatt
