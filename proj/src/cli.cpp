#include "iekm/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "iekm/checkpoint.hpp"
#include "iekm/errors.hpp"
#include "iekm/experiments.hpp"
#include "iekm/gradcheck.hpp"
#include "iekm/probe.hpp"
#include "iekm/synthetic.hpp"
#include "iekm/training.hpp"
#include "json.hpp"

namespace iekm {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Thrown by command bodies when a checked bar is missed.
struct AcceptanceFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LexiconOptions {
  std::vector<std::string> lexicons;
  std::string dict;
  std::string missing = "zero";
};

struct CommonOptions {
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
};

struct ModelOptions {
  ModelConfig model = desk_model_config();
  TrainConfig train = TrainConfig::desk_scale();
  std::string ablation = "full_gated";
  std::string gate = "sigmoid";
  std::string task = "classification";
  std::string storage = "float32";

  ModelConfig resolved() const {
    ModelConfig c = model;
    c.ablation = parse_ablation_mode(ablation);
    c.gate = parse_gate_activation(gate);
    c.task = parse_task_mode(task);
    return c;
  }
};

const std::vector<std::string> kModes = {"baseline", "M_only", "Mr_only", "full_gated"};

void add_lexicon_options(CLI::App* cmd, LexiconOptions& o, bool required) {
  auto* lex = cmd->add_option("--lexicon", o.lexicons, "similarity lexicon TSV, one per provider (repeatable)")
                  ->check(CLI::ExistingFile);
  if (required) lex->required();
  cmd->add_option("--dict", o.dict, "keyword dictionary TSV")->check(CLI::ExistingFile);
  cmd->add_option("--missing", o.missing, "provider lacking a pair: zero or skip")
      ->check(CLI::IsMember({"zero", "skip"}))
      ->capture_default_str();
}

void add_common_options(CLI::App* cmd, CommonOptions& o, bool out_required) {
  cmd->add_option("--seed", o.seed, "random seed")->capture_default_str();
  auto* out = cmd->add_option("--out", o.out, "output directory");
  if (out_required) out->required();
  cmd->add_option("--threads", o.threads, "evaluation threads")->check(CLI::Range(1, 256))->capture_default_str();
}

void add_model_options(CLI::App* cmd, ModelOptions& o) {
  cmd->add_option("--ablation", o.ablation)->check(CLI::IsMember(kModes))->capture_default_str();
  cmd->add_option("--gate", o.gate)->check(CLI::IsMember({"sigmoid", "identity"}))->capture_default_str();
  cmd->add_option("--task", o.task)->check(CLI::IsMember({"classification", "regression"}))->capture_default_str();
  cmd->add_option("--hidden", o.model.hidden)->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--heads", o.model.heads)->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--layers", o.model.layers)->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--max-len", o.model.max_len)->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--init-std", o.model.init_std)->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--epochs", o.train.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--batch-size", o.train.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--lr", o.train.learning_rate)->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--min-count", o.train.min_token_count, "vocabulary cut-off")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--storage", o.storage, "checkpoint number format")
      ->check(CLI::IsMember({"float64", "float32"}))
      ->capture_default_str();
}

PairEncoder make_encoder(const LexiconOptions& o) {
  std::vector<SimilarityProvider> providers;
  for (const auto& path : o.lexicons) providers.push_back(load_similarity_lexicon(path));
  std::optional<KeywordDictionary> dict;
  if (!o.dict.empty()) dict = load_keyword_dictionary(o.dict);
  return PairEncoder(std::move(providers), std::move(dict),
                     o.missing == "skip" ? MissingPolicy::skip : MissingPolicy::zero);
}

json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"tp", m.tp},             {"fp", m.fp},               {"tn", m.tn},         {"fn", m.fn},
          {"count", m.count}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!(f << j.dump(2) << '\n')) throw std::runtime_error("cannot write " + path.string());
}

// Records what a run consumed and produced.
class RunManifest {
 public:
  RunManifest(std::string command, const std::vector<std::string>& args, std::uint64_t seed)
      : doc_{{"command", std::move(command)},
             {"args", args},
             {"seed", seed},
             {"format_versions", {{"manifest", 1}, {"checkpoint", kCheckpointVersion}}},
             {"inputs", json::array()},
             {"outputs", json::array()}} {}

  void input(const fs::path& path) {
    if (!path.empty()) doc_["inputs"].push_back({{"path", path.string()}, {"fnv1a64", file_digest(path)}});
  }
  void inputs(const std::vector<std::string>& paths) {
    for (const auto& p : paths) input(p);
  }
  void output(const fs::path& path) { doc_["outputs"].push_back(path.filename().string()); }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }

  void write(const fs::path& dir) {
    doc_["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    output(dir / "manifest.json");
    write_json(dir / "manifest.json", doc_);
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

int cmd_gen_data(const CommonOptions& c, std::size_t n, double test_fraction, std::size_t probes,
                 const SyntheticLexiconOptions& lex_options, const std::string& task,
                 const std::vector<std::string>& args, std::ostream& out) {
  const fs::path dir = prepare_out(c.out);
  SyntheticLexiconOptions lo = lex_options;
  lo.seed = c.seed;
  const SyntheticLexicon lex = make_synthetic_lexicon(lo);
  const auto providers = lex.providers();
  const auto data = generate_synthetic(n, providers.front(), c.seed, parse_task_mode(task));
  const Split split = split_by_group(data, test_fraction, c.seed);

  RunManifest manifest("gen-data", args, c.seed);
  for (const auto& p : providers) {
    const fs::path path = dir / (p.name() + ".tsv");
    std::ofstream f(path);
    write_similarity_lexicon(f, p);
    manifest.output(path);
  }
  write_dataset(dir / "train.jsonl", split.train);
  write_dataset(dir / "test.jsonl", split.test);
  write_probes(dir / "probes.jsonl", generate_probes(probes, providers.front(), c.seed));
  for (const char* f : {"train.jsonl", "test.jsonl", "probes.jsonl"}) manifest.output(dir / f);
  manifest.set("counts", {{"train", split.train.size()}, {"test", split.test.size()}, {"probes", probes}});
  manifest.write(dir);
  out << "wrote " << split.train.size() << " train, " << split.test.size() << " test examples and " << probes
      << " probes to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_build_matrix(const LexiconOptions& lo, const CommonOptions& c, const std::string& s1,
                     const std::string& s2, const std::string& dump, const std::vector<std::string>& args,
                     std::ostream& out) {
  const PairEncoder encoder = make_encoder(lo);
  const PairEncoding enc = encoder.encode(s1, s2, Vocabulary());
  if (!dump.empty()) {
    std::ofstream f(dump);
    write_matrix_csv(f, enc.bias.sim, enc.pair);
    if (!f) throw std::runtime_error("cannot write " + dump);
  }
  if (c.out.empty()) {
    if (!dump.empty()) return kExitOk;
    out << "# M\n";
    write_matrix_csv(out, enc.bias.sim, enc.pair);
    out << "# Mr\n";
    write_matrix_csv(out, enc.bias.dissim, enc.pair);
    return kExitOk;
  }
  const fs::path dir = prepare_out(c.out);
  RunManifest manifest("build-matrix", args, c.seed);
  manifest.inputs(lo.lexicons);
  manifest.input(lo.dict);
  const std::pair<const char*, const Matrix*> files[] = {
      {"sim.csv", &enc.bias.sim}, {"dissim.csv", &enc.bias.dissim}, {"cross_mask.csv", &enc.bias.cross_mask}};
  for (const auto& [name, m] : files) {
    std::ofstream f(dir / name);
    write_matrix_csv(f, *m, enc.pair);
    manifest.output(dir / name);
  }
  manifest.write(dir);
  out << "tokens:";
  for (const auto& p : enc.pair.pieces) out << ' ' << p;
  out << "\nwrote matrices to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_train(const LexiconOptions& lo, const CommonOptions& c, const ModelOptions& mo,
              const std::string& train_path, const std::vector<std::string>& args, std::ostream& out) {
  const PairEncoder encoder = make_encoder(lo);
  const auto examples = read_dataset(train_path);
  TrainConfig tc = mo.train;
  tc.seed = c.seed;
  const TrainedModel trained = train_model(tc, mo.resolved(), examples, encoder);
  for (std::size_t e = 0; e < trained.epoch_loss.size(); ++e) {
    out << "epoch " << e + 1 << " loss " << trained.epoch_loss[e] << '\n';
  }
  const fs::path dir = prepare_out(c.out);
  save_checkpoint(dir / "model.json", trained.model, parse_storage_type(mo.storage));
  write_json(dir / "train_log.json", {{"epoch_loss", trained.epoch_loss}});

  RunManifest manifest("train", args, c.seed);
  manifest.input(train_path);
  manifest.inputs(lo.lexicons);
  manifest.input(lo.dict);
  for (const char* f : {"model.json", "model.bin", "train_log.json"}) manifest.output(dir / f);
  manifest.set("config", config_to_json(trained.model.config));
  manifest.write(dir);
  return kExitOk;
}

double resolve_threshold(const std::optional<double>& threshold, TaskMode task) {
  return threshold ? *threshold : default_threshold(task);
}

int cmd_eval(const LexiconOptions& lo, const CommonOptions& c, const std::string& model_path,
             const std::string& data_path, const std::optional<double>& threshold,
             const std::vector<std::string>& args, std::ostream& out) {
  const Model model = load_checkpoint(model_path);
  const PairEncoder encoder = make_encoder(lo);
  const auto examples = read_dataset(data_path);
  const double t = resolve_threshold(threshold, model.config.task);
  const Evaluation ev = evaluate(model, examples, encoder, t, c.threads);
  json result = metrics_json(ev.metrics);
  result["threshold"] = t;
  result["config"] = config_to_json(model.config);
  out << result.dump(2) << '\n';
  if (!c.out.empty()) {
    const fs::path dir = prepare_out(c.out);
    write_json(dir / "metrics.json", result);
    RunManifest manifest("eval", args, c.seed);
    manifest.set("config", config_to_json(model.config));
    manifest.input(model_path);
    manifest.input(data_path);
    manifest.inputs(lo.lexicons);
    manifest.input(lo.dict);
    manifest.output(dir / "metrics.json");
    manifest.write(dir);
  }
  return kExitOk;
}

struct AblationData {
  std::string train;
  std::string test;
  std::string dataset;  // used instead of train/test when set
  double test_fraction = 0.2;
};

int cmd_ablate(const LexiconOptions& lo, const CommonOptions& c, const ModelOptions& mo, const AblationData& d,
               const std::optional<double>& threshold, const std::vector<std::string>& args,
               std::ostream& out) {
  const PairEncoder encoder = make_encoder(lo);
  std::vector<LabeledExample> train, test;
  if (d.dataset.empty()) {
    train = read_dataset(d.train);
    test = read_dataset(d.test);
  } else {
    Split split = split_by_group(read_dataset(d.dataset), d.test_fraction, c.seed);
    train = std::move(split.train);
    test = std::move(split.test);
  }
  if (test.empty()) throw ValidationError("ablate: the test split is empty");
  TrainConfig tc = mo.train;
  tc.seed = c.seed;
  const ModelConfig config = mo.resolved();
  const double t = resolve_threshold(threshold, config.task);
  const auto rows = run_ablation(tc, config, train, test, encoder, t, c.threads);
  out << format_ablation_table(rows);

  if (!c.out.empty()) {
    const fs::path dir = prepare_out(c.out);
    json table = json::array();
    for (const auto& r : rows) {
      table.push_back({{"mode", to_string(r.mode)},
                       {"train", metrics_json(r.train)},
                       {"test", metrics_json(r.test)},
                       {"epoch_loss", r.epoch_loss},
                       {"seconds", r.seconds}});
    }
    write_json(dir / "ablation.json", {{"seed", c.seed}, {"threshold", t}, {"rows", table}});
    RunManifest manifest("ablate", args, c.seed);
    manifest.input(d.train);
    manifest.input(d.test);
    manifest.input(d.dataset);
    manifest.set("config", config_to_json(config));
    manifest.inputs(lo.lexicons);
    manifest.input(lo.dict);
    manifest.output(dir / "ablation.json");
    manifest.write(dir);
  }
  return kExitOk;
}

int cmd_probe(const LexiconOptions& lo, const CommonOptions& c, const std::string& model_path,
              const std::string& probe_path, double bar, std::size_t min_valid,
              const std::vector<std::string>& args, std::ostream& out) {
  const Model model = load_checkpoint(model_path);
  const PairEncoder encoder = make_encoder(lo);
  const auto probes = read_probes(probe_path);
  const ProbeReport report = flexibility_probe(model, probes, encoder);

  json rows = json::array();
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto& o = report.outcomes[i];
    json row = {{"kw1", probes[i].kw1}, {"kw2", probes[i].kw2}, {"valid", o.valid}};
    if (o.valid) {
      row.update({{"base", o.base}, {"override_0", o.override_zero}, {"override_1", o.override_one},
                  {"toward_dissimilar", o.toward_dissimilar}, {"toward_similar", o.toward_similar}});
    } else {
      row["reason"] = o.reason;
    }
    rows.push_back(std::move(row));
  }
  const bool ok = report.valid >= min_valid && report.agreement() >= bar;
  const json summary = {{"valid", report.valid},
                        {"invalid", report.invalid},
                        {"override_0_agrees", report.zero_agrees},
                        {"override_1_agrees", report.one_agrees},
                        {"both_agree", report.both_agree},
                        {"agreement", report.agreement()},
                        {"bar", bar},
                        {"min_valid", min_valid},
                        {"passed", ok}};
  out << summary.dump(2) << '\n';
  if (!c.out.empty()) {
    const fs::path dir = prepare_out(c.out);
    write_json(dir / "probe_report.json", {{"summary", summary}, {"probes", rows}});
    RunManifest manifest("probe", args, c.seed);
    manifest.set("config", config_to_json(model.config));
    manifest.input(model_path);
    manifest.input(probe_path);
    manifest.inputs(lo.lexicons);
    manifest.input(lo.dict);
    manifest.output(dir / "probe_report.json");
    manifest.write(dir);
  }
  if (!ok) {
    throw AcceptanceFailure("probe agreement " + std::to_string(report.agreement()) + " over " +
                            std::to_string(report.valid) + " valid probes misses the bar");
  }
  return kExitOk;
}

int cmd_gradcheck(const CommonOptions& c, const std::string& mode, const std::string& gate, double eps,
                  const std::vector<std::string>& args, std::ostream& out) {
  RunManifest manifest("gradcheck", args, c.seed);
  json reports = json::array();
  std::vector<std::string> modes = mode == "all" ? kModes : std::vector<std::string>{mode};
  std::vector<std::string> failed;
  char line[160];
  for (const auto& m : modes) {
    ModelConfig config = tiny_gradcheck_config(parse_ablation_mode(m));
    config.gate = parse_gate_activation(gate);
    const GradcheckReport report = gradcheck_harness(config, c.seed, eps);
    out << "mode " << m << " (gate " << gate << ", eps " << eps << ")\n";
    for (const auto& g : report.groups) {
      std::snprintf(line, sizeof line, "  %-12s max_rel_err %.3e  max_abs_grad %.3e%s\n", g.group.c_str(),
                    g.max_relative_error, g.analytic_max_abs, g.expected_unused ? "  (unused)" : "");
      out << line;
    }
    json groups = json::array();
    for (const auto& g : report.groups) {
      groups.push_back({{"group", g.group},
                        {"max_relative_error", g.max_relative_error},
                        {"max_abs_gradient", g.analytic_max_abs},
                        {"unused", g.expected_unused}});
    }
    reports.push_back({{"mode", m}, {"config", config_to_json(config)}, {"loss", report.loss},
                       {"groups", groups}, {"failures", report.failures()}});
    for (const auto& f : report.failures()) failed.push_back(m + ": " + f);
  }
  if (!c.out.empty()) {
    const fs::path dir = prepare_out(c.out);
    write_json(dir / "gradcheck.json", {{"epsilon", eps}, {"tolerance", kGradcheckTolerance}, {"modes", reports}});
    manifest.output(dir / "gradcheck.json");
    manifest.write(dir);
  }
  if (!failed.empty()) {
    std::string msg = "gradient check failed:";
    for (const auto& f : failed) msg += "\n  " + f;
    throw AcceptanceFailure(msg);
  }
  out << "all groups within " << kGradcheckTolerance << '\n';
  return kExitOk;
}

int cmd_sweep(const LexiconOptions& lo, const CommonOptions& c, const std::string& model_path,
              const std::string& data_path, int steps, const std::vector<std::string>& args, std::ostream& out) {
  const Model model = load_checkpoint(model_path);
  const PairEncoder encoder = make_encoder(lo);
  const auto examples = read_dataset(data_path);
  const Evaluation ev = evaluate(model, examples, encoder, default_threshold(model.config.task), c.threads);
  std::vector<double> labels;
  for (const auto& ex : examples) labels.push_back(ex.label);
  const auto sweep = sweep_threshold(ev.scores, labels, model.config.task, steps);
  const ThresholdPoint best = best_threshold(sweep, model.config.task);
  json points = json::array();
  for (const auto& p : sweep) points.push_back({{"threshold", p.threshold}, {"metrics", metrics_json(p.metrics)}});
  const json result = {{"best_threshold", best.threshold},
                       {"best", metrics_json(best.metrics)},
                       {"default_threshold", default_threshold(model.config.task)}};
  out << result.dump(2) << '\n';
  if (!c.out.empty()) {
    const fs::path dir = prepare_out(c.out);
    json full = result;
    full["sweep"] = points;
    write_json(dir / "threshold_sweep.json", full);
    RunManifest manifest("sweep-threshold", args, c.seed);
    manifest.set("config", config_to_json(model.config));
    manifest.input(model_path);
    manifest.input(data_path);
    manifest.inputs(lo.lexicons);
    manifest.input(lo.dict);
    manifest.output(dir / "threshold_sweep.json");
    manifest.write(dir);
  }
  return kExitOk;
}

}  // namespace

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lexicon-gated attention for sentence-pair similarity", "iekm"};
  app.set_config("--config", "", "read options from a TOML/INI file");
  app.require_subcommand(1);

  LexiconOptions lex;
  CommonOptions common;
  ModelOptions model;
  std::string train_path, test_path, data_path, model_path, probe_path, s1, s2;
  std::optional<double> threshold;

  auto* gen = app.add_subcommand("gen-data", "write a synthetic lexicon, dataset and probes");
  std::size_t n = 2000, probes = 60;
  double test_fraction = 0.2;
  std::string gen_task = "classification";
  SyntheticLexiconOptions gen_lex;
  gen->add_option("--n", n, "number of pairs")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--test-fraction", test_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  gen->add_option("--probes", probes)->capture_default_str();
  gen->add_option("--synonym-groups", gen_lex.synonym_groups)->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--entity-groups", gen_lex.entity_groups)->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--related-groups", gen_lex.related_groups)->capture_default_str();
  gen->add_option("--two-word-fraction", gen_lex.two_word_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  gen->add_option("--task", gen_task)->check(CLI::IsMember({"classification", "regression"}))->capture_default_str();
  add_common_options(gen, common, true);

  auto* build = app.add_subcommand("build-matrix", "build and dump M and Mr for one sentence pair");
  add_lexicon_options(build, lex, true);
  add_common_options(build, common, false);
  build->add_option("--s1", s1)->required();
  build->add_option("--s2", s2)->required();
  std::string dump;
  build->add_option("--dump", dump, "write M as CSV to this file");

  auto* train = app.add_subcommand("train", "train a model and save a checkpoint");
  add_lexicon_options(train, lex, true);
  add_common_options(train, common, true);
  add_model_options(train, model);
  train->add_option("--train", train_path, "training JSONL")->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "score a dataset with a checkpoint");
  add_lexicon_options(eval, lex, true);
  add_common_options(eval, common, false);
  eval->add_option("--model", model_path, "checkpoint manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_path, "dataset JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--threshold", threshold, "decision threshold (task default when omitted)");

  auto* ablate = app.add_subcommand("ablate", "train all four ablation modes and compare them");
  add_lexicon_options(ablate, lex, true);
  add_common_options(ablate, common, false);
  add_model_options(ablate, model);
  std::string dataset_path;
  double ablate_test_fraction = 0.2;
  auto* whole = ablate->add_option("--dataset", dataset_path, "one JSONL, split by group")->check(CLI::ExistingFile);
  ablate->add_option("--test-fraction", ablate_test_fraction, "held-out share when --dataset is used")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  ablate->add_option("--train", train_path)->check(CLI::ExistingFile)->excludes(whole);
  ablate->add_option("--test", test_path)->check(CLI::ExistingFile)->excludes(whole);
  ablate->add_option("--threshold", threshold);
  ablate->callback([&] {
    if (dataset_path.empty() && (train_path.empty() || test_path.empty())) {
      throw CLI::RequiredError("ablate needs --dataset or both --train and --test");
    }
  });

  auto* probe = app.add_subcommand("probe", "check that keyword overrides steer the score");
  double bar = 0.8;
  std::size_t min_valid = 50;
  add_lexicon_options(probe, lex, true);
  add_common_options(probe, common, false);
  probe->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  probe->add_option("--probes", probe_path)->required()->check(CLI::ExistingFile);
  probe->add_option("--bar", bar, "required agreement fraction")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  probe->add_option("--min-valid", min_valid)->capture_default_str();

  auto* grad = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  std::string grad_mode = "all", grad_gate = "sigmoid";
  double eps = 1e-5;
  add_common_options(grad, common, false);
  std::vector<std::string> mode_choices = kModes;
  mode_choices.push_back("all");
  grad->add_option("--mode", grad_mode)->check(CLI::IsMember(mode_choices))->capture_default_str();
  grad->add_option("--gate", grad_gate)->check(CLI::IsMember({"sigmoid", "identity"}))->capture_default_str();
  grad->add_option("--eps", eps)->check(CLI::Range(1e-7, 1e-3))->capture_default_str();

  auto* sweep = app.add_subcommand("sweep-threshold", "accuracy over a grid of thresholds");
  int steps = 101;
  add_lexicon_options(sweep, lex, true);
  add_common_options(sweep, common, false);
  sweep->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  sweep->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  sweep->add_option("--steps", steps)->check(CLI::Range(2, 100001))->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  try {
    if (gen->parsed()) return cmd_gen_data(common, n, test_fraction, probes, gen_lex, gen_task, rest, out);
    if (build->parsed()) return cmd_build_matrix(lex, common, s1, s2, dump, rest, out);
    if (train->parsed()) return cmd_train(lex, common, model, train_path, rest, out);
    if (eval->parsed()) return cmd_eval(lex, common, model_path, data_path, threshold, rest, out);
    if (ablate->parsed()) {
      return cmd_ablate(lex, common, model, {train_path, test_path, dataset_path, ablate_test_fraction}, threshold,
                        rest, out);
    }
    if (probe->parsed()) return cmd_probe(lex, common, model_path, probe_path, bar, min_valid, rest, out);
    if (grad->parsed()) return cmd_gradcheck(common, grad_mode, grad_gate, eps, rest, out);
    if (sweep->parsed()) return cmd_sweep(lex, common, model_path, data_path, steps, rest, out);
  } catch (const AcceptanceFailure& e) {
    err << "iekm: " << e.what() << '\n';
    return kExitAcceptance;
  } catch (const std::exception& e) {
    err << "iekm: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace iekm
