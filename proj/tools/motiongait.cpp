// Command-line entry point: synth, train, embed, eval, gradcheck.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "motiongait/checkpoint.hpp"
#include "motiongait/config.hpp"
#include "motiongait/dataset.hpp"
#include "motiongait/error.hpp"
#include "motiongait/eval.hpp"
#include "motiongait/gradcheck.hpp"
#include "motiongait/synth.hpp"
#include "motiongait/training.hpp"

namespace fs = std::filesystem;
using namespace motiongait;

namespace {

// Options shared by every subcommand. They are folded into a RunConfig in
// a fixed order: config file, --set assignments, then dedicated flags.
struct CommonOptions {
  std::string config_file;
  std::vector<std::string> assignments;
  std::optional<std::string> profile;
  std::optional<std::int64_t> seed;
  std::optional<std::int64_t> clip_len;
  std::optional<std::int64_t> parts;
  bool no_mem = false;
  bool no_ffe_local = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value configuration file");
    app->add_option("--set", assignments, "override one key (key=value); repeatable");
    app->add_option("--profile", profile, "desk or full")->check(CLI::IsMember({"desk", "full"}));
    app->add_option("--seed", seed, "random seed");
    app->add_option("--clip-len", clip_len, "MEM clip length");
    app->add_option("--parts", parts, "FFE horizontal parts");
    app->add_flag("--no-mem", no_mem, "disable the motion excitation module");
    app->add_flag("--no-ffe-local", no_ffe_local, "use the global branch in place of the local one");
  }

  void apply(RunConfig& cfg) const {
    if (profile) cfg.set("profile", *profile);
    for (const auto& a : assignments) cfg.set_assignment(a);
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (clip_len) cfg.set("mem.clip_len", std::to_string(*clip_len));
    if (parts) cfg.set("ffe.num_parts", std::to_string(*parts));
    if (no_mem) cfg.set("mem.enabled", "false");
    if (no_ffe_local) cfg.set("ffe.local", "false");
  }

  RunConfig resolve() const {
    RunConfig cfg = config_file.empty() ? RunConfig() : RunConfig::from_file(config_file);
    apply(cfg);
    return cfg;
  }
};

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

std::vector<SilhouetteSequence> load_split(const DatasetIndex& index, const std::string& split) {
  std::vector<const SequenceEntry*> entries;
  if (split == "all") {
    for (const auto& e : index.entries) entries.push_back(&e);
  } else {
    entries = index.split_entries(split == "train");
  }
  std::vector<std::string> warnings;
  auto seqs = load_sequences(entries, warnings);
  print_warnings(warnings);
  return seqs;
}

struct SynthArgs {
  std::string out;
  std::optional<std::int64_t> subjects, frames;
};

void cmd_synth(const CommonOptions& common, const SynthArgs& args) {
  RunConfig cfg = common.resolve();
  if (args.subjects) cfg.set("synth.subjects", std::to_string(*args.subjects));
  if (args.frames) cfg.set("synth.frames", std::to_string(*args.frames));
  const auto manifest = synth_generate(cfg.synth(), args.out);
  cfg.write_echo(args.out);
  std::printf("synth: wrote %zu sequences to %s\n", manifest.size(), args.out.c_str());
}

struct TrainArgs {
  std::string data, out, resume;
  std::optional<std::int64_t> iterations;
};

void cmd_train(const CommonOptions& common, const TrainArgs& args) {
  RunConfig cfg = common.resolve();
  if (args.iterations) cfg.set("train.iterations", std::to_string(*args.iterations));
  const DatasetIndex index = load_dataset(args.data, cfg.split());
  print_warnings(index.warnings);
  if (index.train_subjects.empty()) throw ConfigError("training split is empty");
  const auto auto_classes = static_cast<std::int64_t>(index.train_subjects.size());
  const NetworkConfig net = cfg.network(auto_classes);
  cfg.set("model.num_classes", std::to_string(net.num_classes));
  const TrainConfig train = cfg.train();

  auto seqs = load_split(index, "train");
  std::vector<std::int64_t> labels;
  for (const auto& s : seqs) labels.push_back(index.class_ids.at(s.key.subject));
  make_dir(args.out);
  cfg.write_echo(args.out);
  Trainer trainer(net, train, std::move(seqs), std::move(labels), cfg.echo());
  if (!args.resume.empty()) trainer.resume(args.resume);
  trainer.run(args.out);
  const auto& h = trainer.history();
  if (!h.empty()) {
    std::printf("train: %lld iterations, final joint loss %.6g, checkpoint %s\n",
                static_cast<long long>(trainer.iteration()), h.back().joint, (fs::path(args.out) / "final.mgck").c_str());
  } else {
    std::printf("train: nothing to do, checkpoint already at iteration %lld\n",
                static_cast<long long>(trainer.iteration()));
  }
}

struct EmbedArgs {
  std::string checkpoint, data, out, split = "test";
};

void cmd_embed(const CommonOptions& common, const EmbedArgs& args) {
  const Checkpoint ckpt = read_checkpoint(args.checkpoint);
  RunConfig cfg = RunConfig::parse(ckpt.config_echo, args.checkpoint + " (config echo)");
  // The architecture comes from the checkpoint; only data selection may differ.
  if (!common.config_file.empty() || common.profile || common.seed || common.clip_len || common.parts ||
      common.no_mem || common.no_ffe_local) {
    throw ConfigError("embed takes its configuration from the checkpoint; only --set data.* is accepted");
  }
  for (const auto& a : common.assignments) {
    if (a.rfind("data.", 0) != 0) throw ConfigError("embed accepts only data.* overrides, got '" + a + "'");
    cfg.set_assignment(a);
  }
  const NetworkConfig net = cfg.network();
  NetworkParams<float> params = init_params<float>(net, 0);
  restore_network(ckpt, params);

  const DatasetIndex index = load_dataset(args.data, cfg.split());
  print_warnings(index.warnings);
  const auto seqs = load_split(index, args.split);
  const auto desc = embed_sequences(seqs, net, params);
  std::vector<EmbeddingRecord> records;
  for (std::size_t i = 0; i < seqs.size(); ++i) records.push_back({seqs[i].key, desc[i]});
  make_dir(args.out);
  write_embeddings(fs::path(args.out) / "embeddings.mgemb", records);
  cfg.write_echo(args.out);
  std::printf("embed: %zu records of dim %lld to %s\n", records.size(), static_cast<long long>(net.descriptor_dim()),
              (fs::path(args.out) / "embeddings.mgemb").c_str());
}

struct EvalArgs {
  std::string embeddings, out;
};

void cmd_eval(const CommonOptions& common, const EvalArgs& args) {
  const RunConfig cfg = common.resolve();
  const auto records = read_embeddings(args.embeddings);
  const EvalReport report = evaluate(records);
  print_warnings(report.warnings);
  const std::string table = format_table(report);
  make_dir(args.out);
  const fs::path dir(args.out);
  {
    std::ofstream txt(dir / "report.txt", std::ios::trunc);
    txt << table;
    std::ofstream json(dir / "report.json", std::ios::trunc);
    json << report_json(report);
    if (!txt || !json) throw IoError("cannot write report in " + dir.string());
  }
  cfg.write_echo(dir);
  std::cout << table;
}

struct GradcheckArgs {
  std::string out;
  double op_tol = 1e-5;
  double model_tol = 1e-4;
};

void cmd_gradcheck(const CommonOptions& common, const GradcheckArgs& args) {
  const RunConfig cfg = common.resolve();
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  auto reports = run_op_grad_suite(seed, args.op_tol);
  reports.push_back(model_grad_check(seed, args.model_tol));
  std::string text;
  int failed = 0;
  for (const auto& r : reports) {
    text += format_report(r) + "\n";
    failed += r.passed() ? 0 : 1;
  }
  text += failed == 0 ? "gradcheck: all " + std::to_string(reports.size()) + " checks passed\n"
                      : "gradcheck: " + std::to_string(failed) + " of " + std::to_string(reports.size()) + " checks failed\n";
  std::cout << text;
  if (!args.out.empty()) {
    make_dir(args.out);
    std::ofstream(fs::path(args.out) / "gradcheck.txt", std::ios::trunc) << text;
    cfg.write_echo(args.out);
  }
  if (failed > 0) throw NumericError(std::to_string(failed) + " gradient checks exceeded tolerance");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MotionGait gait recognition toolkit"};
  app.require_subcommand(1);

  CommonOptions synth_common, train_common, embed_common, eval_common, grad_common;

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic silhouette dataset");
  synth_common.attach(synth);
  synth->add_option("--out", synth_args.out, "dataset root")->required();
  synth->add_option("--subjects", synth_args.subjects, "number of subjects");
  synth->add_option("--frames", synth_args.frames, "frames per sequence");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a model on the training split");
  train_common.attach(train);
  train->add_option("--data", train_args.data, "dataset root")->required();
  train->add_option("--out", train_args.out, "run directory")->required();
  train->add_option("--iterations", train_args.iterations, "total training iterations");
  train->add_option("--resume", train_args.resume, "checkpoint to continue from");

  EmbedArgs embed_args;
  auto* embed = app.add_subcommand("embed", "compute descriptors for a dataset split");
  embed_common.attach(embed);
  embed->add_option("--checkpoint", embed_args.checkpoint, "trained checkpoint")->required();
  embed->add_option("--data", embed_args.data, "dataset root")->required();
  embed->add_option("--out", embed_args.out, "output directory")->required();
  embed->add_option("--split", embed_args.split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "cross-view rank-1 evaluation");
  eval_common.attach(eval);
  eval->add_option("--embeddings", eval_args.embeddings, "embedding file")->required();
  eval->add_option("--out", eval_args.out, "report directory")->required();

  GradcheckArgs grad_args;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  grad_common.attach(grad);
  grad->add_option("--out", grad_args.out, "report directory");
  grad->add_option("--op-tol", grad_args.op_tol, "relative tolerance for single ops");
  grad->add_option("--model-tol", grad_args.model_tol, "relative tolerance for the micro model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "config_error: " << e.what() << '\n';
    return exit_code_for(ErrorKind::Config);
  }

  try {
    if (synth->parsed()) cmd_synth(synth_common, synth_args);
    if (train->parsed()) cmd_train(train_common, train_args);
    if (embed->parsed()) cmd_embed(embed_common, embed_args);
    if (eval->parsed()) cmd_eval(eval_common, eval_args);
    if (grad->parsed()) cmd_gradcheck(grad_common, grad_args);
  } catch (const Error& e) {
    std::cerr << error_kind_name(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "io_error: " << e.what() << '\n';
    return exit_code_for(ErrorKind::Io);
  }
  return 0;
}
