// pianofinger: train, decode and score piano fingering taggers over PIG files.
//
// Subcommands: ingest, train, predict, eval, goldstats, gradcheck.
// Results go to stdout, diagnostics to stderr; exit code 0 means no errors.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pianofinger/config.hpp"
#include "pianofinger/decode.hpp"
#include "pianofinger/gradcheck.hpp"
#include "pianofinger/metrics.hpp"
#include "pianofinger/model.hpp"
#include "pianofinger/pig.hpp"
#include "pianofinger/train.hpp"

namespace fs = std::filesystem;
using namespace pianofinger;

namespace {

std::vector<ManifestEntry> read_manifest(const fs::path& dataset_dir,
                                         const std::string& manifest_flag) {
  fs::path path = manifest_flag.empty() ? dataset_dir / "manifest.txt" : fs::path(manifest_flag);
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest " + path.string());
  return parse_manifest(in, path.string());
}

FullConfig load_full_config(const std::string& config_flag, std::uint64_t seed_flag,
                            bool seed_set) {
  FullConfig cfg;
  if (!config_flag.empty()) cfg = config_from_map(parse_config_file(config_flag));
  if (seed_set) cfg.train.seed = seed_flag;
  return cfg;
}

Split split_from_flag(const std::string& name) { return parse_split_name(name); }

struct LoadedModel {
  FullConfig cfg;
  std::unique_ptr<Model<float>> model;
  TrainerState state;
};

LoadedModel model_from_checkpoint(const fs::path& path) {
  auto ck = load_checkpoint<float>(path);
  LoadedModel out;
  out.cfg = config_from_text(ck.config_text);
  RngState init(out.cfg.train.seed);
  out.model = std::make_unique<Model<float>>(out.cfg.model, init);
  apply_checkpoint(ck, out.model->params());
  out.state = ck.state;
  return out;
}

std::vector<int> decode_part(const Model<float>& model, const HandPart& part,
                             const DecodeConfig& dc, std::uint64_t seed) {
  switch (dc.mode) {
    case DecodeMode::Greedy:
      return greedy_decode(model, part);
    case DecodeMode::Beam:
      return beam_decode(model, part, dc.beam_width).labels;
    case DecodeMode::Sample: {
      RngState rng(seed);
      return ancestral_sample(model, part, rng).labels;
    }
  }
  throw ConfigError("bad decode mode");
}

int cmd_ingest(const std::string& dataset_dir, const std::string& manifest_flag) {
  auto manifest = read_manifest(dataset_dir, manifest_flag);
  bool any_error = false;
  for (Split split : {Split::Train, Split::Validation, Split::Test}) {
    LoadStats stats;
    load_corpus(dataset_dir, manifest, split, &stats);
    std::cout << "split=" << split_name(split) << " pieces=" << stats.pieces
              << " annotated_songs=" << stats.annotated_songs << " parts=" << stats.parts
              << " examples=" << stats.examples << " notes=" << stats.notes << "\n";
    for (const auto& warning : stats.warnings) std::cerr << "warning: " << warning << "\n";
    for (const auto& error : stats.errors) {
      std::cerr << "error: " << error << "\n";
      any_error = true;
    }
  }
  return any_error ? 1 : 0;
}

int cmd_train(const std::string& dataset_dir, const std::string& out_dir,
              const std::string& manifest_flag, const std::string& config_flag,
              std::uint64_t seed_flag, bool seed_set, const std::string& resume) {
  FullConfig cfg = load_full_config(config_flag, seed_flag, seed_set);
  auto manifest = read_manifest(dataset_dir, manifest_flag);
  LoadStats train_stats, val_stats;
  Corpus train_corpus = load_corpus(dataset_dir, manifest, Split::Train, &train_stats);
  Corpus val_corpus = load_corpus(dataset_dir, manifest, Split::Validation, &val_stats);
  for (const auto& e : train_stats.errors) std::cerr << "error: " << e << "\n";
  for (const auto& e : val_stats.errors) std::cerr << "error: " << e << "\n";
  if (!train_stats.errors.empty() || !val_stats.errors.empty()) return 1;
  if (train_corpus.parts.empty()) {
    std::cerr << "error: no training parts in " << dataset_dir << "\n";
    return 1;
  }

  fs::create_directories(out_dir);
  std::ofstream log(fs::path(out_dir) / "train.log", std::ios::trunc);
  if (!log) {
    std::cerr << "error: cannot write " << out_dir << "/train.log\n";
    return 1;
  }

  std::unique_ptr<Model<float>> model;
  if (!resume.empty()) {
    auto ck = load_checkpoint<float>(resume);
    FullConfig saved = config_from_text(ck.config_text);
    if (config_to_text(saved) != config_to_text(cfg)) {
      std::cerr << "error: checkpoint config does not match the requested config\n";
      return 1;
    }
    RngState init(cfg.train.seed);
    model = std::make_unique<Model<float>>(cfg.model, init);
    apply_checkpoint(ck, model->params());
    Trainer<float> trainer(*model, cfg);
    trainer.restore(ck.state);
    trainer.run(train_corpus, val_corpus, out_dir, log);
  } else {
    RngState init(cfg.train.seed);
    model = std::make_unique<Model<float>>(cfg.model, init);
    Trainer<float> trainer(*model, cfg);
    trainer.run(train_corpus, val_corpus, out_dir, log);
  }
  std::cout << "trained " << train_stats.examples << " examples for " << cfg.train.epochs
            << " epochs; checkpoints in " << out_dir << "\n";
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& input,
                const std::string& out_path, const std::string& decode_flag, int beam_flag,
                std::uint64_t seed_flag) {
  LoadedModel loaded = model_from_checkpoint(checkpoint);
  DecodeConfig dc = loaded.cfg.decode;
  if (!decode_flag.empty()) dc.mode = decode_mode_from_name(decode_flag);
  if (beam_flag > 0) dc.beam_width = beam_flag;

  auto records = parse_pig_file(input);
  std::string stem = fs::path(input).stem().string();
  auto [right, left] = split_hands(records, stem);
  if (!left.notes.empty()) left = reflect_left_hand(std::move(left));
  right = order_notes(std::move(right));
  left = order_notes(std::move(left));

  std::vector<const HandPart*> parts;
  std::vector<std::vector<int>> predictions;
  for (HandPart* part : {&right, &left}) {
    if (part->notes.empty()) continue;
    parts.push_back(part);
    predictions.push_back(decode_part(*loaded.model, *part, dc, seed_flag));
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) {
    std::cerr << "error: cannot write " << out_path << "\n";
    return 1;
  }
  out << serialize_pig_parts(parts, predictions);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

// Match a prediction part to each gold part by piece, hand geometry and note
// sequence.
const HandPart* find_prediction(const std::vector<HandPart>& pred_parts, const HandPart& gold) {
  for (const auto& part : pred_parts) {
    if (piece_id_of(part.source_id) != piece_id_of(gold.source_id)) continue;
    if (part.reflected != gold.reflected) continue;
    if (part.notes.size() != gold.notes.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < part.notes.size() && same; ++i) {
      same = part.notes[i].same_event(gold.notes[i]);
    }
    if (same) return &part;
  }
  return nullptr;
}

int cmd_eval(const std::string& gold_dir, const std::string& manifest_flag,
             const std::string& split_flag, const std::string& pred_dir,
             const std::string& checkpoint, const std::string& decode_flag, int beam_flag,
             std::uint64_t seed_flag, bool per_piece) {
  if (pred_dir.empty() == checkpoint.empty()) {
    std::cerr << "error: eval needs exactly one of --pred-dir or --checkpoint\n";
    return 1;
  }
  auto manifest = read_manifest(gold_dir, manifest_flag);
  Split split = split_from_flag(split_flag);
  LoadStats stats;
  Corpus gold = load_corpus(gold_dir, manifest, split, &stats);
  for (const auto& e : stats.errors) std::cerr << "error: " << e << "\n";
  if (!stats.errors.empty()) return 1;
  if (gold.parts.empty()) {
    std::cerr << "error: no gold parts in split " << split_name(split) << "\n";
    return 1;
  }

  std::vector<HandPart> pred_parts;
  std::unique_ptr<Model<float>> model;
  DecodeConfig dc;
  if (!pred_dir.empty()) {
    for (const auto& entry : fs::directory_iterator(pred_dir)) {
      if (!entry.is_regular_file()) continue;
      auto records = parse_pig_file(entry.path());
      std::string stem = entry.path().stem().string();
      auto [right, left] = split_hands(records, stem);
      if (!left.notes.empty()) left = reflect_left_hand(std::move(left));
      if (!right.notes.empty()) pred_parts.push_back(order_notes(std::move(right)));
      if (!left.notes.empty()) pred_parts.push_back(order_notes(std::move(left)));
    }
    if (pred_parts.empty()) {
      std::cerr << "error: no predictions in " << pred_dir << "\n";
      return 1;
    }
  } else {
    LoadedModel loaded = model_from_checkpoint(checkpoint);
    model = std::move(loaded.model);
    dc = loaded.cfg.decode;
    if (!decode_flag.empty()) dc.mode = decode_mode_from_name(decode_flag);
    if (beam_flag > 0) dc.beam_width = beam_flag;
  }

  std::vector<PartMetrics> per_part;
  std::vector<std::string> misaligned;
  for (const HandPart& part : gold.parts) {
    std::vector<int> predictions;
    if (model) {
      predictions = decode_part(*model, part, dc, seed_flag);
    } else {
      const HandPart* match = find_prediction(pred_parts, part);
      if (!match) {
        misaligned.push_back(part.source_id);
        continue;
      }
      predictions = match->annotations.at(0);
    }
    per_part.push_back(part_metrics(part, predictions));
    if (per_piece) {
      MetricsReport one = aggregate({per_part.back()});
      std::cout << part.source_id << "\t" << report_tsv(one);
    }
  }
  for (const auto& id : misaligned) std::cerr << "error: no aligned prediction for " << id << "\n";
  if (per_part.empty()) {
    std::cerr << "error: nothing evaluated\n";
    return 1;
  }
  MetricsReport report = aggregate(per_part);
  std::cout << report_tsv(report) << "\n" << report_table(report) << "\n"
            << confusion_table(report);
  return misaligned.empty() ? 0 : 1;
}

int cmd_goldstats(const std::string& gold_dir, const std::string& manifest_flag,
                  const std::string& split_flag) {
  auto manifest = read_manifest(gold_dir, manifest_flag);
  Split split = split_from_flag(split_flag);
  LoadStats stats;
  Corpus gold = load_corpus(gold_dir, manifest, split, &stats);
  for (const auto& e : stats.errors) std::cerr << "error: " << e << "\n";
  if (!stats.errors.empty()) return 1;
  if (gold.parts.empty()) {
    std::cerr << "error: empty split " << split_name(split) << "\n";
    return 1;
  }
  std::vector<PartMetrics> per_annotation;
  for (const HandPart& part : gold.parts) {
    for (const auto& annotation : part.annotations) {
      PartMetrics m;
      m.n_notes = static_cast<long>(part.notes.size());
      count_fluency(m, part.notes, annotation);
      m.mgen_percent = 100.0;  // each annotation scored against itself
      if (part.notes.size() >= 4) {
        m.fourgram_windows = static_cast<long>(part.notes.size()) - 3;
        m.fourgram_hits = m.fourgram_windows;
      }
      for (std::size_t i = 0; i < part.notes.size(); ++i) {
        ++m.confusion[annotation[i] - 1][annotation[i] - 1];
      }
      per_annotation.push_back(m);
    }
  }
  MetricsReport report = aggregate(per_annotation);
  std::cout << report_tsv(report) << "\n" << report_table(report) << "\n"
            << confusion_table(report);
  return 0;
}

int cmd_gradcheck(int sample_elements) {
  GradCheckOptions opt;
  opt.max_elements_per_param = sample_elements;
  bool all_pass = true;
  auto started = std::chrono::steady_clock::now();
  for (const auto& report : gradcheck_all(opt)) {
    std::cout << "architecture " << model_kind_name(report.kind) << "\n";
    for (const auto& group : report.groups) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "  %-16s worst_rel=%.3e\n", group.name.c_str(),
                    group.worst_rel);
      std::cout << buf;
    }
    std::cout << "  => " << (report.pass ? "PASS" : "FAIL") << " (worst " << report.worst_rel
              << ", tolerance " << report.tolerance << ")\n";
    all_pass = all_pass && report.pass;
  }
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - started)
                     .count();
  std::cout << (all_pass ? "gradcheck PASS" : "gradcheck FAIL") << " in " << elapsed << " ms\n";
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"piano fingering prediction over PIG-format scores"};
  app.require_subcommand(1);

  std::string config_flag, manifest_flag, split_flag = "test";
  std::string out_flag, decode_flag, resume_flag, pred_dir_flag, checkpoint_flag;
  std::uint64_t seed_flag = 0;
  int beam_flag = 0;
  bool per_piece = false;

  auto* ingest = app.add_subcommand("ingest", "parse a dataset and report split statistics");
  std::string dataset_dir;
  ingest->add_option("dataset_dir", dataset_dir, "directory of PIG files")->required();
  ingest->add_option("--manifest", manifest_flag, "manifest path (default <dir>/manifest.txt)");

  auto* train = app.add_subcommand("train", "train a model and write checkpoints");
  std::string train_out;
  train->add_option("dataset_dir", dataset_dir)->required();
  train->add_option("out_dir", train_out, "output directory for checkpoints and log")->required();
  train->add_option("--manifest", manifest_flag);
  train->add_option("--config", config_flag, "flat key = value config file");
  auto* seed_opt = train->add_option("--seed", seed_flag, "override the config seed");
  train->add_option("--resume", resume_flag, "checkpoint to continue from");

  auto* predict = app.add_subcommand("predict", "fill the finger column of a PIG file");
  std::string predict_ckpt, predict_in;
  predict->add_option("checkpoint", predict_ckpt)->required();
  predict->add_option("input", predict_in, "PIG file to annotate")->required();
  predict->add_option("--out", out_flag, "output PIG path")->required();
  predict->add_option("--decode", decode_flag, "greedy|beam|sample");
  predict->add_option("--beam", beam_flag, "beam width");
  predict->add_option("--seed", seed_flag, "sampling seed");

  auto* eval = app.add_subcommand("eval", "score predictions against gold annotations");
  std::string eval_gold;
  eval->add_option("gold_dir", eval_gold)->required();
  eval->add_option("--manifest", manifest_flag);
  eval->add_option("--split", split_flag, "train|val|test (default test)");
  eval->add_option("--pred-dir", pred_dir_flag, "directory of predicted PIG files");
  eval->add_option("--checkpoint", checkpoint_flag, "decode this checkpoint instead");
  eval->add_option("--decode", decode_flag);
  eval->add_option("--beam", beam_flag);
  eval->add_option("--seed", seed_flag);
  eval->add_flag("--per-piece", per_piece, "also print one row per part");

  auto* goldstats = app.add_subcommand("goldstats", "fluency statistics of the gold labels");
  std::string gold_dir;
  goldstats->add_option("gold_dir", gold_dir)->required();
  goldstats->add_option("--manifest", manifest_flag);
  goldstats->add_option("--split", split_flag);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check, all architectures");
  int sample_elements = 0;
  gradcheck->add_option("--sample", sample_elements,
                        "check only ~N elements per parameter (0 = all)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(dataset_dir, manifest_flag);
    if (*train) {
      return cmd_train(dataset_dir, train_out, manifest_flag, config_flag, seed_flag,
                       seed_opt->count() > 0, resume_flag);
    }
    if (*predict) {
      return cmd_predict(predict_ckpt, predict_in, out_flag, decode_flag, beam_flag, seed_flag);
    }
    if (*eval) {
      return cmd_eval(eval_gold, manifest_flag, split_flag, pred_dir_flag, checkpoint_flag,
                      decode_flag, beam_flag, seed_flag, per_piece);
    }
    if (*goldstats) return cmd_goldstats(gold_dir, manifest_flag, split_flag);
    if (*gradcheck) return cmd_gradcheck(sample_elements);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
