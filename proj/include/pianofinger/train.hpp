#pragma once

#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "pianofinger/adam.hpp"
#include "pianofinger/checkpoint.hpp"
#include "pianofinger/config.hpp"
#include "pianofinger/decode.hpp"
#include "pianofinger/metrics.hpp"
#include "pianofinger/model.hpp"

namespace pianofinger {

// ---------------------------------------------------------------------------
// Chunk reward: exp(-(#different-note same-finger pairs + #same-finger
// overlapping pairs)). The two sets are counted independently, so an
// overlapping different-pitch same-finger pair contributes to both. The
// disjoint variant counts each offending pair once (the hop/smear reading).
// ---------------------------------------------------------------------------

inline double chunk_reward(const Note* notes, const int* labels, std::size_t len,
                           bool disjoint = false) {
  if (len < 2) throw ContractError("reward needs a chunk of at least 2 notes");
  int penalty = 0;
  for (std::size_t i = 0; i + 1 < len; ++i) {
    if (labels[i] != labels[i + 1]) continue;
    const bool pitch_differs = notes[i].pitch != notes[i + 1].pitch;
    const bool overlap = notes[i].offset > notes[i + 1].onset;
    if (disjoint) {
      if (pitch_differs || overlap) ++penalty;
    } else {
      if (pitch_differs) ++penalty;
      if (overlap) ++penalty;
    }
  }
  return std::exp(static_cast<double>(-penalty));
}

inline double chunk_reward(const std::vector<Note>& notes, const std::vector<int>& labels,
                           bool disjoint = false) {
  if (notes.size() != labels.size()) throw ContractError("reward: length mismatch");
  return chunk_reward(notes.data(), labels.data(), notes.size(), disjoint);
}

// Rolling mean over the last `cap` chunk rewards; 1.0 (the reward maximum)
// before any chunk has been scored.
class RewardBaseline {
 public:
  explicit RewardBaseline(int cap) : cap_(cap) {
    if (cap < 1) throw ContractError("baseline window must be >= 1");
  }

  double mean() const {
    if (entries_.empty()) return 1.0;
    double sum = 0.0;
    for (double r : entries_) sum += r;
    return sum / static_cast<double>(entries_.size());
  }

  void add(double r) {
    entries_.push_back(r);
    if (entries_.size() > static_cast<std::size_t>(cap_)) entries_.pop_front();
  }

  int cap() const { return cap_; }
  std::vector<double> snapshot() const { return {entries_.begin(), entries_.end()}; }

  void restore(int cap, const std::vector<double>& entries) {
    cap_ = cap;
    entries_.assign(entries.begin(), entries.end());
    while (entries_.size() > static_cast<std::size_t>(cap_)) entries_.pop_front();
  }

 private:
  int cap_;
  std::deque<double> entries_;
};

// ---------------------------------------------------------------------------
// Losses. Each call builds its own tape, runs backward, and accumulates
// gradients into the model's parameter store.
// ---------------------------------------------------------------------------

// Teacher-forced mean per-note cross entropy, built on the caller's tape.
template <typename T>
inline typename Tape<T>::Var build_ce_var(Model<T>& model, Tape<T>& tape, const HandPart& part,
                                          const std::vector<int>& gold, RngState& rng,
                                          bool train = true) {
  const std::size_t n = part.notes.size();
  if (gold.size() != n) throw ContractError("ce_loss: gold/notes length mismatch");
  auto ctx = model.make_context(tape, part, train, rng);
  auto stepper = model.start(tape, ctx, train, &rng);
  std::vector<typename Tape<T>::Var> terms;
  terms.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    terms.push_back(softmax_xent(tape, stepper.step_logits(), gold[i]));
    stepper.advance(gold[i]);
  }
  std::vector<T> coeffs(n, static_cast<T>(1.0 / static_cast<double>(n)));
  return tape.weighted_sum(std::span<const typename Tape<T>::Var>(terms.data(), n),
                           std::span<const T>(coeffs.data(), n));
}

template <typename T>
inline double ce_loss(Model<T>& model, const HandPart& part, const std::vector<int>& gold,
                      RngState& rng) {
  if (part.notes.empty()) return 0.0;
  Tape<T> tape(true);
  auto loss = build_ce_var(model, tape, part, gold, rng);
  double value = static_cast<double>(tape.value(loss)[0]);
  tape.backward(loss);
  return value;
}

// One sampled chunk of the REINFORCE pass: where it started, what was drawn,
// its reward, and the weight (rbar - r)/N_chunk its log-probs received.
struct SampledChunk {
  std::size_t start = 0;
  std::vector<int> labels;
  double reward = 0.0;
  double coef = 0.0;
};

// REINFORCE over consecutive chunks. Within a chunk, labels are sampled
// ancestrally on the model's own prefix; outside it the context is the
// teacher-forced gold prefix. Rewards and the baseline are constants: the
// gradient flows only through the log-prob terms. The baseline absorbs each
// chunk's reward after that chunk's contribution is weighed.
//
// When `forced` is given the recorded chunks are replayed instead of sampled
// (the finite-difference oracle needs a deterministic loss); `record`
// captures the sampled chunks for such a replay.
//
// Builds the REINFORCE scalar on the caller's tape. Returns -1 (no var) when
// the part yields no scoreable chunk.
template <typename T>
inline typename Tape<T>::Var build_reinforce_var(
    Model<T>& model, Tape<T>& tape, const HandPart& part, const std::vector<int>& gold,
    RewardBaseline* baseline, RngState& rng, int chunk_len, bool reward_disjoint,
    std::vector<SampledChunk>* record = nullptr,
    const std::vector<SampledChunk>* forced = nullptr) {
  using Var = typename Tape<T>::Var;
  const std::size_t n = part.notes.size();
  if (gold.size() != n) throw ContractError("reinforce_loss: gold/notes length mismatch");
  if (chunk_len < 2) throw ContractError("chunk_len must be >= 2");
  if (n < 2) return -1;

  auto ctx = model.make_context(tape, part, true, rng);
  auto trunk = model.start(tape, ctx, true, &rng);

  std::vector<Var> contributions;
  std::size_t forced_at = 0;
  for (std::size_t start = 0; start < n; start += chunk_len) {
    const std::size_t len = std::min<std::size_t>(chunk_len, n - start);
    if (len < 2) break;  // final chunk too short to score
    auto branch = trunk;  // gold prefix state shared with every chunk
    std::vector<Var> logps;
    std::vector<int> labels;
    logps.reserve(len);
    labels.reserve(len);
    for (std::size_t i = 0; i < len; ++i) {
      Var logits = branch.step_logits();
      int label;
      if (forced) {
        label = (*forced)[forced_at].labels[i];
      } else {
        Tensor<T> probs = softmax_values(tape.value(logits));
        double u = rng.uniform();
        label = kNumFingers;
        double cum = 0.0;
        for (int k = 0; k < kNumFingers; ++k) {
          cum += static_cast<double>(probs[k]);
          if (u < cum) {
            label = k + 1;
            break;
          }
        }
      }
      logps.push_back(tape.log_prob(logits, label - 1));
      labels.push_back(label);
      branch.advance(label);
    }
    double reward, coef;
    if (forced) {
      reward = (*forced)[forced_at].reward;
      coef = (*forced)[forced_at].coef;
      ++forced_at;
    } else {
      reward = chunk_reward(part.notes.data() + start, labels.data(), len, reward_disjoint);
      coef = (baseline->mean() - reward) / static_cast<double>(len);
      baseline->add(reward);
    }
    std::vector<T> coeffs(len, static_cast<T>(coef));
    contributions.push_back(tape.weighted_sum(std::span<const Var>(logps.data(), len),
                                              std::span<const T>(coeffs.data(), len)));
    if (record) record->push_back({start, labels, reward, coef});
    // Advance the trunk through this chunk on gold labels.
    for (std::size_t i = 0; i < len; ++i) trunk.consume(gold[start + i]);
  }
  if (contributions.empty()) return -1;
  std::vector<T> ones(contributions.size(), T(1));
  return tape.weighted_sum(std::span<const Var>(contributions.data(), contributions.size()),
                           std::span<const T>(ones.data(), ones.size()));
}

template <typename T>
inline double reinforce_loss(Model<T>& model, const HandPart& part, const std::vector<int>& gold,
                             RewardBaseline& baseline, RngState& rng, int chunk_len,
                             bool reward_disjoint, double lambda_scale = 1.0) {
  Tape<T> tape(true);
  auto rl = build_reinforce_var(model, tape, part, gold, &baseline, rng, chunk_len,
                                reward_disjoint);
  if (rl < 0) return 0.0;
  double value = static_cast<double>(tape.value(rl)[0]);
  auto root = lambda_scale == 1.0 ? rl : tape.scale(rl, static_cast<T>(lambda_scale));
  tape.backward(root);
  return value;
}

// ---------------------------------------------------------------------------
// Epoch loop. Each (part, annotator) pair is an independent example; example
// order reshuffles every epoch from the trainer's RNG stream.
// ---------------------------------------------------------------------------

struct EpochStats {
  double mean_ce = 0.0;
  double mean_rl = 0.0;
  double baseline_mean = 1.0;
  long examples = 0;
};

template <typename T>
inline EpochStats train_epoch(Model<T>& model, const Corpus& corpus, const TrainConfig& tc,
                              const AdamConfig& adam, RewardBaseline& baseline, RngState& rng,
                              bool rl_active) {
  std::vector<std::pair<std::size_t, std::size_t>> examples;
  for (std::size_t p = 0; p < corpus.parts.size(); ++p) {
    for (std::size_t k = 0; k < corpus.parts[p].annotations.size(); ++k) {
      examples.emplace_back(p, k);
    }
  }
  rng.shuffle(examples);
  EpochStats stats;
  int pending = 0;
  for (const auto& [p, k] : examples) {
    const HandPart& part = corpus.parts[p];
    const std::vector<int>& gold = part.annotations[k];
    try {
      stats.mean_ce += ce_loss(model, part, gold, rng);
      if (rl_active && tc.lambda_rl > 0.0) {
        stats.mean_rl += reinforce_loss(model, part, gold, baseline, rng, tc.chunk_len,
                                        tc.reward_disjoint, tc.lambda_rl);
      }
    } catch (const NumericError& e) {
      throw NumericError("epoch aborted at example " + part.source_id + " annotator " +
                         std::to_string(k) + ": " + e.what());
    }
    ++stats.examples;
    if (++pending == tc.batch_parts) {
      adam_step(model.params(), adam);
      pending = 0;
    }
  }
  if (pending > 0) adam_step(model.params(), adam);
  if (stats.examples > 0) {
    stats.mean_ce /= static_cast<double>(stats.examples);
    stats.mean_rl /= static_cast<double>(stats.examples);
  }
  stats.baseline_mean = baseline.mean();
  return stats;
}

// ---------------------------------------------------------------------------
// Validation summary used during training: greedy decode, corpus metrics.
// ---------------------------------------------------------------------------

struct ValidationStats {
  double m_gen = 0.0;
  double fourgram = 0.0;
  long hop = 0;
  long smear = 0;
};

template <typename T>
inline ValidationStats validate(const Model<T>& model, const Corpus& corpus) {
  std::vector<PartMetrics> per_part;
  per_part.reserve(corpus.parts.size());
  for (const HandPart& part : corpus.parts) {
    per_part.push_back(part_metrics(part, greedy_decode(model, part)));
  }
  MetricsReport report = aggregate(per_part);
  return {report.m_gen, report.fourgram, report.hop, report.smear};
}

// ---------------------------------------------------------------------------
// Full training driver: warm start, mixed objective, validation-driven
// checkpointing, deterministic line-oriented logging.
// ---------------------------------------------------------------------------

class TrainLog {
 public:
  explicit TrainLog(std::ostream& out) : out_(out) {}

  void epoch(int epoch, std::int64_t step, const EpochStats& s) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "epoch=%d step=%lld ce_loss=%.9e rl_loss=%.9e rbar=%.9e\n",
                  epoch, static_cast<long long>(step), s.mean_ce, s.mean_rl, s.baseline_mean);
    out_ << buf;
    out_.flush();
  }

  void validation(int epoch, std::int64_t step, const ValidationStats& v) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "epoch=%d step=%lld val_mgen=%.9e val_fourgram=%.9e val_hop=%ld val_smear=%ld\n",
                  epoch, static_cast<long long>(step), v.m_gen, v.fourgram, v.hop, v.smear);
    out_ << buf;
    out_.flush();
  }

 private:
  std::ostream& out_;
};

template <typename T>
class Trainer {
 public:
  Trainer(Model<T>& model, const FullConfig& cfg)
      : model_(model),
        cfg_(cfg),
        baseline_(cfg.train.baseline_window),
        rng_(cfg.train.seed) {}

  // Continue from a checkpointed trainer state (params already applied).
  void restore(const TrainerState& state) {
    restore_rng(rng_, state.rng);
    baseline_.restore(static_cast<int>(state.baseline_cap), state.baseline_entries);
    next_epoch_ = state.next_epoch;
    global_step_ = state.global_step;
    best_mgen_ = state.best_mgen;
    best_fourgram_ = state.best_fourgram;
  }

  TrainerState state() const {
    TrainerState s;
    s.rng = snapshot_rng(rng_);
    s.global_step = global_step_;
    s.next_epoch = next_epoch_;
    s.best_mgen = best_mgen_;
    s.best_fourgram = best_fourgram_;
    s.baseline_cap = static_cast<std::uint32_t>(baseline_.cap());
    s.baseline_entries = baseline_.snapshot();
    return s;
  }

  // Runs epochs [next_epoch, epochs). Writes last.ckpt each epoch and
  // best_mgen.ckpt / best_fourgram.ckpt on validation improvements.
  void run(const Corpus& train_corpus, const Corpus& val_corpus,
           const std::filesystem::path& out_dir, std::ostream& log_stream) {
    TrainLog log(log_stream);
    const std::string config_text = config_to_text(cfg_);
    AdamConfig adam{cfg_.train.lr, 0.9, 0.999, 1e-8};
    for (int epoch = next_epoch_; epoch < cfg_.train.epochs; ++epoch) {
      const bool rl_active = epoch >= cfg_.train.warmup_epochs && cfg_.train.lambda_rl > 0.0;
      EpochStats stats =
          train_epoch(model_, train_corpus, cfg_.train, adam, baseline_, rng_, rl_active);
      global_step_ = model_.params().step();
      log.epoch(epoch, global_step_, stats);
      const bool due = (epoch + 1) % cfg_.train.eval_every == 0 ||
                       epoch + 1 == cfg_.train.epochs;
      if (due && !val_corpus.parts.empty()) {
        ValidationStats v = validate(model_, val_corpus);
        log.validation(epoch, global_step_, v);
        next_epoch_ = epoch + 1;
        if (v.m_gen > best_mgen_) {
          best_mgen_ = v.m_gen;
          save_checkpoint(out_dir / "best_mgen.ckpt", config_text, model_.params(), state());
        }
        if (v.fourgram > best_fourgram_) {
          best_fourgram_ = v.fourgram;
          save_checkpoint(out_dir / "best_fourgram.ckpt", config_text, model_.params(), state());
        }
      }
      next_epoch_ = epoch + 1;
      save_checkpoint(out_dir / "last.ckpt", config_text, model_.params(), state());
    }
  }

  double best_mgen() const { return best_mgen_; }
  double best_fourgram() const { return best_fourgram_; }
  RngState& rng() { return rng_; }
  RewardBaseline& baseline() { return baseline_; }

 private:
  Model<T>& model_;
  FullConfig cfg_;
  RewardBaseline baseline_;
  RngState rng_;
  int next_epoch_ = 0;
  std::int64_t global_step_ = 0;
  double best_mgen_ = -1.0;
  double best_fourgram_ = -1.0;
};

}  // namespace pianofinger
