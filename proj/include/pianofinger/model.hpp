#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "pianofinger/checklist.hpp"
#include "pianofinger/config.hpp"
#include "pianofinger/encode.hpp"
#include "pianofinger/nn.hpp"
#include "pianofinger/pig.hpp"

namespace pianofinger {

template <typename T>
struct StepDistribution {
  Tensor<T> logits;  // 5
  Tensor<T> probs;   // softmax(logits)
};

// The five architectures share one skeleton: embed the notes, contextualize
// them, and feed a per-note vector into the MLP head. They differ in what the
// per-note vector is:
//   bilstm              [ctx_i]                       (no conditioning)
//   ar_tagger           [f_i(x, y_prefix) ; b_i(x)]   (forward LSTM eats labels)
//   prev_finger         [ctx_i ; label_emb(y_{i-1})]
//   binary_checklist    [ctx_i ; binary(5)]
//   distance_checklist  [ctx_i ; five finger displacement embeddings]
template <typename T>
class Model {
 public:
  using Var = typename Tape<T>::Var;

  Model(const ModelConfig& cfg, RngState& init_rng) : cfg_(cfg) {
    cfg_.validate();
    build(init_rng);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  // --- parameter bindings on a tape --------------------------------------

  struct Bindings {
    Var input_a = -1, input_b = -1;
    BilstmVars<T> enc;
    LstmStackVars<T> ar_fwd, ar_bwd;
    Var label_table = -1;
    std::array<Var, kNumFingers> chk_h{}, chk_v{};
    Var chk_dummy = -1;
    MlpVars<T> mlp;
  };

  Bindings bind(Tape<T>& tape) const {
    Bindings b;
    b.input_a = tape.leaf_ref(&input_a_->value, &input_a_->grad);
    if (input_b_) b.input_b = tape.leaf_ref(&input_b_->value, &input_b_->grad);
    if (cfg_.model == ModelKind::ArTagger) {
      b.ar_fwd = bind_lstm_stack(tape, ar_fwd_);
      b.ar_bwd = bind_lstm_stack(tape, ar_bwd_);
    } else {
      b.enc = bind_bilstm(tape, enc_);
    }
    if (label_table_) b.label_table = tape.leaf_ref(&label_table_->value, &label_table_->grad);
    if (cfg_.model == ModelKind::DistanceChecklist) {
      for (int f = 0; f < kNumFingers; ++f) {
        b.chk_h[f] = tape.leaf_ref(&chk_h_[f]->value, &chk_h_[f]->grad);
        b.chk_v[f] = tape.leaf_ref(&chk_v_[f]->value, &chk_v_[f]->grad);
      }
      b.chk_dummy = tape.leaf_ref(&chk_dummy_->value, &chk_dummy_->grad);
    }
    b.mlp = bind_mlp(tape, mlp_);
    return b;
  }

  // --- taped context (training paths) ------------------------------------

  struct VarContext {
    Bindings binds;
    std::vector<Var> ctx;  // non-autoregressive kinds: Bi-LSTM outputs
    std::vector<Var> emb;  // ar_tagger: per-note input embeddings
    std::vector<Var> bwd;  // ar_tagger: backward-LSTM outputs
    const HandPart* part = nullptr;
  };

  // Embeds the notes and runs the sequence-level LSTMs once; the result is
  // shared by every step (and every hypothesis) over this part.
  VarContext make_context(Tape<T>& tape, const HandPart& part, bool train,
                          RngState& rng) const {
    VarContext c;
    c.part = &part;
    c.binds = bind(tape);
    EncodedSeq enc = encode(cfg_.input_rep, part.notes);
    std::vector<Var> emb(part.notes.size());
    for (std::size_t i = 0; i < part.notes.size(); ++i) {
      emb[i] = embed_note(tape, c.binds, enc, i);
    }
    const T rate = static_cast<T>(cfg_.dropout);
    if (cfg_.model == ModelKind::ArTagger) {
      c.emb = emb;
      c.bwd = lstm_stack_run(tape, c.binds.ar_bwd, emb, true, rate, rng, train);
    } else {
      c.ctx = bilstm_forward(tape, c.binds.enc, emb, rate, rng, train);
    }
    return c;
  }

  // Stepper over a taped context. step_logits() produces the distribution for
  // note `index` given the prefix consumed so far; advance() feeds it the
  // chosen label. Copy a stepper to branch a prefix (beam/chunk sampling).
  struct VarStepper {
    const Model* model = nullptr;
    Tape<T>* tape = nullptr;
    const VarContext* ctx = nullptr;
    bool train = false;
    RngState* rng = nullptr;
    std::size_t index = 0;
    int prev_label = 0;  // 0 = start
    FingerRecency recency;
    std::vector<HcVars<T>> fwd_state;  // ar_tagger only

    Var step_logits() {
      return model->step_core(*tape, ctx->binds, *ctx, index, recency, prev_label, &fwd_state,
                              train, rng);
    }

    void advance(int label) {
      recency = recency_update(recency, ctx->part->notes[index], static_cast<int>(index), label);
      prev_label = label;
      ++index;
    }

    // Advance past note `index` with a known label, updating recurrent state
    // but skipping the MLP head (teacher-forced trunks that never need the
    // step's distribution).
    void consume(int label) {
      if (model->config().model == ModelKind::ArTagger) {
        model->ar_fwd_step(*tape, ctx->binds, *ctx, index, prev_label, fwd_state, train, rng);
      }
      advance(label);
    }
  };

  VarStepper start(Tape<T>& tape, const VarContext& ctx, bool train, RngState* rng) const {
    VarStepper s;
    s.model = this;
    s.tape = &tape;
    s.ctx = &ctx;
    s.train = train;
    s.rng = rng;
    if (cfg_.model == ModelKind::ArTagger) {
      s.fwd_state = lstm_zero_state(tape, ctx.binds.ar_fwd);
    }
    return s;
  }

  // --- value context (decode paths; frozen parameters, no dropout) -------

  struct EvalContext {
    std::vector<Tensor<T>> ctx, emb, bwd;
    const HandPart* part = nullptr;
  };

  struct EvalState {
    std::size_t index = 0;
    int prev_label = 0;
    FingerRecency recency;
    std::vector<std::pair<Tensor<T>, Tensor<T>>> fwd_hc;  // ar_tagger h/c per layer
  };

  EvalContext make_eval_context(const HandPart& part) const {
    Tape<T> tape(false);
    RngState no_rng(0);
    VarContext vc = make_context(tape, part, false, no_rng);
    EvalContext ec;
    ec.part = &part;
    auto values_of = [&](const std::vector<Var>& vars) {
      std::vector<Tensor<T>> out;
      out.reserve(vars.size());
      for (Var v : vars) out.push_back(tape.value(v));
      return out;
    };
    ec.ctx = values_of(vc.ctx);
    ec.emb = values_of(vc.emb);
    ec.bwd = values_of(vc.bwd);
    return ec;
  }

  EvalState start_eval() const {
    EvalState s;
    if (cfg_.model == ModelKind::ArTagger) {
      for (int l = 0; l < cfg_.layers; ++l) {
        s.fwd_hc.emplace_back(Tensor<T>::zeros({cfg_.hidden}), Tensor<T>::zeros({cfg_.hidden}));
      }
    }
    return s;
  }

  // Logits for note state.index; ar_tagger recurrent state advances in place.
  Tensor<T> eval_step_logits(const EvalContext& ec, EvalState& state) const {
    Tape<T> tape(false);
    Bindings binds = bind(tape);
    VarContext vc;
    vc.binds = binds;
    vc.part = ec.part;
    const std::size_t i = state.index;
    if (cfg_.model == ModelKind::ArTagger) {
      vc.emb.assign(ec.emb.size(), -1);
      vc.bwd.assign(ec.bwd.size(), -1);
      vc.emb[i] = tape.leaf(ec.emb[i]);
      vc.bwd[i] = tape.leaf(ec.bwd[i]);
    } else {
      vc.ctx.assign(ec.ctx.size(), -1);
      vc.ctx[i] = tape.leaf(ec.ctx[i]);
    }
    std::vector<HcVars<T>> fwd_state;
    for (auto& [h, c] : state.fwd_hc) {
      fwd_state.push_back({tape.leaf(h), tape.leaf(c)});
    }
    Var logits = step_core(tape, binds, vc, i, state.recency, state.prev_label, &fwd_state,
                           false, nullptr);
    for (std::size_t l = 0; l < fwd_state.size(); ++l) {
      state.fwd_hc[l] = {tape.value(fwd_state[l].h), tape.value(fwd_state[l].c)};
    }
    return tape.value(logits);
  }

  void eval_advance(EvalState& state, const EvalContext& ec, int label) const {
    state.recency = recency_update(state.recency, ec.part->notes[state.index],
                                   static_cast<int>(state.index), label);
    state.prev_label = label;
    ++state.index;
  }

  // --- whole-sequence conveniences ---------------------------------------

  // Independent (bilstm) forward pass: N distributions, no label conditioning.
  std::vector<StepDistribution<T>> forward_independent(const HandPart& part, bool train,
                                                       RngState& rng) const {
    if (cfg_.model != ModelKind::Bilstm) {
      throw ContractError("forward_independent requires the bilstm model");
    }
    Tape<T> tape(false);
    VarContext ctx = make_context(tape, part, train, rng);
    VarStepper s = start(tape, ctx, train, &rng);
    std::vector<StepDistribution<T>> out;
    out.reserve(part.notes.size());
    for (std::size_t i = 0; i < part.notes.size(); ++i) {
      Tensor<T> logits = tape.value(s.step_logits());
      out.push_back({logits, softmax_values(logits)});
      s.advance(1);  // label is irrelevant to this kind
    }
    return out;
  }

  // Distribution for note `index` given an explicit prediction prefix.
  StepDistribution<T> forward_step_conditional(const HandPart& part,
                                               const std::vector<int>& prefix,
                                               std::size_t index) const {
    if (prefix.size() != index) {
      throw ContractError("prefix length " + std::to_string(prefix.size()) +
                          " != step index " + std::to_string(index));
    }
    EvalContext ec = make_eval_context(part);
    EvalState state = start_eval();
    for (int label : prefix) {
      eval_step_logits(ec, state);  // advances ar state; distribution unused
      eval_advance(state, ec, label);
    }
    Tensor<T> logits = eval_step_logits(ec, state);
    return {logits, softmax_values(logits)};
  }

  // Teacher-forced log likelihood of `labels`, accumulated in double.
  double sequence_log_likelihood(const HandPart& part, const std::vector<int>& labels) const {
    if (labels.size() != part.notes.size()) {
      throw ContractError("labels/notes length mismatch");
    }
    EvalContext ec = make_eval_context(part);
    EvalState state = start_eval();
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      Tensor<T> logits = eval_step_logits(ec, state);
      total += log_prob_value(logits, labels[i]);
      eval_advance(state, ec, labels[i]);
    }
    return total;
  }

  // log softmax(logits)[label], computed in double.
  static double log_prob_value(const Tensor<T>& logits, int label) {
    double maxv = static_cast<double>(logits[0]);
    for (std::size_t i = 1; i < logits.size(); ++i) {
      maxv = std::max(maxv, static_cast<double>(logits[i]));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      sum += std::exp(static_cast<double>(logits[i]) - maxv);
    }
    return static_cast<double>(logits[label - 1]) - maxv - std::log(sum);
  }

  int mlp_input_width() const {
    const int ctx_width = 2 * cfg_.hidden;
    switch (cfg_.model) {
      case ModelKind::Bilstm: return ctx_width;
      case ModelKind::ArTagger: return ctx_width;
      case ModelKind::PrevFinger: return ctx_width + cfg_.prev_width();
      case ModelKind::BinaryChecklist: return ctx_width + kNumFingers;
      case ModelKind::DistanceChecklist: return ctx_width + kNumFingers * cfg_.d_check;
    }
    return ctx_width;
  }

 private:
  // Forward-LSTM step of the autoregressive tagger: consume the note embedding
  // and the previous label's embedding, mutate the stack state, return top h.
  Var ar_fwd_step(Tape<T>& tape, const Bindings& b, const VarContext& ctx, std::size_t i,
                  int prev_label, std::vector<HcVars<T>>& fwd_state, bool train,
                  RngState* rng) const {
    const T rate = static_cast<T>(cfg_.dropout);
    RngState dummy(0);
    RngState& r = rng ? *rng : dummy;
    Var label_emb = tape.row(b.label_table, prev_finger_row(prev_label));
    Var x = tape.concat2(ctx.emb[i], label_emb);
    return lstm_stack_step(tape, b.ar_fwd, fwd_state, x, rate, r, train);
  }

  // Everything below assumes inputs already live on `tape`.
  Var step_core(Tape<T>& tape, const Bindings& b, const VarContext& ctx, std::size_t i,
                const FingerRecency& recency, int prev_label,
                std::vector<HcVars<T>>* fwd_state, bool train, RngState* rng) const {
    const T rate = static_cast<T>(cfg_.dropout);
    RngState dummy(0);
    RngState& r = rng ? *rng : dummy;
    const Note& note = ctx.part->notes[i];
    Var features = -1;
    switch (cfg_.model) {
      case ModelKind::Bilstm:
        features = ctx.ctx[i];
        break;
      case ModelKind::ArTagger: {
        Var top = ar_fwd_step(tape, b, ctx, i, prev_label, *fwd_state, train, rng);
        features = tape.concat2(top, ctx.bwd[i]);
        break;
      }
      case ModelKind::PrevFinger: {
        Var label_emb = tape.row(b.label_table, prev_finger_row(prev_label));
        features = tape.concat2(ctx.ctx[i], label_emb);
        break;
      }
      case ModelKind::BinaryChecklist: {
        auto vals = binary_checklist(recency, note, cfg_.recency_ms / 1000.0,
                                     cfg_.recency_basis);
        Tensor<T> feat = Tensor<T>::zeros({kNumFingers});
        for (int f = 0; f < kNumFingers; ++f) feat[f] = static_cast<T>(vals[f]);
        features = tape.concat2(ctx.ctx[i], tape.leaf(std::move(feat)));
        break;
      }
      case ModelKind::DistanceChecklist: {
        auto feats = distance_features(recency, note, cfg_.recency_ms / 1000.0,
                                       cfg_.recency_basis);
        std::vector<Var> parts;
        parts.reserve(1 + kNumFingers);
        parts.push_back(ctx.ctx[i]);
        for (int f = 0; f < kNumFingers; ++f) {
          if (feats[f].recent) {
            parts.push_back(tape.concat2(tape.row(b.chk_h[f], feats[f].h_index),
                                         tape.row(b.chk_v[f], feats[f].v_index)));
          } else {
            parts.push_back(b.chk_dummy);
          }
        }
        features = tape.concat(std::span<const Var>(parts.data(), parts.size()));
        break;
      }
    }
    return mlp_forward(tape, b.mlp, features, rate, r, train);
  }

  Var embed_note(Tape<T>& tape, const Bindings& b, const EncodedSeq& enc, std::size_t i) const {
    const auto& idx = enc.indices[i];
    if (!input_b_) return tape.row(b.input_a, idx[0]);
    return tape.concat2(tape.row(b.input_a, idx[0]), tape.row(b.input_b, idx[1]));
  }

  void build(RngState& rng) {
    RepTableShape shape = rep_table_shape(cfg_.input_rep);
    if (shape.rows_b == 0) {
      input_a_ = &params_.add("input.a", {shape.rows_a, cfg_.d});
      init_uniform(input_a_->value, cfg_.d, rng);
    } else {
      input_a_ = &params_.add("input.a", {shape.rows_a, cfg_.d / 2});
      input_b_ = &params_.add("input.b", {shape.rows_b, cfg_.d / 2});
      init_uniform(input_a_->value, cfg_.d / 2, rng);
      init_uniform(input_b_->value, cfg_.d / 2, rng);
    }
    if (cfg_.model == ModelKind::ArTagger) {
      ar_fwd_ = add_lstm_stack(params_, "ar.fwd", cfg_.d + cfg_.prev_width(), cfg_.hidden,
                               cfg_.layers, rng);
      ar_bwd_ = add_lstm_stack(params_, "ar.bwd", cfg_.d, cfg_.hidden, cfg_.layers, rng);
    } else {
      enc_ = add_bilstm(params_, "enc", cfg_.d, cfg_.hidden, cfg_.layers, rng);
    }
    if (cfg_.model == ModelKind::ArTagger || cfg_.model == ModelKind::PrevFinger) {
      label_table_ = &params_.add("label.table", {kNumFingers + 1, cfg_.prev_width()});
      init_uniform(label_table_->value, cfg_.prev_width(), rng);
    }
    if (cfg_.model == ModelKind::DistanceChecklist) {
      const int half = cfg_.d_check / 2;
      for (int f = 0; f < kNumFingers; ++f) {
        chk_h_[f] = &params_.add("chk.f" + std::to_string(f + 1) + ".h",
                                 {2 * kLatticeCap + 1, half});
        chk_v_[f] = &params_.add("chk.f" + std::to_string(f + 1) + ".v", {3, half});
        init_uniform(chk_h_[f]->value, half, rng);
        init_uniform(chk_v_[f]->value, half, rng);
      }
      chk_dummy_ = &params_.add("chk.dummy", {cfg_.d_check});
      init_uniform(chk_dummy_->value, cfg_.d_check, rng);
    }
    mlp_ = add_mlp(params_, "mlp", mlp_input_width(), cfg_.mlp_hidden, kNumFingers, rng);
  }

  ModelConfig cfg_;
  ParamStore<T> params_;
  Param<T>* input_a_ = nullptr;
  Param<T>* input_b_ = nullptr;
  BilstmParams<T> enc_;
  LstmStackParams<T> ar_fwd_, ar_bwd_;
  Param<T>* label_table_ = nullptr;
  std::array<Param<T>*, kNumFingers> chk_h_{}, chk_v_{};
  Param<T>* chk_dummy_ = nullptr;
  MlpParams<T> mlp_;
};

}  // namespace pianofinger
