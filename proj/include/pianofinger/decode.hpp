#pragma once

#include <algorithm>
#include <vector>

#include "pianofinger/model.hpp"

namespace pianofinger {

// Argmax with ties broken toward the lower finger index.
template <typename T>
inline int argmax_label(const Tensor<T>& logits) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best + 1;
}

template <typename T>
inline std::vector<int> greedy_decode(const Model<T>& model, const HandPart& part) {
  auto ec = model.make_eval_context(part);
  auto state = model.start_eval();
  std::vector<int> labels;
  labels.reserve(part.notes.size());
  for (std::size_t i = 0; i < part.notes.size(); ++i) {
    int label = argmax_label(model.eval_step_logits(ec, state));
    labels.push_back(label);
    model.eval_advance(state, ec, label);
  }
  return labels;
}

struct BeamResult {
  std::vector<int> labels;
  double score = 0.0;  // sum of per-step log probs
};

// Fixed-width beam over the 5-label alphabet. All hypotheses share length, so
// raw log-prob sums compare fairly; ties go to the lexicographically smaller
// label sequence. Sequence-level LSTM work is in the eval context, computed
// once and shared across hypotheses.
template <typename T>
inline BeamResult beam_decode(const Model<T>& model, const HandPart& part, int beam_width) {
  if (beam_width < 1) throw ContractError("beam_width must be >= 1");
  const std::size_t n = part.notes.size();
  if (n == 0) return {};
  auto ec = model.make_eval_context(part);

  struct Hypothesis {
    std::vector<int> labels;
    double score = 0.0;
    typename Model<T>::EvalState state;
  };
  std::vector<Hypothesis> beam;
  beam.push_back({{}, 0.0, model.start_eval()});

  struct Candidate {
    std::size_t parent;
    int label;
    double score;
  };
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Candidate> candidates;
    candidates.reserve(beam.size() * kNumFingers);
    for (std::size_t p = 0; p < beam.size(); ++p) {
      // Advances ar_tagger recurrent state in place; children share it.
      Tensor<T> logits = model.eval_step_logits(ec, beam[p].state);
      for (int label = 1; label <= kNumFingers; ++label) {
        candidates.push_back(
            {p, label, beam[p].score + Model<T>::log_prob_value(logits, label)});
      }
    }
    auto lex_less = [&](const Candidate& a, const Candidate& b) {
      const auto& la = beam[a.parent].labels;
      const auto& lb = beam[b.parent].labels;
      for (std::size_t k = 0; k < la.size(); ++k) {
        if (la[k] != lb[k]) return la[k] < lb[k];
      }
      return a.label < b.label;
    };
    std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      return lex_less(a, b);
    });
    const std::size_t keep = std::min<std::size_t>(beam_width, candidates.size());
    std::vector<Hypothesis> next;
    next.reserve(keep);
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& c = candidates[k];
      Hypothesis h;
      h.labels = beam[c.parent].labels;
      h.labels.push_back(c.label);
      h.score = c.score;
      h.state = beam[c.parent].state;
      model.eval_advance(h.state, ec, c.label);
      next.push_back(std::move(h));
    }
    beam = std::move(next);
  }
  return {beam.front().labels, beam.front().score};
}

struct SampleResult {
  std::vector<int> labels;
  std::vector<double> log_probs;
};

// Draw each label from the step distribution conditioned on the sampled
// prefix. Frozen parameters, eval mode; randomness comes only from `rng`.
template <typename T>
inline SampleResult ancestral_sample(const Model<T>& model, const HandPart& part,
                                     RngState& rng) {
  auto ec = model.make_eval_context(part);
  auto state = model.start_eval();
  SampleResult out;
  out.labels.reserve(part.notes.size());
  for (std::size_t i = 0; i < part.notes.size(); ++i) {
    Tensor<T> logits = model.eval_step_logits(ec, state);
    Tensor<T> probs = softmax_values(logits);
    double u = rng.uniform();
    int label = kNumFingers;
    double cum = 0.0;
    for (int k = 0; k < kNumFingers; ++k) {
      cum += static_cast<double>(probs[k]);
      if (u < cum) {
        label = k + 1;
        break;
      }
    }
    out.labels.push_back(label);
    out.log_probs.push_back(Model<T>::log_prob_value(logits, label));
    model.eval_advance(state, ec, label);
  }
  return out;
}

}  // namespace pianofinger
