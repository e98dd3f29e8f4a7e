#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "pianofinger/errors.hpp"
#include "pianofinger/pig.hpp"

namespace pianofinger {

// Classification of one adjacent note pair (i, i+1) within a hand part.
struct PairClass {
  bool overlap = false;  // t+_i > t-_{i+1}
  int delta_pitch = 0;   // p_{i+1} - p_i
  int delta_finger = 0;  // y_{i+1} - y_i
};

inline PairClass classify_pair(const Note& a, const Note& b, int ya, int yb) {
  return {a.offset > b.onset, b.pitch - a.pitch, yb - ya};
}

// Per-part tallies, aggregatable across a corpus. Counts follow the disjoint
// reading: a pair lands in at most one of {thumb_cross, thumbless_cross,
// crossed_chord, hop, smear}. Spreads run over every pair with a finger
// change, overlap deciding step vs chord.
struct PartMetrics {
  long thumb_cross = 0;
  long thumbless_cross = 0;
  long crossed_chord = 0;
  long hop = 0;
  long smear = 0;
  double step_ratio_sum = 0.0;
  long step_pairs = 0;
  double chord_ratio_sum = 0.0;
  long chord_pairs = 0;
  double mgen_percent = 0.0;  // per-part M_gen in [0,100]
  long fourgram_hits = 0;
  long fourgram_windows = 0;
  std::array<std::array<long, 5>, 5> confusion{};  // [gold-1][pred-1]
  long n_notes = 0;
};

// Fluency counts only (no agreement metrics): usable for any label sequence
// over the part's notes, including gold annotations.
inline void count_fluency(PartMetrics& m, const std::vector<Note>& notes,
                          const std::vector<int>& labels) {
  if (labels.size() != notes.size()) {
    throw ContractError("fluency: labels/notes length mismatch");
  }
  for (std::size_t i = 0; i + 1 < notes.size(); ++i) {
    PairClass pc = classify_pair(notes[i], notes[i + 1], labels[i], labels[i + 1]);
    if (pc.delta_finger == 0) {
      if (pc.overlap) ++m.smear;
      else if (pc.delta_pitch != 0) ++m.hop;
      continue;
    }
    const double ratio =
        std::abs(pc.delta_pitch) / static_cast<double>(std::abs(pc.delta_finger));
    if (pc.overlap) {
      m.chord_ratio_sum += ratio;
      ++m.chord_pairs;
    } else {
      m.step_ratio_sum += ratio;
      ++m.step_pairs;
    }
    if (static_cast<long long>(pc.delta_pitch) * pc.delta_finger < 0) {
      const bool has_thumb = labels[i] == 1 || labels[i + 1] == 1;
      if (pc.overlap) ++m.crossed_chord;
      else if (has_thumb) ++m.thumb_cross;
      else ++m.thumbless_cross;
    }
  }
}

// Full per-part evaluation of predictions against the part's annotations.
inline PartMetrics part_metrics(const HandPart& part, const std::vector<int>& predictions) {
  const std::size_t n = part.notes.size();
  if (predictions.size() != n) {
    throw ContractError(part.source_id + ": predictions/notes length mismatch");
  }
  if (part.annotations.empty()) {
    throw ContractError(part.source_id + ": no annotations to score against");
  }
  PartMetrics m;
  m.n_notes = static_cast<long>(n);
  count_fluency(m, part.notes, predictions);

  const std::size_t K = part.annotations.size();
  double mgen_acc = 0.0;
  for (const auto& gold : part.annotations) {
    long hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (predictions[i] == gold[i]) ++hits;
    }
    mgen_acc += n == 0 ? 0.0 : 100.0 * hits / static_cast<double>(n);
  }
  m.mgen_percent = mgen_acc / static_cast<double>(K);

  if (n >= 4) {
    for (std::size_t i = 0; i + 3 < n; ++i) {
      bool any = false;
      for (const auto& gold : part.annotations) {
        bool all = true;
        for (std::size_t j = i; j < i + 4; ++j) {
          if (predictions[j] != gold[j]) {
            all = false;
            break;
          }
        }
        if (all) {
          any = true;
          break;
        }
      }
      ++m.fourgram_windows;
      if (any) ++m.fourgram_hits;
    }
  }

  const auto& first = part.annotations.front();
  for (std::size_t i = 0; i < n; ++i) {
    ++m.confusion[first[i] - 1][predictions[i] - 1];
  }
  return m;
}

// Corpus-level report in Table-2 column order. Counts sum; spreads average
// weighted by qualifying pairs; agreement metrics weight by notes/windows.
struct MetricsReport {
  long thumb_cross = 0;
  long thumbless_cross = 0;
  long crossed_chord = 0;
  long hop = 0;
  long smear = 0;
  double step_spread = 0.0;
  double chord_spread = 0.0;
  bool step_spread_defined = false;   // false: no qualifying pairs, 0 reported
  bool chord_spread_defined = false;
  double fourgram = 0.0;  // percent
  double m_gen = 0.0;     // percent
  std::array<std::array<long, 5>, 5> confusion{};
  long n_notes = 0;
  long n_parts = 0;
  long step_pairs = 0;
  long chord_pairs = 0;
  long fourgram_windows = 0;
};

inline MetricsReport aggregate(const std::vector<PartMetrics>& parts) {
  MetricsReport r;
  double step_sum = 0.0, chord_sum = 0.0, mgen_weighted = 0.0;
  long fourgram_hits = 0;
  for (const PartMetrics& m : parts) {
    r.thumb_cross += m.thumb_cross;
    r.thumbless_cross += m.thumbless_cross;
    r.crossed_chord += m.crossed_chord;
    r.hop += m.hop;
    r.smear += m.smear;
    step_sum += m.step_ratio_sum;
    r.step_pairs += m.step_pairs;
    chord_sum += m.chord_ratio_sum;
    r.chord_pairs += m.chord_pairs;
    mgen_weighted += m.mgen_percent * static_cast<double>(m.n_notes);
    fourgram_hits += m.fourgram_hits;
    r.fourgram_windows += m.fourgram_windows;
    for (int a = 0; a < 5; ++a) {
      for (int b = 0; b < 5; ++b) r.confusion[a][b] += m.confusion[a][b];
    }
    r.n_notes += m.n_notes;
    ++r.n_parts;
  }
  r.step_spread_defined = r.step_pairs > 0;
  r.chord_spread_defined = r.chord_pairs > 0;
  if (r.step_spread_defined) r.step_spread = step_sum / static_cast<double>(r.step_pairs);
  if (r.chord_spread_defined) r.chord_spread = chord_sum / static_cast<double>(r.chord_pairs);
  if (r.n_notes > 0) r.m_gen = mgen_weighted / static_cast<double>(r.n_notes);
  if (r.fourgram_windows > 0) {
    r.fourgram = 100.0 * fourgram_hits / static_cast<double>(r.fourgram_windows);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Rendering.
// ---------------------------------------------------------------------------

inline const char* kMetricColumns =
    "thumb_cross\tthumbless_cross\tcrossed_chord\thop\tsmear\tstep_spread\t"
    "chord_spread\tfourgram\tm_gen";

inline std::string report_tsv(const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%ld\t%ld\t%ld\t%ld\t%ld\t%.6f\t%.6f\t%.6f\t%.6f",
                r.thumb_cross, r.thumbless_cross, r.crossed_chord, r.hop, r.smear,
                r.step_spread, r.chord_spread, r.fourgram, r.m_gen);
  return std::string(kMetricColumns) + "\n" + buf + "\n";
}

inline std::string report_table(const MetricsReport& r) {
  char buf[512];
  std::string out;
  out += "metric            value\n";
  auto line = [&](const char* name, const std::string& value) {
    std::snprintf(buf, sizeof(buf), "%-17s %s\n", name, value.c_str());
    out += buf;
  };
  auto count = [&](long v) { return std::to_string(v); };
  auto spread = [&](double v, bool defined) {
    if (!defined) return std::string("0.00 (no pairs)");
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  auto pct = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return std::string(buf);
  };
  line("thumb_cross", count(r.thumb_cross));
  line("thumbless_cross", count(r.thumbless_cross));
  line("crossed_chord", count(r.crossed_chord));
  line("hop", count(r.hop));
  line("smear", count(r.smear));
  line("step_spread", spread(r.step_spread, r.step_spread_defined));
  line("chord_spread", spread(r.chord_spread, r.chord_spread_defined));
  line("fourgram", pct(r.fourgram));
  line("m_gen", pct(r.m_gen));
  line("notes", count(r.n_notes));
  line("parts", count(r.n_parts));
  return out;
}

inline std::string confusion_table(const MetricsReport& r) {
  std::string out = "confusion (rows gold, cols predicted)\n";
  char buf[160];
  out += "      p1      p2      p3      p4      p5\n";
  for (int g = 0; g < 5; ++g) {
    std::snprintf(buf, sizeof(buf), "g%d%8ld%8ld%8ld%8ld%8ld\n", g + 1, r.confusion[g][0],
                  r.confusion[g][1], r.confusion[g][2], r.confusion[g][3], r.confusion[g][4]);
    out += buf;
  }
  return out;
}

}  // namespace pianofinger
