#pragma once

#include <array>

#include "pianofinger/config.hpp"
#include "pianofinger/encode.hpp"
#include "pianofinger/pig.hpp"

namespace pianofinger {

// Where each finger last played. Only the single most recent note per finger
// is kept; a fresh prediction overwrites the slot.
struct FingerRecency {
  struct Slot {
    int note_index = -1;  // -1: finger never used
    double onset = 0.0;
    double offset = 0.0;
    int pitch = 0;
  };
  std::array<Slot, kNumFingers> slots;

  bool used(int finger) const { return slots[finger - 1].note_index >= 0; }
  const Slot& slot(int finger) const { return slots[finger - 1]; }
};

inline FingerRecency recency_update(FingerRecency state, const Note& note, int note_index,
                                    int predicted_finger) {
  auto& slot = state.slots[predicted_finger - 1];
  slot.note_index = note_index;
  slot.onset = note.onset;
  slot.offset = note.offset;
  slot.pitch = note.pitch;
  return state;
}

// A finger is "recent" when its last note started within the window, or is
// still sounding past the current onset.
inline bool finger_recent(const FingerRecency::Slot& slot, const Note& current,
                          double window_s, RecencyBasis basis) {
  if (slot.note_index < 0) return false;
  double anchor = basis == RecencyBasis::Onset ? slot.onset : slot.offset;
  if (current.onset - anchor <= window_s) return true;
  return slot.offset > current.onset;
}

// Binary scheme: +1 recent-and-higher, -1 recent-and-lower, 0 otherwise.
inline std::array<double, kNumFingers> binary_checklist(const FingerRecency& state,
                                                        const Note& current, double window_s,
                                                        RecencyBasis basis) {
  std::array<double, kNumFingers> values{};
  for (int f = 1; f <= kNumFingers; ++f) {
    const auto& slot = state.slot(f);
    if (!finger_recent(slot, current, window_s, basis)) continue;
    if (slot.pitch > current.pitch) values[f - 1] = 1.0;
    else if (slot.pitch < current.pitch) values[f - 1] = -1.0;
  }
  return values;
}

// Distance scheme inputs: lattice displacement from the finger's last note to
// the current one, or the dummy marker for non-recent fingers. Embedding
// lookup happens in the model, which owns the tables.
struct DistanceFeature {
  bool recent = false;
  int h_index = 0;  // 0..18 when recent
  int v_index = 0;  // 0..2 when recent
};

inline std::array<DistanceFeature, kNumFingers> distance_features(const FingerRecency& state,
                                                                  const Note& current,
                                                                  double window_s,
                                                                  RecencyBasis basis) {
  std::array<DistanceFeature, kNumFingers> features{};
  for (int f = 1; f <= kNumFingers; ++f) {
    const auto& slot = state.slot(f);
    if (!finger_recent(slot, current, window_s, basis)) continue;
    features[f - 1].recent = true;
    features[f - 1].h_index = lattice_horizontal(slot.pitch, current.pitch) + kLatticeCap;
    features[f - 1].v_index = lattice_vertical(slot.pitch, current.pitch) + 1;
  }
  return features;
}

// Label-embedding row for the previous prediction: row 0 is the start
// embedding, rows 1..5 the fingers.
inline int prev_finger_row(int prev_label) {
  if (prev_label < 0 || prev_label > kNumFingers) {
    throw ContractError("prev label out of range: " + std::to_string(prev_label));
  }
  return prev_label;
}

}  // namespace pianofinger
