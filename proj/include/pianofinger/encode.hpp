#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "pianofinger/errors.hpp"
#include "pianofinger/pig.hpp"

namespace pianofinger {

enum class Rep { RawPitch, NoteOctave, NoteRelDist, Lattice };

inline const char* rep_name(Rep r) {
  switch (r) {
    case Rep::RawPitch: return "raw_pitch";
    case Rep::NoteOctave: return "note_octave";
    case Rep::NoteRelDist: return "note_reldist";
    case Rep::Lattice: return "lattice";
  }
  return "?";
}

inline Rep rep_from_name(const std::string& name) {
  if (name == "raw_pitch") return Rep::RawPitch;
  if (name == "note_octave") return Rep::NoteOctave;
  if (name == "note_reldist") return Rep::NoteRelDist;
  if (name == "lattice") return Rep::Lattice;
  throw ConfigError("unknown input_rep '" + name + "'");
}

constexpr int kRelDistCap = 15;   // semitones
constexpr int kLatticeCap = 9;    // white-key steps

// Per-note embedding-index tuples. Two-index representations use both slots;
// single-index ones leave the second at -1.
struct EncodedSeq {
  Rep rep = Rep::Lattice;
  std::vector<std::array<int, 2>> indices;

  std::size_t size() const { return indices.size(); }
};

// Sub-embedding table row counts for a representation; rows_b == 0 means the
// representation uses a single table.
struct RepTableShape {
  int rows_a = 0;
  int rows_b = 0;
};

inline RepTableShape rep_table_shape(Rep rep) {
  switch (rep) {
    case Rep::RawPitch: return {88, 0};
    case Rep::NoteOctave: return {12, 8};
    case Rep::NoteRelDist: return {12, 2 * kRelDistCap + 1};
    case Rep::Lattice: return {2 * kLatticeCap + 1, 3};
  }
  return {};
}

// Number of white keys in [21, p] minus one. Black keys take the ordinal of
// the white key directly below, so h is monotone and steps by exactly one
// across each white key.
inline int white_ordinal(int pitch) {
  int count = 0;
  for (int p = kLowestPitch; p <= pitch; ++p) {
    if (!is_black_key(p)) ++count;
  }
  return count - 1;
}

namespace detail {

inline const std::array<int, 88>& white_ordinal_table() {
  static const std::array<int, 88> table = [] {
    std::array<int, 88> t{};
    for (int p = kLowestPitch; p <= kHighestPitch; ++p) t[p - kLowestPitch] = white_ordinal(p);
    return t;
  }();
  return table;
}

inline int h_of(int pitch) { return white_ordinal_table()[pitch - kLowestPitch]; }

inline void check_pitch(const Note& n) {
  if (n.pitch < kLowestPitch || n.pitch > kHighestPitch) {
    throw RangeError("pitch " + std::to_string(n.pitch) + " outside [21,108]");
  }
}

}  // namespace detail

inline EncodedSeq encode_raw_pitch(const std::vector<Note>& notes) {
  EncodedSeq seq;
  seq.rep = Rep::RawPitch;
  seq.indices.reserve(notes.size());
  for (const Note& n : notes) {
    detail::check_pitch(n);
    seq.indices.push_back({n.pitch - kLowestPitch, -1});
  }
  return seq;
}

inline EncodedSeq encode_note_octave(const std::vector<Note>& notes) {
  EncodedSeq seq;
  seq.rep = Rep::NoteOctave;
  seq.indices.reserve(notes.size());
  for (const Note& n : notes) {
    detail::check_pitch(n);
    int octave = std::clamp(n.pitch / 12 - 1, 0, 7);
    seq.indices.push_back({n.pitch % 12, octave});
  }
  return seq;
}

// First-note delta is 0: the virtual previous note equals the first note.
inline EncodedSeq encode_note_reldist(const std::vector<Note>& notes) {
  EncodedSeq seq;
  seq.rep = Rep::NoteRelDist;
  seq.indices.reserve(notes.size());
  for (std::size_t i = 0; i < notes.size(); ++i) {
    detail::check_pitch(notes[i]);
    int delta = 0;
    if (i > 0) {
      delta = std::clamp(notes[i].pitch - notes[i - 1].pitch, -kRelDistCap, kRelDistCap);
    }
    seq.indices.push_back({notes[i].pitch % 12, delta + kRelDistCap});
  }
  return seq;
}

// Horizontal bucket for a move between two pitches, capped at +/-9 white keys.
inline int lattice_horizontal(int from_pitch, int to_pitch) {
  int h = detail::h_of(to_pitch) - detail::h_of(from_pitch);
  return std::clamp(h, -kLatticeCap, kLatticeCap);
}

// Vertical bucket: black/white color change, in {-1, 0, +1}.
inline int lattice_vertical(int from_pitch, int to_pitch) {
  return (is_black_key(to_pitch) ? 1 : 0) - (is_black_key(from_pitch) ? 1 : 0);
}

inline EncodedSeq encode_lattice(const std::vector<Note>& notes) {
  EncodedSeq seq;
  seq.rep = Rep::Lattice;
  seq.indices.reserve(notes.size());
  for (std::size_t i = 0; i < notes.size(); ++i) {
    detail::check_pitch(notes[i]);
    int prev = i > 0 ? notes[i - 1].pitch : notes[i].pitch;
    seq.indices.push_back({lattice_horizontal(prev, notes[i].pitch) + kLatticeCap,
                           lattice_vertical(prev, notes[i].pitch) + 1});
  }
  return seq;
}

inline EncodedSeq encode(Rep rep, const std::vector<Note>& notes) {
  switch (rep) {
    case Rep::RawPitch: return encode_raw_pitch(notes);
    case Rep::NoteOctave: return encode_note_octave(notes);
    case Rep::NoteRelDist: return encode_note_reldist(notes);
    case Rep::Lattice: return encode_lattice(notes);
  }
  throw ConfigError("bad representation");
}

}  // namespace pianofinger
