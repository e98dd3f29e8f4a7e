#include <catch2/catch_amalgamated.hpp>

#include "pianofinger/encode.hpp"
#include "test_util.hpp"

using namespace pianofinger;
using pftest::make_note;

namespace {

std::vector<Note> notes_of(std::initializer_list<int> pitches) {
  std::vector<Note> notes;
  double onset = 0.0;
  std::size_t i = 0;
  for (int p : pitches) {
    notes.push_back(make_note(p, onset, onset + 0.1, Hand::Right, i++));
    onset += 0.2;
  }
  return notes;
}

}  // namespace

TEST_CASE("white ordinal counts white keys from A0") {
  CHECK(white_ordinal(21) == 0);   // A0
  CHECK(white_ordinal(22) == 0);   // A#0 takes the ordinal of A0
  CHECK(white_ordinal(23) == 1);   // B0
  CHECK(white_ordinal(108) == 51);
  // monotone, stepping by exactly one across each white key
  for (int p = kLowestPitch + 1; p <= kHighestPitch; ++p) {
    int step = white_ordinal(p) - white_ordinal(p - 1);
    if (is_black_key(p)) CHECK(step == 0);
    else CHECK(step == 1);
  }
  // E4 -> B4 spans F, G, A, B
  CHECK(white_ordinal(71) - white_ordinal(64) == 4);
}

TEST_CASE("raw pitch is an offset index") {
  auto seq = encode_raw_pitch(notes_of({21, 108, 60}));
  CHECK(seq.indices[0][0] == 0);
  CHECK(seq.indices[1][0] == 87);
  CHECK(seq.indices[2][0] == 39);
  CHECK(seq.indices[0][1] == -1);  // single-index representation
}

TEST_CASE("note-octave splits name and octave") {
  auto seq = encode_note_octave(notes_of({68, 60, 21, 108}));
  CHECK(seq.indices[0] == std::array<int, 2>{8, 4});   // G#, octave 4
  CHECK(seq.indices[1] == std::array<int, 2>{0, 4});   // C4
  CHECK(seq.indices[2] == std::array<int, 2>{9, 0});   // A0
  CHECK(seq.indices[3] == std::array<int, 2>{0, 7});   // C8, octave clamped to 7
}

TEST_CASE("relative distance caps at 15 semitones") {
  auto seq = encode_note_reldist(notes_of({60, 80, 80, 50}));
  CHECK(seq.indices[0][1] == 0 + kRelDistCap);    // first note: delta 0
  CHECK(seq.indices[1][1] == 15 + kRelDistCap);   // +20 capped to +15
  CHECK(seq.indices[2][1] == 0 + kRelDistCap);    // repeat: delta 0
  CHECK(seq.indices[3][1] == -15 + kRelDistCap);  // -30 capped to -15
  CHECK(seq.indices[1][0] == 80 % 12);
}

TEST_CASE("lattice encodes white-key distance and color change") {
  auto seq = encode_lattice(notes_of({64, 71, 60, 61, 60, 108}));
  CHECK(seq.indices[0] == std::array<int, 2>{0 + kLatticeCap, 1});  // boundary: (0, 0)
  CHECK(seq.indices[1] == std::array<int, 2>{4 + kLatticeCap, 1});  // E4->B4: +4 whites
  CHECK(seq.indices[2][0] == -6 + kLatticeCap);                     // B4->C4: -6 whites
  CHECK(seq.indices[3] == std::array<int, 2>{0 + kLatticeCap, 2});  // C4->C#4: white->black
  CHECK(seq.indices[4] == std::array<int, 2>{0 + kLatticeCap, 0});  // C#4->C4: black->white
  CHECK(seq.indices[5][0] == 9 + kLatticeCap);                      // C4->C8 capped at +9
}

TEST_CASE("every emitted index stays inside its buckets on random input") {
  RngState rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto part = pftest::random_part(rng, 1 + rng.below(30));
    for (Rep rep : {Rep::RawPitch, Rep::NoteOctave, Rep::NoteRelDist, Rep::Lattice}) {
      auto seq = encode(rep, part.notes);
      auto shape = rep_table_shape(rep);
      REQUIRE(seq.size() == part.notes.size());
      for (const auto& idx : seq.indices) {
        CHECK(idx[0] >= 0);
        CHECK(idx[0] < shape.rows_a);
        if (shape.rows_b > 0) {
          CHECK(idx[1] >= 0);
          CHECK(idx[1] < shape.rows_b);
        } else {
          CHECK(idx[1] == -1);
        }
      }
    }
  }
}

TEST_CASE("encodings depend only on their stated neighborhood") {
  RngState rng(5);
  auto part = pftest::random_part(rng, 12);
  auto edited = part;
  edited.notes[3].pitch = edited.notes[3].pitch == 60 ? 72 : 60;  // edit note 3 only

  for (Rep rep : {Rep::RawPitch, Rep::NoteOctave}) {
    auto a = encode(rep, part.notes);
    auto b = encode(rep, edited.notes);
    for (std::size_t i = 0; i < part.notes.size(); ++i) {
      if (i != 3) CHECK(a.indices[i] == b.indices[i]);
    }
  }
  for (Rep rep : {Rep::NoteRelDist, Rep::Lattice}) {
    auto a = encode(rep, part.notes);
    auto b = encode(rep, edited.notes);
    for (std::size_t i = 0; i < part.notes.size(); ++i) {
      if (i != 3 && i != 4) CHECK(a.indices[i] == b.indices[i]);
    }
  }
}

TEST_CASE("identical notes encode identically") {
  auto seq = encode_raw_pitch(notes_of({60, 60}));
  CHECK(seq.indices[0] == seq.indices[1]);
}
