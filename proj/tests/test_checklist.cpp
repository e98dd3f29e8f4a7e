#include <catch2/catch_amalgamated.hpp>

#include "pianofinger/checklist.hpp"
#include "test_util.hpp"

using namespace pianofinger;
using pftest::make_note;

namespace {

constexpr double kWindow = 0.100;

// Independent oracle: rebuild the recency state from scratch by scanning the
// prediction prefix for each finger's last use.
FingerRecency recency_from_scratch(const std::vector<Note>& notes,
                                   const std::vector<int>& prefix) {
  FingerRecency state;
  for (int f = 1; f <= kNumFingers; ++f) {
    for (std::size_t j = prefix.size(); j-- > 0;) {
      if (prefix[j] == f) {
        state.slots[f - 1] = {static_cast<int>(j), notes[j].onset, notes[j].offset,
                              notes[j].pitch};
        break;
      }
    }
  }
  return state;
}

}  // namespace

TEST_CASE("recency_update overwrites per-finger slots") {
  FingerRecency state;
  CHECK_FALSE(state.used(1));
  state = recency_update(state, make_note(60, 0.0, 0.2), 0, 2);
  CHECK(state.used(2));
  CHECK(state.slot(2).pitch == 60);
  state = recency_update(state, make_note(72, 0.5, 0.7), 1, 2);
  CHECK(state.slot(2).pitch == 72);  // only the latest note is kept
  CHECK(state.slot(2).note_index == 1);
  for (int f = 1; f <= 5; ++f) {
    state = recency_update(state, make_note(60 + f, 1.0 + f, 1.1 + f), 1 + f, f);
  }
  for (int f = 1; f <= 5; ++f) CHECK(state.used(f));
}

TEST_CASE("binary checklist signs by relative pitch of recent fingers") {
  FingerRecency state;
  state = recency_update(state, make_note(64, 0.95, 1.02), 0, 2);
  auto values = binary_checklist(state, make_note(60, 1.00, 1.2), kWindow, RecencyBasis::Onset);
  CHECK(values[1] == 1.0);  // finger 2 recent at a higher pitch
  for (int f : {0, 2, 3, 4}) CHECK(values[f] == 0.0);

  // recent at a lower pitch
  state = recency_update(state, make_note(50, 0.98, 1.01), 1, 4);
  values = binary_checklist(state, make_note(60, 1.00, 1.2), kWindow, RecencyBasis::Onset);
  CHECK(values[3] == -1.0);

  // equal pitch: 0 even when recent
  state = recency_update(state, make_note(60, 0.99, 1.05), 2, 5);
  values = binary_checklist(state, make_note(60, 1.00, 1.2), kWindow, RecencyBasis::Onset);
  CHECK(values[4] == 0.0);
}

TEST_CASE("a stale finger reads zero") {
  FingerRecency state;
  state = recency_update(state, make_note(72, 0.50, 0.60), 0, 1);
  auto values = binary_checklist(state, make_note(60, 1.00, 1.2), kWindow, RecencyBasis::Onset);
  CHECK(values[0] == 0.0);
}

TEST_CASE("a held note stays recent past the window") {
  FingerRecency state;
  state = recency_update(state, make_note(72, 0.10, 1.50), 0, 3);  // still sounding at 1.0
  auto values = binary_checklist(state, make_note(60, 1.00, 1.2), kWindow, RecencyBasis::Onset);
  CHECK(values[2] == 1.0);
}

TEST_CASE("empty state gives the zero vector and all-dummy features") {
  FingerRecency state;
  auto values = binary_checklist(state, make_note(60, 0.0, 0.5), kWindow, RecencyBasis::Onset);
  for (double v : values) CHECK(v == 0.0);
  auto feats = distance_features(state, make_note(60, 0.0, 0.5), kWindow, RecencyBasis::Onset);
  for (const auto& f : feats) CHECK_FALSE(f.recent);
}

TEST_CASE("distance features bucket lattice displacement per finger") {
  FingerRecency state;
  state = recency_update(state, make_note(60, 0.95, 1.3), 0, 1);   // same pitch
  state = recency_update(state, make_note(84, 0.96, 1.3), 1, 5);   // 14 white keys above
  auto feats = distance_features(state, make_note(60, 1.00, 1.2), kWindow, RecencyBasis::Onset);
  REQUIRE(feats[0].recent);
  CHECK(feats[0].h_index == 0 + kLatticeCap);  // zero displacement
  CHECK(feats[0].v_index == 1);
  REQUIRE(feats[4].recent);
  CHECK(feats[4].h_index == -9 + kLatticeCap);  // -14 whites capped at -9
  CHECK(feats[4].v_index == 1);
  CHECK_FALSE(feats[1].recent);
}

TEST_CASE("offset recency basis anchors on the release") {
  FingerRecency state;
  // released at 0.95: within 100ms of onset 1.0 by offset basis, onset stale
  state = recency_update(state, make_note(72, 0.40, 0.95), 0, 2);
  auto on = binary_checklist(state, make_note(60, 1.00, 1.2), kWindow, RecencyBasis::Onset);
  auto off = binary_checklist(state, make_note(60, 1.00, 1.2), kWindow, RecencyBasis::Offset);
  CHECK(on[1] == 0.0);
  CHECK(off[1] == 1.0);
}

TEST_CASE("binary checklist has at most five entries in {-1,0,+1}") {
  RngState rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    auto part = pftest::random_part(rng, 20);
    auto labels = pftest::random_labels(rng, 20);
    FingerRecency state;
    for (std::size_t i = 0; i < part.notes.size(); ++i) {
      auto values = binary_checklist(state, part.notes[i], kWindow, RecencyBasis::Onset);
      int nonzero = 0;
      for (double v : values) {
        CHECK((v == 0.0 || v == 1.0 || v == -1.0));
        if (v != 0.0) ++nonzero;
      }
      CHECK(nonzero <= 5);
      state = recency_update(state, part.notes[i], static_cast<int>(i), labels[i]);
    }
  }
}

TEST_CASE("incremental recency equals the from-scratch oracle") {
  RngState rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.below(30);
    auto part = pftest::random_part(rng, n);
    auto labels = pftest::random_labels(rng, n);
    FingerRecency incremental;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<int> prefix(labels.begin(), labels.begin() + i);
      FingerRecency scratch = recency_from_scratch(part.notes, prefix);
      auto a = binary_checklist(incremental, part.notes[i], kWindow, RecencyBasis::Onset);
      auto b = binary_checklist(scratch, part.notes[i], kWindow, RecencyBasis::Onset);
      CHECK(a == b);
      auto fa = distance_features(incremental, part.notes[i], kWindow, RecencyBasis::Onset);
      auto fb = distance_features(scratch, part.notes[i], kWindow, RecencyBasis::Onset);
      for (int f = 0; f < kNumFingers; ++f) {
        CHECK(fa[f].recent == fb[f].recent);
        CHECK(fa[f].h_index == fb[f].h_index);
        CHECK(fa[f].v_index == fb[f].v_index);
      }
      incremental = recency_update(incremental, part.notes[i], static_cast<int>(i), labels[i]);
    }
  }
}

TEST_CASE("widening the gap past the window zeroes the checklist") {
  FingerRecency state;
  state = recency_update(state, make_note(64, 0.0, 0.05), 0, 1);
  state = recency_update(state, make_note(66, 0.06, 0.11), 1, 2);
  // next onset far beyond every onset+window, nothing held
  auto values = binary_checklist(state, make_note(60, 5.0, 5.2), kWindow, RecencyBasis::Onset);
  for (double v : values) CHECK(v == 0.0);
}

TEST_CASE("prev finger rows: start then the five fingers") {
  CHECK(prev_finger_row(0) == 0);
  for (int f = 1; f <= 5; ++f) CHECK(prev_finger_row(f) == f);
  CHECK_THROWS_AS(prev_finger_row(6), ContractError);
}
