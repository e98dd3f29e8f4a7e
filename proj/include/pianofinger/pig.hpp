#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pianofinger/errors.hpp"

namespace pianofinger {

constexpr int kLowestPitch = 21;   // A0
constexpr int kHighestPitch = 108; // C8
constexpr int kNumFingers = 5;

enum class Hand { Right, Left };
enum class Split { Train, Validation, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

// One key event. `src_index` remembers the record's position in the source
// file so serialization can restore the original line order.
struct Note {
  int pitch = 0;       // MIDI, [21,108]
  double onset = 0.0;  // seconds
  double offset = 0.0; // seconds, > onset
  Hand hand = Hand::Right;
  std::size_t src_index = 0;

  bool same_event(const Note& o) const {
    return pitch == o.pitch && onset == o.onset && offset == o.offset && hand == o.hand;
  }
};

// A parsed PIG data line: the note plus its signed finger annotation
// (positive = right-hand finger, negative = left-hand finger).
struct PigRecord {
  Note note;
  int finger = 0;
};

// Ordered note sequence for one (possibly reflected) hand plus K annotator
// label sequences of magnitudes 1..5.
struct HandPart {
  std::vector<Note> notes;
  std::vector<std::vector<int>> annotations;
  std::string source_id;
  bool reflected = false;

  std::size_t size() const { return notes.size(); }
};

struct Corpus {
  std::vector<HandPart> parts;
  Split split = Split::Train;
};

// ---------------------------------------------------------------------------
// Spelled pitch <-> MIDI. C4 = 60; accidentals #, ##, b, bb.
// ---------------------------------------------------------------------------

inline int parse_spelled_pitch(const std::string& text) {
  if (text.empty()) throw ParseError("empty pitch field");
  static constexpr int kLetterSemitone[7] = {9, 11, 0, 2, 4, 5, 7};  // A..G
  char letter = text[0];
  if (letter < 'A' || letter > 'G') throw ParseError("bad pitch letter in '" + text + "'");
  int semitone = kLetterSemitone[letter - 'A'];
  std::size_t pos = 1;
  while (pos < text.size() && (text[pos] == '#' || text[pos] == 'b')) {
    semitone += text[pos] == '#' ? 1 : -1;
    ++pos;
  }
  if (pos >= text.size()) throw ParseError("missing octave in pitch '" + text + "'");
  int octave = 0;
  try {
    std::size_t used = 0;
    octave = std::stoi(text.substr(pos), &used);
    if (pos + used != text.size()) throw ParseError("");
  } catch (const std::exception&) {
    throw ParseError("bad octave in pitch '" + text + "'");
  }
  return (octave + 1) * 12 + semitone;
}

inline std::string spell_pitch(int midi) {
  static const char* kNames[12] = {"C",  "C#", "D",  "D#", "E",  "F",
                                   "F#", "G",  "G#", "A",  "A#", "B"};
  int octave = midi / 12 - 1;
  return std::string(kNames[midi % 12]) + std::to_string(octave);
}

// Black keys are the five raised pitch classes per octave.
inline bool is_black_key(int pitch) {
  switch (pitch % 12) {
    case 1: case 3: case 6: case 8: case 10: return true;
    default: return false;
  }
}

// ---------------------------------------------------------------------------
// PIG text parsing. Data lines carry 8 tab-separated fields:
//   id  onset  offset  spelled-pitch  on-vel  off-vel  channel  finger
// Finger substitutions are written "a_b"; the first finger is kept.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == '\t' || c == ' ') {
      if (!cur.empty()) fields.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) fields.push_back(std::move(cur));
  return fields;
}

inline int parse_finger_field(const std::string& field, const std::string& where) {
  // Keep only the first finger of a substitution a_b: that is the onset finger.
  std::string first = field.substr(0, field.find('_'));
  int value = 0;
  try {
    std::size_t used = 0;
    value = std::stoi(first, &used);
    if (used != first.size()) throw ParseError("");
  } catch (const std::exception&) {
    throw ParseError(where + ": bad finger field '" + field + "'");
  }
  if (value == 0 || value > kNumFingers || value < -kNumFingers) {
    throw ParseError(where + ": finger out of range in '" + field + "'");
  }
  return value;
}

inline double parse_seconds(const std::string& field, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(field, &used);
    if (used != field.size()) throw ParseError("");
    return v;
  } catch (const std::exception&) {
    throw ParseError(where + ": bad time field '" + field + "'");
  }
}

}  // namespace detail

inline std::vector<PigRecord> parse_pig(std::istream& in, const std::string& name = "<pig>") {
  std::vector<PigRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string where = name + ":" + std::to_string(line_no);
    // Comment and blank lines produce no records.
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line.compare(first, 2, "//") == 0) continue;

    auto fields = detail::split_fields(line);
    if (fields.size() != 8) {
      throw ParseError(where + ": expected 8 fields, got " + std::to_string(fields.size()));
    }
    PigRecord rec;
    rec.note.onset = detail::parse_seconds(fields[1], where);
    rec.note.offset = detail::parse_seconds(fields[2], where);
    if (!(rec.note.offset > rec.note.onset)) {
      throw ParseError(where + ": offset must exceed onset");
    }
    try {
      rec.note.pitch = parse_spelled_pitch(fields[3]);
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (rec.note.pitch < kLowestPitch || rec.note.pitch > kHighestPitch) {
      throw RangeError(where + ": pitch " + std::to_string(rec.note.pitch) +
                       " outside [21,108]");
    }
    int channel = 0;
    try {
      channel = std::stoi(fields[6]);
    } catch (const std::exception&) {
      throw ParseError(where + ": bad channel field '" + fields[6] + "'");
    }
    if (channel != 0 && channel != 1) {
      throw ParseError(where + ": channel must be 0 or 1");
    }
    rec.note.hand = channel == 0 ? Hand::Right : Hand::Left;
    rec.finger = detail::parse_finger_field(fields[7], where);
    rec.note.src_index = records.size();
    records.push_back(rec);
  }
  return records;
}

inline std::vector<PigRecord> parse_pig_string(const std::string& text,
                                               const std::string& name = "<pig>") {
  std::istringstream in(text);
  return parse_pig(in, name);
}

inline std::vector<PigRecord> parse_pig_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return parse_pig(in, path.filename().string());
}

// ---------------------------------------------------------------------------
// Hand splitting, reflection, ordering.
// ---------------------------------------------------------------------------

// Partition records by hand; finger signs must agree with the channel and are
// reduced to magnitudes 1..5.
inline std::pair<HandPart, HandPart> split_hands(const std::vector<PigRecord>& records,
                                                 const std::string& source_id = "") {
  HandPart right, left;
  right.source_id = source_id.empty() ? "" : source_id + ":R";
  left.source_id = source_id.empty() ? "" : source_id + ":L";
  std::vector<int> right_fingers, left_fingers;
  for (const auto& rec : records) {
    bool finger_right = rec.finger > 0;
    bool channel_right = rec.note.hand == Hand::Right;
    if (finger_right != channel_right) {
      throw ConsistencyError(source_id + ": record " + std::to_string(rec.note.src_index) +
                             " channel and finger sign disagree");
    }
    if (channel_right) {
      right.notes.push_back(rec.note);
      right_fingers.push_back(rec.finger);
    } else {
      left.notes.push_back(rec.note);
      left_fingers.push_back(-rec.finger);
    }
  }
  if (!right.notes.empty()) right.annotations.push_back(std::move(right_fingers));
  if (!left.notes.empty()) left.annotations.push_back(std::move(left_fingers));
  return {std::move(right), std::move(left)};
}

// Mirror pitch about D4 = 62. This maps white keys to white keys and black to
// black, so lattice features stay meaningful on reflected parts.
inline int reflect_pitch(int pitch) { return 124 - pitch; }

// Turn a left-hand part into a right-hand-geometry part. Finger labels keep
// their magnitudes; timing is untouched.
inline HandPart reflect_left_hand(HandPart part) {
  if (part.reflected) throw ContractError(part.source_id + ": part already reflected");
  for (auto& note : part.notes) {
    if (note.hand != Hand::Left) {
      throw ContractError(part.source_id + ": reflect_left_hand on a non-left note");
    }
    int mirrored = reflect_pitch(note.pitch);
    if (mirrored < kLowestPitch || mirrored > kHighestPitch) {
      throw RangeError(part.source_id + ": reflected pitch " + std::to_string(mirrored) +
                       " outside [21,108]");
    }
    note.pitch = mirrored;
  }
  part.reflected = true;
  return part;
}

// Canonical arpeggiation order: onset ascending, then pitch ascending.
// Annotation sequences are permuted identically.
inline HandPart order_notes(HandPart part) {
  const std::size_t n = part.notes.size();
  for (const auto& ann : part.annotations) {
    if (ann.size() != n) {
      throw ContractError(part.source_id + ": annotation length " +
                          std::to_string(ann.size()) + " != " + std::to_string(n));
    }
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    const Note& na = part.notes[a];
    const Note& nb = part.notes[b];
    if (na.onset != nb.onset) return na.onset < nb.onset;
    return na.pitch < nb.pitch;
  });
  HandPart out;
  out.source_id = part.source_id;
  out.reflected = part.reflected;
  out.notes.reserve(n);
  for (std::size_t i : perm) out.notes.push_back(part.notes[i]);
  for (const auto& ann : part.annotations) {
    std::vector<int> permuted(n);
    for (std::size_t i = 0; i < n; ++i) permuted[i] = ann[perm[i]];
    out.annotations.push_back(std::move(permuted));
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (out.notes[i - 1].onset == out.notes[i].onset &&
        out.notes[i - 1].pitch == out.notes[i].pitch) {
      throw ConsistencyError(out.source_id + ": duplicate note (onset " +
                             std::to_string(out.notes[i].onset) + ", pitch " +
                             std::to_string(out.notes[i].pitch) + ")");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization. Records come out in original file order, pitches un-reflected
// and fingers negated for parts that started life as left-hand.
// ---------------------------------------------------------------------------

namespace detail {

struct OutRecord {
  std::size_t src_index;
  int pitch;
  double onset, offset;
  int channel;
  int finger;  // signed
};

inline void append_part_records(const HandPart& part, const std::vector<int>& predictions,
                                std::vector<OutRecord>& out) {
  if (predictions.size() != part.notes.size()) {
    throw ContractError(part.source_id + ": " + std::to_string(predictions.size()) +
                        " predictions for " + std::to_string(part.notes.size()) + " notes");
  }
  for (std::size_t i = 0; i < part.notes.size(); ++i) {
    const Note& note = part.notes[i];
    OutRecord rec;
    rec.src_index = note.src_index;
    rec.pitch = part.reflected ? reflect_pitch(note.pitch) : note.pitch;
    rec.onset = note.onset;
    rec.offset = note.offset;
    rec.channel = note.hand == Hand::Right ? 0 : 1;
    int finger = predictions[i];
    if (finger < 1 || finger > kNumFingers) {
      throw RangeError(part.source_id + ": prediction " + std::to_string(finger) +
                       " outside [1,5]");
    }
    rec.finger = note.hand == Hand::Right ? finger : -finger;
    out.push_back(rec);
  }
}

inline std::string render_records(std::vector<OutRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const OutRecord& a, const OutRecord& b) { return a.src_index < b.src_index; });
  std::string text;
  char buf[160];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const OutRecord& r = records[i];
    std::snprintf(buf, sizeof(buf), "%zu\t%.6f\t%.6f\t%s\t64\t64\t%d\t%d\n", i, r.onset,
                  r.offset, spell_pitch(r.pitch).c_str(), r.channel, r.finger);
    text += buf;
  }
  return text;
}

}  // namespace detail

inline std::string serialize_pig(const HandPart& part, const std::vector<int>& predictions) {
  std::vector<detail::OutRecord> records;
  detail::append_part_records(part, predictions, records);
  return detail::render_records(records);
}

// Merge several parts (typically the two hands of one piece) back into one file.
inline std::string serialize_pig_parts(const std::vector<const HandPart*>& parts,
                                       const std::vector<std::vector<int>>& predictions) {
  if (parts.size() != predictions.size()) {
    throw ContractError("serialize_pig_parts: parts/predictions size mismatch");
  }
  std::vector<detail::OutRecord> records;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    detail::append_part_records(*parts[p], predictions[p], records);
  }
  return detail::render_records(records);
}

// ---------------------------------------------------------------------------
// Dataset manifest and corpus loading.
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string path;  // relative to the dataset directory
  Split split;
};

inline Split parse_split_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "validation" || name == "val" || name == "valid") return Split::Validation;
  if (name == "test") return Split::Test;
  throw ParseError("unknown split name '" + name + "'");
}

// One "relative-path split" pair per line; comments start with '#' or "//".
inline std::vector<ManifestEntry> parse_manifest(std::istream& in,
                                                 const std::string& name = "<manifest>") {
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = detail::split_fields(line);
    if (fields.empty() || fields[0][0] == '#' || fields[0].compare(0, 2, "//") == 0) continue;
    if (fields.size() != 2) {
      throw ParseError(name + ":" + std::to_string(line_no) +
                       ": expected '<path> <split>'");
    }
    entries.push_back({fields[0], parse_split_name(fields[1])});
  }
  return entries;
}

// PIG files are named <piece>-<annotator>_fingering.txt; everything before the
// first '-' identifies the piece.
inline std::string piece_id_of(const std::string& filename) {
  std::string stem = std::filesystem::path(filename).stem().string();
  std::size_t dash = stem.find('-');
  return dash == std::string::npos ? stem : stem.substr(0, dash);
}

struct LoadStats {
  std::size_t pieces = 0;
  std::size_t annotated_songs = 0;  // parsed annotation files folded into pieces
  std::size_t parts = 0;
  std::size_t examples = 0;  // (part, annotator) pairs
  std::size_t notes = 0;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;  // per-file parse failures
};

namespace detail {

inline bool same_note_sequence(const HandPart& a, const HandPart& b) {
  if (a.notes.size() != b.notes.size()) return false;
  for (std::size_t i = 0; i < a.notes.size(); ++i) {
    if (!a.notes[i].same_event(b.notes[i])) return false;
  }
  return true;
}

// Fold `fresh` (single annotation) into an existing part with an identical
// note sequence, or append it as a new part.
inline void merge_annotation(std::vector<HandPart>& parts, HandPart fresh,
                             const std::string& piece, LoadStats& stats) {
  if (fresh.notes.empty()) return;
  for (auto& existing : parts) {
    if (piece_id_of(existing.source_id) == piece && existing.reflected == fresh.reflected &&
        !existing.notes.empty() && existing.notes[0].hand == fresh.notes[0].hand &&
        same_note_sequence(existing, fresh)) {
      existing.annotations.push_back(std::move(fresh.annotations[0]));
      return;
    }
  }
  bool first_of_piece = std::none_of(parts.begin(), parts.end(), [&](const HandPart& p) {
    return piece_id_of(p.source_id) == piece && !p.notes.empty() &&
           p.notes[0].hand == fresh.notes[0].hand;
  });
  if (!first_of_piece) {
    stats.warnings.push_back(fresh.source_id +
                             ": note sequence disagrees with an earlier annotator; "
                             "treated as a distinct piece");
  }
  parts.push_back(std::move(fresh));
}

}  // namespace detail

// Parse every manifest file belonging to `split`, apply hand split, left-hand
// reflection and arpeggiation ordering, and group annotators on identical note
// sequences.
inline Corpus load_corpus(const std::filesystem::path& dataset_dir,
                          const std::vector<ManifestEntry>& manifest, Split split,
                          LoadStats* stats_out = nullptr) {
  Corpus corpus;
  corpus.split = split;
  LoadStats stats;
  std::set<std::string> pieces;
  for (const auto& entry : manifest) {
    if (entry.split != split) continue;
    const std::string piece = piece_id_of(entry.path);
    try {
      auto records = parse_pig_file(dataset_dir / entry.path);
      std::string stem = std::filesystem::path(entry.path).stem().string();
      auto [right, left] = split_hands(records, stem);
      if (!left.notes.empty()) left = reflect_left_hand(std::move(left));
      if (!right.notes.empty()) {
        detail::merge_annotation(corpus.parts, order_notes(std::move(right)), piece, stats);
      }
      if (!left.notes.empty()) {
        detail::merge_annotation(corpus.parts, order_notes(std::move(left)), piece, stats);
      }
      pieces.insert(piece);
      ++stats.annotated_songs;
    } catch (const std::exception& e) {
      stats.errors.push_back(entry.path + ": " + e.what());
    }
  }
  stats.pieces = pieces.size();
  stats.parts = corpus.parts.size();
  for (const auto& part : corpus.parts) {
    stats.examples += part.annotations.size();
    stats.notes += part.notes.size();
  }
  if (stats_out) *stats_out = stats;
  return corpus;
}

}  // namespace pianofinger
