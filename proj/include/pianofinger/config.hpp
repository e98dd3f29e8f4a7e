#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "pianofinger/encode.hpp"
#include "pianofinger/errors.hpp"

namespace pianofinger {

enum class ModelKind { Bilstm, ArTagger, PrevFinger, BinaryChecklist, DistanceChecklist };

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Bilstm: return "bilstm";
    case ModelKind::ArTagger: return "ar_tagger";
    case ModelKind::PrevFinger: return "prev_finger";
    case ModelKind::BinaryChecklist: return "binary_checklist";
    case ModelKind::DistanceChecklist: return "distance_checklist";
  }
  return "?";
}

inline ModelKind model_kind_from_name(const std::string& name) {
  if (name == "bilstm") return ModelKind::Bilstm;
  if (name == "ar_tagger") return ModelKind::ArTagger;
  if (name == "prev_finger") return ModelKind::PrevFinger;
  if (name == "binary_checklist") return ModelKind::BinaryChecklist;
  if (name == "distance_checklist") return ModelKind::DistanceChecklist;
  throw ConfigError("unknown model '" + name + "'");
}

// The `checklist` key names the same family from the conditioning scheme's
// point of view; both spellings are accepted.
inline ModelKind model_kind_from_checklist(const std::string& name) {
  if (name == "none") return ModelKind::Bilstm;
  if (name == "autoregressive") return ModelKind::ArTagger;
  if (name == "prev_finger") return ModelKind::PrevFinger;
  if (name == "binary") return ModelKind::BinaryChecklist;
  if (name == "distance") return ModelKind::DistanceChecklist;
  throw ConfigError("unknown checklist '" + name + "'");
}

inline const char* checklist_name(ModelKind k) {
  switch (k) {
    case ModelKind::Bilstm: return "none";
    case ModelKind::ArTagger: return "autoregressive";
    case ModelKind::PrevFinger: return "prev_finger";
    case ModelKind::BinaryChecklist: return "binary";
    case ModelKind::DistanceChecklist: return "distance";
  }
  return "?";
}

enum class RecencyBasis { Onset, Offset };
enum class DecodeMode { Greedy, Beam, Sample };

inline DecodeMode decode_mode_from_name(const std::string& name) {
  if (name == "greedy") return DecodeMode::Greedy;
  if (name == "beam") return DecodeMode::Beam;
  if (name == "sample") return DecodeMode::Sample;
  throw ConfigError("unknown decode mode '" + name + "'");
}

struct ModelConfig {
  ModelKind model = ModelKind::Bilstm;
  Rep input_rep = Rep::Lattice;
  int hidden = 1024;     // LSTM hidden size, per direction
  int layers = 2;
  int mlp_hidden = 1024;
  double dropout = 0.2;
  int d = 256;           // total input embedding width
  int d_check = 32;      // per-finger distance-checklist width
  int d_prev = 0;        // prev-finger / label embedding width; 0 = use d
  double recency_ms = 100.0;
  RecencyBasis recency_basis = RecencyBasis::Onset;

  int prev_width() const { return d_prev > 0 ? d_prev : d; }

  void validate() const {
    if (hidden <= 0 || layers <= 0 || mlp_hidden <= 0 || d <= 0 || d_check <= 0) {
      throw ConfigError("model sizes must be positive");
    }
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
    if (d % 2 != 0) throw ConfigError("d must be even (two-part representations split it)");
    if (d_check % 2 != 0) throw ConfigError("d_check must be even");
    if (recency_ms < 0.0) throw ConfigError("recency_ms must be >= 0");
  }
};

struct TrainConfig {
  double lr = 1e-4;
  int epochs = 10;
  int batch_parts = 1;
  double lambda_rl = 1.0;
  int chunk_len = 10;
  int baseline_window = 50;
  int warmup_epochs = 10;
  std::uint64_t seed = 0;
  int eval_every = 1;  // epochs between validation passes
  bool reward_disjoint = false;

  void validate() const {
    if (chunk_len < 2) throw ConfigError("chunk_len must be >= 2");
    if (baseline_window < 1) throw ConfigError("baseline_window must be >= 1");
    if (lambda_rl < 0.0) throw ConfigError("lambda_rl must be >= 0");
    if (epochs < 0 || warmup_epochs < 0) throw ConfigError("epoch counts must be >= 0");
    if (batch_parts < 1) throw ConfigError("batch_parts must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  }
};

struct DecodeConfig {
  DecodeMode mode = DecodeMode::Beam;
  int beam_width = 10;
};

// ---------------------------------------------------------------------------
// Flat `key = value` config text.
// ---------------------------------------------------------------------------

using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config(std::istream& in, const std::string& name = "<config>") {
  ConfigMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(name + ":" + std::to_string(line_no) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      std::size_t a = s.find_first_not_of(" \t");
      std::size_t b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(name + ":" + std::to_string(line_no) + ": empty key");
    }
    map[key] = value;
  }
  return map;
}

inline ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in, path);
}

namespace detail {

inline int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    int v = std::stoi(value, &used);
    if (used != value.size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": '" + value + "'");
  }
}

inline double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + value + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("bad boolean for " + key + ": '" + value + "'");
}

}  // namespace detail

struct FullConfig {
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
};

inline FullConfig config_from_map(const ConfigMap& map) {
  FullConfig cfg;
  bool model_set = false;
  for (const auto& [key, value] : map) {
    if (key == "model") {
      cfg.model.model = model_kind_from_name(value);
      model_set = true;
    } else if (key == "checklist") {
      ModelKind kind = model_kind_from_checklist(value);
      if (model_set && kind != cfg.model.model) {
        throw ConfigError("model and checklist keys disagree");
      }
      cfg.model.model = kind;
      model_set = true;
    } else if (key == "input_rep") {
      cfg.model.input_rep = rep_from_name(value);
    } else if (key == "hidden") {
      cfg.model.hidden = detail::to_int(key, value);
    } else if (key == "layers") {
      cfg.model.layers = detail::to_int(key, value);
    } else if (key == "mlp_hidden") {
      cfg.model.mlp_hidden = detail::to_int(key, value);
    } else if (key == "dropout") {
      cfg.model.dropout = detail::to_double(key, value);
    } else if (key == "d") {
      cfg.model.d = detail::to_int(key, value);
    } else if (key == "d_check") {
      cfg.model.d_check = detail::to_int(key, value);
    } else if (key == "d_prev") {
      cfg.model.d_prev = detail::to_int(key, value);
    } else if (key == "recency_ms") {
      cfg.model.recency_ms = detail::to_double(key, value);
    } else if (key == "recency_basis") {
      if (value == "onset") cfg.model.recency_basis = RecencyBasis::Onset;
      else if (value == "offset") cfg.model.recency_basis = RecencyBasis::Offset;
      else throw ConfigError("bad recency_basis '" + value + "'");
    } else if (key == "lr") {
      cfg.train.lr = detail::to_double(key, value);
    } else if (key == "epochs") {
      cfg.train.epochs = detail::to_int(key, value);
    } else if (key == "batch_parts") {
      cfg.train.batch_parts = detail::to_int(key, value);
    } else if (key == "lambda_rl") {
      cfg.train.lambda_rl = detail::to_double(key, value);
    } else if (key == "chunk_len") {
      cfg.train.chunk_len = detail::to_int(key, value);
    } else if (key == "baseline_window") {
      cfg.train.baseline_window = detail::to_int(key, value);
    } else if (key == "warmup_epochs") {
      cfg.train.warmup_epochs = detail::to_int(key, value);
    } else if (key == "seed") {
      cfg.train.seed = static_cast<std::uint64_t>(std::stoull(value));
    } else if (key == "eval_every") {
      cfg.train.eval_every = detail::to_int(key, value);
    } else if (key == "reward_disjoint") {
      cfg.train.reward_disjoint = detail::to_bool(key, value);
    } else if (key == "decode") {
      cfg.decode.mode = decode_mode_from_name(value);
    } else if (key == "beam_width") {
      cfg.decode.beam_width = detail::to_int(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  cfg.model.validate();
  cfg.train.validate();
  if (cfg.decode.beam_width < 1) throw ConfigError("beam_width must be >= 1");
  return cfg;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Canonical serialization: every key, sorted, one per line. Checkpoints store
// this echo and reject loads whose architecture keys disagree.
inline std::string config_to_text(const FullConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["model"] = model_kind_name(cfg.model.model);
  kv["input_rep"] = rep_name(cfg.model.input_rep);
  kv["hidden"] = std::to_string(cfg.model.hidden);
  kv["layers"] = std::to_string(cfg.model.layers);
  kv["mlp_hidden"] = std::to_string(cfg.model.mlp_hidden);
  kv["dropout"] = detail::fmt_double(cfg.model.dropout);
  kv["d"] = std::to_string(cfg.model.d);
  kv["d_check"] = std::to_string(cfg.model.d_check);
  kv["d_prev"] = std::to_string(cfg.model.d_prev);
  kv["recency_ms"] = detail::fmt_double(cfg.model.recency_ms);
  kv["recency_basis"] = cfg.model.recency_basis == RecencyBasis::Onset ? "onset" : "offset";
  kv["lr"] = detail::fmt_double(cfg.train.lr);
  kv["epochs"] = std::to_string(cfg.train.epochs);
  kv["batch_parts"] = std::to_string(cfg.train.batch_parts);
  kv["lambda_rl"] = detail::fmt_double(cfg.train.lambda_rl);
  kv["chunk_len"] = std::to_string(cfg.train.chunk_len);
  kv["baseline_window"] = std::to_string(cfg.train.baseline_window);
  kv["warmup_epochs"] = std::to_string(cfg.train.warmup_epochs);
  kv["seed"] = std::to_string(cfg.train.seed);
  kv["eval_every"] = std::to_string(cfg.train.eval_every);
  kv["reward_disjoint"] = cfg.train.reward_disjoint ? "true" : "false";
  kv["decode"] = cfg.decode.mode == DecodeMode::Greedy   ? "greedy"
                 : cfg.decode.mode == DecodeMode::Beam   ? "beam"
                                                         : "sample";
  kv["beam_width"] = std::to_string(cfg.decode.beam_width);
  std::string text;
  for (const auto& [k, v] : kv) text += k + " = " + v + "\n";
  return text;
}

inline FullConfig config_from_text(const std::string& text) {
  std::istringstream in(text);
  return config_from_map(parse_config(in));
}

// Architecture keys only: two configs that agree here describe the same
// parameter shapes and wiring.
inline std::string model_config_signature(const FullConfig& cfg) {
  std::string sig;
  sig += std::string("model=") + model_kind_name(cfg.model.model);
  sig += std::string(";input_rep=") + rep_name(cfg.model.input_rep);
  sig += ";hidden=" + std::to_string(cfg.model.hidden);
  sig += ";layers=" + std::to_string(cfg.model.layers);
  sig += ";mlp_hidden=" + std::to_string(cfg.model.mlp_hidden);
  sig += ";d=" + std::to_string(cfg.model.d);
  sig += ";d_check=" + std::to_string(cfg.model.d_check);
  sig += ";d_prev=" + std::to_string(cfg.model.prev_width());
  return sig;
}

}  // namespace pianofinger
