#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pianofinger/model.hpp"
#include "test_util.hpp"

using namespace pianofinger;
using pftest::make_note;

namespace {

const ModelKind kAllKinds[] = {ModelKind::Bilstm, ModelKind::ArTagger, ModelKind::PrevFinger,
                               ModelKind::BinaryChecklist, ModelKind::DistanceChecklist};

ModelConfig tiny_config(ModelKind kind, Rep rep = Rep::Lattice) {
  ModelConfig cfg;
  cfg.model = kind;
  cfg.input_rep = rep;
  cfg.hidden = 4;
  cfg.layers = 2;
  cfg.mlp_hidden = 6;
  cfg.dropout = 0.2;
  cfg.d = 8;
  cfg.d_check = 4;
  cfg.d_prev = 4;
  return cfg;
}

// Notes close enough in time that recency features are live.
HandPart dense_part(std::size_t n, std::uint64_t seed) {
  RngState rng(seed);
  HandPart part;
  part.source_id = "dense";
  double onset = 0.0;
  int pitch = 55;
  for (std::size_t i = 0; i < n; ++i) {
    pitch += static_cast<int>(rng.below(9)) - 4;
    pitch = std::clamp(pitch, kLowestPitch, kHighestPitch);
    part.notes.push_back(make_note(pitch, onset, onset + 0.07, Hand::Right, i));
    onset += 0.08;
  }
  part.annotations.push_back(pftest::random_labels(rng, n));
  return part;
}

void zero_params(ParamStore<double>& params) {
  for (std::size_t i = 0; i < params.count(); ++i) params[i].value.fill(0.0);
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("step distributions are normalized and strictly positive") {
  for (ModelKind kind : kAllKinds) {
    RngState rng(1);
    Model<double> model(tiny_config(kind), rng);
    HandPart part = dense_part(6, 2);
    for (std::size_t i : {std::size_t(0), std::size_t(3)}) {
      std::vector<int> prefix(part.annotations[0].begin(), part.annotations[0].begin() + i);
      auto dist = model.forward_step_conditional(part, prefix, i);
      double sum = 0.0;
      for (double p : dist.probs.data) {
        CHECK(p > 0.0);
        sum += p;
      }
      CHECK(sum == Catch::Approx(1.0).margin(1e-6));
      CHECK(dist.logits.size() == 5);
    }
  }
}

TEST_CASE("forward_independent produces one distribution per note") {
  RngState rng(3);
  Model<double> model(tiny_config(ModelKind::Bilstm), rng);
  HandPart part = dense_part(9, 4);
  RngState eval_rng(0);
  auto out = model.forward_independent(part, false, eval_rng);
  REQUIRE(out.size() == 9);
  RngState eval_rng2(0);
  auto out2 = model.forward_independent(part, false, eval_rng2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].logits.data == out2[i].logits.data);  // eval determinism
  }
  Model<double> conditional(tiny_config(ModelKind::PrevFinger), rng);
  CHECK_THROWS_AS(conditional.forward_independent(part, false, eval_rng), ContractError);
}

TEST_CASE("prefix length must match the step index") {
  RngState rng(5);
  Model<double> model(tiny_config(ModelKind::PrevFinger), rng);
  HandPart part = dense_part(5, 6);
  CHECK_THROWS_AS(model.forward_step_conditional(part, {1, 2}, 3), ContractError);
}

TEST_CASE("teacher-forced full pass equals step-by-step evaluation") {
  for (ModelKind kind : kAllKinds) {
    RngState rng(7);
    Model<double> model(tiny_config(kind), rng);
    HandPart part = dense_part(7, 8);
    const auto& gold = part.annotations[0];

    // full pass on one tape, eval mode
    std::vector<Tensor<double>> full;
    {
      Tape<double> tape(false);
      RngState no_rng(0);
      auto ctx = model.make_context(tape, part, false, no_rng);
      auto stepper = model.start(tape, ctx, false, nullptr);
      for (std::size_t i = 0; i < part.notes.size(); ++i) {
        full.push_back(tape.value(stepper.step_logits()));
        stepper.advance(gold[i]);
      }
    }
    // step-by-step over the cached eval context
    auto ec = model.make_eval_context(part);
    auto state = model.start_eval();
    for (std::size_t i = 0; i < part.notes.size(); ++i) {
      Tensor<double> logits = model.eval_step_logits(ec, state);
      CHECK(logits.data == full[i].data);
      model.eval_advance(state, ec, gold[i]);
    }
  }
}

TEST_CASE("prev-finger steps depend only on the last label") {
  RngState rng(9);
  Model<double> model(tiny_config(ModelKind::PrevFinger), rng);
  HandPart part = dense_part(6, 10);
  auto a = model.forward_step_conditional(part, {1, 4, 3}, 3);
  auto b = model.forward_step_conditional(part, {2, 5, 3}, 3);
  CHECK(a.logits.data == b.logits.data);
}

TEST_CASE("all-zero binary checklist reduces to the context pathway") {
  RngState rng(11);
  Model<double> model(tiny_config(ModelKind::BinaryChecklist), rng);
  // notes a full second apart, releases long past: nothing recent, no holds
  HandPart part;
  part.source_id = "sparse";
  for (std::size_t i = 0; i < 5; ++i) {
    part.notes.push_back(make_note(60 + static_cast<int>(i) * 2, i * 1.0, i * 1.0 + 0.2,
                                   Hand::Right, i));
  }
  part.annotations = {{1, 2, 3, 4, 5}};
  auto a = model.forward_step_conditional(part, {1, 2, 3}, 3);
  auto b = model.forward_step_conditional(part, {5, 4, 1}, 3);
  CHECK(a.logits.data == b.logits.data);  // prefix is invisible through a zero checklist
}

TEST_CASE("conditional kinds react to the prefix") {
  for (ModelKind kind : {ModelKind::ArTagger, ModelKind::PrevFinger, ModelKind::BinaryChecklist,
                         ModelKind::DistanceChecklist}) {
    RngState rng(13);
    Model<double> model(tiny_config(kind), rng);
    HandPart part = dense_part(6, 14);
    auto a = model.forward_step_conditional(part, {1, 2, 2}, 3);
    auto b = model.forward_step_conditional(part, {1, 2, 4}, 3);
    CHECK(max_abs_diff(a.logits, b.logits) > 1e-12);
  }
}

TEST_CASE("zeroed parameters give the uniform sequence likelihood") {
  for (ModelKind kind : kAllKinds) {
    RngState rng(15);
    Model<double> model(tiny_config(kind), rng);
    zero_params(model.params());
    HandPart part = dense_part(6, 16);
    double ll = model.sequence_log_likelihood(part, part.annotations[0]);
    CHECK(ll == Catch::Approx(6.0 * std::log(0.2)).epsilon(1e-12));
  }
}

TEST_CASE("log likelihood of any labeling is nonpositive") {
  RngState rng(17);
  for (ModelKind kind : kAllKinds) {
    Model<double> model(tiny_config(kind), rng);
    HandPart part = dense_part(8, 18);
    CHECK(model.sequence_log_likelihood(part, part.annotations[0]) <= 0.0);
  }
}

TEST_CASE("independent likelihood is the sum of per-step log probs") {
  RngState rng(19);
  Model<double> model(tiny_config(ModelKind::Bilstm), rng);
  HandPart part = dense_part(7, 20);
  RngState eval_rng(0);
  auto dists = model.forward_independent(part, false, eval_rng);
  const auto& labels = part.annotations[0];
  double sum = 0.0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    sum += Model<double>::log_prob_value(dists[i].logits, labels[i]);
  }
  CHECK(model.sequence_log_likelihood(part, labels) == Catch::Approx(sum).margin(1e-12));
}

TEST_CASE("likelihoods normalize over the full label space") {
  for (ModelKind kind : kAllKinds) {
    RngState rng(21);
    Model<double> model(tiny_config(kind), rng);
    HandPart part = dense_part(3, 22);
    double total = 0.0;
    std::vector<int> labels(3);
    for (labels[0] = 1; labels[0] <= 5; ++labels[0]) {
      for (labels[1] = 1; labels[1] <= 5; ++labels[1]) {
        for (labels[2] = 1; labels[2] <= 5; ++labels[2]) {
          total += std::exp(model.sequence_log_likelihood(part, labels));
        }
      }
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("embedding tables follow the representation's split") {
  RngState rng(23);
  Model<double> raw(tiny_config(ModelKind::Bilstm, Rep::RawPitch), rng);
  CHECK(raw.params().at("input.a").value.shape == std::vector<int>{88, 8});
  CHECK_FALSE(raw.params().contains("input.b"));

  Model<double> lattice(tiny_config(ModelKind::Bilstm, Rep::Lattice), rng);
  CHECK(lattice.params().at("input.a").value.shape == std::vector<int>{19, 4});
  CHECK(lattice.params().at("input.b").value.shape == std::vector<int>{3, 4});

  Model<double> chk(tiny_config(ModelKind::DistanceChecklist), rng);
  CHECK(chk.params().at("chk.f1.h").value.shape == std::vector<int>{19, 2});
  CHECK(chk.params().at("chk.f5.v").value.shape == std::vector<int>{3, 2});
  CHECK(chk.params().at("chk.dummy").value.shape == std::vector<int>{4});
  CHECK(chk.params().at("mlp.l0.W").value.shape == std::vector<int>{6, 2 * 4 + 5 * 4});

  Model<double> prev(tiny_config(ModelKind::PrevFinger), rng);
  CHECK(prev.params().at("label.table").value.shape == std::vector<int>{6, 4});
}
