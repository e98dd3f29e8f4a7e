#include <catch2/catch_amalgamated.hpp>

#include "pianofinger/gradcheck.hpp"

using namespace pianofinger;

TEST_CASE("sampled finite-difference check passes for all five architectures") {
  GradCheckOptions opt;
  opt.max_elements_per_param = 24;  // spot-check here; the acceptance suite runs every element
  for (ModelKind kind : {ModelKind::Bilstm, ModelKind::ArTagger, ModelKind::PrevFinger,
                         ModelKind::BinaryChecklist, ModelKind::DistanceChecklist}) {
    auto report = gradcheck_architecture(kind, opt);
    INFO("architecture " << model_kind_name(kind) << " worst " << report.worst_rel);
    CHECK(report.pass);
    CHECK(report.kind == kind);
    CHECK_FALSE(report.groups.empty());
  }
}

TEST_CASE("the report covers every parameter group") {
  GradCheckOptions opt;
  opt.max_elements_per_param = 8;
  auto report = gradcheck_architecture(ModelKind::DistanceChecklist, opt);
  CHECK(report.kind == ModelKind::DistanceChecklist);
  bool saw_dummy = false, saw_mlp = false, saw_enc = false, saw_chk = false;
  for (const auto& group : report.groups) {
    if (group.name == "chk.dummy") saw_dummy = true;
    if (group.name.rfind("mlp.", 0) == 0) saw_mlp = true;
    if (group.name.rfind("enc.", 0) == 0) saw_enc = true;
    if (group.name.rfind("chk.f", 0) == 0) saw_chk = true;
  }
  CHECK(saw_dummy);
  CHECK(saw_mlp);
  CHECK(saw_enc);
  CHECK(saw_chk);
}

TEST_CASE("a corrupted analytic gradient is detected") {
  GradCheckOptions opt;
  opt.max_elements_per_param = 8;
  opt.inject_grad_error = 1e-2;
  auto report = gradcheck_architecture(ModelKind::Bilstm, opt);
  CHECK_FALSE(report.pass);
}

TEST_CASE("other input representations also pass a sampled check") {
  GradCheckOptions opt;
  opt.max_elements_per_param = 8;
  for (Rep rep : {Rep::RawPitch, Rep::NoteOctave, Rep::NoteRelDist}) {
    opt.rep = rep;
    auto report = gradcheck_architecture(ModelKind::Bilstm, opt);
    INFO("rep " << rep_name(rep) << " worst " << report.worst_rel);
    CHECK(report.pass);
  }
}
