#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pianofinger/adam.hpp"
#include "pianofinger/nn.hpp"
#include "pianofinger/params.hpp"
#include "pianofinger/tape.hpp"
#include "test_util.hpp"

using namespace pianofinger;

namespace {

Tensor<double> random_tensor(std::vector<int> shape, RngState& rng, double scale = 1.0) {
  Tensor<double> t = Tensor<double>::zeros(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

// Central finite differences of `loss(params)` against the analytic gradients
// accumulated by one backward pass. `build` assembles a scalar loss var from
// the bound params on the given tape; it must be deterministic in the values.
double worst_fd_error(ParamStore<double>& params,
                      const std::function<Tape<double>::Var(Tape<double>&)>& build) {
  params.zero_grads();
  {
    Tape<double> tape(true);
    tape.backward(build(tape));
  }
  auto eval = [&]() {
    Tape<double> tape(false);
    return tape.value(build(tape))[0];
  };
  const double eps = 1e-5;
  double worst = 0.0;
  for (std::size_t p = 0; p < params.count(); ++p) {
    Param<double>& param = params[p];
    for (std::size_t k = 0; k < param.value.size(); ++k) {
      double saved = param.value[k];
      param.value[k] = saved + eps;
      double up = eval();
      param.value[k] = saved - eps;
      double down = eval();
      param.value[k] = saved;
      double numeric = (up - down) / (2 * eps);
      double denom = std::max({std::abs(numeric), std::abs(param.grad[k]), 1e-5});
      worst = std::max(worst, std::abs(numeric - param.grad[k]) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("softmax cross entropy reference values") {
  Tape<double> tape(true);
  auto uniform = tape.leaf(Tensor<double>::vector_of({0, 0, 0, 0, 0}));
  Tensor<double> probs;
  auto loss = softmax_xent(tape, uniform, 3, &probs);
  CHECK(tape.value(loss)[0] == Catch::Approx(std::log(5.0)).epsilon(1e-12));
  double sum = 0.0;
  for (auto p : probs.data) {
    CHECK(p == Catch::Approx(0.2));
    CHECK(p > 0.0);
    sum += p;
  }
  CHECK(sum == Catch::Approx(1.0).margin(1e-6));

  Tape<double> tape2(true);
  auto peaked = tape2.leaf(Tensor<double>::vector_of({10, 0, 0, 0, 0}));
  auto loss2 = softmax_xent(tape2, peaked, 1);
  CHECK(tape2.value(loss2)[0] == Catch::Approx(std::log1p(4.0 * std::exp(-10.0))).epsilon(1e-10));
}

TEST_CASE("softmax gradient is p minus onehot") {
  RngState rng(1);
  ParamStore<double> params;
  Param<double>& logits = params.add("logits", {5});
  logits.value = random_tensor({5}, rng, 2.0);
  double worst = worst_fd_error(params, [&](Tape<double>& tape) {
    auto l = tape.leaf_ref(&logits.value, &logits.grad);
    return softmax_xent(tape, l, 2);
  });
  CHECK(worst < 1e-6);
  // the analytic identity itself
  Tape<double> tape(true);
  Tensor<double> probs;
  auto l = tape.leaf_ref(&logits.value, &logits.grad);
  auto loss = softmax_xent(tape, l, 2, &probs);
  params.zero_grads();
  tape.backward(loss);
  for (int i = 0; i < 5; ++i) {
    double expected = probs[i] - (i == 1 ? 1.0 : 0.0);
    CHECK(logits.grad[i] == Catch::Approx(expected).margin(1e-12));
  }
}

TEST_CASE("every tape op passes a finite-difference spot check") {
  RngState rng(2);
  ParamStore<double> params;
  Param<double>& W = params.add("W", {4, 3});
  Param<double>& x = params.add("x", {3});
  Param<double>& y = params.add("y", {4});
  Param<double>& table = params.add("table", {6, 4});
  W.value = random_tensor({4, 3}, rng);
  x.value = random_tensor({3}, rng);
  y.value = random_tensor({4}, rng);
  table.value = random_tensor({6, 4}, rng);

  double worst = worst_fd_error(params, [&](Tape<double>& tape) {
    auto w = tape.leaf_ref(&W.value, &W.grad);
    auto xv = tape.leaf_ref(&x.value, &x.grad);
    auto yv = tape.leaf_ref(&y.value, &y.grad);
    auto tab = tape.leaf_ref(&table.value, &table.grad);
    auto h = tape.matvec(w, xv);                       // 4
    h = tape.add(h, yv);
    h = tape.mul(h, tape.sigmoid(yv));
    h = tape.add(h, tape.tanh_op(tape.row(tab, 2)));
    h = tape.add(h, tape.relu(tape.row(tab, 5)));
    auto joined = tape.concat2(h, tape.slice(h, 1, 2));  // 6
    RngState drop_rng(42);
    joined = tape.dropout(joined, 0.3, drop_rng, true);
    auto lp = tape.log_prob(joined, 3);
    auto sc = tape.scale(lp, -0.7);
    const Tape<double>::Var parts[2] = {lp, sc};
    const double coeffs[2] = {1.0, 0.5};
    return tape.weighted_sum(std::span<const Tape<double>::Var>(parts, 2),
                             std::span<const double>(coeffs, 2));
  });
  CHECK(worst < 1e-6);
}

TEST_CASE("dropout is identity at eval and rescales at train") {
  RngState rng(3);
  Tape<double> tape(false);
  auto x = tape.leaf(Tensor<double>::vector_of({1, 1, 1, 1, 1, 1, 1, 1}));
  auto eval_out = tape.dropout(x, 0.5, rng, false);
  CHECK(eval_out == x);  // no node added
  auto train_out = tape.dropout(x, 0.5, rng, true);
  for (double v : tape.value(train_out).data) {
    CHECK((v == 0.0 || v == Catch::Approx(2.0)));
  }
  // dropout 0 is a no-op even at train
  CHECK(tape.dropout(x, 0.0, rng, true) == x);
}

TEST_CASE("non-finite values trip a numeric error") {
  Tape<double> tape(false);
  auto big = tape.leaf(Tensor<double>::vector_of({1e308, 1e308}));
  CHECK_THROWS_AS(tape.add(big, big), NumericError);
}

TEST_CASE("lstm cell zero case and forget-gate retention") {
  RngState rng(4);
  ParamStore<double> params;
  auto cell = add_lstm_cell(params, "cell", 3, 4, rng);

  Tape<double> tape(false);
  auto vars = bind_lstm_cell(tape, cell);
  auto x = tape.leaf(Tensor<double>::zeros({3}));
  auto zeros = tape.leaf(Tensor<double>::zeros({4}));
  HcVars<double> state{zeros, zeros};

  // zero input, zero state: candidate g = tanh(0) = 0, so c and h stay 0 only
  // if c_prev = 0
  auto out = lstm_cell(tape, vars, x, state);
  for (double v : tape.value(out.c).data) CHECK(v == Catch::Approx(0.0).margin(1e-15));
  for (double v : tape.value(out.h).data) CHECK(v == Catch::Approx(0.0).margin(1e-15));

  // nonzero c_prev is retained through sigmoid(+1) = 0.731
  auto ones = tape.leaf(Tensor<double>::vector_of({1, 1, 1, 1}));
  auto out2 = lstm_cell(tape, vars, x, HcVars<double>{zeros, ones});
  const double keep = 1.0 / (1.0 + std::exp(-1.0));
  for (double v : tape.value(out2.c).data) {
    CHECK(v == Catch::Approx(keep).epsilon(1e-12));
    CHECK(v > 0.73);
  }
}

TEST_CASE("true zero weights give a zero-output lstm cell") {
  ParamStore<double> params;
  LstmCellParams<double> cell;
  cell.hidden = 4;
  cell.W = &params.add("W", {16, 3});
  cell.U = &params.add("U", {16, 4});
  cell.b = &params.add("b", {16});
  Tape<double> tape(false);
  auto vars = bind_lstm_cell(tape, cell);
  auto x = tape.leaf(Tensor<double>::zeros({3}));
  auto zeros = tape.leaf(Tensor<double>::zeros({4}));
  auto out = lstm_cell(tape, vars, x, {zeros, zeros});
  for (double v : tape.value(out.h).data) CHECK(v == 0.0);
  for (double v : tape.value(out.c).data) CHECK(v == 0.0);
}

TEST_CASE("lstm cell gradients match finite differences") {
  RngState rng(5);
  ParamStore<double> params;
  auto cell = add_lstm_cell(params, "cell", 3, 4, rng);
  Param<double>& x = params.add("x", {3});
  Param<double>& h0 = params.add("h0", {4});
  Param<double>& c0 = params.add("c0", {4});
  Param<double>& readout = params.add("readout", {1, 8});
  x.value = random_tensor({3}, rng);
  h0.value = random_tensor({4}, rng);
  c0.value = random_tensor({4}, rng);
  readout.value = random_tensor({1, 8}, rng);

  double worst = worst_fd_error(params, [&](Tape<double>& tape) {
    auto vars = bind_lstm_cell(tape, cell);
    auto xv = tape.leaf_ref(&x.value, &x.grad);
    HcVars<double> state{tape.leaf_ref(&h0.value, &h0.grad), tape.leaf_ref(&c0.value, &c0.grad)};
    auto out = lstm_cell(tape, vars, xv, state);
    auto both = tape.concat2(out.h, out.c);
    return tape.matvec(tape.leaf_ref(&readout.value, &readout.grad), both);
  });
  CHECK(worst < 1e-4);
}

TEST_CASE("bilstm output width is twice the hidden size") {
  RngState rng(6);
  for (int hidden : {8, 1024}) {
    ParamStore<double> params;
    auto stack = add_bilstm(params, "enc", 4, hidden, hidden == 8 ? 2 : 1, rng);
    Tape<double> tape(false);
    auto vars = bind_bilstm(tape, stack);
    std::vector<Tape<double>::Var> inputs;
    for (int t = 0; t < 3; ++t) inputs.push_back(tape.leaf(random_tensor({4}, rng)));
    RngState drop(0);
    auto out = bilstm_forward(tape, vars, inputs, 0.0, drop, false);
    REQUIRE(out.size() == 3);
    CHECK(tape.value(out[0]).size() == static_cast<std::size_t>(2 * hidden));
  }
}

TEST_CASE("zero dropout makes train and eval passes identical") {
  RngState rng(7);
  ParamStore<double> params;
  auto stack = add_bilstm(params, "enc", 4, 6, 2, rng);
  std::vector<Tensor<double>> inputs;
  for (int t = 0; t < 5; ++t) inputs.push_back(random_tensor({4}, rng));

  auto run = [&](bool train) {
    Tape<double> tape(false);
    auto vars = bind_bilstm(tape, stack);
    std::vector<Tape<double>::Var> in;
    for (const auto& t : inputs) in.push_back(tape.leaf(t));
    RngState drop(99);
    auto out = bilstm_forward(tape, vars, in, 0.0, drop, train);
    std::vector<Tensor<double>> values;
    for (auto v : out) values.push_back(tape.value(v));
    return values;
  };
  auto at_train = run(true);
  auto at_eval = run(false);
  for (std::size_t t = 0; t < at_train.size(); ++t) {
    CHECK(at_train[t].data == at_eval[t].data);
  }
}

TEST_CASE("reversing the input swaps forward and backward halves (tied weights)") {
  RngState rng(8);
  ParamStore<double> params;
  auto stack = add_bilstm(params, "enc", 4, 6, 2, rng);
  // tie: backward weights := forward weights
  for (int l = 0; l < 2; ++l) {
    stack.bwd.layers[l].W->value = stack.fwd.layers[l].W->value;
    stack.bwd.layers[l].U->value = stack.fwd.layers[l].U->value;
    stack.bwd.layers[l].b->value = stack.fwd.layers[l].b->value;
  }
  std::vector<Tensor<double>> inputs;
  for (int t = 0; t < 5; ++t) inputs.push_back(random_tensor({4}, rng));

  auto run = [&](bool reversed) {
    Tape<double> tape(false);
    auto vars = bind_bilstm(tape, stack);
    std::vector<Tape<double>::Var> in;
    if (reversed) {
      for (auto it = inputs.rbegin(); it != inputs.rend(); ++it) in.push_back(tape.leaf(*it));
    } else {
      for (const auto& t : inputs) in.push_back(tape.leaf(t));
    }
    RngState drop(0);
    auto out = bilstm_forward(tape, vars, in, 0.0, drop, false);
    std::vector<Tensor<double>> values;
    for (auto v : out) values.push_back(tape.value(v));
    return values;
  };
  auto straight = run(false);
  auto reversed = run(true);
  const int H = 6;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto& a = straight[t];
    const auto& b = reversed[inputs.size() - 1 - t];
    for (int i = 0; i < H; ++i) {
      CHECK(a[i] == b[H + i]);      // forward half == reversed backward half
      CHECK(a[H + i] == b[i]);
    }
  }
}

TEST_CASE("mlp with zero weights gives the uniform distribution") {
  ParamStore<double> params;
  MlpParams<double> mlp;
  mlp.W0 = &params.add("l0.W", {6, 4});
  mlp.b0 = &params.add("l0.b", {6});
  mlp.W1 = &params.add("l1.W", {6, 6});
  mlp.b1 = &params.add("l1.b", {6});
  mlp.Wout = &params.add("out.W", {5, 6});
  mlp.bout = &params.add("out.b", {5});
  Tape<double> tape(false);
  auto vars = bind_mlp(tape, mlp);
  RngState rng(0);
  auto logits = mlp_forward(tape, vars, tape.leaf(Tensor<double>::vector_of({1, 2, 3, 4})), 0.0,
                            rng, false);
  auto probs = softmax_values(tape.value(logits));
  for (double p : probs.data) CHECK(p == Catch::Approx(0.2));
}

TEST_CASE("mlp gradients match finite differences, dropout included") {
  RngState rng(9);
  ParamStore<double> params;
  auto mlp = add_mlp(params, "mlp", 4, 6, 5, rng);
  Param<double>& x = params.add("x", {4});
  x.value = random_tensor({4}, rng);
  double worst = worst_fd_error(params, [&](Tape<double>& tape) {
    auto vars = bind_mlp(tape, mlp);
    RngState drop(13);  // reseeded per evaluation: identical masks
    auto logits =
        mlp_forward(tape, vars, tape.leaf_ref(&x.value, &x.grad), 0.2, drop, true);
    return softmax_xent(tape, logits, 4);
  });
  CHECK(worst < 1e-4);
}

TEST_CASE("identical inputs give identical logits at eval") {
  RngState rng(10);
  ParamStore<double> params;
  auto mlp = add_mlp(params, "mlp", 4, 6, 5, rng);
  Tensor<double> input = random_tensor({4}, rng);
  auto run = [&]() {
    Tape<double> tape(false);
    auto vars = bind_mlp(tape, mlp);
    RngState drop(0);
    return tape.value(mlp_forward(tape, vars, tape.leaf(input), 0.2, drop, false));
  };
  CHECK(run().data == run().data);
}

TEST_CASE("adam first step moves by about lr under unit gradient") {
  ParamStore<double> params;
  Param<double>& w = params.add("w", {1});
  w.value[0] = 5.0;
  w.grad[0] = 1.0;
  AdamConfig cfg;
  cfg.lr = 1e-3;
  adam_step(params, cfg);
  CHECK(w.value[0] == Catch::Approx(5.0 - 1e-3).epsilon(1e-6));
  CHECK(w.grad[0] == 0.0);  // gradients zeroed afterward

  // zero gradient with zero moments: a fixed point
  ParamStore<double> fresh;
  Param<double>& u = fresh.add("u", {1});
  u.value[0] = 2.0;
  adam_step(fresh, cfg);
  CHECK(u.value[0] == 2.0);
}

TEST_CASE("adam drives a quadratic bowl to the minimum") {
  ParamStore<double> params;
  Param<double>& w = params.add("w", {1});
  w.value[0] = 1.0;
  AdamConfig cfg;
  cfg.lr = 1e-2;
  for (int step = 0; step < 500; ++step) {
    w.grad[0] = 2.0 * w.value[0];  // d/dw of w^2
    adam_step(params, cfg);
  }
  CHECK(std::abs(w.value[0]) < 1e-2);
}

TEST_CASE("fixed seed reproduces dropout masks bit-exactly") {
  Tensor<double> input = Tensor<double>::vector_of({1, 2, 3, 4, 5, 6, 7, 8});
  auto run = [&]() {
    Tape<double> tape(false);
    RngState rng(1234);
    return tape.value(tape.dropout(tape.leaf(input), 0.4, rng, true));
  };
  CHECK(run().data == run().data);
}

TEST_CASE("backward can only run once per tape and needs a scalar root") {
  Tape<double> tape(true);
  auto x = tape.leaf(Tensor<double>::vector_of({1, 2}));
  CHECK_THROWS_AS(tape.backward(x), ContractError);
}
