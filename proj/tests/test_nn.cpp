#include <cmath>
#include <functional>

#include "doctest.h"
#include "tadt/error.hpp"
#include "tadt/nn/adam.hpp"
#include "tadt/nn/checkpoint.hpp"
#include "tadt/nn/gradcheck.hpp"
#include "tadt/nn/layers.hpp"
#include "tadt/nn/param_vector.hpp"
#include "tadt/nn/tape.hpp"
#include "tadt/rng.hpp"

using namespace tadt;
using namespace tadt::nn;

namespace {

using Build = std::function<Var(Tape<double>&)>;

// Gradchecks every parameter in `set` for the scalar produced by `build`.
GradcheckReport check_set(ParameterSet<double>& set, const Build& build, double tol = 1e-6) {
  const auto params = set.all();
  set.zero_grad();
  {
    Tape<double> tape;
    tape.backward(build(tape));
  }
  const auto x = flatten_values<double>(params);
  const auto analytic = flatten_grads<double>(params);
  auto loss = [&](std::span<const double> v) {
    assign_values<double>(params, v);
    Tape<double> tape;
    return tape.scalar(build(tape));
  };
  auto report = gradcheck(loss, x, analytic, tol);
  assign_values<double>(params, x);
  return report;
}

Tensor<double> random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  return init_tensor<double>(r, c, Init::Normal, scale, rng);
}

// Fixed random projection to a scalar so every output element matters.
Var project(Tape<double>& tape, Var y, std::uint64_t seed = 99) {
  Rng rng(seed);
  const auto& v = tape.value(y);
  return tape.sum(tape.mul(y, tape.constant(random_tensor(v.rows, v.cols, rng))));
}

}  // namespace

TEST_CASE("gradcheck on sum of squares") {
  auto f = [](std::span<const double> x) { return x[0] * x[0]; };
  const std::vector<double> x{3.0}, g{6.0};
  const auto r = gradcheck(f, x, g, 1e-9, 1e-4);
  CHECK(r.passed);
  CHECK(r.max_rel_error <= 1e-9);
}

TEST_CASE("elementwise and matrix ops pass gradcheck") {
  Rng rng(1);
  ParameterSet<double> set;
  auto& a = set.add("a", random_tensor(3, 4, rng));
  auto& b = set.add("b", random_tensor(4, 2, rng));
  auto& c = set.add("c", random_tensor(3, 4, rng));
  auto& row = set.add("row", random_tensor(1, 4, rng));
  auto& pos = set.add("pos", init_tensor<double>(3, 4, Init::Uniform, 1.0, rng));
  for (auto& x : pos.value.data) x = std::abs(x) + 0.2;

  const std::vector<std::pair<const char*, Build>> cases = {
      {"matmul", [&](Tape<double>& t) { return project(t, t.matmul(t.parameter(a), t.parameter(b))); }},
      {"matmul_nt", [&](Tape<double>& t) { return project(t, t.matmul_nt(t.parameter(a), t.parameter(c))); }},
      {"add/sub/mul",
       [&](Tape<double>& t) {
         auto x = t.add(t.parameter(a), t.parameter(c));
         return project(t, t.mul(t.sub(x, t.parameter(c)), t.parameter(c)));
       }},
      {"add_row", [&](Tape<double>& t) { return project(t, t.add_row(t.parameter(a), t.parameter(row))); }},
      {"scale_rows",
       [&](Tape<double>& t) {
         const std::vector<double> f{0.5, -2.0, 3.0};
         return project(t, t.add_constant(t.scale(t.scale_rows(t.parameter(a), f), 1.7), 0.3));
       }},
      {"relu", [&](Tape<double>& t) { return project(t, t.relu(t.parameter(a))); }},
      {"square", [&](Tape<double>& t) { return project(t, t.square(t.parameter(a))); }},
      {"log_clamped", [&](Tape<double>& t) { return project(t, t.log_clamped(t.parameter(pos), 1e-20)); }},
      {"log_sigmoid", [&](Tape<double>& t) { return project(t, t.log_sigmoid(t.parameter(a))); }},
      {"layer_norm",
       [&](Tape<double>& t) { return project(t, t.layer_norm(t.parameter(a), t.parameter(row), t.parameter(row))); }},
      {"softmax_rows", [&](Tape<double>& t) { return project(t, t.softmax_rows(t.parameter(a))); }},
      {"log_softmax_rows", [&](Tape<double>& t) { return project(t, t.log_softmax_rows(t.parameter(a))); }},
      {"gather_rows",
       [&](Tape<double>& t) {
         const std::vector<int> ids{2, 0, 2, 1};
         return project(t, t.gather_rows(t.parameter(a), ids));
       }},
      {"concat/slice/reshape",
       [&](Tape<double>& t) {
         auto x = t.concat_cols({t.parameter(a), t.parameter(c)});
         auto y = t.concat_rows({t.slice_cols(x, 2, 4), t.parameter(a)});
         return project(t, t.reshape(y, 3, 8));
       }},
      {"pick/row_sum/mean_rows/mean",
       [&](Tape<double>& t) {
         const std::vector<int> cols{1, 3, 0};
         auto p = t.pick(t.parameter(a), cols);
         auto s = t.row_sum(t.parameter(c));
         return t.add(t.mean(t.mul(p, s)), project(t, t.mean_rows(t.parameter(a))));
       }},
  };
  for (const auto& [name, build] : cases) {
    const std::string label = name;
    CAPTURE(label);
    const auto r = check_set(set, build);
    CHECK(r.max_rel_error <= 1e-6);
  }
}

TEST_CASE("straight-through passes the soft gradient") {
  Rng rng(4);
  ParameterSet<double> set;
  auto& logits = set.add("logits", random_tensor(2, 3, rng));
  Tape<double> tape;
  auto soft = tape.softmax_rows(tape.parameter(logits));
  Tensor<double> hard(2, 3);
  hard(0, 1) = 1;
  hard(1, 2) = 1;
  auto st = tape.straight_through(soft, hard);
  CHECK(tape.value(st) == hard);
  auto loss = project(tape, st);
  tape.backward(loss);
  const auto st_grad = logits.grad;
  logits.zero_grad();
  Tape<double> ref;
  ref.backward(project(ref, ref.softmax_rows(ref.parameter(logits))));
  for (std::size_t i = 0; i < st_grad.size(); ++i) CHECK(st_grad.data[i] == doctest::Approx(logits.grad.data[i]));
}

TEST_CASE("attention block gradients and causality") {
  Rng rng(5);
  ParameterSet<double> set;
  CausalSelfAttentionBlock<double> block(set, "blk", 8, 2, rng);
  auto& x = set.add("x", random_tensor(7, 8, rng));
  const std::vector<Segment> segs{{0, 4}, {4, 3}};
  const auto r = check_set(set, [&](Tape<double>& t) { return project(t, block.forward(t, t.parameter(x), segs)); });
  CHECK(r.max_rel_error <= 1e-6);

  auto run = [&](const Tensor<double>& input, std::vector<Tensor<double>>* w = nullptr) {
    Tape<double> t;
    return t.value(block.forward(t, t.constant(input), segs, w));
  };
  const auto base_in = x.value;
  std::vector<Tensor<double>> weights;
  const auto base = run(base_in, &weights);
  for (const auto& w : weights)
    for (std::size_t i = 0; i < w.rows; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < w.cols; ++j) {
        s += w(i, j);
        if (j > i) CHECK(w(i, j) == 0.0);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  // Perturb row 2 of the first segment: rows 0,1 and the whole second segment stay fixed.
  auto pert = base_in;
  for (std::size_t c = 0; c < 8; ++c) pert(2, c) += 3.0;
  const auto out = run(pert);
  for (std::size_t r2 : {0u, 1u, 4u, 5u, 6u})
    for (std::size_t c = 0; c < 8; ++c) CHECK(out(r2, c) == base(r2, c));
  bool changed = false;
  for (std::size_t c = 0; c < 8; ++c) changed |= out(2, c) != base(2, c);
  CHECK(changed);
}

TEST_CASE("single-token attention returns the value projection") {
  Tape<double> t;
  Tensor<double> q(1, 2, std::vector<double>{0.3, -1.0});
  Tensor<double> k(1, 2, std::vector<double>{2.0, 0.5});
  Tensor<double> v(1, 2, std::vector<double>{4.0, 5.0});
  const std::vector<Segment> seg{{0, 1}};
  CHECK(t.value(t.causal_attention(t.constant(q), t.constant(k), t.constant(v), seg, 0.7)) == v);
}

TEST_CASE("dense, mlp and embedding") {
  Rng rng(2);
  ParameterSet<double> set;
  Dense<double> dense(set, "d", 3, 3, rng);
  auto& w = dense.weight();
  w.value.fill(0);
  for (int i = 0; i < 3; ++i) w.value(i, i) = 1;
  Tensor<double> in(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  {
    Tape<double> t;
    CHECK(t.value(dense.forward(t, t.constant(in))) == in);
    try {
      dense.forward(t, t.constant(Tensor<double>(1, 2)));
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Shape);
      CHECK(std::string(e.what()).find("[1x2]") != std::string::npos);
    }
  }

  ParameterSet<double> mset;
  const std::size_t widths[] = {3, 5, 4, 2};
  ReluMlp<double> mlp(mset, "mlp", widths, rng);
  auto& inp = mset.add("in", random_tensor(4, 3, rng));
  CHECK(check_set(mset, [&](Tape<double>& t) { return project(t, mlp.forward(t, t.parameter(inp))); }).max_rel_error <=
        1e-6);

  ParameterSet<double> eset;
  Embedding<double> emb(eset, "emb", 5, 3, rng);
  Tape<double> t;
  const std::vector<int> ids{3};
  auto row = emb.lookup(t, ids);
  for (std::size_t c = 0; c < 3; ++c) CHECK(t.value(row)(0, c) == emb.parameter().value(3, c));
  t.backward(t.sum(row));
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(emb.parameter().grad(r, c) == (r == 3 ? 1.0 : 0.0));
}

TEST_CASE("adam") {
  Parameter<double> p("p", Tensor<double>(1, 3, std::vector<double>{1, 2, 3}));
  std::vector<Parameter<double>*> ps{&p};
  AdamState<double> st;
  adam_step<double>(ps, st);
  CHECK(p.value.data == std::vector<double>{1, 2, 3});

  p.grad.data = {0.5, -2.0, 1e-3};
  AdamState<double> s1;
  const auto before = p.value.data;
  adam_step<double>(ps, s1);
  for (std::size_t i = 0; i < 3; ++i) {
    const double g = p.grad.data[i];
    CHECK(p.value.data[i] - before[i] == doctest::Approx(-s1.lr * g / (std::abs(g) + s1.eps)).epsilon(1e-9));
  }

  Parameter<double> q1("q", Tensor<double>(2, 2, 0.5)), q2("q", Tensor<double>(2, 2, 0.5));
  q1.grad.fill(0.3);
  q2.grad.fill(0.3);
  AdamState<double> a1, a2;
  std::vector<Parameter<double>*> l1{&q1}, l2{&q2};
  adam_step<double>(l1, a1);
  adam_step<double>(l2, a2);
  CHECK(q1.value == q2.value);

  p.grad.data[1] = std::nan("");
  const auto frozen = p.value;
  try {
    adam_step<double>(ps, s1);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
  }
  CHECK(p.value == frozen);
  CHECK(s1.step == 1);

  p.grad.data = {3, 4, 0};
  CHECK(clip_grad_norm<double>(ps, 1.0) == doctest::Approx(5.0));
  CHECK(global_grad_norm<double>(ps) == doctest::Approx(1.0));
}

TEST_CASE("gumbel samples") {
  const auto a = gumbel_sample(3, 4, 17);
  const auto b = gumbel_sample(3, 4, 17);
  const auto c = gumbel_sample(3, 4, 18);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  const auto big = gumbel_sample(1, 200000, 3);
  double mean = 0;
  for (double g : big.data) mean += g;
  mean /= big.size();
  CHECK(mean == doctest::Approx(0.5772156649).epsilon(0.02));  // Euler-Mascheroni
}

TEST_CASE("checkpoint encoding") {
  CheckpointData d;
  d.metadata["note"] = "x";
  d.tensors.push_back({"b", {2, 2}, {1.5f, -2.0f, 3.25f, 0.0f}});
  d.tensors.push_back({"a", {1, 3}, {7.0f, 8.0f, 9.0f}});
  const auto bytes = encode_checkpoint(d);
  CHECK(bytes.substr(0, 4) == "TADT");
  const auto back = decode_checkpoint(bytes);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0].name == "b");  // header order preserved
  CHECK(back.tensors[0].data == d.tensors[0].data);
  CHECK(back.tensors[1].shape == d.tensors[1].shape);
  CHECK(back.metadata["note"] == "x");
  CHECK(encode_checkpoint(back) == bytes);

  auto expect_corrupt = [](const std::string& b) {
    try {
      decode_checkpoint(b);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Checkpoint);
    }
  };
  expect_corrupt(bytes.substr(0, bytes.size() - 3));
  expect_corrupt(bytes + "abcd");
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_corrupt(bad_magic);
  auto bad_version = bytes;
  bad_version[4] = 2;
  expect_corrupt(bad_version);
  expect_corrupt(bytes.substr(0, 20));
}
