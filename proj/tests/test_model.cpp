#include <cmath>
#include <functional>

#include "doctest.h"
#include "tadt/error.hpp"
#include "tadt/model.hpp"
#include "tadt/model_gradcheck.hpp"

using namespace tadt;

namespace {

ErrorKind thrown_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Parameter;
}

TrainConfig small_config() {
  TrainConfig c = gradcheck_config(4);
  c.T_max = 6;
  c.hard_assign = true;
  return c;
}

}  // namespace

TEST_CASE("causality: heads ignore tokens after their context end") {
  const auto meta = gradcheck_meta();
  for (const bool no_csa : {false, true}) {
    auto config = small_config();
    config.no_csa = no_csa;
    if (no_csa) config.rank_loss = false;
    const TadtCsaModel<double> model(config, meta);
    const auto base = random_windows(meta, 1, 6, 17);
    const auto ref = model.infer(base);
    Rng rng(5);
    for (std::size_t t = 0; t < 6; ++t) {
      auto w = base;
      // action head at t sees R_<=t, s_<=t, a_<t; mutate a_t and everything later
      w[0].actions[t] = (w[0].actions[t] + 1) % meta.m;
      for (std::size_t k = t + 1; k < 6; ++k) {
        for (auto& x : w[0].states[k]) x = rng.normal();
        w[0].signals[k] = {rng.normal(), rng.normal()};
        w[0].actions[k] = rng.index(meta.m);
      }
      const auto out = model.infer(w);
      for (std::size_t j = 0; j < static_cast<std::size_t>(meta.m); ++j)
        CHECK(out.action_logits(t, j) == ref.action_logits(t, j));

      // return head at t sees tokens up to a_{t-1}; mutate R_t and s_t as well
      auto v = w;
      for (auto& x : v[0].states[t]) x = rng.normal();
      v[0].signals[t] = {rng.normal(), rng.normal()};
      const auto out2 = model.infer(v);
      CHECK(out2.return_pred(t, 0) == ref.return_pred(t, 0));
      CHECK(out2.return_pred(t, 1) == ref.return_pred(t, 1));
    }
  }
}

TEST_CASE("loss components recombine and match direct oracles") {
  const auto meta = gradcheck_meta();
  auto config = small_config();
  const TadtCsaModel<double> model(config, meta);
  const auto windows = random_windows(meta, 5, 4, 2);
  ForwardOptions opts;
  opts.training = false;
  opts.noise_seed = 3;
  const auto l = model.evaluate_losses(windows, opts);
  CHECK(l.total == doctest::Approx(l.action + l.rank + l.ret + l.reward + l.transition + l.reg).epsilon(1e-9));

  const auto inf = model.infer(windows);
  double nll = 0, mse = 0;
  std::size_t row = 0;
  for (const auto& w : windows)
    for (std::size_t t = 0; t < w.length(); ++t, ++row) {
      double mx = -1e300;
      for (int a = 0; a < meta.m; ++a) mx = std::max(mx, inf.action_logits(row, a));
      double z = 0;
      for (int a = 0; a < meta.m; ++a) z += std::exp(inf.action_logits(row, a) - mx);
      nll += -(inf.action_logits(row, w.actions[t]) - mx - std::log(z));
      const double target[2] = {w.signals[t].rtg, w.signals[t].ta};
      for (int c = 0; c < 2; ++c) {
        const double d = model.standardize(inf.return_pred(row, c), c) - model.standardize(target[c], c);
        mse += d * d;
      }
    }
  CHECK(l.action == doctest::Approx(nll / row).epsilon(1e-6));
  CHECK(l.ret == doctest::Approx(mse / (2.0 * row)).epsilon(1e-6));

  auto bare = config;
  bare.lambda1 = bare.lambda2 = bare.lambda3 = bare.lambda4 = bare.lambda5 = 0;
  bare.rank_loss = false;
  const TadtCsaModel<double> bare_model(bare, meta);
  const auto lb = bare_model.evaluate_losses(windows, opts);
  CHECK(lb.total == lb.action);
}

TEST_CASE("input contract errors") {
  const auto meta = gradcheck_meta();
  const TadtCsaModel<double> model(small_config(), meta);
  auto long_window = random_windows(meta, 1, 7, 1);
  CHECK(thrown_kind([&] { model.infer(long_window); }) == ErrorKind::Context);
  auto w = random_windows(meta, 1, 3, 1);
  w[0].actions[1] = meta.m;
  CHECK(thrown_kind([&] { model.infer(w); }) == ErrorKind::Label);
  w = random_windows(meta, 1, 3, 1);
  w[0].states[2].push_back(0.0);
  CHECK(thrown_kind([&] { model.infer(w); }) == ErrorKind::Shape);
}

TEST_CASE("quantizer outputs in eval and train modes") {
  const auto meta = gradcheck_meta();
  const TadtCsaModel<double> model(small_config(), meta);
  const auto windows = random_windows(meta, 3, 5, 8);
  const auto inf = model.infer(windows);
  for (std::size_t r = 0; r < inf.assign_probs.rows; ++r) {
    double s = 0;
    int best = 0;
    for (std::size_t c = 0; c < inf.assign_probs.cols; ++c) {
      s += inf.assign_probs(r, c);
      if (inf.assign_probs(r, c) > inf.assign_probs(r, best)) best = static_cast<int>(c);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(inf.codes[r] == best);
  }
  auto nc = small_config();
  nc.no_csa = true;
  nc.rank_loss = false;
  const TadtCsaModel<double> plain(nc, meta);
  CHECK(plain.infer(windows).codes.front() == -1);
  CHECK(thrown_kind([&] { plain.code_probs(windows[0].states); }) == ErrorKind::Unsupported);
}

TEST_CASE("checkpoint round trip reproduces inference exactly") {
  const auto meta = gradcheck_meta();
  const TadtCsaModel<float> model(small_config(), meta);
  const auto bytes = nn::encode_checkpoint(model.to_checkpoint());
  const auto data = nn::decode_checkpoint(bytes);
  TadtCsaModel<float> copy(checkpoint_config(data), checkpoint_meta(data));
  copy.load_checkpoint(data);
  const auto windows = random_windows(meta, 2, 4, 3);
  CHECK(copy.infer(windows).action_logits.data == model.infer(windows).action_logits.data);
  CHECK(checkpoint_meta(data).return_std[1] == meta.return_std[1]);
}

TEST_CASE("model gradients match finite differences") {
  const auto meta = gradcheck_meta();
  const auto windows = random_windows(meta, 4, 2, 5);
  const auto d = gradcheck_model(gradcheck_config(1), meta, windows, false, 1e-6);
  for (const auto& l : d.losses) {
    CAPTURE(l.loss);
    CHECK(l.report.max_rel_error <= 1e-6);
  }
  CHECK(d.passed);
  auto nc = gradcheck_config(2);
  nc.no_csa = true;
  nc.rank_loss = false;
  CHECK(gradcheck_model(nc, meta, windows, false, 1e-6).passed);
}
