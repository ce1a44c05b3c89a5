#include "tadt/model_gradcheck.hpp"

#include "tadt/error.hpp"
#include "tadt/nn/param_vector.hpp"

namespace tadt {

TrainConfig gradcheck_config(std::uint64_t seed) {
  TrainConfig c;
  c.hidden_dim = 8;
  c.codebook_size = 4;
  c.T_max = 2;
  c.n_layers = 1;
  c.n_heads = 2;
  c.k_neg = 2;
  c.hard_assign = false;
  c.ctp_stop_grad = false;  // a detached path is invisible to finite differences
  c.seed = seed;
  return c;
}

ModelMeta gradcheck_meta() {
  ModelMeta meta;
  meta.d_s = 3;
  meta.m = 3;
  meta.gamma = 0.9;
  meta.return_mean = {0.6, -0.1};
  meta.return_std = {0.5, 0.3};
  meta.rtg_max = 2.0;
  return meta;
}

std::vector<Window> random_windows(const ModelMeta& meta, std::size_t count, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Window> out;
  for (std::size_t k = 0; k < count; ++k) {
    Trajectory t;
    t.user_id = "g" + std::to_string(k);
    for (std::size_t i = 0; i < length; ++i) {
      std::vector<double> s(static_cast<std::size_t>(meta.d_s));
      for (auto& x : s) x = rng.normal();
      t.states.push_back(std::move(s));
      t.actions.push_back(rng.index(meta.m));
      t.rewards.push_back(rng.uniform());
    }
    attach_return_signals(t, meta.gamma);
    const std::vector<Trajectory> one{t};
    auto w = make_windows(one, static_cast<int>(length));
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

namespace {

nn::Var pick_loss(const ForwardResult& r, const std::string& name) {
  if (name == "action") return r.action;
  if (name == "rank") return r.rank;
  if (name == "return") return r.ret;
  if (name == "reward") return r.reward;
  if (name == "transition") return r.transition;
  if (name == "reg") return r.reg;
  return r.total;
}

template <typename Real>
std::vector<double> analytic_gradient(TadtCsaModel<Real>& model, const std::vector<Window>& windows,
                                      const ForwardOptions& opts, const std::string& name) {
  auto params = model.parameter_list();
  model.parameters().zero_grad();
  nn::Tape<Real> tape;
  const auto res = model.forward(tape, windows, opts);
  const nn::Var loss = pick_loss(res, name);
  require(loss.valid(), ErrorKind::Evaluation, "loss component '" + name + "' was not built");
  tape.backward(loss);
  return nn::flatten_grads<Real>(params);
}

}  // namespace

ModelGradcheck gradcheck_model(const TrainConfig& config, const ModelMeta& meta, const std::vector<Window>& windows,
                               bool single_precision, double tolerance, double step) {
  ForwardOptions opts;
  opts.training = true;
  opts.tau = 1.0;
  opts.noise_seed = derive_seed(config.seed, 0x4743ULL);

  TadtCsaModel<double> reference(config, meta);
  std::unique_ptr<TadtCsaModel<float>> single;
  auto ref_params = reference.parameter_list();
  if (single_precision) {
    single = std::make_unique<TadtCsaModel<float>>(config, meta);
    // Make both models hold exactly the float values.
    const auto flat = nn::flatten_values<float>(single->parameter_list());
    nn::assign_values<double>(ref_params, flat);
  }
  const auto x = nn::flatten_values<double>(ref_params);

  ModelGradcheck out;
  out.precision = single_precision ? "single" : "double";
  out.tolerance = tolerance;
  out.passed = true;
  std::vector<std::string> built;
  {
    nn::Tape<double> tape;
    const auto res = reference.forward(tape, windows, opts);
    for (const std::string name : {"action", "rank", "return", "reward", "transition", "reg", "total"})
      if (pick_loss(res, name).valid()) built.push_back(name);
  }
  for (const auto& name : built) {
    const auto analytic = single_precision ? analytic_gradient(*single, windows, opts, name)
                                           : analytic_gradient(reference, windows, opts, name);
    auto loss = [&](std::span<const double> v) {
      nn::assign_values<double>(ref_params, v);
      nn::Tape<double> tape;
      const auto res = reference.forward(tape, windows, opts);
      return tape.scalar(pick_loss(res, name));
    };
    const auto report = nn::gradcheck(loss, x, analytic, tolerance, step);
    nn::assign_values<double>(ref_params, x);
    out.passed = out.passed && report.passed;
    out.losses.push_back({name, report});
  }
  return out;
}

}  // namespace tadt
