#include "tadt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tadt/csa.hpp"
#include "tadt/error.hpp"
#include "tadt/nn/gradcheck.hpp"

namespace tadt {

using nn::Tape;
using nn::Tensor;
using nn::Var;

std::vector<Window> make_windows(std::span<const Trajectory> trajectories, int T_max) {
  require(T_max >= 1, ErrorKind::Parameter, "T_max must be >= 1");
  std::vector<Window> out;
  for (const auto& traj : trajectories) {
    require(traj.annotated(), ErrorKind::Shape, "trajectory '" + traj.user_id + "' has no return annotations");
    for (std::size_t begin = 0; begin < traj.length(); begin += static_cast<std::size_t>(T_max)) {
      const std::size_t end = std::min(traj.length(), begin + static_cast<std::size_t>(T_max));
      Window w;
      w.states.assign(traj.states.begin() + begin, traj.states.begin() + end);
      w.actions.assign(traj.actions.begin() + begin, traj.actions.begin() + end);
      w.rewards.assign(traj.rewards.begin() + begin, traj.rewards.begin() + end);
      w.signals.assign(traj.signals.begin() + begin, traj.signals.begin() + end);
      w.starts_episode = begin == 0;
      out.push_back(std::move(w));
    }
  }
  return out;
}

ModelMeta model_meta_from(const Dataset& dataset) {
  ModelMeta meta;
  meta.d_s = dataset.meta.d_s;
  meta.m = dataset.meta.m;
  meta.gamma = dataset.meta.gamma;
  meta.return_mean = dataset.meta.return_mean;
  meta.return_std = dataset.meta.return_std;
  bool first = true;
  for (const auto& t : dataset.trajectories)
    for (const auto& s : t.signals) {
      meta.rtg_min = first ? s.rtg : std::min(meta.rtg_min, s.rtg);
      meta.rtg_max = first ? s.rtg : std::max(meta.rtg_max, s.rtg);
      first = false;
    }
  return meta;
}

template <typename Real>
TadtCsaModel<Real>::TadtCsaModel(const TrainConfig& config, const ModelMeta& meta) : config_(config), meta_(meta) {
  config_.validate();
  require(meta.d_s >= 1 && meta.m >= 1, ErrorKind::Parameter, "model needs d_s >= 1 and m >= 1");
  const auto d = static_cast<std::size_t>(config.hidden_dim);
  const auto M = static_cast<std::size_t>(config.codebook_size);
  const auto ds = static_cast<std::size_t>(meta.d_s);
  const auto m = static_cast<std::size_t>(meta.m);
  Rng rng(derive_seed(config.seed, 0x4D4F44454CULL));

  const std::size_t enc_w[] = {ds, d, d};
  state_encoder_ = nn::ReluMlp<Real>(params_, "csa.state_encoder", enc_w, rng);
  ta_embedder_ = nn::Dense<Real>(params_, "csa.ta_embedder", 1, d, rng);
  codebook_ = &params_.add("csa.codebook", nn::init_tensor<Real>(M, d, nn::Init::Normal, 1.0 / std::sqrt(double(d)), rng));
  rtg_embed_ = nn::Dense<Real>(params_, "dt.rtg_embed", 1, d, rng);
  ta_embed_ = nn::Dense<Real>(params_, "dt.ta_embed", 1, d, rng);
  const std::size_t ret_w[] = {2 * d, d, d};
  return_encoder_ = nn::ReluMlp<Real>(params_, "dt.return_encoder", ret_w, rng);
  item_emb_ = nn::Embedding<Real>(params_, "dt.item_embedding", m, d, rng, 1.0 / std::sqrt(double(d)));
  action_encoder_ = nn::Dense<Real>(params_, "dt.action_encoder", d, d, rng);
  pos_emb_ = nn::Embedding<Real>(params_, "dt.position", static_cast<std::size_t>(config.T_max), d, rng, 0.02);
  for (int l = 0; l < config.n_layers; ++l)
    blocks_.emplace_back(params_, "dt.block" + std::to_string(l), d, static_cast<std::size_t>(config.n_heads), rng);
  final_norm_ = nn::LayerNorm<Real>(params_, "dt.final_norm", d);
  action_head_ = nn::Dense<Real>(params_, "dt.action_head", d, d, rng);
  return_start_ = &params_.add("dt.return_start", nn::init_tensor<Real>(1, d, nn::Init::Normal, 0.02, rng));
  const std::size_t rh_w[] = {d, d, 2};
  return_head_ = nn::ReluMlp<Real>(params_, "dt.return_head", rh_w, rng);
  const std::size_t rp_w[] = {2 * d, d, 1};
  rp_net_ = nn::ReluMlp<Real>(params_, "csa.rp_net", rp_w, rng);
  const std::size_t ctp_w[] = {3 * d, d, 1};
  ctp_net_ = nn::ReluMlp<Real>(params_, "csa.ctp_net", ctp_w, rng);
}

template <typename Real>
double TadtCsaModel<Real>::standardize(double value, int component) const {
  return (value - meta_.return_mean[component]) / meta_.return_std[component];
}

template <typename Real>
double TadtCsaModel<Real>::destandardize(double value, int component) const {
  return value * meta_.return_std[component] + meta_.return_mean[component];
}

namespace {

template <typename Real>
Tensor<Real> one_hot(const std::vector<int>& ids, std::size_t width) {
  Tensor<Real> t(ids.size(), width);
  for (std::size_t i = 0; i < ids.size(); ++i) t(i, static_cast<std::size_t>(ids[i])) = Real(1);
  return t;
}

template <typename Real>
std::vector<int> row_argmax(const Tensor<Real>& t) {
  std::vector<int> out(t.rows);
  for (std::size_t r = 0; r < t.rows; ++r) {
    const auto row = t.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

template <typename Real>
Tensor<double> to_double(const Tensor<Real>& t) {
  return Tensor<double>(t.rows, t.cols, std::vector<double>(t.data.begin(), t.data.end()));
}

}  // namespace

template <typename Real>
ForwardResult TadtCsaModel<Real>::forward(Tape<Real>& tape, std::span<const Window> windows,
                                          const ForwardOptions& options) const {
  const auto M = static_cast<std::size_t>(config_.codebook_size);
  const auto m = static_cast<std::size_t>(meta_.m);
  const auto ds = static_cast<std::size_t>(meta_.d_s);
  const bool quantize = !config_.no_csa;
  const auto reduction = config_.reduction_enum();
  const bool sum = reduction == csa::Reduction::Sum;

  ForwardResult res;
  std::size_t N = 0;
  for (const auto& w : windows) {
    res.offsets.push_back(N);
    require(w.length() >= 1, ErrorKind::EmptyTrajectory, "empty window");
    require(w.length() <= static_cast<std::size_t>(config_.T_max), ErrorKind::Context,
            "context of " + std::to_string(w.length()) + " steps exceeds T_max=" + std::to_string(config_.T_max));
    require(w.states.size() == w.length() && w.rewards.size() == w.length() && w.signals.size() == w.length(),
            ErrorKind::Shape, "window fields have inconsistent lengths (missing return annotations?)");
    N += w.length();
  }
  require(N >= 1, ErrorKind::EmptyTrajectory, "empty batch");

  Tensor<Real> S(N, ds), rtg_std(N, 1), ta_std(N, 1), rewards(N, 1), targets(N, 2);
  std::vector<Real> ta_mask(N, Real(1));
  std::vector<int> actions(N), positions(N), code_rows(N), ret_rows(N);
  std::vector<nn::Segment> segments;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& w = windows[k];
    const std::size_t off = res.offsets[k];
    segments.push_back({3 * off, 3 * w.length()});
    for (std::size_t t = 0; t < w.length(); ++t) {
      const std::size_t i = off + t;
      require(w.states[t].size() == ds, ErrorKind::Shape,
              "state has " + std::to_string(w.states[t].size()) + " features, model expects " + std::to_string(ds));
      for (std::size_t c = 0; c < ds; ++c) S(i, c) = static_cast<Real>(w.states[t][c]);
      require(w.actions[t] >= 0 && static_cast<std::size_t>(w.actions[t]) < m, ErrorKind::Label,
              "action " + std::to_string(w.actions[t]) + " outside [0, " + std::to_string(m) + ")");
      actions[i] = w.actions[t];
      positions[i] = static_cast<int>(t);
      rewards(i, 0) = static_cast<Real>(w.rewards[t]);
      const double r_std = standardize(w.signals[t].rtg, 0);
      const double a_std = config_.no_ta ? 0.0 : standardize(w.signals[t].ta, 1);
      rtg_std(i, 0) = static_cast<Real>(r_std);
      ta_std(i, 0) = static_cast<Real>(a_std);
      targets(i, 0) = static_cast<Real>(r_std);
      targets(i, 1) = static_cast<Real>(a_std);
      if (config_.no_ta || (w.starts_episode && t == 0)) ta_mask[i] = Real(0);
      code_rows[i] = static_cast<int>(3 * i + 1);
      ret_rows[i] = t == 0 ? static_cast<int>(3 * N) : static_cast<int>(3 * (i - 1) + 2);
    }
  }

  const Var e = state_encoder_.forward(tape, tape.constant(std::move(S)));
  res.embeddings = e;
  const Var ta_in = tape.constant(ta_std);
  Var c = e;
  Var C;
  if (quantize) {
    C = tape.parameter(*codebook_);
    const Var ta_emb = tape.scale_rows(ta_embedder_.forward(tape, ta_in), ta_mask);
    const double alpha = config_.effective_alpha();
    const Var mix = alpha == 1.0 ? e
                                 : tape.add(tape.scale(e, static_cast<Real>(alpha)),
                                            tape.scale(ta_emb, static_cast<Real>(1.0 - alpha)));
    const Var sim = tape.matmul_nt(mix, C);
    res.assign_probs = tape.softmax_rows(sim);
    Var assign;
    if (options.training) {
      const auto g = nn::gumbel_sample(N, M, options.noise_seed);
      Tensor<Real> noise(N, M, std::vector<Real>(g.data.begin(), g.data.end()));
      const Var y = tape.scale(tape.add(tape.log_softmax_rows(sim), tape.constant(std::move(noise))),
                               static_cast<Real>(1.0 / options.tau));
      const Var soft = tape.softmax_rows(y);
      res.codes = row_argmax(tape.value(y));
      assign = config_.hard_assign ? tape.straight_through(soft, one_hot<Real>(res.codes, M)) : soft;
    } else {
      res.codes = row_argmax(tape.value(sim));
      assign = tape.constant(one_hot<Real>(res.codes, M));
    }
    res.assignment = assign;
    c = tape.matmul(assign, C);
  } else {
    res.codes.assign(N, -1);
  }

  const Var r_tok0 = return_encoder_.forward(
      tape, tape.concat_cols({rtg_embed_.forward(tape, tape.constant(rtg_std)), ta_embed_.forward(tape, ta_in)}));
  const Var items = item_emb_.table(tape);
  const Var a_emb = tape.gather_rows(items, actions);
  const Var pos = pos_emb_.lookup(tape, positions);
  const Var r_tok = tape.add(r_tok0, pos);
  const Var c_tok = tape.add(c, pos);
  const Var a_tok = tape.add(action_encoder_.forward(tape, a_emb), pos);

  std::vector<int> perm(3 * N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t k = 0; k < 3; ++k) perm[3 * i + k] = static_cast<int>(k * N + i);
  Var x = tape.gather_rows(tape.concat_rows({r_tok, c_tok, a_tok}), perm);
  for (const auto& block : blocks_) {
    std::vector<Tensor<Real>> weights;
    x = block.forward(tape, x, segments, options.attention != nullptr ? &weights : nullptr);
    for (const auto& w : weights) options.attention->push_back(to_double(w));
  }
  x = final_norm_.forward(tape, x);

  const Var a_hat = action_head_.forward(tape, tape.gather_rows(x, code_rows));
  res.action_logits = tape.matmul_nt(a_hat, items);
  const Var ret_in = tape.gather_rows(tape.concat_rows({x, tape.parameter(*return_start_)}), ret_rows);
  res.return_pred = return_head_.forward(tape, ret_in);

  if (!options.losses) return res;

  auto reduce = [&](Var v) { return sum ? tape.sum(v) : tape.mean(v); };
  auto weighted = [&](Var v, double w) { return w == 1.0 ? v : tape.scale(v, static_cast<Real>(w)); };

  res.action = tape.scale(reduce(tape.pick(tape.log_softmax_rows(res.action_logits), actions)), Real(-1));
  std::vector<Var> parts{res.action};

  if (config_.lambda2 > 0) {
    res.ret = weighted(csa::squared_error(tape, res.return_pred, tape.constant(targets), reduction), config_.lambda2);
    parts.push_back(res.ret);
  }
  if (const double l3 = config_.effective_lambda3(); l3 > 0) {
    const Var r_hat = rp_net_.forward(tape, tape.concat_cols({c, a_emb}));
    res.reward = weighted(csa::squared_error(tape, r_hat, tape.constant(rewards), reduction), l3);
    parts.push_back(res.reward);
  }
  if (const double l4 = config_.effective_lambda4(); l4 > 0) {
    const auto K = static_cast<std::size_t>(config_.k_neg);
    Rng rng(derive_seed(options.noise_seed, 0x435450ULL));
    std::vector<int> left, right;
    std::size_t P = 0;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      for (std::size_t t = 0; t + 1 < windows[k].length(); ++t) {
        const std::size_t i = res.offsets[k] + t;
        const auto negs = csa::sample_negatives(config_.codebook_size, res.codes[i], res.codes[i + 1], config_.k_neg, rng);
        for (std::size_t j = 0; j <= K; ++j) left.push_back(static_cast<int>(i));
        right.push_back(static_cast<int>(i + 1));
        for (int n : negs) right.push_back(static_cast<int>(N) + n);
        ++P;
      }
    }
    if (P > 0) {
      const Var lhs = tape.gather_rows(tape.concat_cols({c, a_emb}), left);
      Var rhs = tape.gather_rows(tape.concat_rows({c, C}), right);
      if (config_.ctp_stop_grad) rhs = tape.constant(tape.value(rhs));
      const Var z = tape.reshape(ctp_net_.forward(tape, tape.concat_cols({lhs, rhs})), P, K + 1);
      res.transition = weighted(csa::info_nce(tape, z, config_.ctp_denominator_enum(), reduction), l4);
      parts.push_back(res.transition);
    }
  }
  if (const double l5 = config_.effective_lambda5(); l5 > 0) {
    res.reg = weighted(csa::entropy_reg(tape, res.assign_probs, config_.reg_mode_enum(), reduction), l5);
    parts.push_back(res.reg);
  }
  if (const double l1 = config_.effective_lambda1(); l1 > 0) {
    std::vector<std::vector<ReturnSignal>> signals;
    if (config_.no_ta) {
      for (const auto& w : windows) {
        signals.push_back(w.signals);
        for (auto& s : signals.back()) s.ta = 0.0;
      }
    }
    std::vector<rank::SequenceView> views;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      const std::span<const int> codes(res.codes.data() + res.offsets[k], windows[k].length());
      views.push_back({codes, windows[k].actions, config_.no_ta ? std::span<const ReturnSignal>(signals[k])
                                                                : std::span<const ReturnSignal>(windows[k].signals)});
    }
    const auto groups = rank::build_groups(views, config_.bin_width);
    const auto pairs = rank::build_rank_pairs(groups, config_.beta, static_cast<std::size_t>(config_.rank_pair_cap),
                                              derive_seed(options.noise_seed, 0x52414E4BULL));
    res.rank_pairs = pairs.size();
    if (!pairs.empty()) {
      const Var own = tape.pick(res.action_logits, actions);
      const std::function<int(const rank::Member&)> row_of = [&offsets = res.offsets](const rank::Member& mb) {
        return static_cast<int>(offsets[mb.sample] + mb.t);
      };
      res.rank = weighted(rank::rank_loss(tape, own, pairs, row_of, config_.delta, sum), l1);
      parts.push_back(res.rank);
    }
  }

  res.total = parts.front();
  for (std::size_t k = 1; k < parts.size(); ++k) res.total = tape.add(res.total, parts[k]);
  auto val = [&](Var v) { return v.valid() ? static_cast<double>(tape.scalar(v)) : 0.0; };
  res.values = {val(res.total), val(res.action), val(res.rank), val(res.ret), val(res.reward), val(res.transition),
                val(res.reg)};
  return res;
}

template <typename Real>
LossBreakdown TadtCsaModel<Real>::evaluate_losses(std::span<const Window> windows, const ForwardOptions& options) const {
  Tape<Real> tape;
  return forward(tape, windows, options).values;
}

template <typename Real>
typename TadtCsaModel<Real>::Inference TadtCsaModel<Real>::infer(std::span<const Window> windows,
                                                                 bool capture_attention) const {
  Tape<Real> tape;
  Inference out;
  ForwardOptions opts;
  opts.training = false;
  opts.losses = false;
  if (capture_attention) opts.attention = &out.attention;
  const auto res = forward(tape, windows, opts);
  out.action_logits = to_double(tape.value(res.action_logits));
  out.return_pred = to_double(tape.value(res.return_pred));
  for (std::size_t r = 0; r < out.return_pred.rows; ++r)
    for (int k = 0; k < 2; ++k) out.return_pred(r, k) = destandardize(out.return_pred(r, k), k);
  if (res.assign_probs.valid()) out.assign_probs = to_double(tape.value(res.assign_probs));
  out.codes = res.codes;
  out.offsets = res.offsets;
  return out;
}

template <typename Real>
Tensor<double> TadtCsaModel<Real>::encode_states(const std::vector<std::vector<double>>& states) const {
  const auto ds = static_cast<std::size_t>(meta_.d_s);
  Tensor<Real> S(states.size(), ds);
  for (std::size_t i = 0; i < states.size(); ++i) {
    require(states[i].size() == ds, ErrorKind::Shape, "state dimension mismatch");
    for (std::size_t c = 0; c < ds; ++c) S(i, c) = static_cast<Real>(states[i][c]);
  }
  Tape<Real> tape;
  return to_double(tape.value(state_encoder_.forward(tape, tape.constant(std::move(S)))));
}

template <typename Real>
Tensor<double> TadtCsaModel<Real>::code_probs(const std::vector<std::vector<double>>& states) const {
  require(!config_.no_csa, ErrorKind::Unsupported, "model was trained without the quantizer");
  const auto e = encode_states(states);
  const auto C = codebook();
  const double alpha = config_.effective_alpha();
  Tensor<double> out(e.rows, C.rows);
  for (std::size_t i = 0; i < e.rows; ++i) {
    const std::vector<double> zero(e.cols, 0.0);
    std::vector<double> scaled(e.row(i).begin(), e.row(i).end());
    const auto p = csa::tac_svq_similarity(scaled, C, zero, alpha);
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

template <typename Real>
Tensor<double> TadtCsaModel<Real>::codebook() const {
  return to_double(codebook_->value);
}

template <typename Real>
Tensor<double> TadtCsaModel<Real>::reward_table() const {
  const auto M = static_cast<std::size_t>(config_.codebook_size);
  const auto m = static_cast<std::size_t>(meta_.m);
  std::vector<int> codes, acts;
  for (std::size_t c = 0; c < M; ++c)
    for (std::size_t a = 0; a < m; ++a) {
      codes.push_back(static_cast<int>(c));
      acts.push_back(static_cast<int>(a));
    }
  Tape<Real> tape;
  const Var in = tape.concat_cols({tape.gather_rows(tape.parameter(*codebook_), codes),
                                   tape.gather_rows(item_emb_.table(tape), acts)});
  const auto flat = to_double(tape.value(rp_net_.forward(tape, in)));
  return Tensor<double>(M, m, flat.data);
}

template <typename Real>
Tensor<double> TadtCsaModel<Real>::transition_logits() const {
  const auto M = static_cast<std::size_t>(config_.codebook_size);
  const auto m = static_cast<std::size_t>(meta_.m);
  std::vector<int> codes, acts, next;
  for (std::size_t c = 0; c < M; ++c)
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t j = 0; j < M; ++j) {
        codes.push_back(static_cast<int>(c));
        acts.push_back(static_cast<int>(a));
        next.push_back(static_cast<int>(j));
      }
  Tape<Real> tape;
  const Var C = tape.parameter(*codebook_);
  const Var in = tape.concat_cols(
      {tape.gather_rows(C, codes), tape.gather_rows(item_emb_.table(tape), acts), tape.gather_rows(C, next)});
  const auto flat = to_double(tape.value(ctp_net_.forward(tape, in)));
  return Tensor<double>(M * m, M, flat.data);
}

namespace {

nlohmann::ordered_json meta_json(const ModelMeta& meta) {
  nlohmann::ordered_json j;
  j["d_s"] = meta.d_s;
  j["m"] = meta.m;
  j["gamma"] = meta.gamma;
  j["return_mean"] = meta.return_mean;
  j["return_std"] = meta.return_std;
  j["rtg_min"] = meta.rtg_min;
  j["rtg_max"] = meta.rtg_max;
  return j;
}

template <typename Real>
nn::NamedTensor named(const std::string& name, const Tensor<Real>& t) {
  return {name, {t.rows, t.cols}, std::vector<float>(t.data.begin(), t.data.end())};
}

}  // namespace

template <typename Real>
nn::CheckpointData TadtCsaModel<Real>::to_checkpoint(const nn::AdamState<Real>* adam,
                                                     const nlohmann::ordered_json& extra) const {
  nn::CheckpointData data;
  data.metadata["format"] = "tadt-csa";
  data.metadata["config"] = config_.to_json();
  data.metadata["meta"] = meta_json(meta_);
  data.metadata["adam_step"] = adam != nullptr ? adam->step : 0;
  if (extra.is_object())
    for (const auto& [k, v] : extra.items()) data.metadata[k] = v;
  const auto params = params_.all();
  for (const auto* p : params) data.tensors.push_back(named(p->name, p->value));
  if (adam != nullptr && adam->m.size() == params.size()) {
    for (std::size_t k = 0; k < params.size(); ++k) data.tensors.push_back(named("adam.m." + params[k]->name, adam->m[k]));
    for (std::size_t k = 0; k < params.size(); ++k) data.tensors.push_back(named("adam.v." + params[k]->name, adam->v[k]));
  }
  data.tensors.push_back({"norm.return_mean", {2}, {float(meta_.return_mean[0]), float(meta_.return_mean[1])}});
  data.tensors.push_back({"norm.return_std", {2}, {float(meta_.return_std[0]), float(meta_.return_std[1])}});
  return data;
}

template <typename Real>
void TadtCsaModel<Real>::load_checkpoint(const nn::CheckpointData& data, nn::AdamState<Real>* adam) {
  auto load_into = [&](const std::string& name, Tensor<Real>& target) {
    const auto* t = data.find(name);
    require(t != nullptr, ErrorKind::Checkpoint, "checkpoint lacks tensor '" + name + "'");
    require(t->shape == std::vector<std::uint64_t>{target.rows, target.cols}, ErrorKind::Checkpoint,
            "tensor '" + name + "' has the wrong shape");
    std::copy(t->data.begin(), t->data.end(), target.data.begin());
  };
  const auto params = params_.all();
  for (auto* p : params) load_into(p->name, p->value);
  if (adam != nullptr && data.find("adam.m." + params.front()->name) != nullptr) {
    adam->m.clear();
    adam->v.clear();
    for (auto* p : params) {
      adam->m.emplace_back(p->value.rows, p->value.cols);
      adam->v.emplace_back(p->value.rows, p->value.cols);
      load_into("adam.m." + p->name, adam->m.back());
      load_into("adam.v." + p->name, adam->v.back());
    }
    adam->step = data.metadata.value("adam_step", 0);
  }
}

TrainConfig checkpoint_config(const nn::CheckpointData& data) {
  require(data.metadata.contains("config"), ErrorKind::Checkpoint, "checkpoint metadata lacks the config");
  return TrainConfig::from_json(nlohmann::json::parse(data.metadata["config"].dump()));
}

ModelMeta checkpoint_meta(const nn::CheckpointData& data) {
  require(data.metadata.contains("meta"), ErrorKind::Checkpoint, "checkpoint metadata lacks model meta");
  const auto& j = data.metadata["meta"];
  ModelMeta meta;
  meta.d_s = j.at("d_s").get<int>();
  meta.m = j.at("m").get<int>();
  meta.gamma = j.at("gamma").get<double>();
  meta.return_mean = j.at("return_mean").get<std::array<double, 2>>();
  meta.return_std = j.at("return_std").get<std::array<double, 2>>();
  meta.rtg_min = j.at("rtg_min").get<double>();
  meta.rtg_max = j.at("rtg_max").get<double>();
  return meta;
}

template class TadtCsaModel<float>;
template class TadtCsaModel<double>;

}  // namespace tadt
