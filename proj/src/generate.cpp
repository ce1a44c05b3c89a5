#include "tadt/generate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "tadt/error.hpp"

namespace tadt {

GenMode parse_gen_mode(const std::string& text) {
  if (text == "rtg_decrement") return GenMode::RtgDecrement;
  if (text == "model_predicted") return GenMode::ModelPredicted;
  fail(ErrorKind::Parameter, "generation mode must be rtg_decrement or model_predicted, got '" + text + "'");
}

GenerateOptions generate_options_from(const TrainConfig& config) {
  GenerateOptions o;
  o.mode = parse_gen_mode(config.gen_mode);
  o.target_return = config.target_return;
  o.greedy = config.decode == "greedy";
  o.clamp_rtg = config.clamp_rtg;
  o.seed = config.seed;
  o.reanchor_every = config.rtg_reanchor;
  return o;
}

template <typename Real>
ModelAgent<Real>::ModelAgent(const TadtCsaModel<Real>& model, GenerateOptions options)
    : model_(&model), options_(options), rng_(derive_seed(options.seed, 0x47454E00ULL)) {}

template <typename Real>
void ModelAgent<Real>::advance_returns(const env::History& history) {
  const auto& meta = model_->meta();
  const std::size_t t = history.actions.size();
  if (t == 0) {
    rtg_.clear();
    ta_.clear();
    steps_.clear();
    ++episode_;
    double target = options_.target_return >= 0 ? options_.target_return : meta.rtg_max;
    rtg_.push_back(target);
    ta_.push_back(0.0);
    return;
  }
  require(rtg_.size() == t, ErrorKind::Evaluation, "agent history out of sync with its episode state");
  if (options_.reanchor_every > 0 && t % static_cast<std::size_t>(options_.reanchor_every) == 0) {
    rtg_.push_back(options_.target_return >= 0 ? options_.target_return : meta.rtg_max);
    ta_.push_back(0.0);
    return;
  }
  double next = 0.0, next_ta = 0.0;
  if (options_.mode == GenMode::RtgDecrement) {
    const double r = history.rewards[t - 1];
    next = meta.gamma < 1.0 ? (rtg_.back() - r) / meta.gamma : rtg_.back() - r;
    if (options_.clamp_rtg) next = std::clamp(next, meta.rtg_min, meta.rtg_max);
    next_ta = meta.gamma * ta_.back() + (next - rtg_.back());
  } else {
    // Return head at step t reads the context up to a_{t-1}; the placeholder
    // step t only supplies a row to read it from.
    env::History probe = history;
    const auto inf = [&] {
      const std::size_t start = context_start(t);
      Window w;
      for (std::size_t k = start; k <= t; ++k) {
        w.states.push_back(history.observations[k]);
        w.actions.push_back(k < t ? history.actions[k] : 0);
        w.rewards.push_back(k < t ? history.rewards[k] : 0.0);
        w.signals.push_back(k < t ? ReturnSignal{rtg_[k], ta_[k]} : ReturnSignal{0.0, 0.0});
      }
      w.starts_episode = start == 0 || (options_.reanchor_every > 0 && start % options_.reanchor_every == 0);
      const std::vector<Window> one{w};
      return model_->infer(one);
    }();
    next = inf.return_pred(inf.return_pred.rows - 1, 0);
    next_ta = inf.return_pred(inf.return_pred.rows - 1, 1);
    if (options_.clamp_rtg) next = std::clamp(next, meta.rtg_min, meta.rtg_max);
  }
  rtg_.push_back(next);
  ta_.push_back(next_ta);
}

template <typename Real>
std::size_t ModelAgent<Real>::context_start(std::size_t t) const {
  const auto T_max = static_cast<std::size_t>(model_->config().T_max);
  std::size_t start = t + 1 - std::min(t + 1, T_max);
  if (options_.reanchor_every > 0) {
    const auto block = static_cast<std::size_t>(options_.reanchor_every);
    start = std::max(start, t - t % block);
  }
  return start;
}

template <typename Real>
int ModelAgent<Real>::act(const env::History& history) {
  const std::size_t t = history.actions.size();
  advance_returns(history);
  const std::size_t start = context_start(t);
  Window w;
  for (std::size_t k = start; k <= t; ++k) {
    w.states.push_back(history.observations[k]);
    w.actions.push_back(k < t ? history.actions[k] : 0);  // a_t is never visible to its own head
    w.rewards.push_back(k < t ? history.rewards[k] : 0.0);
    w.signals.push_back({rtg_[k], ta_[k]});
  }
  w.starts_episode = start == 0 || (options_.reanchor_every > 0 && start % options_.reanchor_every == 0);
  const std::vector<Window> one{w};
  const auto inf = model_->infer(one);
  const auto logits = inf.action_logits.row(inf.action_logits.rows - 1);
  int action = 0;
  if (options_.greedy) {
    action = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  } else {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logits[i] - mx);
    std::discrete_distribution<int> dist(p.begin(), p.end());
    action = dist(rng_.engine());
  }
  steps_.push_back({static_cast<int>(t), action, rtg_[t], ta_[t]});
  return action;
}

template <typename Real>
env::ActFn ModelAgent<Real>::as_act_fn() {
  return [this](const env::History& h) { return act(h); };
}

template <typename Real>
GeneratedEpisode generate_episode(const TadtCsaModel<Real>& model, const env::TabularMDP& mdp,
                                  const GenerateOptions& options, int horizon, std::uint64_t env_seed) {
  GeneratedEpisode ep;
  if (horizon == 0) return ep;
  ModelAgent<Real> agent(model, options);
  env::History last;
  env::ActFn fn = [&](const env::History& h) {
    last = h;
    return agent.act(h);
  };
  const auto returns = env::rollout_returns(mdp, fn, 1, horizon, env_seed);
  ep.steps = agent.steps();
  ep.states = last.states;
  ep.rewards = last.rewards;
  ep.total_reward = returns.front();
  return ep;
}

template <typename Real>
double model_rollout_return(const TadtCsaModel<Real>& model, const env::TabularMDP& mdp,
                            const GenerateOptions& options, int n_episodes, int horizon, std::uint64_t seed) {
  ModelAgent<Real> agent(model, options);
  return env::rollout_policy(mdp, agent.as_act_fn(), n_episodes, horizon, seed);
}

std::string generated_to_jsonl(const std::vector<GeneratedStep>& steps) {
  std::ostringstream out;
  for (const auto& s : steps) {
    nlohmann::ordered_json j;
    j["t"] = s.t;
    j["action"] = s.action;
    j["rtg"] = s.rtg;
    j["ta"] = s.ta;
    out << j.dump() << '\n';
  }
  return out.str();
}

template class ModelAgent<float>;
template class ModelAgent<double>;
template GeneratedEpisode generate_episode<float>(const TadtCsaModel<float>&, const env::TabularMDP&,
                                                  const GenerateOptions&, int, std::uint64_t);
template GeneratedEpisode generate_episode<double>(const TadtCsaModel<double>&, const env::TabularMDP&,
                                                   const GenerateOptions&, int, std::uint64_t);
template double model_rollout_return<float>(const TadtCsaModel<float>&, const env::TabularMDP&, const GenerateOptions&,
                                            int, int, std::uint64_t);
template double model_rollout_return<double>(const TadtCsaModel<double>&, const env::TabularMDP&,
                                             const GenerateOptions&, int, int, std::uint64_t);

}  // namespace tadt
