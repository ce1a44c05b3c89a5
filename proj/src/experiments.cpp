#include "tadt/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "tadt/csa.hpp"
#include "tadt/error.hpp"
#include "tadt/trainer.hpp"

namespace tadt {

Dataset dataset_from(const env::TabularMDP& mdp, std::vector<Trajectory> trajectories) {
  Dataset ds;
  ds.trajectories = std::move(trajectories);
  ds.meta.gamma = mdp.gamma;
  ds.meta.d_s = mdp.d_s();
  ds.meta.m = mdp.n_actions;
  return ds;
}

double StitchingResult::best_behavior_normalized() const {
  return std::max(behavior_a_return, behavior_b_return) / optimal_return;
}

double StitchingResult::final_normalized(int chunk_length) const {
  const StitchingCurvePoint* last = nullptr;
  for (const auto& p : curve)
    if (p.chunk_length == chunk_length && (last == nullptr || p.step >= last->step)) last = &p;
  require(last != nullptr, ErrorKind::Evaluation, "no curve for chunk length " + std::to_string(chunk_length));
  return last->normalized_return;
}

std::string StitchingResult::to_csv() const {
  std::ostringstream out;
  out << "chunk_length,step,mean_return,normalized_return\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%d,%ld,%.9g,%.9g\n", p.chunk_length, p.step, p.mean_return, p.normalized_return);
    out << buf;
  }
  return out.str();
}

StitchingResult stitching_experiment(const TrainConfig& config, std::span<const int> chunk_lengths,
                                     const StitchingOptions& options) {
  require(!chunk_lengths.empty(), ErrorKind::Parameter, "chunk_lengths must be nonempty");
  for (int c : chunk_lengths) {
    require(c >= 1, ErrorKind::Parameter, "chunk lengths must be >= 1");
    require(c <= options.horizon, ErrorKind::Parameter,
            "chunk length " + std::to_string(c) + " exceeds the horizon " + std::to_string(options.horizon));
  }
  const auto problem = env::make_stitching_mdp(options.env_seed);
  const auto& mdp = problem.mdp;
  StitchingResult res;
  const auto optimal = env::value_iteration(mdp);
  res.optimal_return = env::expected_episode_return(mdp, optimal.greedy, options.horizon);
  res.behavior_a_return = env::expected_episode_return(mdp, problem.behavior_a, options.horizon);
  res.behavior_b_return = env::expected_episode_return(mdp, problem.behavior_b, options.horizon);

  env::CollectOptions collect;
  collect.epsilon_noise = options.epsilon_noise;
  auto full = env::collect_trajectories(mdp, problem.behavior_a, options.episodes_per_behavior, options.horizon,
                                        derive_seed(config.seed, 0x41ULL), collect);
  collect.user_prefix = "v";
  const auto more = env::collect_trajectories(mdp, problem.behavior_b, options.episodes_per_behavior,
                                              options.horizon, derive_seed(config.seed, 0x42ULL), collect);
  full.insert(full.end(), more.begin(), more.end());

  for (int chunk : chunk_lengths) {
    Dataset ds = dataset_from(mdp, chunk_trajectories(full, static_cast<std::size_t>(chunk), mdp.gamma));
    TrainConfig cfg = config;
    prepare_for_training(ds, cfg);
    std::size_t transitions = 0;
    for (const auto& t : ds.trajectories) transitions += t.actions.size();
    res.chunk_lengths.push_back(chunk);
    res.transitions.push_back(transitions);

    const long total = planned_steps(cfg, make_windows(ds.trajectories, cfg.T_max).size());
    cfg.checkpoint_every = std::max<long>(1, total / std::max(1, options.eval_points));
    GenerateOptions gen = generate_options_from(cfg);
    if (gen.reanchor_every == 0) gen.reanchor_every = chunk;
    TrainHooks<float> hooks;
    hooks.on_checkpoint = [&](long step, const TadtCsaModel<float>& model, const nn::AdamState<float>&) {
      const double r = model_rollout_return(model, mdp, gen, options.eval_episodes, options.horizon,
                                            derive_seed(config.seed, 0x4556414CULL));
      res.curve.push_back({chunk, step, r, r / res.optimal_return});
    };
    train<float>(cfg, ds, hooks);
  }
  return res;
}

std::vector<Variant> ablation_variants() {
  return {
      {"full", {}},
      {"no_tac", {{"no_tac", "true"}}},
      {"no_tac+no_ctp", {{"no_tac", "true"}, {"no_ctp", "true"}}},
      {"no_tac+no_ctp+no_rp", {{"no_tac", "true"}, {"no_ctp", "true"}, {"no_rp", "true"}}},
      {"no_csa", {{"no_csa", "true"}, {"rank_loss", "false"}}},
      {"no_csa+no_ta", {{"no_csa", "true"}, {"rank_loss", "false"}, {"no_ta", "true"}}},
  };
}

TrainConfig apply_variant(TrainConfig config, const Variant& variant) {
  for (const auto& [key, value] : variant.overrides) config.set(key, value);
  config.validate();
  return config;
}

std::vector<VariantScore> compare_variants(const TrainConfig& base, std::span<const Variant> variants,
                                           const Dataset& prepared, const env::TabularMDP& mdp, int eval_episodes,
                                           int horizon, std::uint64_t eval_seed) {
  std::vector<VariantScore> out;
  for (const auto& v : variants) {
    const auto cfg = apply_variant(base, v);
    const auto trained = train<float>(cfg, prepared);
    const auto gen = generate_options_from(cfg);
    out.push_back({v.name, model_rollout_return(*trained.model, mdp, gen, eval_episodes, horizon, eval_seed)});
  }
  return out;
}

double trained_usage_perplexity(const TrainConfig& config, const Dataset& prepared) {
  const auto trained = train<float>(config, prepared);
  const auto windows = make_windows(prepared.trajectories, config.T_max);
  const auto inf = trained.model->infer(windows);
  return csa::usage_perplexity(inf.assign_probs);
}

}  // namespace tadt
