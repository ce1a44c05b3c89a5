#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tadt/bound.hpp"
#include "tadt/error.hpp"
#include "tadt/experiments.hpp"
#include "tadt/generate.hpp"
#include "tadt/metrics.hpp"
#include "tadt/model_gradcheck.hpp"
#include "tadt/svg.hpp"
#include "tadt/trainer.hpp"
#include "tadt/version.hpp"

namespace fs = std::filesystem;
using namespace tadt;
using ojson = nlohmann::ordered_json;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;  // negative: keep the configured seed
  std::string out_dir = ".";
  int workers = 1;
  std::string precision;
  bool plot = false;
};

void add_common(CLI::App* cmd, Common& c, bool model_flags) {
  cmd->add_option("--seed", c.seed, "Random seed (overrides the config)");
  cmd->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--workers", c.workers, "Worker threads for data and evaluation; 1 is deterministic")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--plot", c.plot, "Also write SVG charts");
  if (model_flags) {
    cmd->add_option("--config", c.config_path, "Config file (JSON or key=value lines)");
    cmd->add_option("--set", c.overrides, "Config override key=value (repeatable)");
    cmd->add_option("--precision", c.precision, "Arithmetic precision")->check(CLI::IsMember({"single", "double"}));
  }
}

bool deterministic_env() {
  const char* v = std::getenv("TADT_CSA_DETERMINISTIC");
  return v && std::string(v) == "1";
}

TrainConfig resolve_config(const Common& c, const TrainConfig& base = desk_config()) {
  TrainConfig config = c.config_path.empty() ? base : load_config(c.config_path);
  apply_overrides(config, c.overrides);
  if (c.seed >= 0) config.seed = static_cast<std::uint64_t>(c.seed);
  if (!c.precision.empty()) config.precision = c.precision;
  config.workers = c.workers;
  if (deterministic_env()) {
    config.deterministic = true;
    config.workers = 1;
  }
  config.validate();
  return config;
}

int effective_workers(const Common& c) { return deterministic_env() ? 1 : c.workers; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Parameter, "cannot write " + path.string());
  out << text;
}

// Every command records what it ran with.
void write_snapshot(const Common& c, const std::string& command, std::uint64_t seed, const ojson& settings,
                    const TrainConfig* config = nullptr) {
  ojson j;
  j["command"] = command;
  j["version"] = kVersion;
  j["seed"] = seed;
  j["workers"] = effective_workers(c);
  j["deterministic"] = deterministic_env() || effective_workers(c) == 1;
  j["settings"] = settings;
  if (config) j["config"] = config->to_json();
  write_text(fs::path(c.out_dir) / "resolved_config.json", j.dump(2) + "\n");
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      require(used == item.size(), ErrorKind::Parameter, "");
    } catch (const std::exception&) {
      throw Error(ErrorKind::Parameter, "bad " + what + " entry '" + item + "'");
    }
  }
  require(!out.empty(), ErrorKind::Parameter, what + " must not be empty");
  return out;
}

std::string precision_of(const fs::path& ckpt) {
  return checkpoint_config(nn::load_checkpoint_file(ckpt)).precision;
}

// Runs `fn` with the checkpoint's model in its stored precision.
template <typename Fn>
auto with_model(const fs::path& ckpt, Fn&& fn) {
  if (precision_of(ckpt) == "double") return fn(*load_model<double>(ckpt));
  return fn(*load_model<float>(ckpt));
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string env = "stitching";
  int episodes = 200;
  int horizon = 200;
  double epsilon = 0.1;
  int n_states = 32;
  int n_actions = 4;
  int d_s = 8;
  double sparsity = 0.25;
  double gamma = 0.9;
  bool mean_rewards = false;
};

int run_gen_data(const Common& c, const GenDataArgs& a) {
  const std::uint64_t seed = c.seed >= 0 ? static_cast<std::uint64_t>(c.seed) : 0;
  require(a.episodes >= 1, ErrorKind::Parameter, "--episodes must be at least 1");
  env::CollectOptions co;
  co.epsilon_noise = a.epsilon;
  co.bernoulli_rewards = !a.mean_rewards;
  co.workers = effective_workers(c);
  env::TabularMDP mdp;
  std::vector<Trajectory> trajs;
  if (a.env == "stitching") {
    const auto problem = env::make_stitching_mdp(seed);
    mdp = problem.mdp;
    const int half = a.episodes / 2;
    trajs = env::collect_trajectories(mdp, problem.behavior_a, a.episodes - half, a.horizon, derive_seed(seed, 0x41ULL),
                                      co);
    if (half > 0) {
      co.user_prefix = "v";
      auto more = env::collect_trajectories(mdp, problem.behavior_b, half, a.horizon, derive_seed(seed, 0x42ULL), co);
      trajs.insert(trajs.end(), more.begin(), more.end());
    }
  } else {
    mdp = env::make_random_mdp(seed, a.n_states, a.n_actions, a.d_s, a.sparsity, a.gamma);
    const auto behavior = env::value_iteration(mdp).greedy;
    trajs = env::collect_trajectories(mdp, behavior, a.episodes, a.horizon, derive_seed(seed, 0x41ULL), co);
  }
  const fs::path out(c.out_dir);
  fs::create_directories(out);
  save_dataset(out / "train.jsonl", dataset_from(mdp, std::move(trajs)));
  env::save_mdp(out / "mdp.json", mdp);
  write_snapshot(c, "gen-data", seed,
                 {{"env", a.env}, {"episodes", a.episodes}, {"horizon", a.horizon}, {"epsilon", a.epsilon},
                  {"n_states", mdp.n_states}, {"n_actions", mdp.n_actions}, {"mean_rewards", a.mean_rewards}});
  std::cout << "wrote " << (out / "train.jsonl").string() << " and " << (out / "mdp.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

std::string loss_chart(const RunLog& log) {
  Series total{"total", {}, {}}, action{"action", {}, {}};
  for (const auto& row : log.rows()) {
    total.x.push_back(static_cast<double>(row.step));
    total.y.push_back(row.loss.total);
    action.x.push_back(static_cast<double>(row.step));
    action.y.push_back(row.loss.action);
  }
  ChartOptions o;
  o.title = "Training loss";
  o.x_label = "step";
  o.y_label = "loss";
  return line_chart_svg({total, action}, o);
}

int run_train(const Common& c, const std::string& data_path) {
  TrainConfig config = resolve_config(c);
  Dataset ds = load_dataset(data_path, effective_workers(c));
  prepare_for_training(ds, config);
  write_snapshot(c, "train", config.seed, {{"data", data_path}}, &config);
  auto report = [&](auto result) {
    if (c.plot) write_text(fs::path(c.out_dir) / "loss.svg", loss_chart(result.log));
    std::cout << "trained " << result.steps << " steps; final loss "
              << (result.log.empty() ? 0.0 : result.log.rows().back().loss.total) << "\n";
    return 0;
  };
  if (config.precision == "double") {
    TrainHooks<double> hooks;
    hooks.out_dir = c.out_dir;
    return report(train<double>(config, ds, hooks));
  }
  TrainHooks<float> hooks;
  hooks.out_dir = c.out_dir;
  return report(train<float>(config, ds, hooks));
}

// ---------------------------------------------------------------- eval

int run_eval(const Common& c, const std::string& ckpt, const std::string& data_path, const std::string& ks_text,
             bool ks_given) {
  auto ks = parse_int_list(ks_text, "--ks");
  Dataset ds = load_dataset(data_path, effective_workers(c));
  if (!ks_given) std::erase_if(ks, [m = ds.meta.m](int k) { return k > m; });
  if (ks.empty()) ks.push_back(1);
  const MetricTable table = with_model(ckpt, [&](const auto& model) {
    for (auto& t : ds.trajectories) attach_return_signals(t, model.meta().gamma);
    return offline_eval(model, ds, ks);
  });
  write_snapshot(c, "eval", 0, {{"ckpt", ckpt}, {"data", data_path}, {"ks", ks}});
  write_text(fs::path(c.out_dir) / "metrics.csv", table.to_csv());
  write_text(fs::path(c.out_dir) / "metrics.json", table.to_json());
  std::cout << table.to_csv();
  return 0;
}

// ---------------------------------------------------------------- rollout

struct RolloutArgs {
  std::string ckpt, mdp;
  int episodes = 10;
  int horizon = 200;
  double target_return = -1.0;
  std::string mode;
  int reanchor = -1;
};

int run_rollout(const Common& c, const RolloutArgs& a) {
  const auto mdp = env::load_mdp(a.mdp);
  const std::uint64_t seed = c.seed >= 0 ? static_cast<std::uint64_t>(c.seed) : 0;
  ojson summary;
  std::string trace;
  with_model(a.ckpt, [&](const auto& model) {
    GenerateOptions o = generate_options_from(model.config());
    o.seed = seed;
    if (a.target_return >= 0) o.target_return = a.target_return;
    if (!a.mode.empty()) o.mode = parse_gen_mode(a.mode);
    if (a.reanchor >= 0) o.reanchor_every = a.reanchor;
    const double mean = model_rollout_return(model, mdp, o, a.episodes, a.horizon, seed);
    const auto first = generate_episode(model, mdp, o, a.horizon, derive_seed(seed, 0ULL));
    trace = generated_to_jsonl(first.steps);
    const auto opt = env::value_iteration(mdp);
    summary["mean_return"] = mean;
    summary["optimal_expected_return"] = env::expected_episode_return(mdp, opt.greedy, a.horizon);
    summary["episodes"] = a.episodes;
    summary["horizon"] = a.horizon;
    return 0;
  });
  write_snapshot(c, "rollout", seed,
                 {{"ckpt", a.ckpt}, {"mdp", a.mdp}, {"episodes", a.episodes}, {"horizon", a.horizon}});
  write_text(fs::path(c.out_dir) / "rollout.json", summary.dump(2) + "\n");
  write_text(fs::path(c.out_dir) / "episode0.jsonl", trace);
  std::cout << "mean return " << summary["mean_return"].get<double>() << " (optimal "
            << summary["optimal_expected_return"].get<double>() << ")\n";
  return 0;
}

// ---------------------------------------------------------------- bound-check

int run_bound_check(const Common& c, const std::string& ckpt, const std::string& mdp_path, bool lossless,
                    std::size_t kappa_pairs) {
  require(lossless || !ckpt.empty(), ErrorKind::Parameter, "bound-check needs --ckpt or --lossless");
  const auto mdp = env::load_mdp(mdp_path);
  BoundOptions o;
  o.seed = c.seed >= 0 ? static_cast<std::uint64_t>(c.seed) : 0;
  o.kappa_pairs = kappa_pairs;
  const BoundReport report = lossless ? check_bound(mdp, lossless_abstraction(mdp))
                                      : with_model(ckpt, [&](const auto& m) { return theorem_bound_check(m, mdp, o); });
  write_snapshot(c, "bound-check", o.seed,
                 {{"ckpt", ckpt}, {"mdp", mdp_path}, {"lossless", lossless}, {"kappa_pairs", kappa_pairs}});
  write_text(fs::path(c.out_dir) / "bound_report.json", report.to_json());
  std::cout << "value_gap " << report.value_gap << " bound " << report.bound_value
            << (report.holds ? " (holds with kappa_hat)" : " (does not hold with kappa_hat)") << "\n";
  return 0;
}

// ---------------------------------------------------------------- stitch-exp

int run_stitch(const Common& c, const std::string& chunks_text, const StitchingOptions& options) {
  TrainConfig base = desk_config();
  base.T_max = 30;
  base.epochs = 20;
  base.reg_mode = "batch_mean";
  TrainConfig config = resolve_config(c, base);
  const auto chunks = parse_int_list(chunks_text, "--chunks");
  const auto result = stitching_experiment(config, chunks, options);
  write_snapshot(c, "stitch-exp", config.seed,
                 {{"chunks", chunks}, {"episodes_per_behavior", options.episodes_per_behavior},
                  {"horizon", options.horizon}, {"env_seed", options.env_seed}},
                 &config);
  write_text(fs::path(c.out_dir) / "stitching.csv", result.to_csv());
  if (c.plot) {
    std::vector<Series> series;
    for (int chunk : chunks) {
      Series s{"chunk " + std::to_string(chunk), {}, {}};
      for (const auto& p : result.curve)
        if (p.chunk_length == chunk) {
          s.x.push_back(static_cast<double>(p.step));
          s.y.push_back(p.normalized_return);
        }
      series.push_back(std::move(s));
    }
    ChartOptions o;
    o.title = "Return vs training steps";
    o.x_label = "step";
    o.y_label = "normalized return";
    write_text(fs::path(c.out_dir) / "stitching.svg", line_chart_svg(series, o));
  }
  std::cout << "best behavior " << result.best_behavior_normalized() << "\n";
  for (int chunk : chunks) std::cout << "chunk " << chunk << ": " << result.final_normalized(chunk) << "\n";
  return 0;
}

// ---------------------------------------------------------------- gradcheck

int run_gradcheck(const Common& c, int windows, int length) {
  const std::uint64_t seed = c.seed >= 0 ? static_cast<std::uint64_t>(c.seed) : 0;
  const bool single = c.precision != "double";
  TrainConfig config = gradcheck_config(seed);
  apply_overrides(config, c.overrides);
  config.validate();
  const auto meta = gradcheck_meta();
  const auto batch = random_windows(meta, static_cast<std::size_t>(windows), static_cast<std::size_t>(length),
                                    derive_seed(seed, 0x5749ULL));
  const auto result = gradcheck_model(config, meta, batch, single, single ? 1e-4 : 1e-6);
  ojson j;
  j["precision"] = result.precision;
  j["tolerance"] = result.tolerance;
  j["passed"] = result.passed;
  for (const auto& l : result.losses) {
    j["losses"][l.loss] = {{"max_rel_error", l.report.max_rel_error},
                           {"max_abs_error", l.report.max_abs_error},
                           {"checked", l.report.checked},
                           {"passed", l.report.passed}};
    std::cout << l.loss << ": max rel error " << l.report.max_rel_error << (l.report.passed ? "" : "  FAIL") << "\n";
  }
  write_snapshot(c, "gradcheck", seed, {{"windows", windows}, {"length", length}}, &config);
  write_text(fs::path(c.out_dir) / "gradcheck.json", j.dump(2) + "\n");
  return result.passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal-advantage decision transformer with contrastive state abstraction"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1, 1);

  Common common;
  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Sample a trajectory dataset from a synthetic MDP");
  add_common(gen_cmd, common, false);
  gen_cmd->add_option("--env", gen.env, "Environment family")
      ->capture_default_str()
      ->check(CLI::IsMember({"stitching", "random"}));
  gen_cmd->add_option("--episodes", gen.episodes, "Number of episodes")->capture_default_str();
  gen_cmd->add_option("--horizon", gen.horizon, "Steps per episode")->capture_default_str();
  gen_cmd->add_option("--epsilon", gen.epsilon, "Uniform action noise of the behavior policy")->capture_default_str();
  gen_cmd->add_option("--n-states", gen.n_states, "States (random env)")->capture_default_str();
  gen_cmd->add_option("--n-actions", gen.n_actions, "Actions (random env)")->capture_default_str();
  gen_cmd->add_option("--d-s", gen.d_s, "Observation dimension (random env)")->capture_default_str();
  gen_cmd->add_option("--sparsity", gen.sparsity, "Reachable successor fraction (random env)")->capture_default_str();
  gen_cmd->add_option("--gamma", gen.gamma, "Discount (random env)")->capture_default_str();
  gen_cmd->add_flag("--mean-rewards", gen.mean_rewards, "Emit mean rewards instead of Bernoulli draws");

  std::string data_path;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a JSONL dataset");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--data", data_path, "Training dataset (JSONL)")->required();

  std::string ckpt, ks = "1,5,10";
  auto* eval_cmd = app.add_subcommand("eval", "Offline ranking metrics on a held-out dataset");
  add_common(eval_cmd, common, false);
  eval_cmd->add_option("--ckpt", ckpt, "Model checkpoint")->required();
  eval_cmd->add_option("--data", data_path, "Held-out dataset (JSONL)")->required();
  auto* ks_opt = eval_cmd->add_option("--ks", ks, "Comma-separated cutoffs (defaults above m are dropped)")
                     ->capture_default_str();

  RolloutArgs roll;
  auto* roll_cmd = app.add_subcommand("rollout", "Generate episodes with a trained model in an MDP");
  add_common(roll_cmd, common, false);
  roll_cmd->add_option("--ckpt", roll.ckpt, "Model checkpoint")->required();
  roll_cmd->add_option("--mdp", roll.mdp, "MDP file (mdp.json)")->required();
  roll_cmd->add_option("--episodes", roll.episodes, "Episodes")->capture_default_str();
  roll_cmd->add_option("--horizon", roll.horizon, "Steps per episode")->capture_default_str();
  roll_cmd->add_option("--target-return", roll.target_return, "Initial RTG; negative uses the dataset maximum")
      ->capture_default_str();
  roll_cmd->add_option("--mode", roll.mode, "RTG update (rtg_decrement or model_predicted); default from the config");
  roll_cmd->add_option("--reanchor", roll.reanchor, "Restart RTG and context every n steps; negative uses the config")
      ->capture_default_str();

  bool lossless = false;
  std::string mdp_path;
  std::size_t kappa_pairs = 20000;
  auto* bound_cmd = app.add_subcommand("bound-check", "Check the value-gap bound against an exact MDP");
  add_common(bound_cmd, common, false);
  bound_cmd->add_option("--ckpt", ckpt, "Model checkpoint");
  bound_cmd->add_option("--mdp", mdp_path, "MDP file (mdp.json)")->required();
  bound_cmd->add_flag("--lossless", lossless, "Check the lossless abstraction fixture instead of a model");
  bound_cmd->add_option("--kappa-pairs", kappa_pairs, "State pairs sampled for the Lipschitz estimate")
      ->capture_default_str();

  std::string chunks = "10,30,200";
  StitchingOptions stitch;
  auto* stitch_cmd = app.add_subcommand("stitch-exp", "Train on re-chunked suboptimal data in the stitching MDP");
  add_common(stitch_cmd, common, true);
  stitch_cmd->add_option("--chunks", chunks, "Comma-separated chunk lengths")->capture_default_str();
  stitch_cmd->add_option("--env-seed", stitch.env_seed, "Stitching MDP seed")->capture_default_str();
  stitch_cmd->add_option("--episodes-per-behavior", stitch.episodes_per_behavior, "Episodes per behavior policy")
      ->capture_default_str();
  stitch_cmd->add_option("--horizon", stitch.horizon, "Episode length")->capture_default_str();
  stitch_cmd->add_option("--eval-episodes", stitch.eval_episodes, "Rollouts per evaluation")->capture_default_str();
  stitch_cmd->add_option("--eval-points", stitch.eval_points, "Evaluations along training")->capture_default_str();

  int gc_windows = 8, gc_length = 2;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every loss gradient");
  add_common(gc_cmd, common, true);
  gc_cmd->add_option("--windows", gc_windows, "Random windows in the batch")->capture_default_str();
  gc_cmd->add_option("--length", gc_length, "Steps per window")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen_cmd) return run_gen_data(common, gen);
    if (*train_cmd) return run_train(common, data_path);
    if (*eval_cmd) return run_eval(common, ckpt, data_path, ks, ks_opt->count() > 0);
    if (*roll_cmd) return run_rollout(common, roll);
    if (*bound_cmd) return run_bound_check(common, ckpt, mdp_path, lossless, kappa_pairs);
    if (*stitch_cmd) return run_stitch(common, chunks, stitch);
    if (*gc_cmd) return run_gradcheck(common, gc_windows, gc_length);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
