#include "tadt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <type_traits>

#include "json.hpp"
#include "tadt/error.hpp"
#include "tadt/version.hpp"

namespace tadt {

void RunLog::append(const RunLogRow& row) {
  require(rows_.empty() || row.step > rows_.back().step, ErrorKind::Parameter, "run log steps must increase");
  rows_.push_back(row);
}

std::string RunLog::to_csv() const {
  std::ostringstream out;
  out << kHeader << '\n';
  char buf[512];
  for (const auto& r : rows_) {
    std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step, r.loss.total,
                  r.loss.action, r.loss.rank, r.loss.ret, r.loss.reward, r.loss.transition, r.loss.reg, r.lr, r.tau);
    out << buf;
  }
  return out.str();
}

void RunLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Evaluation, "cannot write '" + path.string() + "'");
  out << to_csv();
}

std::string RunLog::meta_json() const {
  nlohmann::ordered_json j;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(meta.config_hash));
  j["config_hash"] = hash;
  j["seed"] = meta.seed;
  j["version"] = meta.version;
  j["precision"] = meta.precision;
  j["steps"] = rows_.empty() ? 0 : rows_.back().step;
  return j.dump(2) + "\n";
}

void prepare_for_training(Dataset& dataset, const TrainConfig& config) {
  if (config.gamma >= 0) dataset.meta.gamma = config.gamma;
  prepare_dataset(dataset);
}

long planned_steps(const TrainConfig& config, std::size_t n_windows) {
  if (n_windows == 0 || config.epochs == 0) return 0;
  const long per_epoch = static_cast<long>((n_windows + config.batch_size - 1) / config.batch_size);
  long total = per_epoch * config.epochs;
  if (config.max_steps > 0) total = std::min<long>(total, config.max_steps);
  return total;
}

template <typename Real>
TrainResult<Real> train(const TrainConfig& config, const Dataset& dataset, const TrainHooks<Real>& hooks) {
  config.validate();
  require(!dataset.trajectories.empty(), ErrorKind::Parameter, "training dataset is empty");
  const auto windows = make_windows(dataset.trajectories, config.T_max);
  TrainResult<Real> result;
  result.model = std::make_unique<TadtCsaModel<Real>>(config, model_meta_from(dataset));
  result.adam.lr = config.lr;
  result.adam.beta1 = config.adam_beta1;
  result.adam.beta2 = config.adam_beta2;
  result.adam.eps = config.adam_eps;
  result.log.meta = {config.hash(), config.seed, kVersion, std::is_same_v<Real, float> ? "single" : "double"};

  if (!hooks.out_dir.empty()) std::filesystem::create_directories(hooks.out_dir);
  const long total = planned_steps(config, windows.size());
  auto params = result.model->parameter_list();
  std::vector<std::size_t> order(windows.size());
  long step = 0;
  for (int epoch = 0; step < total; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, 0x45504F43ULL, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    for (std::size_t begin = 0; begin < order.size() && step < total; begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      std::vector<Window> batch;
      batch.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) batch.push_back(windows[order[k]]);

      ForwardOptions opts;
      opts.tau = config.tau_at(step, total);
      opts.noise_seed = derive_seed(config.seed, 0x53544550ULL, static_cast<std::uint64_t>(step));
      result.model->parameters().zero_grad();
      nn::Tape<Real> tape;
      const auto fwd = result.model->forward(tape, batch, opts);
      const auto& v = fwd.values;
      if (!std::isfinite(v.total)) {
        std::ostringstream msg;
        msg << "loss became non-finite at step " << step << " (batch windows";
        for (std::size_t k = begin; k < end; ++k) msg << ' ' << order[k];
        msg << "; L_a=" << v.action << " L_rank=" << v.rank << " L_R=" << v.ret << " L_r=" << v.reward
            << " L_c=" << v.transition << " L_reg=" << v.reg << ")";
        fail(ErrorKind::NonFinite, msg.str());
      }
      tape.backward(fwd.total);
      nn::clip_grad_norm<Real>(params, config.grad_clip);
      nn::adam_step<Real>(params, result.adam);
      ++step;
      result.log.append({step, v, config.lr, opts.tau});
      if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0 && step < total) {
        if (hooks.on_checkpoint) hooks.on_checkpoint(step, *result.model, result.adam);
        if (!hooks.out_dir.empty())
          save_model(hooks.out_dir / ("step_" + std::to_string(step) + ".ckpt"), *result.model, &result.adam);
      }
    }
  }
  result.steps = step;
  if (hooks.on_checkpoint && step > 0) hooks.on_checkpoint(step, *result.model, result.adam);
  if (!hooks.out_dir.empty()) {
    save_model(hooks.out_dir / "final.ckpt", *result.model, &result.adam);
    result.log.write_csv(hooks.out_dir / "metrics.csv");
    std::ofstream(hooks.out_dir / "run_meta.json") << result.log.meta_json();
  }
  return result;
}

template <typename Real>
void save_model(const std::filesystem::path& path, const TadtCsaModel<Real>& model, const nn::AdamState<Real>* adam) {
  nn::save_checkpoint_file(path, model.to_checkpoint(adam));
}

template <typename Real>
std::unique_ptr<TadtCsaModel<Real>> model_from_checkpoint(const nn::CheckpointData& data, nn::AdamState<Real>* adam) {
  auto model = std::make_unique<TadtCsaModel<Real>>(checkpoint_config(data), checkpoint_meta(data));
  model->load_checkpoint(data, adam);
  return model;
}

template <typename Real>
std::unique_ptr<TadtCsaModel<Real>> load_model(const std::filesystem::path& path, nn::AdamState<Real>* adam) {
  return model_from_checkpoint<Real>(nn::load_checkpoint_file(path), adam);
}

template TrainResult<float> train<float>(const TrainConfig&, const Dataset&, const TrainHooks<float>&);
template TrainResult<double> train<double>(const TrainConfig&, const Dataset&, const TrainHooks<double>&);
template void save_model<float>(const std::filesystem::path&, const TadtCsaModel<float>&, const nn::AdamState<float>*);
template void save_model<double>(const std::filesystem::path&, const TadtCsaModel<double>&,
                                 const nn::AdamState<double>*);
template std::unique_ptr<TadtCsaModel<float>> load_model<float>(const std::filesystem::path&, nn::AdamState<float>*);
template std::unique_ptr<TadtCsaModel<double>> load_model<double>(const std::filesystem::path&, nn::AdamState<double>*);
template std::unique_ptr<TadtCsaModel<float>> model_from_checkpoint<float>(const nn::CheckpointData&,
                                                                         nn::AdamState<float>*);
template std::unique_ptr<TadtCsaModel<double>> model_from_checkpoint<double>(const nn::CheckpointData&,
                                                                           nn::AdamState<double>*);

}  // namespace tadt
