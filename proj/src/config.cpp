#include "tadt/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "tadt/error.hpp"
#include "tadt/rng.hpp"

namespace tadt {

namespace {

struct Field {
  std::function<void(TrainConfig&, const nlohmann::json&)> assign;
  std::function<nlohmann::json(const TrainConfig&)> read;
};

template <typename T>
Field field(T TrainConfig::*member) {
  return Field{[member](TrainConfig& c, const nlohmann::json& v) { c.*member = v.get<T>(); },
               [member](const TrainConfig& c) { return nlohmann::json(c.*member); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"lr", field(&TrainConfig::lr)},
      {"batch_size", field(&TrainConfig::batch_size)},
      {"epochs", field(&TrainConfig::epochs)},
      {"max_steps", field(&TrainConfig::max_steps)},
      {"grad_clip", field(&TrainConfig::grad_clip)},
      {"checkpoint_every", field(&TrainConfig::checkpoint_every)},
      {"adam_beta1", field(&TrainConfig::adam_beta1)},
      {"adam_beta2", field(&TrainConfig::adam_beta2)},
      {"adam_eps", field(&TrainConfig::adam_eps)},
      {"hidden_dim", field(&TrainConfig::hidden_dim)},
      {"codebook_size", field(&TrainConfig::codebook_size)},
      {"T_max", field(&TrainConfig::T_max)},
      {"n_layers", field(&TrainConfig::n_layers)},
      {"n_heads", field(&TrainConfig::n_heads)},
      {"gamma", field(&TrainConfig::gamma)},
      {"lambda1", field(&TrainConfig::lambda1)},
      {"lambda2", field(&TrainConfig::lambda2)},
      {"lambda3", field(&TrainConfig::lambda3)},
      {"lambda4", field(&TrainConfig::lambda4)},
      {"lambda5", field(&TrainConfig::lambda5)},
      {"alpha", field(&TrainConfig::alpha)},
      {"beta", field(&TrainConfig::beta)},
      {"delta", field(&TrainConfig::delta)},
      {"bin_width", field(&TrainConfig::bin_width)},
      {"k_neg", field(&TrainConfig::k_neg)},
      {"tau_start", field(&TrainConfig::tau_start)},
      {"tau_end", field(&TrainConfig::tau_end)},
      {"reg_mode", field(&TrainConfig::reg_mode)},
      {"ctp_denominator", field(&TrainConfig::ctp_denominator)},
      {"reduction", field(&TrainConfig::reduction)},
      {"hard_assign", field(&TrainConfig::hard_assign)},
      {"ctp_stop_grad", field(&TrainConfig::ctp_stop_grad)},
      {"rank_pair_cap", field(&TrainConfig::rank_pair_cap)},
      {"rank_loss", field(&TrainConfig::rank_loss)},
      {"no_tac", field(&TrainConfig::no_tac)},
      {"no_ctp", field(&TrainConfig::no_ctp)},
      {"no_rp", field(&TrainConfig::no_rp)},
      {"no_csa", field(&TrainConfig::no_csa)},
      {"no_ta", field(&TrainConfig::no_ta)},
      {"seed", field(&TrainConfig::seed)},
      {"precision", field(&TrainConfig::precision)},
      {"deterministic", field(&TrainConfig::deterministic)},
      {"workers", field(&TrainConfig::workers)},
      {"decode", field(&TrainConfig::decode)},
      {"gen_mode", field(&TrainConfig::gen_mode)},
      {"target_return", field(&TrainConfig::target_return)},
      {"clamp_rtg", field(&TrainConfig::clamp_rtg)},
      {"rtg_reanchor", field(&TrainConfig::rtg_reanchor)},
  };
  return table;
}

const Field& lookup(const std::string& key) {
  for (const auto& [name, f] : fields())
    if (name == key) return f;
  fail(ErrorKind::Parameter, "unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Interprets override text using the type of the current value.
nlohmann::json coerce(const nlohmann::json& current, const std::string& key, const std::string& text) {
  try {
    if (current.is_boolean()) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      fail(ErrorKind::Parameter, "config key '" + key + "' expects true/false, got '" + text + "'");
    }
    if (current.is_string()) return text;
    std::size_t used = 0;
    if (current.is_number_unsigned()) {
      require(!text.empty() && text[0] != '-', ErrorKind::Parameter, "config key '" + key + "' must be non-negative");
      const auto v = std::stoull(text, &used);
      require(used == text.size(), ErrorKind::Parameter, "bad value '" + text + "' for '" + key + "'");
      return v;
    }
    if (current.is_number_integer()) {
      const auto v = std::stoll(text, &used);
      require(used == text.size(), ErrorKind::Parameter, "bad value '" + text + "' for '" + key + "'");
      return v;
    }
    const double v = std::stod(text, &used);
    require(used == text.size(), ErrorKind::Parameter, "bad value '" + text + "' for '" + key + "'");
    return v;
  } catch (const std::logic_error&) {
    fail(ErrorKind::Parameter, "bad value '" + text + "' for config key '" + key + "'");
  }
}

}  // namespace

std::vector<std::string> TrainConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [name, f] : fields()) out.push_back(name);
  return out;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  const auto& f = lookup(key);
  f.assign(*this, coerce(f.read(*this), key, trim(value)));
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, f] : fields()) j[name] = f.read(*this);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorKind::Parse, "config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    const auto& f = lookup(key);
    try {
      const auto current = f.read(c);
      if (value.is_string() && !current.is_string())
        f.assign(c, coerce(current, key, value.get<std::string>()));
      else
        f.assign(c, value);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parameter, "config key '" + key + "': " + e.what());
    }
  }
  return c;
}

void TrainConfig::validate() const {
  auto positive = [](bool ok, const std::string& what) { require(ok, ErrorKind::Parameter, what); };
  positive(lr > 0 && std::isfinite(lr), "lr must be positive");
  positive(batch_size >= 1, "batch_size must be >= 1");
  positive(epochs >= 0, "epochs must be >= 0");
  positive(max_steps >= 0, "max_steps must be >= 0");
  positive(grad_clip >= 0, "grad_clip must be >= 0");
  positive(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  positive(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1, "Adam betas must lie in [0, 1)");
  positive(adam_eps > 0, "adam_eps must be positive");
  positive(hidden_dim >= 1, "hidden_dim must be >= 1");
  positive(codebook_size >= 2, "codebook_size must be >= 2");
  positive(T_max >= 1, "T_max must be >= 1");
  positive(n_layers >= 1, "n_layers must be >= 1");
  positive(n_heads >= 1 && hidden_dim % n_heads == 0, "n_heads must divide hidden_dim");
  positive(gamma < 0 || gamma <= 1, "gamma must lie in [0, 1]");
  for (double l : {lambda1, lambda2, lambda3, lambda4, lambda5}) positive(l >= 0, "loss weights must be >= 0");
  positive(alpha >= 0 && alpha <= 1, "alpha must lie in [0, 1]");
  positive(beta > 0 && beta < 1, "beta must lie in (0, 1)");
  positive(delta >= 0, "delta must be >= 0");
  positive(bin_width > 0, "bin_width must be positive");
  positive(k_neg >= 1, "k_neg must be >= 1");
  positive(tau_start > 0 && tau_end > 0, "temperatures must be positive");
  positive(rank_pair_cap >= 0, "rank_pair_cap must be >= 0");
  positive(workers >= 1, "workers must be >= 1");
  reg_mode_enum();
  ctp_denominator_enum();
  reduction_enum();
  require(precision == "single" || precision == "double", ErrorKind::Parameter, "precision must be single or double");
  require(decode == "greedy" || decode == "sample", ErrorKind::Parameter, "decode must be greedy or sample");
  require(gen_mode == "rtg_decrement" || gen_mode == "model_predicted", ErrorKind::Parameter,
          "gen_mode must be rtg_decrement or model_predicted");
  require(rtg_reanchor >= 0, ErrorKind::Parameter, "rtg_reanchor must be >= 0");
  require(!(no_csa && rank_loss), ErrorKind::Parameter,
          "no_csa removes the codebook the rank loss groups by; set rank_loss=false as well");
}

std::uint64_t TrainConfig::hash() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (unsigned char c : text) h = mix_seed(h ^ c);
  return h;
}

double TrainConfig::tau_at(long step, long total_steps) const {
  if (total_steps <= 1) return tau_start;
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps - 1));
  return tau_start * std::pow(tau_end / tau_start, frac);
}

TrainConfig parse_config_text(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return TrainConfig::from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::Parse, std::string("config JSON: ") + e.what());
    }
  }
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Parse, "config line " + std::to_string(number) + ": expected key=value");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Parameter, "cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_overrides(TrainConfig& config, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    require(eq != std::string::npos && eq > 0, ErrorKind::Parameter, "override '" + o + "' is not key=value");
    config.set(trim(o.substr(0, eq)), o.substr(eq + 1));
  }
}

TrainConfig desk_config() {
  TrainConfig c;
  c.hidden_dim = 32;
  c.codebook_size = 8;
  c.batch_size = 16;
  c.n_layers = 1;
  c.n_heads = 2;
  return c;
}

}  // namespace tadt
