#include "tadt/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tadt/error.hpp"

namespace tadt {

using nlohmann::json;

namespace {

std::string where(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line); }

DatasetMeta parse_meta(const std::string& line, const std::string& source) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, where(source, 1) + ": malformed meta header: " + e.what());
  }
  if (!j.is_object() || !j.contains("gamma") || !j.contains("d_s") || !j.contains("m"))
    fail(ErrorKind::Parse, where(source, 1) + ": meta header must be an object with gamma, d_s and m");
  DatasetMeta meta;
  try {
    meta.gamma = j.at("gamma").get<double>();
    meta.d_s = j.at("d_s").get<int>();
    meta.m = j.at("m").get<int>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, where(source, 1) + ": bad meta field: " + e.what());
  }
  require(meta.gamma >= 0.0 && meta.gamma <= 1.0, ErrorKind::Schema, where(source, 1) + ": gamma outside [0, 1]");
  require(meta.d_s > 0 && meta.m > 0, ErrorKind::Schema, where(source, 1) + ": d_s and m must be positive");
  return meta;
}

Trajectory parse_record(const std::string& line, std::size_t line_no, const std::string& source,
                        const DatasetMeta& meta) {
  Trajectory traj;
  try {
    const json j = json::parse(line);
    traj.user_id = j.at("user_id").get<std::string>();
    traj.states = j.at("states").get<std::vector<std::vector<double>>>();
    traj.actions = j.at("actions").get<std::vector<int>>();
    traj.rewards = j.at("rewards").get<std::vector<double>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, where(source, line_no) + ": " + e.what());
  }
  try {
    validate_trajectory(traj, meta.d_s, meta.m);
  } catch (const Error& e) {
    throw Error(e.kind() == ErrorKind::Shape ? ErrorKind::Schema : e.kind(),
                where(source, line_no) + ": " + e.what());
  }
  return traj;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

Dataset parse_dataset(const std::string& text, const std::string& source, int workers) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!blank(line)) lines.emplace_back(line_no, std::move(line));
    }
  }
  require(!lines.empty(), ErrorKind::Parse, source + ": missing meta header");
  Dataset dataset;
  dataset.meta = parse_meta(lines.front().second, source);

  const std::size_t n = lines.size() - 1;
  dataset.trajectories.resize(n);
  const std::size_t n_workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1,
                                                        std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n_workers);
  auto parse_range = [&](std::size_t w) {
    const std::size_t begin = n * w / n_workers;
    const std::size_t end = n * (w + 1) / n_workers;
    try {
      for (std::size_t i = begin; i < end; ++i)
        dataset.trajectories[i] = parse_record(lines[i + 1].second, lines[i + 1].first, source, dataset.meta);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (n_workers == 1) {
    parse_range(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(parse_range, w);
    for (auto& t : threads) t.join();
  }
  // Report the earliest failing shard so diagnostics match a sequential read.
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path, int workers) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Parse, "cannot open dataset " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), path.string(), workers);
}

std::string serialize_dataset(const Dataset& dataset) {
  std::string out;
  json meta = json::object();
  meta["gamma"] = dataset.meta.gamma;
  meta["d_s"] = dataset.meta.d_s;
  meta["m"] = dataset.meta.m;
  out += meta.dump();
  out += '\n';
  for (const auto& traj : dataset.trajectories) {
    json record = json::object();
    record["user_id"] = traj.user_id;
    record["states"] = traj.states;
    record["actions"] = traj.actions;
    record["rewards"] = traj.rewards;
    out += record.dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Parameter, "cannot write dataset " + path.string());
  out << serialize_dataset(dataset);
}

void prepare_dataset(Dataset& dataset) {
  for (auto& traj : dataset.trajectories) attach_return_signals(traj, dataset.meta.gamma);
  fit_return_normalization(dataset.trajectories, dataset.meta);
}

}  // namespace tadt
