#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tadt/trajectory.hpp"

namespace tadt {

struct Dataset {
  std::vector<Trajectory> trajectories;
  DatasetMeta meta;
};

/// Reads the JSONL trajectory format: a meta line {"gamma","d_s","m"}
/// followed by one trajectory object per line. Record lines may be parsed by
/// up to `workers` threads; the result always keeps file order. Trajectories
/// are returned un-annotated.
Dataset load_dataset(const std::filesystem::path& path, int workers = 1);

/// Parses the same format from an in-memory string (`source` is used in
/// diagnostics only).
Dataset parse_dataset(const std::string& text, const std::string& source = "<memory>", int workers = 1);

void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
std::string serialize_dataset(const Dataset& dataset);

/// Annotates every trajectory with [RTG, TA] under meta.gamma and fits the
/// normalization statistics.
void prepare_dataset(Dataset& dataset);

}  // namespace tadt
