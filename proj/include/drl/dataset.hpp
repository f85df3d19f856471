#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "drl/envs.hpp"

namespace drl {

// Dataset file: one JSON header line, then fixed-size binary records per
// trajectory (frames as float32 row-major, actions/rewards as float64, u as
// one byte, block_start/block_row/block_col as uint16; little-endian).
struct DatasetHeader {
  int format_version = 2;
  EnvKind env = EnvKind::glyph;
  ConfoundingSpec spec;
  std::size_t T = 5, H = 16, W = 16;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  double r_min = 0.0, r_max = 1.0;  // reward normalization constants

  nlohmann::json to_json() const;
  static DatasetHeader from_json(const nlohmann::json& j);
};

void write_dataset(const std::string& path, DatasetHeader header,
                   const std::vector<Trajectory>& trajectories);

struct Dataset {
  DatasetHeader header;
  std::vector<Trajectory> trajectories;
};

Dataset read_dataset(const std::string& path);

// Reward min/max over a set of trajectories, widened slightly so the
// normalized targets stay inside (0, 1).
std::pair<double, double> reward_range(const std::vector<Trajectory>& trajs);

struct DatasetSplits {
  std::string train_path, val_path, test_path;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  double u1_fraction = 0;  // empirical confounder marginal over all splits
};

// Generates n sequences and writes <prefix>.train.bin / .val.bin / .test.bin
// with a 5:1:1 split. All three headers carry the reward range of the
// training split so every consumer normalizes identically.
DatasetSplits generate_dataset(EnvKind kind, const ConfoundingSpec& spec,
                               std::size_t n, std::size_t T, std::size_t H,
                               std::size_t W, std::uint64_t seed,
                               const std::string& out_prefix);

}  // namespace drl
