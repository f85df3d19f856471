#include "drl/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace drl {

nlohmann::json DatasetHeader::to_json() const {
  return {{"format_version", format_version},
          {"env", to_string(env)},
          {"spec", spec.to_json()},
          {"T", T},
          {"H", H},
          {"W", W},
          {"count", count},
          {"seed", seed},
          {"r_min", r_min},
          {"r_max", r_max}};
}

DatasetHeader DatasetHeader::from_json(const nlohmann::json& j) {
  DatasetHeader h;
  h.format_version = j.at("format_version").get<int>();
  if (h.format_version != DatasetHeader{}.format_version)
    throw std::runtime_error("unsupported dataset format_version " +
                             std::to_string(h.format_version));
  h.env = env_kind_from_string(j.at("env").get<std::string>());
  h.spec = ConfoundingSpec::from_json(j.at("spec"));
  h.T = j.at("T").get<std::size_t>();
  h.H = j.at("H").get<std::size_t>();
  h.W = j.at("W").get<std::size_t>();
  h.count = j.at("count").get<std::size_t>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.r_min = j.at("r_min").get<double>();
  h.r_max = j.at("r_max").get<double>();
  return h;
}

std::pair<double, double> reward_range(const std::vector<Trajectory>& trajs) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& t : trajs)
    for (double r : t.rewards) {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  if (!(lo < hi)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.01 * (hi - lo);
  return {lo - pad, hi + pad};
}

void write_dataset(const std::string& path, DatasetHeader header,
                   const std::vector<Trajectory>& trajectories) {
  header.count = trajectories.size();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << header.to_json().dump() << '\n';
  std::vector<float> fbuf(header.H * header.W);
  for (const auto& traj : trajectories) {
    if (traj.obs.size() != header.T || traj.actions.size() != header.T ||
        traj.rewards.size() != header.T)
      throw std::runtime_error("write_dataset: trajectory length mismatch");
    for (const auto& frame : traj.obs) {
      for (std::size_t i = 0; i < frame.size(); ++i)
        fbuf[i] = static_cast<float>(frame.data[i]);
      out.write(reinterpret_cast<const char*>(fbuf.data()),
                fbuf.size() * sizeof(float));
    }
    out.write(reinterpret_cast<const char*>(traj.actions.data()),
              traj.actions.size() * sizeof(double));
    out.write(reinterpret_cast<const char*>(traj.rewards.data()),
              traj.rewards.size() * sizeof(double));
    out.put(static_cast<char>(traj.u_true));
    out.write(reinterpret_cast<const char*>(&traj.block_start),
              sizeof(traj.block_start));
    out.write(reinterpret_cast<const char*>(&traj.block_row),
              sizeof(traj.block_row));
    out.write(reinterpret_cast<const char*>(&traj.block_col),
              sizeof(traj.block_col));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("dataset missing header: " + path);
  Dataset ds;
  ds.header = DatasetHeader::from_json(nlohmann::json::parse(line));
  const auto& h = ds.header;
  std::vector<float> fbuf(h.H * h.W);
  ds.trajectories.reserve(h.count);
  for (std::size_t i = 0; i < h.count; ++i) {
    Trajectory traj;
    for (std::size_t t = 0; t < h.T; ++t) {
      in.read(reinterpret_cast<char*>(fbuf.data()), fbuf.size() * sizeof(float));
      Tensor frame({h.H, h.W});
      for (std::size_t k = 0; k < fbuf.size(); ++k) frame.data[k] = fbuf[k];
      traj.obs.push_back(std::move(frame));
    }
    traj.actions.resize(h.T);
    traj.rewards.resize(h.T);
    in.read(reinterpret_cast<char*>(traj.actions.data()), h.T * sizeof(double));
    in.read(reinterpret_cast<char*>(traj.rewards.data()), h.T * sizeof(double));
    char u;
    in.get(u);
    traj.u_true = static_cast<std::uint8_t>(u);
    in.read(reinterpret_cast<char*>(&traj.block_start), sizeof(traj.block_start));
    in.read(reinterpret_cast<char*>(&traj.block_row), sizeof(traj.block_row));
    in.read(reinterpret_cast<char*>(&traj.block_col), sizeof(traj.block_col));
    if (!in) throw std::runtime_error("truncated dataset: " + path);
    ds.trajectories.push_back(std::move(traj));
  }
  return ds;
}

DatasetSplits generate_dataset(EnvKind kind, const ConfoundingSpec& spec,
                               std::size_t n, std::size_t T, std::size_t H,
                               std::size_t W, std::uint64_t seed,
                               const std::string& out_prefix) {
  if (n < 7)
    throw std::invalid_argument("generate_dataset: need at least 7 sequences");
  auto all = generate_sequences(kind, spec, n, T, H, W, seed);

  DatasetSplits out;
  out.n_val = n / 7;
  out.n_test = n / 7;
  out.n_train = n - out.n_val - out.n_test;
  std::size_t u1 = 0;
  for (const auto& t : all) u1 += t.u_true;
  out.u1_fraction = static_cast<double>(u1) / n;

  std::vector<Trajectory> train(all.begin(), all.begin() + out.n_train);
  std::vector<Trajectory> val(all.begin() + out.n_train,
                              all.begin() + out.n_train + out.n_val);
  std::vector<Trajectory> test(all.begin() + out.n_train + out.n_val, all.end());

  DatasetHeader h;
  h.env = kind;
  h.spec = spec;
  h.T = T;
  h.H = H;
  h.W = W;
  h.seed = seed;
  std::tie(h.r_min, h.r_max) = reward_range(train);

  out.train_path = out_prefix + ".train.bin";
  out.val_path = out_prefix + ".val.bin";
  out.test_path = out_prefix + ".test.bin";
  write_dataset(out.train_path, h, train);
  write_dataset(out.val_path, h, val);
  write_dataset(out.test_path, h, test);
  return out;
}

}  // namespace drl
