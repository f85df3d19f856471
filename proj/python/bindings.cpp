// Python bindings for the main operations: causal table queries, confounded
// data generation, interventional reward estimation, and the sequential
// latent-variable model.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "drl/agents.hpp"
#include "drl/causal.hpp"
#include "drl/dataset.hpp"
#include "drl/deconfound.hpp"
#include "drl/envs.hpp"
#include "drl/model.hpp"

namespace py = pybind11;
using namespace drl;

namespace {

py::array_t<double> frame_to_array(const Tensor& t) {
  py::array_t<double> arr({t.shape[0], t.shape[1]});
  std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
  return arr;
}

py::dict trajectory_to_dict(const Trajectory& t) {
  py::dict d;
  py::list frames;
  for (const auto& f : t.obs) frames.append(frame_to_array(f));
  d["frames"] = frames;
  d["actions"] = t.actions;
  d["rewards"] = t.rewards;
  d["u"] = static_cast<int>(t.u_true);
  d["block_start"] = static_cast<int>(t.block_start);
  d["block_row"] = static_cast<int>(t.block_row);
  d["block_col"] = static_cast<int>(t.block_col);
  return d;
}

Trajectory trajectory_from_dict(const py::dict& d) {
  Trajectory t;
  for (auto f : d["frames"].cast<py::list>()) {
    auto arr = f.cast<py::array_t<double>>();
    if (arr.ndim() != 2) throw std::invalid_argument("frame must be 2-D");
    Tensor frame({static_cast<std::size_t>(arr.shape(0)),
                  static_cast<std::size_t>(arr.shape(1))});
    std::copy(arr.data(), arr.data() + arr.size(), frame.data.begin());
    t.obs.push_back(std::move(frame));
  }
  t.actions = d["actions"].cast<std::vector<double>>();
  t.rewards = d["rewards"].cast<std::vector<double>>();
  if (d.contains("u")) t.u_true = static_cast<std::uint8_t>(d["u"].cast<int>());
  return t;
}

DiscreteCPT cpt_from_optional_json(const std::string& json_text) {
  if (json_text.empty()) return DiscreteCPT::benchmark_table();
  return DiscreteCPT::from_json(nlohmann::json::parse(json_text));
}

// Thin training/inference wrapper so Python sees plain dicts and arrays
// instead of autodiff graph types.
class PyModel {
 public:
  PyModel(const std::string& config_json, std::uint64_t seed)
      : model_(ModelConfig::from_json(nlohmann::json::parse(config_json)),
               seed) {}
  explicit PyModel(DeconModel m) : model_(std::move(m)) {}

  std::string config_json() const { return model_.config().to_json().dump(); }

  py::dict elbo(const std::vector<py::dict>& trajs, std::uint64_t seed) const {
    std::vector<Trajectory> owned;
    std::vector<const Trajectory*> ptrs;
    for (const auto& d : trajs) owned.push_back(trajectory_from_dict(d));
    for (const auto& t : owned) ptrs.push_back(&t);
    RandomStream rng(seed);
    auto res = model_.elbo(model_.make_batch(ptrs), rng);
    const auto& b = res.breakdown;
    py::dict out;
    out["recon_x"] = b.recon_x;
    out["recon_a"] = b.recon_a;
    out["recon_r"] = b.recon_r;
    out["kl_u"] = b.kl_u;
    out["kl_z1"] = b.kl_z1;
    out["kl_z_transitions"] = b.kl_z_transitions;
    out["total"] = b.total;
    return out;
  }

  std::vector<double> train(const std::vector<py::dict>& trajs,
                            std::size_t epochs, double lr, std::size_t batch,
                            std::uint64_t seed) {
    std::vector<Trajectory> data;
    for (const auto& d : trajs) data.push_back(trajectory_from_dict(d));
    if (data.size() < batch)
      throw std::invalid_argument("train: need at least one full batch");
    auto params = model_.parameters();
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(p.var);
    Adam opt(lr);
    RandomStream rng(seed);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> losses;
    for (std::size_t e = 0; e < epochs; ++e) {
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.index(i)]);
      double total = 0;
      std::size_t n = 0;
      for (std::size_t s = 0; s + batch <= order.size(); s += batch) {
        std::vector<const Trajectory*> ptrs;
        for (std::size_t k = 0; k < batch; ++k) ptrs.push_back(&data[order[s + k]]);
        Var loss = model_.loss_drl(model_.make_batch(ptrs), rng);
        total += loss->value.data[0];
        ++n;
        zero_grad(vars);
        backward(loss);
        opt.step(params);
      }
      losses.push_back(total / n);
    }
    return losses;
  }

  std::vector<py::array_t<double>> reconstruct(const py::dict& traj,
                                               std::uint64_t seed) const {
    RandomStream rng(seed);
    std::vector<py::array_t<double>> out;
    for (const auto& f : model_.reconstruct(trajectory_from_dict(traj), rng))
      out.push_back(frame_to_array(f));
    return out;
  }

  py::dict counterfactual(const py::array_t<double>& frame,
                          const std::vector<double>& actions,
                          std::size_t horizon, std::uint64_t seed) const {
    Tensor f({static_cast<std::size_t>(frame.shape(0)),
              static_cast<std::size_t>(frame.shape(1))});
    std::copy(frame.data(), frame.data() + frame.size(), f.data.begin());
    RandomStream rng(seed);
    const auto roll = model_.counterfactual(f, actions, horizon, rng);
    py::dict out;
    py::list frames;
    for (const auto& img : roll.frames) frames.append(frame_to_array(img));
    out["frames"] = frames;
    out["actions"] = roll.actions;
    out["rewards"] = roll.rewards;
    out["a_hat"] = roll.a_hat;
    out["r_hat"] = roll.r_hat;
    return out;
  }

  std::vector<double> infer_u_mean(const py::dict& traj) const {
    const Tensor m = model_.infer_u(trajectory_from_dict(traj)).mean->value;
    return m.data;
  }

  py::dict do_reward(const py::array_t<double>& z, double a, std::size_t n,
                     const std::string& source, std::uint64_t seed) const {
    Tensor zt({1, static_cast<std::size_t>(z.size())});
    std::copy(z.data(), z.data() + z.size(), zt.data.begin());
    LearnedRewardModel rm(model_);
    RandomStream rng(seed);
    USource src = USource::prior;
    if (source == "posterior")
      throw std::invalid_argument("posterior source needs evidence; use prior");
    if (source == "exact_enumeration") src = USource::exact_enumeration;
    auto est = do_reward_mc(rm, zt, a, n, src, rng);
    py::dict out;
    out["mean"] = est.mean;
    out["std_error"] = est.std_error;
    out["n_samples"] = est.n_samples;
    return out;
  }

  void save(const std::string& path) const { model_.save(path); }
  static PyModel load(const std::string& path) {
    return PyModel(DeconModel::load(path));
  }

 private:
  DeconModel model_;
};

}  // namespace

PYBIND11_MODULE(_drl, m) {
  m.doc() = "deconfounded sequential decision-making toolkit";

  m.def(
      "causal_query",
      [](const std::string& cpt_json, int outcome_index) {
        const DiscreteCPT cpt = cpt_from_optional_json(cpt_json);
        const CausalQueryResult r = simpson_check(cpt, outcome_index);
        py::dict out;
        out["observational"] = r.observational;
        out["interventional"] = r.interventional;
        out["preferred_observational"] = r.preferred_observational;
        out["preferred_interventional"] = r.preferred_interventional;
        out["paradox_flag"] = r.paradox_flag;
        return out;
      },
      py::arg("cpt_json") = std::string(), py::arg("outcome_index") = -1,
      "Conditional vs backdoor-adjusted queries on a discrete CPT "
      "(defaults to the bundled benchmark table).");

  m.def(
      "generate_sequences",
      [](const std::string& kind, std::size_t n, std::size_t T, std::size_t H,
         std::size_t W, std::uint64_t seed, double noise_prob) {
        ConfoundingSpec spec;
        spec.noise_prob = noise_prob;
        py::list out;
        for (const auto& t : generate_sequences(env_kind_from_string(kind),
                                                spec, n, T, H, W, seed))
          out.append(trajectory_to_dict(t));
        return out;
      },
      py::arg("kind"), py::arg("n"), py::arg("T") = 5, py::arg("H") = 16,
      py::arg("W") = 16, py::arg("seed") = 0, py::arg("noise_prob") = 0.2,
      "Confounded observational sequences for pendulum, cartpole, or glyph.");

  m.def(
      "oracle_do_reward",
      [](const std::string& kind, double a) {
        OracleRewardModel oracle(ConfoundingSpec{}, env_kind_from_string(kind));
        return do_reward_exact(oracle, Tensor({1, 1}, 0.0), a);
      },
      py::arg("kind"), py::arg("a"),
      "Exact interventional expected extra reward from the benchmark table.");

  m.def(
      "oracle_conditional_reward",
      [](const std::string& kind, double a) {
        OracleRewardModel oracle(ConfoundingSpec{}, env_kind_from_string(kind));
        RandomStream rng(0);
        return conditional_reward(oracle, Tensor({1, 1}, 0.0), a, nullptr, 1, rng);
      },
      py::arg("kind"), py::arg("a"),
      "Exact observational expected extra reward from the benchmark table.");

  m.def(
      "oracle_do_reward_mc",
      [](const std::string& kind, double a, std::size_t n, std::uint64_t seed) {
        OracleRewardModel oracle(ConfoundingSpec{}, env_kind_from_string(kind));
        RandomStream rng(seed);
        auto est = do_reward_mc(oracle, Tensor({1, 1}, 0.0), a, n,
                                USource::prior, rng);
        py::dict out;
        out["mean"] = est.mean;
        out["std_error"] = est.std_error;
        out["n_samples"] = est.n_samples;
        return out;
      },
      py::arg("kind"), py::arg("a"), py::arg("n") = 1000, py::arg("seed") = 0,
      "Monte-Carlo interventional reward with prior confounder draws.");

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&, std::uint64_t>(),
           py::arg("config_json") = std::string("{}"), py::arg("seed") = 0)
      .def("config_json", &PyModel::config_json)
      .def("elbo", &PyModel::elbo, py::arg("trajectories"), py::arg("seed") = 0)
      .def("train", &PyModel::train, py::arg("trajectories"),
           py::arg("epochs") = 1, py::arg("lr") = 1e-3, py::arg("batch") = 16,
           py::arg("seed") = 0)
      .def("reconstruct", &PyModel::reconstruct, py::arg("trajectory"),
           py::arg("seed") = 0)
      .def("counterfactual", &PyModel::counterfactual, py::arg("frame"),
           py::arg("actions"), py::arg("horizon") = 1, py::arg("seed") = 0)
      .def("infer_u_mean", &PyModel::infer_u_mean, py::arg("trajectory"))
      .def("do_reward", &PyModel::do_reward, py::arg("z"), py::arg("a"),
           py::arg("n") = 100, py::arg("source") = "prior", py::arg("seed") = 0)
      .def("save", &PyModel::save, py::arg("path"))
      .def_static("load", &PyModel::load, py::arg("path"));
}
