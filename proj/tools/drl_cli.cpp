// Pipeline front end: dataset generation, model and policy training,
// evaluation, reconstruction / counterfactual dumps, and causal table
// queries. Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "drl/agents.hpp"
#include "drl/config.hpp"
#include "drl/dataset.hpp"
#include "drl/deconfound.hpp"
#include "drl/model.hpp"

namespace {

using namespace drl;

std::uint64_t effective_seed(std::uint64_t config_seed) {
  if (const char* env = std::getenv("DRL_SEED")) return std::stoull(env);
  return config_seed;
}

USource parse_u_source(const std::string& s) {
  if (s == "prior") return USource::prior;
  if (s == "posterior") return USource::posterior;
  if (s == "exact") return USource::exact_enumeration;
  throw std::invalid_argument("unknown u_source: " + s);
}

ModelConfig model_config_from(const RunConfig& rc, const DatasetHeader& h,
                              bool include_u) {
  ModelConfig mc;
  mc.dims.H = h.H;
  mc.dims.W = h.W;
  mc.dims.T = h.T;
  mc.dims.D_z = rc.model.D_z;
  mc.dims.D_u = rc.model.D_u;
  mc.include_u = include_u;
  mc.include_action_likelihood = rc.model.action_likelihood;
  mc.action_uses_z = rc.model.action_uses_z;
  mc.hidden = rc.model.hidden;
  mc.rnn_hidden = rc.model.rnn_hidden;
  mc.conv_layers = rc.model.conv_layers;
  mc.action_bound = action_bound(h.env);
  mc.r_min = h.r_min;
  mc.r_max = h.r_max;
  mc.validate();
  return mc;
}

void write_pgm(const std::string& path, const Tensor& frame) {
  if (frame.shape.size() != 2)
    throw std::runtime_error("pgm: expected an HxW frame");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P5\n" << frame.cols() << " " << frame.rows() << "\n255\n";
  for (double v : frame.data) {
    const double c = std::clamp(v, 0.0, 1.0);
    out.put(static_cast<char>(static_cast<int>(c * 255.0 + 0.5)));
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << j.dump(2) << '\n';
}

PolicyConfig policy_config_from(const RunConfig& rc) {
  PolicyConfig pc;
  pc.hidden = rc.policy.hidden;
  pc.gamma = rc.policy.gamma;
  pc.lr = rc.policy.lr;
  pc.batch = rc.policy.batch;
  pc.replay_capacity = rc.policy.replay_capacity;
  pc.update_every = rc.policy.update_every;
  pc.entropy_coef = rc.policy.entropy_coef;
  pc.reward_scale = rc.policy.reward_scale;
  pc.critic_warmup = rc.policy.critic_warmup;
  return pc;
}

void write_train_logs(const std::string& prefix,
                      const std::vector<TrainLogRow>& log) {
  // Timing goes to a separate file so the main log is byte-stable across
  // reruns with the same seed.
  std::ofstream csv(prefix + ".log.csv");
  std::ofstream timing(prefix + ".timing.csv");
  if (!csv || !timing)
    throw std::runtime_error("cannot write training logs: " + prefix);
  csv << "episode,total_reward,moving_avg,opt_action_freq\n";
  timing << "episode,wall_ms\n";
  csv.precision(17);
  for (const auto& row : log) {
    csv << row.episode << ',' << row.total_reward << ',' << row.moving_avg
        << ',' << row.opt_action_freq << '\n';
    timing << row.episode << ',' << row.wall_ms << '\n';
  }
}

int cmd_gen_data(const std::string& config_path, const std::string& out) {
  RunConfig rc = RunConfig::load(config_path);
  const std::uint64_t seed = effective_seed(rc.env.seed);
  rc.env.seed = seed;
  rc.write_sidecar(out + ".resolved.json");
  DatasetSplits s = generate_dataset(rc.env.kind, rc.env.spec,
                                     rc.env.n_sequences, rc.env.T, rc.env.H,
                                     rc.env.W, seed, out);
  std::cout << "train=" << s.n_train << " val=" << s.n_val
            << " test=" << s.n_test << " p(u=1)_empirical=" << s.u1_fraction
            << "\n";
  return 0;
}

int cmd_train_model(const std::string& config_path, const std::string& data,
                    const std::string& variant, const std::string& out) {
  RunConfig rc = RunConfig::load(config_path);
  const std::string var = variant.empty() ? rc.model.variant : variant;
  if (var != "decon" && var != "alt")
    throw std::invalid_argument("variant must be decon or alt");
  rc.model.variant = var;
  const std::uint64_t seed = effective_seed(rc.env.seed);
  rc.env.seed = seed;
  rc.write_sidecar(out + ".resolved.json");

  Dataset ds = read_dataset(data);
  ModelConfig mc = model_config_from(rc, ds.header, var == "decon");
  DeconModel model(mc, seed);
  auto params = model.parameters();
  std::vector<Var> vars;
  for (const auto& p : params) vars.push_back(p.var);
  Adam opt(rc.model.lr);
  RandomStream rng(seed ^ 0x7261696eULL);

  std::ofstream csv(out + ".loss.csv");
  if (!csv) throw std::runtime_error("cannot write loss csv");
  csv << "epoch,recon_x,recon_a,recon_r,kl_u,kl_z1,kl_z_transitions,aux_a,"
         "aux_r,total,loss\n";
  csv.precision(17);

  std::vector<std::size_t> order(ds.trajectories.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 1; epoch <= rc.model.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.index(i)]);
    ElboBreakdown sum;
    double loss_sum = 0;
    std::size_t n_seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += rc.model.batch) {
      std::vector<const Trajectory*> batch;
      for (std::size_t i = start;
           i < std::min(order.size(), start + rc.model.batch); ++i)
        batch.push_back(&ds.trajectories[order[i]]);
      ModelBatch mb = model.make_batch(batch);
      zero_grad(vars);
      ElboBreakdown bd;
      Var loss = model.loss_drl(mb, rng, &bd);
      backward(loss);
      opt.step(params);
      const std::size_t B = batch.size();
      sum.recon_x += bd.recon_x * B;
      sum.recon_a += bd.recon_a * B;
      sum.recon_r += bd.recon_r * B;
      sum.kl_u += bd.kl_u * B;
      sum.kl_z1 += bd.kl_z1 * B;
      sum.kl_z_transitions += bd.kl_z_transitions * B;
      sum.aux_a += bd.aux_a * B;
      sum.aux_r += bd.aux_r * B;
      sum.total += bd.total * B;
      loss_sum += loss->value.data[0] * B;
      n_seen += B;
    }
    const double n = static_cast<double>(n_seen);
    csv << epoch << ',' << sum.recon_x / n << ',' << sum.recon_a / n << ','
        << sum.recon_r / n << ',' << sum.kl_u / n << ',' << sum.kl_z1 / n
        << ',' << sum.kl_z_transitions / n << ',' << sum.aux_a / n << ','
        << sum.aux_r / n << ',' << sum.total / n << ',' << loss_sum / n
        << '\n';
    std::cout << "epoch " << epoch << " loss " << loss_sum / n << "\n";
  }
  model.save(out + ".model.bin");
  return 0;
}

int cmd_train_policy(const std::string& config_path,
                     const std::string& model_path, bool oracle,
                     const std::string& algo, const std::string& data,
                     const std::string& out) {
  RunConfig rc = RunConfig::load(config_path);
  const std::uint64_t seed = effective_seed(rc.env.seed);
  rc.env.seed = seed;
  if (algo != "vanilla" && algo != "direct" && algo != "decon")
    throw std::invalid_argument("algo must be vanilla, direct, or decon");
  rc.write_sidecar(out + ".resolved.json");
  PolicyConfig pc = policy_config_from(rc);

  TrainResult res = [&] {
    if (algo == "direct") {
      if (model_path.empty() || data.empty())
        throw std::invalid_argument(
            "direct algo needs --model (state encoder) and --data");
      DeconModel m = DeconModel::load(model_path);
      Dataset ds = read_dataset(data);
      return train_ac_direct(m, ds.trajectories, ds.header.env,
                             rc.policy.episodes, rc.policy.steps, pc, seed);
    }
    if (oracle) {
      OracleEnvSource env(rc.env.spec, rc.env.kind,
                          algo == "decon" ? OracleRewardMode::exact_do
                                          : OracleRewardMode::exact_conditional);
      return train_ac(env, rc.policy.episodes, rc.policy.steps, pc, seed);
    }
    if (model_path.empty() || data.empty())
      throw std::invalid_argument(
          "model-based training needs --model and --data (or pass --oracle)");
    DeconModel m = DeconModel::load(model_path);
    if (algo == "decon" && !m.config().include_u)
      throw std::invalid_argument(
          "decon algo needs a checkpoint trained with the confounder "
          "(variant=decon); this one is variant=alt");
    if (algo == "vanilla" && m.config().include_u)
      throw std::invalid_argument(
          "vanilla algo expects a confounder-free checkpoint (variant=alt); "
          "this one is variant=decon");
    Dataset ds = read_dataset(data);
    ModelEnvSource env(m, std::move(ds.trajectories), algo == "decon",
                       rc.policy.n_u, parse_u_source(rc.policy.u_source));
    return train_ac(env, rc.policy.episodes, rc.policy.steps, pc, seed);
  }();

  res.policy.save(out + ".policy.bin");
  write_train_logs(out, res.log);
  double tail = 0;
  const std::size_t n_tail = std::min<std::size_t>(50, res.log.size());
  for (std::size_t i = res.log.size() - n_tail; i < res.log.size(); ++i)
    tail += res.log[i].opt_action_freq;
  std::cout << "episodes=" << res.log.size()
            << " final50_opt_freq=" << tail / n_tail << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& policy_path,
             const std::string& model_path, bool oracle,
             const std::string& data, std::size_t episodes, std::size_t steps,
             std::uint64_t seed, const std::string& out) {
  RunConfig rc =
      config_path.empty() ? RunConfig() : RunConfig::load(config_path);
  seed = effective_seed(seed ? seed : rc.env.seed);
  Policy policy = Policy::load(policy_path);

  EvalReport rep = [&] {
    if (oracle) {
      OracleEnvSource env(rc.env.spec, rc.env.kind, OracleRewardMode::sampled,
                          policy.config().z_dim);
      return evaluate(policy, env, episodes, steps, seed);
    }
    if (model_path.empty() || data.empty())
      throw std::invalid_argument("eval needs --oracle or --model with --data");
    DeconModel m = DeconModel::load(model_path);
    Dataset ds = read_dataset(data);
    ModelEnvSource env(m, std::move(ds.trajectories),
                       /*deconfounding=*/false, rc.policy.n_u,
                       parse_u_source(rc.policy.u_source));
    return evaluate(policy, env, episodes, steps, seed);
  }();

  nlohmann::json j = rep.to_json();
  j["format_version"] = 1;
  j["episodes"] = episodes;
  j["steps"] = steps;
  j["seed"] = seed;
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    write_json_file(out + ".eval.json", j);
    if (!config_path.empty()) rc.write_sidecar(out + ".resolved.json");
  }
  return 0;
}

int cmd_counterfactual(const std::string& model_path, const std::string& data,
                       std::size_t frame_index, std::size_t horizon,
                       std::vector<double> actions, std::uint64_t seed,
                       const std::string& out) {
  DeconModel m = DeconModel::load(model_path);
  Dataset ds = read_dataset(data);
  if (frame_index >= ds.trajectories.size())
    throw std::invalid_argument("frame index out of range");
  const Tensor& frame0 = ds.trajectories[frame_index].obs.at(0);
  Tensor flat({1, frame0.size()}, frame0.data);
  RandomStream rng(effective_seed(seed));
  auto roll = m.counterfactual(flat, std::move(actions), horizon, rng);

  write_pgm(out + ".input.pgm", frame0);
  for (std::size_t h = 0; h < roll.frames.size(); ++h)
    write_pgm(out + ".cf_" + std::to_string(h + 1) + ".pgm", roll.frames[h]);
  nlohmann::json j = {{"format_version", 1},
                      {"a_hat", roll.a_hat},
                      {"r_hat", roll.r_hat},
                      {"actions", roll.actions},
                      {"rewards", roll.rewards},
                      {"frames_written", roll.frames.size() + 1}};
  write_json_file(out + ".json", j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_reconstruct(const std::string& model_path, const std::string& data,
                    std::size_t index, std::uint64_t seed,
                    const std::string& out) {
  DeconModel m = DeconModel::load(model_path);
  Dataset ds = read_dataset(data);
  if (index >= ds.trajectories.size())
    throw std::invalid_argument("sequence index out of range");
  RandomStream rng(effective_seed(seed));
  auto frames = m.reconstruct(ds.trajectories[index], rng);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    write_pgm(out + ".input_" + std::to_string(t + 1) + ".pgm",
              ds.trajectories[index].obs[t]);
    write_pgm(out + ".recon_" + std::to_string(t + 1) + ".pgm", frames[t]);
  }
  nlohmann::json j = {{"format_version", 1},
                      {"input_count", ds.trajectories[index].obs.size()},
                      {"recon_count", frames.size()}};
  write_json_file(out + ".json", j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_causal_query(const std::string& cpt_path, int outcome,
                     const std::string& mode, const std::string& out) {
  DiscreteCPT cpt = [&] {
    if (cpt_path.empty()) return DiscreteCPT::benchmark_table();
    std::ifstream in(cpt_path);
    if (!in) throw std::invalid_argument("cannot open CPT file: " + cpt_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("CPT parse error: " + std::string(e.what()));
    }
    try {
      return DiscreteCPT::from_json(j);
    } catch (const std::exception& e) {
      throw std::invalid_argument("invalid CPT: " + std::string(e.what()));
    }
  }();

  nlohmann::json j = {{"format_version", 1}, {"mode", mode}};
  if (mode == "cond" || mode == "do") {
    std::vector<double> vals;
    for (std::size_t a = 0; a < cpt.n_actions(); ++a) {
      if (outcome < 0)
        vals.push_back(mode == "cond" ? conditional_expectation(cpt, a)
                                      : interventional_expectation(cpt, a));
      else
        vals.push_back(
            mode == "cond"
                ? conditional_query(cpt, a, static_cast<std::size_t>(outcome))
                : backdoor_adjust(cpt, a, static_cast<std::size_t>(outcome)));
    }
    j["per_action"] = vals;
  } else if (mode == "simpson") {
    CausalQueryResult r = simpson_check(cpt, outcome);
    j["observational"] = r.observational;
    j["interventional"] = r.interventional;
    j["preferred_observational"] = r.preferred_observational;
    j["preferred_interventional"] = r.preferred_interventional;
    j["paradox_flag"] = r.paradox_flag;
  } else {
    throw std::invalid_argument("mode must be cond, do, or simpson");
  }
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) write_json_file(out, j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"confounded-pixels pipeline"};
  app.require_subcommand(1);
  std::string workdir;
  app.add_option("--workdir", workdir, "base directory for all paths");

  std::function<int()> action;

  {
    auto* c = app.add_subcommand("gen-data", "generate dataset splits");
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--config", *config, "run config JSON")->required();
    c->add_option("--out", *out, "output path prefix")->required();
    c->callback([=, &action] {
      action = [=] { return cmd_gen_data(*config, *out); };
    });
  }
  {
    auto* c = app.add_subcommand("train-model", "train a generative model");
    auto config = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto variant = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--config", *config)->required();
    c->add_option("--data", *data, "training dataset file")->required();
    c->add_option("--variant", *variant, "decon | alt (default from config)");
    c->add_option("--out", *out)->required();
    c->callback([=, &action] {
      action = [=] { return cmd_train_model(*config, *data, *variant, *out); };
    });
  }
  {
    auto* c = app.add_subcommand("train-policy", "train an actor-critic");
    auto config = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto oracle = std::make_shared<bool>(false);
    auto algo = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--config", *config)->required();
    c->add_option("--model", *model, "model checkpoint");
    c->add_flag("--oracle", *oracle, "use the exact-table environment");
    c->add_option("--algo", *algo, "vanilla | direct | decon")->required();
    c->add_option("--data", *data, "sequences for start states / direct AC");
    c->add_option("--out", *out)->required();
    c->callback([=, &action] {
      action = [=] {
        return cmd_train_policy(*config, *model, *oracle, *algo, *data, *out);
      };
    });
  }
  {
    auto* c = app.add_subcommand("eval", "evaluate a trained policy");
    auto config = std::make_shared<std::string>();
    auto policy = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto oracle = std::make_shared<bool>(false);
    auto data = std::make_shared<std::string>();
    auto episodes = std::make_shared<std::size_t>(100);
    auto steps = std::make_shared<std::size_t>(50);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out = std::make_shared<std::string>();
    c->add_option("--config", *config);
    c->add_option("--policy", *policy)->required();
    c->add_option("--model", *model);
    c->add_flag("--oracle", *oracle);
    c->add_option("--data", *data);
    c->add_option("--episodes", *episodes);
    c->add_option("--steps", *steps);
    c->add_option("--seed", *seed);
    c->add_option("--out", *out);
    c->callback([=, &action] {
      action = [=] {
        return cmd_eval(*config, *policy, *model, *oracle, *data, *episodes,
                        *steps, *seed, *out);
      };
    });
  }
  {
    auto* c = app.add_subcommand("counterfactual", "rollout from one frame");
    auto model = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto frame_index = std::make_shared<std::size_t>(0);
    auto horizon = std::make_shared<std::size_t>(3);
    auto actions = std::make_shared<std::vector<double>>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out = std::make_shared<std::string>();
    c->add_option("--model", *model)->required();
    c->add_option("--data", *data)->required();
    c->add_option("--frame-index", *frame_index);
    c->add_option("--horizon", *horizon);
    c->add_option("--action", *actions, "forced actions (repeatable)");
    c->add_option("--seed", *seed);
    c->add_option("--out", *out)->required();
    c->callback([=, &action] {
      action = [=] {
        return cmd_counterfactual(*model, *data, *frame_index, *horizon,
                                  *actions, *seed, *out);
      };
    });
  }
  {
    auto* c = app.add_subcommand("reconstruct", "reconstruct a sequence");
    auto model = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto index = std::make_shared<std::size_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out = std::make_shared<std::string>();
    c->add_option("--model", *model)->required();
    c->add_option("--data", *data)->required();
    c->add_option("--index", *index);
    c->add_option("--seed", *seed);
    c->add_option("--out", *out)->required();
    c->callback([=, &action] {
      action = [=] { return cmd_reconstruct(*model, *data, *index, *seed, *out); };
    });
  }
  {
    auto* c = app.add_subcommand("causal-query", "query a discrete CPT");
    auto cpt = std::make_shared<std::string>();
    auto outcome = std::make_shared<int>(-1);
    auto mode = std::make_shared<std::string>("simpson");
    auto out = std::make_shared<std::string>();
    c->add_option("--cpt", *cpt, "CPT JSON (default: bundled table)");
    c->add_option("--outcome", *outcome, "outcome index; -1 for expectations");
    c->add_option("--mode", *mode, "cond | do | simpson");
    c->add_option("--out", *out);
    c->callback([=, &action] {
      action = [=] { return cmd_causal_query(*cpt, *outcome, *mode, *out); };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!workdir.empty()) std::filesystem::current_path(workdir);
    return action();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
