#include "drl/causal.hpp"

#include <cmath>
#include <stdexcept>

namespace drl {

namespace {
constexpr double kRowSumTol = 1e-12;

void check_row(const std::vector<double>& row, const std::string& what) {
  double s = 0;
  for (double p : row) {
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("cpt: probability out of [0,1] in " + what);
    s += p;
  }
  if (std::abs(s - 1.0) > kRowSumTol)
    throw std::invalid_argument("cpt: row of " + what + " sums to " +
                                std::to_string(s) + ", expected 1");
}
}  // namespace

DiscreteCPT::DiscreteCPT(std::vector<double> confounder_probs,
                         std::vector<std::vector<double>> action_probs,
                         std::vector<std::vector<std::vector<double>>> outcome_probs,
                         std::vector<double> outcome_values)
    : p_u_(std::move(confounder_probs)),
      p_a_given_u_(std::move(action_probs)),
      p_y_(std::move(outcome_probs)),
      outcome_values_(std::move(outcome_values)) {
  if (p_u_.empty() || p_a_given_u_.size() != p_u_.size() ||
      p_y_.size() != p_u_.size())
    throw std::invalid_argument("cpt: inconsistent confounder dimension");
  check_row(p_u_, "confounder_probs");
  for (const auto& row : p_a_given_u_) check_row(row, "action_probs");
  for (const auto& per_u : p_y_) {
    if (per_u.size() != n_actions())
      throw std::invalid_argument("cpt: inconsistent action dimension");
    for (const auto& row : per_u) check_row(row, "outcome_probs");
  }
  if (!outcome_values_.empty() && outcome_values_.size() != n_outcomes())
    throw std::invalid_argument("cpt: outcome_values length mismatch");
}

DiscreteCPT DiscreteCPT::from_json(const nlohmann::json& j) {
  return DiscreteCPT(
      j.at("confounder_probs").get<std::vector<double>>(),
      j.at("action_probs").get<std::vector<std::vector<double>>>(),
      j.at("outcome_probs").get<std::vector<std::vector<std::vector<double>>>>(),
      j.value("outcome_values", std::vector<double>{}));
}

nlohmann::json DiscreteCPT::to_json() const {
  nlohmann::json j;
  j["confounder_probs"] = p_u_;
  j["action_probs"] = p_a_given_u_;
  j["outcome_probs"] = p_y_;
  if (!outcome_values_.empty()) j["outcome_values"] = outcome_values_;
  return j;
}

DiscreteCPT DiscreteCPT::benchmark_table() {
  return DiscreteCPT(
      {0.8, 0.2},
      {{0.24, 0.76}, {0.77, 0.23}},
      {{{0.93, 0.07}, {0.87, 0.13}},   // u = 0: rows T1, T2
       {{0.73, 0.27}, {0.69, 0.31}}},  // u = 1
      {-1.0, -200.0});
}

namespace {
// p(u | a) as an unnormalized-then-normalized posterior.
std::vector<double> posterior_u(const DiscreteCPT& cpt, std::size_t a) {
  std::vector<double> post(cpt.n_u());
  double pa = 0;
  for (std::size_t u = 0; u < cpt.n_u(); ++u) {
    post[u] = cpt.p_a_given_u(a, u) * cpt.p_u(u);
    pa += post[u];
  }
  if (pa <= 0.0)
    throw std::domain_error("conditional_query: action " + std::to_string(a) +
                            " never observed (p(a) = 0)");
  for (auto& p : post) p /= pa;
  return post;
}
}  // namespace

double conditional_query(const DiscreteCPT& cpt, std::size_t a, std::size_t y) {
  const auto post = posterior_u(cpt, a);
  double p = 0;
  for (std::size_t u = 0; u < cpt.n_u(); ++u)
    p += cpt.p_y_given_au(y, a, u) * post[u];
  return p;
}

double conditional_expectation(const DiscreteCPT& cpt, std::size_t a) {
  if (cpt.outcome_values().empty())
    throw std::invalid_argument("expectation query requires outcome values");
  const auto post = posterior_u(cpt, a);
  double e = 0;
  for (std::size_t u = 0; u < cpt.n_u(); ++u)
    for (std::size_t y = 0; y < cpt.n_outcomes(); ++y)
      e += cpt.outcome_values()[y] * cpt.p_y_given_au(y, a, u) * post[u];
  return e;
}

double backdoor_adjust(const DiscreteCPT& cpt, std::size_t a, std::size_t y) {
  double p = 0;
  for (std::size_t u = 0; u < cpt.n_u(); ++u)
    p += cpt.p_y_given_au(y, a, u) * cpt.p_u(u);
  return p;
}

double interventional_expectation(const DiscreteCPT& cpt, std::size_t a) {
  if (cpt.outcome_values().empty())
    throw std::invalid_argument("expectation query requires outcome values");
  double e = 0;
  for (std::size_t u = 0; u < cpt.n_u(); ++u)
    for (std::size_t y = 0; y < cpt.n_outcomes(); ++y)
      e += cpt.outcome_values()[y] * cpt.p_y_given_au(y, a, u) * cpt.p_u(u);
  return e;
}

CausalQueryResult simpson_check(const DiscreteCPT& cpt, int outcome_index,
                                bool higher_is_better) {
  if (cpt.n_actions() != 2)
    throw std::invalid_argument("simpson_check: requires exactly two actions");
  CausalQueryResult res;
  for (std::size_t a = 0; a < 2; ++a) {
    if (outcome_index < 0) {
      res.observational.push_back(conditional_expectation(cpt, a));
      res.interventional.push_back(interventional_expectation(cpt, a));
    } else {
      res.observational.push_back(
          conditional_query(cpt, a, static_cast<std::size_t>(outcome_index)));
      res.interventional.push_back(
          backdoor_adjust(cpt, a, static_cast<std::size_t>(outcome_index)));
    }
  }
  auto better = [&](double x, double y) {
    return higher_is_better ? x > y : x < y;
  };
  res.preferred_observational =
      better(res.observational[1], res.observational[0]) ? 1 : 0;
  res.preferred_interventional =
      better(res.interventional[1], res.interventional[0]) ? 1 : 0;

  // Aggregate ordering reversed in every confounder stratum.
  auto stratum_value = [&](std::size_t a, std::size_t u) {
    if (outcome_index >= 0)
      return cpt.p_y_given_au(static_cast<std::size_t>(outcome_index), a, u);
    double e = 0;
    for (std::size_t y = 0; y < cpt.n_outcomes(); ++y)
      e += cpt.outcome_values()[y] * cpt.p_y_given_au(y, a, u);
    return e;
  };
  const std::size_t agg = res.preferred_observational;
  const std::size_t other = 1 - agg;
  bool reversed_everywhere = res.observational[agg] != res.observational[other];
  for (std::size_t u = 0; u < cpt.n_u() && reversed_everywhere; ++u)
    reversed_everywhere = better(stratum_value(other, u), stratum_value(agg, u));

  res.paradox_flag =
      res.preferred_observational != res.preferred_interventional ||
      reversed_everywhere;
  return res;
}

}  // namespace drl
