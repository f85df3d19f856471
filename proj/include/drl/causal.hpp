#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace drl {

// Finite conditional probability tables for the confounder -> action,
// confounder -> outcome structure. Immutable after construction; all
// queries are pure.
class DiscreteCPT {
 public:
  DiscreteCPT(std::vector<double> confounder_probs,
              std::vector<std::vector<double>> action_probs,
              std::vector<std::vector<std::vector<double>>> outcome_probs,
              std::vector<double> outcome_values = {});

  std::size_t n_u() const { return p_u_.size(); }
  std::size_t n_actions() const { return p_a_given_u_[0].size(); }
  std::size_t n_outcomes() const { return p_y_[0][0].size(); }

  double p_u(std::size_t u) const { return p_u_[u]; }
  double p_a_given_u(std::size_t a, std::size_t u) const { return p_a_given_u_[u][a]; }
  double p_y_given_au(std::size_t y, std::size_t a, std::size_t u) const {
    return p_y_[u][a][y];
  }
  const std::vector<double>& outcome_values() const { return outcome_values_; }

  static DiscreteCPT from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // The kidney-stone style benchmark table used throughout: binary
  // confounder, two action categories, two reward components valued -1
  // and -200.
  static DiscreteCPT benchmark_table();

 private:
  std::vector<double> p_u_;
  std::vector<std::vector<double>> p_a_given_u_;        // [u][a]
  std::vector<std::vector<std::vector<double>>> p_y_;   // [u][a][y]
  std::vector<double> outcome_values_;
};

// p(y | a) via Bayes over the confounder. Throws if p(a) = 0.
double conditional_query(const DiscreteCPT& cpt, std::size_t a, std::size_t y);
// E[value(Y) | a]; requires outcome values.
double conditional_expectation(const DiscreteCPT& cpt, std::size_t a);

// p(y | do(a)) = sum_u p(y|a,u) p(u); defined for never-observed actions.
double backdoor_adjust(const DiscreteCPT& cpt, std::size_t a, std::size_t y);
double interventional_expectation(const DiscreteCPT& cpt, std::size_t a);

struct CausalQueryResult {
  std::vector<double> observational;   // per action
  std::vector<double> interventional;  // per action
  std::size_t preferred_observational = 0;
  std::size_t preferred_interventional = 0;
  bool paradox_flag = false;
};

// Binary-action Simpson check. outcome_index < 0 selects expectation mode.
// higher_is_better fixes the comparison direction; argmax ties break toward
// the lowest action index.
CausalQueryResult simpson_check(const DiscreteCPT& cpt, int outcome_index = -1,
                                bool higher_is_better = true);

}  // namespace drl
