#pragma once

// Population, pricing and solver settings shared by the Stage-I, operator
// and scenario-file layers.

#include "wcn/access_game.hpp"
#include "wcn/rate_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wcn {

enum class Role { Subscriber, Alien };

struct UserProfile {
  std::string id;
  Role role = Role::Alien;
  double rho = 0.0;
  std::optional<double> home_rate;  ///< private-channel rate; subscribers only
  /// [eta_0 (uncovered), eta_1, ..., eta_K] over the K subscriber APs.
  Eigen::VectorXd mobility;

  bool is_subscriber() const { return role == Role::Subscriber; }
};

struct PricingScheme {
  std::vector<double> prices;  ///< one per AP; all equal when uniform
  bool uniform = true;
  double delta = 0.5;
  double p_max = 1.0;

  static PricingScheme single(double price, std::size_t aps, double delta, double p_max);
  double at(std::size_t ap) const;  ///< ap is 1-based
  void validate(std::size_t aps) const;
};

enum class ExpectationMode { Exact, MonteCarlo };

struct ExpectationConfig {
  ExpectationMode mode = ExpectationMode::Exact;
  std::size_t sample_count = 10000;
  std::size_t exact_population_limit = 12;

  void validate() const;
};

struct MixedSolverConfig {
  double gamma = 0.01;
  double tol = 1e-6;
  int max_iters = 10000;
  /// Geometric annealing gamma_t = max(gamma * beta^t, gamma_min) when set;
  /// convergence is only declared once gamma_min is reached.
  std::optional<double> anneal_beta;
  double gamma_min = 0.0;

  void validate() const;
};

/// A whole community network. Subscribers come first: users[k - 1] owns AP k.
struct Scenario {
  RateParams rate_params = RateParams::ieee80211g();
  std::vector<UserProfile> users;
  double time_slots = 1.0;
  PricingScheme pricing;
  AccessSolverConfig access_solver;
  MixedSolverConfig mixed_solver;
  ExpectationConfig expectation;
  std::uint64_t seed = 0;

  std::size_t subscriber_count() const;
  std::size_t user_count() const { return users.size(); }
  /// Index of the user with the given id; throws std::out_of_range.
  std::size_t find_user(const std::string& id) const;
  /// Users x (K + 1) matrix of mobility rows.
  Eigen::MatrixXd mobility_matrix() const;
  /// Private-channel rate of a subscriber (defaults to the solo public rate).
  double home_rate(std::size_t user) const;

  /// Checks every invariant; throws ValidationError naming the violation.
  void validate() const;
};

/// Scenario invariant violation (distinct from malformed input).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace wcn
