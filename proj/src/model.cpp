#include "wcn/model.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace wcn {

PricingScheme PricingScheme::single(double price, std::size_t aps, double delta, double p_max) {
  PricingScheme s;
  s.prices.assign(aps, price);
  s.uniform = true;
  s.delta = delta;
  s.p_max = p_max;
  return s;
}

double PricingScheme::at(std::size_t ap) const {
  if (ap == 0 || ap > prices.size()) throw std::out_of_range("no price for AP " + std::to_string(ap));
  return prices[ap - 1];
}

void PricingScheme::validate(std::size_t aps) const {
  if (prices.size() != aps)
    throw ValidationError("pricing: expected " + std::to_string(aps) + " prices, got " +
                          std::to_string(prices.size()));
  if (!(p_max > 0.0)) throw ValidationError("pricing: p_max must be positive");
  for (std::size_t k = 0; k < prices.size(); ++k) {
    if (!(prices[k] > 0.0 && prices[k] <= p_max))
      throw ValidationError("pricing: price at AP " + std::to_string(k + 1) +
                            " must lie in (0, p_max]");
  }
  if (!(delta >= 0.0 && delta <= 1.0)) throw ValidationError("pricing: delta must lie in [0, 1]");
}

void ExpectationConfig::validate() const {
  if (sample_count < 1) throw ValidationError("expectation: sample_count must be at least 1");
}

void MixedSolverConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw ValidationError("mixed solver: gamma must be positive and finite");
  if (!(tol > 0.0)) throw ValidationError("mixed solver: tol must be positive");
  if (max_iters < 1) throw ValidationError("mixed solver: max_iters must be at least 1");
  if (anneal_beta && !(*anneal_beta > 0.0 && *anneal_beta < 1.0))
    throw ValidationError("mixed solver: anneal_beta must lie in (0, 1)");
  if (!(gamma_min >= 0.0)) throw ValidationError("mixed solver: gamma_min must be nonnegative");
  if (anneal_beta && !(gamma_min > 0.0))
    throw ValidationError("mixed solver: annealing needs a positive gamma_min");
}

std::size_t Scenario::subscriber_count() const {
  std::size_t k = 0;
  while (k < users.size() && users[k].is_subscriber()) ++k;
  return k;
}

std::size_t Scenario::find_user(const std::string& id) const {
  for (std::size_t j = 0; j < users.size(); ++j) {
    if (users[j].id == id) return j;
  }
  throw std::out_of_range("unknown user '" + id + "'");
}

Eigen::MatrixXd Scenario::mobility_matrix() const {
  const auto k = static_cast<Eigen::Index>(subscriber_count());
  Eigen::MatrixXd eta(static_cast<Eigen::Index>(users.size()), k + 1);
  for (std::size_t j = 0; j < users.size(); ++j) eta.row(static_cast<Eigen::Index>(j)) = users[j].mobility.transpose();
  return eta;
}

double Scenario::home_rate(std::size_t user) const {
  const UserProfile& u = users.at(user);
  if (!u.is_subscriber()) throw std::invalid_argument("user '" + u.id + "' has no home AP");
  return u.home_rate ? *u.home_rate : per_user_rate(1, rate_params);
}

void Scenario::validate() const {
  try {
    rate_params.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  const std::size_t k = subscriber_count();
  if (k == 0) throw ValidationError("scenario: at least one subscriber is required");
  for (std::size_t j = k; j < users.size(); ++j) {
    if (users[j].is_subscriber())
      throw ValidationError("scenario: subscribers must precede aliens (user '" + users[j].id + "')");
  }
  if (!(time_slots > 0.0)) throw ValidationError("scenario: time_slots must be positive");

  std::set<std::string> ids;
  for (const UserProfile& u : users) {
    if (u.id.empty()) throw ValidationError("scenario: empty user id");
    if (!ids.insert(u.id).second) throw ValidationError("scenario: duplicate user id '" + u.id + "'");
    if (!(u.rho >= 0.0) || !std::isfinite(u.rho))
      throw ValidationError("user '" + u.id + "': rho must be finite and nonnegative");
    if (static_cast<std::size_t>(u.mobility.size()) != k + 1)
      throw ValidationError("user '" + u.id + "': mobility row needs " + std::to_string(k + 1) +
                            " entries, got " + std::to_string(u.mobility.size()));
    for (Eigen::Index c = 0; c < u.mobility.size(); ++c) {
      if (!(u.mobility(c) >= 0.0 && u.mobility(c) <= 1.0))
        throw ValidationError("user '" + u.id + "': mobility entries must lie in [0, 1]");
    }
    const double total = u.mobility.sum();
    if (std::abs(total - 1.0) > 1e-9)
      throw ValidationError("user '" + u.id + "': mobility row sums to " + std::to_string(total) +
                            ", not 1");
    if (u.is_subscriber()) {
      if (u.home_rate && !(*u.home_rate > 0.0))
        throw ValidationError("user '" + u.id + "': home_rate must be positive");
    } else if (u.home_rate) {
      throw ValidationError("user '" + u.id + "': aliens have no home_rate");
    }
  }
  pricing.validate(k);
  try {
    access_solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  mixed_solver.validate();
  expectation.validate();
}

}  // namespace wcn
