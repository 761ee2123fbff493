#include "wcn/access_game.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>

namespace wcn {

namespace {

double clip01(double v) { return std::min(1.0, std::max(v, 0.0)); }

Eigen::VectorXd others_of(const AccessProfile& profile, std::size_t pos) {
  const Eigen::Index n = profile.size();
  Eigen::VectorXd others(n - 1);
  const auto p = static_cast<Eigen::Index>(pos);
  others.head(p) = profile.head(p);
  others.tail(n - 1 - p) = profile.tail(n - 1 - p);
  return others;
}

void check_profile(const AccessGameInstance& game, const AccessProfile& profile) {
  if (static_cast<std::size_t>(profile.size()) != game.size())
    throw std::invalid_argument("access profile size does not match the roster");
  for (Eigen::Index j = 0; j < profile.size(); ++j) {
    if (!(profile(j) >= 0.0 && profile(j) <= 1.0))
      throw std::invalid_argument("access profile entry outside [0, 1]");
  }
}

double paying_payoff(double rho, double price, double rate, double sigma) {
  return rho * std::log1p(rate * sigma) - price * sigma;
}

}  // namespace

std::size_t AccessGameInstance::index_of(UserId user) const {
  for (std::size_t j = 0; j < players.size(); ++j) {
    if (players[j].id == user) return j;
  }
  throw std::out_of_range("user " + std::to_string(user) + " is not in the roster of AP " +
                          std::to_string(ap_id));
}

void AccessGameInstance::validate() const {
  rate_params.validate();
  if (!(price > 0.0)) throw std::invalid_argument("access game: price must be positive");
  for (std::size_t a = 0; a < players.size(); ++a) {
    if (players[a].id == ap_id)
      throw std::invalid_argument("access game: the AP owner cannot be a player");
    if (!(players[a].rho >= 0.0))
      throw std::invalid_argument("access game: rho must be nonnegative");
    for (std::size_t b = a + 1; b < players.size(); ++b) {
      if (players[a].id == players[b].id)
        throw std::invalid_argument("access game: duplicate user in roster");
    }
  }
}

void AccessSolverConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("access solver: epsilon must be positive");
  if (max_iters < 1) throw std::invalid_argument("access solver: max_iters must be at least 1");
  if (!(damping > 0.0 && damping <= 1.0))
    throw std::invalid_argument("access solver: damping must lie in (0, 1]");
}

double access_payoff_at(const AccessGameInstance& game, std::size_t pos, double sigma_focal,
                        const AccessProfile& profile) {
  if (pos >= game.size()) throw std::out_of_range("access_payoff: focal not in roster");
  if (!(sigma_focal >= 0.0 && sigma_focal <= 1.0))
    throw std::invalid_argument("access_payoff: sigma outside [0, 1]");
  const Player& focal = game.players[pos];
  const double rate = expected_rate(others_of(profile, pos), game.rate_params);
  const double utility = focal.rho * std::log1p(rate * sigma_focal);
  return focal.type == PaymentType::Free ? utility : utility - game.price * sigma_focal;
}

double access_payoff(const AccessGameInstance& game, UserId focal, double sigma_focal,
                     const AccessProfile& profile) {
  return access_payoff_at(game, game.index_of(focal), sigma_focal, profile);
}

double best_response_at(const AccessGameInstance& game, std::size_t pos,
                        const AccessProfile& profile) {
  if (pos >= game.size()) throw std::out_of_range("best_response: focal not in roster");
  const Player& focal = game.players[pos];
  if (focal.type == PaymentType::Free) return 1.0;
  const double rate = expected_rate(others_of(profile, pos), game.rate_params);
  return clip01(focal.rho / game.price - 1.0 / rate);
}

double best_response(const AccessGameInstance& game, UserId focal, const AccessProfile& profile) {
  return best_response_at(game, game.index_of(focal), profile);
}

AccessProfile solo_start(const AccessGameInstance& game) {
  const double solo_rate = per_user_rate(1, game.rate_params);
  AccessProfile start(static_cast<Eigen::Index>(game.size()));
  for (std::size_t j = 0; j < game.size(); ++j) {
    const Player& pl = game.players[j];
    start(static_cast<Eigen::Index>(j)) =
        pl.type == PaymentType::Free ? 1.0 : clip01(pl.rho / game.price - 1.0 / solo_rate);
  }
  return start;
}

AccessProfile best_response_map(const AccessGameInstance& game, const AccessProfile& profile) {
  AccessProfile next(profile.size());
  for (std::size_t j = 0; j < game.size(); ++j)
    next(static_cast<Eigen::Index>(j)) = best_response_at(game, j, profile);
  return next;
}

EquilibriumResult solve_equilibrium(const AccessGameInstance& game,
                                    const AccessSolverConfig& config) {
  game.validate();
  config.validate();

  EquilibriumResult result;
  AccessProfile sigma = config.initial_profile ? *config.initial_profile : solo_start(game);
  check_profile(game, sigma);
  if (config.record_trajectory) result.trajectory.push_back(sigma);
  if (game.size() == 0) {
    result.profile = sigma;
    result.converged = true;
    return result;
  }

  double previous_residual = -1.0;
  for (int it = 1; it <= config.max_iters; ++it) {
    AccessProfile next = best_response_map(game, sigma);
    if (config.damping < 1.0) next = (1.0 - config.damping) * sigma + config.damping * next;
    const double residual = (next - sigma).cwiseAbs().maxCoeff();
    sigma = std::move(next);
    if (config.record_trajectory) result.trajectory.push_back(sigma);
    if (previous_residual > 0.0) result.contraction_estimate = residual / previous_residual;
    previous_residual = residual;
    result.iterations = it;
    result.residual = residual;
    if (residual <= config.epsilon) {
      result.converged = true;
      break;
    }
  }
  result.profile = std::move(sigma);
  return result;
}

AccessProfile solve_two_player(const AccessGameInstance& game) {
  game.validate();
  if (game.size() != 2)
    throw std::invalid_argument("solve_two_player: exactly two players required");

  const double r1 = per_user_rate(1, game.rate_params);
  const double r2 = per_user_rate(2, game.rate_params);
  const Player& a = game.players[0];
  const Player& b = game.players[1];
  const double ratio_a = a.rho / game.price;
  const double ratio_b = b.rho / game.price;

  // Expected rate facing the opponent of a player who connects sigma of the time.
  auto rate_against = [&](double sigma) { return (1.0 - sigma) * r1 + sigma * r2; };
  auto br = [&](double ratio, double opponent) {
    return clip01(ratio - 1.0 / rate_against(opponent));
  };

  AccessProfile out(2);
  const bool free_a = a.type == PaymentType::Free;
  const bool free_b = b.type == PaymentType::Free;
  if (free_a || free_b) {
    out(0) = free_a ? 1.0 : br(ratio_a, 1.0);
    out(1) = free_b ? 1.0 : br(ratio_b, 1.0);
    return out;
  }

  // A player whose best response is pinned for every opponent strategy.
  auto pinned = [&](double ratio) -> std::optional<double> {
    if (ratio - 1.0 / r1 < 0.0) return 0.0;
    if (ratio - 1.0 / r2 > 1.0) return 1.0;
    return std::nullopt;
  };
  if (const auto pa = pinned(ratio_a)) {
    out(0) = *pa;
    out(1) = br(ratio_b, *pa);
    return out;
  }
  if (const auto pb = pinned(ratio_b)) {
    out(1) = *pb;
    out(0) = br(ratio_a, *pb);
    return out;
  }

  // Interior: s -> br_a(br_b(s)) is nondecreasing, so g(s) = br_a(br_b(s)) - s
  // has g(0) >= 0 >= g(1) and bisection brackets the fixed point.
  auto g = [&](double s) { return br(ratio_a, br(ratio_b, s)) - s; };
  double lo = 0.0;
  double hi = 1.0;
  if (g(lo) <= 0.0) {
    hi = lo;
  } else if (g(hi) >= 0.0) {
    lo = hi;
  } else {
    while (hi - lo > 1e-15) {
      const double mid = 0.5 * (lo + hi);
      if (g(mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
  }
  out(0) = 0.5 * (lo + hi);
  out(1) = br(ratio_b, out(0));
  return out;
}

double verify_equilibrium(const AccessGameInstance& game, const AccessProfile& profile,
                          double grid_step) {
  game.validate();
  check_profile(game, profile);
  if (!(grid_step > 0.0 && grid_step <= 1.0))
    throw std::invalid_argument("verify_equilibrium: grid_step must lie in (0, 1]");

  const auto points = static_cast<long>(std::ceil(1.0 / grid_step - 1e-12));
  double worst = 0.0;
  for (std::size_t j = 0; j < game.size(); ++j) {
    const Player& pl = game.players[j];
    const double rate = expected_rate(others_of(profile, j), game.rate_params);
    const double price = pl.type == PaymentType::Free ? 0.0 : game.price;
    const double current = paying_payoff(pl.rho, price, rate, profile(static_cast<Eigen::Index>(j)));
    for (long m = 0; m <= points; ++m) {
      const double s = std::min(1.0, static_cast<double>(m) * grid_step);
      worst = std::max(worst, paying_payoff(pl.rho, price, rate, s) - current);
    }
  }
  return worst;
}

EquilibriumCache::EquilibriumCache(AccessSolverConfig config) : config_(std::move(config)) {
  config_.validate();
  config_.initial_profile.reset();
  config_.record_trajectory = false;
}

std::size_t EquilibriumCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

EquilibriumCache::Solved EquilibriumCache::solve(const AccessGameInstance& game) {
  const std::size_t n = game.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto tag = [&](std::size_t j) {
    return std::pair<int, double>(game.players[j].type == PaymentType::Free ? 0 : 1,
                                  game.players[j].rho);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return tag(x) < tag(y); });

  Key key;
  key.roster.reserve(n);
  for (std::size_t j : order) key.roster.push_back(tag(j));
  key.price = game.price;
  key.tau = game.rate_params.tau;
  key.payload = game.rate_params.payload_bits;
  key.backoff = game.rate_params.backoff_slot_us;
  key.collision = game.rate_params.collision_slot_us;
  key.success = game.rate_params.success_slot_us;

  auto unsort = [&](const Entry& e) {
    Solved out{AccessProfile(static_cast<Eigen::Index>(n)), e.converged};
    for (std::size_t s = 0; s < n; ++s)
      out.profile(static_cast<Eigen::Index>(order[s])) = e.sorted_profile(static_cast<Eigen::Index>(s));
    return out;
  };

  {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return unsort(it->second);
  }

  AccessGameInstance sorted = game;
  for (std::size_t s = 0; s < n; ++s) sorted.players[s] = game.players[order[s]];
  const EquilibriumResult solved = solve_equilibrium(sorted, config_);
  misses_.fetch_add(1);
  if (!solved.converged) non_converged_.fetch_add(1);

  std::unique_lock lock(mutex_);
  auto [it, inserted] = entries_.try_emplace(std::move(key), Entry{solved.profile, solved.converged});
  return unsort(it->second);
}

}  // namespace wcn
