#pragma once

// Network access game among the visitors of one AP in one slot.

#include "wcn/rate_model.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <utility>
#include <vector>

namespace wcn {

using UserId = std::size_t;

/// Free for a Linus subscriber; Paying for a Bill subscriber or an Alien.
enum class PaymentType { Free, Paying };

struct Player {
  UserId id{};
  PaymentType type = PaymentType::Paying;
  double rho = 0.0;  ///< access valuation
};

struct AccessGameInstance {
  UserId ap_id{};
  std::vector<Player> players;  ///< the AP owner never appears here
  double price = 1.0;
  RateParams rate_params = RateParams::ieee80211g();

  std::size_t size() const { return players.size(); }
  /// Roster position of `user`; throws std::out_of_range if absent.
  std::size_t index_of(UserId user) const;
  void validate() const;
};

/// Connection-time fractions, aligned with AccessGameInstance::players.
using AccessProfile = Eigen::VectorXd;

struct AccessSolverConfig {
  double epsilon = 1e-9;
  int max_iters = 10000;
  double damping = 1.0;  ///< 1 is the plain synchronous best-response map
  std::optional<AccessProfile> initial_profile;
  bool record_trajectory = false;

  void validate() const;
};

struct EquilibriumResult {
  AccessProfile profile;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  ///< max coordinate change of the last sweep
  /// Ratio of the last two sweep residuals, when at least two sweeps moved.
  std::optional<double> contraction_estimate;
  std::vector<AccessProfile> trajectory;  ///< sigma^0, sigma^1, ... if recorded
};

/// Payoff of `focal` playing `sigma_focal` while the rest of the roster plays
/// `profile` (the focal entry of `profile` is ignored).
double access_payoff(const AccessGameInstance& game, UserId focal, double sigma_focal,
                     const AccessProfile& profile);

/// Same, addressed by roster position.
double access_payoff_at(const AccessGameInstance& game, std::size_t pos, double sigma_focal,
                        const AccessProfile& profile);

double best_response(const AccessGameInstance& game, UserId focal, const AccessProfile& profile);
double best_response_at(const AccessGameInstance& game, std::size_t pos,
                        const AccessProfile& profile);

/// Everyone's best response against an empty channel.
AccessProfile solo_start(const AccessGameInstance& game);

/// One synchronous sweep sigma -> T(sigma).
AccessProfile best_response_map(const AccessGameInstance& game, const AccessProfile& profile);

/// Best-response iteration until the max coordinate change drops to epsilon.
/// Non-convergence is reported in the result, never thrown.
EquilibriumResult solve_equilibrium(const AccessGameInstance& game,
                                    const AccessSolverConfig& config = {});

/// Closed-form equilibrium of a two-player game (Free players pinned first,
/// boundary cases, then the interior fixed point by bisection).
AccessProfile solve_two_player(const AccessGameInstance& game);

/// Largest unilateral payoff gain found by scanning each player's deviations
/// over a grid of [0, 1] with the given step.
double verify_equilibrium(const AccessGameInstance& game, const AccessProfile& profile,
                          double grid_step);

/// Thread-safe memo of solved access games. Keys ignore player identity: the
/// equilibrium only depends on the multiset of (payment type, rho), the price
/// and the rate parameters.
class EquilibriumCache {
 public:
  explicit EquilibriumCache(AccessSolverConfig config = {});

  struct Solved {
    AccessProfile profile;  ///< aligned with the queried roster order
    bool converged = true;
  };

  Solved solve(const AccessGameInstance& game);

  const AccessSolverConfig& config() const { return config_; }
  std::size_t size() const;
  std::size_t misses() const { return misses_.load(); }
  std::size_t non_converged() const { return non_converged_.load(); }

 private:
  struct Key {
    std::vector<std::pair<int, double>> roster;
    double price;
    double tau, payload, backoff, collision, success;
    auto operator<=>(const Key&) const = default;
  };
  struct Entry {
    AccessProfile sorted_profile;
    bool converged;
  };

  AccessSolverConfig config_;
  mutable std::shared_mutex mutex_;
  std::map<Key, Entry> entries_;
  std::atomic<std::size_t> misses_{0};
  std::atomic<std::size_t> non_converged_{0};
};

}  // namespace wcn
