#pragma once

// Stage-I membership selection. Expected per-slot payoffs average Stage-II
// equilibria over random presence sets (exactly or by sampling); the pure and
// mixed equilibrium tools sit on top.

#include "wcn/access_game.hpp"
#include "wcn/model.hpp"
#include "wcn/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

namespace wcn {

/// x in {0,1}^K over subscribers; 1 = Bill, 0 = Linus.
using PureProfile = Eigen::VectorXi;
/// alpha in [0,1]^K, the probability of each subscriber being a Bill.
using MixedProfile = Eigen::VectorXd;

/// Expectation value with its Monte-Carlo standard error (0 when exact).
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Probability that exactly `present` (and nobody else outside `excluded`)
/// shows up at AP `ap` (1-based). The AP owner never counts.
double presence_probability(const Eigen::MatrixXd& mobility, std::span<const std::size_t> present,
                            std::size_t ap, std::span<const std::size_t> excluded);

struct PureCheck {
  bool equilibrium = true;
  Eigen::VectorXd gaps;                ///< f_i per subscriber
  std::vector<std::size_t> violators;  ///< subscribers with (2x_i - 1) f_i < 0
};

struct MixedResult {
  MixedProfile alpha;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  double final_gamma = 0.0;
  Eigen::VectorXd v_bill;   ///< V~_i(1, alpha_-i) at the last evaluated profile
  Eigen::VectorXd v_linus;  ///< V~_i(0, alpha_-i)
  std::vector<MixedProfile> trajectory;  ///< alpha^0, alpha^1, ...
};

/// Logistic smoothed best response; clamped to the open interval (0, 1).
double smoothed_choice(double v_bill, double v_linus, double gamma);

/// Expected payoffs of the membership game for one scenario.
///
/// Pure-profile quantities are memoized, so a MembershipGame is cheap to query
/// repeatedly but must not be shared between threads. Stage-II equilibria go
/// through the (thread-safe) EquilibriumCache, which may be shared freely.
class MembershipGame {
 public:
  explicit MembershipGame(Scenario scenario, std::shared_ptr<EquilibriumCache> cache = nullptr);

  const Scenario& scenario() const { return scenario_; }
  std::size_t subscribers() const { return k_; }
  EquilibriumCache& cache() { return *cache_; }

  /// rho_i log(1 + r_i): a subscriber alone on its private channel.
  double home_slot_payoff(std::size_t i) const;

  /// V_{i,k}: expected Stage-II payoff of user i roaming onto AP k != home.
  Estimate away_slot_payoff(std::size_t i, std::size_t ap, const PureProfile& x);

  /// Pi_i: expected Bill/Alien payments collected at subscriber i's AP.
  Estimate expected_ap_revenue(std::size_t owner, const PureProfile& x);

  /// V_i(x_i, x_-i) over the whole horizon; `x_i` overrides x(i).
  Estimate overall_payoff(std::size_t i, int x_i, const PureProfile& x);

  /// f_i = V_i(1, x_-i) - V_i(0, x_-i). Bill is chosen iff f_i >= 0.
  Estimate payoff_gap(std::size_t i, const PureProfile& x);

  PureCheck is_pure_equilibrium(const PureProfile& x);

  /// Every pure equilibrium, by exhaustive scan of {0,1}^K.
  std::vector<PureProfile> pure_equilibria();

  /// Home-probability threshold above which Bill is a best response.
  /// Empty when the Bill/Linus roaming comparison is degenerate (the summed
  /// payoff difference over the other APs is not positive).
  std::optional<double> bill_threshold(std::size_t i, const PureProfile& x);

  /// V~_i(1, alpha_-i) and V~_i(0, alpha_-i).
  std::pair<Estimate, Estimate> mixed_expected_payoffs(std::size_t i, const MixedProfile& alpha);
  Estimate mixed_expected_payoff(std::size_t i, int x_i, const MixedProfile& alpha);
  /// omega_i(alpha_i, alpha_-i).
  double mixed_payoff(std::size_t i, double alpha_i, const MixedProfile& alpha);

  MixedProfile smoothed_best_response_step(const MixedProfile& alpha, double gamma);
  MixedResult solve_mixed_equilibrium(const MixedProfile& alpha0, const MixedSolverConfig& config);
  MixedResult solve_mixed_equilibrium(const MixedProfile& alpha0) {
    return solve_mixed_equilibrium(alpha0, scenario_.mixed_solver);
  }

  /// Stage-II equilibrium payoff of `focal` at AP `ap` when `present` are
  /// the other visitors; also reports the payments collected there.
  struct SlotOutcome {
    double focal_payoff = 0.0;
    double payments = 0.0;
  };
  SlotOutcome play_slot(std::size_t ap, std::span<const std::size_t> present,
                        std::optional<std::size_t> focal, const PureProfile& x);

  /// Draws a location (0 = uncovered, k = AP k) for every user.
  std::vector<std::size_t> sample_locations(Stream& rng) const;

 private:
  PaymentType payment_type(std::size_t user, const PureProfile& x) const;
  std::vector<std::size_t> candidates(std::size_t ap, std::span<const std::size_t> excluded) const;
  void check_profile(const PureProfile& x) const;
  void check_subscriber(std::size_t i, const char* what) const;

  template <typename Fn>
  Estimate expect_over_presence(std::size_t ap, std::span<const std::size_t> excluded,
                                std::uint64_t stream_seed, Fn&& per_set);

  Scenario scenario_;
  std::size_t k_ = 0;
  Eigen::MatrixXd eta_;
  std::shared_ptr<EquilibriumCache> cache_;

  using MemoKey = std::tuple<int, std::size_t, std::size_t, std::vector<int>>;
  std::map<MemoKey, Estimate> memo_;
};

}  // namespace wcn

namespace wcn {

/// Mixed-equilibrium Bill probability of one subscriber over a grid of its
/// access valuation and home probability. The remaining mobility mass is
/// spread over the other locations in proportion to the scenario's row
/// (evenly when that row has no mass away from home).
struct PhaseDiagram {
  std::vector<double> rho_grid;
  std::vector<double> eta_grid;
  Eigen::MatrixXd alpha;  ///< eta_grid x rho_grid
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> converged;
};

Scenario with_home_probability(const Scenario& scenario, std::size_t subscriber, double eta_home);

PhaseDiagram phase_diagram(const Scenario& scenario, std::size_t subscriber,
                           const std::vector<double>& rho_grid, const std::vector<double>& eta_grid,
                           std::size_t threads = 1);

/// Scale for the smoothing temperature: the mean over subscribers of the
/// whole-horizon payoff of staying home, T * rho_i * log(1 + r_i).
double typical_payoff_scale(const Scenario& scenario);

}  // namespace wcn
