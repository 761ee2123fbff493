#pragma once

// Operator-side economics: expected per-slot revenue at a membership
// equilibrium, (p, delta) grid sweeps and location-dependent price vectors.

#include "wcn/membership_game.hpp"
#include "wcn/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wcn {

/// Per-slot expected money flows. Payments by Bills and Aliens at every AP
/// are gross; Bill owners receive delta of what their AP collects; the rest
/// (including everything collected at Linus APs) stays with the operator.
struct RevenueBreakdown {
  double gross_payments = 0.0;
  double bill_shares = 0.0;
  double operator_revenue = 0.0;
  double std_error = 0.0;  ///< of operator_revenue; 0 when exact
  std::size_t samples = 0;
};

/// Expected revenue when memberships are drawn from `membership` (pure
/// profiles are the 0/1 special case).
RevenueBreakdown operator_revenue(MembershipGame& game, const MixedProfile& membership);

struct PricedOutcome {
  MixedResult equilibrium;
  RevenueBreakdown revenue;
};

/// Solves the mixed membership equilibrium under `pricing` and evaluates the
/// operator's revenue there.
PricedOutcome evaluate_pricing(const Scenario& scenario, const PricingScheme& pricing,
                               std::shared_ptr<EquilibriumCache> cache = nullptr,
                               std::optional<MixedProfile> alpha0 = std::nullopt);

/// Same pipeline with price p_k at AP k.
PricedOutcome evaluate_location_pricing(const Scenario& scenario, const std::vector<double>& prices,
                                        double delta,
                                        std::shared_ptr<EquilibriumCache> cache = nullptr);

struct SweepCell {
  bool valid = false;
  bool converged = false;
  int iterations = 0;
  MixedProfile alpha;
  std::string error;
};

struct RevenueSurface {
  std::vector<double> p_grid;
  std::vector<double> delta_grid;
  Eigen::MatrixXd revenue;       ///< p_grid x delta_grid; NaN for invalid cells
  std::vector<SweepCell> cells;  ///< row-major (p outer, delta inner)
  std::optional<std::pair<std::size_t, std::size_t>> argmax;

  const SweepCell& cell(std::size_t pi, std::size_t di) const {
    return cells[pi * delta_grid.size() + di];
  }
};

struct SweepOptions {
  std::size_t threads = 1;
  /// Evaluation order of row-major cell indices; identity when empty. The
  /// assembled surface does not depend on it.
  std::vector<std::size_t> cell_order;
};

RevenueSurface sweep(const Scenario& scenario, const std::vector<double>& p_grid,
                     const std::vector<double>& delta_grid, const SweepOptions& options = {},
                     std::shared_ptr<EquilibriumCache> cache = nullptr);

struct LocationAssignment {
  std::vector<double> prices;
  RevenueBreakdown revenue;
  bool converged = false;
};

/// Tries every assignment of `levels` to the APs (at most 6 APs x 6 levels)
/// and returns the best; ties keep the lexicographically first assignment.
LocationAssignment best_location_assignment(const Scenario& scenario,
                                            const std::vector<double>& levels, double delta,
                                            std::shared_ptr<EquilibriumCache> cache = nullptr);

}  // namespace wcn
