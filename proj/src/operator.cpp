#include "wcn/operator.hpp"

#include "wcn/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace wcn {

namespace {

constexpr std::uint64_t kOperatorStream = 4;

std::shared_ptr<EquilibriumCache> ensure_cache(std::shared_ptr<EquilibriumCache> cache,
                                               const Scenario& scenario) {
  return cache ? std::move(cache) : std::make_shared<EquilibriumCache>(scenario.access_solver);
}

}  // namespace

RevenueBreakdown operator_revenue(MembershipGame& game, const MixedProfile& membership) {
  const Scenario& sc = game.scenario();
  const std::size_t k = game.subscribers();
  if (static_cast<std::size_t>(membership.size()) != k)
    throw std::invalid_argument("operator_revenue: membership needs one entry per subscriber");
  for (Eigen::Index j = 0; j < membership.size(); ++j) {
    if (!(membership(j) >= 0.0 && membership(j) <= 1.0))
      throw std::invalid_argument("operator_revenue: membership entries must lie in [0, 1]");
  }
  const double delta = sc.pricing.delta;
  RevenueBreakdown out;

  if (sc.expectation.mode == ExpectationMode::Exact) {
    if (k > sc.expectation.exact_population_limit || k >= 63)
      throw std::invalid_argument("operator_revenue: too many subscribers to enumerate");
    PureProfile x(static_cast<Eigen::Index>(k));
    const std::uint64_t profiles = std::uint64_t{1} << k;
    for (std::uint64_t mask = 0; mask < profiles; ++mask) {
      double w = 1.0;
      for (std::size_t j = 0; j < k; ++j) {
        const auto e = static_cast<Eigen::Index>(j);
        x(e) = static_cast<int>(mask >> j & 1U);
        w *= x(e) == 1 ? membership(e) : 1.0 - membership(e);
      }
      if (w == 0.0) continue;
      for (std::size_t owner = 0; owner < k; ++owner) {
        const double collected = game.expected_ap_revenue(owner, x).value;
        const bool bill = x(static_cast<Eigen::Index>(owner)) == 1;
        out.gross_payments += w * collected;
        if (bill) {
          out.bill_shares += w * delta * collected;
          out.operator_revenue += w * (1.0 - delta) * collected;
        } else {
          out.operator_revenue += w * collected;
        }
      }
    }
    out.samples = static_cast<std::size_t>(profiles);
    return out;
  }

  Stream rng(derive_seed(sc.seed, {kOperatorStream}));
  PureProfile x(static_cast<Eigen::Index>(k));
  std::vector<std::size_t> visitors;
  double m2 = 0.0;
  double mean = 0.0;
  const std::size_t n = sc.expectation.sample_count;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto e = static_cast<Eigen::Index>(j);
      x(e) = rng.bernoulli(membership(e)) ? 1 : 0;
    }
    const std::vector<std::size_t> where = game.sample_locations(rng);
    double gross = 0.0;
    double shares = 0.0;
    double kept = 0.0;
    for (std::size_t ap = 1; ap <= k; ++ap) {
      visitors.clear();
      for (std::size_t u = 0; u < where.size(); ++u) {
        if (u != ap - 1 && where[u] == ap) visitors.push_back(u);
      }
      if (visitors.empty()) continue;
      const double collected = game.play_slot(ap, visitors, std::nullopt, x).payments;
      gross += collected;
      if (x(static_cast<Eigen::Index>(ap - 1)) == 1) {
        shares += delta * collected;
        kept += (1.0 - delta) * collected;
      } else {
        kept += collected;
      }
    }
    out.gross_payments += gross;
    out.bill_shares += shares;
    const double d = kept - mean;
    mean += d / static_cast<double>(s + 1);
    m2 += d * (kept - mean);
  }
  out.gross_payments /= static_cast<double>(n);
  out.bill_shares /= static_cast<double>(n);
  out.operator_revenue = mean;
  out.samples = n;
  if (n > 1) out.std_error = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  return out;
}

PricedOutcome evaluate_pricing(const Scenario& scenario, const PricingScheme& pricing,
                               std::shared_ptr<EquilibriumCache> cache,
                               std::optional<MixedProfile> alpha0) {
  Scenario priced = scenario;
  priced.pricing = pricing;
  MembershipGame game(std::move(priced), ensure_cache(std::move(cache), scenario));
  const MixedProfile start =
      alpha0 ? *alpha0 : MixedProfile::Constant(static_cast<Eigen::Index>(game.subscribers()), 0.5);
  PricedOutcome out;
  out.equilibrium = game.solve_mixed_equilibrium(start);
  out.revenue = operator_revenue(game, out.equilibrium.alpha);
  return out;
}

PricedOutcome evaluate_location_pricing(const Scenario& scenario, const std::vector<double>& prices,
                                        double delta, std::shared_ptr<EquilibriumCache> cache) {
  PricingScheme pricing;
  pricing.prices = prices;
  pricing.uniform = std::adjacent_find(prices.begin(), prices.end(), std::not_equal_to<>()) == prices.end();
  pricing.delta = delta;
  pricing.p_max = scenario.pricing.p_max;
  pricing.validate(scenario.subscriber_count());
  return evaluate_pricing(scenario, pricing, std::move(cache));
}

RevenueSurface sweep(const Scenario& scenario, const std::vector<double>& p_grid,
                     const std::vector<double>& delta_grid, const SweepOptions& options,
                     std::shared_ptr<EquilibriumCache> cache) {
  if (p_grid.empty() || delta_grid.empty()) throw std::invalid_argument("sweep: empty grid");
  for (double p : p_grid) {
    if (!(p > 0.0 && p <= scenario.pricing.p_max))
      throw std::invalid_argument("sweep: prices must lie in (0, p_max]");
  }
  for (double d : delta_grid) {
    if (!(d >= 0.0 && d <= 1.0)) throw std::invalid_argument("sweep: delta must lie in [0, 1]");
  }
  cache = ensure_cache(std::move(cache), scenario);

  const std::size_t cells = p_grid.size() * delta_grid.size();
  std::vector<std::size_t> order = options.cell_order;
  if (order.empty()) {
    order.resize(cells);
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  {
    std::vector<std::size_t> check = order;
    std::sort(check.begin(), check.end());
    for (std::size_t c = 0; c < cells; ++c) {
      if (check.size() != cells || check[c] != c)
        throw std::invalid_argument("sweep: cell_order must be a permutation of the cells");
    }
  }

  RevenueSurface surface;
  surface.p_grid = p_grid;
  surface.delta_grid = delta_grid;
  surface.revenue = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(p_grid.size()),
                                              static_cast<Eigen::Index>(delta_grid.size()),
                                              std::numeric_limits<double>::quiet_NaN());
  surface.cells.resize(cells);

  const std::size_t k = scenario.subscriber_count();
  auto run_cell = [&](std::size_t c) {
    const std::size_t pi = c / delta_grid.size();
    const std::size_t di = c % delta_grid.size();
    SweepCell& cell = surface.cells[c];
    try {
      const PricingScheme pricing =
          PricingScheme::single(p_grid[pi], k, delta_grid[di], scenario.pricing.p_max);
      const PricedOutcome out = evaluate_pricing(scenario, pricing, cache);
      cell.valid = true;
      cell.converged = out.equilibrium.converged;
      cell.iterations = out.equilibrium.iterations;
      cell.alpha = out.equilibrium.alpha;
      surface.revenue(static_cast<Eigen::Index>(pi), static_cast<Eigen::Index>(di)) =
          out.revenue.operator_revenue;
    } catch (const std::exception& e) {
      cell.valid = false;
      cell.error = e.what();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, cells));
  if (workers == 1) {
    for (std::size_t c : order) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t n = next.fetch_add(1); n < cells; n = next.fetch_add(1)) run_cell(order[n]);
      });
    }
    for (auto& t : pool) t.join();
  }

  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cells; ++c) {
    if (!surface.cells[c].valid) continue;
    const std::size_t pi = c / delta_grid.size();
    const std::size_t di = c % delta_grid.size();
    const double r = surface.revenue(static_cast<Eigen::Index>(pi), static_cast<Eigen::Index>(di));
    if (r > best) {
      best = r;
      surface.argmax = std::make_pair(pi, di);
    }
  }
  return surface;
}

LocationAssignment best_location_assignment(const Scenario& scenario,
                                            const std::vector<double>& levels, double delta,
                                            std::shared_ptr<EquilibriumCache> cache) {
  const std::size_t k = scenario.subscriber_count();
  if (levels.empty() || levels.size() > 6 || k > 6)
    throw std::invalid_argument("best_location_assignment: supports at most 6 APs and 6 price levels");
  cache = ensure_cache(std::move(cache), scenario);

  LocationAssignment best;
  bool have = false;
  std::vector<std::size_t> digits(k, 0);
  std::vector<double> prices(k);
  while (true) {
    for (std::size_t j = 0; j < k; ++j) prices[j] = levels[digits[j]];
    const PricedOutcome out = evaluate_location_pricing(scenario, prices, delta, cache);
    if (!have || out.revenue.operator_revenue > best.revenue.operator_revenue) {
      best = {prices, out.revenue, out.equilibrium.converged};
      have = true;
    }
    std::size_t pos = k;
    while (pos > 0) {
      --pos;
      if (++digits[pos] < levels.size()) break;
      digits[pos] = 0;
      if (pos == 0) return best;
    }
    if (k == 0) return best;
  }
}

}  // namespace wcn
