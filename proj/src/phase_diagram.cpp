#include "wcn/membership_game.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace wcn {

Scenario with_home_probability(const Scenario& scenario, std::size_t subscriber, double eta_home) {
  if (subscriber >= scenario.subscriber_count())
    throw std::invalid_argument("with_home_probability: not a subscriber");
  if (!(eta_home >= 0.0 && eta_home <= 1.0))
    throw std::invalid_argument("with_home_probability: probability outside [0, 1]");
  Scenario out = scenario;
  Eigen::VectorXd& row = out.users[subscriber].mobility;
  const auto home = static_cast<Eigen::Index>(subscriber + 1);
  const double away = row.sum() - row(home);
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    if (c == home) continue;
    row(c) = away > 0.0 ? row(c) * (1.0 - eta_home) / away
                        : (1.0 - eta_home) / static_cast<double>(row.size() - 1);
  }
  row(home) = eta_home;
  return out;
}

PhaseDiagram phase_diagram(const Scenario& scenario, std::size_t subscriber,
                           const std::vector<double>& rho_grid, const std::vector<double>& eta_grid,
                           std::size_t threads) {
  if (rho_grid.empty() || eta_grid.empty()) throw std::invalid_argument("phase_diagram: empty grid");
  const auto rows = static_cast<Eigen::Index>(eta_grid.size());
  const auto cols = static_cast<Eigen::Index>(rho_grid.size());
  PhaseDiagram out{rho_grid, eta_grid, Eigen::MatrixXd::Zero(rows, cols),
                   Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false)};
  auto cache = std::make_shared<EquilibriumCache>(scenario.access_solver);
  const std::size_t k = scenario.subscriber_count();

  auto run_cell = [&](std::size_t c) {
    const std::size_t r = c / rho_grid.size();
    const std::size_t q = c % rho_grid.size();
    Scenario cell = with_home_probability(scenario, subscriber, eta_grid[r]);
    cell.users[subscriber].rho = rho_grid[q];
    MembershipGame game(std::move(cell), cache);
    const MixedResult res = game.solve_mixed_equilibrium(
        MixedProfile::Constant(static_cast<Eigen::Index>(k), 0.5));
    out.alpha(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) =
        res.alpha(static_cast<Eigen::Index>(subscriber));
    out.converged(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) = res.converged;
  };

  const std::size_t cells = eta_grid.size() * rho_grid.size();
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, cells));
  if (workers == 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next.fetch_add(1); c < cells; c = next.fetch_add(1)) {
          try {
            run_cell(c);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  return out;
}

double typical_payoff_scale(const Scenario& scenario) {
  const std::size_t k = scenario.subscriber_count();
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    total += scenario.users[i].rho * std::log1p(scenario.home_rate(i));
  return scenario.time_slots * total / static_cast<double>(k);
}

}  // namespace wcn
