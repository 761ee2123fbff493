#include <doctest.h>

#include "support.hpp"

#include <wcn/access_game.hpp>

#include <random>
#include <thread>

using namespace wcn;

namespace {

AccessGameInstance two_paying(double rho1, double rho2, double price) {
  AccessGameInstance g;
  g.ap_id = 0;
  g.price = price;
  g.players = {{1, PaymentType::Paying, rho1}, {2, PaymentType::Paying, rho2}};
  return g;
}

// Best response by brute force over a fine grid of sigma.
double grid_best_response(const AccessGameInstance& g, std::size_t pos, const AccessProfile& s) {
  double best = -1e300, arg = 0.0;
  for (int k = 0; k <= 100000; ++k) {
    const double x = k / 100000.0;
    if (double v = access_payoff_at(g, pos, x, s); v > best) best = v, arg = x;
  }
  return arg;
}

}  // namespace

TEST_CASE("access payoff") {
  const auto params = RateParams::ieee80211g();
  AccessGameInstance g;
  g.price = 0.7;
  g.players = {{1, PaymentType::Free, 1.0}, {2, PaymentType::Paying, 0.0}};
  const AccessProfile s = AccessProfile::Zero(2);
  CHECK(access_payoff(g, 1, 0.0, s) == 0.0);
  CHECK(access_payoff(g, 1, 1.0, s) == doctest::Approx(2.723702884227979).epsilon(1e-12));
  CHECK(access_payoff(g, 2, 0.4, s) == doctest::Approx(-0.7 * 0.4));
  const AccessProfile busy = AccessProfile::Ones(2);
  CHECK(access_payoff(g, 1, 1.0, busy) ==
        doctest::Approx(std::log1p(per_user_rate(2, params))).epsilon(1e-12));
  CHECK_THROWS(access_payoff(g, 9, 0.5, s));
  CHECK_THROWS(access_payoff(g, 1, 1.5, s));
}

TEST_CASE("best response") {
  std::mt19937_64 gen(3);
  SUBCASE("free players always saturate") {
    AccessGameInstance g;
    g.players = {{1, PaymentType::Free, 0.0}, {2, PaymentType::Paying, 1.0}};
    CHECK(best_response(g, 1, AccessProfile::Ones(2)) == 1.0);
  }
  SUBCASE("zero valuation stays off") {
    AccessGameInstance g = two_paying(0.0, 1.0, 0.5);
    CHECK(best_response(g, 1, AccessProfile::Zero(2)) == 0.0);
  }
  SUBCASE("cheap access saturates") {
    AccessGameInstance g = two_paying(1.0, 1.0, 0.01);
    CHECK(best_response(g, 1, AccessProfile::Zero(2)) == 1.0);
  }
  SUBCASE("interior optimum agrees with a fine grid") {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
      AccessGameInstance g = testing::random_game(gen, 3, false);
      AccessProfile s(3);
      for (auto& v : s) v = u(gen);
      for (std::size_t pos = 0; pos < 3; ++pos)
        CHECK(best_response_at(g, pos, s) == doctest::Approx(grid_best_response(g, pos, s)).epsilon(2e-5));
    }
  }
}

TEST_CASE("best response monotonicity") {
  const AccessProfile mid = AccessProfile::Constant(2, 0.4);
  double prev = -1.0;
  for (double rho = 0.0; rho <= 2.0; rho += 0.05) {
    const double br = best_response(two_paying(rho, 1.0, 0.8), 1, mid);
    CHECK(br >= prev);
    prev = br;
  }
  prev = 2.0;
  for (double p = 0.05; p <= 3.0; p += 0.05) {
    const double br = best_response(two_paying(1.0, 1.0, p), 1, mid);
    CHECK(br <= prev);
    prev = br;
  }
  prev = 2.0;
  for (double o = 0.0; o <= 1.0; o += 0.05) {
    AccessProfile s(2);
    s << 0.3, o;
    const double br = best_response(two_paying(0.2, 1.0, 1.0), 1, s);
    CHECK(br <= prev + 1e-15);
    prev = br;
  }
}

TEST_CASE("solve_equilibrium") {
  SUBCASE("all free") {
    AccessGameInstance g;
    g.players = {{1, PaymentType::Free, 0.3}, {2, PaymentType::Free, 0.0}, {3, PaymentType::Free, 1.0}};
    const auto res = solve_equilibrium(g);
    CHECK(res.converged);
    CHECK(res.profile == AccessProfile::Ones(3));
    CHECK(res.iterations <= 2);
  }
  SUBCASE("single paying player") {
    AccessGameInstance g;
    g.price = 0.5;
    g.players = {{1, PaymentType::Paying, 0.4}};
    const auto res = solve_equilibrium(g);
    const double r1 = per_user_rate(1, g.rate_params);
    CHECK(res.profile(0) == doctest::Approx(std::clamp(0.4 / 0.5 - 1.0 / r1, 0.0, 1.0)));
  }
  SUBCASE("fixed point and free players saturate") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 40; ++trial) {
      const AccessGameInstance g = testing::random_game(gen, 2 + trial % 5);
      const auto res = solve_equilibrium(g);
      REQUIRE(res.converged);
      CHECK((best_response_map(g, res.profile) - res.profile).cwiseAbs().maxCoeff() <= 1e-8);
      for (std::size_t j = 0; j < g.size(); ++j)
        if (g.players[j].type == PaymentType::Free) CHECK(res.profile(static_cast<Eigen::Index>(j)) == 1.0);
      CHECK(verify_equilibrium(g, res.profile, 1e-3) <= 1e-4);
    }
  }
  SUBCASE("damped iteration reaches the same point") {
    std::mt19937_64 gen(6);
    for (int trial = 0; trial < 20; ++trial) {
      const AccessGameInstance g = testing::random_game(gen, 2 + trial % 5);
      AccessSolverConfig damped;
      damped.damping = 0.5;
      const auto a = solve_equilibrium(g);
      const auto b = solve_equilibrium(g, damped);
      REQUIRE(b.converged);
      CHECK((a.profile - b.profile).cwiseAbs().maxCoeff() <= 1e-7);
    }
  }
  SUBCASE("iteration cap is reported, not thrown") {
    AccessSolverConfig cfg;
    cfg.max_iters = 1;
    cfg.epsilon = 1e-15;
    const auto res = solve_equilibrium(two_paying(0.6, 0.5, 1.0), cfg);
    CHECK_FALSE(res.converged);
    CHECK(res.iterations == 1);
  }
  SUBCASE("trajectory and contraction estimate") {
    AccessSolverConfig cfg;
    cfg.record_trajectory = true;
    cfg.epsilon = 1e-13;
    const auto res = solve_equilibrium(two_paying(0.6, 0.5, 1.0), cfg);
    REQUIRE(res.converged);
    CHECK(res.trajectory.size() == static_cast<std::size_t>(res.iterations) + 1);
    REQUIRE(res.contraction_estimate);
    CHECK(*res.contraction_estimate <= contraction_constant(RateParams::ieee80211g()) + 1e-9);
  }
  SUBCASE("initial profile is honoured") {
    AccessSolverConfig cfg;
    cfg.record_trajectory = true;
    cfg.initial_profile = AccessProfile::Constant(2, 0.123);
    const auto res = solve_equilibrium(two_paying(0.6, 0.5, 1.0), cfg);
    CHECK(res.trajectory.front()(0) == 0.123);
  }
}

TEST_CASE("instance validation") {
  AccessGameInstance g = two_paying(1.0, 1.0, 1.0);
  g.players.push_back({0, PaymentType::Paying, 1.0});  // the owner
  CHECK_THROWS(g.validate());
  g = two_paying(1.0, 1.0, 1.0);
  g.players[1].id = 1;
  CHECK_THROWS(g.validate());
  g = two_paying(-1.0, 1.0, 1.0);
  CHECK_THROWS(g.validate());
  g = two_paying(1.0, 1.0, -0.5);
  CHECK_THROWS(g.validate());
}

TEST_CASE("two-player closed form") {
  SUBCASE("free plus paying") {
    AccessGameInstance g = two_paying(0.9, 0.9, 0.6);
    g.players[0].type = PaymentType::Free;
    const AccessProfile s = solve_two_player(g);
    const double r2 = per_user_rate(2, g.rate_params);
    CHECK(s(0) == 1.0);
    CHECK(s(1) == doctest::Approx(std::clamp(0.9 / 0.6 - 1.0 / r2, 0.0, 1.0)).epsilon(1e-12));
  }
  SUBCASE("both priced out") {
    const AccessProfile s = solve_two_player(two_paying(0.01, 0.02, 1.0));
    CHECK(s(0) == 0.0);
    CHECK(s(1) == 0.0);
  }
  SUBCASE("agrees with the grid oracle") {
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 15; ++trial) {
      const AccessGameInstance g = testing::random_game(gen, 2);
      const AccessProfile closed = solve_two_player(g);
      const Eigen::Vector2d grid = testing::grid_two_player(g);
      CHECK((closed - grid).cwiseAbs().maxCoeff() <= 1e-6);
      CHECK((closed - solve_equilibrium(g).profile).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
  SUBCASE("needs exactly two players") {
    AccessGameInstance g = two_paying(1, 1, 1);
    g.players.push_back({3, PaymentType::Paying, 1.0});
    CHECK_THROWS(solve_two_player(g));
  }
}

TEST_CASE("verify_equilibrium") {
  const AccessGameInstance g = two_paying(0.6, 0.5, 1.0);
  const AccessProfile eq = solve_equilibrium(g).profile;
  CHECK(verify_equilibrium(g, eq, 1e-3) <= 1e-4);
  AccessProfile off = eq;
  off(0) = std::clamp(off(0) - 0.3, 0.0, 1.0);
  CHECK(verify_equilibrium(g, off, 1e-3) > 1e-3);
  CHECK_THROWS(verify_equilibrium(g, eq, 0.0));
}

TEST_CASE("equilibrium cache") {
  auto cache = std::make_shared<EquilibriumCache>();
  AccessGameInstance g;
  g.price = 0.4;
  g.players = {{1, PaymentType::Paying, 0.9}, {2, PaymentType::Free, 0.5}, {3, PaymentType::Paying, 0.3}};
  const auto a = cache->solve(g);
  CHECK(a.converged);
  CHECK((a.profile - solve_equilibrium(g).profile).cwiseAbs().maxCoeff() <= 1e-9);

  // Same multiset under different ids and order hits the cache.
  AccessGameInstance h = g;
  h.ap_id = 7;
  h.players = {{11, PaymentType::Paying, 0.3}, {12, PaymentType::Paying, 0.9}, {13, PaymentType::Free, 0.5}};
  const auto b = cache->solve(h);
  CHECK(cache->misses() == 1);
  CHECK(b.profile(0) == a.profile(2));
  CHECK(b.profile(1) == a.profile(0));
  CHECK(b.profile(2) == a.profile(1));

  h.price = 0.5;
  cache->solve(h);
  CHECK(cache->misses() == 2);
  CHECK(cache->size() == 2);

  std::vector<std::thread> pool;
  std::mt19937_64 gen(2);
  std::vector<AccessGameInstance> games;
  for (int i = 0; i < 16; ++i) games.push_back(testing::random_game(gen, 3));
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&] {
      for (const auto& game : games) cache->solve(game);
    });
  for (auto& th : pool) th.join();
  CHECK(cache->size() == 18);
}
