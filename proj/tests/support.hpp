#pragma once
// Scenario builders and independent reference computations shared by the
// unit and acceptance tests.

#include <wcn/access_game.hpp>
#include <wcn/model.hpp>
#include <wcn/rate_model.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace wcn::testing {

/// Long-double evaluation of the per-user rate, written out term by term.
inline long double reference_rate(unsigned n) {
  const long double tau = 0.0765L, L = 8192.0L, tb = 28.0L;
  const long double tc = 85.7L + 8192.0L / 54.0L, ts = tc;
  const long double idle_n = std::pow(1.0L - tau, static_cast<long double>(n));
  const long double one = tau * std::pow(1.0L - tau, static_cast<long double>(n - 1));
  const long double collide = (1.0L - idle_n) - n * one;
  return one * L / (idle_n * tb + collide * tc + n * one * ts);
}

/// P(exactly n of the others are active) by walking all 2^m subsets.
inline Eigen::VectorXd brute_force_occupancy(const Eigen::VectorXd& sigma) {
  const auto m = static_cast<std::size_t>(sigma.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m + 1));
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    double p = 1.0;
    int count = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double s = sigma(static_cast<Eigen::Index>(j));
      if (mask >> j & 1U) {
        p *= s;
        ++count;
      } else {
        p *= 1.0 - s;
      }
    }
    out(count) += p;
  }
  return out;
}

/// Ternary search of a concave function on [0, 1].
template <typename F>
double concave_argmax(F&& f) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
    if (f(a) < f(b)) lo = a; else hi = b;
  }
  return 0.5 * (lo + hi);
}

/// Two-player equilibrium from a coarse grid on the fixed-point residual,
/// refined by successive zooming. Best responses come from ternary search.
inline Eigen::Vector2d grid_two_player(const AccessGameInstance& g) {
  const double r1 = per_user_rate(1, g.rate_params), r2 = per_user_rate(2, g.rate_params);
  auto br = [&](std::size_t i, double other) {
    const Player& pl = g.players[i];
    if (pl.type == PaymentType::Free) return 1.0;
    const double rbar = (1.0 - other) * r1 + other * r2;
    return concave_argmax([&](double s) { return pl.rho * std::log1p(rbar * s) - g.price * s; });
  };
  auto residual = [&](double a, double b) {
    return std::max(std::abs(a - br(0, b)), std::abs(b - br(1, a)));
  };
  double best_a = 0, best_b = 0, best = 1e300, step = 1e-2;
  for (double a = 0; a <= 1.0 + 1e-12; a += step)
    for (double b = 0; b <= 1.0 + 1e-12; b += step)
      if (double r = residual(a, b); r < best) best = r, best_a = a, best_b = b;
  for (int zoom = 0; zoom < 8; ++zoom) {
    const double ca = best_a, cb = best_b;
    const double s = step / 10.0;
    for (int i = -15; i <= 15; ++i)
      for (int j = -15; j <= 15; ++j) {
        const double a = std::clamp(ca + i * s, 0.0, 1.0), b = std::clamp(cb + j * s, 0.0, 1.0);
        if (double r = residual(a, b); r < best) best = r, best_a = a, best_b = b;
      }
    step = s;
  }
  return {best_a, best_b};
}

/// Random roster of `n` players at AP `ap_id`; ids start after the owner.
inline AccessGameInstance random_game(std::mt19937_64& gen, std::size_t n, bool allow_free = true) {
  std::uniform_real_distribution<double> rho(0.0, 1.5), price(0.1, 2.0), coin(0.0, 1.0);
  AccessGameInstance g;
  g.ap_id = 0;
  g.price = price(gen);
  for (std::size_t j = 0; j < n; ++j) {
    const bool free = allow_free && coin(gen) < 0.25;
    g.players.push_back({j + 1, free ? PaymentType::Free : PaymentType::Paying, rho(gen)});
  }
  return g;
}

struct UserSpec {
  std::string id;
  Role role;
  double rho;
  std::vector<double> mobility;
};

inline Scenario make_scenario(const std::vector<UserSpec>& users, double price = 1.0,
                              double delta = 0.5, double p_max = 2.0) {
  Scenario sc;
  std::size_t k = 0;
  for (const auto& u : users) k += u.role == Role::Subscriber ? 1 : 0;
  sc.pricing = PricingScheme::single(price, k, delta, p_max);
  sc.seed = 12345;
  for (const auto& u : users) {
    UserProfile p;
    p.id = u.id;
    p.role = u.role;
    p.rho = u.rho;
    p.mobility = Eigen::Map<const Eigen::VectorXd>(u.mobility.data(),
                                                   static_cast<Eigen::Index>(u.mobility.size()));
    sc.users.push_back(std::move(p));
  }
  sc.validate();
  return sc;
}

/// Random probability row of length `len` (Dirichlet(1) via exponentials).
inline std::vector<double> random_row(std::mt19937_64& gen, std::size_t len) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> row(len);
  double sum = 0.0;
  for (double& v : row) sum += (v = e(gen));
  for (double& v : row) v /= sum;
  return row;
}

/// K subscribers plus `aliens` Aliens with random valuations and mobility.
inline Scenario random_scenario(std::mt19937_64& gen, std::size_t k, std::size_t aliens) {
  std::uniform_real_distribution<double> rho(0.1, 1.5), price(0.3, 1.5), delta(0.0, 1.0);
  std::vector<UserSpec> users;
  for (std::size_t i = 0; i < k; ++i)
    users.push_back({"s" + std::to_string(i + 1), Role::Subscriber, rho(gen), random_row(gen, k + 1)});
  for (std::size_t a = 0; a < aliens; ++a)
    users.push_back({"a" + std::to_string(a + 1), Role::Alien, rho(gen), random_row(gen, k + 1)});
  return make_scenario(users, price(gen), delta(gen), 2.0);
}

// V_i by walking every joint location of every user (including the owner
// and the focal user), solving each AP's game from scratch.
inline double oracle_overall(const Scenario& sc, std::size_t i, const Eigen::VectorXi& x) {
  const std::size_t n = sc.user_count(), k = sc.subscriber_count();
  const Eigen::MatrixXd eta = sc.mobility_matrix();
  auto paying = [&](std::size_t u) { return u >= k || x(static_cast<Eigen::Index>(u)) == 1; };
  auto solve_at = [&](std::size_t ap, const std::vector<std::size_t>& who) {
    AccessGameInstance g;
    g.ap_id = ap - 1;
    g.price = sc.pricing.at(ap);
    for (std::size_t u : who)
      g.players.push_back({u, paying(u) ? PaymentType::Paying : PaymentType::Free, sc.users[u].rho});
    return std::make_pair(g, solve_equilibrium(g).profile);
  };

  std::vector<std::size_t> loc(n, 0);
  double total = 0.0;
  while (true) {
    double prob = 1.0;
    for (std::size_t u = 0; u < n; ++u) prob *= eta(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(loc[u]));
    if (prob > 0.0) {
      double value = 0.0;
      if (loc[i] == i + 1) {
        value += sc.users[i].rho * std::log1p(sc.home_rate(i));
      } else if (loc[i] != 0) {
        std::vector<std::size_t> who;
        for (std::size_t u = 0; u < n; ++u)
          if (loc[u] == loc[i] && u != loc[i] - 1) who.push_back(u);
        auto [g, s] = solve_at(loc[i], who);
        const auto pos = static_cast<Eigen::Index>(g.index_of(i));
        Eigen::VectorXd others(s.size() - 1);
        for (Eigen::Index j = 0, c = 0; j < s.size(); ++j)
          if (j != pos) others(c++) = s(j);
        const double rbar = expected_rate(others, sc.rate_params);
        value += sc.users[i].rho * std::log1p(rbar * s(pos)) - (paying(i) ? g.price * s(pos) : 0.0);
      }
      if (x(static_cast<Eigen::Index>(i)) == 1) {
        std::vector<std::size_t> who;
        for (std::size_t u = 0; u < n; ++u)
          if (u != i && loc[u] == i + 1) who.push_back(u);
        if (!who.empty()) {
          auto [g, s] = solve_at(i + 1, who);
          double pay = 0.0;
          for (std::size_t j = 0; j < g.size(); ++j)
            if (g.players[j].type == PaymentType::Paying) pay += g.price * s(static_cast<Eigen::Index>(j));
          value += sc.pricing.delta * pay;
        }
      }
      total += prob * value;
    }
    std::size_t d = 0;
    while (d < n && ++loc[d] > k) loc[d++] = 0;
    if (d == n) break;
  }
  return sc.time_slots * total;
}

}  // namespace wcn::testing
