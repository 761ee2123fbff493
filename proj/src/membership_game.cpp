#include "wcn/membership_game.hpp"

#include "wcn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace wcn {

namespace {

enum MemoKind : int { kAway = 0, kRevenue = 1, kOverall = 2 };
enum StreamTag : std::uint64_t { kAwayStream = 1, kRevenueStream = 2, kMixedStream = 3 };

std::vector<int> to_key(const PureProfile& x) { return {x.data(), x.data() + x.size()}; }

std::uint64_t profile_hash(const PureProfile& x) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (Eigen::Index j = 0; j < x.size(); ++j) h = splitmix64(h ^ static_cast<std::uint64_t>(x(j) + 2 * j));
  return h;
}

// Running mean/variance (Welford) for sample-based estimates.
struct Accumulator {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }
  Estimate estimate() const {
    Estimate e{mean, 0.0, n};
    if (n > 1) e.std_error = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
    return e;
  }
};

bool contains(std::span<const std::size_t> set, std::size_t v) {
  return std::find(set.begin(), set.end(), v) != set.end();
}

}  // namespace

double presence_probability(const Eigen::MatrixXd& mobility, std::span<const std::size_t> present,
                            std::size_t ap, std::span<const std::size_t> excluded) {
  if (ap == 0 || static_cast<Eigen::Index>(ap) >= mobility.cols())
    throw std::out_of_range("presence_probability: no AP " + std::to_string(ap));
  const std::size_t owner = ap - 1;
  for (std::size_t j : present) {
    if (contains(excluded, j))
      throw std::invalid_argument("presence_probability: present and excluded sets overlap");
    if (j == owner)
      throw std::invalid_argument("presence_probability: the AP owner cannot be present");
  }
  if (contains(excluded, owner))
    throw std::invalid_argument("presence_probability: the AP owner cannot be excluded");

  const auto col = static_cast<Eigen::Index>(ap);
  double prob = 1.0;
  for (Eigen::Index j = 0; j < mobility.rows(); ++j) {
    const auto u = static_cast<std::size_t>(j);
    if (u == owner || contains(excluded, u)) continue;
    prob *= contains(present, u) ? mobility(j, col) : 1.0 - mobility(j, col);
  }
  return prob;
}

double smoothed_choice(double v_bill, double v_linus, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("smoothed_choice: gamma must be positive");
  const double d = (v_bill - v_linus) / gamma;
  double a;
  if (d >= 0.0) {
    a = 1.0 / (1.0 + std::exp(-d));
  } else {
    const double e = std::exp(d);
    a = e / (1.0 + e);
  }
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(a, lo, hi);
}

MembershipGame::MembershipGame(Scenario scenario, std::shared_ptr<EquilibriumCache> cache)
    : scenario_(std::move(scenario)), cache_(std::move(cache)) {
  scenario_.validate();
  k_ = scenario_.subscriber_count();
  eta_ = scenario_.mobility_matrix();
  if (!cache_) cache_ = std::make_shared<EquilibriumCache>(scenario_.access_solver);
}

void MembershipGame::check_profile(const PureProfile& x) const {
  if (static_cast<std::size_t>(x.size()) != k_)
    throw std::invalid_argument("pure profile must have one entry per subscriber");
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) != 0 && x(j) != 1) throw std::invalid_argument("pure profile entries must be 0 or 1");
  }
}

void MembershipGame::check_subscriber(std::size_t i, const char* what) const {
  if (i >= k_) throw std::invalid_argument(std::string(what) + ": user is not a subscriber");
}

PaymentType MembershipGame::payment_type(std::size_t user, const PureProfile& x) const {
  if (user >= k_) return PaymentType::Paying;
  return x(static_cast<Eigen::Index>(user)) == 1 ? PaymentType::Paying : PaymentType::Free;
}

std::vector<std::size_t> MembershipGame::candidates(std::size_t ap,
                                                    std::span<const std::size_t> excluded) const {
  std::vector<std::size_t> out;
  const auto col = static_cast<Eigen::Index>(ap);
  for (std::size_t j = 0; j < scenario_.user_count(); ++j) {
    if (j == ap - 1 || contains(excluded, j)) continue;
    if (eta_(static_cast<Eigen::Index>(j), col) > 0.0) out.push_back(j);
  }
  return out;
}

template <typename Fn>
Estimate MembershipGame::expect_over_presence(std::size_t ap, std::span<const std::size_t> excluded,
                                              std::uint64_t stream_seed, Fn&& per_set) {
  const std::vector<std::size_t> cands = candidates(ap, excluded);
  const auto col = static_cast<Eigen::Index>(ap);
  std::vector<std::size_t> present;
  present.reserve(cands.size());

  if (scenario_.expectation.mode == ExpectationMode::Exact) {
    if (cands.size() > scenario_.expectation.exact_population_limit)
      throw std::invalid_argument("exact expectation at AP " + std::to_string(ap) + " needs " +
                                  std::to_string(cands.size()) +
                                  " potential visitors, above exact_population_limit");
    const std::uint64_t sets = std::uint64_t{1} << cands.size();
    double total = 0.0;
    for (std::uint64_t mask = 0; mask < sets; ++mask) {
      present.clear();
      for (std::size_t b = 0; b < cands.size(); ++b) {
        if (mask >> b & 1U) present.push_back(cands[b]);
      }
      const double prob = presence_probability(eta_, present, ap, excluded);
      if (prob == 0.0) continue;
      total += prob * per_set(std::span<const std::size_t>(present));
    }
    return {total, 0.0, static_cast<std::size_t>(sets)};
  }

  Stream rng(stream_seed);
  Accumulator acc;
  for (std::size_t s = 0; s < scenario_.expectation.sample_count; ++s) {
    present.clear();
    for (std::size_t j : cands) {
      if (rng.bernoulli(eta_(static_cast<Eigen::Index>(j), col))) present.push_back(j);
    }
    acc.add(per_set(std::span<const std::size_t>(present)));
  }
  return acc.estimate();
}

MembershipGame::SlotOutcome MembershipGame::play_slot(std::size_t ap,
                                                      std::span<const std::size_t> present,
                                                      std::optional<std::size_t> focal,
                                                      const PureProfile& x) {
  AccessGameInstance game;
  game.ap_id = ap - 1;
  game.price = scenario_.pricing.at(ap);
  game.rate_params = scenario_.rate_params;
  game.players.reserve(present.size() + 1);
  std::optional<std::size_t> focal_pos;
  auto add = [&](std::size_t u) {
    game.players.push_back({u, payment_type(u, x), scenario_.users[u].rho});
  };
  for (std::size_t u : present) {
    if (focal && !focal_pos && *focal < u) {
      focal_pos = game.players.size();
      add(*focal);
    }
    add(u);
  }
  if (focal && !focal_pos) {
    focal_pos = game.players.size();
    add(*focal);
  }

  SlotOutcome out;
  if (game.players.empty()) return out;
  const EquilibriumCache::Solved solved = cache_->solve(game);
  for (std::size_t j = 0; j < game.size(); ++j) {
    if (game.players[j].type == PaymentType::Paying)
      out.payments += game.price * solved.profile(static_cast<Eigen::Index>(j));
  }
  if (focal_pos) {
    out.focal_payoff = access_payoff_at(game, *focal_pos,
                                        solved.profile(static_cast<Eigen::Index>(*focal_pos)),
                                        solved.profile);
  }
  return out;
}

double MembershipGame::home_slot_payoff(std::size_t i) const {
  check_subscriber(i, "home_slot_payoff");
  return scenario_.users[i].rho * std::log1p(scenario_.home_rate(i));
}

Estimate MembershipGame::away_slot_payoff(std::size_t i, std::size_t ap, const PureProfile& x) {
  check_profile(x);
  if (i >= scenario_.user_count()) throw std::out_of_range("away_slot_payoff: unknown user");
  if (ap == 0 || ap > k_) throw std::invalid_argument("away_slot_payoff: not an AP");
  if (ap - 1 == i) throw std::invalid_argument("away_slot_payoff: AP is the user's home");

  MemoKey key{kAway, i, ap, to_key(x)};
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;

  const std::size_t excluded[] = {i};
  const std::uint64_t seed = derive_seed(scenario_.seed, {kAwayStream, i, ap, profile_hash(x)});
  const Estimate e = expect_over_presence(ap, excluded, seed, [&](std::span<const std::size_t> present) {
    return play_slot(ap, present, i, x).focal_payoff;
  });
  memo_.emplace(std::move(key), e);
  return e;
}

Estimate MembershipGame::expected_ap_revenue(std::size_t owner, const PureProfile& x) {
  check_profile(x);
  check_subscriber(owner, "expected_ap_revenue");
  // The owner's own membership does not enter the payments at its AP.
  PureProfile others = x;
  others(static_cast<Eigen::Index>(owner)) = 0;

  MemoKey key{kRevenue, owner, 0, to_key(others)};
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;

  const std::size_t ap = owner + 1;
  const std::uint64_t seed =
      derive_seed(scenario_.seed, {kRevenueStream, owner, profile_hash(others)});
  const Estimate e = expect_over_presence(ap, {}, seed, [&](std::span<const std::size_t> present) {
    return play_slot(ap, present, std::nullopt, others).payments;
  });
  memo_.emplace(std::move(key), e);
  return e;
}

Estimate MembershipGame::overall_payoff(std::size_t i, int x_i, const PureProfile& x) {
  check_profile(x);
  check_subscriber(i, "overall_payoff");
  if (x_i != 0 && x_i != 1) throw std::invalid_argument("overall_payoff: x_i must be 0 or 1");
  PureProfile xx = x;
  xx(static_cast<Eigen::Index>(i)) = x_i;

  MemoKey key{kOverall, i, 0, to_key(xx)};
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;

  const auto row = static_cast<Eigen::Index>(i);
  double value = 0.0;
  double var = 0.0;
  std::size_t samples = 0;
  if (x_i == 1) {
    const Estimate rev = expected_ap_revenue(i, xx);
    const double w = scenario_.pricing.delta;
    value += w * rev.value;
    var += w * w * rev.std_error * rev.std_error;
    samples = std::max(samples, rev.samples);
  }
  value += eta_(row, row + 1) * home_slot_payoff(i);
  for (std::size_t ap = 1; ap <= k_; ++ap) {
    const double w = eta_(row, static_cast<Eigen::Index>(ap));
    if (ap - 1 == i || w == 0.0) continue;
    const Estimate v = away_slot_payoff(i, ap, xx);
    value += w * v.value;
    var += w * w * v.std_error * v.std_error;
    samples = std::max(samples, v.samples);
  }
  const double t = scenario_.time_slots;
  const Estimate e{t * value, t * std::sqrt(var), samples};
  memo_.emplace(std::move(key), e);
  return e;
}

Estimate MembershipGame::payoff_gap(std::size_t i, const PureProfile& x) {
  const Estimate bill = overall_payoff(i, 1, x);
  const Estimate linus = overall_payoff(i, 0, x);
  return {bill.value - linus.value, std::hypot(bill.std_error, linus.std_error),
          std::max(bill.samples, linus.samples)};
}

PureCheck MembershipGame::is_pure_equilibrium(const PureProfile& x) {
  check_profile(x);
  PureCheck check;
  check.gaps.resize(static_cast<Eigen::Index>(k_));
  for (std::size_t i = 0; i < k_; ++i) {
    const double f = payoff_gap(i, x).value;
    check.gaps(static_cast<Eigen::Index>(i)) = f;
    if ((2 * x(static_cast<Eigen::Index>(i)) - 1) * f < 0.0) check.violators.push_back(i);
  }
  check.equilibrium = check.violators.empty();
  return check;
}

std::vector<PureProfile> MembershipGame::pure_equilibria() {
  if (k_ > scenario_.expectation.exact_population_limit || k_ >= 63)
    throw std::invalid_argument("pure_equilibria: too many subscribers for an exhaustive scan");
  std::vector<PureProfile> out;
  const std::uint64_t profiles = std::uint64_t{1} << k_;
  for (std::uint64_t mask = 0; mask < profiles; ++mask) {
    PureProfile x(static_cast<Eigen::Index>(k_));
    for (std::size_t j = 0; j < k_; ++j) x(static_cast<Eigen::Index>(j)) = static_cast<int>(mask >> j & 1U);
    if (is_pure_equilibrium(x).equilibrium) out.push_back(x);
  }
  return out;
}

std::optional<double> MembershipGame::bill_threshold(std::size_t i, const PureProfile& x) {
  check_profile(x);
  check_subscriber(i, "bill_threshold");
  PureProfile linus = x;
  PureProfile bill = x;
  linus(static_cast<Eigen::Index>(i)) = 0;
  bill(static_cast<Eigen::Index>(i)) = 1;
  double denom = 0.0;
  for (std::size_t ap = 1; ap <= k_; ++ap) {
    if (ap - 1 == i) continue;
    denom += away_slot_payoff(i, ap, linus).value - away_slot_payoff(i, ap, bill).value;
  }
  if (!(denom > 0.0)) return std::nullopt;
  return 1.0 - scenario_.pricing.delta * expected_ap_revenue(i, x).value / denom;
}

std::vector<std::size_t> MembershipGame::sample_locations(Stream& rng) const {
  std::vector<std::size_t> where(scenario_.user_count(), 0);
  for (std::size_t u = 0; u < where.size(); ++u) {
    const auto row = static_cast<Eigen::Index>(u);
    const double r = rng.uniform();
    double cum = 0.0;
    std::size_t last = 0;
    bool placed = false;
    for (Eigen::Index c = 0; c < eta_.cols(); ++c) {
      const double w = eta_(row, c);
      if (w <= 0.0) continue;
      last = static_cast<std::size_t>(c);
      cum += w;
      if (r < cum) {
        where[u] = last;
        placed = true;
        break;
      }
    }
    if (!placed) where[u] = last;  // rounding slack in the row sum
  }
  return where;
}

std::pair<Estimate, Estimate> MembershipGame::mixed_expected_payoffs(std::size_t i,
                                                                     const MixedProfile& alpha) {
  check_subscriber(i, "mixed_expected_payoff");
  if (static_cast<std::size_t>(alpha.size()) != k_)
    throw std::invalid_argument("mixed profile must have one entry per subscriber");
  for (Eigen::Index j = 0; j < alpha.size(); ++j) {
    if (!(alpha(j) >= 0.0 && alpha(j) <= 1.0))
      throw std::invalid_argument("mixed profile entries must lie in [0, 1]");
  }

  std::vector<std::size_t> others;
  for (std::size_t j = 0; j < k_; ++j) {
    if (j != i) others.push_back(j);
  }

  if (scenario_.expectation.mode == ExpectationMode::Exact) {
    if (others.size() > scenario_.expectation.exact_population_limit || others.size() >= 63)
      throw std::invalid_argument("exact mixed payoff: too many subscribers to enumerate");
    double bill = 0.0;
    double linus = 0.0;
    PureProfile x = PureProfile::Zero(static_cast<Eigen::Index>(k_));
    const std::uint64_t profiles = std::uint64_t{1} << others.size();
    for (std::uint64_t mask = 0; mask < profiles; ++mask) {
      double w = 1.0;
      for (std::size_t b = 0; b < others.size(); ++b) {
        const int xj = static_cast<int>(mask >> b & 1U);
        const double a = alpha(static_cast<Eigen::Index>(others[b]));
        x(static_cast<Eigen::Index>(others[b])) = xj;
        w *= xj == 1 ? a : 1.0 - a;
      }
      if (w == 0.0) continue;
      bill += w * overall_payoff(i, 1, x).value;
      linus += w * overall_payoff(i, 0, x).value;
    }
    const auto n = static_cast<std::size_t>(profiles);
    return {Estimate{bill, 0.0, n}, Estimate{linus, 0.0, n}};
  }

  // Joint sampling: memberships from alpha, locations from the mobility rows,
  // one Stage-II solve per visited AP. Both memberships of i see the same draw.
  Stream rng(derive_seed(scenario_.seed, {kMixedStream, i}));
  Accumulator bill_acc;
  Accumulator linus_acc;
  PureProfile x = PureProfile::Zero(static_cast<Eigen::Index>(k_));
  const std::size_t home = i + 1;
  const double t = scenario_.time_slots;
  const double delta = scenario_.pricing.delta;
  const double home_payoff = home_slot_payoff(i);
  std::vector<std::size_t> visitors;
  for (std::size_t s = 0; s < scenario_.expectation.sample_count; ++s) {
    for (std::size_t j : others)
      x(static_cast<Eigen::Index>(j)) = rng.bernoulli(alpha(static_cast<Eigen::Index>(j))) ? 1 : 0;
    const std::vector<std::size_t> where = sample_locations(rng);

    visitors.clear();
    for (std::size_t u = 0; u < where.size(); ++u) {
      if (u != i && where[u] == home) visitors.push_back(u);
    }
    const double revenue = play_slot(home, visitors, std::nullopt, x).payments;

    const std::size_t loc = where[i];
    double roam[2] = {0.0, 0.0};
    if (loc == home) {
      roam[0] = roam[1] = home_payoff;
    } else if (loc != 0) {
      visitors.clear();
      for (std::size_t u = 0; u < where.size(); ++u) {
        if (u != i && u != loc - 1 && where[u] == loc) visitors.push_back(u);
      }
      for (int xi = 0; xi < 2; ++xi) {
        x(static_cast<Eigen::Index>(i)) = xi;
        roam[xi] = play_slot(loc, visitors, i, x).focal_payoff;
      }
    }
    bill_acc.add(t * (delta * revenue + roam[1]));
    linus_acc.add(t * roam[0]);
  }
  return {bill_acc.estimate(), linus_acc.estimate()};
}

Estimate MembershipGame::mixed_expected_payoff(std::size_t i, int x_i, const MixedProfile& alpha) {
  if (x_i != 0 && x_i != 1) throw std::invalid_argument("mixed_expected_payoff: x_i must be 0 or 1");
  const auto [bill, linus] = mixed_expected_payoffs(i, alpha);
  return x_i == 1 ? bill : linus;
}

double MembershipGame::mixed_payoff(std::size_t i, double alpha_i, const MixedProfile& alpha) {
  if (!(alpha_i >= 0.0 && alpha_i <= 1.0))
    throw std::invalid_argument("mixed_payoff: alpha_i outside [0, 1]");
  const auto [bill, linus] = mixed_expected_payoffs(i, alpha);
  return alpha_i * bill.value + (1.0 - alpha_i) * linus.value;
}

MixedProfile MembershipGame::smoothed_best_response_step(const MixedProfile& alpha, double gamma) {
  MixedProfile next(alpha.size());
  for (std::size_t i = 0; i < k_; ++i) {
    const auto [bill, linus] = mixed_expected_payoffs(i, alpha);
    next(static_cast<Eigen::Index>(i)) = smoothed_choice(bill.value, linus.value, gamma);
  }
  return next;
}

MixedResult MembershipGame::solve_mixed_equilibrium(const MixedProfile& alpha0,
                                                    const MixedSolverConfig& config) {
  config.validate();
  if (static_cast<std::size_t>(alpha0.size()) != k_)
    throw std::invalid_argument("initial mixed profile must have one entry per subscriber");

  MixedResult result;
  result.alpha = alpha0;
  result.v_bill.resize(static_cast<Eigen::Index>(k_));
  result.v_linus.resize(static_cast<Eigen::Index>(k_));
  result.trajectory.push_back(alpha0);
  double gamma = config.gamma;
  for (int it = 1; it <= config.max_iters; ++it) {
    if (config.anneal_beta && it > 1) gamma = std::max(gamma * *config.anneal_beta, config.gamma_min);
    MixedProfile next(static_cast<Eigen::Index>(k_));
    for (std::size_t i = 0; i < k_; ++i) {
      const auto [bill, linus] = mixed_expected_payoffs(i, result.alpha);
      const auto e = static_cast<Eigen::Index>(i);
      result.v_bill(e) = bill.value;
      result.v_linus(e) = linus.value;
      next(e) = smoothed_choice(bill.value, linus.value, gamma);
    }
    result.residual = (next - result.alpha).cwiseAbs().maxCoeff();
    result.alpha = std::move(next);
    result.trajectory.push_back(result.alpha);
    result.iterations = it;
    result.final_gamma = gamma;
    // While annealing, the map itself still moves; only stop at the floor.
    const bool settled = !config.anneal_beta || gamma <= config.gamma_min;
    if (settled && result.residual <= config.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace wcn
