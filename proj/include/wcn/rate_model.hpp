#pragma once

// Closed-form 802.11g per-user throughput and the expected rate seen by one
// user when the other users occupy the channel independently.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace wcn {

/// Contention and slot constants of the saturated 802.11 channel.
/// Rates come out in bits per microsecond (numerically Mbps).
template <typename Scalar>
struct RateModelParams {
  Scalar tau{};                ///< average successful contention probability
  Scalar payload_bits{};       ///< L
  Scalar backoff_slot_us{};    ///< T_b
  Scalar collision_slot_us{};  ///< T_c
  Scalar success_slot_us{};    ///< T_s

  /// 802.11g: tau = 0.0765, L = 8192, T_b = 28us, T_c = T_s = 85.7 + L/54 us.
  static RateModelParams ieee80211g() {
    const Scalar payload(8192);
    const Scalar slot = Scalar(85.7) + payload / Scalar(54);
    return {Scalar(0.0765), payload, Scalar(28), slot, slot};
  }

  void validate() const {
    if (!(tau > Scalar(0) && tau < Scalar(1)))
      throw std::invalid_argument("rate params: tau must lie in (0, 1)");
    if (!(payload_bits > Scalar(0)) || !(backoff_slot_us > Scalar(0)) ||
        !(collision_slot_us > Scalar(0)) || !(success_slot_us > Scalar(0)))
      throw std::invalid_argument("rate params: payload and slot lengths must be positive");
  }

  friend bool operator==(const RateModelParams&, const RateModelParams&) = default;
};

using RateParams = RateModelParams<double>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Average rate of each of `n` users sharing the channel simultaneously.
template <typename Scalar>
Scalar per_user_rate(std::size_t n, const RateModelParams<Scalar>& params) {
  using std::pow;
  if (n == 0)
    throw std::invalid_argument("per_user_rate: n must be at least 1");
  const Scalar idle = Scalar(1) - params.tau;
  const Scalar nn = static_cast<Scalar>(n);
  const Scalar all_idle = pow(idle, nn);
  const Scalar one_success = nn * params.tau * pow(idle, nn - Scalar(1));
  const Scalar collision = (Scalar(1) - all_idle) - one_success;
  const Scalar slot_time = all_idle * params.backoff_slot_us +
                           collision * params.collision_slot_us +
                           one_success * params.success_slot_us;
  return params.tau * pow(idle, nn - Scalar(1)) * params.payload_bits / slot_time;
}

/// Poisson-binomial distribution of how many of the given users are on the
/// channel at once; entry n is P(exactly n present). O(N^2) convolution.
template <typename Derived>
VectorX<typename Derived::Scalar> occupancy_distribution(
    const Eigen::MatrixBase<Derived>& access_times) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index users = access_times.size();
  VectorX<Scalar> probs = VectorX<Scalar>::Zero(users + 1);
  probs(0) = Scalar(1);
  for (Eigen::Index j = 0; j < users; ++j) {
    const Scalar s = access_times(j);
    if (!(s >= Scalar(0) && s <= Scalar(1)))
      throw std::invalid_argument("occupancy_distribution: access time outside [0, 1]");
    // in-place update from the top so probs(n-1) is still the previous row
    for (Eigen::Index n = j + 1; n > 0; --n)
      probs(n) = probs(n) * (Scalar(1) - s) + probs(n - 1) * s;
    probs(0) *= Scalar(1) - s;
  }
  return probs;
}

/// Expected rate of a focal user given the access times of everyone else.
/// The focal user always counts as one occupant.
template <typename Derived>
typename Derived::Scalar expected_rate(
    const Eigen::MatrixBase<Derived>& others_access_times,
    const RateModelParams<typename Derived::Scalar>& params) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> probs = occupancy_distribution(others_access_times);
  Scalar rate(0);
  for (Eigen::Index n = 0; n < probs.size(); ++n) {
    if (probs(n) != Scalar(0))
      rate += probs(n) * per_user_rate(static_cast<std::size_t>(n) + 1, params);
  }
  return rate;
}

/// (R(1) - R(2)) / R(2)^2. Two-player access games have a unique equilibrium
/// and best-response dynamics contract at this rate when it is below one.
template <typename Scalar>
Scalar contraction_constant(const RateModelParams<Scalar>& params) {
  const Scalar r1 = per_user_rate(1, params);
  const Scalar r2 = per_user_rate(2, params);
  return (r1 - r2) / (r2 * r2);
}

}  // namespace wcn
