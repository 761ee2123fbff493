#include <doctest.h>

#include "support.hpp"

#include <wcn/scenario_io.hpp>

#include <filesystem>
#include <string>

using namespace wcn;

namespace {

const std::string kMinimal = R"(users:
  - {id: s1, role: subscriber, rho: 1, mobility: [0.5, 0.5]}
)";

std::string error_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("bundled small scenario") {
  const Scenario sc = load_scenario(WCN_SCENARIO_DIR "/small_network.yaml");
  CHECK(sc.subscriber_count() == 2);
  CHECK(sc.user_count() == 3);
  CHECK(sc.pricing.delta == 0.5);
  CHECK(sc.pricing.at(1) == 1.0);
  CHECK(sc.pricing.at(2) == 1.0);
  CHECK(sc.pricing.uniform);
  const Eigen::MatrixXd eta = sc.mobility_matrix();
  for (Eigen::Index c = 0; c < 3; ++c) {
    CHECK(eta(1, c) == 1.0 / 3.0);
    CHECK(eta(2, c) == 1.0 / 3.0);
  }
  CHECK(sc.users[2].role == Role::Alien);
  CHECK(sc.expectation.mode == ExpectationMode::Exact);
}

TEST_CASE("defaults") {
  const Scenario sc = parse_scenario(kMinimal);
  CHECK(sc.rate_params == RateParams::ieee80211g());
  CHECK(sc.home_rate(0) == per_user_rate(1, sc.rate_params));
  CHECK(sc.time_slots == 1.0);
  CHECK(sc.mixed_solver.gamma > 0.0);
}

TEST_CASE("validation errors") {
  SUBCASE("mobility row must sum to one") {
    const std::string msg = error_of(R"(users:
  - {id: s1, role: subscriber, rho: 1, mobility: [0.5, 0.5]}
  - {id: roamer, role: alien, rho: 1, mobility: [0.5, 0.4]}
)");
    CHECK(msg.find("roamer") != std::string::npos);
    CHECK_THROWS_AS(parse_scenario(R"(users:
  - {id: s1, role: subscriber, rho: 1, mobility: [0.5, 0.4]}
)"),
                    ValidationError);
  }
  SUBCASE("row length must match the AP count") {
    CHECK_THROWS_AS(parse_scenario(R"(users:
  - {id: s1, role: subscriber, rho: 1, mobility: [0.5, 0.25, 0.25]}
)"),
                    ValidationError);
  }
  SUBCASE("duplicate ids") {
    CHECK_THROWS_AS(parse_scenario(R"(users:
  - {id: s1, role: subscriber, rho: 1, mobility: [0.5, 0.5, 0]}
  - {id: s1, role: subscriber, rho: 1, mobility: [0.5, 0, 0.5]}
)"),
                    ValidationError);
  }
  SUBCASE("no subscribers") {
    CHECK_THROWS(parse_scenario("users:\n  - {id: a, role: alien, rho: 1, mobility: [1]}\n"));
  }
  SUBCASE("delta outside [0, 1]") {
    CHECK_THROWS_AS(parse_scenario("pricing: {price: 1, delta: 1.5}\n" + kMinimal), ValidationError);
  }
  SUBCASE("price above p_max") {
    CHECK_THROWS_AS(parse_scenario("pricing: {price: 3, p_max: 2}\n" + kMinimal), ValidationError);
  }
}

TEST_CASE("parse errors carry line and field") {
  const std::string bad_number = error_of("time_slots: 1\npricing:\n  price: abc\n" + kMinimal);
  CHECK(bad_number.find("line 3") != std::string::npos);
  CHECK(bad_number.find("pricing.price") != std::string::npos);
  CHECK_THROWS_AS(parse_scenario("bogus: 1\n" + kMinimal), ParseError);
  CHECK(error_of("bogus: 1\n" + kMinimal).find("bogus") != std::string::npos);
  CHECK_THROWS_AS(parse_scenario("users: [\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("users:\n  - {id: s1, role: boss, rho: 1, mobility: [1, 0]}\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("expectation: {mode: fuzzy}\n" + kMinimal), ParseError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.yaml"), ParseError);
}

TEST_CASE("round trip") {
  Scenario sc = load_scenario(WCN_SCENARIO_DIR "/small_network.yaml");
  sc.pricing.prices = {0.3, 1.7};
  sc.pricing.uniform = false;
  sc.users[0].home_rate = 20.5;
  sc.mixed_solver.anneal_beta = 0.9;
  sc.mixed_solver.gamma_min = 1e-4;
  sc.expectation.mode = ExpectationMode::MonteCarlo;
  sc.access_solver.damping = 0.75;
  sc.time_slots = 24.0;
  sc.rate_params.tau = 0.05;
  sc.seed = 0xDEADBEEFCAFEULL;

  const auto path = std::filesystem::temp_directory_path() / "wcn_round_trip.yaml";
  save_scenario(sc, path);
  const Scenario back = load_scenario(path);
  std::filesystem::remove(path);

  CHECK(dump_scenario(back) == dump_scenario(sc));
  CHECK(back.pricing.prices == sc.pricing.prices);
  CHECK_FALSE(back.pricing.uniform);
  CHECK(back.users[0].home_rate == sc.users[0].home_rate);
  CHECK(back.mobility_matrix() == sc.mobility_matrix());
  CHECK(back.mixed_solver.anneal_beta == sc.mixed_solver.anneal_beta);
  CHECK(back.mixed_solver.gamma_min == sc.mixed_solver.gamma_min);
  CHECK(back.expectation.mode == ExpectationMode::MonteCarlo);
  CHECK(back.access_solver.damping == 0.75);
  CHECK(back.time_slots == 24.0);
  CHECK(back.rate_params == sc.rate_params);
  CHECK(back.seed == sc.seed);
}

TEST_CASE("subscribers are listed before Aliens") {
  const Scenario sc = parse_scenario(R"(users:
  - {id: a, role: alien, rho: 1, mobility: [0.5, 0.5]}
  - {id: s1, role: subscriber, rho: 1, mobility: [0.5, 0.5]}
)");
  CHECK(sc.users[0].id == "s1");
  CHECK(sc.find_user("a") == 1);
  CHECK_THROWS(sc.find_user("nobody"));
}

TEST_CASE("grids") {
  CHECK(parse_grid("0:1:0.25") == std::vector<double>{0, 0.25, 0.5, 0.75, 1});
  const auto g = parse_grid("0:1:0.05");
  CHECK(g.size() == 21);
  CHECK(g.back() == 1.0);
  CHECK(g[3] == 0.15000000000000002);  // 3 * 0.05, no accumulated drift
  CHECK(parse_grid("0.5:0.5:0.1") == std::vector<double>{0.5});
  CHECK_THROWS(parse_grid("1:0:0.1"));
  CHECK_THROWS(parse_grid("0:1:0"));
  CHECK_THROWS(parse_grid("0:1"));
  CHECK_THROWS(parse_grid("a:1:0.1"));
}

TEST_CASE("decimal formatting") {
  CHECK(format_decimal(0.0) == "0");
  CHECK(format_decimal(1.0) == "1");
  CHECK(format_decimal(0.5) == "0.5");
  CHECK(format_decimal(-2.25) == "-2.25");
  CHECK(format_decimal(1.0 / 3.0) == "0.333333333333");
  CHECK(format_decimal(14.236637420712012) == "14.2366374207");
  CHECK(format_decimal(1.5e-7) == "0.00000015");
  CHECK(format_decimal(123456789012345.0) == "123456789012000");
  CHECK(format_decimal(1e300).find('e') == std::string::npos);
}
