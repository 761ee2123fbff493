#include "wcn/scenario_io.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace wcn {

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& what) {
  std::ostringstream msg;
  if (node.Mark().line >= 0) msg << "line " << node.Mark().line + 1 << ": ";
  msg << "field '" << field << "': " << what;
  throw ParseError(msg.str());
}

double to_double(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) fail(node, field, "expected a number");
  const std::string text = node.Scalar();
  try {
    // Fractions such as 1/3 keep mobility rows readable.
    if (const auto slash = text.find('/'); slash != std::string::npos) {
      std::size_t used_num = 0;
      std::size_t used_den = 0;
      const std::string num = text.substr(0, slash);
      const std::string den = text.substr(slash + 1);
      const double a = std::stod(num, &used_num);
      const double b = std::stod(den, &used_den);
      if (used_num != num.size() || used_den != den.size() || b == 0.0) throw std::invalid_argument(text);
      return a / b;
    }
    return node.as<double>();
  } catch (const std::exception&) {
    fail(node, field, "expected a number, got '" + text + "'");
  }
}

template <typename T>
T to_integer(const YAML::Node& node, const std::string& field) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, field, "expected an integer, got '" + (node.IsScalar() ? node.Scalar() : std::string("?")) + "'");
  }
}

std::string to_string(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) fail(node, field, "expected a string");
  return node.Scalar();
}

void check_keys(const YAML::Node& map, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!map.IsMap()) fail(map, section, "expected a mapping");
  for (const auto& kv : map) {
    const std::string key = kv.first.Scalar();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(kv.first, section.empty() ? key : section + "." + key, "unknown key");
  }
}

void emit_double(YAML::Emitter& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ParseError("scenario: top level must be a mapping");
  check_keys(root, "", {"seed", "time_slots", "rate_params", "pricing", "solver", "expectation", "users"});

  Scenario sc;
  if (root["seed"]) sc.seed = to_integer<std::uint64_t>(root["seed"], "seed");
  if (root["time_slots"]) sc.time_slots = to_double(root["time_slots"], "time_slots");

  if (const YAML::Node rp = root["rate_params"]) {
    check_keys(rp, "rate_params",
               {"tau", "payload_bits", "backoff_slot_us", "collision_slot_us", "success_slot_us"});
    if (rp["tau"]) sc.rate_params.tau = to_double(rp["tau"], "rate_params.tau");
    if (rp["payload_bits"]) {
      sc.rate_params.payload_bits = to_double(rp["payload_bits"], "rate_params.payload_bits");
      // the default slot lengths scale with the payload
      const double slot = 85.7 + sc.rate_params.payload_bits / 54.0;
      sc.rate_params.collision_slot_us = slot;
      sc.rate_params.success_slot_us = slot;
    }
    if (rp["backoff_slot_us"]) sc.rate_params.backoff_slot_us = to_double(rp["backoff_slot_us"], "rate_params.backoff_slot_us");
    if (rp["collision_slot_us"]) sc.rate_params.collision_slot_us = to_double(rp["collision_slot_us"], "rate_params.collision_slot_us");
    if (rp["success_slot_us"]) sc.rate_params.success_slot_us = to_double(rp["success_slot_us"], "rate_params.success_slot_us");
  }

  const YAML::Node users = root["users"];
  if (!users || !users.IsSequence() || users.size() == 0)
    throw ParseError("field 'users': a nonempty sequence of users is required");
  std::vector<UserProfile> subscribers;
  std::vector<UserProfile> aliens;
  for (std::size_t n = 0; n < users.size(); ++n) {
    const YAML::Node u = users[n];
    const std::string where = "users[" + std::to_string(n) + "]";
    check_keys(u, where, {"id", "role", "rho", "home_rate", "mobility"});
    UserProfile p;
    if (!u["id"]) fail(u, where + ".id", "missing");
    p.id = to_string(u["id"], where + ".id");
    if (!u["role"]) fail(u, where + ".role", "missing");
    const std::string role = to_string(u["role"], where + ".role");
    if (role == "subscriber")
      p.role = Role::Subscriber;
    else if (role == "alien")
      p.role = Role::Alien;
    else
      fail(u["role"], where + ".role", "expected 'subscriber' or 'alien', got '" + role + "'");
    if (!u["rho"]) fail(u, where + ".rho", "missing");
    p.rho = to_double(u["rho"], where + ".rho");
    if (u["home_rate"]) p.home_rate = to_double(u["home_rate"], where + ".home_rate");
    const YAML::Node mob = u["mobility"];
    if (!mob || !mob.IsSequence()) fail(u, where + ".mobility", "expected a sequence of probabilities");
    p.mobility.resize(static_cast<Eigen::Index>(mob.size()));
    for (std::size_t c = 0; c < mob.size(); ++c)
      p.mobility(static_cast<Eigen::Index>(c)) = to_double(mob[c], where + ".mobility");
    (p.is_subscriber() ? subscribers : aliens).push_back(std::move(p));
  }
  sc.users = std::move(subscribers);
  sc.users.insert(sc.users.end(), aliens.begin(), aliens.end());
  const std::size_t k = sc.subscriber_count();

  sc.pricing = PricingScheme::single(1.0, k, 0.5, 1.0);
  if (const YAML::Node pr = root["pricing"]) {
    check_keys(pr, "pricing", {"price", "prices", "delta", "p_max"});
    if (pr["price"] && pr["prices"]) fail(pr, "pricing", "give either 'price' or 'prices', not both");
    double p_max = 0.0;
    if (pr["prices"]) {
      const YAML::Node ps = pr["prices"];
      if (!ps.IsSequence()) fail(ps, "pricing.prices", "expected a sequence");
      sc.pricing.prices.clear();
      for (const auto& v : ps) sc.pricing.prices.push_back(to_double(v, "pricing.prices"));
      sc.pricing.uniform = false;
    } else if (pr["price"]) {
      sc.pricing.prices.assign(k, to_double(pr["price"], "pricing.price"));
    }
    for (double p : sc.pricing.prices) p_max = std::max(p_max, p);
    sc.pricing.p_max = pr["p_max"] ? to_double(pr["p_max"], "pricing.p_max") : p_max;
    if (pr["delta"]) sc.pricing.delta = to_double(pr["delta"], "pricing.delta");
  }

  if (const YAML::Node so = root["solver"]) {
    check_keys(so, "solver", {"epsilon", "max_iters", "damping", "gamma", "tol", "mixed_max_iters",
                              "anneal_beta", "gamma_min"});
    if (so["epsilon"]) sc.access_solver.epsilon = to_double(so["epsilon"], "solver.epsilon");
    if (so["max_iters"]) sc.access_solver.max_iters = to_integer<int>(so["max_iters"], "solver.max_iters");
    if (so["damping"]) sc.access_solver.damping = to_double(so["damping"], "solver.damping");
    if (so["gamma"]) sc.mixed_solver.gamma = to_double(so["gamma"], "solver.gamma");
    if (so["tol"]) sc.mixed_solver.tol = to_double(so["tol"], "solver.tol");
    if (so["mixed_max_iters"]) sc.mixed_solver.max_iters = to_integer<int>(so["mixed_max_iters"], "solver.mixed_max_iters");
    if (so["anneal_beta"]) sc.mixed_solver.anneal_beta = to_double(so["anneal_beta"], "solver.anneal_beta");
    if (so["gamma_min"]) sc.mixed_solver.gamma_min = to_double(so["gamma_min"], "solver.gamma_min");
  }

  if (const YAML::Node ex = root["expectation"]) {
    check_keys(ex, "expectation", {"mode", "sample_count", "exact_population_limit"});
    if (ex["mode"]) {
      const std::string mode = to_string(ex["mode"], "expectation.mode");
      if (mode == "exact")
        sc.expectation.mode = ExpectationMode::Exact;
      else if (mode == "mc" || mode == "montecarlo")
        sc.expectation.mode = ExpectationMode::MonteCarlo;
      else
        fail(ex["mode"], "expectation.mode", "expected 'exact' or 'mc', got '" + mode + "'");
    }
    if (ex["sample_count"]) sc.expectation.sample_count = to_integer<std::size_t>(ex["sample_count"], "expectation.sample_count");
    if (ex["exact_population_limit"])
      sc.expectation.exact_population_limit = to_integer<std::size_t>(ex["exact_population_limit"], "expectation.exact_population_limit");
  }

  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string dump_scenario(const Scenario& sc) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << sc.seed;
  out << YAML::Key << "time_slots" << YAML::Value;
  emit_double(out, sc.time_slots);

  out << YAML::Key << "rate_params" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "tau" << YAML::Value;
  emit_double(out, sc.rate_params.tau);
  out << YAML::Key << "payload_bits" << YAML::Value;
  emit_double(out, sc.rate_params.payload_bits);
  out << YAML::Key << "backoff_slot_us" << YAML::Value;
  emit_double(out, sc.rate_params.backoff_slot_us);
  out << YAML::Key << "collision_slot_us" << YAML::Value;
  emit_double(out, sc.rate_params.collision_slot_us);
  out << YAML::Key << "success_slot_us" << YAML::Value;
  emit_double(out, sc.rate_params.success_slot_us);
  out << YAML::EndMap;

  out << YAML::Key << "pricing" << YAML::Value << YAML::BeginMap;
  if (sc.pricing.uniform && !sc.pricing.prices.empty()) {
    out << YAML::Key << "price" << YAML::Value;
    emit_double(out, sc.pricing.prices.front());
  } else {
    out << YAML::Key << "prices" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double p : sc.pricing.prices) emit_double(out, p);
    out << YAML::EndSeq;
  }
  out << YAML::Key << "delta" << YAML::Value;
  emit_double(out, sc.pricing.delta);
  out << YAML::Key << "p_max" << YAML::Value;
  emit_double(out, sc.pricing.p_max);
  out << YAML::EndMap;

  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "epsilon" << YAML::Value;
  emit_double(out, sc.access_solver.epsilon);
  out << YAML::Key << "max_iters" << YAML::Value << sc.access_solver.max_iters;
  out << YAML::Key << "damping" << YAML::Value;
  emit_double(out, sc.access_solver.damping);
  out << YAML::Key << "gamma" << YAML::Value;
  emit_double(out, sc.mixed_solver.gamma);
  out << YAML::Key << "tol" << YAML::Value;
  emit_double(out, sc.mixed_solver.tol);
  out << YAML::Key << "mixed_max_iters" << YAML::Value << sc.mixed_solver.max_iters;
  if (sc.mixed_solver.anneal_beta) {
    out << YAML::Key << "anneal_beta" << YAML::Value;
    emit_double(out, *sc.mixed_solver.anneal_beta);
  }
  out << YAML::Key << "gamma_min" << YAML::Value;
  emit_double(out, sc.mixed_solver.gamma_min);
  out << YAML::EndMap;

  out << YAML::Key << "expectation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value
      << (sc.expectation.mode == ExpectationMode::Exact ? "exact" : "mc");
  out << YAML::Key << "sample_count" << YAML::Value << sc.expectation.sample_count;
  out << YAML::Key << "exact_population_limit" << YAML::Value << sc.expectation.exact_population_limit;
  out << YAML::EndMap;

  out << YAML::Key << "users" << YAML::Value << YAML::BeginSeq;
  for (const UserProfile& u : sc.users) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << u.id;
    out << YAML::Key << "role" << YAML::Value << (u.is_subscriber() ? "subscriber" : "alien");
    out << YAML::Key << "rho" << YAML::Value;
    emit_double(out, u.rho);
    if (u.home_rate) {
      out << YAML::Key << "home_rate" << YAML::Value;
      emit_double(out, *u.home_rate);
    }
    out << YAML::Key << "mobility" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index c = 0; c < u.mobility.size(); ++c) emit_double(out, u.mobility(c));
    out << YAML::EndSeq << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file '" + path.string() + "'");
  out << dump_scenario(scenario);
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : spec) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  auto num = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw std::invalid_argument("grid '" + spec + "': bad number '" + s + "'");
    return v;
  };
  if (parts.size() == 1) return {num(parts[0])};
  if (parts.size() != 3) throw std::invalid_argument("grid '" + spec + "': expected a:b:step");
  const double a = num(parts[0]);
  const double b = num(parts[1]);
  const double step = num(parts[2]);
  if (!(step > 0.0) || b < a) throw std::invalid_argument("grid '" + spec + "': need step > 0 and b >= a");
  const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
  // snap the last point onto b when the step divides the range
  if (std::abs(out.back() - b) < 1e-9 * std::max(1.0, std::abs(b))) out.back() = b;
  return out;
}

std::string format_decimal(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  // Round to 12 significant digits first, then print without an exponent.
  char sci[64];
  std::snprintf(sci, sizeof sci, "%.11e", value);
  const double rounded = std::strtod(sci, nullptr);
  const int exponent = static_cast<int>(std::floor(std::log10(std::abs(rounded))));
  const int decimals = std::max(0, 11 - exponent);
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  std::string s(buf);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

}  // namespace wcn
