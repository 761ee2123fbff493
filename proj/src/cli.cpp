#include "wcn/cli.hpp"

#include "wcn/access_game.hpp"
#include "wcn/membership_game.hpp"
#include "wcn/operator.hpp"
#include "wcn/scenario_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace wcn {

namespace {

struct Common {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::size_t> samples;
  std::optional<double> gamma;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("--scenario", c.scenario, "Scenario file (YAML)")->required();
  if (with_out) cmd->add_option("--out", c.out, "Output path (default: stdout)");
  cmd->add_option("--seed", c.seed, "Override the scenario seed");
  cmd->add_option("--mode", c.mode, "Expectation mode")->check(CLI::IsMember({"exact", "mc"}));
  cmd->add_option("--samples", c.samples, "Monte-Carlo sample count")->check(CLI::PositiveNumber);
  cmd->add_option("--gamma", c.gamma, "Smoothed best-response temperature")->check(CLI::PositiveNumber);
}

Scenario load(const Common& c) {
  Scenario sc = load_scenario(c.scenario);
  if (c.seed) sc.seed = *c.seed;
  if (c.mode) sc.expectation.mode = *c.mode == "exact" ? ExpectationMode::Exact : ExpectationMode::MonteCarlo;
  if (c.samples) sc.expectation.sample_count = *c.samples;
  if (c.gamma) sc.mixed_solver.gamma = *c.gamma;
  sc.validate();
  return sc;
}

std::vector<std::string> split_ids(const std::string& list) {
  std::vector<std::string> ids;
  std::stringstream ss(list);
  std::string id;
  while (std::getline(ss, id, ',')) {
    if (!id.empty()) ids.push_back(id);
  }
  return ids;
}

std::string header(const char* command, const Scenario& sc) {
  std::ostringstream h;
  h << "# wcn " << command << " seed=" << sc.seed
    << " mode=" << (sc.expectation.mode == ExpectationMode::Exact ? "exact" : "mc")
    << " samples=" << sc.expectation.sample_count << '\n';
  return h.str();
}

void emit(const Common& c, const std::string& text, std::ostream& out) {
  if (c.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + c.out + "'");
  f << text;
}

std::string profile_string(const PureProfile& x) {
  std::string s;
  for (Eigen::Index j = 0; j < x.size(); ++j) s.push_back(x(j) == 1 ? '1' : '0');
  return s;
}

std::size_t thread_count(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Equilibria and operator revenue of crowdsourced Wi-Fi community networks", "wcn"};
  app.require_subcommand(1);

  Common validate_opts;
  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("--scenario", validate_opts.scenario, "Scenario file (YAML)")->required();

  Common access_opts;
  std::size_t ap = 0;
  std::string roster;
  std::string bills;
  auto* access = app.add_subcommand("access-eq", "Solve one AP's network access game");
  add_common(access, access_opts);
  access->add_option("--ap", ap, "AP index (1-based)")->required()->check(CLI::PositiveNumber);
  access->add_option("--roster", roster, "Comma-separated ids of the visitors present")->required();
  access->add_option("--bills", bills, "Comma-separated ids of subscribers who are Bills");

  Common member_opts;
  std::string solve_kind = "both";
  auto* member = app.add_subcommand("membership-eq", "Solve the membership selection game");
  add_common(member, member_opts);
  member->add_option("--solve", solve_kind, "pure, mixed or both")->check(CLI::IsMember({"pure", "mixed", "both"}));

  Common sweep_opts;
  std::string p_grid;
  std::string delta_grid;
  std::size_t sweep_threads = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Operator revenue over a (p, delta) grid");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--p-grid", p_grid, "Prices a:b:step")->required();
  sweep_cmd->add_option("--delta-grid", delta_grid, "Revenue shares a:b:step")->required();
  sweep_cmd->add_option("--threads", sweep_threads, "Worker threads (0 = all cores)");

  Common phase_opts;
  std::string subscriber;
  std::string rho_grid = "0:1:0.05";
  std::string eta_grid = "0:1:0.05";
  std::size_t phase_threads = 0;
  auto* phase = app.add_subcommand("phase-plot", "Bill probability of one subscriber over (rho, eta_home)");
  add_common(phase, phase_opts);
  phase->add_option("--subscriber", subscriber, "Subscriber id (default: the first)");
  phase->add_option("--rho-grid", rho_grid, "Access valuations a:b:step");
  phase->add_option("--eta-grid", eta_grid, "Home probabilities a:b:step");
  phase->add_option("--threads", phase_threads, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (validate->parsed()) {
      const Scenario sc = load(validate_opts);
      out << "ok: subscribers=" << sc.subscriber_count()
          << " aliens=" << sc.user_count() - sc.subscriber_count() << '\n';
      return kExitOk;
    }

    if (access->parsed()) {
      const Scenario sc = load(access_opts);
      const std::size_t k = sc.subscriber_count();
      if (ap > k) throw ValidationError("--ap " + std::to_string(ap) + ": scenario has " + std::to_string(k) + " APs");
      PureProfile x = PureProfile::Zero(static_cast<Eigen::Index>(k));
      for (const std::string& id : split_ids(bills)) {
        const std::size_t u = sc.find_user(id);
        if (u >= k) throw ValidationError("--bills: '" + id + "' is not a subscriber");
        x(static_cast<Eigen::Index>(u)) = 1;
      }
      AccessGameInstance game;
      game.ap_id = ap - 1;
      game.price = sc.pricing.at(ap);
      game.rate_params = sc.rate_params;
      for (const std::string& id : split_ids(roster)) {
        const std::size_t u = sc.find_user(id);
        if (u == ap - 1) throw ValidationError("--roster: '" + id + "' owns AP " + std::to_string(ap));
        const PaymentType type = u < k && x(static_cast<Eigen::Index>(u)) == 0 ? PaymentType::Free : PaymentType::Paying;
        game.players.push_back({u, type, sc.users[u].rho});
      }
      try {
        game.validate();
      } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
      }
      const EquilibriumResult res = solve_equilibrium(game, sc.access_solver);
      if (!res.converged) err << "warning: best-response dynamics did not converge\n";
      std::ostringstream text;
      text << header("access-eq", sc);
      text << "# ap=" << ap << " price=" << format_decimal(game.price) << " converged=" << res.converged
           << " iterations=" << res.iterations << " residual=" << format_decimal(res.residual)
           << " contraction_constant=" << format_decimal(contraction_constant(sc.rate_params)) << '\n';
      text << "user,payment,rho,sigma\n";
      for (std::size_t j = 0; j < game.size(); ++j) {
        const Player& p = game.players[j];
        text << sc.users[p.id].id << ',' << (p.type == PaymentType::Free ? "free" : "paying") << ','
             << format_decimal(p.rho) << ',' << format_decimal(res.profile(static_cast<Eigen::Index>(j))) << '\n';
      }
      emit(access_opts, text.str(), out);
      return kExitOk;
    }

    if (member->parsed()) {
      const Scenario sc = load(member_opts);
      MembershipGame game(sc);
      const std::size_t k = game.subscribers();
      std::ostringstream text;
      text << header("membership-eq", sc);
      if (solve_kind != "mixed") {
        if (k > 12 || k > sc.expectation.exact_population_limit) {
          err << "warning: pure equilibria skipped, " << k << " subscribers is too many to enumerate\n";
        } else {
          const std::vector<PureProfile> eqs = game.pure_equilibria();
          text << "# pure_equilibria=" << eqs.size();
          for (const PureProfile& x : eqs) text << ' ' << profile_string(x);
          text << '\n';
        }
      }
      if (solve_kind != "pure") {
        const MixedResult res =
            game.solve_mixed_equilibrium(MixedProfile::Constant(static_cast<Eigen::Index>(k), 0.5));
        if (!res.converged) err << "warning: smoothed best response did not converge\n";
        text << "# mixed gamma=" << format_decimal(sc.mixed_solver.gamma) << " converged=" << res.converged
             << " iterations=" << res.iterations << " residual=" << format_decimal(res.residual) << '\n';
        text << "subscriber,alpha,v_bill,v_linus,converged\n";
        for (std::size_t i = 0; i < k; ++i) {
          const auto e = static_cast<Eigen::Index>(i);
          text << sc.users[i].id << ',' << format_decimal(res.alpha(e)) << ','
               << format_decimal(res.v_bill(e)) << ',' << format_decimal(res.v_linus(e)) << ','
               << (res.converged ? 1 : 0) << '\n';
        }
      }
      emit(member_opts, text.str(), out);
      return kExitOk;
    }

    if (sweep_cmd->parsed()) {
      const Scenario sc = load(sweep_opts);
      std::vector<double> ps;
      std::vector<double> ds;
      try {
        ps = parse_grid(p_grid);
        ds = parse_grid(delta_grid);
      } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
      }
      SweepOptions opts;
      opts.threads = thread_count(sweep_threads);
      RevenueSurface surface;
      try {
        surface = sweep(sc, ps, ds, opts);
      } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
      }
      std::ostringstream text;
      text << header("sweep", sc);
      text << "p,delta,revenue,converged,argmax\n";
      std::size_t flagged = 0;
      for (std::size_t pi = 0; pi < ps.size(); ++pi) {
        for (std::size_t di = 0; di < ds.size(); ++di) {
          const SweepCell& cell = surface.cell(pi, di);
          const bool best = surface.argmax && surface.argmax->first == pi && surface.argmax->second == di;
          if (!cell.valid || !cell.converged) ++flagged;
          text << format_decimal(ps[pi]) << ',' << format_decimal(ds[di]) << ','
               << format_decimal(surface.revenue(static_cast<Eigen::Index>(pi), static_cast<Eigen::Index>(di)))
               << ',' << (cell.valid && cell.converged ? 1 : 0) << ',' << (best ? 1 : 0) << '\n';
        }
      }
      if (flagged > 0) err << "warning: " << flagged << " cells did not converge or failed\n";
      emit(sweep_opts, text.str(), out);
      return kExitOk;
    }

    if (phase->parsed()) {
      const Scenario sc = load(phase_opts);
      const std::size_t who = subscriber.empty() ? 0 : sc.find_user(subscriber);
      if (who >= sc.subscriber_count()) throw ValidationError("--subscriber: '" + subscriber + "' is not a subscriber");
      std::vector<double> rhos;
      std::vector<double> etas;
      try {
        rhos = parse_grid(rho_grid);
        etas = parse_grid(eta_grid);
      } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
      }
      for (double e : etas) {
        if (!(e >= 0.0 && e <= 1.0)) throw ValidationError("--eta-grid: probabilities must lie in [0, 1]");
      }
      for (double r : rhos) {
        if (!(r >= 0.0)) throw ValidationError("--rho-grid: valuations must be nonnegative");
      }
      const PhaseDiagram pd = phase_diagram(sc, who, rhos, etas, thread_count(phase_threads));
      std::ostringstream text;
      text << header("phase-plot", sc);
      text << "# subscriber=" << sc.users[who].id << " gamma=" << format_decimal(sc.mixed_solver.gamma) << '\n';
      text << "rho,eta_home,alpha,converged\n";
      std::size_t flagged = 0;
      for (std::size_t r = 0; r < etas.size(); ++r) {
        for (std::size_t q = 0; q < rhos.size(); ++q) {
          const bool ok = pd.converged(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q));
          if (!ok) ++flagged;
          text << format_decimal(rhos[q]) << ',' << format_decimal(etas[r]) << ','
               << format_decimal(pd.alpha(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q))) << ','
               << (ok ? 1 : 0) << '\n';
        }
      }
      if (flagged > 0) err << "warning: " << flagged << " cells did not converge\n";
      emit(phase_opts, text.str(), out);
      return kExitOk;
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace wcn
