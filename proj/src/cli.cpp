#include "adamlab/cli.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "adamlab/continuous.hpp"
#include "adamlab/harness.hpp"
#include "adamlab/io.hpp"
#include "adamlab/scaleinv.hpp"

namespace adamlab {

namespace {

AdaptiveHyper parse_pair(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) {
        throw ConfigError("expected 'beta,gamma', got '" + s + "'");
    }
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
}

int cmd_run(const std::string& config_path, const std::string& output_override) {
    ExperimentConfig cfg = load_config_file(config_path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    const RunResult res = run_experiment(cfg);
    std::cout << "steps: " << (res.diverged_step >= 0 ? res.diverged_step : cfg.steps)
              << (res.diverged_step >= 0 ? " (diverged)" : "") << "\n";
    if (!res.records.empty()) {
        const auto& last = res.records.back();
        std::cout << "final loss: " << fmt_double(last.loss)
                  << "  max_update: " << fmt_double(last.max_update)
                  << "  bound: " << fmt_double(last.bound) << "\n";
    }
    if (!cfg.output_dir.empty()) {
        std::cout << "wrote " << cfg.output_dir << "/trajectory.csv\n";
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& output_override,
              const std::string& normal_through, bool have_level, double level_c,
              int points, long checkpoint, long slope_at, int workers) {
    ExperimentConfig cfg = load_config_file(config_path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    const OptimizerSetup opt = build_optimizer(cfg.optimizer_spec);

    CurveSample curve;
    if (have_level) {
        curve = level_curve(level_c, std::max(points, 2), {0.01, 0.999});
    } else {
        const AdaptiveHyper through =
            normal_through.empty() ? opt.primary_hyper() : parse_pair(normal_through);
        curve = normal_curve(through, std::max(points, 2), {0.0, 1.0});
    }

    SweepOptions so;
    so.points = points;
    so.checkpoint_step = checkpoint;
    so.slope_step = slope_at;
    so.workers = workers;
    const auto rows = sweep_along_curve(curve, cfg, so);

    int failures = 0;
    for (const auto& r : rows) {
        if (!r.error.empty()) ++failures;
    }
    std::cout << "sweep: " << rows.size() << " points, " << failures << " failed\n";
    if (!cfg.output_dir.empty()) std::cout << "wrote " << cfg.output_dir << "/sweep.csv\n";
    // per-point failures are reported in the summary rows, not via exit code
    return 0;
}

int cmd_curves(const std::string& normal_through, bool have_level, double level_c,
               int points, double beta_min, double beta_max, const std::string& output) {
    ensure_directory(output);
    std::vector<std::pair<std::string, std::string>> files;
    json config;
    config["points"] = points;
    config["beta_range"] = {beta_min, beta_max};

    if (!normal_through.empty()) {
        const AdaptiveHyper through = parse_pair(normal_through);
        const CurveSample c = normal_curve(through, points, {beta_min, beta_max});
        std::ostringstream os;
        write_curve_csv(c, os);
        atomic_write_file(output + "/normal_curve.csv", os.str());
        files.push_back({"normal_curve.csv", "normal curve, constant k = " +
                                                 fmt_double(c.constant)});
        config["normal_through"] = {through.beta, through.gamma};
        std::cout << "normal curve: " << c.points.size() << " points, k = "
                  << fmt_double(c.constant) << "\n";
    }
    if (have_level) {
        const CurveSample c = level_curve(level_c, points, {beta_min, std::min(beta_max, 0.9999)});
        std::ostringstream os;
        write_curve_csv(c, os);
        atomic_write_file(output + "/level_curve.csv", os.str());
        files.push_back({"level_curve.csv", "level curve, c = " + fmt_double(level_c)});
        config["level_c"] = level_c;
        std::cout << "level curve: " << c.points.size() << " points\n";
    }
    if (files.empty()) {
        std::cerr << "curves: specify --normal-through and/or --level-c\n";
        return 2;
    }
    write_manifest(output, config, files);
    return 0;
}

int cmd_continuous_compare(int dim, double condition, double eta, double beta, double gamma,
                           int steps, int substeps, std::uint64_t seed,
                           const std::string& output) {
    Problem problem = quadratic(dim, condition);

    json cfg;
    cfg["problem"] = {{"type", "quadratic"}, {"dim", dim}, {"condition", condition}};
    cfg["optimizer"] = {{"variant", "kadam"}, {"k", 1}, {"beta", beta},
                        {"gamma", gamma},     {"eta", eta}};
    cfg["steps"] = steps;
    cfg["seed"] = seed;
    ExperimentConfig ecfg = parse_config(cfg);
    RunOptions ro;
    ro.keep_theta_history = true;
    const RunResult discrete = run_experiment(ecfg, ro);

    ContinuousConfig cc;
    cc.eta = eta;
    cc.hyper = {beta, gamma};
    cc.substeps = substeps;
    ContinuousState state = make_continuous_state(discrete.theta0);
    std::vector<Vec> cont_traj{state.theta};
    integrate_steps(state, problem.grad, cc, steps,
                    [&](int, const ContinuousState& s) { cont_traj.push_back(s.theta); });

    // per-coordinate max deviation relative to the discrete trajectory range
    double worst_rel = 0.0;
    for (int i = 0; i < dim; ++i) {
        double lo = 1e300, hi = -1e300, dev = 0.0;
        for (std::size_t n = 0; n < cont_traj.size(); ++n) {
            const double d = discrete.theta_history[n][static_cast<std::size_t>(i)];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
            dev = std::max(dev, std::abs(d - cont_traj[n][static_cast<std::size_t>(i)]));
        }
        if (hi > lo) worst_rel = std::max(worst_rel, dev / (hi - lo));
    }
    std::cout << "max per-coordinate deviation: " << fmt_double(worst_rel)
              << " of trajectory range over " << steps << " steps\n";

    if (!output.empty()) {
        std::ostringstream os;
        os << "t,coordinate,theta_discrete,theta_continuous\n";
        for (std::size_t n = 0; n < cont_traj.size(); ++n) {
            const double t = static_cast<double>(n) * eta;
            for (int i = 0; i < dim; ++i) {
                os << fmt_double(t) << ',' << i << ','
                   << fmt_double(discrete.theta_history[n][static_cast<std::size_t>(i)]) << ','
                   << fmt_double(cont_traj[n][static_cast<std::size_t>(i)]) << '\n';
            }
        }
        ensure_directory(output);
        atomic_write_file(output + "/continuous_compare.csv", os.str());
        write_manifest(output, cfg,
                       {{"continuous_compare.csv", "discrete vs Euler-integrated trajectory"}});
        std::cout << "wrote " << output << "/continuous_compare.csv\n";
    }
    return 0;
}

int cmd_scaleinv_report(int dim, std::uint64_t seed, int steps, double eta, double lambda,
                        const std::string& output) {
    json cfg;
    cfg["problem"] = {{"type", "scale_invariant"}, {"dim", dim}, {"seed", seed}};
    cfg["optimizer"] = {{"variant", "kadam"}, {"k", 1},       {"beta", 0.999},
                        {"gamma", 0.9},       {"eta", eta},   {"lambda", lambda},
                        {"coupled", false}};
    cfg["steps"] = steps;
    cfg["seed"] = seed;
    ExperimentConfig ecfg = parse_config(cfg);
    RunOptions ro;
    ro.keep_theta_history = true;
    ro.keep_update_history = true;
    const RunResult res = run_experiment(ecfg, ro);

    Problem problem = build_problem(ecfg.problem_spec);
    const auto& block = problem.tracked_blocks.front(); // W_Q
    const int b0 = block.second.first, b1 = block.second.second;
    auto slice = [&](const Vec& v) { return Vec(v.begin() + b0, v.begin() + b1); };

    std::vector<Vec> w_traj, g_traj, u_traj;
    for (std::size_t n = 0; n + 1 < res.theta_history.size(); ++n) {
        w_traj.push_back(slice(res.theta_history[n]));
        g_traj.push_back(slice(problem.grad(res.theta_history[n])));
        u_traj.push_back(slice(res.update_history[n]));
    }

    const auto equal_time = equal_time_orthogonality(w_traj, g_traj);
    const auto vs_final = orthogonality_trace(w_traj, g_traj);

    std::vector<double> u_sq, phi;
    for (std::size_t n = 0; n < res.theta_history.size(); ++n) {
        phi.push_back(norm_sq(slice(res.theta_history[n])));
        if (n < u_traj.size()) u_sq.push_back(norm_sq(u_traj[n]));
    }
    const NormPrediction np = predict_norm(u_sq, phi, phi.front(), eta, lambda, eta);

    std::vector<Vec> w_full(w_traj);
    w_full.push_back(slice(res.theta_history.back()));
    std::vector<Vec> u_full(u_traj);
    u_full.push_back(u_traj.back()); // pad; the final interior sample needs n+1
    const auto residuals = direction_residual(w_full, u_full, eta, eta);

    double max_equal_time = 0.0;
    for (double v : equal_time) {
        if (std::isfinite(v)) max_equal_time = std::max(max_equal_time, v);
    }
    const auto& final_np = np.samples.back();
    const double norm_rel_err =
        std::abs(final_np.predicted - final_np.actual) / std::abs(final_np.actual);
    double mean_residual = 0.0;
    for (const auto& r : residuals) mean_residual += r.residual_norm;
    mean_residual /= static_cast<double>(residuals.size());

    std::cout << "max equal-time |<W,g>|/(|W||g|): " << fmt_double(max_equal_time) << "\n"
              << "norm prediction relative error at final step: " << fmt_double(norm_rel_err)
              << "\n"
              << "mean direction-residual norm: " << fmt_double(mean_residual) << "\n";

    if (!output.empty()) {
        ensure_directory(output);
        {
            std::ostringstream os;
            os << "step,equal_time,vs_final\n";
            for (std::size_t n = 0; n < equal_time.size(); ++n) {
                os << n << ',' << fmt_double(equal_time[n]) << ',' << fmt_double(vs_final[n])
                   << '\n';
            }
            atomic_write_file(output + "/orthogonality.csv", os.str());
        }
        {
            std::ostringstream os;
            os << "t,predicted,actual\n";
            for (const auto& s : np.samples) {
                os << fmt_double(s.t) << ',' << fmt_double(s.predicted) << ','
                   << fmt_double(s.actual) << '\n';
            }
            atomic_write_file(output + "/norm_prediction.csv", os.str());
        }
        {
            std::ostringstream os;
            os << "t,residual_norm,capital_lambda\n";
            for (const auto& r : residuals) {
                os << fmt_double(r.t) << ',' << fmt_double(r.residual_norm) << ','
                   << fmt_double(r.capital_lambda) << '\n';
            }
            atomic_write_file(output + "/direction_residual.csv", os.str());
        }
        write_manifest(output, cfg,
                       {{"orthogonality.csv", "normalized <W, g> statistics"},
                        {"norm_prediction.csv", "predicted vs measured ||W||^2"},
                        {"direction_residual.csv", "direction-dynamics residuals"}});
        std::cout << "wrote report CSVs under " << output << "\n";
    }
    return 0;
}

int cmd_strategies(int k, double beta, double gamma) {
    const AdaptiveHyper base{beta, gamma};
    std::printf("strategy      beta_i              gamma_i\n");
    for (const Strategy s :
         {Strategy::InverseExp, Strategy::Exp, Strategy::Scaled, Strategy::Naive}) {
        const auto stages = strategy_hyperparams(s, k, base);
        std::printf("%-12s  %-18s  %-18s\n", strategy_name(s).c_str(),
                    fmt_double(stages.front().beta).c_str(),
                    fmt_double(stages.front().gamma).c_str());
    }
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"adamlab: adaptive-optimizer stability laboratory"};
    app.require_subcommand(1);

    std::string config_path, output, normal_through;
    double level_c = 0.0;
    bool have_level = false;
    int points = 64;
    long checkpoint = 0, slope_at = 0;
    int workers = 0;

    auto* run = app.add_subcommand("run", "execute one experiment config");
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--output", output, "override output directory");

    auto* sweep = app.add_subcommand("sweep", "run a hyperparameter sweep along a curve");
    sweep->add_option("--config", config_path, "JSON config file")->required();
    sweep->add_option("--points", points, "number of curve points");
    sweep->add_option("--normal-through", normal_through,
                      "beta,gamma the normal curve passes through");
    sweep->add_option("--level-c", level_c, "sweep a level curve at this c instead")
        ->each([&](const std::string&) { have_level = true; });
    sweep->add_option("--checkpoint", checkpoint, "held-out checkpoint step");
    sweep->add_option("--slope-at", slope_at, "fit log-slope at this step");
    sweep->add_option("--workers", workers, "concurrent runs (0 = auto)");
    sweep->add_option("--output", output, "override output directory");

    double beta_min = 0.05, beta_max = 0.9995;
    auto* curves = app.add_subcommand("curves", "emit level/normal curve CSVs");
    curves->add_option("--normal-through", normal_through, "beta,gamma on the normal curve");
    curves->add_option("--level-c", level_c, "level-curve constant")
        ->each([&](const std::string&) { have_level = true; });
    curves->add_option("--points", points, "samples per curve");
    curves->add_option("--beta-min", beta_min, "lower beta bound");
    curves->add_option("--beta-max", beta_max, "upper beta bound");
    curves->add_option("--output", output, "output directory")->required();

    int dim = 100, steps = 100, substeps = 100;
    double condition = 100.0, eta = 1e-3, beta = 0.999, gamma = 0.9, lambda = 1e-2;
    std::uint64_t seed = 1;
    auto* cc = app.add_subcommand("continuous-compare",
                                  "discrete Adam vs Euler-integrated dynamics on a quadratic");
    cc->add_option("--dim", dim, "quadratic dimension");
    cc->add_option("--condition", condition, "quadratic condition number");
    cc->add_option("--eta", eta, "learning rate");
    cc->add_option("--beta", beta, "second-moment decay");
    cc->add_option("--gamma", gamma, "first-moment decay");
    cc->add_option("--steps", steps, "optimizer steps");
    cc->add_option("--substeps", substeps, "Euler substeps per optimizer step (K)");
    cc->add_option("--seed", seed, "init seed");
    cc->add_option("--output", output, "output directory");

    int si_dim = 48, si_steps = 100;
    auto* si = app.add_subcommand("scaleinv-report",
                                  "orthogonality / norm-dynamics / residual suite");
    si->add_option("--dim", si_dim, "total parameter count (divisible by 4)");
    si->add_option("--seed", seed, "problem seed");
    si->add_option("--steps", si_steps, "optimizer steps");
    si->add_option("--eta", eta, "learning rate");
    si->add_option("--lambda", lambda, "decoupled weight decay");
    si->add_option("--output", output, "output directory");

    int k = 2;
    auto* strat = app.add_subcommand("strategies", "tabulate k-Adam hyperparameter strategies");
    strat->add_option("--k", k, "stage count");
    strat->add_option("--beta", beta, "base beta");
    strat->add_option("--gamma", gamma, "base gamma");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (run->parsed()) return cmd_run(config_path, output);
        if (sweep->parsed()) {
            return cmd_sweep(config_path, output, normal_through, have_level, level_c, points,
                             checkpoint, slope_at, workers);
        }
        if (curves->parsed()) {
            return cmd_curves(normal_through, have_level, level_c, points, beta_min, beta_max,
                              output);
        }
        if (cc->parsed()) {
            return cmd_continuous_compare(dim, condition, eta, beta, gamma, steps, substeps,
                                          seed, output);
        }
        if (si->parsed()) {
            return cmd_scaleinv_report(si_dim, seed, si_steps, eta, lambda, output);
        }
        if (strat->parsed()) return cmd_strategies(k, beta, gamma);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace adamlab
