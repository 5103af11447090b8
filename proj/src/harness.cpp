#include "adamlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "adamlab/io.hpp"

namespace adamlab {

namespace {

const json& require_field(const json& j, const char* field, const char* where) {
    if (!j.contains(field)) {
        throw ConfigError(std::string(where) + ": missing required field '" + field + "'");
    }
    return j.at(field);
}

template <typename T>
T get_or(const json& j, const char* field, T fallback) {
    if (!j.contains(field)) return fallback;
    return j.at(field).get<T>();
}

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

// Bound columns only apply where the bound's hypotheses hold.
bool bound_applies(const AdaptiveHyper& h) {
    return h.beta > 0.0 && h.beta < 1.0 && h.gamma > 0.0 && h.gamma < 1.0;
}

} // namespace

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    c.raw = j;
    c.problem_spec = require_field(j, "problem", "config");
    c.optimizer_spec = require_field(j, "optimizer", "config");
    c.schedule_spec = j.contains("schedule") ? j.at("schedule") : json::object();
    c.steps = require_field(j, "steps", "config").get<long>();
    if (c.steps < 1) throw ConfigError("config: 'steps' must be >= 1");
    c.seed = get_or<std::uint64_t>(j, "seed", 0);
    c.log_every = get_or<long>(j, "log_every", 1);
    if (c.log_every < 1) throw ConfigError("config: 'log_every' must be >= 1");
    c.output_dir = get_or<std::string>(j, "output", "");

    // validate eagerly so bad configs fail before any work is done
    build_problem(c.problem_spec);
    const OptimizerSetup opt = build_optimizer(c.optimizer_spec);
    build_schedule(c.schedule_spec, opt);
    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_config(j);
}

Problem build_problem(const json& spec) {
    const std::string type = require_field(spec, "type", "problem").get<std::string>();
    if (type == "quadratic") {
        return quadratic(require_field(spec, "dim", "problem.quadratic").get<int>(),
                         get_or<double>(spec, "condition", 100.0));
    }
    if (type == "rosenbrock") {
        return rosenbrock(require_field(spec, "dim", "problem.rosenbrock").get<int>());
    }
    if (type == "tiny_mlp") {
        MlpSpec m;
        m.input_dim = get_or<int>(spec, "input_dim", m.input_dim);
        m.hidden = get_or<int>(spec, "hidden", m.hidden);
        m.classes = get_or<int>(spec, "classes", m.classes);
        m.dataset_seed = get_or<std::uint64_t>(spec, "dataset_seed", m.dataset_seed);
        m.n_samples = get_or<int>(spec, "n_samples", m.n_samples);
        m.batch_size = get_or<int>(spec, "batch_size", m.batch_size);
        m.heldout_samples = get_or<int>(spec, "heldout_samples", m.heldout_samples);
        m.cluster_scale = get_or<double>(spec, "cluster_scale", m.cluster_scale);
        return tiny_mlp(m);
    }
    if (type == "scale_invariant") {
        return scale_invariant_problem(get_or<int>(spec, "dim", 48),
                                       get_or<std::uint64_t>(spec, "seed", 7),
                                       get_or<int>(spec, "pairs_per_batch", 0));
    }
    throw ConfigError("problem: unknown type '" + type + "'");
}

OptimizerSetup build_optimizer(const json& spec) {
    OptimizerSetup o;
    const std::string variant = get_or<std::string>(spec, "variant", "kadam");
    o.eta = get_or<double>(spec, "eta", 1e-3);
    o.lambda = get_or<double>(spec, "lambda", 0.0);

    if (variant == "kadam" || variant == "adam") {
        o.is_kadam = true;
        KAdamConfig& k = o.kadam;
        k.k = get_or<int>(spec, "k", 1);
        k.eta = o.eta;
        k.lambda = o.lambda;
        k.coupled = get_or<bool>(spec, "coupled", false);
        k.epsilon = get_or<double>(spec, "epsilon", 1e-30);
        if (spec.contains("stages")) {
            for (const auto& s : spec.at("stages")) {
                if (!s.is_array() || s.size() != 2) {
                    throw ConfigError("optimizer.stages: each stage must be [beta, gamma]");
                }
                k.stages.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
            }
            if (static_cast<int>(k.stages.size()) != k.k) {
                throw ConfigError("optimizer.stages: expected " + std::to_string(k.k) +
                                  " entries");
            }
        } else {
            AdaptiveHyper base{get_or<double>(spec, "beta", 0.999),
                               get_or<double>(spec, "gamma", 0.9)};
            const Strategy strat =
                strategy_from_string(get_or<std::string>(spec, "strategy", "naive"));
            k.stages = strategy_hyperparams(strat, k.k, base);
        }
        try {
            k.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("optimizer: ") + e.what());
        }
        return o;
    }

    o.is_kadam = false;
    try {
        o.legacy = legacy_from_string(variant);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("optimizer: ") + e.what());
    }
    o.legacy_hyper = {get_or<double>(spec, "beta", 0.999), get_or<double>(spec, "gamma", 0.9)};
    validate_hyper(o.legacy_hyper, "optimizer");
    return o;
}

Schedule build_schedule(const json& spec, const OptimizerSetup& opt) {
    const std::string kind = get_or<std::string>(spec, "kind", "constant");
    const double eta0 = get_or<double>(spec, "eta0", opt.eta);
    if (kind == "constant") return constant_schedule(eta0);
    if (kind == "warmup_cosine") {
        return warmup_cosine_schedule(
            eta0, require_field(spec, "warmup_steps", "schedule").get<long>(),
            require_field(spec, "total_steps", "schedule").get<long>(),
            get_or<double>(spec, "floor", -1.0));
    }
    if (kind == "anneal_c") {
        double c;
        if (spec.contains("c_value")) {
            c = spec.at("c_value").get<double>();
        } else {
            c = stability_coefficient(opt.primary_hyper());
        }
        return anneal_c_schedule(eta0, c);
    }
    throw ConfigError("schedule: unknown kind '" + kind + "'");
}

namespace {

std::vector<double> block_norms(const Problem& problem, const Vec& theta) {
    std::vector<double> out;
    out.reserve(problem.tracked_blocks.size());
    for (const auto& [name, range] : problem.tracked_blocks) {
        double s = 0.0;
        for (int i = range.first; i < range.second; ++i) {
            s += theta[static_cast<std::size_t>(i)] * theta[static_cast<std::size_t>(i)];
        }
        out.push_back(s);
    }
    return out;
}

} // namespace

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    Problem problem = build_problem(config.problem_spec);
    OptimizerSetup opt = build_optimizer(config.optimizer_spec);
    const Schedule schedule = build_schedule(config.schedule_spec, opt);

    const int k = opt.is_kadam ? opt.kadam.k : 1;
    std::vector<bool> stage_bounded(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const AdaptiveHyper h =
            opt.is_kadam ? opt.kadam.stages[static_cast<std::size_t>(i)] : opt.legacy_hyper;
        stage_bounded[static_cast<std::size_t>(i)] = opt.is_kadam && bound_applies(h);
    }

    RunResult result;
    Rng rng(mix_seed(config.seed, 0x7a61ULL));
    Vec theta = problem.initial_theta(rng);
    result.theta0 = theta;
    OptState state = make_opt_state(problem.dim, k);

    if (options.keep_theta_history) result.theta_history.push_back(theta);

    auto checkpoint_it = options.heldout_checkpoints;
    std::sort(checkpoint_it.begin(), checkpoint_it.end());

    for (long n = 0; n < config.steps; ++n) {
        if (problem.select_batch) problem.select_batch(n);
        const double loss = problem.loss(theta);
        const double eta_n = eta_at(schedule, n);

        const bool diverged_now =
            !std::isfinite(loss) || std::abs(loss) > kDivergenceCutoff ||
            !all_finite(theta) || norm_inf(theta) > kDivergenceCutoff;
        if (diverged_now) {
            TrajectoryRecord marker;
            marker.step = n;
            marker.loss = loss;
            marker.max_update = nan_value();
            marker.bound = nan_value();
            marker.eta_n = eta_n;
            marker.stage_max_updates.assign(static_cast<std::size_t>(k), nan_value());
            marker.stage_bounds.assign(static_cast<std::size_t>(k), nan_value());
            marker.param_norm_sq = block_norms(problem, theta);
            marker.diverged = true;
            result.records.push_back(std::move(marker));
            result.diverged_step = n;
            break;
        }

        Vec grad = problem.grad(theta);
        Vec adaptive_update;
        std::vector<double> stage_inf(static_cast<std::size_t>(k));
        if (opt.is_kadam) {
            KAdamConfig step_cfg = opt.kadam;
            step_cfg.eta = eta_n;
            KAdamStep s = kadam_step(theta, grad, state, step_cfg);
            for (int i = 0; i < k; ++i) {
                stage_inf[static_cast<std::size_t>(i)] =
                    norm_inf(s.stage_updates[static_cast<std::size_t>(i)]);
            }
            adaptive_update = std::move(s.stage_updates.back());
            theta = std::move(s.theta);
        } else {
            LegacyStep s = legacy_step(opt.legacy, theta, grad, state, eta_n, opt.lambda,
                                       opt.legacy_hyper);
            stage_inf[0] = norm_inf(s.update);
            adaptive_update = std::move(s.update);
            theta = std::move(s.theta);
        }

        if (options.keep_theta_history) result.theta_history.push_back(theta);
        if (options.keep_update_history) result.update_history.push_back(adaptive_update);

        if (n % config.log_every == 0 || n == config.steps - 1) {
            TrajectoryRecord rec;
            rec.step = n;
            rec.loss = loss;
            rec.eta_n = eta_n;
            rec.stage_max_updates = stage_inf;
            rec.stage_bounds.resize(static_cast<std::size_t>(k));
            for (int i = 0; i < k; ++i) {
                rec.stage_bounds[static_cast<std::size_t>(i)] =
                    stage_bounded[static_cast<std::size_t>(i)]
                        ? max_update_bound(opt.kadam.stages[static_cast<std::size_t>(i)], n)
                        : nan_value();
            }
            rec.max_update = stage_inf.back();
            rec.bound = rec.stage_bounds.back();
            rec.param_norm_sq = block_norms(problem, theta);
            result.records.push_back(std::move(rec));
        }

        if (std::binary_search(checkpoint_it.begin(), checkpoint_it.end(), n + 1)) {
            result.heldout_at[n + 1] = problem.eval_heldout_loss(theta);
        }
    }

    result.final_theta = theta;

    if (!config.output_dir.empty()) {
        std::vector<std::string> block_names;
        for (const auto& [name, range] : problem.tracked_blocks) block_names.push_back(name);
        const std::string csv = trajectory_csv(result.records, block_names, k);
        ensure_directory(config.output_dir);
        atomic_write_file(config.output_dir + "/trajectory.csv", csv);
        write_manifest(config.output_dir, config.raw,
                       {{"trajectory.csv", "step records (see columns)"}});
    }
    return result;
}

double fit_log_slope(const std::vector<TrajectoryRecord>& records, long at_step,
                     long half_window) {
    if (half_window < 1) throw std::invalid_argument("fit_log_slope: half_window must be >= 1");
    double lo = nan_value(), hi = nan_value();
    for (const auto& r : records) {
        if (r.step == at_step - half_window) lo = r.max_update;
        if (r.step == at_step + half_window) hi = r.max_update;
    }
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo <= 0.0 || hi <= 0.0) {
        throw std::runtime_error("fit_log_slope: window [" +
                                 std::to_string(at_step - half_window) + ", " +
                                 std::to_string(at_step + half_window) +
                                 "] missing or not positive");
    }
    return (std::log(hi) - std::log(lo)) / static_cast<double>(2 * half_window);
}

BoundReport verify_bound(const std::vector<TrajectoryRecord>& records,
                         const AdaptiveHyper& hyper, double slack) {
    BoundReport report;
    for (const auto& r : records) {
        if (r.diverged || !std::isfinite(r.max_update)) continue;
        const double bound = max_update_bound(hyper, r.step);
        ++report.checked;
        const double ratio = r.max_update / bound;
        report.worst_ratio = std::max(report.worst_ratio, ratio);
        if (r.max_update > slack * bound) ++report.violations;
    }
    return report;
}

std::vector<SweepRow> sweep_along_curve(const CurveSample& curve,
                                        const ExperimentConfig& base,
                                        const SweepOptions& options) {
    if (curve.points.empty()) throw std::invalid_argument("sweep: empty curve");
    const int points = std::min<int>(options.points, static_cast<int>(curve.points.size()));
    if (points < 1) throw std::invalid_argument("sweep: need at least one point");

    std::vector<AdaptiveHyper> hypers;
    hypers.reserve(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        const std::size_t idx =
            points == 1 ? 0
                        : static_cast<std::size_t>(
                              std::llround(static_cast<double>(i) *
                                           (curve.points.size() - 1) / (points - 1)));
        hypers.push_back(curve.points[idx]);
    }

    const long checkpoint =
        options.checkpoint_step > 0 ? options.checkpoint_step : base.steps / 2;

    std::vector<SweepRow> rows(hypers.size());
    auto run_point = [&](std::size_t i) {
        SweepRow& row = rows[i];
        row.hyper = hypers[i];
        row.fitted_slope = nan_value();
        try {
            row.c_value = stability_coefficient(row.hyper);
            const StabilityPoint sp = classify(row.hyper);
            row.predicted_slope = sp.growth_exponent;

            ExperimentConfig cfg = base;
            cfg.output_dir.clear(); // per-point files are written below, atomically
            cfg.optimizer_spec["beta"] = row.hyper.beta;
            cfg.optimizer_spec["gamma"] = row.hyper.gamma;
            cfg.optimizer_spec.erase("stages");
            cfg.raw["optimizer"] = cfg.optimizer_spec;
            cfg.log_every = 1;

            RunOptions ro;
            ro.heldout_checkpoints = {checkpoint};
            const RunResult res = run_experiment(cfg, ro);

            row.diverged_step = res.diverged_step;
            row.steps_run = res.diverged_step >= 0 ? res.diverged_step : base.steps;
            row.best_loss = std::numeric_limits<double>::infinity();
            row.final_loss = nan_value();
            for (const auto& r : res.records) {
                if (r.diverged) continue;
                row.best_loss = std::min(row.best_loss, r.loss);
                row.final_loss = r.loss;
            }
            row.checkpoint_loss = res.heldout_at.count(checkpoint)
                                      ? res.heldout_at.at(checkpoint)
                                      : nan_value();

            const BoundReport br = verify_bound(res.records, row.hyper, options.slack);
            row.bound_violations = br.violations;
            row.worst_bound_ratio = br.worst_ratio;

            if (options.slope_step > 0) {
                long at = options.slope_step;
                if (res.diverged_step >= 0) {
                    at = std::min(at, res.diverged_step - options.slope_half_window - 1);
                }
                try {
                    row.fitted_slope = fit_log_slope(res.records, at, options.slope_half_window);
                } catch (const std::exception&) {
                    row.fitted_slope = nan_value(); // undefined slope stays flagged
                }
            }

            if (!base.output_dir.empty()) {
                std::vector<std::string> block_names;
                const Problem prob = build_problem(base.problem_spec);
                for (const auto& [name, range] : prob.tracked_blocks) {
                    block_names.push_back(name);
                }
                const OptimizerSetup opt = build_optimizer(cfg.optimizer_spec);
                char tag[64];
                std::snprintf(tag, sizeof(tag), "point_%03zu", i);
                atomic_write_file(base.output_dir + "/" + tag + ".csv",
                                  trajectory_csv(res.records, block_names,
                                                 opt.is_kadam ? opt.kadam.k : 1));
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    };

    int workers = options.workers > 0
                      ? options.workers
                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min<int>(workers, static_cast<int>(hypers.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < hypers.size(); ++i) run_point(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < hypers.size();
                     i = next.fetch_add(1)) {
                    run_point(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    std::sort(rows.begin(), rows.end(),
              [](const SweepRow& a, const SweepRow& b) { return a.c_value > b.c_value; });

    if (!base.output_dir.empty()) {
        atomic_write_file(base.output_dir + "/sweep.csv", sweep_csv(rows));
        write_manifest(base.output_dir, base.raw,
                       {{"sweep.csv", "per-point summaries, sorted by c_value descending"},
                        {"point_*.csv", "per-point trajectories"}});
    }
    return rows;
}

std::string trajectory_csv(const std::vector<TrajectoryRecord>& records,
                           const std::vector<std::string>& block_names, int k) {
    std::ostringstream os;
    os << "step,loss,max_update,bound,eta_n";
    for (int i = 1; i <= k; ++i) {
        os << ",u_inf_stage" << i << ",bound_stage" << i;
    }
    for (const auto& name : block_names) os << ",norm_sq_" << name;
    os << ",diverged\n";
    for (const auto& r : records) {
        os << r.step << ',' << fmt_double(r.loss) << ',' << fmt_double(r.max_update) << ','
           << fmt_double(r.bound) << ',' << fmt_double(r.eta_n);
        for (int i = 0; i < k; ++i) {
            const bool have = static_cast<std::size_t>(i) < r.stage_max_updates.size();
            os << ',' << fmt_double(have ? r.stage_max_updates[static_cast<std::size_t>(i)]
                                         : nan_value())
               << ',' << fmt_double(have ? r.stage_bounds[static_cast<std::size_t>(i)]
                                         : nan_value());
        }
        for (std::size_t b = 0; b < block_names.size(); ++b) {
            os << ',' << fmt_double(b < r.param_norm_sq.size() ? r.param_norm_sq[b]
                                                               : nan_value());
        }
        os << ',' << (r.diverged ? 1 : 0) << '\n';
    }
    return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "beta,gamma,c_value,steps_run,final_loss,best_loss,checkpoint_loss,"
          "fitted_slope,predicted_slope,bound_violations,worst_bound_ratio,"
          "diverged_step,error\n";
    for (const auto& r : rows) {
        os << fmt_double(r.hyper.beta) << ',' << fmt_double(r.hyper.gamma) << ','
           << fmt_double(r.c_value) << ',' << r.steps_run << ',' << fmt_double(r.final_loss)
           << ',' << fmt_double(r.best_loss) << ',' << fmt_double(r.checkpoint_loss) << ','
           << fmt_double(r.fitted_slope) << ',' << fmt_double(r.predicted_slope) << ','
           << r.bound_violations << ',' << fmt_double(r.worst_bound_ratio) << ','
           << r.diverged_step << ',' << r.error << '\n';
    }
    return os.str();
}

std::uint64_t config_hash(const json& j) {
    // FNV-1a over the canonical (sorted-key) dump
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void write_manifest(const std::string& output_dir, const json& config,
                    const std::vector<std::pair<std::string, std::string>>& files) {
    json m;
    m["schema_version"] = 1;
    m["tool"] = "adamlab";
    m["config"] = config;
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(config_hash(config)));
    m["config_hash"] = hex;
    json fl = json::array();
    for (const auto& [name, desc] : files) {
        fl.push_back({{"name", name}, {"description", desc}});
    }
    m["files"] = fl;
    atomic_write_file(output_dir + "/manifest.json", m.dump(2) + "\n");
}

double spearman_rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw std::invalid_argument("spearman: need two equally sized samples with n >= 2");
    }
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (std::size_t pos = 0; pos < idx.size();) {
            std::size_t end = pos;
            while (end + 1 < idx.size() && v[idx[end + 1]] == v[idx[pos]]) ++end;
            const double mean_rank = 0.5 * (pos + end) + 1.0; // ties share the mean rank
            for (std::size_t q = pos; q <= end; ++q) r[idx[q]] = mean_rank;
            pos = end + 1;
        }
        return r;
    };
    const std::vector<double> ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    if (da == 0.0 || db == 0.0) return 0.0;
    return num / std::sqrt(da * db);
}

} // namespace adamlab
