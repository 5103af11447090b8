#include "adamlab/problems.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "adamlab/scaleinv.hpp"

namespace adamlab {

namespace {

// Cheap sampled gradient check run once at construction; catches a broken
// analytic gradient before it silently corrupts every downstream experiment.
void construction_check(const Problem& p, std::uint64_t seed) {
    const double worst = gradient_check(p, 2, seed, std::min(p.dim, 6));
    if (!(worst <= 1e-4)) {
        throw std::logic_error(p.name + ": analytic gradient fails finite-difference check (" +
                               std::to_string(worst) + ")");
    }
}

} // namespace

Vec finite_difference_gradient(const std::function<double(const Vec&)>& f,
                               const Vec& x, double h) {
    Vec g(x.size());
    Vec probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double hi = h * (1.0 + std::abs(x[i]));
        const double orig = probe[i];
        probe[i] = orig + hi;
        const double fp = f(probe);
        probe[i] = orig - hi;
        const double fm = f(probe);
        probe[i] = orig;
        g[i] = (fp - fm) / (2.0 * hi);
    }
    return g;
}

double gradient_check(const Problem& problem, int points, std::uint64_t seed,
                      int coords_per_point) {
    Rng rng(mix_seed(seed, 0xabcdefULL));
    double worst = 0.0;
    for (int p = 0; p < points; ++p) {
        Vec theta = problem.initial_theta(rng);
        for (double& x : theta) x += 0.3 * rng.normal();

        const Vec analytic = problem.eval_full_grad(theta);
        const double scale = std::max(1.0, norm_inf(analytic));

        std::vector<std::size_t> coords(theta.size());
        std::iota(coords.begin(), coords.end(), 0);
        if (coords_per_point > 0 && coords_per_point < problem.dim) {
            rng.shuffle(coords);
            coords.resize(static_cast<std::size_t>(coords_per_point));
        }

        Vec probe = theta;
        for (std::size_t i : coords) {
            const double hi = 1e-5 * (1.0 + std::abs(theta[i]));
            const double orig = probe[i];
            probe[i] = orig + hi;
            const double fp = problem.eval_full_loss(probe);
            probe[i] = orig - hi;
            const double fm = problem.eval_full_loss(probe);
            probe[i] = orig;
            const double fd = (fp - fm) / (2.0 * hi);
            worst = std::max(worst, std::abs(fd - analytic[i]) / scale);
        }
    }
    return worst;
}

Problem quadratic_diag(Vec diag) {
    if (diag.empty()) throw std::invalid_argument("quadratic_diag: empty spectrum");
    Problem p;
    p.name = "quadratic";
    p.dim = static_cast<int>(diag.size());
    auto d = std::make_shared<Vec>(std::move(diag));
    p.loss = [d](const Vec& theta) {
        check_same_size(theta, *d, "quadratic loss");
        double s = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) s += (*d)[i] * theta[i] * theta[i];
        return 0.5 * s;
    };
    p.grad = [d](const Vec& theta) {
        check_same_size(theta, *d, "quadratic grad");
        Vec g(theta.size());
        for (std::size_t i = 0; i < theta.size(); ++i) g[i] = (*d)[i] * theta[i];
        return g;
    };
    p.tracked_blocks = {{"theta", {0, p.dim}}};
    construction_check(p, 17);
    return p;
}

Problem quadratic(int dim, double condition) {
    if (dim < 1) throw std::invalid_argument("quadratic: dim must be >= 1");
    if (condition < 1.0) throw std::invalid_argument("quadratic: condition must be >= 1");
    Vec diag(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        diag[static_cast<std::size_t>(i)] =
            dim == 1 ? 1.0 : std::pow(condition, static_cast<double>(i) / (dim - 1));
    }
    return quadratic_diag(std::move(diag));
}

Problem rosenbrock(int dim) {
    if (dim < 2 || dim % 2 != 0) {
        throw std::invalid_argument("rosenbrock: dim must be even and >= 2");
    }
    Problem p;
    p.name = "rosenbrock";
    p.dim = dim;
    p.loss = [](const Vec& theta) {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < theta.size(); i += 2) {
            const double t1 = 1.0 - theta[i];
            const double t2 = theta[i + 1] - theta[i] * theta[i];
            s += t1 * t1 + 100.0 * t2 * t2;
        }
        return s;
    };
    p.grad = [](const Vec& theta) {
        Vec g(theta.size(), 0.0);
        for (std::size_t i = 0; i + 1 < theta.size(); i += 2) {
            const double t1 = 1.0 - theta[i];
            const double t2 = theta[i + 1] - theta[i] * theta[i];
            g[i] = -2.0 * t1 - 400.0 * theta[i] * t2;
            g[i + 1] = 200.0 * t2;
        }
        return g;
    };
    p.tracked_blocks = {{"theta", {0, dim}}};
    construction_check(p, 19);
    return p;
}

namespace {

struct MlpData {
    MlpSpec spec;
    std::vector<Vec> x;      // train inputs
    std::vector<int> y;      // train labels
    std::vector<Vec> x_held; // held-out inputs
    std::vector<int> y_held;
    // current batch (indices into the train split)
    mutable std::vector<int> batch;
    int batch_count = 1;
};

void mlp_dims(const MlpSpec& s, int& w1, int& b1, int& w2, int& b2, int& total) {
    w1 = s.hidden * s.input_dim;
    b1 = s.hidden;
    w2 = s.classes * s.hidden;
    b2 = s.classes;
    total = w1 + b1 + w2 + b2;
}

double mlp_forward_backward(const MlpData& data, const Vec& theta,
                            const std::vector<int>& indices,
                            const std::vector<Vec>& xs, const std::vector<int>& ys,
                            Vec* grad_out) {
    const MlpSpec& s = data.spec;
    int w1n, b1n, w2n, b2n, total;
    mlp_dims(s, w1n, b1n, w2n, b2n, total);
    const double* w1 = theta.data();
    const double* b1 = w1 + w1n;
    const double* w2 = b1 + b1n;
    const double* b2 = w2 + w2n;

    if (grad_out) grad_out->assign(static_cast<std::size_t>(total), 0.0);
    double* g1 = grad_out ? grad_out->data() : nullptr;
    double* gb1 = g1 ? g1 + w1n : nullptr;
    double* g2 = g1 ? gb1 + b1n : nullptr;
    double* gb2 = g1 ? g2 + w2n : nullptr;

    Vec hidden(static_cast<std::size_t>(s.hidden));
    Vec logits(static_cast<std::size_t>(s.classes));
    Vec probs(static_cast<std::size_t>(s.classes));
    Vec dhidden(static_cast<std::size_t>(s.hidden));

    double loss = 0.0;
    for (int idx : indices) {
        const Vec& x = xs[static_cast<std::size_t>(idx)];
        const int label = ys[static_cast<std::size_t>(idx)];

        for (int j = 0; j < s.hidden; ++j) {
            double z = b1[j];
            const double* row = w1 + j * s.input_dim;
            for (int i = 0; i < s.input_dim; ++i) z += row[i] * x[static_cast<std::size_t>(i)];
            hidden[static_cast<std::size_t>(j)] = std::tanh(z);
        }
        double max_logit = -1e300;
        for (int c = 0; c < s.classes; ++c) {
            double z = b2[c];
            const double* row = w2 + c * s.hidden;
            for (int j = 0; j < s.hidden; ++j) z += row[j] * hidden[static_cast<std::size_t>(j)];
            logits[static_cast<std::size_t>(c)] = z;
            max_logit = std::max(max_logit, z);
        }
        double denom = 0.0;
        for (int c = 0; c < s.classes; ++c) {
            probs[static_cast<std::size_t>(c)] =
                std::exp(logits[static_cast<std::size_t>(c)] - max_logit);
            denom += probs[static_cast<std::size_t>(c)];
        }
        for (double& pc : probs) pc /= denom;
        loss -= std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));

        if (!grad_out) continue;
        std::fill(dhidden.begin(), dhidden.end(), 0.0);
        for (int c = 0; c < s.classes; ++c) {
            const double dlogit = probs[static_cast<std::size_t>(c)] - (c == label ? 1.0 : 0.0);
            gb2[c] += dlogit;
            double* grow = g2 + c * s.hidden;
            const double* row = w2 + c * s.hidden;
            for (int j = 0; j < s.hidden; ++j) {
                grow[j] += dlogit * hidden[static_cast<std::size_t>(j)];
                dhidden[static_cast<std::size_t>(j)] += dlogit * row[j];
            }
        }
        for (int j = 0; j < s.hidden; ++j) {
            const double h = hidden[static_cast<std::size_t>(j)];
            const double dz = dhidden[static_cast<std::size_t>(j)] * (1.0 - h * h);
            gb1[j] += dz;
            double* grow = g1 + j * s.input_dim;
            for (int i = 0; i < s.input_dim; ++i) grow[i] += dz * x[static_cast<std::size_t>(i)];
        }
    }

    const double inv = 1.0 / static_cast<double>(indices.size());
    if (grad_out) {
        for (double& g : *grad_out) g *= inv;
    }
    return loss * inv;
}

std::vector<int> all_indices(int n) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

} // namespace

Problem tiny_mlp(const MlpSpec& spec) {
    if (spec.input_dim < 1 || spec.hidden < 1 || spec.classes < 2 || spec.n_samples < 1) {
        throw std::invalid_argument("tiny_mlp: all dimensions must be positive (classes >= 2)");
    }
    if (spec.batch_size < 0 || spec.batch_size > spec.n_samples) {
        throw std::invalid_argument("tiny_mlp: batch_size must lie in [0, n_samples]");
    }

    auto data = std::make_shared<MlpData>();
    data->spec = spec;

    Rng rng(mix_seed(spec.dataset_seed, 0x11d5ULL));
    std::vector<Vec> centers(static_cast<std::size_t>(spec.classes));
    // center spread scaled so class overlap is dimension-independent
    const double spread = spec.cluster_scale / std::sqrt(static_cast<double>(spec.input_dim));
    for (auto& c : centers) c = random_normal_vec(spec.input_dim, rng, spread);
    auto draw_sample = [&](std::vector<Vec>& xs, std::vector<int>& ys, int count) {
        for (int i = 0; i < count; ++i) {
            const int label = i % spec.classes;
            Vec x = centers[static_cast<std::size_t>(label)];
            for (double& v : x) v += rng.normal();
            xs.push_back(std::move(x));
            ys.push_back(label);
        }
    };
    draw_sample(data->x, data->y, spec.n_samples);
    draw_sample(data->x_held, data->y_held, spec.heldout_samples);

    data->batch = all_indices(spec.n_samples);
    data->batch_count =
        spec.batch_size > 0
            ? (spec.n_samples + spec.batch_size - 1) / spec.batch_size
            : 1;

    int w1n, b1n, w2n, b2n, total;
    mlp_dims(spec, w1n, b1n, w2n, b2n, total);

    Problem p;
    p.name = "tiny_mlp";
    p.dim = total;
    p.num_batches = data->batch_count;
    p.loss = [data](const Vec& theta) {
        return mlp_forward_backward(*data, theta, data->batch, data->x, data->y, nullptr);
    };
    p.grad = [data](const Vec& theta) {
        Vec g;
        mlp_forward_backward(*data, theta, data->batch, data->x, data->y, &g);
        return g;
    };
    p.full_loss = [data](const Vec& theta) {
        return mlp_forward_backward(*data, theta, all_indices(data->spec.n_samples),
                                    data->x, data->y, nullptr);
    };
    p.full_grad = [data](const Vec& theta) {
        Vec g;
        mlp_forward_backward(*data, theta, all_indices(data->spec.n_samples),
                             data->x, data->y, &g);
        return g;
    };
    p.heldout_loss = [data](const Vec& theta) {
        return mlp_forward_backward(*data, theta,
                                    all_indices(data->spec.heldout_samples),
                                    data->x_held, data->y_held, nullptr);
    };
    if (spec.batch_size > 0) {
        p.select_batch = [data](long step) {
            const MlpSpec& s = data->spec;
            const long epoch = step / data->batch_count;
            const long slot = step % data->batch_count;
            std::vector<int> perm = all_indices(s.n_samples);
            Rng shuffle_rng(mix_seed(s.dataset_seed, 0x5e11ULL + static_cast<std::uint64_t>(epoch)));
            shuffle_rng.shuffle(perm);
            const long begin = slot * s.batch_size;
            const long end = std::min<long>(begin + s.batch_size, s.n_samples);
            data->batch.assign(perm.begin() + begin, perm.begin() + end);
        };
    }
    p.init = [spec, w1n, b1n, w2n, total](Rng& r) {
        Vec theta(static_cast<std::size_t>(total), 0.0);
        const double s1 = 1.0 / std::sqrt(static_cast<double>(spec.input_dim));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(spec.hidden));
        for (int i = 0; i < w1n; ++i) theta[static_cast<std::size_t>(i)] = s1 * r.normal();
        for (int i = 0; i < w2n; ++i) {
            theta[static_cast<std::size_t>(w1n + b1n + i)] = s2 * r.normal();
        }
        return theta;
    };
    p.tracked_blocks = {{"theta", {0, total}}};
    construction_check(p, 23);
    return p;
}

namespace {

struct BilinearData {
    int rows = 2;
    int cols = 0;     // data dimension d
    int samples = 16; // S
    std::vector<Vec> x;       // S vectors in R^d
    std::vector<Vec> targets; // S x S
    std::uint64_t seed = 0;
    int pairs_per_batch = 0; // 0 = all pairs
    mutable std::vector<std::pair<int, int>> batch;

    std::vector<std::pair<int, int>> all_pairs() const {
        std::vector<std::pair<int, int>> out;
        out.reserve(static_cast<std::size_t>(samples) * samples);
        for (int i = 0; i < samples; ++i) {
            for (int j = 0; j < samples; ++j) out.push_back({i, j});
        }
        return out;
    }
};

} // namespace

Problem scale_invariant_problem(int dim, std::uint64_t seed, int pairs_per_batch) {
    if (dim < 8 || dim % 4 != 0) {
        throw std::invalid_argument("scale_invariant_problem: dim must be >= 8 and divisible by 4");
    }
    const int per_matrix = dim / 2;
    auto data = std::make_shared<BilinearData>();
    data->rows = 2;
    data->cols = per_matrix / 2;
    data->samples = 16;
    data->seed = seed;
    data->pairs_per_batch = pairs_per_batch;

    Rng rng(mix_seed(seed, 0x51acULL));
    data->x.resize(static_cast<std::size_t>(data->samples));
    for (auto& xv : data->x) xv = random_normal_vec(data->cols, rng);
    data->targets.resize(static_cast<std::size_t>(data->samples));
    for (auto& row : data->targets) row = random_normal_vec(data->samples, rng, 0.5);
    data->batch = data->all_pairs();

    // project x through the row-major rows x cols matrix stored at w
    auto apply = [data](const double* w, const Vec& x) {
        Vec out(static_cast<std::size_t>(data->rows), 0.0);
        for (int r = 0; r < data->rows; ++r) {
            const double* row = w + r * data->cols;
            double s = 0.0;
            for (int c = 0; c < data->cols; ++c) s += row[c] * x[static_cast<std::size_t>(c)];
            out[static_cast<std::size_t>(r)] = s;
        }
        return out;
    };

    auto eval = [data, apply, per_matrix](const Vec& theta,
                                          const std::vector<std::pair<int, int>>& pairs,
                                          Vec* grad_out) {
        Vec wq(theta.begin(), theta.begin() + per_matrix);
        Vec wk(theta.begin() + per_matrix, theta.end());
        const double rq = norm(wq);
        const double rk = norm(wk);
        if (rq == 0.0 || rk == 0.0) {
            throw std::domain_error("scale_invariant_problem: a weight matrix is zero");
        }
        const Vec qhat = scaled(wq, 1.0 / rq);
        const Vec khat = scaled(wk, 1.0 / rk);

        const int S = data->samples;
        std::vector<Vec> q(static_cast<std::size_t>(S)), k(static_cast<std::size_t>(S));
        for (int s = 0; s < S; ++s) {
            q[static_cast<std::size_t>(s)] = apply(qhat.data(), data->x[static_cast<std::size_t>(s)]);
            k[static_cast<std::size_t>(s)] = apply(khat.data(), data->x[static_cast<std::size_t>(s)]);
        }

        const double inv = 1.0 / static_cast<double>(pairs.size());
        double loss = 0.0;
        Vec dq(static_cast<std::size_t>(per_matrix), 0.0); // d f / d Qhat
        Vec dk(static_cast<std::size_t>(per_matrix), 0.0);
        for (const auto& [i, j] : pairs) {
            const double z = dot(q[static_cast<std::size_t>(i)], k[static_cast<std::size_t>(j)]);
            const double e = z - data->targets[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            loss += e * e;
            if (!grad_out) continue;
            const double w = 2.0 * inv * e;
            for (int r = 0; r < data->rows; ++r) {
                const double kr = k[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
                const double qr = q[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)];
                double* dqrow = dq.data() + r * data->cols;
                double* dkrow = dk.data() + r * data->cols;
                const Vec& xi = data->x[static_cast<std::size_t>(i)];
                const Vec& xj = data->x[static_cast<std::size_t>(j)];
                for (int c = 0; c < data->cols; ++c) {
                    dqrow[c] += w * kr * xi[static_cast<std::size_t>(c)];
                    dkrow[c] += w * qr * xj[static_cast<std::size_t>(c)];
                }
            }
        }
        if (grad_out) {
            const Vec gq = project_direction_gradient(wq, dq);
            const Vec gk = project_direction_gradient(wk, dk);
            grad_out->assign(theta.size(), 0.0);
            std::copy(gq.begin(), gq.end(), grad_out->begin());
            std::copy(gk.begin(), gk.end(), grad_out->begin() + per_matrix);
        }
        return loss * inv;
    };

    Problem p;
    p.name = "scale_invariant";
    p.dim = dim;
    p.loss = [eval, data](const Vec& theta) { return eval(theta, data->batch, nullptr); };
    p.grad = [eval, data](const Vec& theta) {
        Vec g;
        eval(theta, data->batch, &g);
        return g;
    };
    p.full_loss = [eval, data](const Vec& theta) {
        return eval(theta, data->all_pairs(), nullptr);
    };
    p.full_grad = [eval, data](const Vec& theta) {
        Vec g;
        eval(theta, data->all_pairs(), &g);
        return g;
    };
    if (pairs_per_batch > 0) {
        p.select_batch = [data](long step) {
            Rng r(mix_seed(data->seed, 0xba7cULL + static_cast<std::uint64_t>(step)));
            data->batch.clear();
            for (int m = 0; m < data->pairs_per_batch; ++m) {
                const int i = static_cast<int>(r.integer(static_cast<std::uint64_t>(data->samples)));
                const int j = static_cast<int>(r.integer(static_cast<std::uint64_t>(data->samples)));
                data->batch.push_back({i, j});
            }
        };
    }
    p.init = [dim, per_matrix](Rng& r) {
        // unit-ish Frobenius norm per matrix
        return random_normal_vec(dim, r, 1.0 / std::sqrt(static_cast<double>(per_matrix)));
    };
    p.tracked_blocks = {{"W_Q", {0, per_matrix}}, {"W_K", {per_matrix, dim}}};
    construction_check(p, 29);
    return p;
}

} // namespace adamlab
