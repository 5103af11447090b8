#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "adamlab/rng.hpp"
#include "adamlab/vec.hpp"

namespace adamlab {

// A differentiable test problem with analytic gradients. loss/grad evaluate
// the current batch (the full dataset unless select_batch is set). Datasets
// are synthetic and seeded; nothing is ever downloaded.
struct Problem {
    std::string name;
    int dim = 0;

    std::function<double(const Vec&)> loss;
    std::function<Vec(const Vec&)> grad;

    // Mini-batch mode; null means full batch. select_batch(step) is
    // deterministic and random-access (safe under concurrent sweeps).
    std::function<void(long)> select_batch;
    int num_batches = 1;

    // Whole-dataset views; fall back to loss/grad when null.
    std::function<double(const Vec&)> full_loss;
    std::function<Vec(const Vec&)> full_grad;

    // Held-out split for generalization checks; falls back to full loss.
    std::function<double(const Vec&)> heldout_loss;

    // Seeded initial parameters; defaults to standard normal entries.
    std::function<Vec(Rng&)> init;

    // Named parameter blocks [begin, end) whose norms the harness tracks.
    std::vector<std::pair<std::string, std::pair<int, int>>> tracked_blocks;

    double eval_full_loss(const Vec& theta) const {
        return full_loss ? full_loss(theta) : loss(theta);
    }
    Vec eval_full_grad(const Vec& theta) const {
        return full_grad ? full_grad(theta) : grad(theta);
    }
    double eval_heldout_loss(const Vec& theta) const {
        return heldout_loss ? heldout_loss(theta) : eval_full_loss(theta);
    }
    Vec initial_theta(Rng& rng) const {
        return init ? init(rng) : random_normal_vec(dim, rng);
    }
};

// L = 1/2 theta^T D theta with a log-uniform diagonal spectrum in [1, condition].
Problem quadratic(int dim, double condition);
Problem quadratic_diag(Vec diag);

// Chained pairwise Rosenbrock; dim must be even and >= 2.
Problem rosenbrock(int dim);

struct MlpSpec {
    int input_dim = 8;
    int hidden = 16;
    int classes = 3;
    std::uint64_t dataset_seed = 1;
    int n_samples = 240;           // training samples
    int batch_size = 0;            // 0 = full batch
    int heldout_samples = 80;      // separate synthetic split
    double cluster_scale = 2.5;    // center spread relative to unit noise
};

// One-hidden-layer tanh network with softmax cross-entropy on seeded
// Gaussian clusters; gradients by manual backprop.
Problem tiny_mlp(const MlpSpec& spec);

// Loss on the normalized directions of two weight matrices against fixed
// random data: logits z_ij = (Qhat x_i) . (Khat x_j) with Qhat = W_Q/||W_Q||,
// squared error against fixed targets. Scale-invariant in each matrix (and
// per batch, so the orthogonality identity holds at every step).
// dim is the total parameter count and must be divisible by 4 (each matrix
// gets dim/2 entries arranged as 2 rows). pairs_per_batch > 0 samples that
// many (i, j) logit pairs per step with seeded draws; 0 uses all pairs.
Problem scale_invariant_problem(int dim, std::uint64_t seed, int pairs_per_batch = 0);

// Central finite-difference gradient, the oracle used by gradient checks.
Vec finite_difference_gradient(const std::function<double(const Vec&)>& f,
                               const Vec& x, double h = 1e-5);

// Max relative deviation between the analytic gradient and the finite
// difference oracle over `points` seeded random points.
double gradient_check(const Problem& problem, int points, std::uint64_t seed,
                      int coords_per_point = 0 /* 0 = all */);

} // namespace adamlab
