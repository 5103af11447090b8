#pragma once

namespace adamlab {

struct Schedule {
    enum class Kind { Constant, WarmupCosine, AnnealC };
    Kind kind = Kind::Constant;
    double eta0 = 1e-3;

    // warmup_cosine
    long warmup_steps = 0;
    long total_steps = 0;
    double floor = 0.0; // absolute

    // anneal_c: eta_n = eta0 * exp(-n |c| / 2)
    double c_value = 0.0;
};

Schedule constant_schedule(double eta0);
// floor < 0 selects the default eta0/10.
Schedule warmup_cosine_schedule(double eta0, long warmup_steps, long total_steps,
                                double floor = -1.0);
Schedule anneal_c_schedule(double eta0, double c_value);

double eta_at(const Schedule& schedule, long n);

} // namespace adamlab
