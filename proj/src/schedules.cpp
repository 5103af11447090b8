#include "adamlab/schedules.hpp"

#include <cmath>
#include <stdexcept>

namespace adamlab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Schedule constant_schedule(double eta0) {
    if (!(eta0 > 0.0)) throw std::invalid_argument("schedule: eta0 must be positive");
    Schedule s;
    s.kind = Schedule::Kind::Constant;
    s.eta0 = eta0;
    return s;
}

Schedule warmup_cosine_schedule(double eta0, long warmup_steps, long total_steps,
                                double floor) {
    if (!(eta0 > 0.0)) throw std::invalid_argument("schedule: eta0 must be positive");
    if (warmup_steps < 0 || total_steps <= warmup_steps) {
        throw std::invalid_argument("schedule: need 0 <= warmup_steps < total_steps");
    }
    Schedule s;
    s.kind = Schedule::Kind::WarmupCosine;
    s.eta0 = eta0;
    s.warmup_steps = warmup_steps;
    s.total_steps = total_steps;
    s.floor = floor < 0.0 ? eta0 / 10.0 : floor;
    if (!(s.floor > 0.0)) throw std::invalid_argument("schedule: floor must be positive");
    return s;
}

Schedule anneal_c_schedule(double eta0, double c_value) {
    if (!(eta0 > 0.0)) throw std::invalid_argument("schedule: eta0 must be positive");
    Schedule s;
    s.kind = Schedule::Kind::AnnealC;
    s.eta0 = eta0;
    s.c_value = c_value;
    return s;
}

double eta_at(const Schedule& schedule, long n) {
    if (n < 0) throw std::invalid_argument("eta_at: n must be >= 0");
    switch (schedule.kind) {
    case Schedule::Kind::Constant:
        return schedule.eta0;
    case Schedule::Kind::WarmupCosine: {
        if (n < schedule.warmup_steps) {
            // (n+1)/warmup keeps eta positive at n = 0
            return schedule.eta0 * static_cast<double>(n + 1) /
                   static_cast<double>(schedule.warmup_steps);
        }
        if (n >= schedule.total_steps) return schedule.floor;
        const double progress = static_cast<double>(n - schedule.warmup_steps) /
                                static_cast<double>(schedule.total_steps - schedule.warmup_steps);
        const double cosine = 0.5 * (1.0 + std::cos(kPi * progress));
        return schedule.floor + (schedule.eta0 - schedule.floor) * cosine;
    }
    case Schedule::Kind::AnnealC:
        return schedule.eta0 *
               std::exp(-static_cast<double>(n) * std::abs(schedule.c_value) / 2.0);
    }
    throw std::logic_error("eta_at: unknown schedule kind");
}

} // namespace adamlab
