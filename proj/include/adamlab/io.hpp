#pragma once

#include <cstdio>
#include <string>

namespace adamlab {

// Shortest round-trip decimal representation, so CSV output is byte-stable.
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    // prefer the shortest representation that still round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char probe[40];
        std::snprintf(probe, sizeof(probe), "%.*g", prec, x);
        double back = 0.0;
        std::sscanf(probe, "%lf", &back);
        if (back == x) return probe;
    }
    return buf;
}

// Writes content to path via a temp file and rename, so partial files never
// appear under concurrent sweeps.
void atomic_write_file(const std::string& path, const std::string& content);

// Create directory (and parents); throws std::runtime_error on failure.
void ensure_directory(const std::string& path);

} // namespace adamlab
