#include "adamlab/io.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace adamlab {

void ensure_directory(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) {
        throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
    }
}

void atomic_write_file(const std::string& path, const std::string& content) {
    static std::atomic<unsigned> counter{0};
    const std::filesystem::path target(path);
    if (target.has_parent_path()) ensure_directory(target.parent_path().string());

    const std::string tmp = path + ".tmp" + std::to_string(counter.fetch_add(1));
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp + " for writing");
        os << content;
        if (!os) throw std::runtime_error("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw std::runtime_error("cannot rename " + tmp + " to " + path + ": " + ec.message());
    }
}

} // namespace adamlab
