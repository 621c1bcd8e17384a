#include "stackgen/common.hpp"
#include "stackgen/rng.hpp"

#include <cmath>
#include <iostream>
#include <mutex>

namespace stackgen {

std::string to_string(Task task) { return task == Task::regress ? "regress" : "classify"; }

Task parse_task(const std::string& text) {
    if (text == "reg" || text == "regress" || text == "regression") return Task::regress;
    if (text == "class" || text == "classify" || text == "classification") return Task::classify;
    fail(ErrorCode::invalid_argument, "unknown type '" + text + "' (expected regress or classify)");
}

namespace {
std::mutex g_warn_mutex;
WarningHandler g_warn_handler;
}  // namespace

void set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(g_warn_mutex);
    g_warn_handler = std::move(handler);
}

void warn(const std::string& message) {
    std::lock_guard lock(g_warn_mutex);
    if (g_warn_handler)
        g_warn_handler(message);
    else
        std::cerr << "warning: " << message << '\n';
}

bool has_nan(const Matrix& m) { return m.hasNaN(); }

std::uint64_t Rng::below(std::uint64_t bound) {
    // Reject the top partial block so every residue is equally likely.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(mix64(master) ^ a) ^ b);
}

namespace global_rng {
namespace {
std::mutex g_mutex;
Rng g_rng(kDefaultGlobalSeed);
std::uint64_t g_draws = 0;
}  // namespace

void set_seed(std::uint64_t seed) {
    std::lock_guard lock(g_mutex);
    g_rng = Rng(seed);
    g_draws = 0;
}

std::uint64_t draw_seed() {
    std::lock_guard lock(g_mutex);
    ++g_draws;
    return g_rng.below(100000001ULL);
}

std::uint64_t draw_count() {
    std::lock_guard lock(g_mutex);
    return g_draws;
}
}  // namespace global_rng

}  // namespace stackgen
