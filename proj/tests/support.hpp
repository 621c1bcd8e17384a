#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "stackgen/common.hpp"
#include "stackgen/data.hpp"
#include "stackgen/rng.hpp"

namespace testing {

using stackgen::Matrix;
using stackgen::Vector;

inline Matrix normal_matrix(Eigen::Index n, Eigen::Index p, stackgen::Rng& rng) {
    Matrix X(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.normal();
    return X;
}

inline Vector normal_vector(Eigen::Index n, stackgen::Rng& rng) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
    return v;
}

// y = x1 + sin(2 x2) + 0.5 x3^2 + noise.
inline stackgen::Dataset friedman_like(Eigen::Index n, std::uint64_t seed, double noise = 0.3) {
    stackgen::Rng rng(seed);
    stackgen::Dataset d;
    d.X = normal_matrix(n, 4, rng);
    d.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        d.y(i) = d.X(i, 0) + std::sin(2.0 * d.X(i, 1)) + 0.5 * d.X(i, 2) * d.X(i, 2) + noise * rng.normal();
    d.colnames = {"x1", "x2", "x3", "x4"};
    return d;
}

// Binary outcome from a logistic index 2 x1 - x2 + x3 x4.
inline stackgen::Dataset logistic_data(Eigen::Index n, std::uint64_t seed) {
    stackgen::Rng rng(seed);
    stackgen::Dataset d;
    d.X = normal_matrix(n, 4, rng);
    d.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = 2.0 * d.X(i, 0) - d.X(i, 1) + d.X(i, 2) * d.X(i, 3);
        d.y(i) = rng.uniform() < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : 0.0;
    }
    d.colnames = {"x1", "x2", "x3", "x4"};
    d.task = stackgen::Task::classify;
    return d;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("stackgen_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

}  // namespace testing
