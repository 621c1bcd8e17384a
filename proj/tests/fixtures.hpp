#pragma once

#include <cmath>
#include <random>
#include <sstream>
#include <string>

namespace testing {

// y = 2 x1 - x2 + noise, with a 0/1 train column covering about 3/4 of rows.
inline std::string regression_csv(int n, unsigned seed, double shift = 0.0) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z;
    std::ostringstream s;
    s.precision(17);
    s << "y,x1,x2,x3,train,fold\n";
    for (int i = 0; i < n; ++i) {
        const double a = z(gen), b = z(gen), c = z(gen);
        s << 2 * a - b + 0.3 * z(gen) + shift << ',' << a << ',' << b << ',' << c << ',' << (i % 4 != 3) << ','
          << 1 + i % 3 << '\n';
    }
    return s.str();
}

inline std::string classification_csv(int n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;
    std::ostringstream s;
    s.precision(17);
    s << "y,x1,x2\n";
    for (int i = 0; i < n; ++i) {
        const double a = z(gen), b = z(gen);
        s << (u(gen) < 1.0 / (1.0 + std::exp(-(2 * a - b))) ? 1 : 0) << ',' << a << ',' << b << '\n';
    }
    return s.str();
}

}  // namespace testing
