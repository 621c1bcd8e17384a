#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "stackgen/optim.hpp"
#include "support.hpp"

using namespace stackgen;

namespace {

// Three learners of differing quality around a common signal.
void noisy_columns(Rng& rng, Eigen::Index n, Matrix& Z, Vector& y) {
    y = testing::normal_vector(n, rng);
    Z.resize(n, 3);
    Z.col(0) = y + 0.5 * testing::normal_vector(n, rng);
    Z.col(1) = y + 0.8 * testing::normal_vector(n, rng);
    Z.col(2) = 0.5 * y + 0.6 * testing::normal_vector(n, rng);
}

double simplex_grid_minimum(const Matrix& Z, const Vector& y, int steps) {
    double best = INFINITY;
    for (int a = 0; a <= steps; ++a)
        for (int b = 0; a + b <= steps; ++b) {
            Vector w(3);
            w << a, b, steps - a - b;
            best = std::min(best, squared_error(Z, y, w / steps));
        }
    return best;
}

}  // namespace

TEST_CASE("final estimator names") {
    for (const char* name : {"nnls1", "nnls0", "singlebest", "ls1", "ols", "ridge"})
        CHECK(to_string(parse_final_estimator(name)) == name);
    CHECK_THROWS_AS(parse_final_estimator("lasso"), Error);
}

TEST_CASE("nnls1 with a single column") {
    Rng rng(1);
    const Matrix Z = testing::normal_matrix(10, 1, rng);
    const auto f = solve_nnls1(Z, testing::normal_vector(10, rng));
    CHECK(f.weights(0) == 1.0);
}

TEST_CASE("nnls1 lands on a vertex when one column is exact") {
    Rng rng(2);
    Matrix Z = testing::normal_matrix(30, 3, rng);
    const Vector y = Z.col(1);
    const auto f = solve_nnls1(Z, y);
    CHECK(f.weights(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.weights(0) == doctest::Approx(0.0));
    CHECK(f.objective < 1e-20);
}

TEST_CASE("nnls1 is no worse than a fine simplex grid") {
    Rng rng(3);
    for (int t = 0; t < 10; ++t) {
        Matrix Z;
        Vector y;
        noisy_columns(rng, 50, Z, y);
        const auto f = solve_nnls1(Z, y);
        CHECK(f.weights.minCoeff() >= 0.0);
        CHECK(std::abs(f.weights.sum() - 1.0) < 1e-12);
        CHECK(f.objective <= simplex_grid_minimum(Z, y, 200) + 1e-9);
        // simplex KKT: free coordinates share the gradient value, bound ones do not undercut it
        const Vector g = -2.0 * Z.transpose() * (y - Z * f.weights);
        double mu = INFINITY;
        for (Eigen::Index j = 0; j < 3; ++j)
            if (f.weights(j) > 0) mu = std::min(mu, g(j));
        for (Eigen::Index j = 0; j < 3; ++j) {
            if (f.weights(j) > 0) CHECK(std::abs(g(j) - mu) < 1e-8 * (1.0 + std::abs(mu)));
            else CHECK(g(j) >= mu - 1e-8 * (1.0 + std::abs(mu)));
        }
    }
}

TEST_CASE("nnls0 KKT conditions and ordering with nnls1") {
    Rng rng(4);
    for (int t = 0; t < 10; ++t) {
        Matrix Z;
        Vector y;
        noisy_columns(rng, 60, Z, y);
        Z.col(2) *= -1.0;
        const auto f = solve_nnls0(Z, y);
        const Vector g = Z.transpose() * (y - Z * f.weights);
        for (Eigen::Index j = 0; j < 3; ++j) {
            CHECK(f.weights(j) >= 0.0);
            CHECK(g(j) <= 1e-8);
            if (f.weights(j) > 0) CHECK(std::abs(g(j)) <= 1e-8);
        }
        CHECK(f.objective <= solve_nnls1(Z, y).objective + 1e-12);
    }
}

TEST_CASE("nnls0 on orthogonal columns clips the projections") {
    Rng rng(5);
    const Matrix Q = Eigen::HouseholderQR<Matrix>(testing::normal_matrix(20, 3, rng)).householderQ() *
                     Matrix::Identity(20, 3);
    const Matrix Z = Q * Vector(Vector::LinSpaced(3, 1.0, 3.0)).asDiagonal();
    const Vector y = testing::normal_vector(20, rng);
    const auto f = solve_nnls0(Z, y);
    for (Eigen::Index j = 0; j < 3; ++j) {
        const double proj = Z.col(j).dot(y) / Z.col(j).squaredNorm();
        CHECK(f.weights(j) == doctest::Approx(std::max(0.0, proj)).epsilon(1e-10));
    }
}

TEST_CASE("ls1 matches the eliminated least squares problem") {
    Rng rng(6);
    Matrix Z;
    Vector y;
    noisy_columns(rng, 40, Z, y);
    const auto f = solve_ls1(Z, y);
    Matrix D(40, 2);
    D.col(0) = Z.col(0) - Z.col(2);
    D.col(1) = Z.col(1) - Z.col(2);
    const Vector v = D.colPivHouseholderQr().solve(Vector(y - Z.col(2)));
    CHECK(f.weights(0) == doctest::Approx(v(0)).epsilon(1e-10));
    CHECK(f.weights(1) == doctest::Approx(v(1)).epsilon(1e-10));
    CHECK(f.weights(2) == doctest::Approx(1.0 - v(0) - v(1)).epsilon(1e-10));
}

TEST_CASE("duplicated columns share their weight") {
    Rng rng(7);
    Matrix Z3;
    Vector y;
    noisy_columns(rng, 40, Z3, y);
    Matrix Z(40, 4);
    Z << Z3, Z3.col(0);
    for (auto solver : {solve_nnls1, solve_nnls0, solve_ls1}) {
        const auto f = solver(Z, y);
        CHECK(f.weights(0) == f.weights(3));
        CHECK(std::abs(f.objective - squared_error(Z, y, f.weights)) < 1e-9);
    }
    Vector w(3);
    w << 0.6, 0.4, 0.0;
    Matrix twin(2, 3);
    twin << 1, 2, 1, 3, 4, 3;
    share_duplicate_weights(twin, w);
    CHECK(w(0) == 0.3);
    CHECK(w(2) == 0.3);
    CHECK(w(1) == 0.4);
}

TEST_CASE("singlebest picks the smallest squared error") {
    Matrix Z(3, 3);
    Z << 1, 0, 1, 2, 0, 2, 3, 0, 3;
    Vector y(3);
    y << 1, 2, 3.5;
    const auto f = solve_singlebest(Z, y);
    CHECK(f.weights(0) == 1.0);
    CHECK(f.weights.sum() == 1.0);
}

TEST_CASE("ols final recovers an exact combination") {
    Rng rng(8);
    const Matrix Z = testing::normal_matrix(25, 2, rng);
    const Vector y = (1.0 + 0.3 * Z.col(0).array() + 0.7 * Z.col(1).array()).matrix();
    const auto f = solve_ols_final(Z, y);
    CHECK(f.intercept == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(f.weights(0) == doctest::Approx(0.3).epsilon(1e-10));
    CHECK(f.weights(1) == doctest::Approx(0.7).epsilon(1e-10));
}

TEST_CASE("ridge approaches ols as the penalty vanishes") {
    Rng rng(9);
    Matrix Z;
    Vector y;
    noisy_columns(rng, 50, Z, y);
    const auto r = solve_ridge_fixed(Z, y, 1e-10, Task::regress);
    const auto o = solve_ols_final(Z, y);
    CHECK((r.weights - o.weights).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(r.intercept - o.intercept) < 1e-6);
    CHECK_THROWS_AS(solve_ridge_fixed(Z, y, 0.0, Task::regress), Error);
}

TEST_CASE("ridge grid and cross-validated choice") {
    const auto g = ridge_grid();
    REQUIRE(g.size() == 9);
    CHECK(g.front() == 1e-4);
    CHECK(g.back() == 1e4);
    Rng rng(10);
    Matrix Z;
    Vector y;
    noisy_columns(rng, 60, Z, y);
    const auto f = solve_ridge_final(Z, y, Task::regress, 5, 3);
    CHECK(std::find(g.begin(), g.end(), f.lambda) != g.end());
    CHECK(solve_ridge_final(Z, y, Task::regress, 5, 3).weights == f.weights);
}

TEST_CASE("classification ridge returns probabilities") {
    Rng rng(11);
    const auto d = testing::logistic_data(80, 12);
    Matrix Z(80, 2);
    Z.col(0) = (d.X.col(0).array() * 2.0).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    for (Eigen::Index i = 0; i < 80; ++i) Z(i, 1) = rng.uniform();
    const auto f = solve_final(FinalEstimator::ridge, Z, d.y, Task::classify, 5, 4);
    CHECK(f.logistic);
    const Vector p = f.combine(3.0 * testing::normal_matrix(20, 2, rng));
    CHECK(p.minCoeff() >= 0.0);
    CHECK(p.maxCoeff() <= 1.0);
}

TEST_CASE("shape errors") {
    CHECK_THROWS_AS(solve_nnls1(Matrix::Zero(3, 2), Vector::Zero(4)), Error);
    CHECK_THROWS_AS(solve_ls1(Matrix::Zero(0, 2), Vector::Zero(0)), Error);
}
