#include <cmath>

#include "doctest.h"
#include "stackgen/pipeline.hpp"
#include "support.hpp"

using namespace stackgen;

namespace {

Matrix col(std::initializer_list<double> v) {
    Matrix m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

std::size_t choose(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

struct QuietWarnings {
    QuietWarnings() { set_warning_handler([](const std::string&) {}); }
    ~QuietWarnings() { set_warning_handler({}); }
};

}  // namespace

TEST_CASE("stdscaler uses the population variance") {
    const auto [fitted, Z] = fit_transform(parse_pipeline("stdscaler"), col({1, 2, 3}));
    const double sigma = std::sqrt(2.0 / 3.0);
    CHECK(Z(0, 0) == doctest::Approx(-1.0 / sigma).epsilon(1e-12));
    CHECK(Z(1, 0) == doctest::Approx(0.0));
    CHECK(Z(2, 0) == doctest::Approx(1.0 / sigma).epsilon(1e-12));
    CHECK(Z(2, 0) == doctest::Approx(1.22474).epsilon(1e-5));
}

TEST_CASE("stdscaler moments on random data") {
    Rng rng(3);
    const Matrix X = testing::normal_matrix(80, 5, rng) * 3.0 + Matrix::Constant(80, 5, 7.0);
    const auto [fitted, Z] = fit_transform(parse_pipeline("stdscaler"), X);
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
        const double m = Z.col(j).mean();
        const double v = (Z.col(j).array() - m).square().mean();
        CHECK(std::abs(m) < 1e-10);
        CHECK(std::abs(v - 1.0) < 1e-10);
    }
}

TEST_CASE("stdscaler leaves constant columns unscaled with a warning") {
    std::vector<std::string> warnings;
    set_warning_handler([&](const std::string& w) { warnings.push_back(w); });
    Matrix X(3, 2);
    X << 1, 5, 2, 5, 3, 5;
    const auto [fitted, Z] = fit_transform(parse_pipeline("stdscaler"), X);
    set_warning_handler({});
    CHECK(warnings.size() == 1);
    CHECK(Z.col(1).isZero());
}

TEST_CASE("poly2 columns and count") {
    Matrix X(2, 2);
    X << 2, 3, 5, 7;
    const auto [fitted, Z] = fit_transform(parse_pipeline("poly2"), X);
    REQUIRE(Z.cols() == 5);
    CHECK(Z(0, 0) == 2);
    CHECK(Z(0, 1) == 3);
    CHECK(Z(0, 2) == 4);
    CHECK(Z(0, 3) == 6);
    CHECK(Z(0, 4) == 9);
    CHECK(fitted.p_out() == 5);
}

TEST_CASE("interact adds pairwise products only") {
    Matrix X(1, 3);
    X << 2, 3, 5;
    const auto [fitted, Z] = fit_transform(parse_pipeline("interact"), X);
    REQUIRE(Z.cols() == 6);
    CHECK(Z(0, 3) == 6);
    CHECK(Z(0, 4) == 10);
    CHECK(Z(0, 5) == 15);
}

TEST_CASE("polynomial column counts for p in 1..6") {
    for (std::size_t p = 1; p <= 6; ++p) {
        CHECK(poly_output_columns(p, 2, false) == p + p * (p + 1) / 2);
        CHECK(poly_output_columns(p, 3, false) == choose(p + 3, 3) - 1);
        CHECK(poly_output_columns(p, 2, true) == p + choose(p, 2));
        Rng rng(p);
        const Matrix X = testing::normal_matrix(4, static_cast<Eigen::Index>(p), rng);
        CHECK(static_cast<std::size_t>(fit_transform(parse_pipeline("poly3"), X).second.cols()) == choose(p + 3, 3) - 1);
    }
}

TEST_CASE("medianimputer fills with the training median") {
    const auto [fitted, Z] = fit_transform(parse_pipeline("medianimputer"), col({1, 2, 3, NAN}));
    CHECK(Z(3, 0) == 2.0);
    CHECK(fitted.transform(col({NAN}))(0, 0) == 2.0);
}

TEST_CASE("minmaxscaler maps with training range") {
    const auto [fitted, Z] = fit_transform(parse_pipeline("minmaxscaler"), col({0, 10}));
    CHECK(fitted.transform(col({5}))(0, 0) == 0.5);
}

TEST_CASE("transform reproduces fit_transform bitwise") {
    Rng rng(11);
    const Matrix clean = testing::normal_matrix(30, 3, rng);
    Matrix gaps = clean;
    gaps(4, 1) = NAN;
    gaps(9, 0) = NAN;
    for (const char* spec : {"stdscaler", "minmaxscaler", "poly2 stdscaler", "interact", "poly3"}) {
        const auto [fitted, Z] = fit_transform(parse_pipeline(spec), clean);
        CHECK(fitted.transform(clean) == Z);
    }
    for (const char* spec : {"medianimputer stdscaler", "knnimputer(3) poly2", "medianimputer poly3 stdscaler"}) {
        const auto [fitted, Z] = fit_transform(parse_pipeline(spec), gaps);
        CHECK(!Z.hasNaN());
        CHECK(fitted.transform(gaps) == Z);
    }
}

TEST_CASE("knn_impute nearest neighbour") {
    Matrix ref(2, 2);
    ref << 0, 0, 10, 10;
    Vector x(2);
    x << 0.1, NAN;
    const Vector out = knn_impute(ref, x, 1);
    CHECK(out(0) == 0.1);
    CHECK(out(1) == 0.0);
}

TEST_CASE("knn_impute with all rows is the column mean") {
    Matrix ref(3, 2);
    ref << 0, 1, 5, 2, 9, 6;
    Vector x(2);
    x << 4, NAN;
    CHECK(knn_impute(ref, x, 3)(1) == doctest::Approx(3.0));
}

TEST_CASE("knn_impute ties go to the lower row") {
    Matrix ref(2, 2);
    ref << -1, 100, 1, 200;
    Vector x(2);
    x << 0, NAN;
    CHECK(knn_impute(ref, x, 1)(1) == 100.0);
}

TEST_CASE("knn_impute without shared coordinates fails") {
    Matrix ref(2, 2);
    ref << NAN, 1, NAN, 2;
    Vector x(2);
    x << 3, NAN;
    CHECK_THROWS_AS(knn_impute(ref, x, 1), Error);
}

TEST_CASE("onehot dummy rows sum to one for seen categories") {
    QuietWarnings quiet;
    Matrix X(5, 2);
    X << 1, 0, 2, 1, 3, 0, 1, 1, 2, 0;
    const auto [fitted, Z] = fit_transform(parse_pipeline("onehot"), X);
    CHECK(Z.cols() == 5);
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        CHECK(Z.row(i).head(3).sum() == 1.0);
        CHECK(Z.row(i).tail(2).sum() == 1.0);
    }
    Matrix unseen(1, 2);
    unseen << 7, 1;
    const Matrix U = fitted.transform(unseen);
    CHECK(U.row(0).head(3).sum() == 0.0);
    CHECK(U.row(0).tail(2).sum() == 1.0);
}

TEST_CASE("pipeline errors") {
    CHECK_THROWS_WITH_AS(parse_pipeline("sparse"), doctest::Contains("dense backend only"), Error);
    CHECK_THROWS_WITH_AS(parse_pipeline("stdscaler0"), doctest::Contains("dense backend only"), Error);
    CHECK_THROWS_AS(parse_pipeline("frobnicate"), Error);
    CHECK_THROWS_AS(parse_pipeline("stdscaler medianimputer"), Error);
    CHECK_THROWS_AS(fit_transform(parse_pipeline("stdscaler"), col({1, NAN, 3})), Error);
    CHECK_THROWS_AS(fit_transform(parse_pipeline("knnimputer(3)"), col({1, NAN, 3})), Error);
    const auto [fitted, Z] = fit_transform(parse_pipeline("stdscaler"), col({1, 2, 3}));
    CHECK_THROWS_AS(fitted.transform(Matrix::Zero(2, 2)), Error);
}

TEST_CASE("pipeline text round trip") {
    const auto spec = parse_pipeline("knnimputer(3) poly2 stdscaler");
    CHECK(spec.steps.size() == 3);
    CHECK(spec.steps[0].k == 3);
    CHECK(parse_pipeline(to_string(spec)) == spec);
    CHECK(parse_pipeline("knnimputer").steps[0].k == 5);
}
