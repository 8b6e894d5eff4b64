#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fgpan/aggregation.hpp"
#include "fgpan/crossmodal.hpp"
#include "support.hpp"

using namespace fgpan;
using test::random_matrix;
using test::random_vector;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

AggregationParams sin_params(const Vector& w) { return {w, PositionalMode::sinusoidal, 8, 8, std::nullopt}; }

}  // namespace

TEST_CASE("scores: self, scale and diagonal examples") {
    const Matrix eye = Matrix::Identity(4, 4);
    const Vector s = patch_scores(Vector(eye.row(0).transpose()), eye);
    CHECK(s == vec({1, 0, 0, 0}));
    std::mt19937_64 rng(1);
    const Vector h = random_vector(4, rng);
    CHECK((patch_scores(Vector(5.0 * h), eye) - patch_scores(h, eye)).norm() <= 1e-15);

    const Vector diag = patch_scores(vec({1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}), Matrix::Identity(2, 2));
    CHECK(std::abs(diag[0] - 0.70711) <= 1e-5);
    CHECK(std::abs(diag[1] - 0.70711) <= 1e-5);
    CHECK_THROWS(patch_scores(Vector::Zero(4), eye));
}

TEST_CASE("probabilities examples") {
    const Vector p = patch_probs(vec({1, 0}), TemperatureParam::from_tau(1.0));
    const double oracle = std::exp(1.0) / (std::exp(1.0) + 1.0);
    CHECK(p[0] == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(std::abs(p[0] - 0.73106) <= 1e-5);
    CHECK(std::abs(p[1] - 0.26894) <= 1e-5);

    const Vector u = patch_probs(vec({0.3, 0.3, 0.3}), TemperatureParam{});
    for (double x : u) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    CHECK(patch_probs(vec({1, 0}), TemperatureParam::from_tau(0.01))[0] >= 1.0 - 1e-8);
    CHECK(TemperatureParam{}.tau() == doctest::Approx(0.07).epsilon(1e-15));
    CHECK_THROWS(TemperatureParam::from_tau(0.0));
}

TEST_CASE("patch loss examples") {
    CHECK(patch_loss(vec({0, 1, 0}), 1) == 0.0);
    const Vector p = patch_probs(vec({1, 0}), TemperatureParam::from_tau(1.0));
    CHECK(patch_loss(p, 0) == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-14));
    CHECK(std::abs(patch_loss(p, 0) - 0.31326) <= 1e-4);
    CHECK(patch_loss(Vector::Constant(5, 0.2), 3) == doctest::Approx(std::log(5.0)).epsilon(1e-14));
    CHECK_THROWS(patch_loss(p, 2));
}

TEST_CASE("scoring properties") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> log_tau(std::log(0.01), std::log(10.0));
    for (int trial = 0; trial < 500; ++trial) {
        const int c = 2 + static_cast<int>(rng() % 6);
        const Matrix protos = random_matrix(c, 6, rng).rowwise().normalized();
        const Vector h = random_vector(6, rng);
        const TemperatureParam t{log_tau(rng)};
        const Vector s = patch_scores(h, protos);
        const Vector p = patch_probs(s, t);
        Eigen::Index as, ap;
        s.maxCoeff(&as);
        p.maxCoeff(&ap);
        CHECK(as == ap);
        CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
        CHECK(p.minCoeff() >= 0.0);
        CHECK(p.maxCoeff() <= 1.0);
        CHECK((patch_probs(patch_scores(Vector(3.7 * h), protos), t) - p).norm() <= 1e-12);
        CHECK(patch_loss(p, static_cast<int>(ap)) <= std::log(static_cast<double>(c)) + 1e-12);
    }
}

TEST_CASE("positional code examples") {
    const Vector z = positional_embedding({0, 0}, 8);
    for (int j = 0; j < 8; ++j) CHECK(z[j] == (j % 2 == 0 ? 0.0 : 1.0));
    CHECK(positional_embedding({3, 5}, 8) == positional_embedding({3, 5}, 8));
    const Vector e = positional_embedding({1, 0}, 4);
    CHECK(e[0] == std::sin(1.0));
    CHECK(e[1] == std::cos(1.0));
    CHECK(std::abs(e[0] - 0.84147) <= 1e-5);
    CHECK(std::abs(e[1] - 0.54030) <= 1e-5);
    CHECK(e[2] == 0.0);
    CHECK(e[3] == 1.0);
    const Vector f = positional_embedding({2, 7}, 8);
    CHECK(f[4] == doctest::Approx(std::sin(2.0 * std::pow(10000.0, -0.5))).epsilon(1e-15));
    CHECK(f[7] == doctest::Approx(std::cos(7.0 * std::pow(10000.0, -0.5))).epsilon(1e-15));
    CHECK_THROWS(positional_embedding({0, 0}, 6));
}

TEST_CASE("learned table lookup") {
    AggregationParams p{Vector::Zero(8), PositionalMode::learned_table, 3, 5, Matrix::Zero(15, 4)};
    p.table->row(2 * 5 + 4).setConstant(7.0);
    CHECK(table_row({2, 4}, p) == 14);
    CHECK(positional_embedding({2, 4}, p) == Vector::Constant(4, 7.0));
    CHECK_THROWS(table_row({3, 0}, p));
    CHECK_THROWS(validate(AggregationParams{Vector::Zero(8), PositionalMode::learned_table, 3, 5, std::nullopt}));
    CHECK_THROWS(validate(AggregationParams{Vector::Zero(8), PositionalMode::sinusoidal, 3, 5, Matrix::Zero(15, 4)}));
    CHECK(parse_positional_mode("table") == PositionalMode::learned_table);
    CHECK(to_string(parse_positional_mode("sin")) == "sin");
    CHECK_THROWS(parse_positional_mode("rope"));
}

TEST_CASE("patch weight examples") {
    const std::vector<GridCoord> one{{0, 0}};
    CHECK(patch_weights(Matrix::Ones(1, 4), one, sin_params(Vector::Ones(8)))[0] == 1.0);

    std::mt19937_64 rng(3);
    const std::vector<GridCoord> coords{{0, 0}, {1, 2}, {3, 3}, {7, 1}};
    const Vector a = patch_weights(random_matrix(4, 4, rng), coords, sin_params(Vector::Zero(8)));
    for (double x : a) CHECK(x == 0.25);

    Vector w = Vector::Zero(8);
    w[0] = std::log(2.0);
    Matrix h = Matrix::Zero(2, 4);
    h(0, 0) = 1.0;
    const Vector b = patch_weights(h, {{0, 0}, {0, 0}}, sin_params(w));
    CHECK(std::abs(b[0] - 2.0 / 3.0) <= 1e-12);
    CHECK(std::abs(b[1] - 1.0 / 3.0) <= 1e-12);
}

TEST_CASE("aggregation examples") {
    Matrix p(2, 2);
    p << 1, 0, 0, 1;
    CHECK(aggregate_slide(vec({0.5, 0.5}), p) == vec({0.5, 0.5}));
    Matrix same(3, 3);
    same.rowwise() = vec({0.2, 0.3, 0.5}).transpose();
    CHECK((aggregate_slide(vec({0.1, 0.6, 0.3}), same) - vec({0.2, 0.3, 0.5})).norm() <= 1e-15);
    Matrix three(3, 2);
    three << 0.9, 0.1, 0.4, 0.6, 0.5, 0.5;
    CHECK(aggregate_slide(vec({1, 0, 0}), three) == vec({0.9, 0.1}));

    CHECK(slide_loss(vec({0, 1}), 1) == 0.0);
    CHECK(slide_loss(Vector::Constant(4, 0.25), 0) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    CHECK(std::abs(slide_loss(vec({0.5, 0.5}), 1) - 0.69315) <= 1e-5);
}

TEST_CASE("aggregation properties") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        const int m = 1 + static_cast<int>(rng() % 12), c = 2 + static_cast<int>(rng() % 4), d = 8;
        const SlideRecord slide = test::random_slide(m, d, 8, 8, rng);
        std::vector<GridCoord> coords;
        for (const auto& patch : slide.patches) coords.push_back(patch.coord);
        const Matrix h = slide.feature_matrix();
        const AggregationParams params = sin_params(random_vector(2 * d, rng));
        const Vector alpha = patch_weights(h, coords, params);
        CHECK(std::abs(alpha.sum() - 1.0) <= 1e-12);
        CHECK(alpha.minCoeff() >= 0.0);

        Matrix probs(m, c);
        for (int i = 0; i < m; ++i) probs.row(i) = softmax(random_vector(c, rng, 2.0)).transpose();
        const Vector big_p = aggregate_slide(alpha, probs);
        CHECK(std::abs(big_p.sum() - 1.0) <= 1e-12);
        for (int k = 0; k < c; ++k) {
            CHECK(big_p[k] >= probs.col(k).minCoeff() - 1e-15);
            CHECK(big_p[k] <= probs.col(k).maxCoeff() + 1e-15);
        }

        std::vector<int> perm(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        Matrix hp(m, d), pp(m, c);
        std::vector<GridCoord> cp(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) {
            hp.row(i) = h.row(perm[i]);
            pp.row(i) = probs.row(perm[i]);
            cp[i] = coords[perm[i]];
        }
        const Vector alpha_p = patch_weights(hp, cp, params);
        for (int i = 0; i < m; ++i) CHECK(std::abs(alpha_p[i] - alpha[perm[i]]) <= 1e-12);
        CHECK((aggregate_slide(alpha_p, pp) - big_p).norm() <= 1e-12);
    }
}

TEST_CASE("aggregation logits are shift invariant") {
    std::mt19937_64 rng(5);
    const std::vector<GridCoord> coords{{0, 0}, {0, 1}, {2, 3}};
    Matrix h = random_matrix(3, 4, rng);
    h.col(0).setOnes();
    const Vector w = random_vector(8, rng);
    Vector shifted = w;
    shifted[0] += 3.0;
    const Vector a = patch_weights(h, coords, sin_params(w));
    const Vector b = patch_weights(h, coords, sin_params(shifted));
    CHECK((a - b).norm() <= 1e-12);
}
