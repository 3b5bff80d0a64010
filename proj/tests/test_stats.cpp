#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "repspace/centers.hpp"
#include "repspace/error.hpp"
#include "repspace/geometry.hpp"
#include "repspace/stats.hpp"

using namespace repspace;

namespace {

double covariance_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace

TEST_CASE("rms") {
    CHECK(rms(std::vector<double>{3.0, 4.0}) == doctest::Approx(std::sqrt(12.5)));
    std::vector<double> v{1.5, -2.0, 0.25};
    auto scaled = v;
    for (double& x : scaled) x *= -4.0;
    CHECK(rms(scaled) == 4.0 * rms(v));
}

TEST_CASE("pearson") {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> lin, neg;
    for (double v : x) {
        lin.push_back(2 * v + 1);
        neg.push_back(-v);
    }
    CHECK(std::abs(pearson(x, lin) - 1.0) < 1e-12);
    CHECK(std::abs(pearson(x, neg) + 1.0) < 1e-12);
    CHECK(std::abs(pearson(x, x) - 1.0) < 1e-12);

    // hand-expanded sums for x=(1,2,3,5), y=(2,1,4,6):
    // n=4, sx=11, sy=13, sxx=39, syy=57, sxy=2+2+12+30=46
    // r = (4*46 - 11*13) / sqrt((4*39 - 121)(4*57 - 169)) = 41 / sqrt(35*59)
    const double expected = 41.0 / std::sqrt(35.0 * 59.0);
    CHECK(std::abs(pearson(std::vector<double>{1, 2, 3, 5}, std::vector<double>{2, 1, 4, 6}) - expected) < 1e-12);

    Rng rng(1);
    auto a = testing::random_vector(rng, 50), b = testing::random_vector(rng, 50);
    CHECK(std::abs(pearson(a, b) - covariance_pearson(a, b)) < 1e-12);

    CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), Error);
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), Error);
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), Error);
}

TEST_CASE("feature stats against a scalar loop") {
    ClassifierHead head{Matrix<double>(2, 2, 0.0), {0.1, -0.1}};
    head.weight(0, 0) = 1.0;
    head.weight(1, 1) = 1.0;
    Matrix<double> f(5, 2);
    const double raw[5][2] = {{3, 4}, {2, -1}, {-1, 2}, {0.5, 0.4}, {-2, 3}};
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 2; ++j) f(i, j) = raw[i][j];
    auto dump = make_dump(f, {0, 0, 1, 1, 1}, head);
    auto centers = compute_class_centers(dump);
    auto st = feature_stats(dump, centers);
    CHECK(st.rms[0] == doctest::Approx(std::sqrt(12.5)));

    std::size_t correct = 0;
    double rms_sum = 0, cos_sum = 0;
    for (std::size_t i = 0; i < 5; ++i) {
        const double x = dump.features(i, 0), y = dump.features(i, 1);
        const double z0 = x + double(dump.bias[0]), z1 = y + double(dump.bias[1]);
        const std::size_t pred = z1 > z0 ? 1 : 0;
        const double conf = 1.0 / (1.0 + std::exp(-std::abs(z0 - z1)));
        CHECK(st.predicted[i] == pred);
        CHECK(std::abs(st.confidence[i] - conf) < 1e-12);
        const std::size_t label = dump.labels[i];
        const double cx = centers.min_loss_point(label, 0), cy = centers.min_loss_point(label, 1);
        const double cs = (x * cx + y * cy) / (std::hypot(x, y) * std::hypot(cx, cy));
        CHECK(std::abs(st.cos_to_center[i] - cs) < 1e-12);
        CHECK(std::abs(st.rms[i] - std::sqrt((x * x + y * y) / 2)) < 1e-12);
        if (pred == label) {
            ++correct;
            rms_sum += st.rms[i];
            cos_sum += cs;
        }
    }
    CHECK(st.summary_count == correct);
    CHECK(std::abs(st.rms_summary.mean - rms_sum / static_cast<double>(correct)) < 1e-9);
    CHECK(std::abs(st.cos_summary.mean - cos_sum / static_cast<double>(correct)) < 1e-9);
    CHECK(feature_stats(dump, centers, true).summary_count == 5);
}

TEST_CASE("cosine to center is parallel-exact and scale invariant") {
    Rng rng(2);
    auto head = testing::random_head(rng, 3, 4, 0.0);
    auto dump0 = testing::self_labelled_dump(testing::random_features(rng, 60, 4), head);
    auto centers = compute_class_centers(dump0);
    Matrix<double> f(3, 4);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t j = 0; j < 4; ++j) f(c, j) = 2.5 * centers.min_loss_point(c, j);
    auto dump = make_dump(f, {0, 1, 2}, head);
    auto st = feature_stats(dump, centers, true);
    for (double cs : st.cos_to_center) CHECK(std::abs(cs - 1.0) < 1e-6);

    auto big = centers;
    for (double& v : big.min_loss_point.values()) v *= 3.0;
    auto a = feature_stats(dump0, centers), b = feature_stats(dump0, big);
    for (std::size_t i = 0; i < a.cos_to_center.size(); ++i)
        CHECK(std::abs(a.cos_to_center[i] - b.cos_to_center[i]) < 1e-12);
}

TEST_CASE("perturbation stats") {
    Rng rng(3);
    auto head = testing::random_head(rng, 3, 4);
    auto f = testing::random_features(rng, 40, 4, 2.0);
    auto dump = testing::self_labelled_dump(f, head);

    auto same = dump;
    same.perturbed_features = dump.features;
    auto s = perturbation_stats(same);
    for (double v : s.perturbation_rms) CHECK(v == 0.0);
    CHECK_FALSE(s.pearson_r.has_value());

    auto grown = dump;
    Matrix<float> p = dump.features;
    for (float& v : p.values()) v = v * 1.1f;
    grown.perturbed_features = p;
    auto g = perturbation_stats(grown);
    REQUIRE(g.pearson_r.has_value());
    CHECK(std::abs(*g.pearson_r - 1.0) < 1e-6);
    for (std::size_t i = 0; i < 40; ++i) CHECK(g.perturbation_rms[i] == doctest::Approx(0.1 * g.feature_rms[i]).epsilon(1e-5));

    auto noisy = dump;
    Matrix<float> q = dump.features;
    for (float& v : q.values()) v += static_cast<float>(0.3 * rng.normal());
    noisy.perturbed_features = q;
    auto n = perturbation_stats(noisy);
    REQUIRE(n.pearson_r.has_value());
    CHECK(std::abs(*n.pearson_r - covariance_pearson(n.feature_rms, n.perturbation_rms)) < 1e-12);

    CHECK_THROWS_AS(perturbation_stats(dump), Error);
}
