#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "repspace/error.hpp"
#include "repspace/geometry.hpp"

using namespace repspace;

namespace {

std::vector<double> naive_logits(const ClassifierHead& h, const std::vector<double>& f) {
    std::vector<double> out;
    for (std::size_t c = 0; c < h.weight.rows(); ++c) {
        double s = h.bias[c];
        for (std::size_t j = 0; j < f.size(); ++j) s += h.weight(c, j) * f[j];
        out.push_back(s);
    }
    return out;
}

double brute_ce(const std::vector<double>& z, const std::vector<double>& t) {
    double denom = 0.0;
    for (double v : z) denom += std::exp(v);
    double loss = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) loss -= t[c] * std::log(std::exp(z[c]) / denom);
    return loss;
}

}  // namespace

TEST_CASE("logits of identity head") {
    ClassifierHead h{Matrix<double>(2, 2, 0.0), {0.0, 0.0}};
    h.weight(0, 0) = h.weight(1, 1) = 1.0;
    auto z = logits(h, std::vector<double>{3.0, -1.0});
    CHECK(z[0] == 3.0);
    CHECK(z[1] == -1.0);
}

TEST_CASE("logits at the origin are the biases") {
    Rng rng(3);
    auto h = testing::random_head(rng, 5, 4);
    auto z = logits(h, std::vector<double>(4, 0.0));
    for (std::size_t c = 0; c < 5; ++c) CHECK(z[c] == h.bias[c]);
}

TEST_CASE("logits match a scalar loop") {
    Rng rng(11);
    for (int k = 0; k < 50; ++k) {
        auto h = testing::random_head(rng, 3, 4);
        auto f = testing::random_vector(rng, 4);
        auto z = logits(h, f);
        auto ref = naive_logits(h, f);
        for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(z[c] - ref[c]) < 1e-12);
    }
}

TEST_CASE("decomposition angles and recomposition") {
    ClassifierHead h{Matrix<double>(2, 2), {0.3, -0.1}};
    h.weight(0, 0) = 2.0, h.weight(0, 1) = 1.0;
    h.weight(1, 0) = -1.0, h.weight(1, 1) = 2.0;
    auto d = decompose(h, std::vector<double>{4.0, 2.0});
    CHECK(std::abs(d.cos_theta[0] - 1.0) < 1e-9);
    CHECK(std::abs(d.cos_theta[1]) < 1e-9);

    Rng rng(5);
    for (int k = 0; k < 100; ++k) {
        auto hr = testing::random_head(rng, 6, 5);
        auto f = testing::random_vector(rng, 5, 3.0);
        auto z = logits(hr, f);
        auto r = decompose(hr, f).recompose();
        for (std::size_t c = 0; c < 6; ++c) CHECK(std::abs(r[c] - z[c]) <= 1e-6 * (1 + std::abs(z[c])));
    }
}

TEST_CASE("decomposition rejects zero vectors") {
    ClassifierHead h{Matrix<double>(2, 2, 1.0), {0.0, 0.0}};
    CHECK_THROWS_AS(decompose(h, std::vector<double>{0.0, 0.0}), Error);
    h.weight(1, 0) = h.weight(1, 1) = 0.0;
    CHECK_THROWS_AS(decompose(h, std::vector<double>{1.0, 0.0}), Error);
    CHECK_THROWS_AS(cosine(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 0.0}), Error);
}

TEST_CASE("softmax") {
    auto p = softmax(std::vector<double>{0.0, 0.0});
    CHECK(p[0] == doctest::Approx(0.5));
    auto q = softmax(std::vector<double>{1000.0, 0.0});
    CHECK(q[0] == 1.0);
    CHECK(q[1] == doctest::Approx(0.0));
    CHECK(std::isfinite(q[1]));

    Rng rng(2);
    auto z = testing::random_vector(rng, 7, 4.0);
    auto shifted = z;
    for (double& v : shifted) v += 123.25;
    auto a = softmax(z), b = softmax(shifted);
    double sum = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
        CHECK(std::abs(a[c] - b[c]) < 1e-12);
        sum += a[c];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("cross entropy") {
    CHECK(cross_entropy(std::vector<double>{0.0, 0.0}, SoftTarget::one_hot(2, 0)) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    std::vector<double> flat(10, 1.7);
    CHECK(cross_entropy(flat, SoftTarget(std::vector<double>(10, 0.1))) ==
          doctest::Approx(std::log(10.0)).epsilon(1e-12));

    Rng rng(9);
    auto z = testing::random_vector(rng, 10, 2.0);
    auto t = SoftTarget::smoothed(10, 4, 0.1);
    std::vector<double> tv(t.probabilities().begin(), t.probabilities().end());
    CHECK(std::abs(cross_entropy(z, t) - brute_ce(z, tv)) < 1e-12);
}

TEST_CASE("soft target construction") {
    auto t = SoftTarget::smoothed(10, 3, 0.1);
    CHECK(t[3] == doctest::Approx(0.91));
    CHECK(t[0] == doctest::Approx(0.01));
    auto hard = SoftTarget::smoothed(4, 1, 0.0);
    CHECK(hard[1] == 1.0);
    CHECK(hard[0] == 0.0);
    CHECK_THROWS_AS(SoftTarget(std::vector<double>{0.5, 0.6}), Error);
    CHECK_THROWS_AS(SoftTarget(std::vector<double>{1.5, -0.5}), Error);
}

TEST_CASE("gradient vanishes where softmax equals the target") {
    Rng rng(4);
    auto h = testing::random_head(rng, 3, 2);
    auto f = testing::random_vector(rng, 2);
    auto p = softmax(logits(h, f));
    auto g = grad_wrt_feature(h, f, p);
    for (double v : g) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("gradient matches central differences") {
    Rng rng(17);
    const double step = 1e-5;
    for (int k = 0; k < 20; ++k) {
        auto h = testing::random_head(rng, 4, 3);
        auto f = testing::random_vector(rng, 3);
        auto t = SoftTarget::smoothed(4, k % 4, 0.1);
        auto g = grad_wrt_feature(h, f, t);
        for (std::size_t j = 0; j < 3; ++j) {
            auto up = f, dn = f;
            up[j] += step;
            dn[j] -= step;
            double fd = (cross_entropy(logits(h, up), t) - cross_entropy(logits(h, dn), t)) / (2 * step);
            CHECK(std::abs(fd - g[j]) <= 1e-4 * std::max(1e-3, std::abs(fd)));
        }
    }
}

TEST_CASE("gradient shrinks far along the class weight") {
    Rng rng(8);
    auto h = testing::random_head(rng, 4, 3, 0.0);
    std::vector<double> far(3);
    for (std::size_t j = 0; j < 3; ++j) far[j] = 20.0 * h.weight(1, j);
    auto t = SoftTarget::one_hot(4, 1);
    CHECK(norm(grad_wrt_feature(h, far, t)) < norm(grad_wrt_feature(h, std::vector<double>(3, 0.0), t)));
}

TEST_CASE("confidence and prediction") {
    auto p = predict_from_logits(std::vector<double>{5.0, -5.0});
    CHECK(p.label == 0);
    CHECK(std::abs(p.confidence - 1.0 / (1.0 + std::exp(-10.0))) < 1e-12);

    auto tie = predict_from_logits(std::vector<double>{2.0, 2.0, 2.0, 2.0});
    CHECK(tie.label == 0);
    CHECK(tie.confidence == doctest::Approx(0.25));

    Rng rng(21);
    for (int k = 0; k < 100; ++k) {
        auto h = testing::random_head(rng, 5, 3).without_bias();
        auto f = testing::random_vector(rng, 3);
        auto scaled = f;
        const double lambda = std::exp(rng.normal() * 3);
        for (double& v : scaled) v *= lambda;
        CHECK(confidence_and_prediction(h, f).label == confidence_and_prediction(h, scaled).label);
    }
}

TEST_CASE("argmax keeps the first maximum") {
    CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
    CHECK(argmax(std::vector<double>{-1.0}) == 0);
}
