#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "repspace/conetest.hpp"
#include "repspace/geometry.hpp"

using namespace repspace;

TEST_CASE("zero bias gives index 100 everywhere") {
    Rng rng(1);
    auto head = testing::random_head(rng, 6, 4).without_bias();
    auto dump = testing::self_labelled_dump(testing::random_features(rng, 200, 4, 3.0), head);
    auto r = cone_test(dump);
    CHECK(r.indices.size() == 200);
    for (int i : r.indices) CHECK(i == 100);
    CHECK(r.mean == 100.0);
    CHECK(r.std == 0.0);
}

TEST_CASE("two-class bias example flips at step 38") {
    ClassifierHead head{Matrix<double>(2, 2, 0.0), {0.0, 0.5}};
    head.weight(0, 0) = 1.0;
    head.weight(1, 0) = -1.0;
    Matrix<double> f(1, 2, 0.0);
    f(0, 0) = 0.4;
    auto dump = make_dump(f, {0}, head);
    // oracle: first i with 0.4 (100 - i) / 100 < 0.25
    int expected = 100;
    for (int i = 1; i < 100; ++i)
        if (0.4 * (100 - i) / 100.0 < 0.25) {
            expected = i;
            break;
        }
    CHECK(expected == 38);
    auto r = cone_test(dump);
    REQUIRE(r.indices.size() == 1);
    CHECK(r.indices[0] == expected);
}

TEST_CASE("misclassified samples are skipped and summaries recompute") {
    Rng rng(2);
    auto head = testing::random_head(rng, 4, 3, 0.8);
    auto f = testing::random_features(rng, 300, 3, 2.0);
    std::vector<std::uint32_t> labels(300);
    for (auto& l : labels) l = static_cast<std::uint32_t>(rng.below(4));
    auto dump = make_dump(f, labels, head);
    auto r = cone_test(dump);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < 300; ++i)
        correct += argmax(logits(dump.head(), dump.feature(i))) == labels[i] ? 1 : 0;
    CHECK(r.indices.size() == correct);
    double sum = 0.0;
    for (int i : r.indices) {
        CHECK(i >= 1);
        CHECK(i <= 100);
        sum += i;
    }
    const double mean = sum / static_cast<double>(r.indices.size());
    double sq = 0.0;
    for (int i : r.indices) sq += (i - mean) * (i - mean);
    CHECK(std::abs(r.mean - mean) < 1e-9);
    CHECK(std::abs(r.std - std::sqrt(sq / static_cast<double>(r.indices.size()))) < 1e-9);
    std::size_t total = 0;
    for (auto c : r.histogram()) total += c;
    CHECK(total == r.indices.size());
}

TEST_CASE("positive feature scaling leaves indices unchanged with zero bias") {
    Rng rng(3);
    auto head = testing::random_head(rng, 5, 3).without_bias();
    auto f = testing::random_features(rng, 100, 3);
    auto a = cone_test(testing::self_labelled_dump(f, head));
    for (double& v : f.values()) v *= 8.0;
    auto b = cone_test(testing::self_labelled_dump(f, head));
    CHECK(a.indices == b.indices);
}

TEST_CASE("bias dependence") {
    Rng rng(4);
    SUBCASE("zero bias") {
        auto head = testing::random_head(rng, 5, 3).without_bias();
        auto dump = testing::self_labelled_dump(testing::random_features(rng, 200, 3), head);
        auto bd = bias_dependence(dump);
        for (auto n : bd.n_prime_c) CHECK(n == 0);
        for (const auto& r : bd.ratio)
            if (r) CHECK(*r == 0.0);
    }
    SUBCASE("a dominant bias owns a near-origin cluster") {
        ClassifierHead head{Matrix<double>(2, 2, 0.0), {15.705, 0.0}};
        head.weight(0, 0) = 0.1318;
        head.weight(0, 1) = -0.0165;
        head.weight(1, 0) = 0.2245;
        head.weight(1, 1) = 0.0709;
        Matrix<double> f(50, 2);
        for (std::size_t i = 0; i < 50; ++i) {
            f(i, 0) = 1.0 + rng.normal() * 0.3;
            f(i, 1) = 1.0 + rng.normal() * 0.3;
        }
        auto dump = make_dump(f, std::vector<std::uint32_t>(50, 0), head);
        auto bd = bias_dependence(dump);
        CHECK(bd.n_c[0] == 50);
        REQUIRE(bd.ratio[0].has_value());
        CHECK(*bd.ratio[0] == 1.0);
        CHECK_FALSE(bd.ratio[1].has_value());
    }
    SUBCASE("tiny biases and separated features") {
        auto head = testing::random_head(rng, 4, 4, 1e-6);
        for (double& b : head.bias) b = std::clamp(b, -1e-6, 1e-6);
        Matrix<double> f(80, 4);
        for (std::size_t i = 0; i < 80; ++i)
            for (std::size_t j = 0; j < 4; ++j) f(i, j) = 10.0 * head.weight(i % 4, j) + 0.1 * rng.normal();
        auto dump = testing::self_labelled_dump(f, head);
        auto bd = bias_dependence(dump);
        // brute force both argmaxes
        const auto h = dump.head(), hb = h.without_bias();
        for (std::size_t i = 0; i < 80; ++i)
            CHECK(argmax(logits(h, dump.feature(i))) == argmax(logits(hb, dump.feature(i))));
        for (const auto& r : bd.ratio)
            if (r) CHECK(*r == 0.0);
    }
}

TEST_CASE("bias dependence is permutation invariant") {
    Rng rng(5);
    auto head = testing::random_head(rng, 4, 2, 2.0);
    auto f = testing::random_features(rng, 120, 2);
    auto dump = testing::self_labelled_dump(f, head);
    auto a = bias_dependence(dump);
    auto perm = dump;
    for (std::size_t i = 0; i < 120; ++i) {
        const std::size_t src = 119 - i;
        for (std::size_t j = 0; j < 2; ++j) perm.features(i, j) = dump.features(src, j);
        perm.labels[i] = dump.labels[src];
    }
    auto b = bias_dependence(perm);
    CHECK(a.n_c == b.n_c);
    CHECK(a.n_prime_c == b.n_prime_c);
}
