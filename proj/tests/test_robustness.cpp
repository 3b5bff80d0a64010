#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "repspace/centers.hpp"
#include "repspace/error.hpp"
#include "repspace/geometry.hpp"
#include "repspace/robustness.hpp"

using namespace repspace;

namespace {

ClassifierHead opposed_pair() {
    ClassifierHead head{Matrix<double>(2, 2, 0.0), {0.0, 0.0}};
    head.weight(0, 0) = 1.0;
    head.weight(1, 0) = -1.0;
    return head;
}

}  // namespace

TEST_CASE("zero epsilon leaves features unchanged") {
    Rng rng(1);
    auto dump = testing::self_labelled_dump(testing::random_features(rng, 30, 3), testing::random_head(rng, 4, 3));
    auto p = feature_sign_attack(dump, 0.0);
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(p(i, j) == static_cast<double>(dump.features(i, j)));
    CHECK_THROWS_AS(feature_sign_attack(dump, -0.1), Error);
}

TEST_CASE("sign step geometry") {
    Rng rng(2);
    auto head = testing::random_head(rng, 5, 4);
    auto dump = testing::self_labelled_dump(testing::random_features(rng, 50, 4), head);
    const double eps = 0.05;
    auto p = feature_sign_attack(dump, eps);
    const auto h = dump.head();
    for (std::size_t i = 0; i < 50; ++i) {
        const auto f = dump.feature(i);
        const auto g = grad_wrt_feature(h, f, SoftTarget::one_hot(5, dump.labels[i]));
        for (std::size_t j = 0; j < 4; ++j) {
            const double step = std::abs(p(i, j) - f[j]);
            CHECK(step <= eps + 1e-12);
            if (g[j] != 0.0) CHECK(std::abs(step - eps) < 1e-12);
        }
    }
    CHECK(feature_sign_attack(dump, eps) == p);
}

TEST_CASE("flip near the boundary, survive far from it") {
    const auto head = opposed_pair();
    const double eps = 0.05;
    Matrix<double> f(2, 2, 0.0);
    f(0, 0) = 0.02;  // margin 0.04 < eps * |w1 - w0|_1 = 0.1
    f(1, 0) = 3.0;
    auto dump = make_dump(f, {0, 0}, head);
    auto p = feature_sign_attack(dump, eps);
    // exact logit change W (f' - f) = (-eps, +eps)
    CHECK(p(0, 0) == doctest::Approx(0.02 - eps));
    CHECK(p(0, 1) == 0.0);
    CHECK(argmax(logits(head, p.row(0))) == 1);
    CHECK(argmax(logits(head, p.row(1))) == 0);

    auto attacked = with_feature_attack(dump, eps);
    CHECK(attacked.meta.at("attack") == "feature_sign");
    auto centers = compute_class_centers(dump);
    auto report = attack_success_by_cosine_bin(attacked, centers, 4);
    CHECK(report.clean_correct == 2);
    CHECK(report.overall_success_rate == doctest::Approx(0.5));
    CHECK(report.attack == "feature_sign");
    REQUIRE(report.epsilon.has_value());
    CHECK(*report.epsilon == doctest::Approx(eps));
}

TEST_CASE("attack bin report edge cases") {
    Rng rng(3);
    auto head = opposed_pair();
    Matrix<double> f(40, 2);
    for (std::size_t i = 0; i < 40; ++i) {
        f(i, 0) = (i % 2 ? -1.0 : 1.0) * (0.5 + rng.uniform());
        f(i, 1) = rng.normal();
    }
    auto dump = testing::self_labelled_dump(f, head);
    auto centers = compute_class_centers(dump);

    auto same = dump;
    same.perturbed_features = dump.features;
    auto none = attack_success_by_cosine_bin(same, centers);
    CHECK(none.overall_success_rate == 0.0);
    std::size_t total = 0;
    for (std::size_t k = 0; k < none.counts.size(); ++k) {
        total += none.counts[k];
        if (none.success_rate[k]) CHECK(*none.success_rate[k] == 0.0);
    }
    CHECK(total == none.clean_correct);
    CHECK(none.bin_edges.size() == 21);

    auto flipped = dump;
    Matrix<float> neg = dump.features;
    for (float& v : neg.values()) v = -v;
    flipped.perturbed_features = neg;
    auto all = attack_success_by_cosine_bin(flipped, centers);
    CHECK(all.overall_success_rate == 1.0);
    for (std::size_t k = 0; k < all.counts.size(); ++k) {
        if (all.counts[k] > 0) {
            REQUIRE(all.success_rate[k].has_value());
            CHECK(*all.success_rate[k] == 1.0);
        } else {
            CHECK_FALSE(all.success_rate[k].has_value());
        }
    }
    CHECK_THROWS_AS(attack_success_by_cosine_bin(dump, centers), Error);
}

TEST_CASE("two-class zero-bias attack outcomes are scale free") {
    // for C = 2 and b = 0 the loss gradient is p_other * (w_other - w_label),
    // so its sign pattern, and with it the flip outcome, scales with f and eps
    Rng rng(4);
    auto head = testing::random_head(rng, 2, 3).without_bias();
    auto dump = testing::self_labelled_dump(testing::random_features(rng, 200, 3, 0.1), head);
    const double lambda = 4.0;  // power of two keeps the f32 features exact
    auto big = dump;
    for (float& v : big.features.values()) v *= static_cast<float>(lambda);
    auto p = feature_sign_attack(dump, 0.1);
    auto q = feature_sign_attack(big, 0.1 * lambda);
    const auto h = dump.head();
    std::size_t flips = 0;
    for (std::size_t i = 0; i < 200; ++i) {
        for (std::size_t j = 0; j < 3; ++j) CHECK(q(i, j) == lambda * p(i, j));
        const auto pred = argmax(logits(h, p.row(i)));
        CHECK(pred == argmax(logits(h, q.row(i))));
        flips += pred != dump.labels[i];
    }
    CHECK(flips > 0);
}

TEST_CASE("gradient field") {
    Rng rng(5);
    auto head = testing::random_head(rng, 3, 2, 0.3);
    const Region region{-3.0, 3.0, -3.0, 3.0};
    const int res = 401;
    auto field = gradient_field(head, region, res, 1, 0.1);
    CHECK(field.records.size() == static_cast<std::size_t>(res * res));

    const double h = 6.0 / (res - 1);
    double worst = 0.0;
    for (int j = 1; j < res - 1; j += 7)
        for (int i = 1; i < res - 1; i += 7) {
            const auto& r = field.at(i, j);
            const double fx = (field.at(i + 1, j).loss - field.at(i - 1, j).loss) / (2 * h);
            const double fy = (field.at(i, j + 1).loss - field.at(i, j - 1).loss) / (2 * h);
            const double err = std::hypot(fx - r.gx, fy - r.gy) / (std::hypot(r.gx, r.gy) + 0.1);
            worst = std::max(worst, err);
        }
    CHECK(worst < 1e-3);

    CenterOptions opts;
    opts.smoothing = 0.1;
    auto center = find_class_center(head, 1, opts);
    const auto g = grad_wrt_feature(head, center.point, SoftTarget::smoothed(3, 1, 0.1));
    double grid_min = INFINITY;
    for (const auto& r : field.records) grid_min = std::min(grid_min, std::hypot(r.gx, r.gy));
    CHECK(norm(g) <= grid_min);

    ClassifierHead three{Matrix<double>(2, 3, 1.0), {0.0, 0.0}};
    CHECK_THROWS_AS(gradient_field(three, region, 10, 0, 0.1), Error);
}
