#include <doctest.h>

#include <atomic>

#include "helpers.hpp"
#include "repspace/calibration.hpp"
#include "repspace/centers.hpp"
#include "repspace/conetest.hpp"
#include "repspace/parallel.hpp"
#include "repspace/raster.hpp"
#include "repspace/robustness.hpp"

using namespace repspace;

TEST_CASE("parallel_for visits each index once") {
    for (unsigned t : {1u, 2u, 5u}) {
        set_thread_count(t);
        std::vector<std::atomic<int>> hits(1003);
        parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
        for (auto& h : hits) CHECK(h.load() == 1);
    }
    set_thread_count(1);
    CHECK(thread_count() == 1);
}

TEST_CASE("results do not depend on the thread count") {
    Rng rng(11);
    auto head = testing::random_head(rng, 5, 2, 0.5);
    auto dump = testing::self_labelled_dump(testing::random_features(rng, 400, 2, 2.0), head);

    auto compute = [&] {
        auto centers = compute_class_centers(dump);
        return std::make_tuple(cone_test(dump).indices, centers.min_loss_point, feature_sign_attack(dump, 0.05),
                               rasterize(head, Region{-3, 3, -3, 3}, 64).predicted_class,
                               ece(dump).ece);
    };
    set_thread_count(1);
    const auto one = compute();
    for (unsigned t : {2u, 4u}) {
        set_thread_count(t);
        CHECK(compute() == one);
    }
    set_thread_count(1);
}
