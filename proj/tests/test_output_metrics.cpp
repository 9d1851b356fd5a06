#include <cmath>
#include <vector>

#include "doctest.h"
#include "ruler/errors.hpp"
#include "ruler/output_metrics.hpp"

using namespace ruler;

TEST_CASE("identical loss populations cannot beat chance") {
    std::vector<double> members = {1.0, 2.0};
    std::vector<double> nonmembers = {1.0, 2.0};
    auto r = outputs::mia_threshold_attack(members, nonmembers);
    CHECK(r.balanced_accuracy == 0.5);
    CHECK(r.threshold == 0.0);  // below-everything sentinel is the first maximiser
    CHECK(r.n_members == 2);
    CHECK(r.n_nonmembers == 2);
}

TEST_CASE("separable losses give a perfect attack at the gap midpoint") {
    std::vector<double> members = {0.1, 0.2};
    std::vector<double> nonmembers = {0.9, 1.1};
    auto r = outputs::mia_threshold_attack(members, nonmembers);
    CHECK(r.balanced_accuracy == 1.0);
    CHECK(r.threshold == doctest::Approx(0.55).epsilon(1e-12));
}

TEST_CASE("among tied maximisers the smallest threshold wins") {
    std::vector<double> members = {1.0, 5.0};
    std::vector<double> nonmembers = {3.0, 7.0};
    auto r = outputs::mia_threshold_attack(members, nonmembers);
    CHECK(r.balanced_accuracy == 0.75);
    CHECK(r.threshold == 2.0);  // 6.0 reaches the same accuracy
}

TEST_CASE("membership is decided by loss <= threshold") {
    std::vector<double> members = {1.0, 2.0};
    std::vector<double> nonmembers = {2.0, 3.0};
    auto r = outputs::mia_threshold_attack(members, nonmembers);
    CHECK(r.balanced_accuracy == 0.75);
    CHECK(r.threshold == 1.5);
}

TEST_CASE("anti-separated losses floor at one half") {
    // Members with the higher losses: the low-loss decision rule gains
    // nothing, and the sentinel keeps the result from dipping under 0.5.
    std::vector<double> members = {10.0, 20.0};
    std::vector<double> nonmembers = {1.0, 2.0};
    auto r = outputs::mia_threshold_attack(members, nonmembers);
    CHECK(r.balanced_accuracy == 0.5);

    auto mirrored = outputs::detail::best_threshold(members, nonmembers, false);
    CHECK(mirrored.balanced_accuracy == 1.0);
}

TEST_CASE("attack validates its inputs") {
    std::vector<double> some = {1.0};
    std::vector<double> none;
    CHECK_THROWS_AS(outputs::mia_threshold_attack(none, some), EmptyPopulation);
    CHECK_THROWS_AS(outputs::mia_threshold_attack(some, none), EmptyPopulation);
    std::vector<double> bad = {std::nan("")};
    CHECK_THROWS_AS(outputs::mia_threshold_attack(bad, some), NonFiniteInput);
}

TEST_CASE("pass window is strict at the edges") {
    CHECK(outputs::mia_pass_window(0.50));
    CHECK(outputs::mia_pass_window(0.545));
    CHECK(outputs::mia_pass_window(0.455));
    CHECK_FALSE(outputs::mia_pass_window(0.55));
    CHECK_FALSE(outputs::mia_pass_window(0.56));
    CHECK_FALSE(outputs::mia_pass_window(0.44));
}

TEST_CASE("accuracy is the fraction of agreements") {
    std::vector<int> pred = {1, 0, 1};
    std::vector<int> labels = {1, 1, 1};
    CHECK(outputs::accuracy(pred, labels) == doctest::Approx(2.0 / 3.0));
    std::vector<int> shorter = {1};
    CHECK_THROWS_AS(outputs::accuracy(pred, shorter), LengthMismatch);
    std::vector<int> empty;
    CHECK_THROWS_AS(outputs::accuracy(empty, empty), EmptyPopulation);
}
