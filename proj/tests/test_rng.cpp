#include <doctest.h>

#include <cmath>

#include "sasr/rng.hpp"

using sasr::Rng;
using sasr::RngStream;

TEST_SUITE("rng") {

TEST_CASE("same seed reproduces the sequence") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("streams with different ids diverge") {
    Rng a = Rng::stream(7, RngStream::Action);
    Rng b = Rng::stream(7, RngStream::Env);
    int diff = 0;
    for (int i = 0; i < 10; ++i) {
        if (a.next_u64() != b.next_u64()) ++diff;
    }
    CHECK(diff == 10);
}

TEST_CASE("uniform stays in [0, 1)") {
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal moments") {
    Rng rng(3);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("gamma matches mean and variance for real shapes") {
    Rng rng(4);
    for (double shape : {0.5, 1.0, 2.7, 10.0, 150.0}) {
        double sum = 0.0, sq = 0.0;
        const int n = 200000;
        for (int i = 0; i < n; ++i) {
            const double x = rng.gamma(shape);
            sum += x;
            sq += x * x;
        }
        const double mean = sum / n;
        const double var = sq / n - mean * mean;
        CHECK(mean == doctest::Approx(shape).epsilon(0.02));
        CHECK(var == doctest::Approx(shape).epsilon(0.05));
    }
}

TEST_CASE("gamma rejects nonpositive shape") {
    Rng rng(5);
    CHECK_THROWS_AS(rng.gamma(0.0), std::invalid_argument);
    CHECK_THROWS_AS(rng.gamma(-1.0), std::invalid_argument);
}

TEST_CASE("laplace has unit-b moments") {
    Rng rng(6);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.laplace();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(sq / n == doctest::Approx(2.0).epsilon(0.05));  // variance of Laplace(0,1)
}

TEST_CASE("cauchy median is zero and tails are heavy") {
    Rng rng(7);
    int below = 0, big = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.cauchy();
        if (x < 0.0) ++below;
        if (std::abs(x) > 31.8) ++big;  // P(|X| > 31.82) ~ 2%
    }
    CHECK(std::abs(below / static_cast<double>(n) - 0.5) < 0.01);
    CHECK(big / static_cast<double>(n) == doctest::Approx(0.02).epsilon(0.25));
}

TEST_CASE("state round-trips through text") {
    Rng a(11);
    for (int i = 0; i < 17; ++i) a.next_u64();
    Rng b(0);
    b.set_state_string(a.state_string());
    for (int i = 0; i < 50; ++i) CHECK(a.next_u64() == b.next_u64());
}

}  // TEST_SUITE
