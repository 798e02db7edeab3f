#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "sasr/mathutil.hpp"
#include "sasr/rff.hpp"
#include "sasr/rng.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using sasr::exact_kernel;
using sasr::frobenius_error;
using sasr::KernelKind;
using sasr::RffProjector;
using sasr::Rng;

namespace {

VectorXd random_state(Rng& rng, int dim, double scale = 1.0) {
    VectorXd s(dim);
    for (int d = 0; d < dim; ++d) s(d) = rng.uniform(-scale, scale);
    return s;
}

}  // namespace

TEST_SUITE("rff") {

TEST_CASE("cos_array matches std::cos including huge arguments") {
    Rng rng(1);
    std::vector<double> xs(5000), out(5000);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xs[i] = rng.uniform(-200.0, 200.0);
    }
    xs[0] = 0.0;
    xs[1] = 2.5e6;   // beyond the vector path's reduction range
    xs[2] = -3.1e7;
    sasr::cos_array(xs.data(), out.data(), xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CHECK(out[i] == doctest::Approx(std::cos(xs[i])).epsilon(1e-12));
    }
}

TEST_CASE("offsets lie in [0, 2pi)") {
    RffProjector p(2, 1000, 0.2, KernelKind::Gaussian, 7);
    for (int m = 0; m < p.feature_dim(); ++m) {
        CHECK(p.offsets()(m) >= 0.0);
        CHECK(p.offsets()(m) < 2.0 * M_PI);
    }
}

TEST_CASE("construction is deterministic in the seed") {
    RffProjector a(2, 64, 0.2, KernelKind::Gaussian, 7);
    RffProjector b(2, 64, 0.2, KernelKind::Gaussian, 7);
    CHECK(a.weights() == b.weights());
    CHECK(a.offsets() == b.offsets());
    RffProjector c(2, 64, 0.2, KernelKind::Gaussian, 8);
    CHECK(a.weights() != c.weights());
}

TEST_CASE("invalid construction arguments throw") {
    CHECK_THROWS_AS(RffProjector(2, 0, 0.2, KernelKind::Gaussian, 1), std::invalid_argument);
    CHECK_THROWS_AS(RffProjector(0, 10, 0.2, KernelKind::Gaussian, 1), std::invalid_argument);
    CHECK_THROWS_AS(RffProjector(2, 10, 0.0, KernelKind::Gaussian, 1), std::invalid_argument);
    CHECK_THROWS_AS(RffProjector(2, 10, -1.0, KernelKind::Gaussian, 1), std::invalid_argument);
}

TEST_CASE("zero weights and offsets give sqrt(2) per feature") {
    RffProjector p(MatrixXd::Zero(3, 1), VectorXd::Zero(1), 1.0, KernelKind::Gaussian);
    VectorXd s(3);
    s << 0.3, -0.7, 2.0;
    const VectorXd z = p.project(s);
    REQUIRE(z.size() == 1);
    CHECK(z(0) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("projection entries and norm respect the cosine bounds") {
    RffProjector p(2, 256, 0.2, KernelKind::Gaussian, 7);
    Rng rng(3);
    const double bound = std::sqrt(2.0 / 256.0);
    for (int i = 0; i < 50; ++i) {
        const VectorXd z = p.project(random_state(rng, 2));
        CHECK(z.squaredNorm() <= 2.0 + 1e-12);
        CHECK(z.cwiseAbs().maxCoeff() <= bound + 1e-12);
    }
}

TEST_CASE("projection rejects bad input") {
    RffProjector p(2, 16, 0.2, KernelKind::Gaussian, 7);
    VectorXd wrong(3);
    wrong.setZero();
    CHECK_THROWS_AS(p.project(wrong), std::invalid_argument);
    VectorXd inf(2);
    inf << 1.0, std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(p.project(inf), std::invalid_argument);
}

TEST_CASE("Gaussian inner products track the exact kernel (M=1000)") {
    RffProjector p(2, 1000, 0.2, KernelKind::Gaussian, 11);
    Rng rng(5);
    double max_err = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const VectorXd a = random_state(rng, 2);
        const VectorXd b = random_state(rng, 2);
        const double approx = p.project(a).dot(p.project(b));
        const double exact = exact_kernel(a, b, 0.2, KernelKind::Gaussian);
        max_err = std::max(max_err, std::abs(approx - exact));
    }
    CHECK(max_err <= 0.1);
    MESSAGE("max abs error over 1000 pairs: ", max_err);
}

TEST_CASE("exact kernel closed forms") {
    VectorXd a(2), b(2);
    a << 0.3, -0.4;
    b = a;
    CHECK(exact_kernel(a, b, 0.2, KernelKind::Gaussian) == doctest::Approx(1.0));
    CHECK(exact_kernel(a, b, 1.0, KernelKind::Laplacian) == doctest::Approx(1.0));
    b << 0.3 + 0.2, -0.4;  // distance exactly 0.2 at bandwidth 0.2
    CHECK(exact_kernel(a, b, 0.2, KernelKind::Gaussian) == doctest::Approx(std::exp(-0.5)));
    // Cauchy form is a per-dimension product.
    VectorXd c(1), d(1);
    c << 0.0;
    d << 1.0;
    CHECK(exact_kernel(c, d, 1.0, KernelKind::Cauchy) == doctest::Approx(2.0 / (M_PI * 2.0)));
    VectorXd e(3);
    e.setZero();
    CHECK_THROWS_AS(exact_kernel(a, e, 0.2, KernelKind::Gaussian), std::invalid_argument);
}

TEST_CASE("unbiasedness across projector seeds (Gaussian)") {
    Rng rng(17);
    const int pairs = 20, seeds = 200, m = 64;
    std::vector<VectorXd> as, bs;
    for (int i = 0; i < pairs; ++i) {
        as.push_back(random_state(rng, 2, 0.4));
        bs.push_back(random_state(rng, 2, 0.4));
    }
    for (int i = 0; i < pairs; ++i) {
        std::vector<double> approx(seeds);
        for (int s = 0; s < seeds; ++s) {
            RffProjector p(2, m, 0.2, KernelKind::Gaussian, 1000 + static_cast<uint64_t>(s));
            approx[static_cast<std::size_t>(s)] = p.project(as[i]).dot(p.project(bs[i]));
        }
        const double mean = sasr::vector_mean(approx);
        const double se = sasr::vector_stderr(approx);
        const double exact = exact_kernel(as[i], bs[i], 0.2, KernelKind::Gaussian);
        CHECK(std::abs(mean - exact) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("unbiasedness for the Laplacian spectral draw") {
    Rng rng(23);
    const VectorXd a = random_state(rng, 2, 0.5);
    const VectorXd b = random_state(rng, 2, 0.5);
    std::vector<double> approx;
    for (int s = 0; s < 300; ++s) {
        RffProjector p(2, 64, 1.0, KernelKind::Laplacian, 500 + static_cast<uint64_t>(s));
        approx.push_back(p.project(a).dot(p.project(b)));
    }
    const double mean = sasr::vector_mean(approx);
    const double se = sasr::vector_stderr(approx);
    CHECK(std::abs(mean - exact_kernel(a, b, 1.0, KernelKind::Laplacian)) <= 3.0 * se);
}

TEST_CASE("approximation depends only on the state difference in expectation") {
    Rng rng(29);
    const VectorXd a = random_state(rng, 2, 0.4);
    const VectorXd b = random_state(rng, 2, 0.4);
    VectorXd shift(2);
    shift << 0.9, -1.3;
    const int seeds = 200;
    std::vector<double> plain(seeds), moved(seeds);
    for (int s = 0; s < seeds; ++s) {
        RffProjector p(2, 64, 0.2, KernelKind::Gaussian, 9000 + static_cast<uint64_t>(s));
        plain[static_cast<std::size_t>(s)] = p.project(a).dot(p.project(b));
        moved[static_cast<std::size_t>(s)] = p.project(a + shift).dot(p.project(b + shift));
    }
    const double diff = sasr::vector_mean(plain) - sasr::vector_mean(moved);
    const double se = std::hypot(sasr::vector_stderr(plain), sasr::vector_stderr(moved));
    CHECK(std::abs(diff) <= 3.0 * se);
}

TEST_CASE("single-projector approximations stay within [-2, 2]") {
    Rng rng(31);
    for (uint64_t seed = 0; seed < 20; ++seed) {
        RffProjector p(2, 32, 0.2, KernelKind::Gaussian, seed);
        for (int i = 0; i < 20; ++i) {
            const double v = p.project(random_state(rng, 2)).dot(p.project(random_state(rng, 2)));
            CHECK(v <= 2.0 + 1e-12);
            CHECK(v >= -2.0 - 1e-12);
        }
    }
}

TEST_CASE("frobenius error is near zero for a repeated state at large M") {
    VectorXd s(2);
    s << 0.2, -0.1;
    RffProjector p(2, 4000, 0.2, KernelKind::Gaussian, 3);
    const double err = frobenius_error(p, {s, s});
    CHECK(err < 0.1);
}

TEST_CASE("frobenius error decreases with feature dimension (majority over seeds)") {
    Rng rng(37);
    std::vector<VectorXd> states;
    for (int i = 0; i < 100; ++i) states.push_back(random_state(rng, 2, 0.5));
    int better = 0;
    const int trials = 10;
    for (uint64_t seed = 0; seed < trials; ++seed) {
        RffProjector small(2, 50, 0.2, KernelKind::Gaussian, seed);
        RffProjector large(2, 1000, 0.2, KernelKind::Gaussian, seed);
        if (frobenius_error(small, states) > frobenius_error(large, states)) ++better;
    }
    CHECK(better > trials / 2);
}

TEST_CASE("frobenius error needs at least two states") {
    RffProjector p(2, 16, 0.2, KernelKind::Gaussian, 3);
    CHECK_THROWS_AS(frobenius_error(p, {}), std::invalid_argument);
    VectorXd s(2);
    s.setZero();
    CHECK_THROWS_AS(frobenius_error(p, {s}), std::invalid_argument);
}

TEST_CASE("bandwidth rescaling matches a fresh draw at the new bandwidth") {
    RffProjector p(2, 128, 0.5, KernelKind::Gaussian, 21);
    RffProjector q = p.with_bandwidth(0.1);
    CHECK(q.bandwidth() == doctest::Approx(0.1));
    // Entries scale by h_old / h_new = 5.
    CHECK(q.weights()(0, 0) == doctest::Approx(5.0 * p.weights()(0, 0)));
    CHECK(q.offsets() == p.offsets());
    RffProjector lap(2, 8, 1.0, KernelKind::Laplacian, 21);
    CHECK_THROWS_AS(lap.with_bandwidth(0.5), std::logic_error);
}

TEST_CASE("save/load round-trips bit-exactly") {
    RffProjector p(3, 32, 0.7, KernelKind::Cauchy, 77);
    std::stringstream ss;
    p.save(ss);
    const RffProjector q = RffProjector::load(ss);
    CHECK(q.weights() == p.weights());
    CHECK(q.offsets() == p.offsets());
    CHECK(q.bandwidth() == p.bandwidth());
    CHECK(q.kernel() == p.kernel());
}

}  // TEST_SUITE
