#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "gradient_check.hpp"
#include "sasr/nn.hpp"
#include "sasr/rng.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using sasr::AdamOptimizer;
using sasr::HeadMode;
using sasr::Mlp;
using sasr::MlpGradients;
using sasr::Rng;
using sasr::ScalarAdam;

namespace {

using sasr::testing::max_rel_error_vs_central_differences;
using sasr::testing::quadratic_loss;

MatrixXd random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
    MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-scale, scale);
    }
    return m;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("zero parameters map everything to zero") {
    Rng rng(1);
    Mlp net(3, {8}, 2, HeadMode::Single, rng);
    net.set_flat_parameters(VectorXd::Zero(net.parameter_count()));
    net.forward(MatrixXd::Random(5, 3));
    CHECK(net.output().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity single layer passes input through") {
    Rng rng(2);
    Mlp net(3, {}, 3, HeadMode::Single, rng);
    VectorXd params = VectorXd::Zero(net.parameter_count());
    // Weight tensor is stored column-major (out x in); identity diagonal.
    for (int i = 0; i < 3; ++i) params(i * 3 + i) = 1.0;
    net.set_flat_parameters(params);
    const MatrixXd x = MatrixXd::Random(4, 3);
    net.forward(x);
    CHECK((net.output() - x).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("forward output is finite for random nets") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        Mlp net(4, {16, 16}, 3, HeadMode::Dual, rng);
        net.forward(random_matrix(rng, 7, 4, 3.0));
        CHECK(net.output().allFinite());
        CHECK(net.output_second().allFinite());
    }
}

TEST_CASE("forward rejects wrong input width and backward needs a cache") {
    Rng rng(4);
    Mlp net(3, {4}, 1, HeadMode::Single, rng);
    CHECK_THROWS_AS(net.forward(MatrixXd::Zero(2, 5)), std::invalid_argument);
    Mlp fresh(3, {4}, 1, HeadMode::Single, rng);
    CHECK_THROWS_AS(fresh.backward(MatrixXd::Zero(2, 1)), std::logic_error);
}

TEST_CASE("gradients match central finite differences on a 2-16-16-1 net") {
    Rng rng(5);
    Mlp net(2, {16, 16}, 1, HeadMode::Single, rng);
    const MatrixXd x = random_matrix(rng, 6, 2);
    const MatrixXd target = random_matrix(rng, 6, 1);
    CHECK(max_rel_error_vs_central_differences(net, x, target, nullptr) < 1e-4);
}

TEST_CASE("gradient check holds across ten seeded nets") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 100);
        Mlp net(3, {12, 12}, 2, HeadMode::Single, rng);
        const MatrixXd x = random_matrix(rng, 5, 3);
        const MatrixXd target = random_matrix(rng, 5, 2);
        CHECK(max_rel_error_vs_central_differences(net, x, target, nullptr) < 1e-4);
    }
}

TEST_CASE("dual-head gradients match finite differences") {
    Rng rng(6);
    Mlp net(3, {10}, 2, HeadMode::Dual, rng);
    const MatrixXd x = random_matrix(rng, 4, 3);
    const MatrixXd t0 = random_matrix(rng, 4, 2);
    const MatrixXd t1 = random_matrix(rng, 4, 2);
    CHECK(max_rel_error_vs_central_differences(net, x, t0, &t1) < 1e-4);
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
    Rng rng(7);
    Mlp net(3, {8}, 2, HeadMode::Single, rng);
    net.forward(random_matrix(rng, 4, 3));
    const MlpGradients grads = net.backward(MatrixXd::Zero(4, 2));
    CHECK(grads.flatten().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradients scale linearly with the loss") {
    Rng rng(8);
    Mlp net(3, {8}, 2, HeadMode::Single, rng);
    const MatrixXd x = random_matrix(rng, 4, 3);
    const MatrixXd g = random_matrix(rng, 4, 2);
    net.forward(x);
    const VectorXd once = net.backward(g).flatten();
    net.forward(x);
    const VectorXd thrice = net.backward((3.0 * g).eval()).flatten();
    CHECK((thrice - 3.0 * once).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("input gradients match finite differences") {
    Rng rng(9);
    Mlp net(3, {8, 8}, 1, HeadMode::Single, rng);
    MatrixXd x = random_matrix(rng, 2, 3);
    const MatrixXd target = MatrixXd::Zero(2, 1);
    net.forward(x);
    MatrixXd input_grad;
    net.backward(net.output() - target, nullptr, &input_grad);
    MatrixXd input_grad2;
    net.backward_input_only(net.output() - target, input_grad2);
    CHECK((input_grad - input_grad2).cwiseAbs().maxCoeff() < 1e-12);

    const double eps = 1e-6;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double orig = x(i, j);
            x(i, j) = orig + eps;
            const double hi = quadratic_loss(net, x, target, nullptr);
            x(i, j) = orig - eps;
            const double lo = quadratic_loss(net, x, target, nullptr);
            x(i, j) = orig;
            const double fd = (hi - lo) / (2.0 * eps);
            CHECK(input_grad(i, j) == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("parameter count matches sum over layers of (in+1)*out") {
    Rng rng(10);
    Mlp net(2, {64, 64}, 1, HeadMode::Single, rng);
    CHECK(net.parameter_count() == (2 + 1) * 64 + (64 + 1) * 64 + (64 + 1) * 1);
    Mlp dual(2, {64, 64}, 1, HeadMode::Dual, rng);
    CHECK(dual.parameter_count() == (2 + 1) * 64 + (64 + 1) * 64 + 2 * ((64 + 1) * 1));
}

TEST_CASE("initialization is deterministic in the seed") {
    Rng a(11), b(11);
    Mlp n1(4, {8}, 2, HeadMode::Dual, a);
    Mlp n2(4, {8}, 2, HeadMode::Dual, b);
    CHECK(n1.flat_parameters() == n2.flat_parameters());
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
    Rng rng(12);
    Mlp net(2, {4}, 1, HeadMode::Single, rng);
    AdamOptimizer opt(net, 1e-3);
    const VectorXd before = net.flat_parameters();
    MlpGradients zeros;
    for (int i = 0; i < net.num_tensors(); ++i) {
        zeros.weights.push_back(MatrixXd::Zero(net.weight(i).rows(), net.weight(i).cols()));
        zeros.biases.push_back(VectorXd::Zero(net.bias(i).size()));
    }
    for (int step = 0; step < 5; ++step) opt.step(net, zeros);
    CHECK(net.flat_parameters() == before);
}

TEST_CASE("first adam step moves by about the learning rate against the gradient") {
    Rng rng(13);
    Mlp net(2, {}, 1, HeadMode::Single, rng);
    AdamOptimizer opt(net, 1e-3);
    const VectorXd before = net.flat_parameters();
    MlpGradients grads;
    grads.weights.push_back(MatrixXd::Constant(1, 2, 0.37));
    grads.biases.push_back(VectorXd::Constant(1, -2.0));
    opt.step(net, grads);
    const VectorXd delta = net.flat_parameters() - before;
    // Bias-corrected first step: -lr * g / (|g| + eps) = -lr * sign(g).
    CHECK(delta(0) == doctest::Approx(-1e-3).epsilon(1e-4));
    CHECK(delta(1) == doctest::Approx(-1e-3).epsilon(1e-4));
    CHECK(delta(2) == doctest::Approx(1e-3).epsilon(1e-4));
}

TEST_CASE("constant gradients drive parameters monotonically downhill") {
    Rng rng(14);
    Mlp net(1, {}, 1, HeadMode::Single, rng);
    AdamOptimizer opt(net, 1e-2);
    MlpGradients grads;
    grads.weights.push_back(MatrixXd::Constant(1, 1, 1.0));
    grads.biases.push_back(VectorXd::Zero(1));
    const double w0 = net.weight(0)(0, 0);
    for (int i = 0; i < 50; ++i) opt.step(net, grads);
    CHECK(net.weight(0)(0, 0) < w0);
}

TEST_CASE("scalar adam mirrors the tensor update") {
    ScalarAdam s;
    s.learning_rate = 1e-3;
    const double delta = s.step(5.0);
    CHECK(delta == doctest::Approx(-1e-3).epsilon(1e-4));
    CHECK(s.step_count == 1);
}

TEST_CASE("save/load round-trips parameters and dims") {
    Rng rng(15);
    Mlp net(3, {5, 4}, 2, HeadMode::Dual, rng);
    std::stringstream ss;
    net.save(ss);
    Mlp loaded = Mlp::load(ss);
    CHECK(loaded.input_dim() == 3);
    CHECK(loaded.hidden_dims() == std::vector<int>{5, 4});
    CHECK(loaded.output_dim() == 2);
    CHECK(loaded.head_mode() == HeadMode::Dual);
    CHECK(loaded.flat_parameters() == net.flat_parameters());
}

TEST_CASE("soft update is the exact convex combination") {
    Rng rng(16);
    Mlp online(2, {4}, 1, HeadMode::Single, rng);
    Mlp target(2, {4}, 1, HeadMode::Single, rng);
    const VectorXd t0 = target.flat_parameters();
    const VectorXd o = online.flat_parameters();
    sasr::soft_update(target, online, 5e-3);
    const VectorXd expected = (1.0 - 5e-3) * t0 + 5e-3 * o;
    CHECK((target.flat_parameters() - expected).cwiseAbs().maxCoeff() < 1e-15);
}

}  // TEST_SUITE
