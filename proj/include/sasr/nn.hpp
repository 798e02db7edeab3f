#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "sasr/rng.hpp"

namespace sasr {

/// Single: one linear output head (value networks).
/// Dual: two linear heads on the last hidden layer (policy mean / log-std).
enum class HeadMode : uint8_t { Single = 0, Dual = 1 };

/// Per-tensor gradients in the same order as Mlp::weight()/bias() indices.
struct MlpGradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    Eigen::VectorXd flatten() const;
    void scale(double s);
};

/// Dense ReLU network with manual backpropagation. Batched: inputs and
/// outputs carry one sample per row. forward() caches activations; backward()
/// consumes the cache of the most recent forward().
class Mlp {
public:
    Mlp(int input_dim, std::vector<int> hidden_dims, int output_dim, HeadMode head_mode,
        Rng& init_rng);

    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    HeadMode head_mode() const { return head_mode_; }
    const std::vector<int>& hidden_dims() const { return hidden_dims_; }

    void forward(const Eigen::Ref<const Eigen::MatrixXd>& input);
    const Eigen::MatrixXd& output() const { return out0_; }
    const Eigen::MatrixXd& output_second() const;

    /// Gradients of a scalar loss given d(loss)/d(output) per head.
    /// When input_grad is non-null it also receives d(loss)/d(input).
    MlpGradients backward(const Eigen::Ref<const Eigen::MatrixXd>& grad_out,
                          const Eigen::MatrixXd* grad_out_second = nullptr,
                          Eigen::MatrixXd* input_grad = nullptr) const;

    /// Input gradient only; skips parameter gradients (frozen-network paths).
    void backward_input_only(const Eigen::Ref<const Eigen::MatrixXd>& grad_out,
                             Eigen::MatrixXd& input_grad) const;

    // Parameter tensors: trunk layers in order, then head(s).
    int num_tensors() const { return static_cast<int>(weights_.size()); }
    Eigen::MatrixXd& weight(int i) { return weights_[static_cast<std::size_t>(i)]; }
    Eigen::VectorXd& bias(int i) { return biases_[static_cast<std::size_t>(i)]; }
    const Eigen::MatrixXd& weight(int i) const { return weights_[static_cast<std::size_t>(i)]; }
    const Eigen::VectorXd& bias(int i) const { return biases_[static_cast<std::size_t>(i)]; }

    int64_t parameter_count() const;
    Eigen::VectorXd flat_parameters() const;
    void set_flat_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat);

    /// Flat little-endian 64-bit floats with a dims header.
    void save(std::ostream& os) const;
    static Mlp load(std::istream& is);

private:
    Mlp() = default;
    void allocate();

    int input_dim_ = 0;
    std::vector<int> hidden_dims_;
    int output_dim_ = 0;
    HeadMode head_mode_ = HeadMode::Single;

    std::vector<Eigen::MatrixXd> weights_;  // tensor i: (out_i x in_i)
    std::vector<Eigen::VectorXd> biases_;

    // forward cache
    bool cached_ = false;
    Eigen::MatrixXd input_;
    std::vector<Eigen::MatrixXd> acts_;  // post-ReLU hidden activations
    Eigen::MatrixXd out0_, out1_;
};

/// target <- (1 - tau) * target + tau * online, per parameter.
void soft_update(Mlp& target, const Mlp& online, double tau);

/// Adam with bias correction over one Mlp's parameters.
class AdamOptimizer {
public:
    AdamOptimizer(const Mlp& net, double learning_rate);

    void step(Mlp& net, const MlpGradients& grads);
    int64_t step_count() const { return step_count_; }
    double learning_rate() const { return learning_rate_; }

    void save(std::ostream& os) const;
    void load(std::istream& is);

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

private:
    double learning_rate_;
    int64_t step_count_ = 0;
    std::vector<Eigen::MatrixXd> m_w_, v_w_;
    std::vector<Eigen::VectorXd> m_b_, v_b_;
};

/// Adam on a single scalar (the log entropy temperature).
struct ScalarAdam {
    double learning_rate = 1e-4;
    double m = 0.0;
    double v = 0.0;
    int64_t step_count = 0;

    /// Returns the delta applied to the parameter for gradient `grad`.
    double step(double grad) {
        ++step_count;
        m = AdamOptimizer::kBeta1 * m + (1.0 - AdamOptimizer::kBeta1) * grad;
        v = AdamOptimizer::kBeta2 * v + (1.0 - AdamOptimizer::kBeta2) * grad * grad;
        const double mhat = m / (1.0 - std::pow(AdamOptimizer::kBeta1, step_count));
        const double vhat = v / (1.0 - std::pow(AdamOptimizer::kBeta2, step_count));
        return -learning_rate * mhat / (std::sqrt(vhat) + AdamOptimizer::kEpsilon);
    }

    void save(std::ostream& os) const;
    void load(std::istream& is);
};

}  // namespace sasr
