#include "sasr/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "sasr/serialize.hpp"

namespace sasr {

Eigen::VectorXd MlpGradients::flatten() const {
    Eigen::Index total = 0;
    for (const auto& w : weights) total += w.size();
    for (const auto& b : biases) total += b.size();
    Eigen::VectorXd flat(total);
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        flat.segment(at, weights[i].size()) =
            Eigen::Map<const Eigen::VectorXd>(weights[i].data(), weights[i].size());
        at += weights[i].size();
        flat.segment(at, biases[i].size()) = biases[i];
        at += biases[i].size();
    }
    return flat;
}

void MlpGradients::scale(double s) {
    for (auto& w : weights) w *= s;
    for (auto& b : biases) b *= s;
}

Mlp::Mlp(int input_dim, std::vector<int> hidden_dims, int output_dim, HeadMode head_mode,
         Rng& init_rng)
    : input_dim_(input_dim), hidden_dims_(std::move(hidden_dims)), output_dim_(output_dim),
      head_mode_(head_mode) {
    if (input_dim < 1 || output_dim < 1) {
        throw std::invalid_argument("Mlp: input and output dims must be >= 1");
    }
    for (int h : hidden_dims_) {
        if (h < 1) throw std::invalid_argument("Mlp: hidden dims must be >= 1");
    }
    allocate();
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(weights_[i].cols()));
        for (Eigen::Index c = 0; c < weights_[i].cols(); ++c) {
            for (Eigen::Index r = 0; r < weights_[i].rows(); ++r) {
                weights_[i](r, c) = init_rng.uniform(-bound, bound);
            }
        }
        for (Eigen::Index r = 0; r < biases_[i].size(); ++r) {
            biases_[i](r) = init_rng.uniform(-bound, bound);
        }
    }
}

void Mlp::allocate() {
    weights_.clear();
    biases_.clear();
    int prev = input_dim_;
    for (int h : hidden_dims_) {
        weights_.emplace_back(h, prev);
        biases_.emplace_back(h);
        prev = h;
    }
    const int heads = head_mode_ == HeadMode::Dual ? 2 : 1;
    for (int k = 0; k < heads; ++k) {
        weights_.emplace_back(output_dim_, prev);
        biases_.emplace_back(output_dim_);
    }
}

void Mlp::forward(const Eigen::Ref<const Eigen::MatrixXd>& input) {
    if (input.cols() != input_dim_) throw std::invalid_argument("Mlp::forward: input dim mismatch");
    input_ = input;
    acts_.resize(hidden_dims_.size());
    const Eigen::MatrixXd* cur = &input_;
    for (std::size_t l = 0; l < hidden_dims_.size(); ++l) {
        acts_[l].noalias() = (*cur) * weights_[l].transpose();
        acts_[l].rowwise() += biases_[l].transpose();
        acts_[l] = acts_[l].cwiseMax(0.0);
        cur = &acts_[l];
    }
    const std::size_t h0 = hidden_dims_.size();
    out0_.noalias() = (*cur) * weights_[h0].transpose();
    out0_.rowwise() += biases_[h0].transpose();
    if (head_mode_ == HeadMode::Dual) {
        out1_.noalias() = (*cur) * weights_[h0 + 1].transpose();
        out1_.rowwise() += biases_[h0 + 1].transpose();
    }
    cached_ = true;
}

const Eigen::MatrixXd& Mlp::output_second() const {
    if (head_mode_ != HeadMode::Dual) throw std::logic_error("Mlp: no second head");
    return out1_;
}

MlpGradients Mlp::backward(const Eigen::Ref<const Eigen::MatrixXd>& grad_out,
                           const Eigen::MatrixXd* grad_out_second,
                           Eigen::MatrixXd* input_grad) const {
    if (!cached_) throw std::logic_error("Mlp::backward: no cached forward pass");
    if (grad_out.rows() != input_.rows() || grad_out.cols() != output_dim_) {
        throw std::invalid_argument("Mlp::backward: upstream gradient shape mismatch");
    }
    if (head_mode_ == HeadMode::Dual && grad_out_second == nullptr) {
        throw std::invalid_argument("Mlp::backward: dual-head net needs both upstream gradients");
    }

    MlpGradients grads;
    grads.weights.resize(weights_.size());
    grads.biases.resize(biases_.size());

    const std::size_t nh = hidden_dims_.size();
    const Eigen::MatrixXd& last_act = nh > 0 ? acts_[nh - 1] : input_;

    grads.weights[nh].noalias() = grad_out.transpose() * last_act;
    grads.biases[nh] = grad_out.colwise().sum().transpose();
    Eigen::MatrixXd g = grad_out * weights_[nh];
    if (head_mode_ == HeadMode::Dual) {
        grads.weights[nh + 1].noalias() = grad_out_second->transpose() * last_act;
        grads.biases[nh + 1] = grad_out_second->colwise().sum().transpose();
        g.noalias() += (*grad_out_second) * weights_[nh + 1];
    }

    for (std::size_t l = nh; l-- > 0;) {
        g.array() *= (acts_[l].array() > 0.0).cast<double>();
        const Eigen::MatrixXd& below = l > 0 ? acts_[l - 1] : input_;
        grads.weights[l].noalias() = g.transpose() * below;
        grads.biases[l] = g.colwise().sum().transpose();
        if (l > 0 || input_grad != nullptr) g = g * weights_[l];
    }
    if (input_grad != nullptr) *input_grad = std::move(g);
    return grads;
}

void Mlp::backward_input_only(const Eigen::Ref<const Eigen::MatrixXd>& grad_out,
                              Eigen::MatrixXd& input_grad) const {
    if (!cached_) throw std::logic_error("Mlp::backward_input_only: no cached forward pass");
    if (head_mode_ == HeadMode::Dual) {
        throw std::logic_error("Mlp::backward_input_only: single-head only");
    }
    const std::size_t nh = hidden_dims_.size();
    Eigen::MatrixXd g = grad_out * weights_[nh];
    for (std::size_t l = nh; l-- > 0;) {
        g.array() *= (acts_[l].array() > 0.0).cast<double>();
        g = g * weights_[l];
    }
    input_grad = std::move(g);
}

int64_t Mlp::parameter_count() const {
    int64_t total = 0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        total += weights_[i].size() + biases_[i].size();
    }
    return total;
}

Eigen::VectorXd Mlp::flat_parameters() const {
    Eigen::VectorXd flat(parameter_count());
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        flat.segment(at, weights_[i].size()) =
            Eigen::Map<const Eigen::VectorXd>(weights_[i].data(), weights_[i].size());
        at += weights_[i].size();
        flat.segment(at, biases_[i].size()) = biases_[i];
        at += biases_[i].size();
    }
    return flat;
}

void Mlp::set_flat_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat) {
    if (flat.size() != parameter_count()) {
        throw std::invalid_argument("Mlp::set_flat_parameters: size mismatch");
    }
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        Eigen::Map<Eigen::VectorXd>(weights_[i].data(), weights_[i].size()) =
            flat.segment(at, weights_[i].size());
        at += weights_[i].size();
        biases_[i] = flat.segment(at, biases_[i].size());
        at += biases_[i].size();
    }
    cached_ = false;
}

void Mlp::save(std::ostream& os) const {
    io::write_u64(os, static_cast<uint64_t>(head_mode_));
    io::write_u64(os, static_cast<uint64_t>(hidden_dims_.size()) + 2);
    io::write_u64(os, static_cast<uint64_t>(input_dim_));
    for (int h : hidden_dims_) io::write_u64(os, static_cast<uint64_t>(h));
    io::write_u64(os, static_cast<uint64_t>(output_dim_));
    const Eigen::VectorXd flat = flat_parameters();
    io::write_f64_array(os, flat.data(), static_cast<std::size_t>(flat.size()));
}

Mlp Mlp::load(std::istream& is) {
    Mlp net;
    net.head_mode_ = static_cast<HeadMode>(io::read_u64(is));
    const uint64_t ndims = io::read_u64(is);
    if (ndims < 2) throw std::runtime_error("Mlp::load: malformed dims header");
    net.input_dim_ = static_cast<int>(io::read_u64(is));
    for (uint64_t i = 0; i + 2 < ndims; ++i) {
        net.hidden_dims_.push_back(static_cast<int>(io::read_u64(is)));
    }
    net.output_dim_ = static_cast<int>(io::read_u64(is));
    net.allocate();
    Eigen::VectorXd flat(net.parameter_count());
    io::read_f64_array(is, flat.data(), static_cast<std::size_t>(flat.size()));
    net.set_flat_parameters(flat);
    return net;
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
    if (target.num_tensors() != online.num_tensors()) {
        throw std::invalid_argument("soft_update: network structure mismatch");
    }
    for (int i = 0; i < target.num_tensors(); ++i) {
        target.weight(i) = (1.0 - tau) * target.weight(i) + tau * online.weight(i);
        target.bias(i) = (1.0 - tau) * target.bias(i) + tau * online.bias(i);
    }
}

AdamOptimizer::AdamOptimizer(const Mlp& net, double learning_rate)
    : learning_rate_(learning_rate) {
    for (int i = 0; i < net.num_tensors(); ++i) {
        m_w_.push_back(Eigen::MatrixXd::Zero(net.weight(i).rows(), net.weight(i).cols()));
        v_w_.push_back(Eigen::MatrixXd::Zero(net.weight(i).rows(), net.weight(i).cols()));
        m_b_.push_back(Eigen::VectorXd::Zero(net.bias(i).size()));
        v_b_.push_back(Eigen::VectorXd::Zero(net.bias(i).size()));
    }
}

void AdamOptimizer::step(Mlp& net, const MlpGradients& grads) {
    if (grads.weights.size() != m_w_.size()) {
        throw std::invalid_argument("AdamOptimizer::step: gradient tensor count mismatch");
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(kBeta1, step_count_);
    const double bc2 = 1.0 - std::pow(kBeta2, step_count_);
    for (std::size_t i = 0; i < m_w_.size(); ++i) {
        const auto& gw = grads.weights[i];
        const auto& gb = grads.biases[i];
        if (gw.rows() != m_w_[i].rows() || gw.cols() != m_w_[i].cols()) {
            throw std::invalid_argument("AdamOptimizer::step: gradient shape mismatch");
        }
        m_w_[i] = kBeta1 * m_w_[i] + (1.0 - kBeta1) * gw;
        v_w_[i] = kBeta2 * v_w_[i].array() + (1.0 - kBeta2) * gw.array().square();
        m_b_[i] = kBeta1 * m_b_[i] + (1.0 - kBeta1) * gb;
        v_b_[i] = kBeta2 * v_b_[i].array() + (1.0 - kBeta2) * gb.array().square();
        net.weight(static_cast<int>(i)).array() -=
            learning_rate_ * (m_w_[i].array() / bc1) / ((v_w_[i].array() / bc2).sqrt() + kEpsilon);
        net.bias(static_cast<int>(i)).array() -=
            learning_rate_ * (m_b_[i].array() / bc1) / ((v_b_[i].array() / bc2).sqrt() + kEpsilon);
    }
}

void AdamOptimizer::save(std::ostream& os) const {
    io::write_f64(os, learning_rate_);
    io::write_u64(os, static_cast<uint64_t>(step_count_));
    io::write_u64(os, m_w_.size());
    for (std::size_t i = 0; i < m_w_.size(); ++i) {
        io::write_matrix(os, m_w_[i]);
        io::write_matrix(os, v_w_[i]);
        io::write_vector(os, m_b_[i]);
        io::write_vector(os, v_b_[i]);
    }
}

void AdamOptimizer::load(std::istream& is) {
    learning_rate_ = io::read_f64(is);
    step_count_ = static_cast<int64_t>(io::read_u64(is));
    const uint64_t n = io::read_u64(is);
    if (n != m_w_.size()) throw std::runtime_error("AdamOptimizer::load: tensor count mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        m_w_[i] = io::read_matrix(is);
        v_w_[i] = io::read_matrix(is);
        m_b_[i] = io::read_vector(is);
        v_b_[i] = io::read_vector(is);
    }
}

void ScalarAdam::save(std::ostream& os) const {
    io::write_f64(os, learning_rate);
    io::write_f64(os, m);
    io::write_f64(os, v);
    io::write_u64(os, static_cast<uint64_t>(step_count));
}

void ScalarAdam::load(std::istream& is) {
    learning_rate = io::read_f64(is);
    m = io::read_f64(is);
    v = io::read_f64(is);
    step_count = static_cast<int64_t>(io::read_u64(is));
}

}  // namespace sasr
