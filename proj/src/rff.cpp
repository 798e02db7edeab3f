#include "sasr/rff.hpp"

#include <cmath>
#include <stdexcept>

#include "sasr/mathutil.hpp"
#include "sasr/serialize.hpp"

namespace sasr {

KernelKind kernel_from_string(const std::string& name) {
    if (name == "gaussian") return KernelKind::Gaussian;
    if (name == "laplacian") return KernelKind::Laplacian;
    if (name == "cauchy") return KernelKind::Cauchy;
    throw std::invalid_argument("unknown kernel: " + name);
}

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::Gaussian: return "gaussian";
        case KernelKind::Laplacian: return "laplacian";
        case KernelKind::Cauchy: return "cauchy";
    }
    return "gaussian";
}

RffProjector::RffProjector(int state_dim, int feature_dim, double bandwidth, KernelKind kernel,
                           uint64_t seed)
    : bandwidth_(bandwidth), kernel_(kernel), seed_(seed) {
    if (state_dim < 1) throw std::invalid_argument("RffProjector: state_dim must be >= 1");
    if (feature_dim < 1) throw std::invalid_argument("RffProjector: feature_dim must be >= 1");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw std::invalid_argument("RffProjector: bandwidth must be positive");
    }

    Rng rng = Rng::stream(seed, RngStream::Projector);
    weights_.resize(state_dim, feature_dim);
    for (int m = 0; m < feature_dim; ++m) {
        for (int d = 0; d < state_dim; ++d) {
            switch (kernel) {
                case KernelKind::Gaussian: weights_(d, m) = rng.normal(0.0, 1.0 / bandwidth); break;
                case KernelKind::Laplacian: weights_(d, m) = rng.cauchy(); break;
                case KernelKind::Cauchy: weights_(d, m) = rng.laplace(); break;
            }
        }
    }
    offsets_.resize(feature_dim);
    for (int m = 0; m < feature_dim; ++m) {
        offsets_(m) = rng.uniform(0.0, 2.0 * M_PI);
    }
}

RffProjector::RffProjector(Eigen::MatrixXd weights, Eigen::VectorXd offsets, double bandwidth,
                           KernelKind kernel, uint64_t seed)
    : weights_(std::move(weights)), offsets_(std::move(offsets)), bandwidth_(bandwidth),
      kernel_(kernel), seed_(seed) {
    if (weights_.rows() < 1 || weights_.cols() < 1) {
        throw std::invalid_argument("RffProjector: empty weight matrix");
    }
    if (offsets_.size() != weights_.cols()) {
        throw std::invalid_argument("RffProjector: offsets length must equal feature_dim");
    }
    if (!(bandwidth > 0.0)) throw std::invalid_argument("RffProjector: bandwidth must be positive");
}

Eigen::VectorXd RffProjector::project(const Eigen::Ref<const Eigen::VectorXd>& state) const {
    if (state.size() != weights_.rows()) {
        throw std::invalid_argument("RffProjector::project: state dimension mismatch");
    }
    if (!state.allFinite()) {
        throw std::invalid_argument("RffProjector::project: non-finite state");
    }
    Eigen::VectorXd theta = weights_.transpose() * state + offsets_;
    Eigen::VectorXd out(theta.size());
    cos_array(theta.data(), out.data(), static_cast<std::size_t>(theta.size()));
    out *= std::sqrt(2.0 / static_cast<double>(feature_dim()));
    return out;
}

Eigen::MatrixXd RffProjector::project_rows(const Eigen::Ref<const Eigen::MatrixXd>& states) const {
    if (states.cols() != weights_.rows()) {
        throw std::invalid_argument("RffProjector::project_rows: state dimension mismatch");
    }
    if (!states.allFinite()) {
        throw std::invalid_argument("RffProjector::project_rows: non-finite state");
    }
    Eigen::MatrixXd theta = states * weights_;
    theta.rowwise() += offsets_.transpose();
    cos_array(theta.data(), theta.data(), static_cast<std::size_t>(theta.size()));
    theta *= std::sqrt(2.0 / static_cast<double>(feature_dim()));
    return theta;
}

RffProjector RffProjector::with_bandwidth(double new_bandwidth) const {
    if (kernel_ != KernelKind::Gaussian) {
        throw std::logic_error("RffProjector::with_bandwidth: only the Gaussian kernel is scaled by bandwidth");
    }
    if (!(new_bandwidth > 0.0)) {
        throw std::invalid_argument("RffProjector::with_bandwidth: bandwidth must be positive");
    }
    // Entries ~ Normal(0, 1/h^2); rescaling by h_old/h_new retargets them.
    return RffProjector(weights_ * (bandwidth_ / new_bandwidth), offsets_, new_bandwidth, kernel_,
                        seed_);
}

void RffProjector::save(std::ostream& os) const {
    io::write_u64(os, 0x5246465052ULL);  // "RFFPR"
    io::write_u64(os, static_cast<uint64_t>(kernel_));
    io::write_u64(os, seed_);
    io::write_f64(os, bandwidth_);
    io::write_matrix(os, weights_);
    io::write_vector(os, offsets_);
}

RffProjector RffProjector::load(std::istream& is) {
    io::expect_magic(is, 0x5246465052ULL, "RffProjector");
    const auto kernel = static_cast<KernelKind>(io::read_u64(is));
    const uint64_t seed = io::read_u64(is);
    const double bandwidth = io::read_f64(is);
    Eigen::MatrixXd weights = io::read_matrix(is);
    Eigen::VectorXd offsets = io::read_vector(is);
    return RffProjector(std::move(weights), std::move(offsets), bandwidth, kernel, seed);
}

double exact_kernel(const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b, double bandwidth,
                    KernelKind kernel) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("exact_kernel: dimension mismatch");
    }
    if (!(bandwidth > 0.0)) throw std::invalid_argument("exact_kernel: bandwidth must be positive");
    switch (kernel) {
        case KernelKind::Gaussian:
            return std::exp(-(a - b).squaredNorm() / (2.0 * bandwidth * bandwidth));
        case KernelKind::Laplacian:
            return std::exp(-(a - b).lpNorm<1>());
        case KernelKind::Cauchy: {
            double prod = 1.0;
            for (Eigen::Index d = 0; d < a.size(); ++d) {
                const double diff = a(d) - b(d);
                prod *= 2.0 / (M_PI * (1.0 + diff * diff));
            }
            return prod;
        }
    }
    return 0.0;
}

double frobenius_error(const RffProjector& projector, const std::vector<Eigen::VectorXd>& states) {
    if (states.size() < 2) {
        throw std::invalid_argument("frobenius_error: need at least 2 states");
    }
    const auto n = static_cast<Eigen::Index>(states.size());
    Eigen::MatrixXd stacked(n, projector.state_dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        if (states[static_cast<std::size_t>(i)].size() != projector.state_dim()) {
            throw std::invalid_argument("frobenius_error: state dimension mismatch");
        }
        stacked.row(i) = states[static_cast<std::size_t>(i)].transpose();
    }
    const Eigen::MatrixXd z = projector.project_rows(stacked);
    Eigen::MatrixXd approx = z * z.transpose();
    Eigen::MatrixXd exact(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            exact(i, j) = exact_kernel(states[static_cast<std::size_t>(i)],
                                       states[static_cast<std::size_t>(j)],
                                       projector.bandwidth(), projector.kernel());
        }
    }
    return (approx - exact).norm();
}

}  // namespace sasr
