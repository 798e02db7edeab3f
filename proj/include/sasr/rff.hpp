#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "sasr/rng.hpp"

namespace sasr {

/// Shift-invariant kernel families with known spectral distributions.
enum class KernelKind { Gaussian, Laplacian, Cauchy };

KernelKind kernel_from_string(const std::string& name);
std::string to_string(KernelKind kind);

/// Frozen random cosine projection z(s) = sqrt(2/M) * cos(W^T s + b) whose
/// inner products approximate a shift-invariant kernel. Weight columns are
/// drawn from the kernel's spectral distribution:
///   Gaussian(bandwidth h): entries ~ Normal(0, 1/h^2)
///   Laplacian:             entries ~ standard Cauchy
///   Cauchy:                entries ~ Laplace(0, 1)
/// Immutable after construction; safe for concurrent read-only use.
class RffProjector {
public:
    RffProjector(int state_dim, int feature_dim, double bandwidth, KernelKind kernel,
                 uint64_t seed);

    /// Direct injection of weights/offsets (tests, deserialization).
    RffProjector(Eigen::MatrixXd weights, Eigen::VectorXd offsets, double bandwidth,
                 KernelKind kernel, uint64_t seed = 0);

    int state_dim() const { return static_cast<int>(weights_.rows()); }
    int feature_dim() const { return static_cast<int>(weights_.cols()); }
    double bandwidth() const { return bandwidth_; }
    KernelKind kernel() const { return kernel_; }
    uint64_t seed() const { return seed_; }

    /// weights: state_dim x feature_dim.
    const Eigen::MatrixXd& weights() const { return weights_; }
    /// offsets: feature_dim entries, each in [0, 2*pi).
    const Eigen::VectorXd& offsets() const { return offsets_; }

    Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& state) const;

    /// Projects one state per row; returns rows of features.
    Eigen::MatrixXd project_rows(const Eigen::Ref<const Eigen::MatrixXd>& states) const;

    /// Same spectral draw rescaled to a new bandwidth (Gaussian only) --
    /// used by decreasing-bandwidth schedules without redrawing features.
    RffProjector with_bandwidth(double new_bandwidth) const;

    void save(std::ostream& os) const;
    static RffProjector load(std::istream& is);

private:
    Eigen::MatrixXd weights_;
    Eigen::VectorXd offsets_;
    double bandwidth_;
    KernelKind kernel_;
    uint64_t seed_;
};

/// Closed-form kernel value; the oracle the projection is tested against.
///   Gaussian:  exp(-|a-b|^2 / (2 h^2))
///   Laplacian: exp(-|a-b|_1)
///   Cauchy:    prod_d 2 / (pi (1 + (a_d-b_d)^2))
double exact_kernel(const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b, double bandwidth,
                    KernelKind kernel);

/// Frobenius norm of (K_approx - K_exact) over all pairs of the given states.
/// Diagnostic for choosing the feature dimension.
double frobenius_error(const RffProjector& projector, const std::vector<Eigen::VectorXd>& states);

}  // namespace sasr
