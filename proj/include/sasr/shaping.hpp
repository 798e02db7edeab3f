#pragma once

#include "sasr/density.hpp"
#include "sasr/rff.hpp"
#include "sasr/rng.hpp"

namespace sasr {

/// All knobs of the success-rate shaping mechanism.
struct ShapingConfig {
    double lambda_weight = 0.6;      // weight of the shaped reward in the composed reward
    double r_min = 0.0;              // output range of the scaling map
    double r_max = 1.0;
    double retention_rate = 0.1;     // store subsampling probability
    double bandwidth = 0.2;          // Gaussian kernel bandwidth
    int feature_dim = 1000;          // random feature dimension
    KernelKind kernel = KernelKind::Gaussian;
    bool sample_from_beta = true;    // false: use the deterministic success ratio
    bool state_action_features = false;  // density over [state; action] instead of state

    void validate() const;
};

/// Beta shape parameters derived from (clamped) success/failure counts.
struct BetaParams {
    double alpha = 1.0;  // n_success + 1
    double beta = 1.0;   // n_failure + 1

    static BetaParams from_counts(const CountEstimate& counts);
    double mean() const { return alpha / (alpha + beta); }
    double variance() const {
        const double s = alpha + beta;
        return alpha * beta / (s * s * (s + 1.0));
    }
};

/// Draw from Beta(alpha, beta) with real-valued shapes, via two Gamma draws
/// combined as g1 / (g1 + g2).
double beta_sample(const BetaParams& params, Rng& rng);

/// Linear map of a unit-interval value onto [r_min, r_max].
double scale_to_range(double unit_value, double r_min, double r_max);

/// Shaped reward for one state given its count estimates: a Beta-sampled
/// success rate (or the deterministic ratio when sampling is off), scaled to
/// [r_min, r_max]. The 0/0 ratio in the deterministic variant is 0.5.
double shaped_reward(const CountEstimate& counts, const ShapingConfig& cfg, Rng& rng);

/// env_reward + lambda * shaped.
double compose_reward(double env_reward, double shaped, double lambda_weight);

}  // namespace sasr
