#include "sasr/shaping.hpp"

#include <cmath>
#include <stdexcept>

namespace sasr {

void ShapingConfig::validate() const {
    if (!(lambda_weight >= 0.0)) throw std::invalid_argument("ShapingConfig: lambda_weight must be >= 0");
    if (!(r_min <= r_max)) throw std::invalid_argument("ShapingConfig: r_min must be <= r_max");
    if (!(retention_rate > 0.0) || retention_rate > 1.0) {
        throw std::invalid_argument("ShapingConfig: retention_rate must be in (0, 1]");
    }
    if (!(bandwidth > 0.0)) throw std::invalid_argument("ShapingConfig: bandwidth must be positive");
    if (feature_dim < 1) throw std::invalid_argument("ShapingConfig: feature_dim must be >= 1");
}

BetaParams BetaParams::from_counts(const CountEstimate& counts) {
    return BetaParams{std::max(0.0, counts.n_success) + 1.0,
                      std::max(0.0, counts.n_failure) + 1.0};
}

double beta_sample(const BetaParams& params, Rng& rng) {
    if (!(params.alpha > 0.0) || !(params.beta > 0.0)) {
        throw std::invalid_argument("beta_sample: shape parameters must be positive");
    }
    const double g1 = rng.gamma(params.alpha);
    const double g2 = rng.gamma(params.beta);
    const double sum = g1 + g2;
    if (sum <= 0.0) return 0.5;  // both draws underflowed; tiny shapes only
    return g1 / sum;
}

double scale_to_range(double unit_value, double r_min, double r_max) {
    if (!(unit_value >= 0.0) || !(unit_value <= 1.0)) {
        throw std::invalid_argument("scale_to_range: value must be in [0, 1]");
    }
    return r_min + unit_value * (r_max - r_min);
}

double shaped_reward(const CountEstimate& counts, const ShapingConfig& cfg, Rng& rng) {
    double rate;
    if (cfg.sample_from_beta) {
        rate = beta_sample(BetaParams::from_counts(counts), rng);
    } else {
        const double ns = std::max(0.0, counts.n_success);
        const double nf = std::max(0.0, counts.n_failure);
        rate = (ns + nf > 0.0) ? ns / (ns + nf) : 0.5;
    }
    return scale_to_range(rate, cfg.r_min, cfg.r_max);
}

double compose_reward(double env_reward, double shaped, double lambda_weight) {
    return env_reward + lambda_weight * shaped;
}

}  // namespace sasr
