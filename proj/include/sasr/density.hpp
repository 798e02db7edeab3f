#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "sasr/rff.hpp"
#include "sasr/rng.hpp"

namespace sasr {

enum class StoreLabel : uint8_t { Success = 0, Failure = 1 };

/// Count estimates for one query state against the two stores, clamped at 0
/// (a cosine-feature inner product can come out slightly negative).
struct CountEstimate {
    double n_success = 0.0;
    double n_failure = 0.0;
};

/// Retained, projected states for one outcome label. Each offered state is
/// kept with probability `retention_rate`; kept states are stored as feature
/// vectors and folded into a running feature sum, so a count query is a
/// single inner product regardless of how many states are retained.
///
/// Single-writer; concurrent read-only queries are safe between writes.
class LabeledStateStore {
public:
    LabeledStateStore(StoreLabel label, double retention_rate, int feature_dim,
                      bool keep_raw_states = false);

    /// Offers states for retention; retained states are projected and
    /// appended. Increases observed_count by states.size().
    void record_states(const std::vector<Eigen::VectorXd>& states, const RffProjector& projector,
                       Rng& rng);

    /// Estimated occurrence count of the state behind `feature`:
    /// max(0, (observed/retained) * feature . feature_sum); 0 when empty.
    double estimate_count(const Eigen::Ref<const Eigen::VectorXd>& feature) const;

    /// estimate_count for one feature per row, as a single product against
    /// the feature sum.
    Eigen::VectorXd estimate_counts_rows(const Eigen::Ref<const Eigen::MatrixXd>& features) const;

    /// Same value via an explicit per-pair sum over retained features.
    /// Kept for validation and for the complexity benchmark; O(M * retained).
    double estimate_count_per_pair(const Eigen::Ref<const Eigen::VectorXd>& feature) const;

    StoreLabel label() const { return label_; }
    double retention_rate() const { return retention_; }
    int feature_dim() const { return feature_dim_; }
    uint64_t observed_count() const { return observed_; }
    std::size_t retained_count() const { return features_.size(); }
    const Eigen::VectorXd& feature_sum() const { return feature_sum_; }
    const std::vector<Eigen::VectorXd>& retained_features() const { return features_; }
    bool keeps_raw_states() const { return keep_raw_; }
    const std::vector<Eigen::VectorXd>& raw_states() const { return raws_; }

    /// Re-projects all retained raw states under a new projector (bandwidth
    /// schedules). Requires keep_raw_states.
    void reproject(const RffProjector& projector);

    /// Reattaches raw states to a deserialized store (one per retained
    /// feature, in order) and enables keep_raw_states.
    void attach_raw_states(std::vector<Eigen::VectorXd> raws);

    /// Snapshot: header (label, feature_dim, retention rate, counts) then
    /// feature_sum and the retained features as little-endian 64-bit floats.
    void save(std::ostream& os) const;
    static LabeledStateStore load(std::istream& is);

private:
    StoreLabel label_;
    double retention_;
    int feature_dim_;
    bool keep_raw_;
    std::vector<Eigen::VectorXd> features_;
    std::vector<Eigen::VectorXd> raws_;
    Eigen::VectorXd feature_sum_;
    uint64_t observed_ = 0;
};

/// Exact-kernel count oracle: (observed/|states|) * sum_j K(query, s_j).
/// No projection involved; test and analysis use only.
double brute_force_count(const std::vector<Eigen::VectorXd>& raw_states,
                         const Eigen::Ref<const Eigen::VectorXd>& query, uint64_t observed_count,
                         double bandwidth, KernelKind kernel);

/// Silverman's rule of thumb: 1.06 * sigma * n^(-1/5).
double bandwidth_silverman(double sample_std, uint64_t n);

}  // namespace sasr
