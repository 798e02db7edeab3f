#include "sasr/density.hpp"

#include <cmath>
#include <stdexcept>

#include "sasr/serialize.hpp"

namespace sasr {

LabeledStateStore::LabeledStateStore(StoreLabel label, double retention_rate, int feature_dim,
                                     bool keep_raw_states)
    : label_(label), retention_(retention_rate), feature_dim_(feature_dim),
      keep_raw_(keep_raw_states) {
    if (!(retention_rate > 0.0) || retention_rate > 1.0) {
        throw std::invalid_argument("LabeledStateStore: retention_rate must be in (0, 1]");
    }
    if (feature_dim < 1) throw std::invalid_argument("LabeledStateStore: feature_dim must be >= 1");
    feature_sum_ = Eigen::VectorXd::Zero(feature_dim);
}

void LabeledStateStore::record_states(const std::vector<Eigen::VectorXd>& states,
                                      const RffProjector& projector, Rng& rng) {
    if (projector.feature_dim() != feature_dim_) {
        throw std::invalid_argument("record_states: projector feature_dim mismatch");
    }
    observed_ += states.size();
    if (states.empty()) return;

    std::vector<const Eigen::VectorXd*> kept;
    kept.reserve(states.size());
    for (const auto& s : states) {
        if (s.size() != projector.state_dim()) {
            throw std::invalid_argument("record_states: state dimension mismatch");
        }
        if (retention_ >= 1.0 || rng.uniform() < retention_) kept.push_back(&s);
    }
    if (kept.empty()) return;

    Eigen::MatrixXd stacked(static_cast<Eigen::Index>(kept.size()), projector.state_dim());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        stacked.row(static_cast<Eigen::Index>(i)) = kept[i]->transpose();
    }
    const Eigen::MatrixXd projected = projector.project_rows(stacked);
    for (Eigen::Index i = 0; i < projected.rows(); ++i) {
        features_.emplace_back(projected.row(i).transpose());
        feature_sum_ += features_.back();
        if (keep_raw_) raws_.push_back(*kept[static_cast<std::size_t>(i)]);
    }
}

double LabeledStateStore::estimate_count(const Eigen::Ref<const Eigen::VectorXd>& feature) const {
    if (feature.size() != feature_dim_) {
        throw std::invalid_argument("estimate_count: feature dimension mismatch");
    }
    if (!feature.allFinite()) throw std::invalid_argument("estimate_count: non-finite feature");
    if (features_.empty()) return 0.0;
    const double scale = static_cast<double>(observed_) / static_cast<double>(features_.size());
    return std::max(0.0, scale * feature.dot(feature_sum_));
}

Eigen::VectorXd LabeledStateStore::estimate_counts_rows(
    const Eigen::Ref<const Eigen::MatrixXd>& features) const {
    if (features.cols() != feature_dim_) {
        throw std::invalid_argument("estimate_counts_rows: feature dimension mismatch");
    }
    if (!features.allFinite()) {
        throw std::invalid_argument("estimate_counts_rows: non-finite features");
    }
    if (features_.empty()) return Eigen::VectorXd::Zero(features.rows());
    const double scale = static_cast<double>(observed_) / static_cast<double>(features_.size());
    return (scale * (features * feature_sum_)).cwiseMax(0.0);
}

double LabeledStateStore::estimate_count_per_pair(
    const Eigen::Ref<const Eigen::VectorXd>& feature) const {
    if (feature.size() != feature_dim_) {
        throw std::invalid_argument("estimate_count_per_pair: feature dimension mismatch");
    }
    if (!feature.allFinite()) {
        throw std::invalid_argument("estimate_count_per_pair: non-finite feature");
    }
    if (features_.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& f : features_) sum += feature.dot(f);
    const double scale = static_cast<double>(observed_) / static_cast<double>(features_.size());
    return std::max(0.0, scale * sum);
}

void LabeledStateStore::reproject(const RffProjector& projector) {
    if (!keep_raw_) {
        throw std::logic_error("reproject: store was built without raw states");
    }
    if (projector.feature_dim() != feature_dim_) {
        throw std::invalid_argument("reproject: projector feature_dim mismatch");
    }
    feature_sum_.setZero();
    for (std::size_t i = 0; i < raws_.size(); ++i) {
        features_[i] = projector.project(raws_[i]);
        feature_sum_ += features_[i];
    }
}

void LabeledStateStore::attach_raw_states(std::vector<Eigen::VectorXd> raws) {
    if (raws.size() != features_.size()) {
        throw std::invalid_argument("attach_raw_states: one raw state per retained feature");
    }
    raws_ = std::move(raws);
    keep_raw_ = true;
}

void LabeledStateStore::save(std::ostream& os) const {
    io::write_u64(os, static_cast<uint64_t>(label_));
    io::write_u64(os, static_cast<uint64_t>(feature_dim_));
    io::write_f64(os, retention_);
    io::write_u64(os, observed_);
    io::write_u64(os, features_.size());
    io::write_f64_array(os, feature_sum_.data(), static_cast<std::size_t>(feature_sum_.size()));
    for (const auto& f : features_) {
        io::write_f64_array(os, f.data(), static_cast<std::size_t>(f.size()));
    }
}

LabeledStateStore LabeledStateStore::load(std::istream& is) {
    const auto label = static_cast<StoreLabel>(io::read_u64(is));
    const auto feature_dim = static_cast<int>(io::read_u64(is));
    const double retention = io::read_f64(is);
    const uint64_t observed = io::read_u64(is);
    const uint64_t retained = io::read_u64(is);
    LabeledStateStore store(label, retention, feature_dim);
    store.observed_ = observed;
    io::read_f64_array(is, store.feature_sum_.data(), static_cast<std::size_t>(feature_dim));
    store.features_.resize(retained);
    for (auto& f : store.features_) {
        f.resize(feature_dim);
        io::read_f64_array(is, f.data(), static_cast<std::size_t>(feature_dim));
    }
    return store;
}

double brute_force_count(const std::vector<Eigen::VectorXd>& raw_states,
                         const Eigen::Ref<const Eigen::VectorXd>& query, uint64_t observed_count,
                         double bandwidth, KernelKind kernel) {
    if (raw_states.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : raw_states) sum += exact_kernel(query, s, bandwidth, kernel);
    return static_cast<double>(observed_count) / static_cast<double>(raw_states.size()) * sum;
}

double bandwidth_silverman(double sample_std, uint64_t n) {
    if (!(sample_std > 0.0)) {
        throw std::invalid_argument("bandwidth_silverman: sample_std must be positive");
    }
    if (n < 1) throw std::invalid_argument("bandwidth_silverman: n must be >= 1");
    return 1.06 * sample_std * std::pow(static_cast<double>(n), -0.2);
}

}  // namespace sasr
