#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sdf4d/common.hpp"
#include "sdf4d/geometry.hpp"
#include "sdf4d/loss.hpp"
#include "sdf4d/mlp.hpp"

namespace sdf4d {

struct TrainingConfig {
    int epochs = 25000;
    double learning_rate = 1e-4;
    LossWeights weights;  // all 0.1
    /// Per-scan on-surface subset size; nullopt uses every cloud point.
    std::optional<int> on_surface_batch;
    /// Off-surface sample count per on-surface point, applied to both the
    /// scan-time and the regularization-time sets.
    double off_surface_per_on_surface = 1.0;
    /// Distinct regularization times drawn per step.
    int n_reg_times_per_step = 4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step_count = 0;

    explicit AdamState(long n) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// Draw one optimization step's samples from a normalized sequence: the
/// on-surface points of every scan (or a uniform subset per scan), uniform
/// spatial samples cycled through the scan times, and uniform spatial samples
/// at n_reg_times_per_step fresh uniform times.
LossBatch sample_batch(const NormalizedSequence& seq, const TrainingConfig& config, Rng& rng);

/// One Adam update with bias correction, in place.
void adam_step(Eigen::VectorXd& params_flat, const Eigen::VectorXd& grad_flat, AdamState& state,
               const TrainingConfig& config);

/// The trained representation: network plus the normalization that maps the
/// patient's physical coordinates into its domain.
struct TemporalSdfModel {
    MlpConfig config;
    ParameterSet params;
    NormalizationTransform transform;

    double sdf_normalized(const Eigen::Vector3d& x, double t) const;
    SdfEvaluation eval_normalized(const Eigen::Vector3d& x, double t) const;
    /// SDF in millimeters at physical coordinates.
    double sdf_mm(const Eigen::Vector3d& p_mm, double t_days) const;

    /// The spatial field at a fixed normalized time.
    ScalarField field_at(double t_normalized) const;
    BatchScalarField batch_field_at(double t_normalized) const;
};

/// Raised when an epoch produces a non-finite loss or gradient.
struct DivergenceError : std::runtime_error {
    int epoch;
    explicit DivergenceError(int at_epoch)
        : std::runtime_error("training diverged (non-finite loss) at epoch " +
                             std::to_string(at_epoch)),
          epoch(at_epoch) {}
};

struct FitResult {
    TemporalSdfModel model;
    std::vector<LossBreakdown> history;  // one entry per epoch
};

/// Normalize, initialize, and run epochs of sample -> loss/gradient -> Adam.
/// Fully deterministic for a given config.rng_seed.
FitResult fit(const PointCloudSequence& physical_seq, const MlpConfig& mlp,
              const TrainingConfig& config);

struct ComponentSummary {
    double min = 0.0;
    double final = 0.0;
    int epoch_of_min = 0;
};

struct LossHistorySummary {
    ComponentSummary data_abs, eikonal_data, temporal_data, eikonal_reg, temporal_reg, total;
};

LossHistorySummary loss_history_summary(std::span<const LossBreakdown> history);

}  // namespace sdf4d
