#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "sdf4d/mlp.hpp"

namespace sdf4d {

/// Coefficients of the four gradient-regularization terms: lambda1 weighs the
/// Eikonal term at scan times, lambda2 the temporal term at scan times,
/// lambda3 and lambda4 the same two terms at regularization times.
struct LossWeights {
    double lambda1 = 0.1;
    double lambda2 = 0.1;
    double lambda3 = 0.1;
    double lambda4 = 0.1;

    void validate() const;
};

/// One optimization step's sample set. on_surface points sit on scan clouds at
/// their scan times; off_surface_data points pair uniform spatial samples with
/// scan times; off_surface_reg points pair uniform spatial samples with
/// regularization times.
struct LossBatch {
    std::vector<SpaceTimePoint> on_surface;
    std::vector<SpaceTimePoint> off_surface_data;
    std::vector<SpaceTimePoint> off_surface_reg;

    void validate() const;
};

/// The five loss components and their weighted total:
///   total = data_abs + l1*eikonal_data + l2*temporal_data
///                    + l3*eikonal_reg + l4*temporal_reg
/// data_abs is the mean |f| over on-surface points; the eikonal components are
/// means of (||grad_x f|| - 1)^2 and the temporal components means of
/// |df/dt| over their sample sets (an empty sample set contributes 0).
struct LossBreakdown {
    double data_abs = 0.0;
    double eikonal_data = 0.0;
    double temporal_data = 0.0;
    double eikonal_reg = 0.0;
    double temporal_reg = 0.0;
    double total = 0.0;

    /// Recompute the weighted sum from the components. total is always stored
    /// as exactly this expression.
    double weighted_total(const LossWeights& w) const {
        return data_abs + w.lambda1 * eikonal_data + w.lambda2 * temporal_data +
               w.lambda3 * eikonal_reg + w.lambda4 * temporal_reg;
    }
};

/// Evaluate the full loss and its exact gradient with respect to the flat
/// parameter vector, including the second-order paths through the input
/// gradients (reverse accumulation through the forward directional-derivative
/// trace). Throws std::domain_error if the loss or gradient is non-finite.
std::pair<LossBreakdown, Eigen::VectorXd> loss_and_param_grad(const ParameterSet& params,
                                                              const MlpConfig& config,
                                                              const LossBatch& batch,
                                                              const LossWeights& weights);

}  // namespace sdf4d
