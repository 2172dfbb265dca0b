#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "sdf4d/common.hpp"
#include "sdf4d/loss.hpp"
#include "sdf4d/mlp.hpp"

namespace sdf4d::testing {

inline SpaceTimePoint random_point(Rng& rng, double bound = 0.95) {
    SpaceTimePoint p;
    p.x = {rng.uniform(-bound, bound), rng.uniform(-bound, bound), rng.uniform(-bound, bound)};
    p.t = rng.uniform(-bound, bound);
    return p;
}

/// |a - b| relative to the larger magnitude, floored at 1 so near-zero pairs
/// compare absolutely.
inline double rel_error(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// A ReLU network is piecewise linear in its inputs, so away from kinks the
/// second difference along any axis vanishes. Rejects points whose central
/// difference bracket straddles a kink.
inline bool away_from_kinks(const ParameterSet& params, const MlpConfig& config,
                            const SpaceTimePoint& p, double h) {
    const double f0 = forward(params, config, p);
    for (int axis = 0; axis < 4; ++axis) {
        SpaceTimePoint hi = p, lo = p;
        if (axis < 3) {
            hi.x[axis] += h;
            lo.x[axis] -= h;
        } else {
            hi.t += h;
            lo.t -= h;
        }
        const double curvature =
            forward(params, config, hi) + forward(params, config, lo) - 2.0 * f0;
        if (std::abs(curvature) > 1e-10 * std::max(1.0, std::abs(f0))) return false;
    }
    return true;
}

inline SpaceTimePoint random_point_away_from_kinks(const ParameterSet& params,
                                                   const MlpConfig& config, Rng& rng, double h) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const SpaceTimePoint p = random_point(rng);
        if (away_from_kinks(params, config, p, 4.0 * h)) return p;
    }
    throw std::runtime_error("could not find a kink-free probe point");
}

/// Central finite difference of the network along one input axis.
inline double fd_input_derivative(const ParameterSet& params, const MlpConfig& config,
                                  const SpaceTimePoint& p, int axis, double h) {
    SpaceTimePoint hi = p, lo = p;
    if (axis < 3) {
        hi.x[axis] += h;
        lo.x[axis] -= h;
    } else {
        hi.t += h;
        lo.t -= h;
    }
    return (forward(params, config, hi) - forward(params, config, lo)) / (2.0 * h);
}

struct FdGradient {
    Eigen::VectorXd values;
    /// False where the bracket straddled a kink of the piecewise-smooth loss
    /// (|.|, sign, or ReLU boundary), detected by an outsized second
    /// difference; the FD oracle is only valid at smooth coordinates.
    std::vector<bool> valid;
    std::size_t valid_count = 0;
};

/// Brute-force central finite difference of the total loss over every
/// parameter. Only feasible for small networks.
inline FdGradient fd_param_gradient(const ParameterSet& params, const MlpConfig& config,
                                    const LossBatch& batch, const LossWeights& weights,
                                    double h_scale = 1e-6) {
    FdGradient fd;
    fd.values.resize(params.size());
    fd.valid.resize(static_cast<std::size_t>(params.size()));
    const double mid = loss_and_param_grad(params, config, batch, weights).first.total;
    ParameterSet probe = params;
    for (long i = 0; i < params.size(); ++i) {
        const double saved = probe.flat()[i];
        const double h = h_scale * std::max(1.0, std::abs(saved));
        probe.flat()[i] = saved + h;
        const double hi = loss_and_param_grad(probe, config, batch, weights).first.total;
        probe.flat()[i] = saved - h;
        const double lo = loss_and_param_grad(probe, config, batch, weights).first.total;
        probe.flat()[i] = saved;
        fd.values[i] = (hi - lo) / (2.0 * h);
        // a kink inside the bracket leaves an O(h) second difference where a
        // smooth loss gives O(h^2)
        const bool smooth = std::abs(hi + lo - 2.0 * mid) <= 1e-9 * std::max(1.0, std::abs(mid));
        fd.valid[static_cast<std::size_t>(i)] = smooth;
        if (smooth) ++fd.valid_count;
    }
    return fd;
}

inline LossBatch random_batch(Rng& rng, int n_on, int n_off_data, int n_off_reg) {
    LossBatch batch;
    for (int i = 0; i < n_on; ++i) batch.on_surface.push_back(random_point(rng));
    for (int i = 0; i < n_off_data; ++i) batch.off_surface_data.push_back(random_point(rng));
    for (int i = 0; i < n_off_reg; ++i) batch.off_surface_reg.push_back(random_point(rng));
    return batch;
}

}  // namespace sdf4d::testing
