#include "sdf4d/loss.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "jet_engine.hpp"
#include "sdf4d/common.hpp"

namespace sdf4d {

namespace {

double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_domain(const std::vector<SpaceTimePoint>& points, const char* name) {
    for (const auto& p : points)
        if (!p.inside_domain())
            throw std::invalid_argument(std::string("LossBatch: ") + name +
                                        " contains a point outside [-1,1]^3 x [-1,1]");
}

struct StripeSums {
    double data_abs = 0.0;
    double eikonal = 0.0;
    double temporal = 0.0;
};

}  // namespace

void LossWeights::validate() const {
    for (double v : {lambda1, lambda2, lambda3, lambda4})
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument("LossWeights: coefficients must be finite and >= 0");
}

void LossBatch::validate() const {
    if (on_surface.empty()) throw std::invalid_argument("LossBatch: on_surface must be nonempty");
    require_domain(on_surface, "on_surface");
    require_domain(off_surface_data, "off_surface_data");
    require_domain(off_surface_reg, "off_surface_reg");
}

std::pair<LossBreakdown, Eigen::VectorXd> loss_and_param_grad(const ParameterSet& params,
                                                              const MlpConfig& config,
                                                              const LossBatch& batch,
                                                              const LossWeights& weights) {
    config.validate();
    weights.validate();
    batch.validate();

    std::array<Eigen::VectorXd, kReductionStripes> stripe_grads;
    for (auto& g : stripe_grads) g = Eigen::VectorXd::Zero(config.parameter_count());

    // phase 1: on-surface data term, value lanes only
    std::array<StripeSums, kReductionStripes> on_sums{};
    {
        const auto& pts = batch.on_surface;
        const double seed_scale = 1.0 / static_cast<double>(pts.size());
        parallel_stripes(pts.size(), [&](int stripe, std::size_t begin, std::size_t end) {
            detail::JetEngine engine(params, config, /*with_tangents=*/false);
            double sum = 0.0;
            for (std::size_t at = begin; at < end; at += detail::kBlockSamples) {
                const std::size_t n = std::min<std::size_t>(detail::kBlockSamples, end - at);
                engine.forward(std::span<const SpaceTimePoint>(pts).subspan(at, n));
                engine.zero_seeds();
                for (std::size_t s = 0; s < n; ++s) {
                    const double f = engine.value(static_cast<int>(s));
                    sum += std::abs(f);
                    engine.seed_value(static_cast<int>(s), sign_or_zero(f) * seed_scale);
                }
                engine.reverse();
            }
            engine.flush_gradient(stripe_grads[static_cast<std::size_t>(stripe)]);
            on_sums[static_cast<std::size_t>(stripe)].data_abs = sum;
        });
    }

    // phases 2 and 3: gradient-regularization terms over the two off-surface
    // sets, jets on all five lanes
    auto run_off_phase = [&](const std::vector<SpaceTimePoint>& pts, double lambda_eik,
                             double lambda_tmp, std::array<StripeSums, kReductionStripes>& sums) {
        if (pts.empty()) return;
        const double n_inv = 1.0 / static_cast<double>(pts.size());
        parallel_stripes(pts.size(), [&](int stripe, std::size_t begin, std::size_t end) {
            detail::JetEngine engine(params, config, /*with_tangents=*/true);
            double eik_sum = 0.0;
            double tmp_sum = 0.0;
            for (std::size_t at = begin; at < end; at += detail::kBlockSamples) {
                const std::size_t n = std::min<std::size_t>(detail::kBlockSamples, end - at);
                engine.forward(std::span<const SpaceTimePoint>(pts).subspan(at, n));
                engine.zero_seeds();
                for (std::size_t s = 0; s < n; ++s) {
                    const int si = static_cast<int>(s);
                    const double gx = engine.tangent(si, 0);
                    const double gy = engine.tangent(si, 1);
                    const double gz = engine.tangent(si, 2);
                    const double gt = engine.tangent(si, 3);
                    const double gnorm = std::sqrt(gx * gx + gy * gy + gz * gz);
                    eik_sum += (gnorm - 1.0) * (gnorm - 1.0);
                    tmp_sum += std::abs(gt);
                    if (gnorm > 0.0) {
                        const double coef = lambda_eik * n_inv * 2.0 * (gnorm - 1.0) / gnorm;
                        engine.seed_tangent(si, 0, coef * gx);
                        engine.seed_tangent(si, 1, coef * gy);
                        engine.seed_tangent(si, 2, coef * gz);
                    }
                    engine.seed_tangent(si, 3, lambda_tmp * n_inv * sign_or_zero(gt));
                }
                engine.reverse();
            }
            engine.flush_gradient(stripe_grads[static_cast<std::size_t>(stripe)]);
            sums[static_cast<std::size_t>(stripe)].eikonal = eik_sum;
            sums[static_cast<std::size_t>(stripe)].temporal = tmp_sum;
        });
    };

    std::array<StripeSums, kReductionStripes> data_sums{};
    std::array<StripeSums, kReductionStripes> reg_sums{};
    run_off_phase(batch.off_surface_data, weights.lambda1, weights.lambda2, data_sums);
    run_off_phase(batch.off_surface_reg, weights.lambda3, weights.lambda4, reg_sums);

    // reduce in stripe order
    Eigen::VectorXd grad = std::move(stripe_grads[0]);
    for (int s = 1; s < kReductionStripes; ++s) grad += stripe_grads[static_cast<std::size_t>(s)];

    LossBreakdown breakdown;
    double on_sum = 0.0;
    double ed = 0.0, td = 0.0, er = 0.0, tr = 0.0;
    for (int s = 0; s < kReductionStripes; ++s) {
        const auto si = static_cast<std::size_t>(s);
        on_sum += on_sums[si].data_abs;
        ed += data_sums[si].eikonal;
        td += data_sums[si].temporal;
        er += reg_sums[si].eikonal;
        tr += reg_sums[si].temporal;
    }
    breakdown.data_abs = on_sum / static_cast<double>(batch.on_surface.size());
    if (!batch.off_surface_data.empty()) {
        breakdown.eikonal_data = ed / static_cast<double>(batch.off_surface_data.size());
        breakdown.temporal_data = td / static_cast<double>(batch.off_surface_data.size());
    }
    if (!batch.off_surface_reg.empty()) {
        breakdown.eikonal_reg = er / static_cast<double>(batch.off_surface_reg.size());
        breakdown.temporal_reg = tr / static_cast<double>(batch.off_surface_reg.size());
    }
    breakdown.total = breakdown.weighted_total(weights);

    if (!std::isfinite(breakdown.total) || !grad.allFinite())
        throw std::domain_error("loss_and_param_grad: non-finite loss or gradient");
    return {breakdown, std::move(grad)};
}

}  // namespace sdf4d
