#include "sdf4d/training.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace sdf4d {

void TrainingConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainingConfig: epochs must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("TrainingConfig: learning_rate must be positive");
    weights.validate();
    if (on_surface_batch && *on_surface_batch < 1)
        throw std::invalid_argument("TrainingConfig: on_surface_batch must be >= 1");
    if (!(off_surface_per_on_surface > 0.0))
        throw std::invalid_argument("TrainingConfig: off_surface_per_on_surface must be > 0");
    if (n_reg_times_per_step < 1)
        throw std::invalid_argument("TrainingConfig: n_reg_times_per_step must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw std::invalid_argument("TrainingConfig: Adam betas must lie in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw std::invalid_argument("TrainingConfig: adam_epsilon must be > 0");
}

namespace {

/// First k entries of a uniform random permutation of [0, n), deterministic
/// for the rng state (partial Fisher-Yates).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> indices(n);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    k = std::min(k, n);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.uniform_index(n - i);
        std::swap(indices[i], indices[j]);
    }
    indices.resize(k);
    return indices;
}

Eigen::Vector3d uniform_in_cube(Rng& rng) {
    return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
}

}  // namespace

LossBatch sample_batch(const NormalizedSequence& seq, const TrainingConfig& config, Rng& rng) {
    config.validate();
    if (seq.sequence.scans.empty())
        throw std::invalid_argument("sample_batch: empty sequence");

    LossBatch batch;
    std::vector<double> scan_times;
    scan_times.reserve(seq.sequence.scans.size());
    for (const auto& scan : seq.sequence.scans) {
        scan_times.push_back(scan.time_days);  // normalized sequence carries normalized times
        if (config.on_surface_batch) {
            const auto subset = sample_indices(
                scan.points.size(), static_cast<std::size_t>(*config.on_surface_batch), rng);
            for (const std::size_t i : subset)
                batch.on_surface.push_back({scan.points[i], scan.time_days});
        } else {
            for (const auto& p : scan.points) batch.on_surface.push_back({p, scan.time_days});
        }
    }

    const auto n_off = static_cast<std::size_t>(
        std::llround(config.off_surface_per_on_surface * static_cast<double>(batch.on_surface.size())));
    for (std::size_t i = 0; i < n_off; ++i)
        batch.off_surface_data.push_back({uniform_in_cube(rng), scan_times[i % scan_times.size()]});

    std::vector<double> reg_times(static_cast<std::size_t>(config.n_reg_times_per_step));
    for (auto& t : reg_times) t = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < n_off; ++i)
        batch.off_surface_reg.push_back({uniform_in_cube(rng), reg_times[i % reg_times.size()]});

    return batch;
}

void adam_step(Eigen::VectorXd& params_flat, const Eigen::VectorXd& grad_flat, AdamState& state,
               const TrainingConfig& config) {
    if (params_flat.size() != grad_flat.size() || params_flat.size() != state.m.size() ||
        params_flat.size() != state.v.size())
        throw std::invalid_argument("adam_step: size mismatch");
    if (!grad_flat.allFinite()) throw std::domain_error("adam_step: non-finite gradient");

    state.step_count += 1;
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    state.m = b1 * state.m + (1.0 - b1) * grad_flat;
    state.v = b2 * state.v + (1.0 - b2) * grad_flat.cwiseProduct(grad_flat);
    const double m_correction = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double v_correction = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    params_flat -=
        (config.learning_rate / m_correction) *
        (state.m.array() / ((state.v.array() / v_correction).sqrt() + config.adam_epsilon))
            .matrix();
}

double TemporalSdfModel::sdf_normalized(const Eigen::Vector3d& x, double t) const {
    return forward(params, config, {x, t});
}

SdfEvaluation TemporalSdfModel::eval_normalized(const Eigen::Vector3d& x, double t) const {
    return forward_with_input_grad(params, config, {x, t});
}

double TemporalSdfModel::sdf_mm(const Eigen::Vector3d& p_mm, double t_days) const {
    const double d = sdf_normalized(transform.to_normalized(p_mm),
                                    transform.time_to_normalized(t_days));
    return physical_distance(d, transform);
}

ScalarField TemporalSdfModel::field_at(double t_normalized) const {
    auto shared = std::make_shared<const TemporalSdfModel>(*this);
    return [shared, t_normalized](const Eigen::Vector3d& x) {
        return shared->sdf_normalized(x, t_normalized);
    };
}

BatchScalarField TemporalSdfModel::batch_field_at(double t_normalized) const {
    auto shared = std::make_shared<const TemporalSdfModel>(*this);
    return [shared, t_normalized](std::span<const Eigen::Vector3d> points,
                                  std::span<double> out) {
        std::vector<SpaceTimePoint> st(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) st[i] = {points[i], t_normalized};
        forward_batch(shared->params, shared->config, st, out);
    };
}

FitResult fit(const PointCloudSequence& physical_seq, const MlpConfig& mlp,
              const TrainingConfig& config) {
    physical_seq.validate(2);
    mlp.validate();
    config.validate();

    const NormalizedSequence normalized = normalize_sequence(physical_seq);

    ParameterSet params = init_params(mlp, config.rng_seed);
    AdamState state(params.size());
    Rng batch_rng(derive_seed(config.rng_seed, 1));

    std::vector<LossBreakdown> history;
    history.reserve(static_cast<std::size_t>(config.epochs));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const LossBatch batch = sample_batch(normalized, config, batch_rng);
        try {
            auto [breakdown, grad] = loss_and_param_grad(params, mlp, batch, config.weights);
            adam_step(params.flat(), grad, state, config);
            history.push_back(breakdown);
        } catch (const std::domain_error&) {
            throw DivergenceError(epoch);
        }
    }

    return {TemporalSdfModel{mlp, std::move(params), normalized.transform}, std::move(history)};
}

LossHistorySummary loss_history_summary(std::span<const LossBreakdown> history) {
    if (history.empty()) throw std::invalid_argument("loss_history_summary: empty history");

    auto summarize = [&](double LossBreakdown::* member) {
        ComponentSummary s;
        s.min = history[0].*member;
        s.final = history.back().*member;
        s.epoch_of_min = 0;
        for (std::size_t i = 1; i < history.size(); ++i) {
            if (history[i].*member < s.min) {
                s.min = history[i].*member;
                s.epoch_of_min = static_cast<int>(i);
            }
        }
        return s;
    };

    LossHistorySummary summary;
    summary.data_abs = summarize(&LossBreakdown::data_abs);
    summary.eikonal_data = summarize(&LossBreakdown::eikonal_data);
    summary.temporal_data = summarize(&LossBreakdown::temporal_data);
    summary.eikonal_reg = summarize(&LossBreakdown::eikonal_reg);
    summary.temporal_reg = summarize(&LossBreakdown::temporal_reg);
    summary.total = summarize(&LossBreakdown::total);
    return summary;
}

}  // namespace sdf4d
