#include "sdf4d/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "jet_engine.hpp"
#include "sdf4d/common.hpp"

namespace sdf4d {

void MlpConfig::validate() const {
    if (hidden_layers < 1) throw std::invalid_argument("MlpConfig: hidden_layers must be >= 1");
    if (width < 1) throw std::invalid_argument("MlpConfig: width must be >= 1");
    if (skip_layer_index < 1 || skip_layer_index > hidden_layers)
        throw std::invalid_argument("MlpConfig: skip_layer_index must be in [1, hidden_layers]");
    if (activation != Activation::ReLU)
        throw std::invalid_argument("MlpConfig: only ReLU activation is supported");
}

int MlpConfig::in_features(int layer) const {
    if (layer < 0 || layer > hidden_layers) throw std::out_of_range("MlpConfig: bad layer index");
    if (layer == 0) return input_dim;
    return width + (has_skip(layer) ? input_dim : 0);
}

int MlpConfig::out_features(int layer) const {
    if (layer < 0 || layer > hidden_layers) throw std::out_of_range("MlpConfig: bad layer index");
    return layer == hidden_layers ? output_dim : width;
}

long MlpConfig::parameter_count() const {
    long count = 0;
    for (int l = 0; l < layer_count(); ++l)
        count += static_cast<long>(out_features(l)) * in_features(l) + out_features(l);
    return count;
}

std::vector<LayerSlice> parameter_layout(const MlpConfig& config) {
    config.validate();
    std::vector<LayerSlice> layout;
    layout.reserve(static_cast<std::size_t>(config.layer_count()));
    long offset = 0;
    for (int l = 0; l < config.layer_count(); ++l) {
        LayerSlice slice;
        slice.rows = config.out_features(l);
        slice.cols = config.in_features(l);
        slice.weight_offset = offset;
        offset += static_cast<long>(slice.rows) * slice.cols;
        slice.bias_offset = offset;
        offset += slice.rows;
        layout.push_back(slice);
    }
    return layout;
}

ParameterSet::ParameterSet(const MlpConfig& config)
    : config_(config), layout_(parameter_layout(config)) {
    flat_ = Eigen::VectorXd::Zero(config.parameter_count());
}

Eigen::Map<const RowMajorMatrix> ParameterSet::weight(int layer) const {
    const auto& s = layout_.at(static_cast<std::size_t>(layer));
    return {flat_.data() + s.weight_offset, s.rows, s.cols};
}

Eigen::Map<RowMajorMatrix> ParameterSet::weight(int layer) {
    const auto& s = layout_.at(static_cast<std::size_t>(layer));
    return {flat_.data() + s.weight_offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::VectorXd> ParameterSet::bias(int layer) const {
    const auto& s = layout_.at(static_cast<std::size_t>(layer));
    return {flat_.data() + s.bias_offset, s.rows};
}

Eigen::Map<Eigen::VectorXd> ParameterSet::bias(int layer) {
    const auto& s = layout_.at(static_cast<std::size_t>(layer));
    return {flat_.data() + s.bias_offset, s.rows};
}

ParameterSet ParameterSet::from_flat(const MlpConfig& config, const Eigen::VectorXd& flat) {
    ParameterSet params(config);
    if (flat.size() != params.flat_.size())
        throw std::invalid_argument("ParameterSet::from_flat: expected " +
                                    std::to_string(params.flat_.size()) + " values, got " +
                                    std::to_string(flat.size()));
    params.flat_ = flat;
    return params;
}

bool SpaceTimePoint::is_finite() const {
    return x.allFinite() && std::isfinite(t);
}

bool SpaceTimePoint::inside_domain(double bound) const {
    return is_finite() && x.cwiseAbs().maxCoeff() <= bound && std::abs(t) <= bound;
}

ParameterSet init_params(const MlpConfig& config, std::uint64_t seed) {
    config.validate();
    ParameterSet params(config);
    Rng rng(seed);
    for (int l = 0; l < config.layer_count(); ++l) {
        const double bound = std::sqrt(6.0 / config.in_features(l));
        auto w = params.weight(l);
        for (int r = 0; r < w.rows(); ++r)
            for (int c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
        // biases stay zero
    }
    return params;
}

double forward(const ParameterSet& params, const MlpConfig& config, const SpaceTimePoint& p) {
    detail::JetEngine engine(params, config, /*with_tangents=*/false, /*max_samples=*/1);
    engine.forward(std::span<const SpaceTimePoint>(&p, 1));
    return engine.value(0);
}

SdfEvaluation forward_with_input_grad(const ParameterSet& params, const MlpConfig& config,
                                      const SpaceTimePoint& p) {
    detail::JetEngine engine(params, config, /*with_tangents=*/true, /*max_samples=*/1);
    engine.forward(std::span<const SpaceTimePoint>(&p, 1));
    SdfEvaluation eval;
    eval.value = engine.value(0);
    eval.grad_x = {engine.tangent(0, 0), engine.tangent(0, 1), engine.tangent(0, 2)};
    eval.grad_t = engine.tangent(0, 3);
    return eval;
}

void forward_batch(const ParameterSet& params, const MlpConfig& config,
                   std::span<const SpaceTimePoint> points, std::span<double> out) {
    if (points.size() != out.size())
        throw std::invalid_argument("forward_batch: points/out size mismatch");
    if (points.empty()) return;
    parallel_stripes(points.size(), [&](int, std::size_t begin, std::size_t end) {
        detail::JetEngine engine(params, config, /*with_tangents=*/false);
        for (std::size_t at = begin; at < end; at += detail::kBlockSamples) {
            const std::size_t n = std::min<std::size_t>(detail::kBlockSamples, end - at);
            engine.forward(points.subspan(at, n));
            for (std::size_t s = 0; s < n; ++s) out[at + s] = engine.value(static_cast<int>(s));
        }
    });
}

namespace detail {

double forward_with_skip_override(const ParameterSet& params, const MlpConfig& config,
                                  const SpaceTimePoint& p, const Eigen::Vector4d& skip_input) {
    JetEngine engine(params, config, /*with_tangents=*/false, /*max_samples=*/1);
    engine.set_skip_override(&skip_input);
    engine.forward(std::span<const SpaceTimePoint>(&p, 1));
    return engine.value(0);
}

}  // namespace detail

}  // namespace sdf4d
