#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace sdf4d {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { ReLU };

/// Architecture of the space-time SDF network: a ReLU MLP on (x, y, z, t)
/// with a skip connection that concatenates the raw 4-vector input to the
/// input of one hidden layer.
struct MlpConfig {
    static constexpr int input_dim = 4;
    static constexpr int output_dim = 1;

    int hidden_layers = 6;
    int width = 256;
    /// 1-based index of the hidden layer whose input is [previous activation,
    /// raw input]. Index 1 degenerates to no concatenation: the first layer
    /// already sees the raw input.
    int skip_layer_index = 3;
    Activation activation = Activation::ReLU;

    void validate() const;

    /// Hidden layers plus the affine output layer.
    int layer_count() const { return hidden_layers + 1; }

    /// Incoming feature count of layer l (0-based; l == hidden_layers is the
    /// output layer).
    int in_features(int layer) const;
    /// Outgoing feature count of layer l.
    int out_features(int layer) const;

    /// True when layer l receives the raw-input concatenation.
    bool has_skip(int layer) const {
        return layer == skip_layer_index - 1 && skip_layer_index > 1;
    }

    long parameter_count() const;

    bool operator==(const MlpConfig&) const = default;
};

/// Offsets of one layer's weight matrix and bias vector inside the flat
/// parameter vector. Ordering is layer-major, weights before bias, weights
/// row-major (rows = output units).
struct LayerSlice {
    long weight_offset = 0;
    long bias_offset = 0;
    int rows = 0;
    int cols = 0;
};

std::vector<LayerSlice> parameter_layout(const MlpConfig& config);

/// Network weights, owned as one flat vector with structured views per layer.
/// The flat ordering is the serialization and optimizer-state contract.
class ParameterSet {
public:
    ParameterSet() = default;
    explicit ParameterSet(const MlpConfig& config);

    const MlpConfig& config() const { return config_; }

    Eigen::VectorXd& flat() { return flat_; }
    const Eigen::VectorXd& flat() const { return flat_; }
    long size() const { return flat_.size(); }

    Eigen::Map<const RowMajorMatrix> weight(int layer) const;
    Eigen::Map<RowMajorMatrix> weight(int layer);
    Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
    Eigen::Map<Eigen::VectorXd> bias(int layer);

    /// Rebuild a ParameterSet from a flat vector (inverse of flat()).
    static ParameterSet from_flat(const MlpConfig& config, const Eigen::VectorXd& flat);

private:
    MlpConfig config_;
    std::vector<LayerSlice> layout_;
    Eigen::VectorXd flat_;
};

/// A point of the normalized space-time domain [-1,1]^3 x [-1,1]. Evaluation
/// outside the domain is allowed; samplers must not emit such points.
struct SpaceTimePoint {
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    double t = 0.0;

    bool is_finite() const;
    bool inside_domain(double bound = 1.0) const;
};

/// Value and exact input-gradient of the network at one point.
struct SdfEvaluation {
    double value = 0.0;
    Eigen::Vector3d grad_x = Eigen::Vector3d::Zero();
    double grad_t = 0.0;
};

/// Derivative conventions at the non-smooth points of the computation. Both
/// ReLU and |.| use the zero element of their subdifferential, so the zero
/// network is a fixed point of the temporal terms and results never depend
/// on tie-breaking.
struct SubgradientConvention {
    double relu_derivative_at_zero;
    double abs_derivative_at_zero;
};

constexpr SubgradientConvention subgradient_convention() { return {0.0, 0.0}; }

/// Fan-in uniform initialization (bound sqrt(6/fan_in)), zero biases.
/// Deterministic for a given seed.
ParameterSet init_params(const MlpConfig& config, std::uint64_t seed);

double forward(const ParameterSet& params, const MlpConfig& config, const SpaceTimePoint& p);

SdfEvaluation forward_with_input_grad(const ParameterSet& params, const MlpConfig& config,
                                      const SpaceTimePoint& p);

/// Evaluate many points at once (blocked matrix products, deterministic,
/// parallel over fixed stripes). out.size() must equal points.size().
void forward_batch(const ParameterSet& params, const MlpConfig& config,
                   std::span<const SpaceTimePoint> points, std::span<double> out);

namespace detail {
/// Forward pass with the skip-concatenated raw input replaced by an arbitrary
/// 4-vector. Test hook for verifying the skip wiring.
double forward_with_skip_override(const ParameterSet& params, const MlpConfig& config,
                                  const SpaceTimePoint& p, const Eigen::Vector4d& skip_input);
}  // namespace detail

}  // namespace sdf4d
