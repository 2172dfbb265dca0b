#pragma once

// Internal evaluation engine for the space-time MLP.
//
// Each network scalar is carried as a "jet": its value plus, when requested,
// its four directional derivatives along the input axes (x, y, z, t). The
// forward pass therefore yields the SDF value and its exact input gradient in
// one sweep. The whole jet trace is kept per layer, and a reverse sweep over
// that trace produces exact parameter gradients of any scalar loss built from
// the output jet — including the second-order paths through the input
// gradients.
//
// Values are computed by one fixed-order dot-product kernel on every path, so
// single-point, batched, and jet evaluations all produce bit-identical
// values. Tangents and the reverse sweep run as blocked matrix products;
// samples occupy columns (one column per sample in the value matrices, four
// adjacent columns per sample in the tangent matrices).
//
// ReLU gates a unit's tangents by the sign of its value, with ReLU'(0) = 0;
// under that convention the gate contributes no derivative of its own, so the
// reverse sweep applies the same mask to the adjoints.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "sdf4d/mlp.hpp"

namespace sdf4d::detail {

inline constexpr int kBlockSamples = 64;

class JetEngine {
public:
    JetEngine(const ParameterSet& params, const MlpConfig& config, bool with_tangents,
              int max_samples = kBlockSamples);

    bool with_tangents() const { return with_tangents_; }

    /// Load a block of at most max_samples points and run the forward sweep.
    void forward(std::span<const SpaceTimePoint> points);

    /// Replace the raw input fed to the skip concatenation (test hook). Takes
    /// effect on subsequent forward() calls; pass nullptr to restore.
    void set_skip_override(const Eigen::Vector4d* override_input);

    double value(int sample) const { return out_values_(0, sample); }
    /// Tangent k of the output = d f / d input_k. Requires with_tangents.
    double tangent(int sample, int k) const { return out_tangents_(0, 4 * sample + k); }

    /// Clear all reverse-sweep seeds for the current block.
    void zero_seeds();
    void seed_value(int sample, double vbar) { out_vbar_(0, sample) += vbar; }
    void seed_tangent(int sample, int k, double tbar) { out_tbar_(0, 4 * sample + k) += tbar; }

    /// Reverse sweep for the current block; accumulates parameter gradients
    /// into this engine's local buffers.
    void reverse();

    /// Add the accumulated local gradients onto a flat gradient vector laid
    /// out per parameter_layout().
    void flush_gradient(Eigen::VectorXd& grad_flat) const;

private:
    const MlpConfig config_;
    bool with_tangents_;
    int max_samples_;
    int block_samples_ = 0;

    // col-major weight copies for the GEMM paths; the value kernel reads the
    // row-major parameter storage directly
    const ParameterSet* params_ = nullptr;
    std::vector<LayerSlice> layout_;
    std::vector<Eigen::MatrixXd> weights_;

    // forward trace, per layer: inputs (skip rows included) and
    // pre-activations, split into value and tangent blocks
    std::vector<Eigen::MatrixXd> in_values_;    // in  x B
    std::vector<Eigen::MatrixXd> in_tangents_;  // in  x 4B
    std::vector<Eigen::MatrixXd> pre_values_;   // out x B
    std::vector<Eigen::MatrixXd> pre_tangents_;  // out x 4B
    Eigen::MatrixXd out_values_;   // 1 x B
    Eigen::MatrixXd out_tangents_;  // 1 x 4B
    Eigen::Matrix4Xd skip_values_;  // what the skip layer sees per sample
    bool has_skip_override_ = false;
    Eigen::Vector4d skip_override_ = Eigen::Vector4d::Zero();

    // reverse buffers
    Eigen::MatrixXd out_vbar_, out_tbar_;
    std::vector<Eigen::MatrixXd> vbar_, tbar_;
    Eigen::MatrixXd uvbar_, utbar_;  // scratch sized for the widest input

    // local gradient accumulation
    std::vector<Eigen::MatrixXd> weight_grad_;
    std::vector<Eigen::VectorXd> bias_grad_;
};

}  // namespace sdf4d::detail
