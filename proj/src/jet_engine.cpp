#include "jet_engine.hpp"

#include <stdexcept>

namespace sdf4d::detail {

namespace {

// The one value-path kernel. Kept out of line so every caller executes the
// same instruction sequence and values stay bit-identical across the
// single-point, batched, and jet paths. The dot product runs on eight
// independent accumulator lanes (vectorizable without any reassociation
// license) combined in one fixed order.
__attribute__((noinline)) void affine_values(const double* w_row_major, const double* bias,
                                             const double* u, double* out, int rows, int in) {
    constexpr int kLanes = 8;
    const int vector_end = in - in % kLanes;
    for (int r = 0; r < rows; ++r) {
        const double* wr = w_row_major + static_cast<std::ptrdiff_t>(r) * in;
        double lanes[kLanes] = {0, 0, 0, 0, 0, 0, 0, 0};
        for (int i = 0; i < vector_end; i += kLanes)
            for (int k = 0; k < kLanes; ++k) lanes[k] += wr[i + k] * u[i + k];
        double acc = bias[r];
        acc += ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
               ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
        for (int i = vector_end; i < in; ++i) acc += wr[i] * u[i];
        out[r] = acc;
    }
}

}  // namespace

JetEngine::JetEngine(const ParameterSet& params, const MlpConfig& config, bool with_tangents,
                     int max_samples)
    : config_(config), with_tangents_(with_tangents), max_samples_(max_samples),
      params_(&params) {
    if (params.config() != config)
        throw std::invalid_argument("JetEngine: parameter set does not match MLP config");

    const int layers = config.layer_count();
    const int b = max_samples_;

    layout_ = parameter_layout(config);
    weights_.reserve(static_cast<std::size_t>(layers));
    int widest_input = 0;
    for (int l = 0; l < layers; ++l) {
        weights_.emplace_back(params.weight(l));  // row-major map -> col-major copy
        widest_input = std::max(widest_input, config.in_features(l));
    }

    in_values_.resize(layers);
    pre_values_.resize(layers);
    vbar_.resize(layers);
    weight_grad_.resize(layers);
    bias_grad_.resize(layers);
    if (with_tangents_) {
        in_tangents_.resize(layers);
        pre_tangents_.resize(layers);
        tbar_.resize(layers);
    }
    for (int l = 0; l < layers; ++l) {
        in_values_[l].setZero(config.in_features(l), b);
        pre_values_[l].setZero(config.out_features(l), b);
        vbar_[l].setZero(config.out_features(l), b);
        weight_grad_[l].setZero(config.out_features(l), config.in_features(l));
        bias_grad_[l].setZero(config.out_features(l));
        if (with_tangents_) {
            in_tangents_[l].setZero(config.in_features(l), 4 * b);
            pre_tangents_[l].setZero(config.out_features(l), 4 * b);
            tbar_[l].setZero(config.out_features(l), 4 * b);
        }
    }
    skip_values_.setZero(4, b);
    out_values_.setZero(1, b);
    out_vbar_.setZero(1, b);
    uvbar_.setZero(widest_input, b);
    if (with_tangents_) {
        out_tangents_.setZero(1, 4 * b);
        out_tbar_.setZero(1, 4 * b);
        utbar_.setZero(widest_input, 4 * b);
    }
}

void JetEngine::set_skip_override(const Eigen::Vector4d* override_input) {
    has_skip_override_ = override_input != nullptr;
    if (override_input) skip_override_ = *override_input;
}

void JetEngine::forward(std::span<const SpaceTimePoint> points) {
    block_samples_ = static_cast<int>(points.size());
    if (block_samples_ == 0 || block_samples_ > max_samples_)
        throw std::invalid_argument("JetEngine::forward: bad block size");
    const int b = block_samples_;
    const int layers = config_.layer_count();

    // input jet: the value column holds the coordinates, tangent column k of
    // a sample holds e_k
    auto& u0v = in_values_[0];
    for (int s = 0; s < b; ++s) {
        u0v(0, s) = points[s].x.x();
        u0v(1, s) = points[s].x.y();
        u0v(2, s) = points[s].x.z();
        u0v(3, s) = points[s].t;
    }
    skip_values_.leftCols(b) = u0v.leftCols(b);
    if (has_skip_override_)
        for (int s = 0; s < b; ++s) skip_values_.col(s) = skip_override_;
    if (with_tangents_) {
        auto& u0t = in_tangents_[0];
        u0t.leftCols(4 * b).setZero();
        for (int s = 0; s < b; ++s)
            for (int k = 0; k < 4; ++k) u0t(k, 4 * s + k) = 1.0;
    }

    for (int l = 0; l < layers; ++l) {
        const int in = config_.in_features(l);
        const int out = config_.out_features(l);
        auto& uv = in_values_[l];
        if (l > 0) {
            // ReLU of the previous pre-activation feeds the top rows
            const auto& zv = pre_values_[l - 1];
            const int prev = config_.out_features(l - 1);
            for (int s = 0; s < b; ++s) {
                const double* z = zv.col(s).data();
                double* a = uv.col(s).data();
                for (int r = 0; r < prev; ++r) a[r] = z[r] > 0.0 ? z[r] : 0.0;
            }
            if (config_.has_skip(l)) uv.block(prev, 0, 4, b) = skip_values_.leftCols(b);
            if (with_tangents_) {
                const auto& zt = pre_tangents_[l - 1];
                auto& ut = in_tangents_[l];
                for (int c = 0; c < 4 * b; ++c) {
                    const double* z = zv.col(c / 4).data();
                    const double* t = zt.col(c).data();
                    double* a = ut.col(c).data();
                    for (int r = 0; r < prev; ++r) a[r] = z[r] > 0.0 ? t[r] : 0.0;
                }
                if (config_.has_skip(l)) {
                    ut.block(prev, 0, 4, 4 * b).setZero();
                    if (!has_skip_override_)
                        for (int s = 0; s < b; ++s)
                            for (int k = 0; k < 4; ++k) ut(prev + k, 4 * s + k) = 1.0;
                }
            }
        }
        const double* w = params_->flat().data() + layout_[static_cast<std::size_t>(l)].weight_offset;
        const double* bias =
            params_->flat().data() + layout_[static_cast<std::size_t>(l)].bias_offset;
        for (int s = 0; s < b; ++s)
            affine_values(w, bias, uv.col(s).data(), pre_values_[l].col(s).data(), out, in);
        if (with_tangents_)
            pre_tangents_[l].leftCols(4 * b).noalias() =
                weights_[l] * in_tangents_[l].leftCols(4 * b);
    }
    out_values_.leftCols(b) = pre_values_[layers - 1].leftCols(b);
    if (with_tangents_) out_tangents_.leftCols(4 * b) = pre_tangents_[layers - 1].leftCols(4 * b);
}

void JetEngine::zero_seeds() {
    out_vbar_.leftCols(block_samples_).setZero();
    if (with_tangents_) out_tbar_.leftCols(4 * block_samples_).setZero();
}

void JetEngine::reverse() {
    const int b = block_samples_;
    const int layers = config_.layer_count();

    vbar_[layers - 1].leftCols(b) = out_vbar_.leftCols(b);
    if (with_tangents_) tbar_[layers - 1].leftCols(4 * b) = out_tbar_.leftCols(4 * b);

    for (int l = layers - 1; l >= 0; --l) {
        const auto zv_bar = vbar_[l].leftCols(b);
        weight_grad_[l].noalias() += zv_bar * in_values_[l].leftCols(b).transpose();
        if (with_tangents_)
            weight_grad_[l].noalias() +=
                tbar_[l].leftCols(4 * b) * in_tangents_[l].leftCols(4 * b).transpose();
        bias_grad_[l] += zv_bar.rowwise().sum();
        if (l == 0) break;

        const int in = config_.in_features(l);
        const int prev = config_.out_features(l - 1);
        auto uv_bar = uvbar_.topLeftCorner(in, b);
        uv_bar.noalias() = weights_[l].transpose() * zv_bar;
        // gate the adjoints like the forward activations; skip-row adjoints
        // feed the raw input and carry no parameter dependence
        const auto& zv = pre_values_[l - 1];
        for (int s = 0; s < b; ++s) {
            const double* z = zv.col(s).data();
            const double* ub = uvbar_.col(s).data();
            double* vb = vbar_[l - 1].col(s).data();
            for (int r = 0; r < prev; ++r) vb[r] = z[r] > 0.0 ? ub[r] : 0.0;
        }
        if (with_tangents_) {
            auto ut_bar = utbar_.topLeftCorner(in, 4 * b);
            ut_bar.noalias() = weights_[l].transpose() * tbar_[l].leftCols(4 * b);
            for (int c = 0; c < 4 * b; ++c) {
                const double* z = zv.col(c / 4).data();
                const double* ub = utbar_.col(c).data();
                double* tb = tbar_[l - 1].col(c).data();
                for (int r = 0; r < prev; ++r) tb[r] = z[r] > 0.0 ? ub[r] : 0.0;
            }
        }
    }
}

void JetEngine::flush_gradient(Eigen::VectorXd& grad_flat) const {
    if (grad_flat.size() != config_.parameter_count())
        throw std::invalid_argument("JetEngine::flush_gradient: bad gradient size");
    for (int l = 0; l < config_.layer_count(); ++l) {
        const auto& slice = layout_[static_cast<std::size_t>(l)];
        Eigen::Map<RowMajorMatrix>(grad_flat.data() + slice.weight_offset, slice.rows,
                                   slice.cols) += weight_grad_[l];
        Eigen::Map<Eigen::VectorXd>(grad_flat.data() + slice.bias_offset, slice.rows) +=
            bias_grad_[l];
    }
}

}  // namespace sdf4d::detail
