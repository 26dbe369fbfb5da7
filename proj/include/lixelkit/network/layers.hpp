#pragma once

#include <string>

#include "lixelkit/diffcore/batch_norm.hpp"
#include "lixelkit/diffcore/conv.hpp"
#include "lixelkit/diffcore/params.hpp"
#include "lixelkit/diffcore/rng.hpp"
#include "lixelkit/network/config.hpp"

namespace lixelkit::net {

using diff::Tensor;

/// Creates parameters with the configured initialization. Names are
/// prefix + "." + local name; every parameter lands in `group`.
class LayerFactory {
public:
    LayerFactory(diff::ParameterSet& params, diff::Rng& rng, InitScheme init) : params_(params), rng_(rng), init_(init) {}

    /// Weight drawn from N(0, sd) with sd = 1e-3 or sqrt(2 / fan_in).
    Tensor weight(const std::string& name, const std::string& group, diff::Shape shape, std::size_t fan_in);
    Tensor constant(const std::string& name, const std::string& group, diff::Shape shape, double value);
    void buffer(const std::string& name, const Tensor& value) { params_.add_buffer(name, value); }

private:
    diff::ParameterSet& params_;
    diff::Rng& rng_;
    InitScheme init_;
};

struct BatchNorm {
    Tensor gamma, beta;
    diff::BatchNormStats stats;

    BatchNorm() = default;
    BatchNorm(LayerFactory& f, const std::string& name, const std::string& group, std::size_t channels);
    Tensor operator()(const Tensor& x, bool training);
};

/// 3x3 convolution + batch norm + ReLU.
struct ConvBlock {
    Tensor weight;
    BatchNorm bn;
    std::size_t stride = 1;

    ConvBlock() = default;
    ConvBlock(LayerFactory& f, const std::string& name, const std::string& group, std::size_t in, std::size_t out,
              std::size_t stride);
    Tensor operator()(const Tensor& x, bool training);
};

/// Doubles the spatial size: 4x4 transposed conv (stride 2, pad 1) + batch norm + ReLU.
/// `one_d` switches to the [N,C,L] variant.
struct UpBlock {
    Tensor weight;
    BatchNorm bn;
    bool one_d = false;

    UpBlock() = default;
    UpBlock(LayerFactory& f, const std::string& name, const std::string& group, std::size_t in, std::size_t out,
            bool one_d);
    Tensor operator()(const Tensor& x, bool training);
};

struct Linear {
    Tensor weight, bias;

    Linear() = default;
    Linear(LayerFactory& f, const std::string& name, const std::string& group, std::size_t in, std::size_t out);
    Tensor operator()(const Tensor& x) const;
};

/// 1x1 convolution over [N,C,L].
struct Pointwise1d {
    Tensor weight, bias;

    Pointwise1d() = default;
    Pointwise1d(LayerFactory& f, const std::string& name, const std::string& group, std::size_t in, std::size_t out);
    Tensor operator()(const Tensor& x) const;
};

/// 1x1 convolution over [N,C,H,W].
struct Pointwise2d {
    Tensor weight, bias;

    Pointwise2d() = default;
    Pointwise2d(LayerFactory& f, const std::string& name, const std::string& group, std::size_t in, std::size_t out);
    Tensor operator()(const Tensor& x) const;
};

}  // namespace lixelkit::net
