#include "lixelkit/network/layers.hpp"

#include <cmath>

#include "lixelkit/diffcore/ops.hpp"

namespace lixelkit::net {

Tensor LayerFactory::weight(const std::string& name, const std::string& group, diff::Shape shape,
                            std::size_t fan_in) {
    const double sd = init_ == InitScheme::kaiming ? std::sqrt(2.0 / static_cast<double>(fan_in)) : 1e-3;
    std::vector<double> v(diff::numel(shape));
    for (auto& x : v) x = rng_.normal(0.0, sd);
    return params_.add(name, group, Tensor::from(std::move(shape), std::move(v)));
}

Tensor LayerFactory::constant(const std::string& name, const std::string& group, diff::Shape shape, double value) {
    return params_.add(name, group, Tensor::full(std::move(shape), value));
}

BatchNorm::BatchNorm(LayerFactory& f, const std::string& name, const std::string& group, std::size_t channels)
    : gamma(f.constant(name + ".gamma", group, {channels}, 1.0)),
      beta(f.constant(name + ".beta", group, {channels}, 0.0)),
      stats(diff::BatchNormStats::fresh(channels)) {
    f.buffer(name + ".running_mean", stats.running_mean);
    f.buffer(name + ".running_var", stats.running_var);
}

Tensor BatchNorm::operator()(const Tensor& x, bool training) {
    return diff::batch_norm(x, gamma, beta, stats, training);
}

ConvBlock::ConvBlock(LayerFactory& f, const std::string& name, const std::string& group, std::size_t in,
                     std::size_t out, std::size_t stride_)
    : weight(f.weight(name + ".weight", group, {out, in, 3, 3}, in * 9)),
      bn(f, name + ".bn", group, out),
      stride(stride_) {}

Tensor ConvBlock::operator()(const Tensor& x, bool training) {
    return diff::relu(bn(diff::conv2d(x, weight, {}, diff::Conv2dOptions::uniform(stride, 1)), training));
}

UpBlock::UpBlock(LayerFactory& f, const std::string& name, const std::string& group, std::size_t in, std::size_t out,
                 bool one_d_)
    : weight(one_d_ ? f.weight(name + ".weight", group, {in, out, 4}, in * 2)
                    : f.weight(name + ".weight", group, {in, out, 4, 4}, in * 4)),
      bn(f, name + ".bn", group, out),
      one_d(one_d_) {}

Tensor UpBlock::operator()(const Tensor& x, bool training) {
    auto y = one_d ? diff::conv_transpose1d(x, weight, {}, 2, 1)
                   : diff::conv_transpose2d(x, weight, {}, diff::Conv2dOptions::uniform(2, 1));
    return diff::relu(bn(y, training));
}

Linear::Linear(LayerFactory& f, const std::string& name, const std::string& group, std::size_t in, std::size_t out)
    : weight(f.weight(name + ".weight", group, {out, in}, in)), bias(f.constant(name + ".bias", group, {out}, 0.0)) {}

Tensor Linear::operator()(const Tensor& x) const { return diff::linear(x, weight, bias); }

Pointwise1d::Pointwise1d(LayerFactory& f, const std::string& name, const std::string& group, std::size_t in,
                         std::size_t out)
    : weight(f.weight(name + ".weight", group, {out, in, 1}, in)), bias(f.constant(name + ".bias", group, {out}, 0.0)) {}

Tensor Pointwise1d::operator()(const Tensor& x) const { return diff::conv1d(x, weight, bias); }

Pointwise2d::Pointwise2d(LayerFactory& f, const std::string& name, const std::string& group, std::size_t in,
                         std::size_t out)
    : weight(f.weight(name + ".weight", group, {out, in, 1, 1}, in)),
      bias(f.constant(name + ".bias", group, {out}, 0.0)) {}

Tensor Pointwise2d::operator()(const Tensor& x) const { return diff::conv2d(x, weight, bias); }

}  // namespace lixelkit::net
