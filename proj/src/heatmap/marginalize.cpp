#include "lixelkit/diffcore/ops.hpp"
#include "lixelkit/heatmap/heatmap.hpp"

namespace lixelkit::heatmap {

std::string to_string(MarginalMethod method) {
    switch (method) {
        case MarginalMethod::avg: return "avg";
        case MarginalMethod::max: return "max";
        case MarginalMethod::weighted_sum: return "weighted_sum";
    }
    return "unknown";
}

MarginalMethod parse_marginal_method(const std::string& name) {
    if (name == "avg") return MarginalMethod::avg;
    if (name == "max") return MarginalMethod::max;
    if (name == "weighted_sum") return MarginalMethod::weighted_sum;
    throw Error("unknown marginalization method '" + name + "'");
}

namespace {

Tensor reduce_one(const Tensor& f, int axis, MarginalMethod method, const Tensor& weights) {
    switch (method) {
        case MarginalMethod::avg: return diff::mean(f, axis);
        case MarginalMethod::max: return diff::max(f, axis);
        case MarginalMethod::weighted_sum: {
            const std::size_t len = f.size(axis);
            if (!weights.defined() || weights.numel() != len) {
                throw ShapeError("marginalize: weighted_sum needs " + std::to_string(len) + " weights");
            }
            // Broadcast the weight vector along the reduced axis.
            diff::Shape ws(f.dim(), 1);
            ws[diff::normalize_axis(axis, f.dim(), "marginalize")] = len;
            return diff::sum(f * diff::reshape(weights, ws), axis);
        }
    }
    throw Error("marginalize: unknown method");
}

}  // namespace

Tensor marginalize(const Tensor& feature, MarginalAxis axis, MarginalMethod method, const Tensor& weights) {
    if (feature.dim() < 2) throw ShapeError("marginalize: need [..., H, W], got " + diff::to_string(feature.shape()));
    switch (axis) {
        case MarginalAxis::x: return reduce_one(feature, -1, method, weights);
        case MarginalAxis::y: return reduce_one(feature, -2, method, weights);
        case MarginalAxis::xy: {
            diff::Shape flat(feature.shape().begin(), feature.shape().end() - 2);
            flat.push_back(feature.size(-2) * feature.size(-1));
            return reduce_one(diff::reshape(feature, flat), -1, method, weights);
        }
    }
    throw Error("marginalize: unknown axis");
}

}  // namespace lixelkit::heatmap
