#include <cmath>
#include "lixelkit/diffcore/ops.hpp"
#include "lixelkit/heatmap/heatmap.hpp"

namespace lixelkit::heatmap {

namespace {

Tensor index_ramp(std::size_t length) {
    std::vector<double> v(length);
    for (std::size_t i = 0; i < length; ++i) v[i] = static_cast<double>(i);
    return Tensor::from({length}, std::move(v));
}

void check_axis(const Tensor& t, const char* op) {
    if (t.dim() == 0 || t.shape().back() < 2) {
        throw ShapeError(std::string(op) + ": need at least 2 cells on the last axis, got " +
                         diff::to_string(t.shape()));
    }
}

}  // namespace

Tensor expectation_1d(const Tensor& probs) {
    check_axis(probs, "expectation_1d");
    return diff::sum(probs * index_ramp(probs.shape().back()), -1);
}

Tensor soft_argmax_1d(const Tensor& logits) {
    check_axis(logits, "soft_argmax_1d");
    for (double v : logits.data()) {
        if (!std::isfinite(v)) throw Error("soft_argmax_1d: non-finite logit");
    }
    return expectation_1d(diff::softmax(logits, -1));
}

Tensor normalize_rows(const Tensor& values) { return values / diff::sum(values, -1, true); }

LixelHeatmapSet LixelHeatmapSet::from_logits(const Tensor& lx, const Tensor& ly, const Tensor& lz) {
    return {diff::softmax(lx, -1), diff::softmax(ly, -1), diff::softmax(lz, -1)};
}

ContinuousCoords decode(const LixelHeatmapSet& h) {
    const Tensor parts[3] = {expectation_1d(h.hx), expectation_1d(h.hy), expectation_1d(h.hz)};
    if (parts[0].shape() != parts[1].shape() || parts[0].shape() != parts[2].shape()) {
        throw ShapeError("decode: landmark counts differ across axes");
    }
    return {diff::stack(parts, -1)};
}

}  // namespace lixelkit::heatmap
