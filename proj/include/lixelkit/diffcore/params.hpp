#pragma once

#include <span>
#include <string>
#include <vector>

#include "lixelkit/diffcore/tensor.hpp"

namespace lixelkit::diff {

/// A trainable leaf. `group` tags the sub-network that owns it (e.g. "stem",
/// "posenet", "meshnet") so gradient provenance can be probed per group.
struct Parameter {
    std::string name;
    std::string group;
    Tensor value;
};

/// Non-trainable named state that still belongs in a checkpoint.
struct Buffer {
    std::string name;
    Tensor value;
};

class ParameterSet {
public:
    /// Registers `value` (marked requires_grad) and returns a handle to it.
    Tensor add(std::string name, std::string group, Tensor value);
    void add_buffer(std::string name, Tensor value);

    std::span<Parameter> params() { return params_; }
    std::span<const Parameter> params() const { return params_; }
    std::span<Buffer> buffers() { return buffers_; }
    std::span<const Buffer> buffers() const { return buffers_; }

    const Parameter* find(const std::string& name) const;

    /// Total scalar count, optionally restricted to one group.
    std::size_t count() const;
    std::size_t count(const std::string& group) const;

    void zero_grad();

private:
    std::vector<Parameter> params_;
    std::vector<Buffer> buffers_;
};

}  // namespace lixelkit::diff
