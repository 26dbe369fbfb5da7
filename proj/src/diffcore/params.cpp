#include "lixelkit/diffcore/params.hpp"

#include <algorithm>

namespace lixelkit::diff {

Tensor ParameterSet::add(std::string name, std::string group, Tensor value) {
    if (find(name)) throw Error("parameter set: duplicate name '" + name + "'");
    value.set_requires_grad(true);
    params_.push_back({std::move(name), std::move(group), value});
    return value;
}

void ParameterSet::add_buffer(std::string name, Tensor value) { buffers_.push_back({std::move(name), value}); }

const Parameter* ParameterSet::find(const std::string& name) const {
    auto it = std::find_if(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
    return it == params_.end() ? nullptr : &*it;
}

std::size_t ParameterSet::count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
}

std::size_t ParameterSet::count(const std::string& group) const {
    std::size_t n = 0;
    for (const auto& p : params_)
        if (p.group == group) n += p.value.numel();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) p.value.zero_grad();
}

}  // namespace lixelkit::diff
