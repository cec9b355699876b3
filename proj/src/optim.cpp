#include "dfr/optim.hpp"

namespace dfr {

void ParameterSet::add(std::string name, const Tensor& value) {
    if (!value.defined() || !value.requires_grad()) {
        throw ContractError("parameter '" + name + "' must be a tracked tensor");
    }
    if (contains(name)) {
        throw ContractError("duplicate parameter name '" + name + "'");
    }
    items_.push_back({std::move(name), value});
}

void ParameterSet::merge(const ParameterSet& other) {
    for (const auto& p : other.items_) add(p.name, p.value);
}

const Tensor& ParameterSet::get(const std::string& name) const {
    for (const auto& p : items_) {
        if (p.name == name) return p.value;
    }
    throw ContractError("no parameter named '" + name + "'");
}

bool ParameterSet::contains(const std::string& name) const {
    for (const auto& p : items_) {
        if (p.name == name) return true;
    }
    return false;
}

void ParameterSet::zero_grad() {
    for (auto& p : items_) p.value.zero_grad();
}

void SgdOptimizer::step(ParameterSet& params) {
    for (auto& p : params.items()) {
        if (!p.value.has_grad()) {
            throw ContractError("sgd step: parameter '" + p.name + "' has no gradient");
        }
        const auto& grad = p.value.grad();
        auto& data = p.value.data();
        auto& vel = velocity_[p.name];
        if (vel.size() != data.size()) vel.assign(data.size(), 0.0);
        for (std::size_t i = 0; i < data.size(); ++i) {
            vel[i] = cfg_.momentum * vel[i] + (grad[i] + cfg_.weight_decay * data[i]);
            data[i] -= cfg_.lr * vel[i];
        }
        p.value.zero_grad();
    }
}

}  // namespace dfr
