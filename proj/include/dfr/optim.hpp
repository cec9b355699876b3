#pragma once

#include <map>
#include <string>
#include <vector>

#include "dfr/tensor.hpp"

namespace dfr {

/// A named learnable tensor.
struct Parameter {
    std::string name;
    Tensor value;
};

/// Ordered collection of parameters with unique names. Iteration order is
/// insertion order, which fixes the update and serialization order.
class ParameterSet {
public:
    void add(std::string name, const Tensor& value);
    void merge(const ParameterSet& other);

    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::vector<Parameter>& items() { return items_; }
    const std::vector<Parameter>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }

    void zero_grad();

private:
    std::vector<Parameter> items_;
};

struct SgdConfig {
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
};

/// Classical momentum SGD:
///   v <- momentum * v + (grad + weight_decay * param)
///   param <- param - lr * v
/// Gradients are zeroed after the step.
class SgdOptimizer {
public:
    explicit SgdOptimizer(SgdConfig cfg) : cfg_(cfg) {}

    void step(ParameterSet& params);

private:
    SgdConfig cfg_;
    std::map<std::string, std::vector<double>> velocity_;
};

}  // namespace dfr
