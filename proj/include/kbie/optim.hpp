#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "kbie/tensor.hpp"

namespace kbie {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive-moment optimizer with bias correction. Gradients are zeroed after
// each step; callers accumulate fresh gradients via Tape::backward between
// steps.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(std::span<Parameter* const> params);
    void step(const std::vector<Parameter*>& params) { step(std::span<Parameter* const>(params)); }

    int64_t steps() const { return step_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };

    AdamConfig cfg_;
    int64_t step_ = 0;
    std::unordered_map<Parameter*, Moments> moments_;
};

}  // namespace kbie
