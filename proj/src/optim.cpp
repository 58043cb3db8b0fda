#include "kbie/optim.hpp"

#include <cmath>

#include "kbie/errors.hpp"

namespace kbie {

void Adam::step(std::span<Parameter* const> params) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (Parameter* p : params) {
        if (p->grad.values.size() != p->value.values.size()) {
            throw ContractError("adam: parameter '" + p->name + "' has no gradient");
        }
        Moments& mo = moments_[p];
        if (mo.m.empty()) {
            mo.m.assign(p->value.values.size(), 0.0);
            mo.v.assign(p->value.values.size(), 0.0);
        }
        for (size_t i = 0; i < p->value.values.size(); ++i) {
            double g = p->grad.values[i];
            mo.m[i] = cfg_.beta1 * mo.m[i] + (1.0 - cfg_.beta1) * g;
            mo.v[i] = cfg_.beta2 * mo.v[i] + (1.0 - cfg_.beta2) * g * g;
            double mhat = mo.m[i] / bc1;
            double vhat = mo.v[i] / bc2;
            p->value.values[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        p->zero_grad();
    }
}

}  // namespace kbie
