#include "kbie/gradcheck.hpp"

#include <cmath>

#include "kbie/errors.hpp"

namespace kbie {

double grad_rel_err(double analytic, double numeric) {
    double denom = std::max(std::fabs(analytic) + std::fabs(numeric), 1e-2);
    return std::fabs(analytic - numeric) / denom;
}

double finite_difference(const GraphBuilder& build, Parameter& p, size_t elem, double step) {
    double saved = p.value.values[elem];
    auto eval = [&](double x) {
        p.value.values[elem] = x;
        Tape tape;
        Tape::NodeId loss = build(tape);
        double v = tape.value(loss).values[0];
        return v;
    };
    double hi = eval(saved + step);
    double lo = eval(saved - step);
    p.value.values[elem] = saved;
    return (hi - lo) / (2.0 * step);
}

GradCheckReport gradient_check(const GraphBuilder& build, std::span<Parameter* const> params,
                               double tol, double step) {
    if (tol <= 0) throw ContractError("gradient_check: tol must be positive");
    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        Tape::NodeId loss = build(tape);
        tape.backward(loss);
    }
    GradCheckReport report;
    report.tol = tol;
    for (Parameter* p : params) {
        GradCheckEntry entry;
        entry.param = p->name;
        for (size_t i = 0; i < p->value.values.size(); ++i) {
            double numeric = finite_difference(build, *p, i, step);
            double err = grad_rel_err(p->grad.values[i], numeric);
            entry.max_rel_err = std::max(entry.max_rel_err, err);
        }
        report.worst = std::max(report.worst, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

GradCheckReport gradient_check(const GraphBuilder& build, const std::vector<Parameter*>& params,
                               double tol, double step) {
    return gradient_check(build, std::span<Parameter* const>(params), tol, step);
}

}  // namespace kbie
