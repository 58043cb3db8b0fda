#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kbie/tape.hpp"
#include "kbie/tensor.hpp"

namespace kbie {

// Builds a loss graph from the current parameter values. Must be
// deterministic given the parameters (tapes are constructed with a fixed
// dropout seed, so dropout masks repeat across rebuilds).
using GraphBuilder = std::function<Tape::NodeId(Tape&)>;

struct GradCheckEntry {
    std::string param;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double worst = 0.0;
    double tol = 0.0;

    bool pass() const { return worst < tol; }
};

// Relative error between an analytic and a numeric gradient component.
// The denominator is floored so that finite-difference noise around a true
// zero gradient does not register as failure.
double grad_rel_err(double analytic, double numeric);

// Central finite difference of the builder's loss w.r.t. one element.
double finite_difference(const GraphBuilder& build, Parameter& p, size_t elem, double step);

// Compares Tape::backward against central finite differences for every
// element of every parameter. step defaults to 1e-5.
GradCheckReport gradient_check(const GraphBuilder& build, std::span<Parameter* const> params,
                               double tol, double step = 1e-5);

GradCheckReport gradient_check(const GraphBuilder& build, const std::vector<Parameter*>& params,
                               double tol, double step = 1e-5);

}  // namespace kbie
