#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cobol/domain.hpp"

namespace cobol {

/// Smooth scalar function. Returns f(v); writes the gradient into `grad`
/// when it is non-null (already sized to v.size()).
using SmoothFunction = std::function<double(const Vec& v, Vec* grad)>;

/// Joint evaluation of an objective and its inequality constraints c(v) <= 0.
/// `c` has one entry per constraint and `jac` one row per constraint; both
/// are pre-sized. Gradients are only requested when `want_grad` is true.
struct NlpEval {
    double f = 0.0;
    Vec grad;
    Vec c;
    Mat jac;
};
using NlpEvaluator = std::function<void(const Vec& v, bool want_grad, NlpEval& out)>;

struct NlpProblem {
    NlpEvaluator evaluate;
    int num_constraints = 0;
    Vec lower;
    Vec upper;
    std::vector<Vec> starts;

    /// Builds a problem from separate callables.
    static NlpProblem from_functions(SmoothFunction objective, std::vector<SmoothFunction> constraints,
                                     Vec lower, Vec upper, std::vector<Vec> starts);
};

struct NlpOptions {
    double tol = 1e-6;
    double feas_tol = 1e-6;
    int max_iter = 400;        // inner quasi-Newton iterations per outer round
    int max_outer = 12;
    int max_penalty_increases = 6;
    double penalty0 = 10.0;
    double penalty_growth = 10.0;
    int memory = 10;
};

struct NlpSolution {
    Vec argmin;
    double value = 0.0;
    double max_violation = 0.0;
    bool converged = false;
    int iterations = 0;
    int best_start = -1;
};

/// Augmented-Lagrangian (PHR) outer loop with projected L-BFGS inner solves,
/// run from every start. Returns the lowest-objective point whose violation
/// is within feas_tol (ties by start index); if no start reaches feasibility,
/// the least-violating point with converged = false.
NlpSolution solve_nlp(const NlpProblem& problem, const NlpOptions& options = {});
NlpSolution solve_nlp(const NlpProblem& problem, double tol, double feas_tol, int max_iter);

struct BoxMinimum {
    Vec argmin;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct LbfgsOptions {
    double tol = 1e-6;
    int max_iter = 400;
    int memory = 10;
};

/// Projected L-BFGS on a box. Never returns a point worse than the
/// (projected) start.
BoxMinimum minimize_lbfgsb(const SmoothFunction& f, const Vec& lower, const Vec& upper, const Vec& x0,
                           const LbfgsOptions& options = {});

/// Central differences with step h, clipped to the box when one is given.
SmoothFunction with_finite_differences(std::function<double(const Vec&)> f, double h = 1e-6,
                                       const DomainBox* box = nullptr);

/// Multi-start projected quasi-Newton over a box. Starts are scrambled Sobol
/// points determined by `seed`; the first start with the lowest final value
/// wins.
BoxMinimum minimize_over_box(const SmoothFunction& f, const DomainBox& box, int starts,
                             std::uint64_t seed = 1, const LbfgsOptions& options = {});

/// Same, from explicit starts.
BoxMinimum minimize_over_box(const SmoothFunction& f, const DomainBox& box, const std::vector<Vec>& starts,
                             const LbfgsOptions& options = {});

}  // namespace cobol
