#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cobol/belief.hpp"
#include "cobol/gp.hpp"
#include "cobol/nlp.hpp"

namespace cobol {

/// Primal-dual weight and the two gate parameters.
struct DualState {
    double lambda = 1.0;
    double zeta = 0.02;
    double eta = 3.0;
    double g_thr = 0.1;
    double lambda0 = 1.0;

    void validate() const;
};

/// lambda <- max(0, lambda + zeta * z_star).
DualState dual_update(DualState dual, double z_star);

/// True when the latent interval is wider than g_thr (strictly).
bool handover_gate(const BeliefInterval& interval, double g_thr, bool probability_scale = false);

struct AcquisitionOptions {
    int starts = 8;          // local solves per candidate problem
    int screen = 256;        // Sobol points scored to pick the starts
    std::uint64_t seed = 1;  // Sobol shift
    NlpOptions nlp;
    LbfgsOptions lbfgs;
};

/// Multi-start minimization whose starts are `extra` followed by the best
/// screened Sobol points (up to opts.starts in total).
BoxMinimum screened_minimize(const SmoothFunction& f, const DomainBox& box, const std::vector<Vec>& extra,
                             const AcquisitionOptions& opts);

/// argmin over the box of mu - beta sigma.
Vec vanilla_lcb_candidate(const GPosterior& post, const DomainBox& box, const AcquisitionOptions& opts = {});

/// min over the box of mu + beta sigma.
BoxMinimum min_ucb(const GPosterior& post, const DomainBox& box, const AcquisitionOptions& opts = {});

struct NoHarmResult {
    bool pass = false;
    bool lcb_condition = false;
    bool sigma_condition = false;
    double lcb_c = 0.0;
    double min_ucb = 0.0;
    double sigma_u = 0.0;
    double sigma_c = 0.0;
};

/// lcb(x_c) <= min ucb  and  sigma(x_u) <= eta sigma(x_c).
NoHarmResult no_harm_gate(const Vec& x_c, const Vec& x_u, const GPosterior& post, double eta, double min_ucb_value);
NoHarmResult no_harm_gate(const Vec& x_c, const Vec& x_u, const GPosterior& post, double eta, const DomainBox& box,
                          const AcquisitionOptions& opts = {});

/// Everything the belief side of a step needs: the whitened model, the
/// current norm bound, the radius and the MLE at that bound.
struct BeliefState {
    const BeliefModel* model = nullptr;
    double bound = 1.0;
    double radius = 0.01;
    MleResult mle;

    BeliefInterval interval(const Vec& x, const NlpOptions& opt = {}) const {
        return model->interval(x, bound, radius, mle, opt);
    }
};

struct ExpertCandidate {
    Vec x;
    double z_star = 0.0;      // latent lower bound at x from the joint solution
    double objective = 0.0;   // lcb(x) + lambda z_star
    bool fallback = false;    // joint solve failed; x is the vanilla candidate
};

/// Joint solve over (x, w, u):
///   min lcb(x) + lambda (v(x).w + s(x) u)
///   s.t. |(w, u)|^2 <= B^2,  ll(w) >= ll_mle - radius,
/// i.e. min_x lcb(x) + lambda g_lower(x). With lambda = 0 the latent term
/// drops out and x_u is returned with its lower bound.
ExpertCandidate expert_augmented_candidate(const GPosterior& post, const BeliefState& belief, double lambda,
                                           const DomainBox& box, const Vec& x_u,
                                           const AcquisitionOptions& opts = {});

/// Convenience form that builds the belief state from raw inputs.
ExpertCandidate expert_augmented_candidate(const GPosterior& post, const BeliefDataset& ds,
                                           const ConfidenceSetParams& params, const DualState& dual,
                                           const DomainBox& box, const AcquisitionOptions& opts = {});

struct ConstrainedCandidate {
    Vec x;
    double z = 0.0;        // latent value certifying g_lower(x) <= 0
    bool feasible = false; // false: x is the vanilla candidate
};

/// min lcb(x) subject to g_lower(x) <= 0 (expert-constrained LCB).
ConstrainedCandidate cobohl_candidate(const GPosterior& post, const BeliefState& belief, const DomainBox& box,
                                      const Vec& x_u, const AcquisitionOptions& opts = {});

}  // namespace cobol
