#pragma once

#include <optional>
#include <vector>

#include "cobol/kernel.hpp"
#include "cobol/nlp.hpp"

namespace cobol {

/// Expert-labelled points. Label 0 = accept, 1 = reject. `steps` records the
/// iteration that produced each label (0 for pre-training labels) and drives
/// the optional window.
struct BeliefDataset {
    std::vector<Vec> points;
    std::vector<int> labels;
    std::vector<int> steps;
    std::optional<int> window;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    void add(const Vec& x, int label, int step = 0);
    void validate() const;
    /// Labels still inside the window at iteration t (all of them when the
    /// window is unbounded).
    BeliefDataset windowed(int t) const;
};

struct ConfidenceSetParams {
    double norm_bound = 1.0;  // B_g
    double beta1 = 0.01;      // likelihood-ratio radius
    double epsilon = 0.01;
    double delta = 0.01;

    void validate() const;
};

/// Latent-scale interval and its sigmoid image.
struct BeliefInterval {
    double lower = 0.0;
    double upper = 0.0;
    double prob_lower = 0.5;
    double prob_upper = 0.5;

    double width() const { return upper - lower; }
};

double sigmoid(double u);
/// log(1 + e^z) without overflow.
double softplus(double z);

/// sum_t z_t * l_t - log(1 + e^{z_t}).
double log_likelihood(const Vec& Z, const std::vector<int>& labels);

/// Likelihood-ratio radius
///   sqrt(32 q B^2 (log(pi^2 t^2 / (6 delta)) + log_cover_proxy)) + 2 eps t
/// with the log covering number replaced by `log_cover_proxy`.
double beta1(double epsilon, double delta, int q, int t, double bound_g, double log_cover_proxy);

/// How the radius is chosen for a given norm bound.
///   Scalar:       alpha1 B_g / reference_bound
///   Lemma:        beta1(...) unscaled
///   ScaledLemma:  alpha1 * beta1(...), i.e. beta1's growth in B_g, q, t
///                 with alpha1 as the leading constant
struct RadiusRule {
    enum class Kind { Scalar, Lemma, ScaledLemma };
    Kind kind = Kind::Scalar;
    double alpha1 = 0.01;
    double reference_bound = 1.0;    // radius scales linearly with B_g from here
    double epsilon = 0.01;
    double delta = 0.01;
    double log_cover_proxy = 0.0;

    double operator()(double bound_g, int q, int t) const;
};

struct MleResult {
    Vec Z;   // latent values at the labelled points
    Vec w;   // whitened coordinates, Z = L w
    double ll = 0.0;
    bool converged = true;
};

/// Cached whitening of the belief Gram matrix (K + jitter I = L L^T) for a
/// fixed dataset and kernel. Functions in the norm ball evaluated at the
/// labelled points are exactly Z = L w with |w| <= B_g; appending a query
/// point x extends L by the row (v(x)^T, s(x)).
class BeliefModel {
public:
    BeliefModel(BeliefDataset data, KernelConfig kernel, double base_jitter = 1e-8);

    struct Augment {
        Vec v;       // L^{-1} k(X, x)
        double s;    // sqrt(k(x,x) + jitter - |v|^2)
        Mat dv;      // d v / d x   (n x d)
        Vec ds;      // d s / d x
    };
    Augment augment(const Vec& x, bool with_grad) const;

    MleResult solve_mle(double bound_g, const NlpOptions& opt = {}) const;

    /// Pointwise interval at x under the ball radius bound_g and the
    /// likelihood floor ll_mle - radius. `mle` seeds the solver.
    BeliefInterval interval(const Vec& x, double bound_g, double radius, const MleResult& mle,
                            const NlpOptions& opt = {}) const;

    /// Joint-problem building blocks in whitened coordinates.
    double likelihood_w(const Vec& w, Vec* grad) const;

    const BeliefDataset& data() const { return data_; }
    const KernelConfig& kernel() const { return kernel_; }
    const Mat& inputs() const { return X_; }
    const Mat& chol() const { return L_; }
    double jitter() const { return jitter_; }
    std::size_t size() const { return data_.size(); }

private:
    BeliefDataset data_;
    KernelConfig kernel_;
    Mat X_;
    Mat L_;
    double jitter_ = 0.0;
};

MleResult solve_mle(const BeliefDataset& data, double bound_g, const KernelConfig& cfg);

BeliefInterval g_interval(const Vec& x, const BeliefDataset& data, const ConfidenceSetParams& params,
                          const KernelConfig& cfg, double ll_mle);

/// Norm-bound doubling: while ll(MLE | B) < ll(MLE | 2B) - radius(2B), double
/// B; at most `max_doublings` times from the incoming value.
struct DoublingResult {
    double bound = 1.0;
    int doublings = 0;
};
DoublingResult maybe_double_norm_bound(const BeliefModel& model, double bound_hat, const RadiusRule& rule,
                                       int t, int max_doublings = 10);
double maybe_double_norm_bound(const BeliefDataset& data, double bound_hat, const RadiusRule& rule,
                               const KernelConfig& cfg, int t);

}  // namespace cobol
