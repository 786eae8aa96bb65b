#pragma once

#include <cstdint>
#include <vector>

#include "cobol/kernel.hpp"

namespace cobol {

/// Queried points and noisy objective values.
struct ObjectiveDataset {
    std::vector<Vec> points;
    std::vector<double> values;
    double noise_sigma = 1e-4;
    double regularizer = 1e-4;

    std::size_t size() const { return points.size(); }
    void add(const Vec& x, double y) {
        points.push_back(x);
        values.push_back(y);
    }
    /// Checks equal lengths, finite values, and (if a box is given) that every
    /// point lies in it.
    void validate(const DomainBox* box = nullptr) const;
};

/// Exact zero-mean GP posterior with a cached factorization of (K + rI).
/// Immutable after construction.
class GPosterior {
public:
    struct Prediction {
        double mean = 0.0;
        double variance = 0.0;
    };

    /// Mean and standard deviation with their gradients in x.
    struct PredictionGrad {
        double mean = 0.0;
        double sd = 0.0;
        Vec dmean;
        Vec dsd;
    };

    GPosterior(KernelConfig kernel, Mat X, Vec y, double regularizer, double beta = 1.0,
               double bound_f = 1.0);
    GPosterior(const KernelConfig& kernel, const ObjectiveDataset& data, double beta = 1.0,
               double bound_f = 1.0);

    Prediction predict(const Vec& x) const;
    PredictionGrad predict_grad(const Vec& x) const;

    double sd(const Vec& x) const;
    /// mu - beta * sigma; fills `grad` when non-null.
    double lcb(const Vec& x, Vec* grad = nullptr) const;
    /// mu + beta * sigma; fills `grad` when non-null.
    double ucb(const Vec& x, Vec* grad = nullptr) const;

    const KernelConfig& kernel() const { return kernel_; }
    const Mat& inputs() const { return X_; }
    const Vec& targets() const { return y_; }
    double regularizer() const { return r_; }
    double jitter() const { return jitter_; }
    double beta() const { return beta_; }
    double bound_f() const { return bound_f_; }
    int dim() const { return kernel_.dim(); }
    std::size_t size() const { return static_cast<std::size_t>(X_.rows()); }

private:
    KernelConfig kernel_;
    Mat X_;
    Vec y_;
    double r_;
    double beta_;
    double bound_f_;
    double jitter_ = 0.0;
    Eigen::LLT<Mat> llt_;
    Vec alpha_;   // (K + rI)^{-1} y
    Mat Kinv_;    // (K + rI)^{-1}
};

GPosterior::Prediction gp_posterior(const Vec& x, const GPosterior& post);

/// Confidence multiplier B_f + sigma * sqrt(2 (gamma_prev + 1 + ln(2/delta))).
double beta_f(double bound_f, double sigma, double gamma_prev, double delta);

/// Greedy estimate of the maximum information gain
///   max_{|S| = n} 0.5 log|I + r^{-1} K_S|
/// over subsets of the candidate rows. The set grows by the max-variance
/// candidate and is then improved by single swaps; both moves only raise the
/// log-determinant, so the value is non-decreasing in n.
double info_gain_estimate(const KernelConfig& cfg, double regularizer, const Mat& candidates, int n);

/// 0.5 log|I + r^{-1} K_S| for an explicit subset of rows.
double information_gain_of(const KernelConfig& cfg, double regularizer, const Mat& points);

/// Result of marginal-likelihood fitting.
struct HyperFit {
    KernelConfig config;
    double nll = 0.0;
    double initial_nll = 0.0;
    bool degenerate = false;  // nothing to fit; config is the initial one
};

/// Negative log marginal likelihood of y under GP(0, k) with noise r.
/// When `grad_log_ls` is non-null it receives d NLL / d log(lengthscale_j).
double negative_log_marginal_likelihood(const Mat& X, const Vec& y, const KernelConfig& cfg,
                                        double regularizer, Vec* grad_log_ls = nullptr);

/// Lengthscale bounds applied during fitting (unit-cube coordinates).
inline constexpr double kMinLengthscale = 1e-3;
inline constexpr double kMaxLengthscale = 1e3;

/// Multi-start local descent on the NLL over log-lengthscales with analytic
/// gradients. The first start is cfg0, followed by `restarts` log-uniform
/// draws. Points are expected in unit-cube coordinates.
HyperFit fit_kernel_hyperparams(const ObjectiveDataset& data, const KernelConfig& cfg0, int restarts,
                                std::uint64_t seed = 1);

}  // namespace cobol
