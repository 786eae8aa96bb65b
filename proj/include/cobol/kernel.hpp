#pragma once

#include <vector>

#include "cobol/domain.hpp"

namespace cobol {

/// ARD squared-exponential kernel
///   k(x, x') = s * exp(-0.5 * sum_i ((x_i - x'_i) / l_i)^2)
/// with output scale s in (0, 1] so that k <= 1 everywhere.
struct KernelConfig {
    std::vector<double> lengthscales;
    double output_scale = 1.0;

    static KernelConfig isotropic(int dim, double lengthscale, double output_scale = 1.0);

    int dim() const { return static_cast<int>(lengthscales.size()); }
    /// Throws std::invalid_argument on non-positive lengthscales, an output
    /// scale outside (0, 1], or (when dim >= 0) a dimension mismatch.
    void validate(int dim = -1) const;
};

double kernel_eval(const Vec& x, const Vec& x2, const KernelConfig& cfg);

/// Gram matrix over the rows of X.
Mat gram_matrix(const Mat& X, const KernelConfig& cfg);

/// k(X_i, x) for every row i of X.
Vec cross_kernel(const Mat& X, const Vec& x, const KernelConfig& cfg);

/// Jacobian d k(X_i, x) / d x, one row per data point. `kx` must be
/// cross_kernel(X, x, cfg).
Mat cross_kernel_grad(const Mat& X, const Vec& x, const Vec& kx, const KernelConfig& cfg);

/// Stacks a list of equal-length points into a row matrix.
Mat stack_rows(const std::vector<Vec>& points, int dim);

/// Cholesky factor of (A + jitter * I). Starts at `base_jitter` and escalates
/// x10 (from at least 1e-10) up to `max_jitter`; throws NumericalError if the
/// matrix still is not positive definite.
struct JitteredCholesky {
    Eigen::LLT<Mat> llt;
    double jitter = 0.0;
};
JitteredCholesky factorize_with_jitter(const Mat& A, double base_jitter, double max_jitter = 1e-2);

}  // namespace cobol
