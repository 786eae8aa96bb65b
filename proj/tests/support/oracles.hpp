#pragma once

// Reference computations used by the unit and acceptance suites. Nothing here
// touches the library's cached factorizations or solvers.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double rbf(const Vec& a, const Vec& b, const std::vector<double>& ls, double scale = 1.0) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = (a[i] - b[i]) / ls[static_cast<std::size_t>(i)];
        s += d * d;
    }
    return scale * std::exp(-0.5 * s);
}

inline Mat gram(const std::vector<Vec>& X, const std::vector<double>& ls, double scale = 1.0) {
    const auto n = static_cast<Eigen::Index>(X.size());
    Mat K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            K(i, j) = rbf(X[static_cast<std::size_t>(i)], X[static_cast<std::size_t>(j)], ls, scale);
    return K;
}

struct MeanVar {
    double mean;
    double var;
};

// Posterior by LU on (K + rI), no Cholesky and no caching.
inline MeanVar dense_posterior(const std::vector<Vec>& X, const Vec& y, const Vec& x,
                               const std::vector<double>& ls, double r, double scale = 1.0) {
    const auto n = static_cast<Eigen::Index>(X.size());
    if (n == 0) return {0.0, scale};
    Mat A = gram(X, ls, scale);
    A.diagonal().array() += r;
    Vec k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = rbf(X[static_cast<std::size_t>(i)], x, ls, scale);
    Eigen::FullPivLU<Mat> lu(A);
    const Vec a = lu.solve(y);
    const Vec b = lu.solve(k);
    return {k.dot(a), scale - k.dot(b)};
}

inline double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

inline double loglik(const std::vector<double>& z, const std::vector<int>& labels) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double p = sigmoid(z[i]);
        s += labels[i] ? std::log(p) : std::log(1.0 - p);
    }
    return s;
}

// max_Z ll(Z) - mu * q(Z) with q(Z) = Z^T A Z + 2 b^T Z + c, by damped Newton.
// A must be positive definite and mu > 0.
inline Vec newton_penalized(const Mat& A, const Vec& b, double mu, const std::vector<int>& labels, Vec Z) {
    const Eigen::Index n = A.rows();
    auto phi = [&](const Vec& v) {
        std::vector<double> z(v.data(), v.data() + n);
        return loglik(z, labels) - mu * (v.dot(A * v) + 2.0 * b.dot(v));
    };
    for (int it = 0; it < 100; ++it) {
        Vec g(n);
        Mat H = -2.0 * mu * A;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double s = sigmoid(Z[i]);
            g[i] = labels[static_cast<std::size_t>(i)] - s;
            H(i, i) -= s * (1.0 - s);
        }
        g -= 2.0 * mu * (A * Z + b);
        const Vec step = H.ldlt().solve(-g);
        const double f0 = phi(Z);
        double t = 1.0;
        Vec Zn = Z + step;
        while (phi(Zn) < f0 - 1e-14 * std::abs(f0) && t > 1e-10) {
            t *= 0.5;
            Zn = Z + t * step;
        }
        const double moved = (Zn - Z).lpNorm<Eigen::Infinity>();
        Z = Zn;
        if (moved < 1e-11) break;
    }
    return Z;
}

// max ll(Z) s.t. q(Z) <= B^2, via bisection on the multiplier. Returns -inf
// when min q > B^2. q(Z(mu)) is decreasing in mu.
inline double max_ll_on_ball(const Mat& A, const Vec& b, double c, double B, const std::vector<int>& labels,
                             Vec* argmax = nullptr) {
    const Eigen::Index n = A.rows();
    const Vec zmin = A.ldlt().solve(-b);
    auto q = [&](const Vec& v) { return v.dot(A * v) + 2.0 * b.dot(v) + c; };
    if (q(zmin) > B * B * (1.0 + 1e-12)) return -std::numeric_limits<double>::infinity();
    auto ll_of = [&](const Vec& v) { return loglik(std::vector<double>(v.data(), v.data() + n), labels); };
    double lo = std::log(1e-10), hi = std::log(1e10);
    Vec Zlo = newton_penalized(A, b, std::exp(lo), labels, Vec::Zero(n));
    if (q(Zlo) <= B * B) {
        if (argmax) *argmax = Zlo;
        return ll_of(Zlo);
    }
    Vec Zbest = zmin;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Vec Zm = newton_penalized(A, b, std::exp(mid), labels, Zbest);
        if (q(Zm) > B * B) {
            lo = mid;
        } else {
            hi = mid;
            Zbest = Zm;
        }
    }
    if (argmax) *argmax = Zbest;
    return ll_of(Zbest);
}

// Interval at x by scanning the latent value z on a lattice of the given
// spacing: z is feasible iff the best likelihood over Z with (Z, z) in the
// ball reaches ll_max - radius. The feasible set is an interval because that
// best likelihood is concave in z.
struct LatticeInterval {
    double lower = std::numeric_limits<double>::infinity();
    double upper = -std::numeric_limits<double>::infinity();
    double ll_max = -std::numeric_limits<double>::infinity();
};

inline LatticeInterval lattice_interval(const std::vector<Vec>& X, const std::vector<int>& labels, const Vec& x,
                                        const std::vector<double>& ls, double B, double radius, double spacing,
                                        double jitter = 1e-8) {
    const auto n = static_cast<Eigen::Index>(X.size());
    LatticeInterval out;
    Mat K = gram(X, ls);
    K.diagonal().array() += jitter;
    const Mat Kinv = K.inverse();
    out.ll_max = max_ll_on_ball(Kinv, Vec::Zero(n), 0.0, B, labels);

    std::vector<Vec> Xa = X;
    Xa.push_back(x);
    Mat Ka = gram(Xa, ls);
    Ka.diagonal().array() += jitter;
    const Mat P = Ka.inverse();
    const Mat A = P.topLeftCorner(n, n);
    const Vec pz = P.topRightCorner(n, 1);
    const double pzz = P(n, n);
    const double cap = B * std::sqrt(Ka(n, n));
    const int steps = static_cast<int>(std::floor(cap / spacing));
    for (int i = -steps; i <= steps; ++i) {
        const double z = i * spacing;
        const double best = max_ll_on_ball(A, z * pz, pzz * z * z, B, labels);
        if (best >= out.ll_max - radius) {
            out.lower = std::min(out.lower, z);
            out.upper = std::max(out.upper, z);
        }
    }
    return out;
}

// Lower end of the feasible latent range at x by bisection between the ball
// floor and the minimum-norm extension of the constrained MLE (which is
// always feasible). The dataset part is factored once.
struct BisectionLower {
    std::vector<Vec> X;
    std::vector<int> labels;
    std::vector<double> ls;
    double B = 1.0;
    double radius = 0.01;
    double jitter = 1e-8;
    double ll_max = 0.0;
    Vec Zmle;

    BisectionLower(std::vector<Vec> X_, std::vector<int> labels_, std::vector<double> ls_, double B_, double radius_,
                   double jitter_ = 1e-8)
        : X(std::move(X_)), labels(std::move(labels_)), ls(std::move(ls_)), B(B_), radius(radius_), jitter(jitter_) {
        const auto n = static_cast<Eigen::Index>(X.size());
        Mat K = gram(X, ls);
        K.diagonal().array() += jitter;
        ll_max = max_ll_on_ball(K.inverse(), Vec::Zero(n), 0.0, B, labels, &Zmle);
    }

    double operator()(const Vec& x, int iters = 40) const {
        const auto n = static_cast<Eigen::Index>(X.size());
        std::vector<Vec> Xa = X;
        Xa.push_back(x);
        Mat Ka = gram(Xa, ls);
        Ka.diagonal().array() += jitter;
        const Mat P = Ka.inverse();
        const Mat A = P.topLeftCorner(n, n);
        const Vec pz = P.topRightCorner(n, 1);
        const double pzz = P(n, n);
        auto feasible = [&](double z) {
            return max_ll_on_ball(A, z * pz, pzz * z * z, B, labels) >= ll_max - radius;
        };
        const double cap = B * std::sqrt(Ka(n, n));
        if (feasible(-cap)) return -cap;
        double lo = -cap;
        double hi = -pz.dot(Zmle) / pzz;
        for (int i = 0; i < iters; ++i) {
            const double mid = 0.5 * (lo + hi);
            (feasible(mid) ? hi : lo) = mid;
        }
        return hi;
    }
};

}  // namespace oracle
