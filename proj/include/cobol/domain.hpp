#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cobol {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when a factorization or solve fails after all jitter escalation.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Axis-aligned compact search domain. Points are stored in original units;
/// the surrogates work in the rescaled unit cube.
struct DomainBox {
    Vec lower;
    Vec upper;

    DomainBox() = default;
    DomainBox(Vec lo, Vec hi);

    static DomainBox unit(int dim);

    int dim() const { return static_cast<int>(lower.size()); }
    bool contains(const Vec& x, double tol = 0.0) const;
    Vec clamp(const Vec& x) const;
    Vec to_unit(const Vec& x) const;
    Vec from_unit(const Vec& u) const;
};

/// `n` points of a `dim`-dimensional Sobol sequence in [0,1)^dim, one per row.
/// A non-zero seed applies a random shift modulo 1 (Cranley-Patterson
/// rotation); seed 0 gives the raw sequence with the origin skipped.
Mat sobol_points(int dim, int n, std::uint64_t seed = 0);

std::vector<double> to_std(const Vec& v);
Vec from_std(const std::vector<double>& v);

}  // namespace cobol
