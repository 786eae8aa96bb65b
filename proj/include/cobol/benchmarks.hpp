#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cobol/domain.hpp"

namespace cobol {

/// Test objective under the minimize convention.
struct Benchmark {
    std::string name;
    DomainBox box;
    std::optional<Vec> x_star;
    double f_star = 0.0;
    std::function<double(const Vec&)> f;

    int dim() const { return box.dim(); }
    double operator()(const Vec& x) const;
    /// Largest value over a 10^4-point Sobol scan of the box (cached).
    double f_max() const;
};

double ackley(const Vec& x);        // a = 20, b = 0.2, c = 2 pi
double holder_table(const Vec& x);  // negated, minimum -19.2085
double rastrigin(const Vec& x);     // 10 d + sum x^2 - 10 cos(2 pi x)
double michalewicz(const Vec& x);   // m = 10, leading minus sign
double rosenbrock(const Vec& x);

/// ackley4, holder2, rastrigin1, rastrigin2, michalewicz5, rosenbrock3.
const Benchmark& benchmark(const std::string& name);
std::vector<std::string> benchmark_names();
double benchmark_eval(const std::string& name, const Vec& x);

/// f(x) + N(0, sigma^2).
double noisy_eval(const Benchmark& bench, const Vec& x, double sigma, std::mt19937_64& rng);

}  // namespace cobol
