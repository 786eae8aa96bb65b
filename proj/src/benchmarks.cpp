#include "cobol/benchmarks.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace cobol {

namespace {

constexpr double kPi = std::numbers::pi;

Vec constant(int d, double v) { return Vec::Constant(d, v); }

struct Entry {
    Benchmark bench;
    mutable std::once_flag once;
    mutable double fmax = 0.0;
};

std::map<std::string, Entry>& registry() {
    static std::map<std::string, Entry> reg = [] {
        std::map<std::string, Entry> r;
        auto add = [&](const std::string& name, DomainBox box, std::optional<Vec> xs, double fs,
                       std::function<double(const Vec&)> f) {
            Entry& e = r[name];
            e.bench.name = name;
            e.bench.box = std::move(box);
            e.bench.x_star = std::move(xs);
            e.bench.f_star = fs;
            e.bench.f = std::move(f);
        };
        add("ackley4", DomainBox(constant(4, -1.0), constant(4, 1.0)), Vec::Zero(4), 0.0, ackley);
        Vec h(2);
        h << 8.05502, 9.66459;
        add("holder2", DomainBox(constant(2, 0.0), constant(2, 10.0)), h, -19.2085, holder_table);
        add("rastrigin1", DomainBox(constant(1, -5.12), constant(1, 5.12)), Vec::Zero(1), 0.0, rastrigin);
        add("rastrigin2", DomainBox(constant(2, -5.12), constant(2, 5.12)), Vec::Zero(2), 0.0, rastrigin);
        add("michalewicz5", DomainBox(constant(5, 0.0), constant(5, kPi)), std::nullopt, -4.687658, michalewicz);
        add("rosenbrock3", DomainBox(constant(3, -5.0), constant(3, 10.0)), Vec::Ones(3), 0.0, rosenbrock);
        return r;
    }();
    return reg;
}

const Entry& entry(const std::string& name) {
    auto& reg = registry();
    auto it = reg.find(name);
    if (it == reg.end()) throw std::invalid_argument("unknown benchmark: " + name);
    return it->second;
}

}  // namespace

double ackley(const Vec& x) {
    const double d = static_cast<double>(x.size());
    const double s2 = x.squaredNorm() / d;
    const double sc = (2.0 * kPi * x.array()).cos().sum() / d;
    return -20.0 * std::exp(-0.2 * std::sqrt(s2)) - std::exp(sc) + 20.0 + std::numbers::e;
}

double holder_table(const Vec& x) {
    if (x.size() != 2) throw std::invalid_argument("holder_table: needs 2 inputs");
    const double r = std::sqrt(x[0] * x[0] + x[1] * x[1]);
    return -std::abs(std::sin(x[0]) * std::cos(x[1]) * std::exp(std::abs(1.0 - r / kPi)));
}

double rastrigin(const Vec& x) {
    double s = 10.0 * static_cast<double>(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) s += x[i] * x[i] - 10.0 * std::cos(2.0 * kPi * x[i]);
    return s;
}

double michalewicz(const Vec& x) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double t = std::sin(static_cast<double>(i + 1) * x[i] * x[i] / kPi);
        s += std::sin(x[i]) * std::pow(t, 20);
    }
    return -s;
}

double rosenbrock(const Vec& x) {
    double s = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
        const double a = x[i + 1] - x[i] * x[i];
        const double b = x[i] - 1.0;
        s += 100.0 * a * a + b * b;
    }
    return s;
}

double Benchmark::operator()(const Vec& x) const {
    if (x.size() != dim())
        throw std::invalid_argument("benchmark " + name + ": expected " + std::to_string(dim()) + " inputs");
    return f(x);
}

double Benchmark::f_max() const {
    const Entry& e = entry(name);
    std::call_once(e.once, [&] {
        const Mat u = sobol_points(dim(), 10000);
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < u.rows(); ++i) m = std::max(m, f(box.from_unit(u.row(i).transpose())));
        e.fmax = m;
    });
    return e.fmax;
}

const Benchmark& benchmark(const std::string& name) { return entry(name).bench; }

std::vector<std::string> benchmark_names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : registry()) out.push_back(k);
    return out;
}

double benchmark_eval(const std::string& name, const Vec& x) { return benchmark(name)(x); }

double noisy_eval(const Benchmark& bench, const Vec& x, double sigma, std::mt19937_64& rng) {
    if (sigma < 0.0) throw std::invalid_argument("noisy_eval: negative sigma");
    const double v = bench(x);
    if (sigma == 0.0) return v;
    std::normal_distribution<double> noise(0.0, sigma);
    return v + noise(rng);
}

}  // namespace cobol
