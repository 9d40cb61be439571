#include "kfp/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace kfp::quad {

namespace {

Rule1d make_gauss_legendre(int n) {
    Rule1d rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Chebyshev-based initial guess, then Newton on P_n.
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15)
                break;
        }
        rule.nodes(i) = -z;
        rule.nodes(n - 1 - i) = z;
        rule.weights(i) = 2.0 / ((1.0 - z * z) * pp * pp);
        rule.weights(n - 1 - i) = rule.weights(i);
    }
    return rule;
}

Rule1d make_gauss_hermite(int n) {
    Rule1d rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double pim4 = 0.7511255444649425;  // pi^(-1/4)
    const int half = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < half; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        else if (i == 1)
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * rule.nodes(n - 1);
        else if (i == 3)
            z = 1.91 * z - 0.91 * rule.nodes(n - 2);
        else
            z = 2.0 * z - rule.nodes(n - i + 1);

        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1.0)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15)
                break;
        }
        rule.nodes(n - 1 - i) = z;
        rule.nodes(i) = -z;
        rule.weights(n - 1 - i) = 2.0 / (pp * pp);
        rule.weights(i) = rule.weights(n - 1 - i);
    }
    if (n % 2 == 1)
        rule.nodes((n - 1) / 2) = 0.0;
    return rule;
}

const Rule1d& cached(std::map<int, Rule1d>& cache, std::mutex& mtx, int n, Rule1d (*make)(int)) {
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end())
        it = cache.emplace(n, make(n)).first;
    return it->second;
}

} // namespace

const Rule1d& gauss_legendre(int n) {
    if (n < 1)
        throw std::invalid_argument("gauss_legendre: order must be positive");
    static std::map<int, Rule1d> cache;
    static std::mutex mtx;
    return cached(cache, mtx, n, make_gauss_legendre);
}

const Rule1d& gauss_hermite(int n) {
    if (n < 1)
        throw std::invalid_argument("gauss_hermite: order must be positive");
    static std::map<int, Rule1d> cache;
    static std::mutex mtx;
    return cached(cache, mtx, n, make_gauss_hermite);
}

double hermite_integrate(int dim, int order,
                         const std::function<double(const Eigen::VectorXd&)>& f) {
    if (dim < 1 || dim > 3)
        throw std::invalid_argument("hermite_integrate: dim must be 1..3");
    const Rule1d& rule = gauss_hermite(order);
    Eigen::VectorXd z(dim);
    double sum = 0.0;
    if (dim == 1) {
        for (int i = 0; i < order; ++i) {
            z(0) = rule.nodes(i);
            sum += rule.weights(i) * f(z);
        }
    } else if (dim == 2) {
        for (int i = 0; i < order; ++i) {
            z(0) = rule.nodes(i);
            for (int j = 0; j < order; ++j) {
                z(1) = rule.nodes(j);
                sum += rule.weights(i) * rule.weights(j) * f(z);
            }
        }
    } else {
        for (int i = 0; i < order; ++i) {
            z(0) = rule.nodes(i);
            for (int j = 0; j < order; ++j) {
                z(1) = rule.nodes(j);
                const double wij = rule.weights(i) * rule.weights(j);
                for (int k = 0; k < order; ++k) {
                    z(2) = rule.nodes(k);
                    sum += wij * rule.weights(k) * f(z);
                }
            }
        }
    }
    return sum;
}

} // namespace kfp::quad
