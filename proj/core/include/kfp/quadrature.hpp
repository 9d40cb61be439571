#pragma once

#include <functional>

#include <Eigen/Dense>

namespace kfp::quad {

struct Rule1d {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

// Gauss-Legendre rule on [-1, 1].
const Rule1d& gauss_legendre(int n);

// Gauss-Hermite rule for the weight exp(-x^2) on the whole line
// (physicists' convention; weights sum to sqrt(pi)).
const Rule1d& gauss_hermite(int n);

// Tensor-product Gauss-Hermite sweep: sum of w * f(z) over the full grid,
// approximating the integral of exp(-|z|^2) f(z) over R^dim.
double hermite_integrate(int dim, int order,
                         const std::function<double(const Eigen::VectorXd&)>& f);

} // namespace kfp::quad
