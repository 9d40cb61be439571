#pragma once

#include <string>

#include "kfp/operator_spec.hpp"

namespace fixtures {

inline std::string path(const std::string& name) {
    return std::string(KFP_FIXTURE_DIR) + "/" + name;
}

// heat operator: N = q = 1, B = 0, a = 1
inline kfp::OperatorSpec heat() {
    kfp::Matrix B(1, 1);
    B << 0.0;
    kfp::Matrix a(1, 1);
    a << 1.0;
    return kfp::OperatorSpec::make(B, {1}, kfp::CoefficientTrack::constant(a));
}

// scalar Ornstein-Uhlenbeck drift: B = [[1]], Tr B = 1
inline kfp::OperatorSpec ou() {
    kfp::Matrix B(1, 1);
    B << 1.0;
    kfp::Matrix a(1, 1);
    a << 1.0;
    return kfp::OperatorSpec::make(B, {1}, kfp::CoefficientTrack::constant(a));
}

// Kolmogorov operator: a(t) u_x1x1 + x1 u_x2 - u_t, constant a = alpha
inline kfp::OperatorSpec kolmogorov(double alpha = 1.0) {
    kfp::Matrix B(2, 2);
    B << 0, 0, 1, 0;
    kfp::Matrix a(1, 1);
    a << alpha;
    return kfp::OperatorSpec::make(B, {1, 1}, kfp::CoefficientTrack::constant(a));
}

// same drift with a(t) alternating between 1/2 and 2 every quarter unit
inline kfp::OperatorSpec kolmogorov_piecewise() {
    kfp::Matrix B(2, 2);
    B << 0, 0, 1, 0;
    kfp::CoefficientTrack track;
    track.q = 1;
    for (int k = 0; k < 8; ++k) {
        track.breakpoints.push_back(0.25 * k);
        kfp::Matrix a(1, 1);
        a << (k % 2 == 0 ? 0.5 : 2.0);
        track.pieces.push_back(a);
    }
    return kfp::OperatorSpec::make(B, {1, 1}, std::move(track), 0.5);
}

// kappa = 2 chain: N = 3, m = (1,1,1), subdiagonal ones, Q = 9
inline kfp::OperatorSpec chain3() {
    kfp::Matrix B = kfp::Matrix::Zero(3, 3);
    B(1, 0) = 1.0;
    B(2, 1) = 1.0;
    kfp::Matrix a(1, 1);
    a << 1.0;
    return kfp::OperatorSpec::make(B, {1, 1, 1}, kfp::CoefficientTrack::constant(a));
}

// nondegenerate 2-d heat: N = q = 2, B = 0, Q = 2
inline kfp::OperatorSpec flat2() {
    kfp::Matrix B = kfp::Matrix::Zero(2, 2);
    return kfp::OperatorSpec::make(B, {2},
                                   kfp::CoefficientTrack::constant(kfp::Matrix::Identity(2, 2)));
}

} // namespace fixtures
