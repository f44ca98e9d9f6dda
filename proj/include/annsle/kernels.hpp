#pragma once

#include <limits>

#include "annsle/errors.hpp"
#include "annsle/jet.hpp"

namespace annsle {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kInfModulus = std::numeric_limits<double>::infinity();

enum class KernelKind { S, H, S_I, H_I };

struct KernelConfig {
    double modular_switch = kPi;
    double term_tolerance = 1e-16;
    long max_terms = 1000000;

    void validate() const;
};

// Series evaluation of S and S_I (the annulus Schwarz kernels, w = e^{iz}).
cplx eval_kernel(KernelKind kind, double p, cplx w, const KernelConfig& cfg = {});

// order-th z-derivative of H or H_I (order 0..4).
cplx eval_H(KernelKind kind, double p, cplx z, int order, const KernelConfig& cfg = {});

// Taylor jet of H or H_I at z up to order N (N <= 4 is instantiated).
template <int N>
Jet<N> kernel_jet(KernelKind kind, double p, cplx z, const KernelConfig& cfg = {});

// Value-only shortcuts used in the inner loops.
cplx H(double p, cplx z);
cplx H_I(double p, cplx z);

// Euclidean distance from z to the pole lattice of H or H_I.
double pole_distance(KernelKind kind, double p, cplx z);

double eval_r(double p, const KernelConfig& cfg = {});
// Laurent-coefficient extraction (H(p,z) - 2/z)/z with two Richardson halvings.
double r_laurent(double p, const KernelConfig& cfg = {});
double eval_R(double p, const KernelConfig& cfg = {});

const char* kind_name(KernelKind kind);

}  // namespace annsle
