#include "annsle/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>

namespace annsle {

namespace {

constexpr cplx kI{0.0, 1.0};
constexpr double kPoleRadius = 1e-12;

std::string describe(double p, cplx z)
{
    std::ostringstream os;
    os.precision(17);
    os << "p=" << p << " z=(" << z.real() << "," << z.imag() << ")";
    return os.str();
}

// Reduce z into the fundamental box [-pi,pi] x [-p,p].  Returns the additive
// constant picked up by the value, from H(z + 2ip) = H(z) - 2i.
cplx reduce(double p, cplx& z)
{
    double x = z.real(), y = z.imag();
    x -= kTwoPi * std::round(x / kTwoPi);
    double ky = std::round(y / (2.0 * p));
    y -= 2.0 * p * ky;
    z = cplx(x, y);
    return cplx(0.0, -2.0 * ky);
}

double reduced_pole_distance(bool inverted, double p, cplx z)
{
    double best = std::numeric_limits<double>::infinity();
    for (int m = -1; m <= 1; ++m) {
        for (int k = -2; k <= 2; ++k) {
            double im = inverted ? (2 * k + 1) * p : 2 * k * p;
            best = std::min(best, std::abs(z - cplx(kTwoPi * m, im)));
        }
    }
    return best;
}

// Every Taylor coefficient must have settled relative to its own size, since derivatives
// can be many orders of magnitude smaller than the value.
template <int N>
bool converged(const Jet<N>& term, const Jet<N>& sum, double tol)
{
    const double floor = 1e-30 * tol * std::max(1.0, sum.abs_sum());
    for (int k = 0; k <= N; ++k) {
        const double t = std::abs(term.c[k]);
        if (t > tol * std::abs(sum.c[k]) && t > floor) return false;
    }
    return true;
}

template <int N>
Jet<N> direct_series(bool inverted, double p, cplx z, const KernelConfig& cfg)
{
    const Jet<N> zj = Jet<N>::variable(z);
    const Jet<N> s = sin(zj);
    const Jet<N> c = cos(zj);
    Jet<N> sum = inverted ? Jet<N>() : cot_half(zj);
    const double cz = std::abs(c.c[0]);
    long n = inverted ? 1 : 2;
    for (long k = 0;; ++k, n += 2) {
        if (k >= cfg.max_terms) throw NonConvergent(describe(p, z));
        const double C = std::cosh(n * p);
        const Jet<N> term = 2.0 * s / (C - c);
        sum += term;
        if (C > 2.0 * cz + 1.0 && converged(term, sum, cfg.term_tolerance)) break;
    }
    return sum;
}

template <int N>
Jet<N> reduced_direct(bool inverted, double p, cplx z, const KernelConfig& cfg)
{
    cplx shift = reduce(p, z);
    if (reduced_pole_distance(inverted, p, z) < kPoleRadius)
        throw PoleProximity(describe(p, z));
    Jet<N> j = direct_series<N>(inverted, p, z, cfg);
    j.c[0] += shift;
    return j;
}

template <int N>
Jet<N> kernel_jet_impl(bool inverted, double p, cplx z, const KernelConfig& cfg)
{
    if (!(p > 0.0)) throw InvalidArgument("modulus must be positive, " + describe(p, z));
    if (std::isinf(p)) {
        if (inverted) return Jet<N>();
        if (std::abs(std::remainder(z.real(), kTwoPi)) < kPoleRadius && std::abs(z.imag()) < kPoleRadius)
            throw PoleProximity(describe(p, z));
        return cot_half(Jet<N>::variable(z));
    }
    if (p >= cfg.modular_switch) return reduced_direct<N>(inverted, p, z, cfg);

    cplx shift = reduce(p, z);
    if (reduced_pole_distance(inverted, p, z) < kPoleRadius)
        throw PoleProximity(describe(p, z));
    const double pp = kPi * kPi / p;
    const cplx s = kI * (kPi / p);
    const cplx w = inverted ? kPi + s * z : s * z;
    Jet<N> j = rescale(reduced_direct<N>(false, pp, w, cfg), s) * s;
    j.c[0] += shift - z / p;
    if constexpr (N >= 1) j.c[1] -= 1.0 / p;
    return j;
}

}  // namespace

void KernelConfig::validate() const
{
    if (!(modular_switch > 0.0)) throw InvalidArgument("modular_switch must be positive");
    if (!(term_tolerance > 0.0)) throw InvalidArgument("term_tolerance must be positive");
    if (max_terms < 4) throw InvalidArgument("max_terms must be at least 4");
}

const char* kind_name(KernelKind kind)
{
    switch (kind) {
    case KernelKind::S: return "S";
    case KernelKind::H: return "H";
    case KernelKind::S_I: return "SI";
    case KernelKind::H_I: return "HI";
    }
    return "?";
}

template <int N>
Jet<N> kernel_jet(KernelKind kind, double p, cplx z, const KernelConfig& cfg)
{
    if (kind != KernelKind::H && kind != KernelKind::H_I)
        throw InvalidArgument("kernel_jet takes H or H_I");
    return kernel_jet_impl<N>(kind == KernelKind::H_I, p, z, cfg);
}

template Jet<0> kernel_jet<0>(KernelKind, double, cplx, const KernelConfig&);
template Jet<1> kernel_jet<1>(KernelKind, double, cplx, const KernelConfig&);
template Jet<2> kernel_jet<2>(KernelKind, double, cplx, const KernelConfig&);
template Jet<3> kernel_jet<3>(KernelKind, double, cplx, const KernelConfig&);
template Jet<4> kernel_jet<4>(KernelKind, double, cplx, const KernelConfig&);

cplx eval_H(KernelKind kind, double p, cplx z, int order, const KernelConfig& cfg)
{
    if (order < 0 || order > 4) throw InvalidArgument("derivative order must be in 0..4");
    return kernel_jet<4>(kind, p, z, cfg).derivative(order);
}

cplx H(double p, cplx z)
{
    static const KernelConfig cfg;
    return kernel_jet_impl<0>(false, p, z, cfg).c[0];
}

cplx H_I(double p, cplx z)
{
    static const KernelConfig cfg;
    return kernel_jet_impl<0>(true, p, z, cfg).c[0];
}

double pole_distance(KernelKind kind, double p, cplx z)
{
    const bool inverted = (kind == KernelKind::H_I || kind == KernelKind::S_I);
    if (std::isinf(p)) {
        if (inverted) return std::numeric_limits<double>::infinity();
        return std::abs(z - cplx(kTwoPi * std::round(z.real() / kTwoPi), 0.0));
    }
    reduce(p, z);
    return reduced_pole_distance(inverted, p, z);
}

cplx eval_kernel(KernelKind kind, double p, cplx w, const KernelConfig& cfg)
{
    if (kind != KernelKind::S && kind != KernelKind::S_I)
        throw InvalidArgument("eval_kernel takes S or S_I");
    const bool inverted = kind == KernelKind::S_I;
    if (std::isinf(p)) {
        if (inverted) return 0.0;
        if (std::abs(1.0 - w) < kPoleRadius) throw PoleProximity(describe(p, w));
        return (1.0 + w) / (1.0 - w);
    }
    // Poles e^{np} accumulate at the origin, so w = 0 is never admissible.
    const cplx z = -kI * std::log(w);
    if (!(std::abs(w) > 0.0) || std::abs(w) * pole_distance(kind, p, z) < kPoleRadius)
        throw PoleProximity(describe(p, w));
    return kI * kernel_jet_impl<0>(inverted, p, z, cfg).c[0];
}

double eval_r(double p, const KernelConfig& cfg)
{
    if (std::isinf(p)) return -1.0 / 6.0;
    if (!(p > 0.0)) throw InvalidArgument("r(p) needs p > 0");
    if (p < 1e-2) return r_laurent(p, cfg);
    double sum = 0.0;
    for (long k = 1;; ++k) {
        if (k > cfg.max_terms) throw NonConvergent("r(p) series at p=" + std::to_string(p));
        const double s = std::sinh(k * p);
        const double term = 1.0 / (s * s);
        sum += term;
        if (term < cfg.term_tolerance * std::max(1.0, sum)) break;
    }
    return sum - 1.0 / 6.0;
}

double r_laurent(double p, const KernelConfig& cfg)
{
    if (std::isinf(p)) return -1.0 / 6.0;
    // The Taylor part of H has radius 2p, so the sample point must stay well inside it.
    const double z0 = std::min(1e-3, 0.25 * p);
    auto f = [&](double z) {
        return (kernel_jet_impl<0>(false, p, cplx(z, 0.0), cfg).c[0].real() - 2.0 / z) / z;
    };
    const double f0 = f(z0), f1 = f(0.5 * z0), f2 = f(0.25 * z0);
    const double g0 = (4.0 * f1 - f0) / 3.0;
    const double g1 = (4.0 * f2 - f1) / 3.0;
    return (16.0 * g1 - g0) / 15.0;
}

double eval_R(double p, const KernelConfig& cfg)
{
    if (std::isinf(p)) return 0.0;
    if (!(p > 0.0)) throw InvalidArgument("R(p) needs p > 0");
    auto integrand = [&](double t) {
        if (t > 400.0) return 0.0;
        return eval_r(t, cfg) + 1.0 / 6.0;
    };
    boost::math::quadrature::exp_sinh<double> integrator;
    double error = 0.0, l1 = 0.0;
    double value = 0.0;
    try {
        value = integrator.integrate([&](double u) { return integrand(p + u); }, 1e-13, &error, &l1);
    }
    catch (const std::exception& e) {
        throw QuadratureFailure(std::string("R(p): ") + e.what());
    }
    if (!(error <= 1e-9 * std::max(1.0, l1))) throw QuadratureFailure("R(p) error estimate too large");
    return -value;
}

}  // namespace annsle
