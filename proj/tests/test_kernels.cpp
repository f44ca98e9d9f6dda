#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <boost/multiprecision/cpp_complex.hpp>
#include <gtest/gtest.h>

#include "annsle/kernels.hpp"

using namespace annsle;

namespace {

using mp_real = boost::multiprecision::cpp_bin_float_50;
using mp_cplx = boost::multiprecision::cpp_complex_50;

// Symmetric partial sums of -i sum (e^{np} + e^{iz}) / (e^{np} - e^{iz}) over even (odd) n,
// in 50-digit arithmetic, paired n <-> -n until the pair contribution is negligible.
mp_cplx oracle_H(bool odd, double p, const mp_cplx& z)
{
    const mp_cplx I(0, 1);
    const mp_cplx w = exp(I * z);
    auto term = [&](long n) {
        const mp_real a = exp(mp_real(n) * mp_real(p));
        return (mp_cplx(a) + w) / (mp_cplx(a) - w);
    };
    mp_cplx sum = odd ? mp_cplx(0) : term(0);
    for (long k = odd ? 1 : 2;; k += 2) {
        const mp_cplx pair = term(k) + term(-k);
        sum += pair;
        if (abs(pair) < mp_real(1e-40) * (1 + abs(sum)) && k > 4) break;
    }
    return -I * sum;
}

mp_cplx oracle_H(bool odd, double p, std::complex<double> z) { return oracle_H(odd, p, mp_cplx(z.real(), z.imag())); }

std::complex<double> to_double(const mp_cplx& v)
{
    return {static_cast<double>(v.real()), static_cast<double>(v.imag())};
}

// Derivatives by 50-digit central differences of the oracle.
std::complex<double> oracle_H_derivative(bool odd, double p, std::complex<double> z, int order)
{
    const mp_real h("1e-12");
    const mp_cplx z0(z.real(), z.imag());
    auto f = [&](int k) { return oracle_H(odd, p, z0 + mp_cplx(k * h)); };
    switch (order) {
    case 1: return to_double((f(1) - f(-1)) / (2 * h));
    case 2: return to_double((f(1) - 2 * f(0) + f(-1)) / (h * h));
    default: return to_double((f(2) - 2 * f(1) + 2 * f(-1) - f(-2)) / (2 * h * h * h));
    }
}

mp_cplx oracle_S(bool odd, double p, std::complex<double> w)
{
    const mp_cplx W(w.real(), w.imag());
    auto term = [&](long n) {
        const mp_real a = exp(mp_real(n) * mp_real(p));
        return (mp_cplx(a) + W) / (mp_cplx(a) - W);
    };
    mp_cplx sum = odd ? mp_cplx(0) : term(0);
    for (long k = odd ? 1 : 2;; k += 2) {
        const mp_cplx pair = term(k) + term(-k);
        sum += pair;
        if (abs(pair) < mp_real(1e-40) * (1 + abs(sum)) && k > 4) break;
    }
    return sum;
}

const std::vector<double> kModuli{0.3, 0.5, 1.0, 2.0, 5.0};

std::vector<double> x_points()
{
    std::vector<double> xs;
    for (int k = 0; k < 20; ++k) xs.push_back(0.15 + 5.95 * k / 19.0);
    return xs;
}

double rel(std::complex<double> a, std::complex<double> b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(Kernels, HMatchesExtendedPrecisionSum)
{
    for (double p : kModuli)
        for (std::complex<double> z : {std::complex<double>(0.3, 0.0), {1.7, 0.4}, {-2.5, -0.8}, {3.0, 0.2}}) {
            EXPECT_LT(rel(H(p, z), to_double(oracle_H(false, p, z))), 1e-12) << "p=" << p << " z=" << z;
            EXPECT_LT(rel(H_I(p, z), to_double(oracle_H(true, p, z))), 1e-12) << "p=" << p << " z=" << z;
        }
}

TEST(Kernels, FrozenOracleValue)
{
    // 50-digit symmetric sum at p = 0.5, z = 0.3, rounded to double.
    const double frozen = 7.9327791531270337;
    EXPECT_NEAR(to_double(oracle_H(false, 0.5, std::complex<double>(0.3, 0.0))).real(), frozen, 1e-14);
    EXPECT_NEAR(H(0.5, 0.3).real(), frozen, 1e-13);
}

TEST(Kernels, DerivativesMatchOracle)
{
    for (double p : {0.5, 1.0, 3.0})
        for (std::complex<double> z : {std::complex<double>(0.9, 0.1), {2.2, -0.3}})
            for (int order = 1; order <= 3; ++order) {
                EXPECT_LT(rel(eval_H(KernelKind::H, p, z, order), oracle_H_derivative(false, p, z, order)), 1e-8);
                EXPECT_LT(rel(eval_H(KernelKind::H_I, p, z, order), oracle_H_derivative(true, p, z, order)), 1e-8);
            }
}

TEST(Kernels, JetAgreesWithPointwiseDerivatives)
{
    const std::complex<double> z(1.1, 0.25);
    const Jet<4> j = kernel_jet<4>(KernelKind::H, 0.8, z);
    for (int k = 0; k <= 4; ++k) EXPECT_LT(rel(j.derivative(k), eval_H(KernelKind::H, 0.8, z, k)), 1e-12);
}

TEST(Kernels, SeriesKernelsMatchOracle)
{
    for (double p : {0.5, 1.0, 2.0})
        for (std::complex<double> w : {std::complex<double>(0.5, 0.2), {-1.3, 0.7}, {2.0, -0.1}}) {
            EXPECT_LT(rel(eval_kernel(KernelKind::S, p, w), to_double(oracle_S(false, p, w))), 1e-12);
            EXPECT_LT(rel(eval_kernel(KernelKind::S_I, p, w), to_double(oracle_S(true, p, w))), 1e-12);
        }
}

TEST(Kernels, DegenerateModulus)
{
    EXPECT_NEAR(eval_H(KernelKind::H, kInfModulus, 1.0, 0).real(), 1.0 / std::tan(0.5), 1e-15);
    EXPECT_NEAR(std::abs(eval_H(KernelKind::H_I, kInfModulus, 1.0, 0)), 0.0, 1e-15);
    EXPECT_NEAR(H(60.0, 1.0).real(), 1.0 / std::tan(0.5), 1e-14);
}

TEST(Kernels, PolesAreRejected)
{
    EXPECT_THROW(eval_H(KernelKind::H, 1.0, 0.0, 0), PoleProximity);
    EXPECT_THROW(eval_H(KernelKind::H, 1.0, kTwoPi, 1), PoleProximity);
    EXPECT_THROW(eval_H(KernelKind::H_I, 1.0, std::complex<double>(0.0, 1.0), 0), PoleProximity);
    EXPECT_THROW(eval_kernel(KernelKind::S, 1.0, 0.0), PoleProximity);
    EXPECT_THROW(eval_kernel(KernelKind::S, 1.0, std::exp(2.0)), PoleProximity);
    EXPECT_THROW(eval_H(KernelKind::H, -1.0, 1.0, 0), InvalidArgument);
    EXPECT_THROW(eval_H(KernelKind::H, 1.0, 1.0, 7), InvalidArgument);
}

TEST(KernelIdentities, PeriodicityAndOddness)
{
    for (double p : kModuli)
        for (double x : x_points()) {
            const std::complex<double> z(x, 0.1);
            EXPECT_LT(std::abs(H(p, z + kTwoPi) - H(p, z)), 1e-9);
            EXPECT_LT(std::abs(H_I(p, z + kTwoPi) - H_I(p, z)), 1e-9);
            EXPECT_LT(std::abs(H(p, -z) + H(p, z)), 1e-9);
            EXPECT_LT(std::abs(H_I(p, -z) + H_I(p, z)), 1e-9);
        }
}

TEST(KernelIdentities, ImaginaryShift)
{
    const std::complex<double> ip(0.0, 1.0);
    for (double p : kModuli)
        for (double x : x_points()) {
            EXPECT_NEAR(H(p, x + ip * p).imag(), -1.0, 1e-9);
            EXPECT_LT(std::abs(H_I(p, x) - (H(p, x - ip * p) - ip)), 1e-9);
        }
}

TEST(KernelIdentities, ChangeOfModulus)
{
    const std::complex<double> i(0.0, 1.0);
    for (double p : kModuli) {
        const double q = kPi * kPi / p;
        for (double x : x_points()) {
            const std::complex<double> z(x, 0.05);
            const std::complex<double> u = i * kPi / p * z;
            EXPECT_LT(std::abs(H(p, z) - (i * kPi / p * H(q, u) - z / p)), 1e-9);
            EXPECT_LT(std::abs(H_I(p, z) - (i * kPi / p * H(q, kPi + u) - z / p)), 1e-9);
            const auto d = [&](KernelKind k, double m, std::complex<double> a) { return eval_H(k, m, a, 1); };
            const double s = kPi * kPi / (p * p);
            EXPECT_LT(std::abs(d(KernelKind::H, p, z) - (-s * d(KernelKind::H, q, u) - 1.0 / p)), 1e-9);
            EXPECT_LT(std::abs(d(KernelKind::H_I, p, z) - (-s * d(KernelKind::H, q, kPi + u) - 1.0 / p)), 1e-9);
        }
    }
}

TEST(KernelIdentities, HeatTypeEquations)
{
    const double hp = 1e-4;
    for (double p : {0.5, 1.0, 2.0})
        for (std::complex<double> z : {std::complex<double>(0.7, 0.1), {2.0, -0.2}, {4.0, 0.0}})
            for (KernelKind k : {KernelKind::H, KernelKind::H_I}) {
                const std::complex<double> dot =
                    (eval_H(k, p + hp, z, 0) - eval_H(k, p - hp, z, 0)) / (2.0 * hp);
                const std::complex<double> rhs = eval_H(k, p, z, 2) + eval_H(k, p, z, 1) * eval_H(k, p, z, 0);
                EXPECT_LT(std::abs(dot - rhs), 1e-5) << kind_name(k) << " p=" << p;
            }
}

TEST(KernelIdentities, DecayBoundOfHI)
{
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        const double y = 3.0 * (2.0 * U(gen) - 1.0);
        const double p = std::abs(y) + std::log(4.0) + 4.0 * U(gen);
        const std::complex<double> z(kTwoPi * U(gen), y);
        EXPECT_LT(std::abs(H_I(p, z)), 9.0 * std::exp(std::abs(y) - p));
    }
}

namespace {

double oracle_r(double p)
{
    mp_real s = 0;
    for (int k = 1;; ++k) {
        const mp_real t = 1 / pow(sinh(mp_real(k) * mp_real(p)), 2);
        s += t;
        if (t < mp_real(1e-40)) break;
    }
    return static_cast<double>(s - mp_real(1) / 6);
}

}  // namespace

TEST(RFunctions, SeriesAndLaurentAgree)
{
    for (double p : {0.2, 0.5, 1.0, 2.0, 6.0}) {
        EXPECT_NEAR(eval_r(p), oracle_r(p), 1e-12 * std::max(1.0, std::abs(oracle_r(p))));
        EXPECT_NEAR(r_laurent(p), oracle_r(p), 1e-6 * std::max(1.0, std::abs(oracle_r(p))));
    }
    EXPECT_NEAR(eval_r(kInfModulus), -1.0 / 6.0, 1e-15);
}

TEST(RFunctions, DerivativeOfR)
{
    for (double p : {0.5, 1.0, 2.0, 4.0}) {
        const double h = 1e-3;
        const double d = (8.0 * (eval_R(p + h) - eval_R(p - h)) - (eval_R(p + 2 * h) - eval_R(p - 2 * h))) / (12.0 * h);
        EXPECT_NEAR(d, eval_r(p) + 1.0 / 6.0, 1e-6);
    }
    EXPECT_NEAR(eval_R(kInfModulus), 0.0, 1e-15);
    EXPECT_LT(std::abs(eval_R(30.0)), 1e-10);
}

TEST(KernelConfig, ValidatesFields)
{
    KernelConfig cfg;
    cfg.term_tolerance = -1.0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
}
