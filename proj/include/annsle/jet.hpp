#pragma once

#include <array>
#include <cmath>
#include <complex>

namespace annsle {

using cplx = std::complex<double>;

// Truncated Taylor expansion c[0] + c[1] e + ... + c[N] e^N of a function of one
// complex variable around a fixed base point.  Arithmetic is exact up to order N.
template <int N>
struct Jet {
    std::array<cplx, N + 1> c{};

    Jet() = default;
    explicit Jet(cplx v) { c[0] = v; }

    static Jet variable(cplx z0)
    {
        Jet j(z0);
        if constexpr (N >= 1) j.c[1] = 1.0;
        return j;
    }

    static Jet constant(cplx v) { return Jet(v); }

    cplx value() const { return c[0]; }

    // k-th derivative at the base point.
    cplx derivative(int k) const
    {
        double f = 1.0;
        for (int i = 2; i <= k; ++i) f *= i;
        return f * c[k];
    }

    Jet& operator+=(const Jet& o)
    {
        for (int k = 0; k <= N; ++k) c[k] += o.c[k];
        return *this;
    }
    Jet& operator-=(const Jet& o)
    {
        for (int k = 0; k <= N; ++k) c[k] -= o.c[k];
        return *this;
    }
    Jet& operator*=(cplx s)
    {
        for (auto& v : c) v *= s;
        return *this;
    }
    Jet& operator+=(cplx s)
    {
        c[0] += s;
        return *this;
    }
    Jet& operator-=(cplx s)
    {
        c[0] -= s;
        return *this;
    }

    Jet operator-() const
    {
        Jet r;
        for (int k = 0; k <= N; ++k) r.c[k] = -c[k];
        return r;
    }

    double abs_sum() const
    {
        double s = 0.0;
        for (const auto& v : c) s += std::abs(v);
        return s;
    }
};

template <int N>
Jet<N> operator+(Jet<N> a, const Jet<N>& b) { return a += b; }
template <int N>
Jet<N> operator-(Jet<N> a, const Jet<N>& b) { return a -= b; }
template <int N>
Jet<N> operator+(Jet<N> a, cplx s) { return a += s; }
template <int N>
Jet<N> operator+(cplx s, Jet<N> a) { return a += s; }
template <int N>
Jet<N> operator-(Jet<N> a, cplx s) { return a -= s; }
template <int N>
Jet<N> operator-(cplx s, const Jet<N>& a) { return (-a) += s; }
template <int N>
Jet<N> operator*(Jet<N> a, cplx s) { return a *= s; }
template <int N>
Jet<N> operator*(cplx s, Jet<N> a) { return a *= s; }
template <int N>
Jet<N> operator/(Jet<N> a, cplx s) { return a *= (1.0 / s); }

template <int N>
Jet<N> operator*(const Jet<N>& a, const Jet<N>& b)
{
    Jet<N> r;
    for (int k = 0; k <= N; ++k) {
        cplx s = 0.0;
        for (int i = 0; i <= k; ++i) s += a.c[i] * b.c[k - i];
        r.c[k] = s;
    }
    return r;
}

template <int N>
Jet<N> operator/(const Jet<N>& a, const Jet<N>& b)
{
    Jet<N> q;
    const cplx inv = 1.0 / b.c[0];
    for (int k = 0; k <= N; ++k) {
        cplx s = a.c[k];
        for (int i = 0; i < k; ++i) s -= q.c[i] * b.c[k - i];
        q.c[k] = s * inv;
    }
    return q;
}

template <int N>
Jet<N> operator/(cplx s, const Jet<N>& b)
{
    return Jet<N>(s) / b;
}

// f(a) where f has Taylor coefficients t[0..N] at a.c[0].
template <int N>
Jet<N> compose(const std::array<cplx, N + 1>& t, const Jet<N>& a)
{
    Jet<N> d = a;
    d.c[0] = 0.0;
    Jet<N> r(t[N]);
    for (int k = N - 1; k >= 0; --k) r = r * d + t[k];
    return r;
}

// Jet of w -> a(s * w + b) given the jet of a at s * w0 + b: coefficient k picks up s^k.
template <int N>
Jet<N> rescale(Jet<N> a, cplx s)
{
    cplx f = 1.0;
    for (int k = 1; k <= N; ++k) {
        f *= s;
        a.c[k] *= f;
    }
    return a;
}

// Jet of f' from the jet of f (one order is lost).
template <int N>
Jet<N - 1> derive(const Jet<N>& a)
{
    Jet<N - 1> r;
    for (int k = 0; k < N; ++k) r.c[k] = double(k + 1) * a.c[k + 1];
    return r;
}

// Lower-order truncation.
template <int M, int N>
Jet<M> truncate(const Jet<N>& a)
{
    static_assert(M <= N);
    Jet<M> r;
    for (int k = 0; k <= M; ++k) r.c[k] = a.c[k];
    return r;
}

template <int N>
Jet<N> sin(const Jet<N>& a)
{
    std::array<cplx, N + 1> t;
    const cplx s = std::sin(a.c[0]), co = std::cos(a.c[0]);
    double f = 1.0;
    for (int k = 0; k <= N; ++k) {
        if (k > 0) f /= k;
        switch (k % 4) {
        case 0: t[k] = s * f; break;
        case 1: t[k] = co * f; break;
        case 2: t[k] = -s * f; break;
        default: t[k] = -co * f; break;
        }
    }
    return compose<N>(t, a);
}

template <int N>
Jet<N> cos(const Jet<N>& a)
{
    std::array<cplx, N + 1> t;
    const cplx s = std::sin(a.c[0]), co = std::cos(a.c[0]);
    double f = 1.0;
    for (int k = 0; k <= N; ++k) {
        if (k > 0) f /= k;
        switch (k % 4) {
        case 0: t[k] = co * f; break;
        case 1: t[k] = -s * f; break;
        case 2: t[k] = -co * f; break;
        default: t[k] = s * f; break;
        }
    }
    return compose<N>(t, a);
}

template <int N>
Jet<N> exp(const Jet<N>& a)
{
    std::array<cplx, N + 1> t;
    const cplx e = std::exp(a.c[0]);
    double f = 1.0;
    for (int k = 0; k <= N; ++k) {
        if (k > 0) f /= k;
        t[k] = e * f;
    }
    return compose<N>(t, a);
}

template <int N>
Jet<N> log(const Jet<N>& a)
{
    std::array<cplx, N + 1> t;
    const cplx u = a.c[0];
    t[0] = std::log(u);
    cplx p = 1.0 / u;
    for (int k = 1; k <= N; ++k) {
        t[k] = ((k % 2) ? 1.0 : -1.0) * p / double(k);
        p /= u;
    }
    return compose<N>(t, a);
}

// cot(a/2), using y' = -(1 + y^2)/2 to generate the coefficients.  Far from the real
// axis the recursion loses the (exponentially small) derivatives to cancellation in 1 + y^2,
// so there cot(a/2) = -i - 2i u/(1 - u) with u = e^{ia} is used instead.
template <int N>
Jet<N> cot_half(const Jet<N>& a)
{
    const double im = a.c[0].imag();
    if (std::abs(im) > 1.0) {
        const std::complex<double> i(0.0, 1.0);
        const double sgn = im > 0.0 ? 1.0 : -1.0;
        const Jet<N> u = exp(a * (sgn * i));
        return (-sgn * i) * (1.0 + 2.0 * u / (1.0 - u));
    }
    std::array<cplx, N + 1> t;
    t[0] = 1.0 / std::tan(0.5 * a.c[0]);
    for (int k = 0; k < N; ++k) {
        cplx s = (k == 0) ? 1.0 : 0.0;
        for (int i = 0; i <= k; ++i) s += t[i] * t[k - i];
        t[k + 1] = -s / (2.0 * (k + 1));
    }
    return compose<N>(t, a);
}

// coth(a/2), from y' = (1 - y^2)/2, with the same large-argument form as cot_half.
template <int N>
Jet<N> coth_half(const Jet<N>& a)
{
    const double re = a.c[0].real();
    if (std::abs(re) > 1.0) {
        const double sgn = re > 0.0 ? 1.0 : -1.0;
        const Jet<N> u = exp(a * (-sgn));
        return sgn * (1.0 + 2.0 * u / (1.0 - u));
    }
    std::array<cplx, N + 1> t;
    t[0] = 1.0 / std::tanh(0.5 * a.c[0]);
    for (int k = 0; k < N; ++k) {
        cplx s = (k == 0) ? -1.0 : 0.0;
        for (int i = 0; i <= k; ++i) s += t[i] * t[k - i];
        t[k + 1] = -s / (2.0 * (k + 1));
    }
    return compose<N>(t, a);
}

}  // namespace annsle
