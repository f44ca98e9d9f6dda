#include "annsle/drifts.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace annsle {

namespace {

constexpr cplx kI{0.0, 1.0};

template <int N>
Jet<N> kH(double p, cplx z)
{
    return kernel_jet<N>(KernelKind::H, p, z);
}

template <int N>
Jet<N> kHI(double p, cplx z)
{
    return kernel_jet<N>(KernelKind::H_I, p, z);
}

// Jet in z of K(q, z/2 + shift) where K is H or H_I.
template <int N>
Jet<N> half_arg(bool inverted, double q, cplx z, cplx shift)
{
    const cplx w = 0.5 * z + shift;
    return rescale(inverted ? kHI<N>(q, w) : kH<N>(q, w), 0.5);
}

Jet<2> real_part(Jet<2> j)
{
    for (auto& v : j.c) v = v.real();
    return j;
}

double reduce_positive(double x)
{
    // into [0, 2pi)
    double r = std::fmod(x, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    return r;
}

double reduce_negative(double x)
{
    // into [-2pi, 0)
    return reduce_positive(x) - kTwoPi;
}

double get_param(const DriftParams& params, const std::string& key, double fallback, bool required)
{
    auto it = params.find(key);
    if (it == params.end()) {
        if (required) throw InvalidFamilyParams("missing parameter '" + key + "'");
        return fallback;
    }
    if (!std::isfinite(it->second)) throw InvalidFamilyParams("parameter '" + key + "' must be finite");
    return it->second;
}

void check_keys(const DriftParams& params, std::initializer_list<const char*> allowed)
{
    for (const auto& [key, value] : params) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw InvalidFamilyParams("unexpected parameter '" + key + "'");
    }
}

Jet<2> cot2_jet(double x) { return cot_half(Jet<2>::variable(x)); }
Jet<2> coth2_jet(double x) { return coth_half(Jet<2>::variable(x)); }

Jet<2> csc_half_jet(double x) { return 1.0 / sin(Jet<2>::variable(x) * 0.5); }

Jet<2> csch_half_jet(double x)
{
    const Jet<2> e = exp(Jet<2>::variable(x) * 0.5);
    return 2.0 / (e - 1.0 / e);
}

struct FamilyInfo {
    DriftFamily family;
    const char* name;
    DriftKind kind;
    double kappa;
};

const FamilyInfo kFamilies[] = {
    {DriftFamily::Kappa4_1, "kappa4/1", DriftKind::Crossing, 4.0},
    {DriftFamily::Kappa4_2, "kappa4/2", DriftKind::Crossing, 4.0},
    {DriftFamily::Kappa4_3, "kappa4/3", DriftKind::ChordalType, 4.0},
    {DriftFamily::Kappa4_4, "kappa4/4", DriftKind::ChordalType, 4.0},
    {DriftFamily::Kappa4_5, "kappa4/5", DriftKind::ChordalType, 4.0},
    {DriftFamily::Kappa4_6, "kappa4/6", DriftKind::ChordalType, 4.0},
    {DriftFamily::Kappa2_1, "kappa2/1", DriftKind::Crossing, 2.0},
    {DriftFamily::Kappa2_2, "kappa2/2", DriftKind::ChordalType, 2.0},
    {DriftFamily::Kappa2_3, "kappa2/3", DriftKind::ChordalType, 2.0},
    {DriftFamily::Kappa2_4, "kappa2/4", DriftKind::ChordalType, 2.0},
    {DriftFamily::Kappa3_1, "kappa3/1", DriftKind::Crossing, 3.0},
    {DriftFamily::Kappa3_2, "kappa3/2", DriftKind::ChordalType, 3.0},
    {DriftFamily::Kappa3_3, "kappa3/3", DriftKind::ChordalType, 3.0},
    {DriftFamily::Kappa0_1, "kappa0/1", DriftKind::ChordalType, 0.0},
    {DriftFamily::Kappa0_2, "kappa0/2", DriftKind::ChordalType, 0.0},
    {DriftFamily::Kappa0_3, "kappa0/3", DriftKind::ChordalType, 0.0},
    {DriftFamily::Kappa0_4, "kappa0/4", DriftKind::ChordalType, 0.0},
    {DriftFamily::Kappa16o3_5, "kappa16/3/5", DriftKind::ChordalType, 16.0 / 3.0},
    {DriftFamily::Kappa16o3_6, "kappa16/3/6", DriftKind::ChordalType, 16.0 / 3.0},
    {DriftFamily::Kappa16o3_7, "kappa16/3/7", DriftKind::ChordalType, 16.0 / 3.0},
    {DriftFamily::Kappa16o3_8, "kappa16/3/8", DriftKind::ChordalType, 16.0 / 3.0},
    {DriftFamily::Radial_1, "radial/1", DriftKind::RadialMarked, 0.0},
    {DriftFamily::Radial_2, "radial/2", DriftKind::RadialMarked, 0.0},
    {DriftFamily::Radial_3, "radial/3", DriftKind::RadialMarked, 0.0},
    {DriftFamily::Radial_4, "radial/4", DriftKind::RadialMarked, 0.0},
    {DriftFamily::Strip_5, "strip/5", DriftKind::StripMarked, 0.0},
    {DriftFamily::Strip_6, "strip/6", DriftKind::StripMarked, 0.0},
    {DriftFamily::Strip_7, "strip/7", DriftKind::StripMarked, 0.0},
    {DriftFamily::Strip_8, "strip/8", DriftKind::StripMarked, 0.0},
    {DriftFamily::ConstZero, "const-zero", DriftKind::Crossing, 6.0},
    {DriftFamily::Custom, "custom", DriftKind::Crossing, 0.0},
};

const FamilyInfo& info(DriftFamily f)
{
    for (const auto& i : kFamilies)
        if (i.family == f) return i;
    throw InvalidFamilyParams("unknown family");
}

std::string format_id(const FamilyInfo& fi, const DriftParams& params)
{
    std::ostringstream os;
    os.precision(17);
    os << fi.name;
    char sep = '?';
    for (const auto& [k, v] : params) {
        os << sep << k << '=' << v;
        sep = '&';
    }
    return os.str();
}

// Catmull-Rom weights for the four nodes around a cell, local coordinate u in [0,1].
std::array<double, 4> cr_weights(double u)
{
    const double u2 = u * u, u3 = u2 * u;
    return {-0.5 * u + u2 - 0.5 * u3, 1.0 - 2.5 * u2 + 1.5 * u3, 0.5 * u + 2.0 * u2 - 1.5 * u3,
            -0.5 * u2 + 0.5 * u3};
}

// Catmull-Rom cubic in x through y[-1..2]; returns the value and two x-derivatives as a jet.
Jet<2> cr_jet(const std::array<double, 4>& y, double u, double h)
{
    const double a = y[1];
    const double b = 0.5 * (y[2] - y[0]);
    const double c = y[0] - 2.5 * y[1] + 2.0 * y[2] - 0.5 * y[3];
    const double d = -0.5 * y[0] + 1.5 * y[1] - 1.5 * y[2] + 0.5 * y[3];
    Jet<2> j;
    j.c[0] = a + u * (b + u * (c + u * d));
    j.c[1] = (b + u * (2.0 * c + 3.0 * u * d)) / h;
    j.c[2] = (2.0 * c + 6.0 * u * d) / (2.0 * h * h);
    return j;
}

std::function<DriftJet(double, double)> custom_evaluator(const CustomTable& t)
{
    const std::size_t np = t.p_grid.size(), nx = t.x_grid.size();
    if (np < 2 || nx < 4) throw InvalidFamilyParams("custom table needs >= 2 p nodes and >= 4 x nodes");
    if (t.values.size() != np * nx) throw InvalidFamilyParams("custom table values size mismatch");
    for (std::size_t i = 1; i < np; ++i)
        if (!(t.p_grid[i] > t.p_grid[i - 1])) throw InvalidFamilyParams("custom p grid must increase");
    const double hx = t.x_grid[1] - t.x_grid[0];
    for (std::size_t j = 1; j < nx; ++j)
        if (std::abs(t.x_grid[j] - t.x_grid[j - 1] - hx) > 1e-9 * std::max(1.0, hx))
            throw InvalidFamilyParams("custom x grid must be uniform");
    if (std::abs(hx * static_cast<double>(nx) - kTwoPi) > 1e-9)
        throw InvalidFamilyParams("custom x grid must cover one period 2pi");
    for (double v : t.values)
        if (!std::isfinite(v)) throw InvalidFamilyParams("custom table contains non-finite values");

    return [table = t, hx](double p, double x) {
        const auto& pg = table.p_grid;
        const std::size_t np = pg.size(), nx = table.x_grid.size();
        if (p < pg.front() || p > pg.back()) throw DomainViolation("custom drift evaluated outside its p range");
        std::size_t i = std::upper_bound(pg.begin(), pg.end(), p) - pg.begin();
        i = std::clamp<std::size_t>(i, 1, np - 1) - 1;
        const double up = (p - pg[i]) / (pg[i + 1] - pg[i]);
        const auto wp = cr_weights(up);

        const double rel = (x - table.x_grid[0]) / hx;
        const double cell = std::floor(rel);
        const double ux = rel - cell;
        const long base = static_cast<long>(cell);
        auto xi = [&](long k) {
            long m = (base + k) % static_cast<long>(nx);
            return static_cast<std::size_t>(m < 0 ? m + static_cast<long>(nx) : m);
        };
        auto pi = [&](long k) {
            long m = static_cast<long>(i) + k;
            return static_cast<std::size_t>(std::clamp<long>(m, 0, static_cast<long>(np) - 1));
        };
        std::array<double, 4> col{};
        Jet<2> out;
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) col[b] = table.values[pi(a - 1) * nx + xi(b - 1)];
            Jet<2> row = cr_jet(col, ux, hx);
            out += row * cplx(wp[a]);
        }
        return out;
    };
}

}  // namespace

template <int N>
Jet<N> theta_jet(int j, double p, cplx z)
{
    if (!(p > 0.0)) throw InvalidArgument("theta needs p > 0");
    switch (j) {
    case 1: return kHI<N>(p, z);
    case 2: return kH<N>(p, z);
    case 3: case 4:
        if (p < kPi) {
            // p H_I(p,z) + z = i pi H(pi^2/p, pi + i pi z/p), and likewise for H without the shift;
            // this form avoids the cancellation between p H' and 1 when p is small.
            const cplx s = kI * (kPi / p);
            const cplx w = (j == 3 ? kPi : 0.0) + s * z;
            return rescale(kH<N>(kPi * kPi / p, w), s) * (kI * kPi);
        }
        return p * (j == 3 ? kHI<N>(p, z) : kH<N>(p, z)) + Jet<N>::variable(z);
    case 5: return kH<N>(2.0 * p, z) - kHI<N>(2.0 * p, z);
    case 6: return 0.5 * (half_arg<N>(false, 0.5 * p, z, 0.0) - half_arg<N>(false, 0.5 * p, z, kPi));
    case 7:
        return 0.5 * (half_arg<N>(false, p, z, 0.0) - half_arg<N>(true, p, z, 0.0) -
                      half_arg<N>(false, p, z, kPi) + half_arg<N>(true, p, z, kPi));
    default: throw InvalidArgument("theta index must be in 1..7");
    }
}

template Jet<0> theta_jet<0>(int, double, cplx);
template Jet<1> theta_jet<1>(int, double, cplx);
template Jet<2> theta_jet<2>(int, double, cplx);
template Jet<3> theta_jet<3>(int, double, cplx);
template Jet<4> theta_jet<4>(int, double, cplx);

cplx eval_theta(int j, double p, cplx z, int order)
{
    if (order < 0 || order > 4) throw InvalidArgument("theta derivative order must be in 0..4");
    return theta_jet<4>(j, p, z).derivative(order);
}

template <int N>
Jet<N> gamma_hat_jet(int j, double p, cplx z)
{
    if (j >= 1 && j <= 3) return theta_jet<N>(j + 4, p, z);
    if (j >= 4 && j <= 6) return theta_jet<N>(j + 1, p, z + kI * p);
    throw InvalidArgument("gamma-hat index must be in 1..6");
}

template Jet<0> gamma_hat_jet<0>(int, double, cplx);
template Jet<1> gamma_hat_jet<1>(int, double, cplx);
template Jet<2> gamma_hat_jet<2>(int, double, cplx);
template Jet<3> gamma_hat_jet<3>(int, double, cplx);
template Jet<4> gamma_hat_jet<4>(int, double, cplx);

cplx eval_gamma_hat(int j, double p, cplx z, int order)
{
    if (order < 0 || order > 1) throw InvalidArgument("gamma-hat derivative order must be 0 or 1");
    return gamma_hat_jet<1>(j, p, z).derivative(order);
}

Jet<2> G_jet(double p, double x)
{
    return real_part(kH<2>(p, x) - 2.0 * half_arg<2>(false, p, x, 0.0));
}

Jet<2> G_I_jet(double p, double x)
{
    return real_part(kH<2>(p, x) - 2.0 * half_arg<2>(true, p, x, 0.0));
}

std::string family_name(DriftFamily family) { return info(family).name; }

double DriftFunction::derivative(double p, double x, int order) const
{
    if (order < 0 || order > 2) throw InvalidArgument("drift derivative order must be in 0..2");
    return jet(p, x).derivative(order).real();
}

DriftJet DriftFunction::jet(double p, double x) const
{
    if (!base) throw InvalidFamilyParams("drift has no evaluator");
    if (!dualized) return base(p, x);
    DriftJet j = base(p, -x);
    // Lambda_I(x) = -Lambda(-x): coefficient k picks up -(-1)^k
    j.c[0] = -j.c[0];
    j.c[2] = -j.c[2];
    return j;
}

DriftFunction make_drift(DriftFamily family, const DriftParams& params)
{
    if (family == DriftFamily::Custom) throw InvalidFamilyParams("use make_custom_drift for tabulated drifts");
    const FamilyInfo& fi = info(family);
    DriftFunction L;
    L.family = family;
    L.kind = fi.kind;
    L.kappa_solved = fi.kappa;
    L.params = params;
    L.pole_set = (fi.kind == DriftKind::Crossing) ? "none" : "x = 2n*pi";

    using F = DriftFamily;
    switch (family) {
    case F::Kappa4_1: case F::Kappa4_2: case F::Kappa4_3: case F::Kappa4_6: {
        check_keys(params, {"C"});
        const double C = get_param(params, "C", 0.0, false);
        L.params["C"] = C;
        if (family == F::Kappa4_1)
            L.base = [C](double p, double x) { return real_part(-kHI<2>(p, x) + C); };
        else if (family == F::Kappa4_2)
            L.base = [C](double p, double x) { return real_part(-kHI<2>(p, x) + 2.0 * kHI<2>(2.0 * p, x - C)); };
        else if (family == F::Kappa4_3)
            L.base = [C](double p, double x) { return real_part(-kH<2>(p, x) + C); };
        else
            L.base = [C](double p, double x) { return real_part(-kH<2>(p, x) + 2.0 * kHI<2>(2.0 * p, x - C)); };
        break;
    }
    case F::Kappa4_4:
        check_keys(params, {});
        L.base = [](double p, double x) { return real_part(-kH<2>(p, x) + 2.0 * cot2_jet(x)); };
        break;
    case F::Kappa4_5:
        check_keys(params, {});
        L.base = [](double p, double x) { return real_part(-kH<2>(p, x) + 2.0 * kH<2>(2.0 * p, x)); };
        break;
    case F::Kappa2_1: case F::Kappa2_2: case F::Kappa2_3: case F::Kappa2_4: {
        check_keys(params, {});
        const int j = family == F::Kappa2_1 ? 3 : family == F::Kappa2_2 ? 2 : family == F::Kappa2_3 ? 4 : 5;
        L.base = [j](double p, double x) {
            const Jet<3> d1 = derive(theta_jet<4>(j, p, x));
            const Jet<2> d2 = derive(d1);
            return real_part(2.0 * d2 / truncate<2>(d1));
        };
        break;
    }
    case F::Kappa3_1: case F::Kappa3_2: case F::Kappa3_3: {
        check_keys(params, {});
        const int j = family == F::Kappa3_1 ? 4 : family == F::Kappa3_2 ? 2 : 3;
        L.base = [j](double p, double x) {
            const Jet<3> g = gamma_hat_jet<3>(j, p, x);
            return real_part(3.0 * derive(g) / truncate<2>(g));
        };
        break;
    }
    case F::Kappa0_1: case F::Kappa0_2: case F::Kappa0_3: case F::Kappa0_4:
    case F::Kappa16o3_5: case F::Kappa16o3_6: case F::Kappa16o3_7: case F::Kappa16o3_8: {
        check_keys(params, {});
        const bool positive = family == F::Kappa0_1 || family == F::Kappa0_3 || family == F::Kappa16o3_5 ||
                              family == F::Kappa16o3_7;
        const bool inverted = family == F::Kappa0_3 || family == F::Kappa0_4 || family == F::Kappa16o3_7 ||
                              family == F::Kappa16o3_8;
        const double scale = (fi.kappa == 0.0) ? 1.0 : -1.0 / 3.0;
        L.pole_set = positive ? "x = 2n*pi (branch (0,2pi))" : "x = 2n*pi (branch (-2pi,0))";
        L.base = [positive, inverted, scale](double p, double x) {
            const double xr = positive ? reduce_positive(x) : reduce_negative(x);
            return (inverted ? G_I_jet(p, xr) : G_jet(p, xr)) * cplx(scale);
        };
        break;
    }
    case F::Radial_1: case F::Radial_2: case F::Radial_3: case F::Radial_4:
    case F::Strip_5: case F::Strip_6: case F::Strip_7: case F::Strip_8: {
        check_keys(params, {"kappa"});
        const double kappa = get_param(params, "kappa", 0.0, true);
        if (!(kappa > 0.0)) throw InvalidFamilyParams("kappa must be positive");
        L.kappa_solved = kappa;
        const bool radial = fi.kind == DriftKind::RadialMarked;
        const int idx = static_cast<int>(family) - static_cast<int>(radial ? F::Radial_1 : F::Strip_5);
        double a = 0.0, b = 0.0;  // a * cot2 + b * csc(x/2), or the hyperbolic analogue
        switch (idx) {
        case 0: a = kappa / 2.0 - 3.0; break;
        case 1: a = 1.0; break;
        case 2: a = kappa / 4.0 - 1.0; b = kappa / 4.0 - 2.0; break;
        default: a = kappa / 4.0 - 1.0; b = -(kappa / 4.0 - 2.0); break;
        }
        if (radial) {
            L.pole_set = b != 0.0 ? "x = 2n*pi (branch (0,2pi))" : "x = 2n*pi";
            L.base = [a, b](double, double x) {
                if (b == 0.0) return real_part(a * cot2_jet(x));
                const double xr = reduce_positive(x);
                return real_part(a * cot2_jet(xr) + b * csc_half_jet(xr));
            };
        }
        else {
            L.pole_set = "x = 0";
            L.base = [a, b](double, double x) {
                if (x == 0.0) throw PoleProximity("strip drift at x = 0");
                Jet<2> j = a * coth2_jet(x);
                if (b != 0.0) j += b * csch_half_jet(x);
                return real_part(j);
            };
        }
        break;
    }
    case F::ConstZero:
        check_keys(params, {});
        L.base = [](double, double) { return DriftJet(); };
        break;
    case F::Custom: break;
    }
    L.id = format_id(fi, L.params);
    return L;
}

DriftFunction make_custom_drift(const CustomTable& table)
{
    DriftFunction L;
    L.family = DriftFamily::Custom;
    L.kind = table.kind;
    L.kappa_solved = table.kappa;
    L.pole_set = "tabulated";
    L.base = custom_evaluator(table);
    L.id = "custom";
    return L;
}

DriftFunction dual(const DriftFunction& L)
{
    DriftFunction d = L;
    d.dualized = !L.dualized;
    if (L.dualized) {
        const std::string prefix = "dual:";
        if (d.id.rfind(prefix, 0) == 0) d.id = d.id.substr(prefix.size());
    }
    else {
        d.id = "dual:" + L.id;
    }
    return d;
}

DriftFunction parse_drift(const std::string& id_in)
{
    std::string id = id_in;
    bool want_dual = false;
    if (id.rfind("dual:", 0) == 0) {
        want_dual = true;
        id = id.substr(5);
    }
    std::string name = id, query;
    if (auto q = id.find('?'); q != std::string::npos) {
        name = id.substr(0, q);
        query = id.substr(q + 1);
    }
    DriftParams params;
    std::istringstream qs(query);
    std::string item;
    while (std::getline(qs, item, '&')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos) throw InvalidFamilyParams("malformed parameter '" + item + "'");
        const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        try {
            std::size_t used = 0;
            params[key] = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
        }
        catch (const std::exception&) {
            throw InvalidFamilyParams("parameter '" + key + "' is not a number");
        }
    }
    for (const auto& fi : kFamilies) {
        if (name == fi.name && fi.family != DriftFamily::Custom) {
            DriftFunction L = make_drift(fi.family, params);
            return want_dual ? dual(L) : L;
        }
    }
    throw InvalidFamilyParams("unknown drift family '" + name + "'");
}

std::vector<std::string> catalog_ids()
{
    std::vector<std::string> ids;
    for (const auto& fi : kFamilies) {
        if (fi.kind == DriftKind::Crossing || fi.kind == DriftKind::ChordalType) {
            if (fi.family != DriftFamily::ConstZero && fi.family != DriftFamily::Custom) ids.push_back(fi.name);
        }
    }
    return ids;
}

PdeKind natural_pde(const DriftFunction& L)
{
    switch (L.kind) {
    case DriftKind::Crossing: return PdeKind::CrossingAnnulus;
    case DriftKind::ChordalType: return PdeKind::ChordalAnnulus;
    case DriftKind::RadialMarked: return PdeKind::Radial;
    case DriftKind::StripMarked: return PdeKind::Strip;
    }
    return PdeKind::CrossingAnnulus;
}

PdeKind parse_pde(const std::string& name)
{
    if (name == "crossing" || name == "crossing-annulus") return PdeKind::CrossingAnnulus;
    if (name == "chordal" || name == "chordal-annulus") return PdeKind::ChordalAnnulus;
    if (name == "radial") return PdeKind::Radial;
    if (name == "strip") return PdeKind::Strip;
    throw InvalidArgument("unknown PDE '" + name + "'");
}

std::vector<std::vector<double>> pde_residual(const DriftFunction& L, double kappa, PdeKind pde,
                                              const std::vector<double>& p_grid,
                                              const std::vector<double>& x_grid, double h_p)
{
    if (!(kappa >= 0.0)) throw InvalidArgument("kappa must be nonnegative");
    if (!(h_p > 0.0)) throw InvalidArgument("h_p must be positive");
    const bool stationary = pde == PdeKind::Radial || pde == PdeKind::Strip;
    std::vector<std::vector<double>> out(p_grid.size(), std::vector<double>(x_grid.size(), 0.0));
    for (std::size_t i = 0; i < p_grid.size(); ++i) {
        const double p = p_grid[i];
        for (std::size_t j = 0; j < x_grid.size(); ++j) {
            const double x = x_grid[j];
            Jet<2> K;
            switch (pde) {
            case PdeKind::CrossingAnnulus: K = kHI<2>(p, x); break;
            case PdeKind::ChordalAnnulus: K = kH<2>(p, x); break;
            case PdeKind::Radial: K = cot2_jet(x); break;
            case PdeKind::Strip: K = coth2_jet(x); break;
            }
            const Jet<2> lam = L.jet(p, x);
            const double l0 = lam.c[0].real(), l1 = lam.c[1].real(), l2 = 2.0 * lam.c[2].real();
            const double k1 = K.c[1].real(), k2 = 2.0 * K.c[2].real(), k0 = K.c[0].real();
            double dot = 0.0;
            if (!stationary) {
                auto D = [&](double h) { return (L(p + h, x) - L(p - h, x)) / (2.0 * h); };
                dot = (4.0 * D(0.5 * h_p) - D(h_p)) / 3.0;
            }
            out[i][j] = dot - (0.5 * kappa * l2 + (3.0 - 0.5 * kappa) * k2 + l0 * k1 + k0 * l1 + l0 * l1);
        }
    }
    return out;
}

namespace {

double integrate(const std::function<double(double)>& f, double a, double b)
{
    if (a == b) return 0.0;
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-10, &err);
    if (!std::isfinite(v)) throw QuadratureFailure("non-finite integral");
    return v;
}

double bracket_at(const DriftFunction& L, double kappa, double p, double x)
{
    const Jet<2> lam = L.jet(p, x);
    const Jet<1> hi = kHI<1>(p, x);
    const double l0 = lam.c[0].real(), l1 = lam.c[1].real();
    return 0.5 * kappa * l1 + hi.c[0].real() * l0 + (3.0 - 0.5 * kappa) * hi.c[1].real() + 0.5 * l0 * l0;
}

}  // namespace

double GammaFunction::log_gamma_hat(double p, double x) const
{
    return integrate([&](double y) { return drift(p, y); }, 0.0, x) / kappa;
}

double GammaFunction::normalizer(double p) const
{
    // log Gamma-hat(p, 0) = 0 for every p, so its p-derivative drops out at x = 0.
    return -bracket_at(drift, kappa, p, 0.0);
}

double GammaFunction::log_gamma(double p, double x) const
{
    const double tail = integrate([&](double s) { return normalizer(s); }, 1.0, p);
    return log_gamma_hat(p, x) - tail / kappa;
}

double GammaFunction::operator()(double p, double x) const { return std::exp(log_gamma(p, x)); }

double GammaFunction::derivative(double p, double x) const
{
    return (*this)(p, x) * drift(p, x) / kappa;
}

GammaFunction gamma_from_lambda(const DriftFunction& L, double kappa, const std::vector<double>& p_grid,
                                const std::vector<double>& x_grid)
{
    if (!(kappa > 0.0)) throw InvalidArgument("kappa must be positive");
    GammaFunction G;
    G.drift = L;
    G.kappa = kappa;
    const double h = 1e-4;
    for (double p : p_grid) {
        const double c0 = G.normalizer(p);
        for (double x : x_grid) {
            auto D = [&](double hh) {
                return (G.log_gamma_hat(p + hh, x) - G.log_gamma_hat(p - hh, x)) / (2.0 * hh);
            };
            const double dlog = (4.0 * D(0.5 * h) - D(h)) / 3.0;
            const double c = kappa * dlog - bracket_at(L, kappa, p, x);
            G.x_spread = std::max(G.x_spread, std::abs(c - c0));
        }
    }
    if (!(G.x_spread <= 1e-4)) {
        std::ostringstream os;
        os << "C(p) varies by " << G.x_spread << " across the x grid";
        throw NormalizerInconsistent(os.str());
    }
    return G;
}

}  // namespace annsle
