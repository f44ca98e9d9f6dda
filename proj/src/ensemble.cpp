#include "annsle/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace annsle {

namespace {

constexpr cplx kI{0.0, 1.0};

// The first T time units of a path, shifted to start at 0.
DrivingPath head(const DrivingPath& path, double T)
{
    const auto n = static_cast<std::size_t>(std::llround(T / path.dt));
    if (std::abs(static_cast<double>(n) * path.dt - T) > 1e-9 * std::max(1.0, T))
        throw InvalidArgument("time is not on the driving grid");
    if (n + 1 > path.size()) throw InvalidArgument("driving path is shorter than the requested time");
    DrivingPath out = path;
    out.t0 = 0.0;
    out.values.assign(path.values.begin(), path.values.begin() + static_cast<std::ptrdiff_t>(n) + 1);
    return out;
}

std::size_t grid_index(const DrivingPath& path, double T)
{
    return static_cast<std::size_t>(std::llround(T / path.dt));
}

double circle_distance(double x)
{
    return std::abs(std::remainder(x, kTwoPi));
}

// Real Taylor coefficients of a map that is real on the real axis, from its values on the upper
// half of a circle.  Nodes sit at angles 2pi (m + 1/2) / N, so the lower half is the mirror image.
class CircleRule {
public:
    CircleRule(int N, double r) : N_(N), keep_(N / 2 + N / 8), r_(r)
    {
        if (N < 8 || N % 2 != 0) throw InvalidArgument("circle_points must be even and at least 8");
        if (!(r > 0.0)) throw InvalidArgument("circle radius must be positive");
        nodes_.resize(N / 2);
        for (int m = 0; m < N / 2; ++m) nodes_[m] = std::polar(r, kTwoPi * (m + 0.5) / N);
        basis_.resize(static_cast<std::size_t>(N) * (N / 2));
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < N / 2; ++m)
                basis_[static_cast<std::size_t>(n) * (N / 2) + m] = std::polar(1.0, -kTwoPi * n * (m + 0.5) / N);
    }

    int half() const { return N_ / 2; }
    int size() const { return N_; }
    double radius() const { return r_; }
    cplx node(int m) const { return nodes_[m]; }

    std::vector<double> coefficients(const std::vector<cplx>& upper) const
    {
        std::vector<double> a(N_);
        double rn = 1.0;
        for (int n = 0; n < N_; ++n) {
            double acc = 0.0;
            for (int m = 0; m < N_ / 2; ++m)
                acc += (upper[m] * basis_[static_cast<std::size_t>(n) * (N_ / 2) + m]).real();
            a[n] = 2.0 * acc / (N_ * rn);
            rn *= r_;
        }
        return a;
    }

    // Only the lower modes are kept: moving the centre along with the driver re-expands the series
    // every step, and that re-expansion amplifies rounding noise in mode n geometrically in n.
    void truncate(std::vector<double>& a) const { a.resize(keep_); }

    // Largest discarded coefficient relative to the linear term, both scaled to the circle.
    double tail(const std::vector<double>& a) const
    {
        double t = 0.0;
        double rn = std::pow(r_, keep_);
        for (int n = keep_; n < N_; ++n) {
            t = std::max(t, std::abs(a[n]) * rn);
            rn *= r_;
        }
        return t / std::max(std::abs(a[1]) * r_, 1e-300);
    }

    static cplx evaluate(const std::vector<double>& a, cplx d)
    {
        cplx acc = 0.0;
        for (std::size_t n = a.size(); n-- > 0;) acc = acc * d + a[n];
        return acc;
    }

private:
    int N_;
    int keep_;
    double r_;
    std::vector<cplx> nodes_;
    std::vector<cplx> basis_;
};

double schwarzian(double f1, double f2, double f3)
{
    const double q = f2 / f1;
    return f3 / f1 - 1.5 * q * q;
}

KernelKind other_kernel(Configuration cfg)
{
    return cfg == Configuration::Crossing ? KernelKind::H_I : KernelKind::H;
}

FlowVariant other_flow(Configuration cfg)
{
    return cfg == Configuration::Crossing ? FlowVariant::InvertedCoveringAnnulus : FlowVariant::CoveringAnnulus;
}

double kernel_value(KernelKind k, double p, double x)
{
    return k == KernelKind::H ? H(p, cplx(x)).real() : H_I(p, cplx(x)).real();
}

// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x)
    {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) comp += (sum - t) + x;
        else comp += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

}  // namespace

DrivingPath ImageChain::zeta_by_capacity(double dv) const
{
    if (!(dv > 0.0)) throw InvalidArgument("dv must be positive");
    DrivingPath out;
    out.t0 = 0.0;
    const double V = v.back();
    const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(V / dv - 1e-9)));
    out.dt = V > 0.0 ? V / static_cast<double>(n) : dv;
    out.values.resize(n + 1);
    std::size_t j = 0;
    for (std::size_t k = 0; k <= n; ++k) {
        const double target = out.dt * static_cast<double>(k);
        while (j + 2 < v.size() && v[j + 1] < target) ++j;
        if (v.size() < 2) {
            out.values[k] = zeta.front();
            continue;
        }
        const double w = (v[j + 1] > v[j]) ? std::clamp((target - v[j]) / (v[j + 1] - v[j]), 0.0, 1.0) : 0.0;
        out.values[k] = zeta[j] + w * (zeta[j + 1] - zeta[j]);
    }
    return out;
}

ImageChain extract_image_chain(double p, const DrivingPath& xi_own, const DrivingPath& xi_other, double t_own,
                               double t_other, int own, const ExtractionOptions& opts)
{
    if (own != 1 && own != 2) throw InvalidArgument("own chain must be 1 or 2");
    if (!(p > 0.0) || !std::isfinite(p)) throw InvalidArgument("modulus must be finite and positive");
    if (!(t_own >= 0.0) || !(t_other >= 0.0)) throw InvalidArgument("times must be nonnegative");
    if (t_own + t_other >= p) throw DomainViolation("t1 + t2 must stay below the modulus");
    const DrivingPath own_path = head(xi_own, t_own);
    const double dt = own_path.dt;
    const std::size_t n = own_path.size() - 1;
    const CircleRule rule(opts.circle_points, opts.radius);
    const int K = rule.half();
    const KernelKind Kother = other_kernel(opts.config);
    const double r = opts.radius;

    ImageChain out;
    out.own = own;
    out.p = p;
    out.t_other = t_other;
    out.config = opts.config;
    out.s.reserve(n + 1);

    // Composed map at own time 0: the other chain's map, evaluated on the circle around x_own.
    const double x_own = own_path.values[0];
    std::vector<cplx> W(K);
    double other_tip = xi_other.values.at(0);
    if (t_other > 0.0) {
        const DrivingPath other_path = head(xi_other, t_other);
        other_tip = other_path.values.back();
        std::vector<cplx> seeds(K);
        for (int m = 0; m < K; ++m) seeds[m] = x_own + rule.node(m);
        LoewnerFlow flow = solve_flow(FlowKind{other_flow(opts.config), p}, other_path, seeds, {});
        for (int m = 0; m < K; ++m) {
            if (!flow.tracked[m].alive) throw DomainViolation("circle around the own start point meets the other hull");
            W[m] = flow.tracked[m].value;
        }
    }
    else {
        for (int m = 0; m < K; ++m) W[m] = x_own + rule.node(m);
    }

    std::vector<double> a = rule.coefficients(W);
    Jet<3> apt = Jet<3>::variable(other_tip);
    double v = 0.0;
    const double mbase = p - t_other;

    auto record = [&](std::size_t i, const std::vector<double>& coef, const Jet<3>& A) {
        out.s.push_back(dt * static_cast<double>(i));
        out.v.push_back(v);
        out.m.push_back(mbase - v);
        out.zeta.push_back(coef[0]);
        out.own_jet.push_back({coef[0], coef[1], 2.0 * coef[2], 6.0 * coef[3]});
        const std::array<double, 4> oj{A.c[0].real(), A.c[1].real(), 2.0 * A.c[2].real(), 6.0 * A.c[3].real()};
        out.other_jet.push_back(oj);
        out.own_schwarzian.push_back(schwarzian(coef[1], 2.0 * coef[2], 6.0 * coef[3]));
        out.other_schwarzian.push_back(schwarzian(oj[1], oj[2], oj[3]));
        out.X_own.push_back(coef[0] - oj[0]);
        out.residual = std::max(out.residual, rule.tail(coef));
        if (!(coef[1] > 0.0) || !(oj[1] > 0.0) || !std::isfinite(coef[3]) || !std::isfinite(oj[3]))
            throw JetUnstable("nonpositive or nonfinite derivative in the image chain");
    };
    record(0, a, apt);
    if (out.residual > opts.tail_tolerance)
        throw TipEvaluationUnstable("Taylor tail " + std::to_string(out.residual) + " on the initial circle");

    double zeta_prev = a[0];
    std::vector<cplx> y(K), z(K), Wn(K);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = dt * static_cast<double>(i);
        const double xa = own_path.values[i];
        const double xb = own_path.values[i + 1];
        const double ai = a[1] * a[1];
        const double zi = a[0];
        std::vector<double> a_kept = a;
        rule.truncate(a_kept);

        // Pull the new circle back under the own chain's step map: y' = H(p - tau, y - xi(tau)).
        // RK4 loses accuracy when the driver moves a sizeable fraction of r within one step.
        const int nsub_drv = static_cast<int>(std::ceil(std::abs(xb - xa) / (0.04 * r)));
        const int nsub_back = std::max({1, nsub_drv, static_cast<int>(std::ceil(dt / (0.05 * r * r)))});
        const double hb = dt / nsub_back;
        for (int m = 0; m < K; ++m) {
            cplx w = xb + rule.node(m);
            double tau = s + dt;
            auto xi_at = [&](double t) { return xa + (xb - xa) * (t - s) / dt; };
            auto f = [&](double t, cplx u) { return H(p - t, u - xi_at(t)); };
            for (int k = 0; k < nsub_back; ++k) {
                const cplx k1 = f(tau, w);
                const cplx k2 = f(tau - 0.5 * hb, w - 0.5 * hb * k1);
                const cplx k3 = f(tau - 0.5 * hb, w - 0.5 * hb * k2);
                const cplx k4 = f(tau - hb, w - hb * k3);
                w -= hb * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
                tau -= hb;
            }
            y[m] = w;
            z[m] = CircleRule::evaluate(a_kept, w - xa);
        }

        double dmin = 1e300;
        for (int m = 0; m < K; ++m) dmin = std::min(dmin, std::abs(z[m] - zi));

        // Forward step of the image chain with A^2 and zeta linear in tau, corrected iteratively.
        double ae = ai;
        double ze = (i > 0) ? 2.0 * zi - zeta_prev : zi;
        std::vector<double> an;
        for (int pass = 0; pass <= opts.corrector_passes; ++pass) {
            auto a_at = [&](double u) { return ai + (ae - ai) * u; };
            auto z_at = [&](double u) { return zi + (ze - zi) * u; };
            auto m_at = [&](double u) { return mbase - (v + dt * (ai * u + 0.5 * (ae - ai) * u * u)); };
            if (!(m_at(1.0) > 0.0)) throw DomainViolation("image modulus exhausted");
            const double amax = std::max(ai, ae);
            const int nsub_img = static_cast<int>(std::ceil(std::abs(ze - zi) / (0.04 * dmin)));
            const int nsub = std::max({1, nsub_img, static_cast<int>(std::ceil(dt * amax / (0.05 * dmin * dmin)))});
            const double h = 1.0 / nsub;
            auto f = [&](double u, cplx w) { return a_at(u) * H(m_at(u), w - z_at(u)); };
            for (int m = 0; m < K; ++m) {
                cplx w = z[m];
                double u = 0.0;
                for (int k = 0; k < nsub; ++k) {
                    const cplx k1 = f(u, w);
                    const cplx k2 = f(u + 0.5 * h, w + 0.5 * h * dt * k1);
                    const cplx k3 = f(u + 0.5 * h, w + 0.5 * h * dt * k2);
                    const cplx k4 = f(u + h, w + h * dt * k3);
                    w += h * dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
                    u += h;
                }
                Wn[m] = w;
            }
            an = rule.coefficients(Wn);
            ae = an[1] * an[1];
            ze = an[0];
        }

        // Other chain's tip jet under the image flow: W' = A^2 K(m, W - zeta).
        {
            const double af = ai, ab = ae, zf = zi, zb = ze;
            auto fj = [&](double u, const Jet<3>& J) {
                const double aa = af + (ab - af) * u;
                const double zz = zf + (zb - zf) * u;
                const double mm = mbase - (v + dt * (af * u + 0.5 * (ab - af) * u * u));
                const Jet<3> k = kernel_jet<3>(Kother, mm, J.c[0] - zz);
                return compose<3>(k.c, J) * cplx(aa * dt);
            };
            const Jet<3> k1 = fj(0.0, apt);
            const Jet<3> k2 = fj(0.5, apt + k1 * cplx(0.5));
            const Jet<3> k3 = fj(0.5, apt + k2 * cplx(0.5));
            const Jet<3> k4 = fj(1.0, apt + k3);
            apt = apt + (k1 + k2 * cplx(2.0) + k3 * cplx(2.0) + k4) * cplx(1.0 / 6.0);
        }

        v += 0.5 * dt * (ai + ae);
        // With no other hull the image chain is the own chain and its capacity is the own time.
        if (t_other == 0.0) v = dt * static_cast<double>(i + 1);
        zeta_prev = zi;
        a = an;
        record(i + 1, a, apt);
        if (out.residual > opts.tail_tolerance)
            throw TipEvaluationUnstable("Taylor tail " + std::to_string(out.residual) + " at own time " +
                                        std::to_string(s + dt) + "; reduce the step or the circle radius");
        double reach = 0.0;
        for (int m = 0; m < K; ++m) reach = std::max(reach, std::abs(Wn[m] - ze));
        const double room = opts.config == Configuration::Crossing
                                ? out.m.back()
                                : std::min(out.m.back(), circle_distance(ze - apt.c[0].real()));
        if (!(reach < 0.95 * room)) throw DomainViolation("hulls too close for the circle evaluation");
    }
    return out;
}

double ensemble_alpha(double kappa)
{
    return (6.0 - kappa) / (2.0 * kappa);
}

double central_charge(double kappa)
{
    return (8.0 - 3.0 * kappa) * (kappa - 6.0) / (2.0 * kappa);
}

namespace {

double gamma_or_nan(const GammaFunction& gamma, double p, double x)
{
    if (!(gamma.kappa > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return gamma(p, x);
}

// Fills the record from an extraction with chain 2 as the own chain, at grid index i.
void fill_from_chain2(EnsembleRecord& rec, const ImageChain& c2, std::size_t i, Configuration cfg)
{
    rec.m = c2.m[i];
    rec.X2 = c2.X_own[i];
    rec.X1 = -rec.X2;
    for (int h = 0; h < 3; ++h) {
        rec.A[1][h] = c2.own_jet[i][h + 1];
        rec.A[0][h] = c2.other_jet[i][h + 1];
    }
    rec.AS[1] = c2.own_schwarzian[i];
    rec.AS[0] = c2.other_schwarzian[i];
    rec.Q = eval_H(other_kernel(cfg), rec.m, cplx(rec.X1), 3).real();
    rec.residual = c2.residual;
}

void fill_axes(EnsembleRecord& rec, const ImageChain& c2, const DrivingPath& xi1, const DrivingPath& xi2,
               const GammaFunction& gamma, Configuration cfg)
{
    const double x1 = xi1.values.at(0);
    const double x2 = xi2.values.at(0);
    const double p = rec.p;
    rec.A21_axis = c2.own_jet[0][1];
    rec.Y_t1_axis = gamma_or_nan(gamma, p - rec.t1, -c2.X_own[0]);
    double X1_axis2 = x1 - x2;
    rec.A11_axis = 1.0;
    if (rec.t2 > 0.0) {
        const DrivingPath d2 = head(xi2, rec.t2);
        LoewnerFlow flow = solve_flow(FlowKind{other_flow(cfg), p}, d2, {}, {cplx(x1)});
        const JetValues jv = boundary_jet(flow, cplx(x1));
        rec.A11_axis = jv.g1.real();
        X1_axis2 = -(d2.values.back() - jv.g.real());
    }
    rec.Y_t2_axis = gamma_or_nan(gamma, p - rec.t2, X1_axis2);
    rec.Y_origin = gamma_or_nan(gamma, p, x1 - x2);
}

double trapezoid(const std::vector<double>& f, double h, std::size_t upto)
{
    CompensatedSum acc;
    for (std::size_t i = 0; i < upto; ++i) acc.add(0.5 * h * (f[i] + f[i + 1]));
    return acc.value();
}

}  // namespace

EnsembleRecord ensemble_quantities(double p, const DrivingPath& xi1, const DrivingPath& xi2, double t1, double t2,
                                   const GammaFunction& gamma, double kappa, const EnsembleOptions& opts)
{
    const Configuration cfg = opts.extraction.config;
    EnsembleRecord rec;
    rec.t1 = t1;
    rec.t2 = t2;
    rec.p = p;
    rec.alpha = ensemble_alpha(kappa);
    rec.c = central_charge(kappa);

    const ImageChain c2 = extract_image_chain(p, xi2, xi1, t2, t1, 2, opts.extraction);
    const std::size_t last = c2.size() - 1;
    fill_from_chain2(rec, c2, last, cfg);
    rec.lnF = trapezoid(c2.own_schwarzian, c2.size() > 1 ? c2.s[1] : 0.0, last);

    if (opts.both_orders) {
        const ImageChain c1 = extract_image_chain(p, xi1, xi2, t1, t2, 1, opts.extraction);
        rec.X1 = c1.X_own.back();
        for (int h = 0; h < 3; ++h) rec.A[0][h] = c1.own_jet.back()[h + 1];
        rec.AS[0] = c1.own_schwarzian.back();
        rec.Q = eval_H(other_kernel(cfg), rec.m, cplx(rec.X1), 3).real();
        rec.residual = std::max(rec.residual, c1.residual);
    }
    rec.Y = gamma_or_nan(gamma, rec.m, rec.X1);
    fill_axes(rec, c2, xi1, xi2, gamma, cfg);
    rec.lnM = kappa > 0.0 ? std::log(compute_M(rec, std::exp(rec.lnF))) : std::numeric_limits<double>::quiet_NaN();
    return rec;
}

std::vector<std::vector<EnsembleRecord>> ensemble_grid(double p, const DrivingPath& xi1, const DrivingPath& xi2,
                                                       double t1, double t2, int n1, int n2,
                                                       const GammaFunction& gamma, double kappa,
                                                       const ExtractionOptions& opts)
{
    if (n1 < 1 || n2 < 1) throw InvalidArgument("grid needs at least one cell per direction");
    const std::size_t stride2 = grid_index(xi2, t2 / n2);
    if (std::abs(static_cast<double>(stride2) * xi2.dt - t2 / n2) > 1e-9 * std::max(1.0, t2))
        throw InvalidArgument("t2 grid step must be a multiple of the path step");
    std::vector<std::vector<EnsembleRecord>> grid(n1 + 1, std::vector<EnsembleRecord>(n2 + 1));
    for (int i = 0; i <= n1; ++i) {
        const double s1 = t1 * i / n1;
        const ImageChain c2 = extract_image_chain(p, xi2, xi1, t2, s1, 2, opts);
        const double h = c2.size() > 1 ? c2.s[1] : 0.0;
        for (int j = 0; j <= n2; ++j) {
            const std::size_t idx = stride2 * static_cast<std::size_t>(j);
            EnsembleRecord& rec = grid[i][j];
            rec.t1 = s1;
            rec.t2 = c2.s[idx];
            rec.p = p;
            rec.alpha = ensemble_alpha(kappa);
            rec.c = central_charge(kappa);
            fill_from_chain2(rec, c2, idx, opts.config);
            rec.lnF = trapezoid(c2.own_schwarzian, h, idx);
            rec.Y = gamma_or_nan(gamma, rec.m, rec.X1);
            fill_axes(rec, c2, xi1, xi2, gamma, opts.config);
            rec.lnM = kappa > 0.0 ? std::log(compute_M(rec, std::exp(rec.lnF)))
                                  : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return grid;
}

double compute_lnF(const std::vector<std::vector<EnsembleRecord>>& grid)
{
    if (grid.size() < 2 || grid[0].size() < 2) throw GridIncomplete("record grid needs at least 2x2 records");
    const std::size_t n1 = grid.size() - 1, n2 = grid[0].size() - 1;
    for (const auto& row : grid)
        if (row.size() != n2 + 1) throw GridIncomplete("ragged record grid");
    const double h1 = grid[1][0].t1 - grid[0][0].t1;
    const double h2 = grid[0][1].t2 - grid[0][0].t2;
    if (grid[0][0].t1 != 0.0 || grid[0][0].t2 != 0.0) throw GridIncomplete("record grid must include the axes");
    for (std::size_t i = 0; i <= n1; ++i)
        for (std::size_t j = 0; j <= n2; ++j) {
            const auto& r = grid[i][j];
            if (std::abs(r.t1 - h1 * i) > 1e-9 || std::abs(r.t2 - h2 * j) > 1e-9)
                throw GridIncomplete("records are not on a regular grid");
        }
    CompensatedSum acc;
    for (std::size_t i = 0; i <= n1; ++i)
        for (std::size_t j = 0; j <= n2; ++j) {
            const auto& r = grid[i][j];
            const double w = ((i == 0 || i == n1) ? 0.5 : 1.0) * ((j == 0 || j == n2) ? 0.5 : 1.0);
            const double a = r.A[0][0] * r.A[1][0];
            acc.add(w * a * a * r.Q);
        }
    return acc.value() * h1 * h2;
}

double compute_F(const std::vector<std::vector<EnsembleRecord>>& grid)
{
    return std::exp(compute_lnF(grid));
}

double compute_M(const EnsembleRecord& rec, double F, NormalizationMode mode)
{
    const double al = rec.alpha;
    const double lnhat = al * std::log(rec.A[0][0]) + al * std::log(rec.A[1][0]) - rec.c / 6.0 * std::log(F) +
                         std::log(rec.Y);
    if (mode == NormalizationMode::WholePlane) return std::exp(lnhat + al * eval_R(rec.m));
    if (rec.t1 == 0.0 || rec.t2 == 0.0) return 1.0;
    const double p = rec.p;
    const double rterm = al * (((eval_R(rec.m) - eval_R(p - rec.t1)) - eval_R(p - rec.t2)) + eval_R(p));
    const double ln_t1 = al * std::log(rec.A21_axis) + std::log(rec.Y_t1_axis);
    const double ln_t2 = al * std::log(rec.A11_axis) + std::log(rec.Y_t2_axis);
    const double ln00 = std::log(rec.Y_origin);
    return std::exp(((lnhat + rterm) - ln_t1) + (ln00 - ln_t2));
}

int default_thread_count()
{
    if (const char* env = std::getenv("ANNSLE_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

MartingaleResult martingale_estimate(double kappa, const DriftFunction& L, double p, double x1, double x2, double t1,
                                     double t2, std::size_t N, std::uint64_t seed, const MartingaleOptions& opts)
{
    if (!(kappa > 0.0)) throw InvalidArgument("martingale estimate needs kappa > 0");
    if (N < 2) throw InvalidArgument("need at least two pairs");
    if (L.kind != DriftKind::Crossing) throw InvalidArgument("martingale estimate needs a crossing drift");
    const DriftFunction L2 = dual(L);
    const GammaFunction gamma = gamma_from_lambda(L, kappa, {std::max(0.5, p - t1 - t2 - 0.5), p},
                                                  {0.5, 1.5, 3.0, 4.5, 5.8});
    MartingaleResult res;
    if (t1 == 0.0 || t2 == 0.0) {
        res.mean = 1.0;
        res.accepted = N;
        res.samples.assign(N, 1.0);
        return res;
    }

    std::vector<double> values(N, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> residuals(N, 0.0);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= N) return;
            try {
                AnnulusSleOptions o1;
                o1.t_end = t1;
                o1.path_index = 2 * i;
                AnnulusSleOptions o2;
                o2.t_end = t2;
                o2.path_index = 2 * i + 1;
                const AnnulusSleRun r1 = drive_annulus_sle(kappa, L, DriftKind::Crossing, p, x1, x2, opts.dt, seed, o1);
                const AnnulusSleRun r2 =
                    drive_annulus_sle(kappa, L2, DriftKind::Crossing, p, x2, x1, opts.dt, seed, o2);
                if (r1.collided || r2.collided) continue;
                EnsembleOptions eo;
                eo.extraction = opts.extraction;
                eo.extraction.config = Configuration::Crossing;
                eo.both_orders = false;
                const EnsembleRecord rec = ensemble_quantities(p, r1.xi, r2.xi, t1, t2, gamma, kappa, eo);
                if (std::isfinite(rec.lnM)) {
                    values[i] = std::exp(rec.lnM);
                    residuals[i] = rec.residual;
                }
            }
            catch (const DomainViolation&) {
            }
            catch (const TipEvaluationUnstable&) {
            }
            catch (const Swallowed&) {
            }
            catch (const DriftPole&) {
            }
        }
    };
    const int nt = std::max(1, std::min<int>(opts.threads > 0 ? opts.threads : default_thread_count(),
                                             static_cast<int>(N)));
    std::vector<std::thread> pool;
    for (int k = 1; k < nt; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    CompensatedSum s1;
    for (std::size_t i = 0; i < N; ++i) {
        if (std::isnan(values[i])) {
            ++res.rejected;
            continue;
        }
        ++res.accepted;
        s1.add(values[i]);
        res.samples.push_back(values[i]);
        res.max_residual = std::max(res.max_residual, residuals[i]);
    }
    if (static_cast<double>(res.rejected) > opts.max_rejection * static_cast<double>(N))
        throw ExcessiveRejection(std::to_string(res.rejected) + " of " + std::to_string(N) + " pairs rejected");
    if (res.accepted < 2) throw ExcessiveRejection("fewer than two accepted pairs");
    res.mean = s1.value() / static_cast<double>(res.accepted);
    CompensatedSum s2;
    for (double x : res.samples) s2.add((x - res.mean) * (x - res.mean));
    const double var = s2.value() / static_cast<double>(res.accepted - 1);
    res.stderr_ = std::sqrt(var / static_cast<double>(res.accepted));
    return res;
}

namespace {

// Drivers of the second hull's image after the first hull is mapped out, for kappa = 0:
// zeta' = Lambda(P - v, zeta - w), w' = K(P - v, w - zeta) on [0, V].
DrivingPath image_driver_ode(const DriftFunction& L, KernelKind K, double P, double zeta0, double w0, double V,
                             double dv)
{
    const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(V / dv - 1e-9)));
    const double h = V / static_cast<double>(n);
    DrivingPath out;
    out.t0 = 0.0;
    out.dt = h;
    out.values.resize(n + 1);
    double z = zeta0, w = w0;
    out.values[0] = z;
    auto rhs = [&](double v, double zz, double ww, double& dz, double& dw) {
        dz = L(P - v, zz - ww);
        dw = kernel_value(K, P - v, ww - zz);
    };
    for (std::size_t k = 0; k < n; ++k) {
        const double v = h * static_cast<double>(k);
        double a1, b1, a2, b2, a3, b3, a4, b4;
        rhs(v, z, w, a1, b1);
        rhs(v + 0.5 * h, z + 0.5 * h * a1, w + 0.5 * h * b1, a2, b2);
        rhs(v + 0.5 * h, z + 0.5 * h * a2, w + 0.5 * h * b2, a3, b3);
        rhs(v + h, z + h * a3, w + h * b3, a4, b4);
        z += h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0;
        w += h * (b1 + 2.0 * b2 + 2.0 * b3 + b4) / 6.0;
        out.values[k + 1] = z;
    }
    return out;
}

std::vector<cplx> flow_points(FlowVariant variant, double modulus, const DrivingPath& d, const std::vector<cplx>& z)
{
    if (d.size() < 2) return z;
    LoewnerFlow flow = solve_flow(FlowKind{variant, modulus}, d, z, {});
    std::vector<cplx> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!flow.tracked[i].alive) throw DomainViolation("probe point swallowed by a hull");
        out[i] = flow.tracked[i].value;
    }
    return out;
}

std::vector<cplx> probe_grid(double p, Configuration cfg)
{
    std::vector<cplx> probes;
    if (cfg == Configuration::ChordalType) {
        for (double f : {0.5, 0.65, 0.8})
            for (int k = 0; k < 10; ++k) probes.emplace_back(-kPi + kTwoPi * (k + 0.5) / 10.0, f * p);
        for (int k = 0; k < 20; ++k) probes.emplace_back(-kPi + kTwoPi * (k + 0.5) / 20.0, p);
    }
    else {
        for (double f : {0.35, 0.425, 0.5, 0.575, 0.65})
            for (int k = 0; k < 10; ++k) probes.emplace_back(-kPi + kTwoPi * (k + 0.5) / 10.0, f * p);
    }
    return probes;
}

}  // namespace

CommutationResult kappa0_commutation_check(const DriftFunction& L, double p, double x1, double x2, double t1,
                                           double t2, double delta, const CommutationOptions& opts)
{
    const Configuration cfg = opts.config;
    const DriftKind kind = cfg == Configuration::Crossing ? DriftKind::Crossing : DriftKind::ChordalType;
    if (L.kind != kind) throw InvalidArgument("drift kind does not match the configuration");
    const DriftFunction L1 = L;
    const DriftFunction L2 = dual(L);
    const KernelKind K = other_kernel(cfg);
    ExtractionOptions eo = opts.extraction;
    eo.config = cfg;

    CommutationResult res;
    res.probes = probe_grid(p, cfg);
    if (t1 == 0.0 || t2 == 0.0) {
        res.m = p - t1 - t2;
        return res;
    }
    AnnulusSleOptions o1;
    o1.t_end = t1;
    AnnulusSleOptions o2;
    o2.t_end = t2;
    const AnnulusSleRun r1 = drive_annulus_sle(0.0, L1, kind, p, x1, x2, delta, 0, o1);
    const AnnulusSleRun r2 = drive_annulus_sle(0.0, L2, kind, p, x2, x1, delta, 0, o2);
    if (r1.collided || r2.collided) throw DomainViolation("hull collides with its marked point");

    const ImageChain c2 = extract_image_chain(p, r2.xi, r1.xi, t2, t1, 2, eo);
    const ImageChain c1 = extract_image_chain(p, r1.xi, r2.xi, t1, t2, 1, eo);
    res.m = c2.m.back();
    res.X_sum = c1.X_own.back() + c2.X_own.back();

    // Order A: hull 1 first (regular, bottom), then the image of hull 2.
    const DrivingPath zA =
        image_driver_ode(L2, K, p - t1, r1.q.back(), r1.xi.values.back(), c2.v.back(), delta);
    // Order B: hull 2 first, then the image of hull 1.
    const DrivingPath zB =
        image_driver_ode(L1, K, p - t2, r2.q.back(), r2.xi.values.back(), c1.v.back(), delta);

    const FlowVariant second = other_flow(cfg);
    const auto gA = flow_points(FlowVariant::CoveringAnnulus, p, r1.xi, res.probes);
    res.order_a = flow_points(second, p - t1, zA, gA);
    const auto gB = flow_points(second, p, r2.xi, res.probes);
    res.order_b = flow_points(FlowVariant::CoveringAnnulus, p - t2, zB, gB);

    CompensatedSum shift;
    for (std::size_t i = 0; i < res.probes.size(); ++i) shift.add((res.order_a[i] - res.order_b[i]).real());
    const double c = shift.value() / static_cast<double>(res.probes.size());
    for (std::size_t i = 0; i < res.probes.size(); ++i)
        res.sup_diff = std::max(res.sup_diff, std::abs(res.order_a[i] - res.order_b[i] - c));

    // U_k = A_{k,1} Lambda_k(m, X_k) + 3 A_{k,2} / A_{k,1} must not depend on the other time.
    auto U = [](const DriftFunction& Lk, double m, double X, double A1, double A2) {
        return A1 * Lk(m, X) + 3.0 * A2 / A1;
    };
    auto scan = [&](const ImageChain& ch, const AnnulusSleRun& own_run, const AnnulusSleRun& other_run,
                    const DriftFunction& Lown, const DriftFunction& Lother, double t_other) {
        const double other_axis = Lother(p - t_other, other_run.xi.values.back() - other_run.q.back());
        for (std::size_t i = 0; i < ch.size(); ++i) {
            const double own_axis = Lown(p - ch.s[i], own_run.xi.values[i] - own_run.q[i]);
            const double Uo = U(Lown, ch.m[i], ch.X_own[i], ch.own_jet[i][1], ch.own_jet[i][2]);
            const double Ut = U(Lother, ch.m[i], -ch.X_own[i], ch.other_jet[i][1], ch.other_jet[i][2]);
            res.max_U_dev = std::max({res.max_U_dev, std::abs(Uo - own_axis), std::abs(Ut - other_axis)});
        }
    };
    scan(c2, r2, r1, L2, L1, t1);
    scan(c1, r1, r2, L1, L2, t2);
    return res;
}

double whole_plane_modulus(const DrivingPath& xi1, const DrivingPath& xi2, double t1, double t2,
                           const ExtractionOptions& opts)
{
    if (xi1.t0 != xi2.t0 || xi1.dt != xi2.dt) throw InvalidArgument("whole-plane drivers must share t0 and dt");
    const double t0 = xi1.t0;
    if (!(t0 < 0.0)) throw InvalidArgument("whole-plane start time must be negative");
    const double p = -2.0 * t0;
    DrivingPath a = xi1, b = xi2;
    a.t0 = 0.0;
    b.t0 = 0.0;
    ExtractionOptions eo = opts;
    eo.config = Configuration::Crossing;
    // Times are snapped to the driving grid.
    auto snap = [&](double t) { return xi1.dt * std::round((t - t0) / xi1.dt); };
    const ImageChain c2 = extract_image_chain(p, b, a, snap(t2), snap(t1), 2, eo);
    return c2.m.back();
}

}  // namespace annsle
