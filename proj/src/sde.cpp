#include "annsle/sde.hpp"

#include <cmath>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

namespace annsle {

namespace {

std::size_t step_count(double T, double dt)
{
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
    if (!(T >= 0.0) || !std::isfinite(T)) throw InvalidArgument("time span must be finite and nonnegative");
    return static_cast<std::size_t>(std::llround(T / dt));
}

double circle_distance(double x)
{
    return std::abs(std::remainder(x, kTwoPi));
}

double eval_drift(const DriftFunction& L, double p, double x)
{
    try {
        return L(p, x);
    }
    catch (const PoleProximity& e) {
        throw DriftPole(e.what());
    }
}

// Integrates y' = K(tau, y - xi(tau)) over [t, t + dt] with xi linear between xa and xb.
// Sub-steps shrink like the squared distance to the singularity of K.  Returns false if the
// distance drops below eps; `hit` then receives the time at which that happened.
template <class Field>
bool rk4_marked(Field&& field, double t, double dt, double xa, double xb, double& y, double eps,
                bool periodic, double& hit)
{
    auto xi = [&](double s) { return xa + (xb - xa) * (s - t) / dt; };
    auto dist = [&](double s, double yy) {
        const double d = yy - xi(s);
        return periodic ? circle_distance(d) : std::abs(d);
    };
    double s = t;
    const double end = t + dt;
    while (s < end) {
        const double d = dist(s, y);
        if (d < eps) {
            hit = s;
            return false;
        }
        double h = eps > 0.0 ? std::min(end - s, std::max(0.05 * d * d, 1e-14)) : end - s;
        if (end - s - h < 1e-15 * dt) h = end - s;
        const double k1 = field(s, y - xi(s));
        const double k2 = field(s + 0.5 * h, y + 0.5 * h * k1 - xi(s + 0.5 * h));
        const double k3 = field(s + 0.5 * h, y + 0.5 * h * k2 - xi(s + 0.5 * h));
        const double k4 = field(s + h, y + h * k3 - xi(s + h));
        y += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        s = (h == end - s) ? end : s + h;
    }
    if (dist(end, y) < eps) {
        hit = end;
        return false;
    }
    return true;
}

}  // namespace

PathRng::PathRng(std::uint64_t seed, std::uint64_t path_index, std::uint32_t tag)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path_index), static_cast<std::uint32_t>(path_index >> 32), tag,
                      0x5eed5eedU};
    engine_.seed(seq);
}

double PathRng::normal()
{
    boost::random::normal_distribution<double> nd(0.0, 1.0);
    return nd(engine_);
}

double PathRng::uniform()
{
    boost::random::uniform_real_distribution<double> ud(0.0, 1.0);
    return ud(engine_);
}

DrivingPath sample_brownian(double T, double dt, std::uint64_t seed, std::uint64_t path_index)
{
    const std::size_t n = step_count(T, dt);
    if (n < 1) throw InvalidArgument("T must be at least dt");
    PathRng rng(seed, path_index, 1);
    DrivingPath path;
    path.t0 = 0.0;
    path.dt = dt;
    path.seed = seed;
    path.kappa = 1.0;
    path.values.resize(n + 1);
    path.values[0] = 0.0;
    const double sd = std::sqrt(dt);
    double acc = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        acc += rng.normal();
        path.values[k] = sd * acc;
    }
    return path;
}

AnnulusSleRun drive_annulus_sle(double kappa, const DriftFunction& L, DriftKind kind, double p, double x0,
                                double y0, double dt, std::uint64_t seed, const AnnulusSleOptions& opts)
{
    if (!(kappa >= 0.0)) throw InvalidArgument("kappa must be nonnegative");
    if (kind != DriftKind::Crossing && kind != DriftKind::ChordalType)
        throw InvalidArgument("annulus SLE needs a crossing or chordal-type configuration");
    if (L.kind != kind && L.family != DriftFamily::ConstZero)
        throw InvalidArgument("drift kind does not match the requested configuration");
    if (!(p > 0.0) || !std::isfinite(p)) throw InvalidArgument("modulus must be finite and positive");
    const double t_end = std::isnan(opts.t_end) ? 0.99 * p : opts.t_end;
    if (!(t_end < p)) throw ModulusExhausted("run end must stay below the modulus");
    const std::size_t n = step_count(t_end, dt);

    const bool chordal = kind == DriftKind::ChordalType;
    const KernelKind K = chordal ? KernelKind::H : KernelKind::H_I;
    auto field = [&](double s, double d) { return kernel_jet<0>(K, p - s, d).c[0].real(); };

    AnnulusSleRun run;
    run.p = p;
    run.x0 = x0;
    run.y0 = y0;
    run.kind = kind;
    run.xi.t0 = 0.0;
    run.xi.dt = dt;
    run.xi.kappa = kappa;
    run.xi.seed = seed;
    run.xi.values.reserve(n + 1);
    run.q.reserve(n + 1);
    run.xi.values.push_back(x0);
    run.q.push_back(y0);

    if (kappa == 0.0) {
        // Deterministic run: (xi, q) is an ODE system and is integrated with RK4.
        double xi = x0, q = y0;
        const double eps = chordal ? opts.collision_eps : 0.0;
        auto dist = [&](double a, double b) { return chordal ? circle_distance(a - b) : kTwoPi; };
        for (std::size_t k = 0; k < n; ++k) {
            const double t = dt * static_cast<double>(k);
            const double end = t + dt;
            double s = t;
            while (s < end) {
                const double d = dist(xi, q);
                if (d < eps) {
                    run.collided = true;
                    run.stop_time = s;
                    return run;
                }
                double h = std::min(end - s, std::max(0.05 * d * d, 1e-14));
                if (end - s - h < 1e-15 * dt) h = end - s;
                auto rhs = [&](double tau, double a, double b, double& da, double& db) {
                    da = eval_drift(L, p - tau, a - b);
                    db = field(tau, b - a);
                };
                double a1, b1, a2, b2, a3, b3, a4, b4;
                rhs(s, xi, q, a1, b1);
                rhs(s + 0.5 * h, xi + 0.5 * h * a1, q + 0.5 * h * b1, a2, b2);
                rhs(s + 0.5 * h, xi + 0.5 * h * a2, q + 0.5 * h * b2, a3, b3);
                rhs(s + h, xi + h * a3, q + h * b3, a4, b4);
                xi += h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0;
                q += h * (b1 + 2.0 * b2 + 2.0 * b3 + b4) / 6.0;
                s = (h == end - s) ? end : s + h;
            }
            if (dist(xi, q) < eps) {
                run.collided = true;
                run.stop_time = end;
                return run;
            }
            run.xi.values.push_back(xi);
            run.q.push_back(q);
        }
        run.stop_time = dt * static_cast<double>(n);
        return run;
    }

    PathRng rng(seed, opts.path_index, 2);
    const double sk = std::sqrt(kappa * dt);
    double f = x0, B = 0.0, q = y0, xi = x0;
    double t = 0.0;
    run.stop_time = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        t = dt * static_cast<double>(k);
        const double X = xi - q;
        if (chordal && circle_distance(X) < opts.collision_eps) {
            run.collided = true;
            run.stop_time = t;
            return run;
        }
        const double lam = eval_drift(L, p - t, X);
        B += rng.normal();
        const double f_new = f + lam * dt;
        const double xi_new = f_new + sk * B;
        double hit = 0.0;
        // q' = K(p - t, q - xi)
        const bool ok = rk4_marked(field, t, dt, xi, xi_new, q, chordal ? opts.collision_eps : 0.0, chordal, hit);
        if (!ok) {
            // the path keeps only full grid steps; the collision time is recorded separately
            run.collided = true;
            run.stop_time = hit;
            return run;
        }
        f = f_new;
        xi = xi_new;
        run.xi.values.push_back(xi);
        run.q.push_back(q);
    }
    run.stop_time = dt * static_cast<double>(n);
    return run;
}

DrivingPath drive_whole_plane(double kappa, double t0, double T, double dt, std::uint64_t seed,
                              std::uint64_t path_index)
{
    if (!(kappa >= 0.0)) throw InvalidArgument("kappa must be nonnegative");
    if (!(T >= t0)) throw InvalidArgument("need t0 <= T");
    const std::size_t n = step_count(T - t0, dt);
    PathRng rng(seed, path_index, 3);
    const double x = kTwoPi * rng.uniform();

    // Standard Brownian motion W on the grid with W(t0) = 0; the driver is x + sqrt(kappa) (W - W(0)).
    std::vector<double> W(n + 1, 0.0);
    const double sd = std::sqrt(dt);
    for (std::size_t k = 1; k <= n; ++k) W[k] = W[k - 1] + sd * rng.normal();
    const double t_last = t0 + dt * static_cast<double>(n);
    double W0 = 0.0;
    if (0.0 <= t0) {
        W0 = -std::sqrt(t0) * rng.normal();
    }
    else if (0.0 >= t_last) {
        W0 = W[n] + std::sqrt(-t_last) * rng.normal();
    }
    else {
        const std::size_t a = static_cast<std::size_t>(std::floor(-t0 / dt));
        const std::size_t b = std::min(a + 1, n);
        const double ta = t0 + dt * static_cast<double>(a);
        const double u = std::clamp(-ta / dt, 0.0, 1.0);
        W0 = W[a] + u * (W[b] - W[a]) + std::sqrt(u * (1.0 - u) * dt) * rng.normal();
    }
    DrivingPath path;
    path.t0 = t0;
    path.dt = dt;
    path.kappa = kappa;
    path.seed = seed;
    path.values.resize(n + 1);
    const double sk = std::sqrt(kappa);
    for (std::size_t k = 0; k <= n; ++k) path.values[k] = x + sk * (W[k] - W0);
    return path;
}

MarkedRun drive_marked_radial_or_strip(double kappa, const DriftFunction& L, MarkedGeometry geometry, double a,
                                       double b, double dt, std::uint64_t seed, double t_end,
                                       double collision_eps, std::uint64_t path_index)
{
    if (!(kappa >= 0.0)) throw InvalidArgument("kappa must be nonnegative");
    const bool radial = geometry == MarkedGeometry::Radial;
    const double d0 = radial ? circle_distance(a - b) : std::abs(a - b);
    if (!(d0 > collision_eps)) throw InvalidArgument("driver start and marked point must be distinct");
    const std::size_t n = step_count(t_end, dt);
    auto field = [&](double, double d) {
        return radial ? 1.0 / std::tan(0.5 * d) : 1.0 / std::tanh(0.5 * d);
    };
    MarkedRun run;
    run.xi.t0 = 0.0;
    run.xi.dt = dt;
    run.xi.kappa = kappa;
    run.xi.seed = seed;
    run.xi.values.push_back(a);
    run.marked.push_back(b);
    if (kappa == 0.0) {
        double xi = a, y = b;
        auto dist = [&](double u, double v) { return radial ? circle_distance(u - v) : std::abs(u - v); };
        auto rhs = [&](double u, double v, double& du, double& dv) {
            du = eval_drift(L, std::numeric_limits<double>::infinity(), u - v);
            dv = field(0.0, v - u);
        };
        for (std::size_t k = 0; k < n; ++k) {
            const double end = dt * static_cast<double>(k + 1);
            double s = dt * static_cast<double>(k);
            while (s < end) {
                const double d = dist(xi, y);
                if (d < collision_eps) {
                    run.collided = true;
                    run.stop_time = s;
                    return run;
                }
                double h = std::min(end - s, std::max(0.05 * d * d, 1e-14));
                if (end - s - h < 1e-15 * dt) h = end - s;
                double a1, b1, a2, b2, a3, b3, a4, b4;
                rhs(xi, y, a1, b1);
                rhs(xi + 0.5 * h * a1, y + 0.5 * h * b1, a2, b2);
                rhs(xi + 0.5 * h * a2, y + 0.5 * h * b2, a3, b3);
                rhs(xi + h * a3, y + h * b3, a4, b4);
                xi += h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0;
                y += h * (b1 + 2.0 * b2 + 2.0 * b3 + b4) / 6.0;
                s = (h == end - s) ? end : s + h;
            }
            run.xi.values.push_back(xi);
            run.marked.push_back(y);
        }
        run.stop_time = dt * static_cast<double>(n);
        return run;
    }

    PathRng rng(seed, path_index, 4);
    const double sk = std::sqrt(kappa * dt);
    double xi = a, y = b;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = dt * static_cast<double>(k);
        const double lam = eval_drift(L, std::numeric_limits<double>::infinity(), xi - y);
        const double xi_new = xi + lam * dt + sk * rng.normal();
        double hit = 0.0;
        const bool ok = rk4_marked(field, t, dt, xi, xi_new, y, collision_eps, radial, hit);
        if (!ok) {
            run.collided = true;
            run.stop_time = hit;
            return run;
        }
        xi = xi_new;
        run.xi.values.push_back(xi);
        run.marked.push_back(y);
    }
    run.stop_time = dt * static_cast<double>(n);
    return run;
}

DiscDriverRun sample_disc_driver(double kappa, const DriftFunction& L, double p_burn, double p_stop, double dt,
                                 std::uint64_t seed, double y0, std::uint64_t path_index)
{
    if (!(kappa >= 0.0)) throw InvalidArgument("kappa must be nonnegative");
    if (!(p_burn > p_stop && p_stop > 0.0)) throw InvalidArgument("need p_burn > p_stop > 0");
    if (L.kind != DriftKind::Crossing) throw InvalidArgument("disc driver needs a crossing drift");
    const DriftFunction LI = dual(L);
    const std::size_t n = step_count(p_burn - p_stop, dt);
    PathRng rng(seed, path_index, 5);
    const double sk = std::sqrt(kappa * dt);
    auto hi = [](double p, double x) { return kernel_jet<0>(KernelKind::H_I, p, x).c[0].real(); };

    DiscDriverRun run;
    run.xi.t0 = -p_burn;
    run.xi.dt = dt;
    run.xi.kappa = kappa;
    run.xi.seed = seed;
    run.x.resize(n + 1);
    run.q.resize(n + 1);
    run.xi.values.resize(n + 1);
    double X = kTwoPi * rng.uniform();
    double q = y0;
    double h_prev = hi(p_burn, X);
    run.x[0] = X;
    run.q[0] = q;
    run.xi.values[0] = q + X;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = -p_burn + dt * static_cast<double>(k);
        const double phi = LI(-t, X) + h_prev;
        X += phi * dt + sk * rng.normal();
        const double h_next = hi(-(t + dt), X);
        q -= 0.5 * dt * (h_prev + h_next);
        h_prev = h_next;
        run.x[k + 1] = X;
        run.q[k + 1] = q;
        run.xi.values[k + 1] = q + X;
    }
    return run;
}

}  // namespace annsle
