#include "annsle/loewner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace annsle {

namespace {

constexpr cplx kI{0.0, 1.0};

template <int N>
Jet<N> schwarz_kernel(bool inverted, double q, const Jet<N>& w)
{
    // S(q, w) = i H(q, -i log w) and likewise for S_I.
    const Jet<N> z = log(w) * (-kI);
    const Jet<N> h = kernel_jet<N>(inverted ? KernelKind::H_I : KernelKind::H, q, z.c[0]);
    return compose<N>(h.c, z) * kI;
}

template <int N>
Jet<N> covering_kernel(bool inverted, double q, const Jet<N>& u, double xi)
{
    const Jet<N> z = u - cplx(xi);
    const Jet<N> h = kernel_jet<N>(inverted ? KernelKind::H_I : KernelKind::H, q, z.c[0]);
    return compose<N>(h.c, z);
}

// Right-hand side of the Loewner equation in the integration coordinates.
template <int N>
Jet<N> field(const FlowKind& kind, double t, double xi, const Jet<N>& u)
{
    const double p = kind.modulus;
    const cplx e = std::polar(1.0, xi);
    switch (kind.variant) {
    case FlowVariant::Radial:
        return u * (e + u) / (e - u);
    case FlowVariant::CoveringRadial:
        return cot_half(u - cplx(xi));
    case FlowVariant::Annulus:
        return u * schwarz_kernel<N>(false, p - t, u / e);
    case FlowVariant::CoveringAnnulus:
        return covering_kernel<N>(false, p - t, u, xi);
    case FlowVariant::InvertedAnnulus:
        return u * schwarz_kernel<N>(true, p - t, u / e);
    case FlowVariant::InvertedCoveringAnnulus:
        return covering_kernel<N>(true, p - t, u, xi);
    case FlowVariant::WholePlane: {
        // h = e^t g_I
        const double et = std::exp(t);
        return 2.0 * e * et * u / (e * et - u);
    }
    case FlowVariant::CoveringWholePlane: {
        // h = g_I - i t; cot(w/2) - i = 2i / (e^{iw} - 1)
        const Jet<N> w = u + cplx(-xi, t);
        return 2.0 * kI / (exp(w * kI) - 1.0);
    }
    case FlowVariant::InvertedWholePlane: {
        // k = e^{-t} g
        const double et = std::exp(t);
        return 2.0 * et * u * u / (e - et * u);
    }
    case FlowVariant::Disc:
        return u * schwarz_kernel<N>(true, -t, u / e);
    case FlowVariant::CoveringDisc:
        return covering_kernel<N>(true, -t, u, xi);
    case FlowVariant::InvertedCoveringDisc:
        return covering_kernel<N>(false, -t, u, xi);
    case FlowVariant::Strip:
        return coth_half(u - cplx(xi));
    }
    return Jet<N>();
}

// Integration coordinates -> map value.
cplx to_actual(const FlowKind& kind, double t, cplx u)
{
    switch (kind.variant) {
    case FlowVariant::WholePlane: return std::exp(-t) * u;
    case FlowVariant::CoveringWholePlane: return u + cplx(0.0, t);
    case FlowVariant::InvertedWholePlane: return std::exp(t) * u;
    default: return u;
    }
}

cplx to_state(const FlowKind& kind, double t, cplx g)
{
    switch (kind.variant) {
    case FlowVariant::WholePlane: return std::exp(t) * g;
    case FlowVariant::CoveringWholePlane: return g - cplx(0.0, t);
    case FlowVariant::InvertedWholePlane: return std::exp(-t) * g;
    default: return g;
    }
}

Jet<3> jet_to_actual(const FlowKind& kind, double t, Jet<3> j)
{
    switch (kind.variant) {
    case FlowVariant::WholePlane: return j * std::exp(-t);
    case FlowVariant::CoveringWholePlane: j.c[0] += cplx(0.0, t); return j;
    case FlowVariant::InvertedWholePlane: return j * std::exp(t);
    default: return j;
    }
}

// State at t0 of the point z (the identity, or the asymptote of the whole-plane/disc maps).
cplx initial_state(const FlowKind& kind, double t0, cplx z)
{
    if (kind.variant == FlowVariant::InvertedCoveringDisc) return z - cplx(0.0, t0);
    return z;
}

cplx initial_inverse(const FlowKind& kind, double t0, cplx u)
{
    if (kind.variant == FlowVariant::InvertedCoveringDisc) return u + cplx(0.0, t0);
    return u;
}

void check_time_range(const FlowKind& kind, double t0, double t_end)
{
    if (kind.is_annulus()) {
        if (!(kind.modulus > 0.0) || std::isinf(kind.modulus))
            throw InvalidArgument("annulus flows need a finite positive modulus");
        if (t_end - t0 >= kind.modulus)
            throw ModulusExhausted("t=" + std::to_string(t_end) + " reaches modulus " +
                                   std::to_string(kind.modulus));
    }
    if (kind.is_disc() && t_end >= 0.0)
        throw ModulusExhausted("disc flows are defined for t < 0");
}

// Integrates one jet from t_from to t_to (either direction) with grid-aligned sub-steps.
// Returns false if the point hits the singularity; t_stop then holds the time.
template <int N>
bool integrate(const FlowKind& kind, const DrivingPath& drv, Jet<N>& u, double t_from, double t_to,
               const StepPolicy& pol, double& t_stop)
{
    const double sgn = t_to >= t_from ? 1.0 : -1.0;
    const double tiny = 1e-12 * drv.dt;
    double s = t_from;
    while (sgn * (t_to - s) > tiny) {
        const double pos = (s - drv.t0) / drv.dt;
        double b;
        if (sgn > 0) {
            const double k = std::floor(pos + 1e-9) + 1.0;
            b = std::min(drv.t0 + drv.dt * k, t_to);
        }
        else {
            const double k = std::ceil(pos - 1e-9) - 1.0;
            b = std::max(drv.t0 + drv.dt * k, t_to);
        }
        while (sgn * (b - s) > tiny) {
            const double d = singularity_distance(kind, s, drv.at(s), to_actual(kind, s, u.c[0]));
            if (!(d >= pol.swallow_eps)) {
                t_stop = s;
                return false;
            }
            const double r = d / pol.distance_scale;
            double h = drv.dt * std::min(1.0, r * r);
            if (h < pol.min_dt) {
                t_stop = s;
                return false;
            }
            const double rem = sgn * (b - s);
            const bool last = h >= rem;
            if (last) h = rem;
            const double hs = sgn * h;
            const double sm = s + 0.5 * hs;
            const double s1 = last ? b : s + hs;
            const double xm = drv.at(sm);
            const Jet<N> k1 = field<N>(kind, s, drv.at(s), u);
            const Jet<N> k2 = field<N>(kind, sm, xm, u + k1 * (0.5 * hs));
            const Jet<N> k3 = field<N>(kind, sm, xm, u + k2 * (0.5 * hs));
            const Jet<N> k4 = field<N>(kind, s1, drv.at(s1), u + k3 * hs);
            u += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (hs / 6.0);
            s = s1;
            for (const auto& v : u.c) {
                if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
                    t_stop = s;
                    return false;
                }
            }
        }
        s = b;
    }
    t_stop = t_to;
    return true;
}

const std::map<std::string, FlowVariant>& variant_table()
{
    static const std::map<std::string, FlowVariant> table = {
        {"radial", FlowVariant::Radial},
        {"covering-radial", FlowVariant::CoveringRadial},
        {"annulus", FlowVariant::Annulus},
        {"covering-annulus", FlowVariant::CoveringAnnulus},
        {"inverted-annulus", FlowVariant::InvertedAnnulus},
        {"inverted-covering-annulus", FlowVariant::InvertedCoveringAnnulus},
        {"whole-plane", FlowVariant::WholePlane},
        {"covering-whole-plane", FlowVariant::CoveringWholePlane},
        {"inverted-whole-plane", FlowVariant::InvertedWholePlane},
        {"disc", FlowVariant::Disc},
        {"covering-disc", FlowVariant::CoveringDisc},
        {"inverted-covering-disc", FlowVariant::InvertedCoveringDisc},
        {"strip", FlowVariant::Strip},
    };
    return table;
}

}  // namespace

bool FlowKind::is_annulus() const
{
    return variant == FlowVariant::Annulus || variant == FlowVariant::CoveringAnnulus ||
           variant == FlowVariant::InvertedAnnulus || variant == FlowVariant::InvertedCoveringAnnulus;
}

bool FlowKind::is_disc() const
{
    return variant == FlowVariant::Disc || variant == FlowVariant::CoveringDisc ||
           variant == FlowVariant::InvertedCoveringDisc;
}

bool FlowKind::is_whole_plane() const
{
    return variant == FlowVariant::WholePlane || variant == FlowVariant::CoveringWholePlane ||
           variant == FlowVariant::InvertedWholePlane;
}

bool FlowKind::is_covering() const
{
    switch (variant) {
    case FlowVariant::CoveringRadial:
    case FlowVariant::CoveringAnnulus:
    case FlowVariant::InvertedCoveringAnnulus:
    case FlowVariant::CoveringWholePlane:
    case FlowVariant::CoveringDisc:
    case FlowVariant::InvertedCoveringDisc:
    case FlowVariant::Strip:
        return true;
    default:
        return false;
    }
}

const char* variant_name(FlowVariant v)
{
    for (const auto& [name, value] : variant_table())
        if (value == v) return name.c_str();
    return "?";
}

FlowVariant parse_variant(const std::string& name)
{
    auto it = variant_table().find(name);
    if (it == variant_table().end()) throw InvalidArgument("unknown flow kind '" + name + "'");
    return it->second;
}

double DrivingPath::at(double t) const
{
    const double pos = (t - t0) / dt;
    const double n = static_cast<double>(values.size() - 1);
    if (pos < -1e-9 || pos > n + 1e-9) {
        std::ostringstream os;
        os << "time " << t << " outside driving span [" << t0 << ", " << t_end() << "]";
        throw InvalidArgument(os.str());
    }
    if (pos <= 0.0) return values.front();
    if (pos >= n) return values.back();
    const double k = std::floor(pos);
    const auto i = static_cast<std::size_t>(k);
    const double f = pos - k;
    if (f == 0.0) return values[i];
    return values[i] + f * (values[i + 1] - values[i]);
}

void DrivingPath::validate() const
{
    if (values.size() < 2) throw InvalidArgument("driving path needs at least two samples");
    if (!(dt > 0.0)) throw InvalidArgument("driving path needs dt > 0");
}

DrivingPath constant_path(double value, double t0, double t_end, double dt)
{
    DrivingPath d;
    d.t0 = t0;
    d.dt = dt;
    const auto n = static_cast<std::size_t>(std::llround((t_end - t0) / dt));
    d.values.assign(std::max<std::size_t>(n, 1) + 1, value);
    return d;
}

double singularity_distance(const FlowKind& kind, double t, double xi, cplx value)
{
    const double p = kind.modulus;
    const cplx e = std::polar(1.0, xi);
    const cplx z = value - xi;
    switch (kind.variant) {
    case FlowVariant::Radial:
    case FlowVariant::WholePlane:
    case FlowVariant::InvertedWholePlane:
    case FlowVariant::Annulus:
        return std::abs(value - e);
    case FlowVariant::CoveringRadial:
    case FlowVariant::CoveringWholePlane:
        return pole_distance(KernelKind::H, kInfModulus, z);
    case FlowVariant::CoveringAnnulus:
        return pole_distance(KernelKind::H, p - t, z);
    case FlowVariant::InvertedAnnulus:
        return std::abs(value - std::exp(-(p - t)) * e);
    case FlowVariant::InvertedCoveringAnnulus:
        return pole_distance(KernelKind::H_I, p - t, z);
    case FlowVariant::Disc:
        return std::abs(value - std::exp(t) * e);
    case FlowVariant::CoveringDisc:
        return pole_distance(KernelKind::H_I, -t, z);
    case FlowVariant::InvertedCoveringDisc:
        return pole_distance(KernelKind::H, -t, z);
    case FlowVariant::Strip: {
        const double k = std::round(z.imag() / kTwoPi);
        return std::abs(z - cplx(0.0, kTwoPi * k));
    }
    }
    return 0.0;
}

LoewnerFlow start_flow(const FlowKind& kind, double t0, const std::vector<cplx>& seeds,
                       const std::vector<cplx>& jet_bases)
{
    LoewnerFlow flow;
    flow.kind = kind;
    flow.t0 = t0;
    flow.time = t0;
    int id = 0;
    for (const cplx& z : seeds) {
        TrackedPoint tp;
        tp.id = id++;
        tp.seed = z;
        tp.value = to_actual(kind, t0, initial_state(kind, t0, z));
        flow.tracked.push_back(tp);
        flow.state.push_back(initial_state(kind, t0, z));
    }
    for (const cplx& b : jet_bases) {
        Jet<3> j = Jet<3>::variable(initial_state(kind, t0, b));
        flow.jet_state.push_back(j);
        BoundaryJet bj;
        bj.base = b;
        bj.jet = jet_to_actual(kind, t0, j);
        flow.jets.push_back(bj);
    }
    return flow;
}

void advance_flow(LoewnerFlow& flow, const DrivingPath& driving, double t_end, const StepPolicy& policy)
{
    driving.validate();
    if (t_end < flow.time) throw InvalidArgument("advance_flow cannot run backwards");
    check_time_range(flow.kind, flow.t0, t_end);
    for (std::size_t i = 0; i < flow.tracked.size(); ++i) {
        auto& tp = flow.tracked[i];
        if (!tp.alive) continue;
        Jet<0> u(flow.state[i]);
        double t_stop = t_end;
        if (!integrate<0>(flow.kind, driving, u, flow.time, t_end, policy, t_stop)) {
            tp.alive = false;
            tp.swallow_time = t_stop;
        }
        flow.state[i] = u.c[0];
        tp.value = to_actual(flow.kind, tp.alive ? t_end : t_stop, u.c[0]);
    }
    for (std::size_t i = 0; i < flow.jets.size(); ++i) {
        auto& bj = flow.jets[i];
        if (!bj.alive) continue;
        Jet<3> u = flow.jet_state[i];
        double t_stop = t_end;
        if (!integrate<3>(flow.kind, driving, u, flow.time, t_end, policy, t_stop)) {
            bj.alive = false;
            bj.swallow_time = t_stop;
        }
        flow.jet_state[i] = u;
        bj.jet = jet_to_actual(flow.kind, bj.alive ? t_end : t_stop, u);
    }
    flow.time = t_end;
    flow.capacity = capacity_of(flow);
}

LoewnerFlow solve_flow(const FlowKind& kind, const DrivingPath& driving, const std::vector<cplx>& seeds,
                       const std::vector<cplx>& jet_bases, const StepPolicy& policy)
{
    LoewnerFlow flow = start_flow(kind, driving.t0, seeds, jet_bases);
    advance_flow(flow, driving, driving.t_end(), policy);
    return flow;
}

JetValues boundary_jet(const LoewnerFlow& flow, cplx base)
{
    for (const auto& bj : flow.jets) {
        if (bj.base != base) continue;
        if (!bj.alive) throw Swallowed("jet base swallowed at t=" + std::to_string(*bj.swallow_time));
        JetValues v;
        v.g = bj.jet.derivative(0);
        v.g1 = bj.jet.derivative(1);
        v.g2 = bj.jet.derivative(2);
        v.g3 = bj.jet.derivative(3);
        v.schwarzian = v.g3 / v.g1 - 1.5 * (v.g2 / v.g1) * (v.g2 / v.g1);
        return v;
    }
    throw InvalidArgument("no jet registered at the requested base");
}

TraceSample compute_trace(const FlowKind& kind, const DrivingPath& driving,
                          const std::vector<double>& sample_times, const StepPolicy& policy)
{
    driving.validate();
    TraceSample out;
    const double eps = 0.5 * std::sqrt(driving.dt);
    const double p = kind.modulus;
    for (double t : sample_times) {
        check_time_range(kind, driving.t0, t);
        const double xi = driving.at(t);
        const cplx e = std::polar(1.0, xi);
        cplx tip, start;
        switch (kind.variant) {
        case FlowVariant::Radial:
        case FlowVariant::Annulus:
        case FlowVariant::InvertedWholePlane:
            tip = e;
            start = e * (1.0 - eps);
            break;
        case FlowVariant::WholePlane:
            tip = e;
            start = e * (1.0 + eps);
            break;
        case FlowVariant::InvertedAnnulus:
            tip = std::exp(-(p - t)) * e;
            start = tip * (1.0 + eps);
            break;
        case FlowVariant::Disc:
            tip = std::exp(t) * e;
            start = tip * (1.0 + eps);
            break;
        case FlowVariant::CoveringRadial:
        case FlowVariant::CoveringAnnulus:
        case FlowVariant::InvertedCoveringDisc:
        case FlowVariant::Strip:
            tip = xi;
            start = cplx(xi, eps);
            break;
        case FlowVariant::CoveringWholePlane:
            tip = xi;
            start = cplx(xi, -eps);
            break;
        case FlowVariant::InvertedCoveringAnnulus:
            tip = cplx(xi, p - t);
            start = cplx(xi, p - t - eps);
            break;
        case FlowVariant::CoveringDisc:
            tip = cplx(xi, -t);
            start = cplx(xi, -t - eps);
            break;
        }
        out.times.push_back(t);
        if (t <= driving.t0) {
            // Zero-length reverse flow: the trace starts at the driving point itself.
            out.points.push_back(initial_inverse(kind, driving.t0, to_state(kind, t, tip)));
            continue;
        }
        Jet<0> u(to_state(kind, t, start));
        double t_stop = driving.t0;
        if (!integrate<0>(kind, driving, u, t, driving.t0, policy, t_stop))
            throw ReverseBlowup("reverse flow from t=" + std::to_string(t) + " failed at s=" +
                                std::to_string(t_stop));
        out.points.push_back(initial_inverse(kind, driving.t0, u.c[0]));
    }
    return out;
}

double capacity_of(const LoewnerFlow& flow)
{
    if (flow.kind.is_whole_plane()) return flow.time;
    return flow.time - flow.t0;
}

}  // namespace annsle
