#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "annsle/drifts.hpp"
#include "annsle/ensemble.hpp"
#include "annsle/kernels.hpp"
#include "annsle/loewner.hpp"
#include "annsle/sde.hpp"

using json = nlohmann::ordered_json;

namespace annsle {
namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string fmt(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double parse_real(const std::string& s)
{
    if (s == "inf" || s == "+inf" || s == "infinity") return kInfModulus;
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    }
    catch (const std::exception&) {
        throw InvalidArgument("not a number: '" + s + "'");
    }
    if (pos != s.size()) throw InvalidArgument("not a number: '" + s + "'");
    return v;
}

cplx parse_complex(const std::string& s)
{
    const auto comma = s.find(',');
    if (comma == std::string::npos) return {parse_real(s), 0.0};
    return {parse_real(s.substr(0, comma)), parse_real(s.substr(comma + 1))};
}

// "a:b:n" is n points from a to b inclusive; "a,b,c" is an explicit list.
std::vector<double> parse_grid(const std::string& s)
{
    std::vector<double> out;
    if (s.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ':')) parts.push_back(item);
        if (parts.size() != 3) throw InvalidArgument("grid must be a:b:n, got '" + s + "'");
        const double a = parse_real(parts[0]), b = parse_real(parts[1]);
        const long n = std::lround(parse_real(parts[2]));
        if (n < 1) throw InvalidArgument("grid needs at least one point");
        if (n == 1) return {a};
        for (long k = 0; k < n; ++k) out.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
        return out;
    }
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(item));
    if (out.empty()) throw InvalidArgument("empty grid");
    return out;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : path_(path)
    {
        if (!path.empty() && path != "-") {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) throw InvalidArgument("cannot open '" + path + "' for writing");
        }
    }
    std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
    void row(const std::vector<std::string>& cells)
    {
        for (std::size_t i = 0; i < cells.size(); ++i) out() << (i ? "," : "") << cells[i];
        out() << '\n';
    }

private:
    std::string path_;
    std::ofstream file_;
};

struct Invocation {
    std::string command;
    std::vector<std::string> args;  // the subcommand arguments, replayable verbatim
    CLI::App* sub = nullptr;
};

json kernel_config_json()
{
    const KernelConfig cfg;
    return json{{"modular_switch", cfg.modular_switch},
                {"term_tolerance", cfg.term_tolerance},
                {"max_terms", cfg.max_terms}};
}

void write_manifest(const std::string& path, const Invocation& inv, std::uint64_t seed,
                    const std::vector<std::string>& outputs, const json& summary)
{
    if (path.empty()) return;
    json params = json::object();
    for (const CLI::Option* opt : inv.sub->get_options()) {
        if (opt->get_name() == "--help" || opt->count() == 0) continue;
        const auto& res = opt->results();
        params[opt->get_name()] = res.size() == 1 ? json(res[0]) : json(res);
    }
    json m{{"command", inv.command},
           {"parameters", params},
           {"arguments", inv.args},
           {"seed", seed},
           {"tool_version", kToolVersion},
           {"kernel_config", kernel_config_json()},
           {"outputs", outputs},
           {"summary", summary}};
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InvalidArgument("cannot open manifest '" + path + "'");
    f << m.dump(2) << '\n';
}

std::vector<std::string> outputs_of(std::initializer_list<std::string> files)
{
    std::vector<std::string> out;
    for (const auto& f : files)
        if (!f.empty() && f != "-") out.push_back(f);
    return out;
}

KernelKind parse_kind(const std::string& s)
{
    if (s == "S") return KernelKind::S;
    if (s == "H") return KernelKind::H;
    if (s == "SI" || s == "S_I") return KernelKind::S_I;
    if (s == "HI" || s == "H_I") return KernelKind::H_I;
    throw InvalidArgument("unknown kernel kind '" + s + "'");
}

Configuration parse_config(const std::string& s)
{
    if (s == "crossing") return Configuration::Crossing;
    if (s == "chordal") return Configuration::ChordalType;
    throw InvalidArgument("unknown configuration '" + s + "'");
}

// ----------------------------------------------------------------------------------------------

struct KernelEvalArgs {
    std::string kind, p = "inf", z, grid, out, manifest;
    int order = 0;
};

void add_kernel_eval(CLI::App& app, KernelEvalArgs& a)
{
    app.add_option("--kind", a.kind, "S, H, SI or HI")->required();
    app.add_option("--p", a.p, "modulus, or inf");
    app.add_option("--z", a.z, "argument re,im (w for S and SI, z for H and HI)")->required();
    app.add_option("--order", a.order, "derivative order (H and HI only)")->check(CLI::Range(0, 3));
    app.add_option("--grid", a.grid, "real-part sweep a:b:n at the imaginary part of --z");
    app.add_option("--out", a.out, "CSV file (default stdout)");
    app.add_option("--manifest", a.manifest, "JSON manifest file");
}

int run_kernel_eval(const KernelEvalArgs& a, const Invocation& inv)
{
    const KernelKind kind = parse_kind(a.kind);
    const double p = parse_real(a.p);
    const cplx z0 = parse_complex(a.z);
    const bool series = kind == KernelKind::S || kind == KernelKind::S_I;
    if (series && a.order != 0) throw InvalidArgument("S and SI are evaluated at order 0 only");
    std::vector<cplx> points;
    if (a.grid.empty())
        points.push_back(z0);
    else
        for (double x : parse_grid(a.grid)) points.emplace_back(x, z0.imag());

    CsvWriter csv(a.out);
    csv.row({"p", "re_z", "im_z", "order", "re_val", "im_val"});
    for (const cplx& z : points) {
        cplx v;
        try {
            v = series ? eval_kernel(kind, p, z) : eval_H(kind, p, z, a.order);
        }
        catch (const PoleProximity& e) {
            std::cerr << "pole at p=" << fmt(p) << " z=" << fmt(z.real()) << "," << fmt(z.imag()) << ": " << e.what()
                      << '\n';
            throw;
        }
        csv.row({fmt(p), fmt(z.real()), fmt(z.imag()), std::to_string(a.order), fmt(v.real()), fmt(v.imag())});
    }
    write_manifest(a.manifest, inv, 0, outputs_of({a.out}), json{{"points", points.size()}});
    return 0;
}

// ----------------------------------------------------------------------------------------------

struct PdeCheckArgs {
    std::string family, pde, pgrid, xgrid, out, manifest;
    double kappa = 0.0;
    double tolerance = 1e-5;
    double h_p = 1e-4;
};

void add_pde_check(CLI::App& app, PdeCheckArgs& a)
{
    app.add_option("--family", a.family, "drift id, e.g. kappa4/1?C=0")->required();
    app.add_option("--kappa", a.kappa, "kappa")->required();
    app.add_option("--pde", a.pde, "crossing, chordal, radial or strip (default: the family's own)");
    app.add_option("--pgrid", a.pgrid, "p grid (a:b:n or list)");
    app.add_option("--xgrid", a.xgrid, "x grid (a:b:n or list)");
    app.add_option("--tolerance", a.tolerance, "pass threshold on the max residual");
    app.add_option("--hp", a.h_p, "p step of the finite difference");
    app.add_option("--out", a.out, "CSV file (default stdout)");
    app.add_option("--manifest", a.manifest, "JSON manifest file");
}

bool on_lattice(double x, double period)
{
    const double r = std::remainder(x, period);
    return std::abs(r) < 1e-9;
}

int run_pde_check(const PdeCheckArgs& a, const Invocation& inv)
{
    const DriftFunction L = parse_drift(a.family);
    const PdeKind pde = a.pde.empty() ? natural_pde(L) : parse_pde(a.pde);
    const bool stationary = pde == PdeKind::Radial || pde == PdeKind::Strip;
    const std::vector<double> pg = parse_grid(a.pgrid.empty() ? (stationary ? "1" : "0.5:3:6") : a.pgrid);
    const std::vector<double> xg = parse_grid(a.xgrid.empty() ? "0.3:5.98:12" : a.xgrid);

    const bool kernel_poles = pde != PdeKind::CrossingAnnulus;
    const bool drift_poles = L.pole_set != "none" && L.pole_set != "tabulated";
    for (double x : xg) {
        const bool hit = pde == PdeKind::Strip ? x == 0.0 : on_lattice(x, kTwoPi);
        if ((kernel_poles || drift_poles) && hit)
            throw PoleProximity("x grid point " + fmt(x) + " lies on the pole set");
    }
    for (double p : pg)
        if (!stationary && !(p > a.h_p)) throw InvalidArgument("p grid point " + fmt(p) + " too small");

    const auto res = pde_residual(L, a.kappa, pde, pg, xg, a.h_p);
    CsvWriter csv(a.out);
    csv.row({"p", "x", "residual"});
    double worst = 0.0;
    for (std::size_t i = 0; i < pg.size(); ++i)
        for (std::size_t j = 0; j < xg.size(); ++j) {
            if (!std::isfinite(res[i][j])) throw DriftPole("non-finite residual at x=" + fmt(xg[j]));
            worst = std::max(worst, std::abs(res[i][j]));
            csv.row({fmt(pg[i]), fmt(xg[j]), fmt(res[i][j])});
        }
    const bool pass = worst < a.tolerance;
    std::cerr << "max_residual," << fmt(worst) << "\nresult," << (pass ? "pass" : "fail") << '\n';
    write_manifest(a.manifest, inv, 0, outputs_of({a.out}),
                   json{{"family", L.id}, {"max_residual", worst}, {"pass", pass}});
    return pass ? 0 : 1;
}

// ----------------------------------------------------------------------------------------------

struct SimulateArgs {
    std::string family = "const-zero", mode = "annulus", out, manifest;
    double kappa = 2.0, p = 4.0, x0 = 0.0, y0 = kPi, dt = 1e-3, t_end = 0.5, t0 = -8.0;
    double p_burn = 30.0, p_stop = 1.0;
    std::uint64_t seed = 0;
    int paths = 1;
};

void add_simulate(CLI::App& app, SimulateArgs& a)
{
    app.add_option("--mode", a.mode, "annulus, marked, whole-plane or disc");
    app.add_option("--family", a.family, "drift id");
    app.add_option("--kappa", a.kappa, "kappa");
    app.add_option("--p", a.p, "annulus modulus");
    app.add_option("--x0", a.x0, "start of the driver (annulus and marked)");
    app.add_option("--y0", a.y0, "marked point (annulus and marked)");
    app.add_option("--dt", a.dt, "time step");
    app.add_option("--t-end", a.t_end, "end time");
    app.add_option("--t0", a.t0, "start time (whole-plane)");
    app.add_option("--p-burn", a.p_burn, "burn-in modulus (disc)");
    app.add_option("--p-stop", a.p_stop, "final modulus (disc)");
    app.add_option("--paths", a.paths, "number of paths")->check(CLI::PositiveNumber);
    app.add_option("--seed", a.seed, "random seed")->required();
    app.add_option("--out", a.out, "CSV file (default stdout)");
    app.add_option("--manifest", a.manifest, "JSON manifest file");
}

int run_simulate(const SimulateArgs& a, const Invocation& inv)
{
    CsvWriter csv(a.out);
    csv.row({"path", "t", "xi", "aux"});
    json runs = json::array();
    for (int k = 0; k < a.paths; ++k) {
        const auto idx = static_cast<std::uint64_t>(k);
        DrivingPath xi;
        std::vector<double> aux;
        json info{{"path", k}};
        if (a.mode == "annulus") {
            const DriftFunction L = parse_drift(a.family);
            if (L.kind != DriftKind::Crossing && L.kind != DriftKind::ChordalType)
                throw InvalidArgument("annulus mode needs a crossing or chordal drift");
            AnnulusSleOptions o;
            o.t_end = a.t_end;
            o.path_index = idx;
            const AnnulusSleRun r = drive_annulus_sle(a.kappa, L, L.kind, a.p, a.x0, a.y0, a.dt, a.seed, o);
            xi = r.xi;
            aux = r.q;
            info["stop_time"] = r.stop_time;
            info["collided"] = r.collided;
        }
        else if (a.mode == "marked") {
            const DriftFunction L = parse_drift(a.family);
            if (L.kind != DriftKind::RadialMarked && L.kind != DriftKind::StripMarked)
                throw InvalidArgument("marked mode needs a radial or strip drift");
            const MarkedGeometry g =
                L.kind == DriftKind::RadialMarked ? MarkedGeometry::Radial : MarkedGeometry::Strip;
            const MarkedRun r =
                drive_marked_radial_or_strip(a.kappa, L, g, a.x0, a.y0, a.dt, a.seed, a.t_end, 1e-4, idx);
            xi = r.xi;
            aux = r.marked;
            info["stop_time"] = r.stop_time;
            info["collided"] = r.collided;
        }
        else if (a.mode == "whole-plane") {
            xi = drive_whole_plane(a.kappa, a.t0, a.t_end, a.dt, a.seed, idx);
            aux.assign(xi.size(), 0.0);
        }
        else if (a.mode == "disc") {
            const DriftFunction L = parse_drift(a.family);
            const DiscDriverRun r = sample_disc_driver(a.kappa, L, a.p_burn, a.p_stop, a.dt, a.seed, 0.0, idx);
            xi = r.xi;
            aux = r.q;
        }
        else {
            throw InvalidArgument("unknown mode '" + a.mode + "'");
        }
        for (std::size_t i = 0; i < xi.size(); ++i)
            csv.row({std::to_string(k), fmt(xi.time(i)), fmt(xi.values[i]), fmt(i < aux.size() ? aux[i] : 0.0)});
        runs.push_back(info);
    }
    write_manifest(a.manifest, inv, a.seed, outputs_of({a.out}), json{{"runs", runs}});
    return 0;
}

// ----------------------------------------------------------------------------------------------

struct TraceArgs {
    std::string variant = "radial", driver = "constant", times, track, out, track_out, manifest;
    double p = kInfModulus, value = 0.0, kappa = 2.0, t0 = 0.0, t_end = 1.0, dt = 1e-3;
    std::uint64_t seed = 0;
};

void add_trace(CLI::App& app, TraceArgs& a)
{
    app.add_option("--variant", a.variant, "flow variant, e.g. radial, covering-annulus");
    app.add_option("--p", a.p, "modulus (annulus variants)");
    app.add_option("--driver", a.driver, "constant or brownian");
    app.add_option("--value", a.value, "constant driver value");
    app.add_option("--kappa", a.kappa, "Brownian driver variance");
    app.add_option("--seed", a.seed, "seed (brownian driver)");
    app.add_option("--t0", a.t0, "start time");
    app.add_option("--t-end", a.t_end, "end time");
    app.add_option("--dt", a.dt, "driver grid step");
    app.add_option("--times", a.times, "sample times (a:b:n or list)")->required();
    app.add_option("--track", a.track, "points to carry to t-end, re,im;re,im;...");
    app.add_option("--out", a.out, "trace CSV (default stdout)");
    app.add_option("--track-out", a.track_out, "tracked-point CSV");
    app.add_option("--manifest", a.manifest, "JSON manifest file");
}

int run_trace(const TraceArgs& a, const Invocation& inv)
{
    FlowKind kind;
    kind.variant = parse_variant(a.variant);
    kind.modulus = a.p;
    DrivingPath drv;
    if (a.driver == "constant") {
        drv = constant_path(a.value, a.t0, a.t_end, a.dt);
    }
    else if (a.driver == "brownian") {
        drv = sample_brownian(a.t_end - a.t0, a.dt, a.seed);
        drv.t0 = a.t0;
        for (double& x : drv.values) x = a.value + std::sqrt(a.kappa) * x;
        drv.kappa = a.kappa;
    }
    else {
        throw InvalidArgument("unknown driver '" + a.driver + "'");
    }
    const TraceSample tr = compute_trace(kind, drv, parse_grid(a.times));
    CsvWriter csv(a.out);
    csv.row({"t", "re", "im", "alive"});
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        csv.row({fmt(tr.times[i]), fmt(tr.points[i].real()), fmt(tr.points[i].imag()), "1"});

    if (!a.track.empty()) {
        std::vector<cplx> seeds;
        std::stringstream ss(a.track);
        std::string item;
        while (std::getline(ss, item, ';')) seeds.push_back(parse_complex(item));
        const LoewnerFlow flow = solve_flow(kind, drv, seeds, {});
        CsvWriter tcsv(a.track_out.empty() ? "-" : a.track_out);
        tcsv.row({"t", "re", "im", "alive"});
        for (const TrackedPoint& tp : flow.tracked) {
            const double t = tp.swallow_time ? *tp.swallow_time : flow.time;
            tcsv.row({fmt(t), fmt(tp.value.real()), fmt(tp.value.imag()), tp.alive ? "1" : "0"});
        }
    }
    write_manifest(a.manifest, inv, a.seed, outputs_of({a.out, a.track_out}), json{{"samples", tr.times.size()}});
    return 0;
}

// ----------------------------------------------------------------------------------------------

struct EnsembleArgs {
    std::string family = "kappa2/1", config, out, manifest;
    double kappa = 2.0, p = 4.0, x1 = 0.0, x2 = kPi, t1 = 0.25, t2 = 0.25, dt = 2e-4;
    std::uint64_t seed = 0;
    std::uint64_t pair = 0;
};

void add_ensemble(CLI::App& app, EnsembleArgs& a)
{
    app.add_option("--family", a.family, "drift id of chain 1 (chain 2 uses its dual)");
    app.add_option("--kappa", a.kappa, "kappa");
    app.add_option("--p", a.p, "modulus");
    app.add_option("--x1", a.x1, "start of chain 1");
    app.add_option("--x2", a.x2, "start of chain 2");
    app.add_option("--t1", a.t1, "time of chain 1");
    app.add_option("--t2", a.t2, "time of chain 2");
    app.add_option("--dt", a.dt, "time step");
    app.add_option("--config", a.config, "crossing or chordal (default: from the drift)");
    app.add_option("--pair", a.pair, "pair index within the seed");
    app.add_option("--seed", a.seed, "random seed")->required();
    app.add_option("--out", a.out, "image-chain CSV (default stdout)");
    app.add_option("--manifest", a.manifest, "JSON manifest file");
}

int run_ensemble(const EnsembleArgs& a, const Invocation& inv)
{
    const DriftFunction L = parse_drift(a.family);
    const Configuration cfg = a.config.empty()
                                  ? (L.kind == DriftKind::ChordalType ? Configuration::ChordalType
                                                                      : Configuration::Crossing)
                                  : parse_config(a.config);
    const DriftKind kind = cfg == Configuration::Crossing ? DriftKind::Crossing : DriftKind::ChordalType;
    if (L.kind != kind) throw InvalidArgument("drift kind does not match the configuration");
    AnnulusSleOptions o1, o2;
    o1.t_end = a.t1;
    o1.path_index = 2 * a.pair;
    o2.t_end = a.t2;
    o2.path_index = 2 * a.pair + 1;
    const AnnulusSleRun r1 = drive_annulus_sle(a.kappa, L, kind, a.p, a.x1, a.x2, a.dt, a.seed, o1);
    const AnnulusSleRun r2 = drive_annulus_sle(a.kappa, dual(L), kind, a.p, a.x2, a.x1, a.dt, a.seed, o2);
    if (r1.collided || r2.collided) throw Swallowed("a hull reached its marked point");

    ExtractionOptions eo;
    eo.config = cfg;
    if (cfg == Configuration::ChordalType) eo = CommutationOptions{}.extraction;
    const ImageChain ch = extract_image_chain(a.p, r2.xi, r1.xi, a.t2, a.t1, 2, eo);
    CsvWriter csv(a.out);
    csv.row({"s", "v", "m", "zeta", "X2", "A21", "A22", "A23", "A11", "A12", "A13", "S2"});
    for (std::size_t i = 0; i < ch.size(); ++i)
        csv.row({fmt(ch.s[i]), fmt(ch.v[i]), fmt(ch.m[i]), fmt(ch.zeta[i]), fmt(ch.X_own[i]),
                 fmt(ch.own_jet[i][1]), fmt(ch.own_jet[i][2]), fmt(ch.own_jet[i][3]), fmt(ch.other_jet[i][1]),
                 fmt(ch.other_jet[i][2]), fmt(ch.other_jet[i][3]), fmt(ch.own_schwarzian[i])});

    json summary{{"m", ch.m.back()}, {"X2", ch.X_own.back()}, {"residual", ch.residual}};
    if (cfg == Configuration::Crossing && a.kappa > 0.0) {
        const GammaFunction gamma = gamma_from_lambda(L, a.kappa, {std::max(0.5, a.p - a.t1 - a.t2 - 0.5), a.p},
                                                      {0.5, 1.5, 3.0, 4.5, 5.8});
        EnsembleOptions opts;
        opts.extraction = eo;
        const EnsembleRecord rec = ensemble_quantities(a.p, r1.xi, r2.xi, a.t1, a.t2, gamma, a.kappa, opts);
        summary["X1"] = rec.X1;
        summary["A"] = rec.A;
        summary["AS"] = rec.AS;
        summary["Q"] = rec.Q;
        summary["lnF"] = rec.lnF;
        summary["Y"] = rec.Y;
        summary["lnM"] = rec.lnM;
        summary["M"] = std::exp(rec.lnM);
    }
    std::cerr << summary.dump() << '\n';
    write_manifest(a.manifest, inv, a.seed, outputs_of({a.out}), summary);
    return 0;
}

// ----------------------------------------------------------------------------------------------

struct CommuteArgs {
    std::string family = "kappa0/1", config = "chordal", out, manifest;
    double kappa = 0.0, p = 3.0, x1 = kPi, x2 = 0.0, t1 = 0.3, t2 = 0.3, delta = 1e-3;
};

void add_commute(CLI::App& app, CommuteArgs& a)
{
    app.add_option("--family", a.family, "drift id of chain 1 (chain 2 uses its dual)");
    app.add_option("--kappa", a.kappa, "kappa (only 0 is deterministic)");
    app.add_option("--config", a.config, "chordal or crossing");
    app.add_option("--p", a.p, "modulus");
    app.add_option("--x1", a.x1, "start of chain 1");
    app.add_option("--x2", a.x2, "start of chain 2");
    app.add_option("--t1", a.t1, "time of chain 1");
    app.add_option("--t2", a.t2, "time of chain 2");
    app.add_option("--delta", a.delta, "time step");
    app.add_option("--out", a.out, "probe CSV (default stdout)");
    app.add_option("--manifest", a.manifest, "JSON manifest file");
}

int run_commute(const CommuteArgs& a, const Invocation& inv)
{
    if (a.kappa != 0.0) throw InvalidArgument("the commutation check runs at kappa = 0");
    CommutationOptions co;
    co.config = parse_config(a.config);
    co.extraction.config = co.config;
    const CommutationResult r = kappa0_commutation_check(parse_drift(a.family), a.p, a.x1, a.x2, a.t1, a.t2,
                                                         a.delta, co);
    CsvWriter csv(a.out);
    csv.row({"re_probe", "im_probe", "re_a", "im_a", "re_b", "im_b"});
    for (std::size_t i = 0; i < r.order_a.size(); ++i)
        csv.row({fmt(r.probes[i].real()), fmt(r.probes[i].imag()), fmt(r.order_a[i].real()),
                 fmt(r.order_a[i].imag()), fmt(r.order_b[i].real()), fmt(r.order_b[i].imag())});
    const bool pass = r.sup_diff <= 1e-3 && r.max_U_dev <= 5e-3;
    std::cerr << "sup_diff," << fmt(r.sup_diff) << "\nmax_U_dev," << fmt(r.max_U_dev) << "\nresult,"
              << (pass ? "pass" : "fail") << '\n';
    write_manifest(a.manifest, inv, 0, outputs_of({a.out}),
                   json{{"sup_diff", r.sup_diff}, {"max_U_dev", r.max_U_dev}, {"m", r.m}, {"pass", pass}});
    return pass ? 0 : 1;
}

// ----------------------------------------------------------------------------------------------

struct MartingaleArgs {
    std::string family = "kappa2/1", out, manifest;
    double kappa = 2.0, p = 4.0, x1 = 0.0, x2 = kPi, t1 = 0.25, t2 = 0.25, dt = 2e-4;
    std::size_t n = 2000;
    std::uint64_t seed = 0;
    int threads = 0;
};

void add_martingale(CLI::App& app, MartingaleArgs& a)
{
    app.add_option("--family", a.family, "crossing drift id");
    app.add_option("--kappa", a.kappa, "kappa");
    app.add_option("--p", a.p, "modulus");
    app.add_option("--x1", a.x1, "start of chain 1");
    app.add_option("--x2", a.x2, "start of chain 2");
    app.add_option("--t1", a.t1, "time of chain 1");
    app.add_option("--t2", a.t2, "time of chain 2");
    app.add_option("--dt", a.dt, "time step");
    app.add_option("--n", a.n, "number of pairs");
    app.add_option("--threads", a.threads, "worker threads (default ANNSLE_THREADS or all cores)");
    app.add_option("--seed", a.seed, "random seed")->required();
    app.add_option("--out", a.out, "per-pair CSV of M");
    app.add_option("--manifest", a.manifest, "JSON manifest file");
}

int run_martingale(const MartingaleArgs& a, const Invocation& inv)
{
    MartingaleOptions mo;
    mo.dt = a.dt;
    mo.threads = a.threads;
    const MartingaleResult r =
        martingale_estimate(a.kappa, parse_drift(a.family), a.p, a.x1, a.x2, a.t1, a.t2, a.n, a.seed, mo);
    const double rate = static_cast<double>(r.rejected) / static_cast<double>(a.n);
    if (!a.out.empty()) {
        CsvWriter csv(a.out);
        csv.row({"sample", "M"});
        for (std::size_t i = 0; i < r.samples.size(); ++i) csv.row({std::to_string(i), fmt(r.samples[i])});
    }
    const bool pass = std::abs(r.mean - 1.0) <= 3.0 * r.stderr_;
    std::cout << "mean," << fmt(r.mean) << "\nstderr," << fmt(r.stderr_) << "\nrejection_rate," << fmt(rate)
              << "\nresult," << (pass ? "pass" : "fail") << '\n';
    write_manifest(a.manifest, inv, a.seed, outputs_of({a.out}),
                   json{{"mean", r.mean}, {"stderr", r.stderr_}, {"rejection_rate", rate}, {"pass", pass}});
    return pass ? 0 : 1;
}

// ----------------------------------------------------------------------------------------------

int run(const std::vector<std::string>& argv);

int run_replay(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot read manifest '" + path + "'");
    json m;
    try {
        m = json::parse(f);
    }
    catch (const json::exception& e) {
        throw InvalidArgument(std::string("bad manifest: ") + e.what());
    }
    if (!m.contains("command") || !m.contains("arguments")) throw InvalidArgument("manifest lacks command/arguments");
    std::vector<std::string> argv{"annsle", m["command"].get<std::string>()};
    for (const auto& s : m["arguments"]) argv.push_back(s.get<std::string>());
    return run(argv);
}

int run(const std::vector<std::string>& argv)
{
    CLI::App app{"Annulus Loewner evolution toolkit"};
    app.require_subcommand(1);

    KernelEvalArgs ke;
    PdeCheckArgs pc;
    SimulateArgs si;
    TraceArgs tr;
    EnsembleArgs en;
    CommuteArgs co;
    MartingaleArgs ma;
    std::string replay_path;

    auto* s_ke = app.add_subcommand("kernel-eval", "evaluate S, H, S_I or H_I");
    add_kernel_eval(*s_ke, ke);
    auto* s_pc = app.add_subcommand("pde-check", "residual audit of a drift family");
    add_pde_check(*s_pc, pc);
    auto* s_si = app.add_subcommand("simulate", "sample driving functions");
    add_simulate(*s_si, si);
    auto* s_tr = app.add_subcommand("trace", "trace points of a Loewner chain");
    add_trace(*s_tr, tr);
    auto* s_en = app.add_subcommand("ensemble", "two-time quantities of one sampled pair");
    add_ensemble(*s_en, en);
    auto* s_co = app.add_subcommand("commute", "kappa = 0 commutation check");
    add_commute(*s_co, co);
    auto* s_ma = app.add_subcommand("martingale", "Monte Carlo mean of M");
    add_martingale(*s_ma, ma);
    auto* s_re = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    s_re->add_option("manifest", replay_path, "manifest file")->required();

    std::vector<std::string> rev(argv.rbegin(), argv.rend() - 1);
    try {
        app.parse(rev);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    Invocation inv;
    inv.sub = app.get_subcommands().front();
    inv.command = inv.sub->get_name();
    inv.args.assign(argv.begin() + 2, argv.end());

    if (inv.sub == s_ke) return run_kernel_eval(ke, inv);
    if (inv.sub == s_pc) return run_pde_check(pc, inv);
    if (inv.sub == s_si) return run_simulate(si, inv);
    if (inv.sub == s_tr) return run_trace(tr, inv);
    if (inv.sub == s_en) return run_ensemble(en, inv);
    if (inv.sub == s_co) return run_commute(co, inv);
    if (inv.sub == s_ma) return run_martingale(ma, inv);
    return run_replay(replay_path);
}

}  // namespace
}  // namespace annsle

int main(int argc, char** argv)
{
    try {
        return annsle::run(std::vector<std::string>(argv, argv + argc));
    }
    catch (const annsle::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    }
    catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
