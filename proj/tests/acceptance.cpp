// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "annsle/drifts.hpp"
#include "annsle/ensemble.hpp"
#include "annsle/kernels.hpp"
#include "annsle/loewner.hpp"
#include "annsle/sde.hpp"

using namespace annsle;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

std::string full(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<double> linspace(double a, double b, int n)
{
    std::vector<double> v;
    for (int k = 0; k < n; ++k) v.push_back(a + (b - a) * k / (n - 1));
    return v;
}

// ---------------------------------------------------------------- kernels

Outcome kernel_identities()
{
    const cplx i(0.0, 1.0);
    double worst = 0.0;
    auto note = [&](cplx a, cplx b) { worst = std::max(worst, std::abs(a - b)); };
    for (double p : {0.3, 0.5, 1.0, 2.0, 5.0}) {
        const double q = kPi * kPi / p, s = kPi * kPi / (p * p);
        for (double x : linspace(0.15, 6.1, 20)) {
            const cplx z(x, 0.1);
            note(H(p, z + kTwoPi), H(p, z));
            note(H_I(p, z + kTwoPi), H_I(p, z));
            note(H(p, -z), -H(p, z));
            note(H_I(p, -z), -H_I(p, z));
            note(H(p, x + i * p).imag(), -1.0);
            note(H_I(p, x), H(p, x - i * p) - i);
            const cplx w(x, 0.05);
            const cplx u = i * kPi / p * w;
            note(H(p, w), i * kPi / p * H(q, u) - w / p);
            note(H_I(p, w), i * kPi / p * H(q, kPi + u) - w / p);
            note(eval_H(KernelKind::H, p, w, 1), -s * eval_H(KernelKind::H, q, u, 1) - 1.0 / p);
            note(eval_H(KernelKind::H_I, p, w, 1), -s * eval_H(KernelKind::H, q, kPi + u, 1) - 1.0 / p);
        }
    }
    return {worst <= 1e-9, "max deviation " + num(worst)};
}

Outcome kernel_estimate()
{
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double y = 3.0 * (2.0 * U(gen) - 1.0);
        const double p = std::abs(y) + std::log(4.0) + 4.0 * U(gen);
        const cplx z(kTwoPi * U(gen), y);
        worst = std::max(worst, std::abs(H_I(p, z)) / (9.0 * std::exp(std::abs(y) - p)));
    }
    return {worst < 1.0, "max |H_I| / bound " + num(worst)};
}

double sinh_series_r(double p)
{
    using mp = boost::multiprecision::cpp_bin_float_50;
    mp s = 0;
    for (int k = 1;; ++k) {
        const mp t = 1 / pow(sinh(mp(k) * mp(p)), 2);
        s += t;
        if (t < mp(1e-40)) break;
    }
    return static_cast<double>(s - mp(1) / 6);
}

Outcome r_functions()
{
    double laurent = 0.0, deriv = 0.0;
    for (double p : {0.5, 1.0, 2.0}) {
        laurent = std::max(laurent, std::abs(r_laurent(p) - sinh_series_r(p)));
        const double h = 1e-3;
        const double d = (8.0 * (eval_R(p + h) - eval_R(p - h)) - (eval_R(p + 2 * h) - eval_R(p - 2 * h))) / (12.0 * h);
        deriv = std::max(deriv, std::abs(d - (eval_r(p) - eval_r(kInfModulus))));
    }
    return {laurent <= 1e-6 && deriv <= 1e-6, "Laurent " + num(laurent) + ", R' " + num(deriv)};
}

Outcome kernel_pdes()
{
    const double hp = 1e-4;
    double worst = 0.0;
    for (double p : {0.5, 1.0, 2.0, 4.0})
        for (cplx z : {cplx(0.7, 0.1), cplx(2.0, -0.2), cplx(4.0, 0.0), cplx(5.5, 0.3)})
            for (KernelKind k : {KernelKind::H, KernelKind::H_I}) {
                const cplx dot = (eval_H(k, p + hp, z, 0) - eval_H(k, p - hp, z, 0)) / (2.0 * hp);
                worst = std::max(worst, std::abs(dot - (eval_H(k, p, z, 2) + eval_H(k, p, z, 1) * eval_H(k, p, z, 0))));
            }
    return {worst < 1e-5, "max residual " + num(worst)};
}

// ---------------------------------------------------------------- CLI plumbing

const std::string kCli = ANNSLE_CLI_PATH;

int run_cli(const std::string& args, const std::string& out, const std::string& err = "/dev/null")
{
    const std::string cmd = kCli + " " + args + " >" + out + " 2>" + err;
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double max_residual_from(const std::string& err_file)
{
    std::ifstream in(err_file);
    for (std::string line; std::getline(in, line);)
        if (line.rfind("max_residual,", 0) == 0) return std::stod(line.substr(13));
    return std::nan("");
}

fs::path scratch_dir()
{
    const fs::path d = fs::temp_directory_path() / "annsle_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

// ---------------------------------------------------------------- drifts

Outcome drift_catalog()
{
    const fs::path dir = scratch_dir();
    const std::string err = (dir / "err.txt").string();
    int bad = 0;
    double own_max = 0.0, wrong_min = 1e300;
    std::string first_bad;
    for (const std::string& id : catalog_ids()) {
        const DriftFunction L = parse_drift(id);
        const std::string base = "pde-check --family '" + id + "' --pde " + [&] {
            switch (natural_pde(L)) {
            case PdeKind::CrossingAnnulus: return std::string("crossing");
            case PdeKind::ChordalAnnulus: return std::string("chordal");
            case PdeKind::Radial: return std::string("radial");
            default: return std::string("strip");
            }
        }();
        const int rc_own = run_cli(base + " --kappa " + full(L.kappa_solved), "/dev/null", err);
        const double own = max_residual_from(err);
        const int rc_wrong = run_cli(base + " --kappa " + full(L.kappa_solved + 1.0), "/dev/null", err);
        const double wrong = max_residual_from(err);
        own_max = std::max(own_max, own);
        wrong_min = std::min(wrong_min, wrong);
        if (rc_own != 0 || !(own < 1e-5) || rc_wrong != 1 || !(wrong > 1e-2)) {
            ++bad;
            if (first_bad.empty()) first_bad = id;
        }
    }
    fs::remove_all(dir);
    std::string d = std::to_string(catalog_ids().size()) + " families, own max " + num(own_max) +
                    ", kappa+1 min " + num(wrong_min);
    if (bad) d += ", failing: " + first_bad;
    return {bad == 0 && catalog_ids().size() == 21, d};
}

Outcome sign_lemmas()
{
    int violations = 0;
    for (double p : {0.5, 1.0, 2.0})
        for (double x : linspace(0.05, kTwoPi - 0.05, 200)) {
            violations += !(eval_theta(3, p, x, 1).real() > 0.0);
            violations += !(eval_theta(2, p, x, 1).real() < 0.0);
            violations += !(eval_theta(4, p, x, 1).real() < 0.0);
            violations += !(eval_theta(5, p, x, 1).real() < 0.0);
            violations += !(eval_theta(6, p, x, 0).real() > 0.0);
            violations += !(eval_theta(7, p, x, 0).real() > 0.0);
        }
    return {violations == 0, std::to_string(violations) + " violations in 3600 checks"};
}

// ---------------------------------------------------------------- Loewner

DrivingPath scaled_brownian(double kappa, double T, double dt, std::uint64_t seed)
{
    DrivingPath p = sample_brownian(T, dt, seed);
    for (double& x : p.values) x *= std::sqrt(kappa);
    return p;
}

cplx flow_value(const FlowKind& kind, const DrivingPath& drv, cplx z)
{
    return solve_flow(kind, drv, {z}, {}).tracked.front().value;
}

Outcome loewner_checks()
{
    const FlowKind radial{FlowVariant::Radial, kInfModulus};
    double centre = 0.0;
    for (double T : {0.5, 1.0, 2.0}) {
        const LoewnerFlow f = solve_flow(radial, constant_path(0.0, 0.0, T, 1e-3), {}, {cplx(0.0)});
        centre = std::max(centre, std::abs(std::abs(boundary_jet(f, 0.0).g1) - std::exp(T)) / std::exp(T));
    }
    const DrivingPath drv = scaled_brownian(2.0, 0.6, 1e-3, 4);
    DrivingPath half = drv;
    half.values.resize(501);
    double wide = 0.0;
    for (cplx z : {cplx(0.2, 0.4), cplx(-0.5, -0.1), cplx(0.0, 0.3)})
        wide = std::max(wide, std::abs(flow_value({FlowVariant::Annulus, 10.0}, half, z) - flow_value(radial, half, z)));
    double cover = 0.0;
    const cplx I(0.0, 1.0);
    for (cplx zt : {cplx(1.0, 0.7), cplx(-2.0, 1.4)}) {
        cover = std::max(cover, std::abs(std::exp(I * flow_value({FlowVariant::CoveringAnnulus, 2.0}, drv, zt)) -
                                         flow_value({FlowVariant::Annulus, 2.0}, drv, std::exp(I * zt))));
        cover = std::max(cover, std::abs(std::exp(I * flow_value({FlowVariant::CoveringRadial, kInfModulus}, drv, zt)) -
                                         flow_value(radial, drv, std::exp(I * zt))));
    }
    DrivingPath head = drv, tail = drv;
    head.values.resize(301);
    tail.t0 = 0.3;
    tail.values.erase(tail.values.begin(), tail.values.begin() + 300);
    const FlowKind cov{FlowVariant::CoveringAnnulus, 2.0};
    double semi = 0.0;
    for (cplx z : {cplx(0.5, 0.8), cplx(2.5, 0.3)})
        semi = std::max(semi, std::abs(flow_value(cov, drv, z) - flow_value(cov, tail, flow_value(cov, head, z))));
    const bool ok = centre <= 1e-8 && wide <= 5e-4 && cover <= 1e-8 && semi <= 1e-9;
    return {ok, "|g'(0)| rel " + num(centre) + ", p=10 vs radial " + num(wide) + ", covering " + num(cover) +
                    ", semigroup " + num(semi)};
}

Outcome jet_checks()
{
    const FlowKind kind{FlowVariant::CoveringAnnulus, 2.0};
    const double h1 = 1e-3, h3 = 1e-2, x0 = kPi;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const DrivingPath drv = scaled_brownian(2.0, 0.4, 1e-3, 500 + seed);
        std::vector<cplx> seeds;
        for (int k = -3; k <= 3; ++k) seeds.emplace_back(x0 + k * h1, 0.0);
        for (int k = -3; k <= 3; ++k) seeds.emplace_back(x0 + k * h3, 0.0);
        const LoewnerFlow flow = solve_flow(kind, drv, seeds, {cplx(x0, 0.0)});
        auto f1 = [&](int k) { return flow.tracked[static_cast<std::size_t>(k + 3)].value; };
        auto f3 = [&](int k) { return flow.tracked[static_cast<std::size_t>(k + 10)].value; };
        const cplx d1 = (8.0 * (f1(1) - f1(-1)) - (f1(2) - f1(-2))) / (12.0 * h1);
        const cplx d2 = (-(f1(2) + f1(-2)) + 16.0 * (f1(1) + f1(-1)) - 30.0 * f1(0)) / (12.0 * h1 * h1);
        const cplx d3 =
            (-f3(3) + 8.0 * f3(2) - 13.0 * f3(1) + 13.0 * f3(-1) - 8.0 * f3(-2) + f3(-3)) / (8.0 * h3 * h3 * h3);
        const JetValues j = boundary_jet(flow, cplx(x0, 0.0));
        worst = std::max({worst, std::abs(j.g1 - d1) / std::abs(j.g1),
                          std::abs(j.g2 - d2) / std::max(std::abs(j.g2), std::abs(j.g1)),
                          std::abs(j.g3 - d3) / std::max(std::abs(j.g3), std::abs(j.g1))});
    }
    return {worst < 1e-5, "max relative error " + num(worst) + " on 20 paths"};
}

// ---------------------------------------------------------------- ensemble

Outcome commutation()
{
    const CommutationResult r = kappa0_commutation_check(parse_drift("kappa0/1"), 3.0, kPi, 0.0, 0.3, 0.3, 1e-3);
    return {r.sup_diff <= 1e-3 && r.max_U_dev <= 5e-3,
            "sup difference " + num(r.sup_diff) + ", max U deviation " + num(r.max_U_dev)};
}

Outcome ensemble_identities()
{
    const double p = 4.0, t1 = 0.3, t2 = 0.25, dt = 1e-3, h = 0.01;
    const DriftFunction L = parse_drift("kappa2/1");
    AnnulusSleOptions o1, o2;
    o1.t_end = t1;
    o2.t_end = t2;
    const AnnulusSleRun r1 = drive_annulus_sle(0.0, L, DriftKind::Crossing, p, 0.0, kPi, dt, 0, o1);
    const AnnulusSleRun r2 = drive_annulus_sle(0.0, dual(L), DriftKind::Crossing, p, kPi, 0.0, dt, 0, o2);

    const ImageChain c1 = extract_image_chain(p, r1.xi, r2.xi, t1, t2, 1);
    const ImageChain c2 = extract_image_chain(p, r2.xi, r1.xi, t2, t1, 2);
    const double xsum = std::abs(c1.X_own.back() + c2.X_own.back());

    double rate = 0.0, schw = 0.0;
    for (double s1 : {0.1, 0.2}) {
        const ImageChain lo = extract_image_chain(p, r2.xi, r1.xi, t2, s1 - h, 2);
        const ImageChain mid = extract_image_chain(p, r2.xi, r1.xi, t2, s1, 2);
        const ImageChain hi = extract_image_chain(p, r2.xi, r1.xi, t2, s1 + h, 2);
        const double A11 = mid.other_jet.back()[1], A21 = mid.own_jet.back()[1];
        const double dv = -(hi.m.back() - lo.m.back()) / (2.0 * h);
        rate = std::max(rate, std::abs(dv / (A11 * A11) - 1.0));
        const double dAS = (hi.own_schwarzian.back() - lo.own_schwarzian.back()) / (2.0 * h);
        const double Q = eval_H(KernelKind::H_I, mid.m.back(), cplx(-mid.X_own.back()), 3).real();
        schw = std::max(schw, std::abs(dAS / (A11 * A11 * A21 * A21 * Q) - 1.0));
    }

    const ImageChain axis = extract_image_chain(p, r1.xi, r2.xi, t1, 0.0, 1);
    double axis_dev = 0.0;
    for (std::size_t i = 0; i < axis.size(); ++i) axis_dev = std::max(axis_dev, std::abs(axis.m[i] - (p - axis.s[i])));

    const bool ok = xsum <= 1e-4 && rate <= 2e-3 && schw <= 5e-3 && axis_dev == 0.0;
    return {ok, "|X1+X2| " + num(xsum) + ", dv/dt1 rel " + num(rate) + ", d1 AS2 rel " + num(schw) +
                    ", m(t1,0) dev " + num(axis_dev)};
}

Outcome martingale_checks()
{
    struct Case {
        double kappa;
        const char* family;
    };
    bool ok = true;
    std::string d;
    for (const Case& c : {Case{2.0, "kappa2/1"}, Case{4.0, "kappa4/1?C=0"}, Case{3.0, "kappa3/1"}}) {
        const std::size_t N = 2000;
        const MartingaleResult r = martingale_estimate(c.kappa, parse_drift(c.family), 4.0, 0.0, kPi, 0.25, 0.25, N, 7);
        const double rej = static_cast<double>(r.rejected) / static_cast<double>(N);
        const bool pass = std::abs(r.mean - 1.0) <= 3.0 * r.stderr_ && r.stderr_ < 0.05 && rej < 0.01;
        ok = ok && pass;
        if (!d.empty()) d += "; ";
        d += std::string(c.family) + " mean " + num(r.mean) + " se " + num(r.stderr_) + " rej " + num(rej) +
             (pass ? "" : " (fail)");
    }
    return {ok, d};
}

Outcome whole_plane_checks()
{
    const double t0 = -6.0, dt = 2e-3;
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> U(-5.0, -2.0);
    int violations = 0, unevaluated = 0;
    double margin = 1e300;
    for (std::uint64_t k = 0; k < 100; ++k) {
        double t1, t2;
        do {
            t1 = U(gen);
            t2 = U(gen);
        } while (!(t1 + t2 > -9.0 && t1 + t2 < -4.0));
        const double T = std::max(t1, t2) + 0.01;
        const DrivingPath xi1 = drive_whole_plane(2.0, t0, T, dt, 31, 2 * k);
        const DrivingPath xi2 = drive_whole_plane(2.0, t0, T, dt, 31, 2 * k + 1);
        double m;
        try {
            m = whole_plane_modulus(xi1, xi2, t1, t2);
        }
        catch (const Error&) {
            ++unevaluated;
            continue;
        }
        const double gap = m - (-t1 - t2 - std::log(16.0));
        margin = std::min(margin, gap);
        violations += gap < 0.0;
    }
    const DrivingPath full = scaled_brownian(2.0, 40.5, 1e-2, 5);
    DrivingPath far = full, near = full;
    far.t0 = -40.0;
    near.t0 = -20.0;
    near.values.erase(near.values.begin(), near.values.begin() + 2000);
    const FlowKind kind{FlowVariant::WholePlane, kInfModulus};
    double moved = 0.0;
    for (cplx z : {cplx(3.0, 1.0), cplx(-2.0, -2.5), cplx(0.5, 4.0)})
        moved = std::max(moved, std::abs(flow_value(kind, far, z) - flow_value(kind, near, z)));
    return {violations == 0 && unevaluated == 0 && moved < 1e-6,
            std::to_string(violations) + " of 100 below the bound, " + std::to_string(unevaluated) +
                " not evaluated (min margin " + num(margin) + "), t0 halving moves g by " + num(moved)};
}

double two_sample_ks(std::vector<double> a, std::vector<double> b)
{
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

Outcome disc_stationarity()
{
    const DriftFunction L = parse_drift("kappa2/1");
    const int N = 2000;
    auto angles = [&](double p_burn, std::uint64_t seed) {
        std::vector<double> out;
        for (int k = 0; k < N; ++k) {
            const DiscDriverRun r = sample_disc_driver(2.0, L, p_burn, 1.0, 1e-2, seed, 0.0, static_cast<std::uint64_t>(k));
            const double x = std::fmod(r.xi.values.back(), kTwoPi);
            out.push_back(x < 0.0 ? x + kTwoPi : x);
        }
        return out;
    };
    const double ks = two_sample_ks(angles(30.0, 41), angles(60.0, 42));
    return {ks < 0.05, "two-sample KS " + num(ks)};
}

// ---------------------------------------------------------------- determinism

Outcome cli_determinism()
{
    const fs::path dir = scratch_dir();
    auto p = [&](const std::string& n) { return (dir / n).string(); };
    const std::vector<std::string> commands{
        "kernel-eval --kind H --p 0.5 --z 0.3,0.1 --order 2 --grid 0.1:3:7",
        "pde-check --family kappa3/1 --kappa 3 --pde crossing",
        "simulate --mode annulus --family kappa2/1 --kappa 2 --p 4 --dt 1e-3 --t-end 0.2 --paths 3 --seed 11",
        "simulate --mode marked --family 'radial/1?kappa=2' --kappa 2 --dt 1e-3 --t-end 0.2 --paths 2 --seed 12",
        "simulate --mode whole-plane --kappa 2 --t0 -2 --t-end 0 --dt 1e-2 --paths 2 --seed 13",
        "simulate --mode disc --family kappa2/1 --kappa 2 --p-burn 5 --p-stop 1 --dt 1e-2 --paths 2 --seed 14",
        "trace --variant radial --driver brownian --kappa 2 --seed 3 --t-end 0.5 --dt 1e-3 --times 0.1:0.5:5",
        "ensemble --family kappa2/1 --kappa 2 --p 4 --t1 0.1 --t2 0.1 --dt 1e-3 --seed 5",
        "commute --t1 0.1 --t2 0.1 --delta 2e-3",
        "martingale --kappa 2 --family kappa2/1 --p 4 --t1 0.05 --t2 0.05 --dt 1e-3 --n 6 --seed 9",
    };
    int bad = 0;
    std::string first_bad;
    for (std::size_t k = 0; k < commands.size(); ++k) {
        const std::string tag = std::to_string(k);
        const std::string args = commands[k] + " --out " + p("o" + tag + ".csv") + " --manifest " + p("m" + tag + ".json");
        const int rc1 = run_cli(args, p("s1.txt"));
        const std::string out1 = slurp(p("o" + tag + ".csv")), std1 = slurp(p("s1.txt"));
        const int rc2 = run_cli(args, p("s2.txt"));
        const std::string out2 = slurp(p("o" + tag + ".csv")), std2 = slurp(p("s2.txt"));
        fs::remove(p("o" + tag + ".csv"));
        const int rc3 = run_cli("replay " + p("m" + tag + ".json"), p("s3.txt"));
        const std::string out3 = slurp(p("o" + tag + ".csv")), std3 = slurp(p("s3.txt"));
        const bool same = rc1 == rc2 && rc1 == rc3 && rc1 != 2 && !out1.empty() && out1 == out2 && out1 == out3 &&
                          std1 == std2 && std1 == std3;
        if (!same) {
            ++bad;
            if (first_bad.empty()) first_bad = commands[k].substr(0, commands[k].find(' '));
        }
    }
    fs::remove_all(dir);
    std::string d = std::to_string(commands.size() - bad) + " of " + std::to_string(commands.size()) +
                    " commands bit-identical on rerun and replay";
    if (bad) d += ", first mismatch: " + first_bad;
    return {bad == 0, d};
}

}  // namespace

// Arguments, if any, select the criteria to run.
int main(int argc, char** argv)
{
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, kernel_identities}, {2, kernel_estimate},     {3, r_functions},         {4, kernel_pdes},
        {5, drift_catalog},     {6, sign_lemmas},         {7, loewner_checks},      {8, jet_checks},
        {9, commutation},       {10, ensemble_identities}, {11, martingale_checks}, {12, whole_plane_checks},
        {13, disc_stationarity}, {14, cli_determinism},
    };
    std::vector<int> selected;
    for (int k = 1; k < argc; ++k) selected.push_back(std::atoi(argv[k]));
    int failed = 0, ran = 0;
    for (const auto& [id, check] : criteria) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) continue;
        ++ran;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        }
        catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %d: %s  %s  [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d of %d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
