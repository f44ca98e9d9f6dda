#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "annsle/drifts.hpp"
#include "annsle/loewner.hpp"
#include "annsle/sde.hpp"

namespace annsle {

// Crossing: the other hull grows from the opposite boundary circle (inverted image chains).
// ChordalType: both hulls grow from the same circle.
enum class Configuration { Crossing, ChordalType };

enum class NormalizationMode { Annulus, WholePlane };

struct ExtractionOptions {
    Configuration config = Configuration::Crossing;
    int circle_points = 20;      // even; half of them are integrated, the rest follow by symmetry
    double radius = 0.8;         // circle radius around the own driving point
    int corrector_passes = 2;
    double tail_tolerance = 1e-3;
};

// Image of the own chain after the other chain has been mapped out, sampled on the own time grid.
// Index i belongs to own time s[i] = i * dt.
struct ImageChain {
    int own = 1;
    double p = 0.0;
    double t_other = 0.0;
    Configuration config = Configuration::Crossing;

    std::vector<double> s;
    std::vector<double> v;      // capacity of the image chain
    std::vector<double> m;      // p - t_other - v
    std::vector<double> zeta;   // image driver
    // Derivatives 0..3 of the composed map at the own tip (A_{own,h}) and of the other chain's
    // image map at the other tip (A_{other,h}).  Entry 0 is the value.
    std::vector<std::array<double, 4>> own_jet;
    std::vector<std::array<double, 4>> other_jet;
    std::vector<double> own_schwarzian;
    std::vector<double> other_schwarzian;
    std::vector<double> X_own;  // zeta - other_jet[0]
    double residual = 0.0;      // largest relative Taylor tail seen on the circle

    std::size_t size() const { return s.size(); }
    // zeta as a function of capacity, resampled on a uniform v grid of step close to dv.
    DrivingPath zeta_by_capacity(double dv) const;
};

ImageChain extract_image_chain(double p, const DrivingPath& xi_own, const DrivingPath& xi_other, double t_own,
                               double t_other, int own = 1, const ExtractionOptions& opts = {});

struct EnsembleRecord {
    double t1 = 0.0, t2 = 0.0;
    double p = 0.0;
    double m = 0.0;
    double X1 = 0.0, X2 = 0.0;
    std::array<std::array<double, 3>, 2> A{};  // A[j-1][h-1]
    std::array<double, 2> AS{};
    double Q = 0.0;
    double lnF = 0.0;
    double Y = 0.0;
    double lnM = 0.0;
    double alpha = 0.0;
    double c = 0.0;

    // Axis values entering the normalization of M.
    double A21_axis = 1.0;  // A_{2,1}(t1, 0)
    double A11_axis = 1.0;  // A_{1,1}(0, t2)
    double Y_t1_axis = 0.0; // Gamma(p - t1, X1(t1, 0))
    double Y_t2_axis = 0.0; // Gamma(p - t2, X1(0, t2))
    double Y_origin = 0.0;  // Gamma(p, x1 - x2)
    double residual = 0.0;
};

double ensemble_alpha(double kappa);
double central_charge(double kappa);

struct EnsembleOptions {
    ExtractionOptions extraction;
    bool both_orders = true;  // also run the extraction with chain 1 as the own chain
};

EnsembleRecord ensemble_quantities(double p, const DrivingPath& xi1, const DrivingPath& xi2, double t1, double t2,
                                   const GammaFunction& gamma, double kappa, const EnsembleOptions& opts = {});

// Records on the regular grid (i t1 / n1, j t2 / n2); the grid steps must be multiples of the path steps.
std::vector<std::vector<EnsembleRecord>> ensemble_grid(double p, const DrivingPath& xi1, const DrivingPath& xi2,
                                                       double t1, double t2, int n1, int n2,
                                                       const GammaFunction& gamma, double kappa,
                                                       const ExtractionOptions& opts = {Configuration::Crossing, 16, 1.5, 2, 1e-3});

// ln F by the two-dimensional trapezoid rule of A11^2 A21^2 Q over a record grid.
double compute_lnF(const std::vector<std::vector<EnsembleRecord>>& grid);
double compute_F(const std::vector<std::vector<EnsembleRecord>>& grid);

double compute_M(const EnsembleRecord& record, double F, NormalizationMode mode = NormalizationMode::Annulus);

struct MartingaleOptions {
    double dt = 2e-4;
    int threads = 0;  // 0: ANNSLE_THREADS or the hardware concurrency
    double max_rejection = 0.2;
    ExtractionOptions extraction;
};

struct MartingaleResult {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    double max_residual = 0.0;
    std::vector<double> samples;  // M per accepted pair, in pair order
};

MartingaleResult martingale_estimate(double kappa, const DriftFunction& L, double p, double x1, double x2, double t1,
                                     double t2, std::size_t N, std::uint64_t seed, const MartingaleOptions& opts = {});

struct CommutationResult {
    double sup_diff = 0.0;
    double max_U_dev = 0.0;
    double m = 0.0;
    double X_sum = 0.0;  // X1 + X2 from the two extractions
    std::vector<cplx> probes;
    std::vector<cplx> order_a;
    std::vector<cplx> order_b;
};

struct CommutationOptions {
    Configuration config = Configuration::ChordalType;
    ExtractionOptions extraction{Configuration::ChordalType, 32, 0.6, 2, 1e-3};
};

CommutationResult kappa0_commutation_check(const DriftFunction& L, double p, double x1, double x2, double t1,
                                           double t2, double delta, const CommutationOptions& opts = {});

// Modulus of the complement of two whole-plane hulls at times t1, t2, approximated by annulus
// chains started at t0 in the annulus of modulus -2 t0.
double whole_plane_modulus(const DrivingPath& xi1, const DrivingPath& xi2, double t1, double t2,
                           const ExtractionOptions& opts = {Configuration::Crossing, 16, 1.5, 2, 1e-3});

int default_thread_count();

}  // namespace annsle
