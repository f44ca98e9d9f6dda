#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "annsle/jet.hpp"
#include "annsle/kernels.hpp"

namespace annsle {

enum class DriftFamily {
    Kappa4_1, Kappa4_2, Kappa4_3, Kappa4_4, Kappa4_5, Kappa4_6,
    Kappa2_1, Kappa2_2, Kappa2_3, Kappa2_4,
    Kappa3_1, Kappa3_2, Kappa3_3,
    Kappa0_1, Kappa0_2, Kappa0_3, Kappa0_4,
    Kappa16o3_5, Kappa16o3_6, Kappa16o3_7, Kappa16o3_8,
    Radial_1, Radial_2, Radial_3, Radial_4,
    Strip_5, Strip_6, Strip_7, Strip_8,
    ConstZero,
    Custom
};

enum class DriftKind { Crossing, ChordalType, RadialMarked, StripMarked };

enum class PdeKind { CrossingAnnulus, ChordalAnnulus, Radial, Strip };

// Tabulated drift: values[i * x_grid.size() + j] = Lambda(p_grid[i], x_grid[j]).  The x grid
// must be uniform and span one period [x0, x0 + 2pi) so that the interpolant is 2pi-periodic.
struct CustomTable {
    std::vector<double> p_grid;
    std::vector<double> x_grid;
    std::vector<double> values;
    DriftKind kind = DriftKind::Crossing;
    double kappa = 0.0;
};

using DriftParams = std::map<std::string, double>;

// Lambda(p, x) with analytic x-derivatives: c[0] = Lambda, c[1] = Lambda', c[2] = Lambda''/2.
using DriftJet = Jet<2>;

class DriftFunction {
public:
    DriftFamily family = DriftFamily::ConstZero;
    DriftKind kind = DriftKind::Crossing;
    double kappa_solved = 0.0;
    DriftParams params;
    std::string pole_set;
    std::string id;
    bool dualized = false;

    double operator()(double p, double x) const { return jet(p, x).c[0].real(); }
    // order-th x-derivative, order in 0..2
    double derivative(double p, double x, int order) const;
    DriftJet jet(double p, double x) const;

    // Raw evaluator (before dualization); exposed for composition.
    std::function<DriftJet(double p, double x)> base;
};

DriftFunction make_drift(DriftFamily family, const DriftParams& params = {});
DriftFunction make_custom_drift(const CustomTable& table);
DriftFunction dual(const DriftFunction& L);

// Registry ids such as "kappa4/1?C=0", "kappa2/1", "kappa16/3/5", "radial/3?kappa=2", "const-zero".
DriftFunction parse_drift(const std::string& id);
std::vector<std::string> catalog_ids();

std::string family_name(DriftFamily family);

// Theta_j (j = 2..7) and its z-derivatives up to order N (N <= 4).
template <int N>
Jet<N> theta_jet(int j, double p, cplx z);
cplx eval_theta(int j, double p, cplx z, int order);

// Gamma-hat_j (j = 1..6); order 0 or 1 (higher orders are available through the jet form).
template <int N>
Jet<N> gamma_hat_jet(int j, double p, cplx z);
cplx eval_gamma_hat(int j, double p, cplx z, int order);

// Building blocks of the kappa = 0 and 16/3 families.
Jet<2> G_jet(double p, double x);
Jet<2> G_I_jet(double p, double x);

struct GammaFunction {
    DriftFunction drift;
    double kappa = 0.0;
    double x_spread = 0.0;  // max spread of C(p) over the audited x grid

    double log_gamma_hat(double p, double x) const;
    double normalizer(double p) const;  // C(p)
    double log_gamma(double p, double x) const;
    double operator()(double p, double x) const;
    double derivative(double p, double x) const;  // Gamma'
};

GammaFunction gamma_from_lambda(const DriftFunction& L, double kappa, const std::vector<double>& p_grid,
                                const std::vector<double>& x_grid);

// Residual of the drift PDE; entry [i][j] belongs to (p_grid[i], x_grid[j]).
std::vector<std::vector<double>> pde_residual(const DriftFunction& L, double kappa, PdeKind pde,
                                              const std::vector<double>& p_grid,
                                              const std::vector<double>& x_grid, double h_p = 1e-4);

PdeKind natural_pde(const DriftFunction& L);
PdeKind parse_pde(const std::string& name);

}  // namespace annsle
