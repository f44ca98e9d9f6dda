#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <boost/random/mersenne_twister.hpp>

#include "annsle/drifts.hpp"
#include "annsle/loewner.hpp"

namespace annsle {

// Per-path random stream keyed by (seed, path index, tag).
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path_index, std::uint32_t tag = 0);
    double normal();
    double uniform();  // in [0, 1)

private:
    boost::random::mt19937_64 engine_;
};

struct AnnulusSleRun {
    DrivingPath xi;
    std::vector<double> q;
    double stop_time = 0.0;
    double p = 0.0;
    double x0 = 0.0;
    double y0 = 0.0;
    DriftKind kind = DriftKind::Crossing;
    bool collided = false;
};

struct AnnulusSleOptions {
    // End of the run; NaN selects 0.99 p.  Must stay below p.
    double t_end = std::numeric_limits<double>::quiet_NaN();
    double collision_eps = 1e-4;
    std::uint64_t path_index = 0;
};

struct MarkedRun {
    DrivingPath xi;
    std::vector<double> marked;
    double stop_time = 0.0;
    bool collided = false;
};

enum class MarkedGeometry { Radial, Strip };

DrivingPath sample_brownian(double T, double dt, std::uint64_t seed, std::uint64_t path_index = 0);

AnnulusSleRun drive_annulus_sle(double kappa, const DriftFunction& L, DriftKind kind, double p, double x0,
                                double y0, double dt, std::uint64_t seed, const AnnulusSleOptions& opts = {});

DrivingPath drive_whole_plane(double kappa, double t0, double T, double dt, std::uint64_t seed,
                              std::uint64_t path_index = 0);

MarkedRun drive_marked_radial_or_strip(double kappa, const DriftFunction& L, MarkedGeometry geometry, double a,
                                       double b, double dt, std::uint64_t seed, double t_end,
                                       double collision_eps = 1e-4, std::uint64_t path_index = 0);

struct DiscDriverRun {
    DrivingPath xi;           // on [-p_burn, -p_stop]
    std::vector<double> x;    // X-tilde
    std::vector<double> q;
};

DiscDriverRun sample_disc_driver(double kappa, const DriftFunction& L, double p_burn, double p_stop, double dt,
                                 std::uint64_t seed, double y0 = 0.0, std::uint64_t path_index = 0);

}  // namespace annsle
