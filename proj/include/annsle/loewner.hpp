#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "annsle/jet.hpp"
#include "annsle/kernels.hpp"

namespace annsle {

enum class FlowVariant {
    Radial,
    CoveringRadial,
    Annulus,
    CoveringAnnulus,
    InvertedAnnulus,
    InvertedCoveringAnnulus,
    WholePlane,
    CoveringWholePlane,
    InvertedWholePlane,
    Disc,
    CoveringDisc,
    InvertedCoveringDisc,
    Strip
};

struct FlowKind {
    FlowVariant variant = FlowVariant::Radial;
    double modulus = kInfModulus;

    bool is_annulus() const;
    bool is_disc() const;
    bool is_whole_plane() const;
    bool is_covering() const;
};

const char* variant_name(FlowVariant v);
FlowVariant parse_variant(const std::string& name);

// Real driving function sampled on a uniform grid starting at t0, linear in between.
struct DrivingPath {
    double t0 = 0.0;
    double dt = 1e-3;
    std::vector<double> values;
    double kappa = 0.0;
    std::uint64_t seed = 0;

    std::size_t size() const { return values.size(); }
    double time(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
    double t_end() const { return time(values.size() - 1); }
    double at(double t) const;
    void validate() const;
};

DrivingPath constant_path(double value, double t0, double t_end, double dt);

struct TrackedPoint {
    int id = 0;
    cplx seed;
    cplx value;
    bool alive = true;
    std::optional<double> swallow_time;
};

struct BoundaryJet {
    cplx base;
    Jet<3> jet;
    bool alive = true;
    std::optional<double> swallow_time;
};

struct LoewnerFlow {
    FlowKind kind;
    double t0 = 0.0;
    double time = 0.0;
    std::vector<TrackedPoint> tracked;
    std::vector<BoundaryJet> jets;
    double capacity = 0.0;

    // Integration state, in normalized coordinates for the whole-plane kinds.
    std::vector<cplx> state;
    std::vector<Jet<3>> jet_state;
};

struct StepPolicy {
    double swallow_eps = 1e-6;
    double min_dt = 1e-14;
    // Sub-step length is dt * min(1, (d / distance_scale)^2), d the distance to the singularity.
    double distance_scale = 1.0;
};

struct JetValues {
    cplx g, g1, g2, g3;
    cplx schwarzian;
};

struct TraceSample {
    std::vector<double> times;
    std::vector<cplx> points;
};

// Fresh flow at time t0 holding the identity (or the t -> -inf asymptote) on seeds and jet bases.
LoewnerFlow start_flow(const FlowKind& kind, double t0, const std::vector<cplx>& seeds,
                       const std::vector<cplx>& jet_bases);

// Advance an existing flow to t_end along the driving path.
void advance_flow(LoewnerFlow& flow, const DrivingPath& driving, double t_end,
                  const StepPolicy& policy = {});

LoewnerFlow solve_flow(const FlowKind& kind, const DrivingPath& driving, const std::vector<cplx>& seeds,
                       const std::vector<cplx>& jet_bases, const StepPolicy& policy = {});

JetValues boundary_jet(const LoewnerFlow& flow, cplx base);

TraceSample compute_trace(const FlowKind& kind, const DrivingPath& driving,
                          const std::vector<double>& sample_times, const StepPolicy& policy = {});

double capacity_of(const LoewnerFlow& flow);

// Distance from a map value to the moving singularity of the equation at time t.
double singularity_distance(const FlowKind& kind, double t, double xi, cplx value);

// Default start time used for whole-plane and disc kinds.
constexpr double kDefaultStartTime = -20.0;

}  // namespace annsle
