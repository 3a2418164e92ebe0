#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fekf/mesh.hpp"

namespace fekf {

enum class BcKind { DirichletValue, NeumannZero, Robin };

/// One boundary-condition regime: `segment` carries `kind` while the sample
/// index lies in [from_sample, to_sample). Unlisted (segment, time) pairs are
/// adiabatic.
struct BoundaryPhase {
    std::string segment;
    int from_sample = 0;
    int to_sample = 0;
    BcKind kind = BcKind::NeumannZero;
    double value = 0.0;       // Dirichlet temperature
    double robin_nu = 0.0;    // exchange rate
    double robin_external = 0.0;
};

/// Full experiment description; mirrors the config file sections.
struct Scenario {
    std::string name = "scenario";

    // [domain]
    std::string shape = "l_shape";  // or "rect"
    double rect_width = 1.0;
    double rect_height = 1.0;
    double coarse_edge_target = 0.2;
    int truth_refinements = 1;
    double diffusivity = 1.11e-4;

    // [decomposition]
    int grid_nx = 3;
    int grid_ny = 3;
    int overlap_layers = 1;

    // [time]
    double sample_interval = 100.0;
    double central_dt = 10.0;
    double truth_dt = 1.0;
    int duration_samples = 300;

    // [filters]
    std::vector<int> consensus_steps{1, 2, 10};
    double gamma = 1.1;  // aggregate boost per sampling interval
    double sigma_w = 3.0;
    double sigma_v = 0.1;
    double initial_estimate = 305.0;
    double initial_cov = 20.0;

    // [truth]
    double initial_field = 300.0;

    // [schedule], [sensors]
    std::vector<BoundaryPhase> schedule;
    std::vector<Vec2> sensors;

    // [monte_carlo]
    int mc_runs = 50;
    std::uint64_t seed = 1234;

    // [evaluation]
    double lattice_spacing = 0.1;
    int steady_window = 100;
    std::vector<int> snapshot_samples;
    std::vector<double> gamma_sweep;
    int gamma_sweep_runs = 10;
    bool emit_trajectories = false;

    int substeps_central() const;  // sample_interval / central_dt
    void validate() const;         // throws ConfigError

    /// Canonical serialization (also the hash input).
    std::string canonical() const;
    std::uint64_t config_hash() const;
};

Scenario parse_scenario(std::istream& is, const std::string& name);
Scenario load_scenario_file(const std::string& path);

}  // namespace fekf
