#pragma once

#include "gfmvs/phasor.hpp"
#include "gfmvs/timedomain.hpp"

// Quasi-steady-state solver for the full network with the droop closed:
// finds the droop reference E∠θ at which the filtered active power equals
// its set-point (the grid pins the frequency, so any equilibrium has
// P = p_set) and the magnitude equation of the droop is satisfied. Used to
// initialize simulations, to size/tune virtual impedances for target fault
// currents, and as the independent prediction the simulator is checked
// against.
//
// Unlike the equivalent-source fault model, this solve keeps the inverter
// connected: the fault-bus voltage responds to the inverter current through
// a two-node sequence-domain nodal equation.

namespace gfmvs {

/// Sequence-domain view of the simulated network.
struct SteadyNetwork {
    Phasor z_l;       // capacitor -> fault bus (z_v excluded), ohm
    Phasor z_g2;      // fault bus -> source, ohm
    Phasor z_f;       // fault impedance, ohm
    SimFaultKind fault = SimFaultKind::NONE;
    Phasor e;         // grid source, V peak
};

/// Build the sequence-domain network from plant parameters, with the fault
/// branch closed or open.
SteadyNetwork steady_network(const PlantParams& p, bool faulted);

/// Phasors and scalar measurements at one candidate (E, θ, z_v).
struct NetworkSolution {
    Phasor v_f_pos, v_f_neg;
    Phasor i_pos, i_neg;
    Phasor v_c_pos, v_c_neg;
    double p = 0.0;       // W
    double q = 0.0;       // var
    double v_cq = 0.0;    // V
    double i_omag = 0.0;  // worst-phase amplitude, A
};

/// Linear sequence-domain solve at a given droop reference and VI.
NetworkSolution solve_network(const SteadyNetwork& n, double e_mag,
                              double theta, const Phasor& z_v);

struct OperatingPoint {
    bool exists = false;   // false when no P = p_set equilibrium is reachable
    double e_mag = 0.0;    // droop reference magnitude, V
    double theta = 0.0;    // droop reference angle vs. grid source, rad
    Phasor z_v{0.0, 0.0};  // VI in effect at the equilibrium
    NetworkSolution sol;
};

/// Fixed-VI droop equilibrium (z_v held constant; pass 0 for no VI).
OperatingPoint operating_point(const SteadyNetwork& n, const DroopParams& d,
                               const Phasor& z_v);

/// Equilibrium with the adaptive VI law closed around the network:
/// x_v = k_x·(i_omag − i_th) self-consistently, r_v = x_v/n_xr.
OperatingPoint operating_point_adaptive(const SteadyNetwork& n,
                                        const DroopParams& d,
                                        const AdaptiveViParams& vi);

struct ViTuneResult {
    double magnitude = 0.0;       // ohm
    double achieved_i_max = 0.0;  // A at the equilibrium
    bool reached = false;         // true when achieved ≈ target
    OperatingPoint op;
};

/// Bisect the VI magnitude at a fixed angle until the equilibrium
/// worst-phase current meets i_target. When the target is unreachable —
/// either the equilibrium vanishes first (power-transfer nose) or the
/// current never drops far enough — returns the closest achievable point
/// with reached = false.
ViTuneResult tune_vi_magnitude(const SteadyNetwork& n, const DroopParams& d,
                               double angle_deg, double i_target);

/// Gain for the adaptive law so its closed-loop equilibrium sits at
/// i_target: k_x = x_v*/(i_target − i_th) with x_v* from the fixed-angle
/// tune at atan(n_xr).
struct AdaptiveGainResult {
    double k_x = 0.0;
    bool reached = false;
    ViTuneResult tune;
};
AdaptiveGainResult tune_adaptive_gain(const SteadyNetwork& n,
                                      const DroopParams& d, double n_xr,
                                      double i_th, double i_target);

}  // namespace gfmvs
