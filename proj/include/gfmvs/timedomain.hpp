#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfmvs/phasor.hpp"
#include "gfmvs/vi_design.hpp"

// Discrete-time simulation of the full system: average-model inverter,
// LCL filter, transformer + grid branches, switched asymmetrical fault,
// droop outer loop, dual-SOGI sequence extraction, the dual-sequence VI
// voltage reference, and stationary-frame PR inner loops.
//
// The controller runs every t_s; the plant integrates with fixed-step RK4
// sub-steps between controller samples. Everything is double-precision with
// a fixed evaluation order, so runs are bit-reproducible.

namespace gfmvs {

class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(const std::string& what, double t_s)
        : std::runtime_error(what), time_s(t_s) {}
    double time_s;
};

enum class SimFaultKind { NONE, LL, THREE_PHASE };

struct PlantParams {
    double l_f = 3e-3;    // inverter-side filter inductance, H
    double c_f = 30e-6;   // filter capacitance, F
    double l_t = 0.0;     // transformer leakage inductance, H
    double r_par = 0.0;   // parasitic series resistance, inverter side, ohm
    Phasor z_g1{0.0, 0.0};  // grid segment capacitor side of the fault, ohm at w_n
    Phasor z_g2{0.0, 0.0};  // grid segment source side of the fault, ohm at w_n
    Phasor z_f{0.0, 0.0};   // fault impedance, ohm at w_n
    double v_g_phase_peak = 0.0;   // grid source magnitude, V peak per phase
    double source_angle_deg = 0.0; // grid source phase relative to v_cref
    double w_n = 314.0;            // rad/s
    SimFaultKind fault_kind = SimFaultKind::NONE;
    double fault_apply_s = 0.0;
    double fault_clear_s = 0.0;

    /// Composed impedance capacitor -> fault location (z_l of the phasor
    /// model): transformer leakage + z_g1 + parasitic resistance.
    Phasor composed_z_l() const;
};

struct DroopParams {
    double m_p = 0.0;    // rad/s per W
    double n_q = 0.0;    // V per var
    double w_f = 31.4;   // power-filter cutoff, rad/s
    double k_oq = 0.2;   // q-axis capacitor-voltage feedback gain
    double p_set = 0.0;  // W
    double q_set = 0.0;  // var
    double v_n = 0.0;    // nominal magnitude, V peak
    double w_n = 314.0;  // rad/s
};

struct InnerLoopParams {
    double kp_v = 0.0;  // voltage loop proportional gain, A/V
    double kr_v = 0.0;  // voltage loop resonant gain, A/(V·s)
    double kp_i = 0.0;  // current loop proportional gain, V/A
    double kr_i = 0.0;  // current loop resonant gain, V/(A·s)
};

/// Virtual-impedance control: either explicit values engaged above a
/// current threshold, or the adaptive proportional law. Both are smoothed
/// by a first-order filter to stay causal.
struct ViControl {
    enum class Mode { FIXED, ADAPTIVE };
    Mode mode = Mode::ADAPTIVE;
    double r_v = 0.0;            // FIXED: engaged resistance, ohm
    double x_v = 0.0;            // FIXED: engaged reactance, ohm
    double k_x = 0.0;            // ADAPTIVE: ohm per A
    double n_xr = 3.73;          // ADAPTIVE: X/R ratio
    double i_th = 0.0;           // activation threshold, A peak (both modes)
    double smoothing_tau = 5e-3; // s
    // FIXED mode gates on a peak-held current magnitude that decays with
    // this time constant. A bare comparison against the instantaneous
    // estimate would chatter: engaging the VI pulls the current below the
    // threshold for a few cycles, which releases it again.
    double release_tau = 0.2;    // s
};

struct ControllerParams {
    double t_s = 1e-4;      // s
    double sogi_k = 1.4142135623730951;
    double sogi_k_dc = 0.25;  // DC-offset rejection gain of the SOGIs
    // The VI drop is computed from sequence currents filtered in their own
    // synchronous frames (demodulate by the droop angle, first-order LPF,
    // remodulate). At the fundamental this is transparent — gain 1, phase 0 —
    // but it attenuates stationary-frame low-frequency leakage of the
    // extractor by roughly cutoff/w_n and moves the VI loop's crossover below
    // its phase-lag region, which is what keeps a large reactive VI stable.
    double vi_filter_rad_s = 30.0;
    DroopParams droop;
    InnerLoopParams inner;
    ViControl vi;
};

struct SimConfig {
    PlantParams plant;
    ControllerParams ctrl;
    double duration_s = 0.0;
    double metrics_start_s = 0.0;
    double metrics_end_s = 0.0;
    int plant_substeps = 10;  // plant RK4 sub-steps per controller sample
    unsigned seed = 0;        // recorded for reproducibility bookkeeping
};

// --- plant -----------------------------------------------------------------

/// Instantaneous plant state. Loop currents exist only while a fault branch
/// is closed: one circulating current for LL, two for the floating-star
/// three-phase fault.
struct PlantState {
    std::array<double, 3> i_f{};   // inverter-side inductor currents, A
    std::array<double, 3> v_c{};   // capacitor voltages, V
    std::array<double, 3> i_o{};   // output-branch currents, A
    std::array<double, 2> i_loop{};
    int n_loop = 0;
    bool faulted = false;
};

/// Advance the plant one RK4 sub-step of length dt under constant u_abc.
/// Fault topology never changes inside a sub-step; use apply_fault /
/// clear_fault at boundaries. Throws DivergenceError when any state
/// magnitude exceeds 1e6.
void step_plant(PlantState& state, const std::array<double, 3>& u_abc,
                const PlantParams& p, double t, double dt);

/// Close the fault branch (loop currents start at zero).
void apply_fault(PlantState& state, const PlantParams& p);

/// Open the fault branch with a flux-conserving merge of the inverter- and
/// grid-side branch currents.
void clear_fault(PlantState& state, const PlantParams& p);

/// Fault-bus phase voltages for the current state and drive (diagnostic /
/// measurement tap; computed from the same equations the integrator uses).
std::array<double, 3> fault_bus_voltage(const PlantState& state,
                                        const std::array<double, 3>& u_abc,
                                        const PlantParams& p, double t);

/// Grid source phase voltages at absolute time t.
std::array<double, 3> grid_voltage(const PlantParams& p, double t);

// --- controller blocks ------------------------------------------------------

/// Amplitude-invariant Clarke transform and its inverse.
std::array<double, 2> clarke(const std::array<double, 3>& abc);
std::array<double, 3> inverse_clarke(const std::array<double, 2>& ab);

/// One generalized integrator locked to w_n: tracks the input sinusoid and
/// produces its quadrature. A third state estimates and rejects DC offset —
/// without it the quadrature output passes DC with gain k, which turns the
/// reactive VI cross-coupling into positive DC feedback and destabilizes the
/// loop for large x_v. With the offset loop both outputs have a true zero at
/// DC while the response at w_n stays exactly (1, -j).
struct Sogi {
    double s = 0.0;   // in-phase output v'
    double qs = 0.0;  // quadrature output qv'
    double z = 0.0;   // DC-offset estimate
};

/// Dual-SOGI sequence extractor for one alpha/beta signal pair.
struct SequenceExtractor {
    Sogi alpha;
    Sogi beta;

    struct Output {
        std::array<double, 2> pos{};  // positive-sequence alpha/beta
        std::array<double, 2> neg{};  // negative-sequence alpha/beta
    };

    /// Advance one sample (RK4 over dt with the input held) and return the
    /// instantaneous symmetrical-component estimate.
    Output step(double in_alpha, double in_beta, double k, double k_dc,
                double w_n, double dt);

    /// Preload to the steady response of a pure sinusoid with the given
    /// complex amplitudes (used to start simulations at an operating point).
    void preset(const Phasor& amp_alpha, const Phasor& amp_beta);
};

struct DroopOutput {
    double omega = 0.0;      // rad/s
    double magnitude = 0.0;  // V
    double theta = 0.0;      // integrated phase, rad
    std::array<double, 2> ref_ab{};
};

/// P–ω / Q–V droop with the q-axis capacitor-voltage feedback term:
///   ω = ω_n + m_p(p_set − p);  E = v_n + n_q(q_set − q) − k_oq·v_cq.
/// Phase integrates ω from theta_prev over dt.
DroopOutput droop_update(double p_filtered, double q_filtered, double v_cq,
                         const DroopParams& d, double theta_prev, double dt);

/// The dual-sequence VI voltage reference: subtracts the virtual-impedance
/// drop of both sequence currents from the droop reference. The reactive
/// cross-coupling changes sign between sequences.
std::array<double, 2> vi_reference(const std::array<double, 2>& ref_ab,
                                   const std::array<double, 2>& i_pos_ab,
                                   const std::array<double, 2>& i_neg_ab,
                                   double r_v, double x_v);

/// Worst-phase current amplitude reconstructed from the sequence estimates.
double compute_i_omag(const std::array<double, 2>& i_pos_ab,
                      const std::array<double, 2>& i_neg_ab);

// --- scenario driver --------------------------------------------------------

/// One logged sample per controller period.
struct TimeSeries {
    std::vector<double> time_s;
    std::vector<std::array<double, 3>> v_c;  // V
    std::vector<std::array<double, 3>> i_o;  // A
    std::vector<double> v_c_pos_mag;         // V (controller estimate)
    std::vector<double> v_c_neg_mag;         // V
    std::vector<double> r_v;                 // ohm
    std::vector<double> x_v;                 // ohm
};

/// Fundamental-frequency measurements over the settled fault window,
/// obtained by single-bin DFT on the logged waveforms — an evaluation route
/// independent of the controller's own sequence extractor.
struct FaultMetrics {
    double v_c_pos_mag = 0.0;  // V
    double v_c_neg_mag = 0.0;  // V
    double i_max = 0.0;        // A, worst-phase fundamental amplitude
    double window_start_s = 0.0;
    double window_end_s = 0.0;
};

/// Everything the cross-validation against the phasor model needs: DFT
/// phasors of the logged signals over the metrics window plus the averaged
/// VI state.
struct SettledState {
    Phasor v_c_pos, v_c_neg;      // capacitor voltage
    Phasor i_o_pos, i_o_neg;      // output current
    Phasor v_f_pos, v_f_neg;      // fault-bus voltage
    Phasor v_cref_pos;            // droop reference
    double r_v = 0.0, x_v = 0.0;  // window-averaged VI
};

struct SimResult {
    TimeSeries series;
    FaultMetrics metrics;
    SettledState settled;
};

/// Run a full scenario from its pre-fault operating point. Throws
/// std::invalid_argument on inconsistent timing and DivergenceError when
/// the integration blows up.
SimResult run_scenario(const SimConfig& cfg);

}  // namespace gfmvs
