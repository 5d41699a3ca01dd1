#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gfmvs/phasor.hpp"
#include "gfmvs/sequence_network.hpp"
#include "gfmvs/timedomain.hpp"
#include "gfmvs/vi_design.hpp"

// Scenario configuration: a JSON file with nested sections and explicit
// unit suffixes in every key name (..._ohm, ..._V, ..._A, ..._deg, ...).
// Base quantities are stated once (rated power, line voltage, frequency)
// and everything derived — impedance base, peak current base, transformer
// inductance from its per-unit reactance — is computed at load time.
//
// Exactly one of the `fault` (network fault specification) and `fault_bus`
// (directly prescribed sequence voltages) sections must be present.

namespace gfmvs {

/// Invalid or inconsistent configuration; the message starts with the
/// offending field path (e.g. "network.filter_inductance_H: must be > 0").
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct SystemBase {
    double s_rated_va = 0.0;
    double v_ll_rms = 0.0;
    double w_n = 0.0;
    double i_limit_pu = 0.0;
    // derived at load
    double v_source_peak = 0.0;  // phase peak of the rated line voltage
    double z_base = 0.0;         // ohm
    double i_rated_peak = 0.0;   // A
    double i_limit_peak = 0.0;   // A
};

struct NetworkSection {
    double l_f = 0.0;
    double c_f = 0.0;
    double x_t_pu = 0.0;
    double r_par = 0.0;
    Phasor z_g1{0.0, 0.0};
    Phasor z_g2{0.0, 0.0};
    std::optional<Phasor> z_g2_neg;   // negative-sequence override
    std::optional<Phasor> z_g2_zero;  // zero-sequence data (SLG/LLG only)
    double source_angle_deg = 0.0;
    // derived at load
    double l_t = 0.0;  // H, from x_t_pu on the system impedance base
};

struct FaultSection {
    FaultSpec spec;  // kind + impedance; open sentinel when kind is "NONE"
    bool has_timing = false;
    double apply_s = 0.0;
    double clear_s = 0.0;
};

struct FaultBusSection {
    Phasor v_f_pos{0.0, 0.0};
    Phasor v_f_neg{0.0, 0.0};
};

enum class ViMode { FIXED, SIZED, ADAPTIVE };

struct ViSection {
    ViMode mode = ViMode::SIZED;
    double r_ohm = 0.0;     // FIXED
    double x_ohm = 0.0;     // FIXED
    double angle_deg = 0.0; // SIZED
    double current_target_pu = 0.0;  // SIZED / auto-gain; default i_limit_pu
    bool k_x_auto = false;  // ADAPTIVE: gain resolved from the current target
    double k_x = 0.0;       // ADAPTIVE: explicit gain, ohm per A
    double xr_ratio = 3.73;
    double threshold_pu = 1.1;
    double smoothing_tau_s = 5e-3;
    double release_tau_s = 0.2;
};

struct SimulationSection {
    double duration_s = 0.0;
    double metrics_start_s = 0.0;
    double metrics_end_s = 0.0;
    int substeps = 10;
    unsigned seed = 0;
};

struct ScenarioConfig {
    SystemBase system;
    NetworkSection network;
    Phasor v_cref{0.0, 0.0};  // positive-sequence voltage reference
    std::optional<FaultSection> fault;
    std::optional<FaultBusSection> fault_bus;
    ViSection vi;
    ControllerParams ctrl;  // droop + inner loops filled; ctrl.vi left to resolve
    std::optional<SimulationSection> simulation;
    std::optional<std::vector<double>> sweep_angles;

    /// Composed impedance capacitor -> fault location, ohm.
    Phasor z_l() const;

    /// Grid-side Thevenin equivalent seen from the fault bus.
    GridThevenin grid_thevenin() const;

    /// Sequence fault-bus voltages: direct from `fault_bus`, or computed
    /// from the Thevenin equivalent and the `fault` section.
    std::pair<Phasor, Phasor> fault_bus_sources() const;

    /// Scenario for the equivalent-source model (analyze / sweep).
    SweepScenario sweep_scenario() const;

    /// Plant parameters for simulation. Throws ConfigError when the config
    /// has no `fault` section with a simulatable kind, or no timing.
    PlantParams make_plant() const;

    /// Full simulation config with the virtual impedance resolved.
    SimConfig make_sim(const ViControl& vi_resolved) const;
};

/// Parse + validate. Unknown keys, wrong types, out-of-range values and
/// missing required fields all raise ConfigError with the field path.
ScenarioConfig load_scenario(const std::string& path);

/// Resolve the configured VI against the equivalent-source model:
/// FIXED passes through, SIZED solves the current-limit sizing at the
/// configured angle, ADAPTIVE finds the law's self-consistent fixed point
/// (with k_x from the sizing result when set to auto).
/// May throw InfeasibleScenario.
Phasor resolve_vi_phasor(const ScenarioConfig& cfg);

/// Resolve the configured VI for time-domain simulation. SIZED and
/// auto-gain ADAPTIVE tune against the droop equilibrium of the faulted
/// network so the settled worst-phase current meets the target; when the
/// target is unreachable the closest achievable setting is returned and
/// `note` (if non-null) receives a one-line explanation.
ViControl resolve_vi_simulation(const ScenarioConfig& cfg, std::string* note);

}  // namespace gfmvs
