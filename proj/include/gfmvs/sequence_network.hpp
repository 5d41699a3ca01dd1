#pragma once

#include <optional>
#include <utility>

#include "gfmvs/phasor.hpp"

// Positive- and negative-sequence equivalent circuits of a grid-forming
// inverter feeding a faulted bus:
//
//   v_cref+ --[ z_v + z_l ]--> fault bus held at v_f+      (positive seq.)
//          0 --[ z_v + z_l ]--> fault bus held at v_f-      (negative seq.)
//
// z_l is the composed impedance from the filter capacitor to the fault
// location (transformer leakage + inverter-side grid segment + parasitic
// resistance); z_v is the virtual impedance presented by the controller.
// The fault-bus voltages act as ideal sources: they come either from
// measurement/configuration or from the Thevenin fault calculator below.

namespace gfmvs {

struct FaultNetworkModel {
    Phasor v_cref_pos;  // positive-sequence capacitor-voltage reference, V peak
    Phasor v_f_pos;     // positive-sequence fault-bus voltage, V peak
    Phasor v_f_neg;     // negative-sequence fault-bus voltage, V peak
    Phasor z_l;         // composed impedance capacitor -> fault location, ohm
    Phasor z_v;         // virtual impedance, ohm
};

struct SequenceCurrents {
    Phasor pos;
    Phasor neg;
};

struct CapacitorVoltages {
    Phasor pos;
    Phasor neg;
};

/// Voltage-support metrics of one operating point. The deviations are the
/// lengths of the reference-to-actual capacitor-voltage vectors; the thetas
/// are the angles between each drop vector z_l·i and its driving vector,
/// which vanish exactly when arg(z_v) = arg(z_l). A theta is absent when
/// one of its defining vectors is zero.
struct SupportDeviations {
    double dev_pos = 0.0;  // |v_cref+ − v_c+|, V
    double dev_neg = 0.0;  // |v_c−| (negative-sequence reference is zero), V
    std::optional<double> theta_pos_deg;
    std::optional<double> theta_neg_deg;
};

/// i+ = (v_cref+ − v_f+)/(z_v + z_l);  i− = −v_f−/(z_v + z_l).
/// Throws std::invalid_argument when |z_v + z_l| = 0.
SequenceCurrents sequence_currents(const FaultNetworkModel& m);

/// Per-phase numerator voltages of the natural-frame current expression:
///   v_Ma = (v_cref+ − v_f+) − v_f−
///   v_Mb = a²(v_cref+ − v_f+) − a·v_f−
///   v_Mc = a(v_cref+ − v_f+) − a²·v_f−
/// Independent of z_v and z_l.
ThreePhaseSet driving_voltages(const FaultNetworkModel& m);

/// Natural-frame phase currents: each driving voltage / (z_v + z_l); equal
/// to from_sequence of the sequence currents (no zero sequence).
ThreePhaseSet phase_currents(const FaultNetworkModel& m);

/// Largest of the three phase-current magnitudes, A peak.
double max_phase_current(const FaultNetworkModel& m);

/// v_c+ = z_l·i+ + v_f+;  v_c− = z_l·i− + v_f−.
CapacitorVoltages capacitor_voltages(const FaultNetworkModel& m);

SupportDeviations support_deviations(const FaultNetworkModel& m);

// --- fault-bus voltage calculator -----------------------------------------
//
// Collapses the grid side (source behind Z_g2) into a Thevenin equivalent
// and solves the standard symmetrical-component interconnection for the
// chosen fault kind. Deliberately ignores the inverter's contribution to
// the fault bus, matching the equivalent-source treatment above.

enum class FaultKind {
    THREE_PHASE,  // all three phases through z_f (symmetric)
    SLG,          // single phase to ground through z_f
    LL,           // phase-to-phase through z_f
    LLG,          // two phases to ground; z_f is the common ground-path impedance
};

struct GridThevenin {
    Phasor e;                  // pre-fault positive-sequence source, V peak
    Phasor z1;                 // positive-sequence source impedance, ohm
    std::optional<Phasor> z2;  // negative-sequence impedance; defaults to z1
    std::optional<Phasor> z0;  // zero-sequence impedance; needed for SLG/LLG
};

struct FaultSpec {
    FaultKind kind = FaultKind::LL;
    Phasor z_f{0.0, 0.0};  // fault impedance, ohm; infinite = no fault

    /// Sentinel for "fault branch open" — returns (e, 0) from the solver.
    static FaultSpec open_circuit();
    bool is_open() const;
};

/// Positive/negative-sequence fault-bus voltages for the given fault.
/// Throws std::invalid_argument on a zero interconnection denominator, or
/// for SLG/LLG when no zero-sequence data is configured.
std::pair<Phasor, Phasor> fault_bus_voltages(const GridThevenin& g,
                                             const FaultSpec& f);

}  // namespace gfmvs
