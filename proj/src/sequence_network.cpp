#include "gfmvs/sequence_network.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gfmvs {

namespace {

Phasor total_impedance(const FaultNetworkModel& m) {
    const Phasor zt = m.z_v + m.z_l;
    if (std::abs(zt) == 0.0) {
        throw std::invalid_argument("degenerate impedance: |z_v + z_l| = 0");
    }
    return zt;
}

}  // namespace

SequenceCurrents sequence_currents(const FaultNetworkModel& m) {
    const Phasor zt = total_impedance(m);
    return SequenceCurrents{(m.v_cref_pos - m.v_f_pos) / zt, -m.v_f_neg / zt};
}

ThreePhaseSet driving_voltages(const FaultNetworkModel& m) {
    const Phasor a = rotator_a();
    const Phasor a2 = a * a;
    const Phasor drive_pos = m.v_cref_pos - m.v_f_pos;
    return ThreePhaseSet{
        drive_pos - m.v_f_neg,
        a2 * drive_pos - a * m.v_f_neg,
        a * drive_pos - a2 * m.v_f_neg,
    };
}

ThreePhaseSet phase_currents(const FaultNetworkModel& m) {
    const Phasor zt = total_impedance(m);
    const ThreePhaseSet v = driving_voltages(m);
    return ThreePhaseSet{v.a / zt, v.b / zt, v.c / zt};
}

double max_phase_current(const FaultNetworkModel& m) {
    const ThreePhaseSet i = phase_currents(m);
    return std::max({std::abs(i.a), std::abs(i.b), std::abs(i.c)});
}

CapacitorVoltages capacitor_voltages(const FaultNetworkModel& m) {
    const SequenceCurrents i = sequence_currents(m);
    return CapacitorVoltages{m.z_l * i.pos + m.v_f_pos,
                             m.z_l * i.neg + m.v_f_neg};
}

SupportDeviations support_deviations(const FaultNetworkModel& m) {
    const SequenceCurrents i = sequence_currents(m);
    const CapacitorVoltages vc = capacitor_voltages(m);

    SupportDeviations out;
    // The deviation vectors: reference minus actual. Evaluated through the
    // law-of-cosines route so the value is cross-checked against direct
    // subtraction in tests, as the model demands both to agree.
    out.dev_pos = deviation_magnitude(m.v_cref_pos, vc.pos);
    out.dev_neg = std::abs(vc.neg);

    // theta+ : angle between the positive-sequence drop z_l·i+ and the
    // driving vector v_cref+ − v_f+. theta− mirrors it with z_l·i− and
    // −v_f−. Both are zero iff arg(z_v) = arg(z_l).
    const Phasor drop_pos = m.z_l * i.pos;
    const Phasor drive_pos = m.v_cref_pos - m.v_f_pos;
    if (std::abs(drop_pos) > 0.0 && std::abs(drive_pos) > 0.0) {
        out.theta_pos_deg =
            rad_to_deg(std::arg(drop_pos) - std::arg(drive_pos));
    }
    const Phasor drop_neg = m.z_l * i.neg;
    const Phasor drive_neg = -m.v_f_neg;
    if (std::abs(drop_neg) > 0.0 && std::abs(drive_neg) > 0.0) {
        out.theta_neg_deg =
            rad_to_deg(std::arg(drop_neg) - std::arg(drive_neg));
    }
    return out;
}

FaultSpec FaultSpec::open_circuit() {
    return FaultSpec{FaultKind::LL,
                     Phasor(std::numeric_limits<double>::infinity(), 0.0)};
}

bool FaultSpec::is_open() const {
    return !std::isfinite(z_f.real()) || !std::isfinite(z_f.imag());
}

std::pair<Phasor, Phasor> fault_bus_voltages(const GridThevenin& g,
                                             const FaultSpec& f) {
    if (f.is_open()) {
        return {g.e, Phasor(0.0, 0.0)};
    }
    const Phasor z1 = g.z1;
    const Phasor z2 = g.z2.value_or(g.z1);

    auto check_denominator = [](const Phasor& den) {
        if (std::abs(den) == 0.0) {
            throw std::invalid_argument(
                "fault interconnection denominator is zero");
        }
        return den;
    };
    auto zero_sequence = [&]() {
        if (!g.z0) {
            throw std::invalid_argument(
                "unsupported grounding: SLG/LLG need zero-sequence Thevenin "
                "data (z0)");
        }
        return *g.z0;
    };

    switch (f.kind) {
        case FaultKind::THREE_PHASE: {
            const Phasor i1 = g.e / check_denominator(z1 + f.z_f);
            return {g.e - z1 * i1, Phasor(0.0, 0.0)};
        }
        case FaultKind::LL: {
            // Positive and negative networks in series through z_f.
            const Phasor i1 = g.e / check_denominator(z1 + z2 + f.z_f);
            return {g.e - z1 * i1, z2 * i1};
        }
        case FaultKind::SLG: {
            // All three networks in series; z_f appears as 3·z_f.
            const Phasor z0 = zero_sequence();
            const Phasor i1 =
                g.e / check_denominator(z1 + z2 + z0 + 3.0 * f.z_f);
            return {g.e - z1 * i1, -z2 * i1};
        }
        case FaultKind::LLG: {
            // Negative network in parallel with (zero + 3·z_f); the faulted
            // phases share the bus voltage, so v_f+ = v_f−.
            const Phasor z0 = zero_sequence();
            const Phasor branch = z0 + 3.0 * f.z_f;
            const Phasor zp = z2 * branch / check_denominator(z2 + branch);
            const Phasor i1 = g.e / check_denominator(z1 + zp);
            const Phasor vf = g.e - z1 * i1;
            return {vf, vf};
        }
    }
    throw std::invalid_argument("unknown fault kind");
}

}  // namespace gfmvs
