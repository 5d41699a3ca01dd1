#pragma once

#include <cmath>
#include <complex>

// Complex-phasor arithmetic and the Fortescue symmetrical-component
// transforms shared by every analysis module.
//
// Conventions (documented in README and CSV headers):
//   * magnitudes are peak phase-to-neutral volts / peak amps,
//   * angles are stored in radians internally; every public interface that
//     speaks degrees says so in its name (_deg).

namespace gfmvs {

using Phasor = std::complex<double>;

constexpr double pi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / pi; }

/// Build a phasor from magnitude and angle in degrees.
inline Phasor from_polar_deg(double mag, double angle_deg) {
    return std::polar(mag, deg_to_rad(angle_deg));
}

inline double arg_deg(const Phasor& p) { return rad_to_deg(std::arg(p)); }

/// The Fortescue rotator a = 1∠120°.
inline Phasor rotator_a() {
    // cos 120° = -1/2 exactly; sin 120° = √3/2.
    return Phasor(-0.5, std::sqrt(3.0) / 2.0);
}

/// One electrical quantity seen as its three phase values.
struct ThreePhaseSet {
    Phasor a;
    Phasor b;
    Phasor c;
};

/// One electrical quantity seen as its symmetrical components.
struct SequenceSet {
    Phasor pos;
    Phasor neg;
    Phasor zero;
};

/// Sequence components -> phase values:
///   a = pos + neg + zero
///   b = a²·pos + a·neg + zero
///   c = a·pos + a²·neg + zero
/// The zero-sequence term is carried for generality; three-wire plants in
/// this toolkit never produce one.
inline ThreePhaseSet from_sequence(const SequenceSet& s) {
    const Phasor a = rotator_a();
    const Phasor a2 = a * a;
    return ThreePhaseSet{
        s.pos + s.neg + s.zero,
        a2 * s.pos + a * s.neg + s.zero,
        a * s.pos + a2 * s.neg + s.zero,
    };
}

/// Phase values -> sequence components (inverse Fortescue, factor 1/3).
inline SequenceSet to_sequence(const ThreePhaseSet& t) {
    const Phasor a = rotator_a();
    const Phasor a2 = a * a;
    return SequenceSet{
        (t.a + a * t.b + a2 * t.c) / 3.0,
        (t.a + a2 * t.b + a * t.c) / 3.0,
        (t.a + t.b + t.c) / 3.0,
    };
}

/// Largest of the three phase magnitudes produced by a positive/negative
/// sequence pair (zero sequence absent): the per-phase amplitudes are
/// |pos + neg|, |a²·pos + a·neg| and |a·pos + a²·neg|.
inline double max_phase_magnitude(const Phasor& pos, const Phasor& neg) {
    const Phasor a = rotator_a();
    const Phasor a2 = a * a;
    return std::max({std::abs(pos + neg), std::abs(a2 * pos + a * neg),
                     std::abs(a * pos + a2 * neg)});
}

/// |u − w| computed from magnitudes and the angle difference only
/// (law of cosines), never from the Cartesian difference.
///
/// The textbook form √(|u|² + |w|² − 2|u||w|cosθ) cancels catastrophically
/// when u ≈ w, so the algebraically identical
///     d² = (|u| − |w|)² + 4|u||w|·sin²(θ/2)
/// is used; it keeps full precision near θ = 0 and stays an evaluation
/// route independent of complex subtraction.
inline double deviation_magnitude(const Phasor& u, const Phasor& w) {
    const double mu = std::abs(u);
    const double mw = std::abs(w);
    const double theta = std::arg(u) - std::arg(w);
    const double s = std::sin(0.5 * theta);
    const double dm = mu - mw;
    return std::sqrt(dm * dm + 4.0 * mu * mw * s * s);
}

}  // namespace gfmvs
