#include "gfmvs/vi_design.hpp"

#include <algorithm>
#include <cmath>

namespace gfmvs {

AdaptiveViParams::AdaptiveViParams(double k_x_, double n_xr_, double i_th_)
    : k_x(k_x_), n_xr(n_xr_), i_th(i_th_) {
    if (k_x < 0.0) throw std::invalid_argument("adaptive VI: k_x must be >= 0");
    if (n_xr <= 0.0) throw std::invalid_argument("adaptive VI: n_xr must be > 0");
    if (i_th < 0.0) throw std::invalid_argument("adaptive VI: i_th must be >= 0");
}

ViValue eval_adaptive_vi(double i_omag, const AdaptiveViParams& p) {
    if (i_omag < 0.0) {
        throw std::invalid_argument("adaptive VI: current magnitude must be >= 0");
    }
    if (i_omag <= p.i_th) return ViValue{0.0, 0.0};
    const double x_v = p.k_x * (i_omag - p.i_th);
    return ViValue{x_v / p.n_xr, x_v};
}

double required_total_impedance(double v_m_max, double i_m) {
    if (i_m <= 0.0) {
        throw std::invalid_argument("current limit must be positive");
    }
    if (v_m_max < 0.0) {
        throw std::invalid_argument("driving-voltage magnitude must be >= 0");
    }
    return v_m_max / i_m;
}

ViSizing size_vi(double angle_deg, const Phasor& z_l, double required) {
    if (angle_deg < 0.0 || angle_deg > 90.0) {
        throw std::invalid_argument("VI angle must lie in [0, 90] degrees");
    }
    if (required <= 0.0) {
        throw std::invalid_argument("required impedance must be positive");
    }
    const double zl_mag = std::abs(z_l);
    if (required < zl_mag) {
        throw InfeasibleScenario(
            "infeasible scenario: required |z_v + z_l| = " +
            std::to_string(required) + " ohm is below |z_l| = " +
            std::to_string(zl_mag) +
            " ohm; the current limit is exceeded even with z_v = 0");
    }
    // |m·e^{ja} + z_l|² = required²  =>  m² + 2bm + |z_l|² − required² = 0
    // with b = R_L·cos a + X_L·sin a ≥ 0 for first-quadrant z_l, so the
    // nonnegative root is m = −b + sqrt(b² + required² − |z_l|²).
    const double a = deg_to_rad(angle_deg);
    const double b = z_l.real() * std::cos(a) + z_l.imag() * std::sin(a);
    const double m = -b + std::sqrt(b * b + required * required - zl_mag * zl_mag);
    return ViSizing{angle_deg, std::max(m, 0.0)};
}

double optimal_angle(const Phasor& z_l) {
    if (std::abs(z_l) == 0.0) {
        throw std::invalid_argument("optimal angle undefined for z_l = 0");
    }
    return arg_deg(z_l);
}

std::vector<SweepPoint> angle_sweep(const SweepScenario& scenario, double i_m,
                                    const std::vector<double>& angles_deg) {
    if (angles_deg.empty()) {
        throw std::invalid_argument("angle sweep needs at least one angle");
    }
    for (double a : angles_deg) {
        if (a < 0.0 || a > 90.0) {
            throw std::invalid_argument("sweep angle out of [0, 90] degrees");
        }
    }

    // The driving voltages do not depend on the impedances, so the required
    // total impedance — and hence feasibility — is the same at every angle.
    FaultNetworkModel probe{scenario.v_cref_pos, scenario.v_f_pos,
                            scenario.v_f_neg, scenario.z_l, Phasor(0.0, 0.0)};
    const ThreePhaseSet vm = driving_voltages(probe);
    const double v_m_max =
        std::max({std::abs(vm.a), std::abs(vm.b), std::abs(vm.c)});
    const double required = required_total_impedance(v_m_max, i_m);

    std::vector<SweepPoint> points;
    points.reserve(angles_deg.size());
    for (double angle : angles_deg) {
        const ViSizing sizing = size_vi(angle, scenario.z_l, required);
        FaultNetworkModel m{scenario.v_cref_pos, scenario.v_f_pos,
                            scenario.v_f_neg, scenario.z_l,
                            from_polar_deg(sizing.magnitude, angle)};
        const CapacitorVoltages vc = capacitor_voltages(m);
        const SupportDeviations dev = support_deviations(m);
        points.push_back(SweepPoint{angle, sizing.magnitude, std::abs(vc.pos),
                                    std::abs(vc.neg), dev.dev_pos, dev.dev_neg,
                                    max_phase_current(m)});
    }
    return points;
}

std::vector<double> default_sweep_angles(const Phasor& z_l) {
    std::vector<double> angles;
    for (int a = 0; a <= 90; a += 5) angles.push_back(static_cast<double>(a));
    const double best = optimal_angle(z_l);
    if (best >= 0.0 && best <= 90.0) angles.push_back(best);
    std::sort(angles.begin(), angles.end());
    angles.erase(std::unique(angles.begin(), angles.end()), angles.end());
    return angles;
}

std::vector<double> dense_sweep_angles() {
    std::vector<double> angles;
    angles.reserve(901);
    for (int k = 0; k <= 900; ++k) angles.push_back(0.1 * k);
    return angles;
}

}  // namespace gfmvs
