#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "gfmvs/phasor.hpp"
#include "gfmvs/sequence_network.hpp"

// Virtual-impedance design: the adaptive VI law, current-limit-constrained
// sizing, the angle sweep behind the voltage-support comparison, and the
// matched-angle optimality result.

namespace gfmvs {

/// A scenario is infeasible when even z_v = 0 exceeds the current limit
/// (required total impedance below |z_l|); the voltage-support comparison
/// is then undefined. Mapped to its own CLI exit code.
class InfeasibleScenario : public std::runtime_error {
  public:
    explicit InfeasibleScenario(const std::string& what)
        : std::runtime_error(what) {}
};

/// Adaptive VI law parameters: reactance grows proportionally with the
/// current overshoot past the threshold, resistance follows through the
/// fixed X/R ratio.
struct AdaptiveViParams {
    AdaptiveViParams(double k_x, double n_xr, double i_th);
    double k_x;   // ohm per A
    double n_xr;  // X/R ratio of the VI, > 0
    double i_th;  // activation threshold, A peak
};

struct ViValue {
    double r_v = 0.0;  // ohm
    double x_v = 0.0;  // ohm
};

/// x_v = k_x·(i_omag − i_th) when the current exceeds the threshold, else 0;
/// r_v = x_v / n_xr. Continuous at i_omag = i_th.
ViValue eval_adaptive_vi(double i_omag, const AdaptiveViParams& p);

/// Required |z_v + z_l| so the worst phase current equals i_m:
/// the phase currents scale as max|v_M| / |z_v + z_l|.
double required_total_impedance(double v_m_max, double i_m);

struct ViSizing {
    double angle_deg = 0.0;
    double magnitude = 0.0;  // ohm
};

/// The unique m ≥ 0 with |m·e^{j·angle} + z_l| = required (nonnegative root
/// of the sizing quadratic). Throws InfeasibleScenario when required < |z_l|.
ViSizing size_vi(double angle_deg, const Phasor& z_l, double required);

/// arg(z_l) in degrees — the VI angle at which theta+ = theta− = 0 and both
/// deviations are simultaneously minimized over all sized VIs.
double optimal_angle(const Phasor& z_l);

/// A fault scenario with the VI left free: the sweep supplies z_v per angle.
struct SweepScenario {
    Phasor v_cref_pos;
    Phasor v_f_pos;
    Phasor v_f_neg;
    Phasor z_l;
};

struct SweepPoint {
    double angle_deg = 0.0;
    double vi_magnitude = 0.0;  // ohm
    double v_c_pos_mag = 0.0;   // V
    double v_c_neg_mag = 0.0;   // V
    double dev_pos = 0.0;       // V
    double dev_neg = 0.0;       // V
    double i_max = 0.0;         // A
};

/// For each angle: size the VI so the worst phase current is exactly i_m,
/// then record the voltage-support metrics. Infeasibility is angle-
/// independent, so it is raised before any point is produced.
std::vector<SweepPoint> angle_sweep(const SweepScenario& scenario, double i_m,
                                    const std::vector<double>& angles_deg);

/// Default sweep grid: 0°..90° in 5° steps plus the exact arg(z_l).
std::vector<double> default_sweep_angles(const Phasor& z_l);

/// Dense verification grid: 0°..90° in 0.1° steps.
std::vector<double> dense_sweep_angles();

}  // namespace gfmvs
