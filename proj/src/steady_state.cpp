#include "gfmvs/steady_state.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

namespace gfmvs {

namespace {

constexpr double kEnergyBracketLo = 1.0;    // V
constexpr double kEnergyBracketHi = 400.0;  // V
constexpr double kThetaScanLo = -1.553;     // rad (≈ −89°)
constexpr double kThetaScanHi = 1.750;      // rad (≈ 100°)
constexpr double kThetaScanStep = 0.0175;   // rad (≈ 1°)

}  // namespace

SteadyNetwork steady_network(const PlantParams& p, bool faulted) {
    SteadyNetwork n;
    n.z_l = p.composed_z_l();
    n.z_g2 = p.z_g2;
    n.z_f = p.z_f;
    n.fault = faulted ? p.fault_kind : SimFaultKind::NONE;
    n.e = from_polar_deg(p.v_g_phase_peak, p.source_angle_deg);
    return n;
}

NetworkSolution solve_network(const SteadyNetwork& n, double e_mag,
                              double theta, const Phasor& z_v) {
    const Phasor vref = std::polar(e_mag, theta);
    const Phasor zt = z_v + n.z_l;
    if (std::abs(zt) == 0.0 || std::abs(n.z_g2) == 0.0) {
        throw std::invalid_argument("steady-state solve: degenerate impedance");
    }
    const Phasor y1 = 1.0 / zt;
    const Phasor y2 = 1.0 / n.z_g2;

    Phasor vf_pos, vf_neg;
    switch (n.fault) {
        case SimFaultKind::NONE:
            vf_pos = (vref * y1 + n.e * y2) / (y1 + y2);
            vf_neg = Phasor(0.0, 0.0);
            break;
        case SimFaultKind::THREE_PHASE: {
            if (std::abs(n.z_f) == 0.0) {
                throw std::invalid_argument(
                    "steady-state solve: bolted faults need |z_f| > 0");
            }
            const Phasor yf = 1.0 / n.z_f;
            vf_pos = (vref * y1 + n.e * y2) / (y1 + y2 + yf);
            vf_neg = Phasor(0.0, 0.0);
            break;
        }
        case SimFaultKind::LL: {
            if (std::abs(n.z_f) == 0.0) {
                throw std::invalid_argument(
                    "steady-state solve: bolted faults need |z_f| > 0");
            }
            // Nodal equations at the fault bus: the fault branch couples
            // the positive and negative sequence nodes.
            const Phasor yf = 1.0 / n.z_f;
            const Phasor d = y1 + y2 + yf;
            const Phasor det = d * d - yf * yf;
            const Phasor b0 = vref * y1 + n.e * y2;
            vf_pos = d * b0 / det;
            vf_neg = yf * b0 / det;
            break;
        }
    }

    NetworkSolution s;
    s.v_f_pos = vf_pos;
    s.v_f_neg = vf_neg;
    s.i_pos = (vref - vf_pos) / zt;
    s.i_neg = -vf_neg / zt;
    s.v_c_pos = n.z_l * s.i_pos + vf_pos;
    s.v_c_neg = n.z_l * s.i_neg + vf_neg;
    // Average powers at the capacitor node; the oscillating 2ω component is
    // what the droop's low-pass filter removes, so it never appears here.
    s.p = 1.5 * (std::real(s.v_c_pos * std::conj(s.i_pos)) +
                 std::real(s.v_c_neg * std::conj(s.i_neg)));
    s.q = 1.5 * (std::imag(s.v_c_pos * std::conj(s.i_pos)) -
                 std::imag(s.v_c_neg * std::conj(s.i_neg)));
    s.v_cq = std::imag(s.v_c_pos * std::polar(1.0, -theta));
    s.i_omag = max_phase_magnitude(s.i_pos, s.i_neg);
    return s;
}

namespace {

// Droop magnitude equation residual at fixed theta, as a function of E:
//   g(E) = E − (v_n + n_q(q_set − Q(E,θ)) − k_oq·v_cq(E,θ)).
// Solved by bisection; no solution in the bracket means no equilibrium.
std::optional<double> energy_for_theta(const SteadyNetwork& n,
                                       const DroopParams& d, double theta,
                                       const Phasor& z_v) {
    auto residual = [&](double e_mag) {
        const NetworkSolution s = solve_network(n, e_mag, theta, z_v);
        return e_mag - (d.v_n + d.n_q * (d.q_set - s.q) - d.k_oq * s.v_cq);
    };
    double lo = kEnergyBracketLo, hi = kEnergyBracketHi;
    double f_lo = residual(lo), f_hi = residual(hi);
    if (!(f_lo < 0.0 && f_hi > 0.0)) return std::nullopt;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (residual(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::optional<double> power_for_theta(const SteadyNetwork& n,
                                      const DroopParams& d, double theta,
                                      const Phasor& z_v) {
    const auto e_mag = energy_for_theta(n, d, theta, z_v);
    if (!e_mag) return std::nullopt;
    return solve_network(n, *e_mag, theta, z_v).p;
}

}  // namespace

OperatingPoint operating_point(const SteadyNetwork& n, const DroopParams& d,
                               const Phasor& z_v) {
    OperatingPoint op;
    op.z_v = z_v;

    // The grid holds the frequency at w_n, so any equilibrium must deliver
    // P = p_set: scan theta upward for the first stable crossing of the
    // power-angle curve, then bisect onto it.
    double prev_theta = kThetaScanLo;
    auto prev_p = power_for_theta(n, d, prev_theta, z_v);
    double lo = 0.0, hi = 0.0;
    bool bracketed = false;
    for (double theta = kThetaScanLo + kThetaScanStep; theta <= kThetaScanHi;
         theta += kThetaScanStep) {
        const auto p = power_for_theta(n, d, theta, z_v);
        if (prev_p && p && *prev_p < d.p_set && *p >= d.p_set) {
            lo = prev_theta;
            hi = theta;
            bracketed = true;
            break;
        }
        prev_theta = theta;
        prev_p = p;
    }
    if (!bracketed) return op;

    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto p = power_for_theta(n, d, mid, z_v);
        if (p && *p < d.p_set) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double theta = 0.5 * (lo + hi);
    const auto e_mag = energy_for_theta(n, d, theta, z_v);
    if (!e_mag) return op;

    op.exists = true;
    op.theta = theta;
    op.e_mag = *e_mag;
    op.sol = solve_network(n, op.e_mag, op.theta, z_v);
    return op;
}

OperatingPoint operating_point_adaptive(const SteadyNetwork& n,
                                        const DroopParams& d,
                                        const AdaptiveViParams& vi) {
    // Below the activation threshold the law gives z_v = 0.
    OperatingPoint base = operating_point(n, d, Phasor(0.0, 0.0));
    if (base.exists && base.sol.i_omag <= vi.i_th) return base;

    auto op_at = [&](double x_v) {
        const Phasor z_v(x_v / vi.n_xr, x_v);
        return operating_point(n, d, z_v);
    };
    // residual(x) = x − k_x·(i_omag(x) − i_th): negative while the law asks
    // for more reactance than x provides. A vanished equilibrium at large x
    // is treated as "x too large".
    auto residual = [&](double x_v, const OperatingPoint& op) {
        if (!op.exists) return 1.0;
        return x_v - vi.k_x * std::max(op.sol.i_omag - vi.i_th, 0.0);
    };
    double lo = 0.0, hi = 200.0;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (residual(mid, op_at(mid)) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const OperatingPoint settled = op_at(0.5 * (lo + hi));
    return settled.exists ? settled : op_at(lo);
}

ViTuneResult tune_vi_magnitude(const SteadyNetwork& n, const DroopParams& d,
                               double angle_deg, double i_target) {
    if (i_target <= 0.0) {
        throw std::invalid_argument("VI tuning needs a positive current target");
    }
    constexpr double kStep = 0.5;   // ohm, scan resolution
    constexpr double kMax = 60.0;   // ohm, scan ceiling

    auto solve = [&](double m) {
        return operating_point(n, d, from_polar_deg(m, angle_deg));
    };
    auto finish = [&](double m, const OperatingPoint& op) {
        ViTuneResult r;
        r.magnitude = m;
        r.op = op;
        r.achieved_i_max = op.exists ? op.sol.i_omag : 0.0;
        r.reached = op.exists &&
                    std::abs(r.achieved_i_max - i_target) <= 1e-9 * i_target;
        return r;
    };

    // The settled current is not monotone in the VI magnitude: it falls,
    // reaches a minimum, and rises again as the droop pushes the reference
    // up — and past some size the equilibrium vanishes altogether (the
    // power-transfer nose). Scan upward for the first interval where the
    // current falls through the target, then bisect inside it.
    OperatingPoint prev = solve(0.0);
    if (!prev.exists) return finish(0.0, prev);
    if (prev.sol.i_omag <= i_target) return finish(0.0, prev);

    double prev_m = 0.0;
    double best_m = 0.0;
    OperatingPoint best = prev;
    for (double m = kStep; m <= kMax + 0.5 * kStep; m += kStep) {
        const OperatingPoint op = solve(m);
        if (!op.exists) {
            // Equilibrium vanished: the smallest achievable current sits at
            // the nose edge. Refine toward it.
            double lo = prev_m, hi = m;
            OperatingPoint lo_op = prev;
            for (int it = 0; it < 50; ++it) {
                const double mid = 0.5 * (lo + hi);
                const OperatingPoint mid_op = solve(mid);
                if (mid_op.exists) {
                    lo = mid;
                    lo_op = mid_op;
                } else {
                    hi = mid;
                }
            }
            if (lo_op.sol.i_omag < best.sol.i_omag) return finish(lo, lo_op);
            return finish(best_m, best);
        }
        if (op.sol.i_omag <= i_target) {
            // Bracketed on the falling branch; bisect onto the crossing.
            double lo = prev_m, hi = m;
            OperatingPoint hi_op = op;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                const OperatingPoint mid_op = solve(mid);
                if (mid_op.exists && mid_op.sol.i_omag > i_target) {
                    lo = mid;
                } else {
                    hi = mid;
                    hi_op = mid_op;
                }
            }
            return finish(hi, hi_op);
        }
        if (op.sol.i_omag < best.sol.i_omag) {
            best_m = m;
            best = op;
        }
        prev = op;
        prev_m = m;
    }
    return finish(best_m, best);
}

AdaptiveGainResult tune_adaptive_gain(const SteadyNetwork& n,
                                      const DroopParams& d, double n_xr,
                                      double i_th, double i_target) {
    if (i_target <= i_th) {
        throw std::invalid_argument(
            "adaptive gain tuning needs i_target above the threshold");
    }
    AdaptiveGainResult r;
    const double angle_deg = rad_to_deg(std::atan(n_xr));
    r.tune = tune_vi_magnitude(n, d, angle_deg, i_target);
    const double x_v = r.tune.magnitude * std::sin(std::atan(n_xr));
    r.k_x = x_v / (i_target - i_th);
    r.reached = r.tune.reached;
    return r;
}

}  // namespace gfmvs
