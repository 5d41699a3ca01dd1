#include "gfmvs/timedomain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gfmvs/steady_state.hpp"

namespace gfmvs {

Phasor PlantParams::composed_z_l() const {
    return Phasor(r_par + z_g1.real(), w_n * l_t + z_g1.imag());
}

std::array<double, 3> grid_voltage(const PlantParams& p, double t) {
    const double th = p.w_n * t + deg_to_rad(p.source_angle_deg);
    const double s = 2.0 * pi / 3.0;
    return {p.v_g_phase_peak * std::cos(th), p.v_g_phase_peak * std::cos(th - s),
            p.v_g_phase_peak * std::cos(th + s)};
}

namespace {

// Branch constants of the output network: inverter side of the fault bus
// (transformer + z_g1 + parasitic) and grid side (z_g2), plus the fault
// branch itself, all split into resistance and inductance at w_n.
struct BranchConstants {
    double r1, l1;  // capacitor -> fault bus
    double r2, l2;  // fault bus -> source
    double rf, lf;  // fault branch
};

BranchConstants branches(const PlantParams& p) {
    BranchConstants b;
    b.r1 = p.r_par + p.z_g1.real();
    b.l1 = p.l_t + p.z_g1.imag() / p.w_n;
    b.r2 = p.z_g2.real();
    b.l2 = p.z_g2.imag() / p.w_n;
    b.rf = p.z_f.real();
    b.lf = p.z_f.imag() / p.w_n;
    return b;
}

// Gaussian elimination with partial pivoting for the small topology-coupled
// mass-matrix systems (3x3 for LL, 5x5 for the floating-star fault).
template <int N>
void solve_dense(std::array<std::array<double, N>, N> m,
                 std::array<double, N>& rhs) {
    for (int col = 0; col < N; ++col) {
        int pivot = col;
        for (int r = col + 1; r < N; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        }
        std::swap(m[col], m[pivot]);
        std::swap(rhs[col], rhs[pivot]);
        for (int r = col + 1; r < N; ++r) {
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < N; ++c) m[r][c] -= f * m[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    for (int col = N - 1; col >= 0; --col) {
        double acc = rhs[col];
        for (int c = col + 1; c < N; ++c) acc -= m[col][c] * rhs[c];
        rhs[col] = acc / m[col][col];
    }
}

struct PlantDeriv {
    std::array<double, 3> i_f{};
    std::array<double, 3> v_c{};
    std::array<double, 3> i_o{};
    std::array<double, 2> i_loop{};
};

PlantDeriv derivative(const PlantState& x, const std::array<double, 3>& u,
                      const PlantParams& p, const BranchConstants& b,
                      double t) {
    PlantDeriv d;
    const std::array<double, 3> vg = grid_voltage(p, t);

    for (int k = 0; k < 3; ++k) {
        d.i_f[k] = (u[k] - x.v_c[k]) / p.l_f;
        d.v_c[k] = (x.i_f[k] - x.i_o[k]) / p.c_f;
    }

    const double rs = b.r1 + b.r2;
    const double ls = b.l1 + b.l2;

    if (!x.faulted || p.fault_kind == SimFaultKind::NONE) {
        for (int k = 0; k < 3; ++k) {
            d.i_o[k] = (x.v_c[k] - vg[k] - rs * x.i_o[k]) / ls;
        }
        return d;
    }

    if (p.fault_kind == SimFaultKind::LL) {
        // One circulating fault current i_F from phase b to c. Grid-branch
        // currents are i_o,b − i_F and i_o,c + i_F; eliminating the bus
        // voltages leaves a 3x3 inductance matrix over (di_ob, di_oc, di_F).
        const double iF = x.i_loop[0];
        d.i_o[0] = (x.v_c[0] - vg[0] - rs * x.i_o[0]) / ls;
        std::array<std::array<double, 3>, 3> m{{
            {ls, 0.0, -b.l2},
            {0.0, ls, b.l2},
            {b.l1, -b.l1, b.lf},
        }};
        std::array<double, 3> rhs{
            x.v_c[1] - vg[1] - rs * x.i_o[1] + b.r2 * iF,
            x.v_c[2] - vg[2] - rs * x.i_o[2] - b.r2 * iF,
            (x.v_c[1] - x.v_c[2]) - b.r1 * (x.i_o[1] - x.i_o[2]) - b.rf * iF,
        };
        solve_dense<3>(m, rhs);
        d.i_o[1] = rhs[0];
        d.i_o[2] = rhs[1];
        d.i_loop[0] = rhs[2];
        return d;
    }

    // THREE_PHASE: z_f from each phase to a floating star point; two
    // independent fault currents (the third is minus their sum).
    const double iFa = x.i_loop[0];
    const double iFb = x.i_loop[1];
    const double iFc = -iFa - iFb;
    std::array<std::array<double, 5>, 5> m{{
        {ls, 0.0, 0.0, -b.l2, 0.0},
        {0.0, ls, 0.0, 0.0, -b.l2},
        {0.0, 0.0, ls, b.l2, b.l2},
        {b.l1, 0.0, -b.l1, 2.0 * b.lf, b.lf},
        {0.0, b.l1, -b.l1, b.lf, 2.0 * b.lf},
    }};
    std::array<double, 5> rhs{
        x.v_c[0] - vg[0] - rs * x.i_o[0] + b.r2 * iFa,
        x.v_c[1] - vg[1] - rs * x.i_o[1] + b.r2 * iFb,
        x.v_c[2] - vg[2] - rs * x.i_o[2] + b.r2 * iFc,
        (x.v_c[0] - x.v_c[2]) - b.r1 * (x.i_o[0] - x.i_o[2]) -
            b.rf * (iFa - iFc),
        (x.v_c[1] - x.v_c[2]) - b.r1 * (x.i_o[1] - x.i_o[2]) -
            b.rf * (iFb - iFc),
    };
    solve_dense<5>(m, rhs);
    d.i_o = {rhs[0], rhs[1], rhs[2]};
    d.i_loop = {rhs[3], rhs[4]};
    return d;
}

PlantState advanced(const PlantState& x, const PlantDeriv& d, double h) {
    PlantState y = x;
    for (int k = 0; k < 3; ++k) {
        y.i_f[k] += h * d.i_f[k];
        y.v_c[k] += h * d.v_c[k];
        y.i_o[k] += h * d.i_o[k];
    }
    for (int k = 0; k < y.n_loop; ++k) y.i_loop[k] += h * d.i_loop[k];
    return y;
}

void accumulate(PlantDeriv& acc, const PlantDeriv& d, double w) {
    for (int k = 0; k < 3; ++k) {
        acc.i_f[k] += w * d.i_f[k];
        acc.v_c[k] += w * d.v_c[k];
        acc.i_o[k] += w * d.i_o[k];
    }
    for (int k = 0; k < 2; ++k) acc.i_loop[k] += w * d.i_loop[k];
}

void check_finite(const PlantState& x, double t) {
    auto bad = [](double v) { return !std::isfinite(v) || std::abs(v) > 1e6; };
    for (int k = 0; k < 3; ++k) {
        if (bad(x.i_f[k]) || bad(x.v_c[k]) || bad(x.i_o[k])) {
            throw DivergenceError(
                "numerical divergence at t = " + std::to_string(t) + " s", t);
        }
    }
    for (int k = 0; k < x.n_loop; ++k) {
        if (bad(x.i_loop[k])) {
            throw DivergenceError(
                "numerical divergence at t = " + std::to_string(t) + " s", t);
        }
    }
}

}  // namespace

void step_plant(PlantState& state, const std::array<double, 3>& u_abc,
                const PlantParams& p, double t, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("plant sub-step must be > 0");
    const BranchConstants b = branches(p);

    const PlantDeriv k1 = derivative(state, u_abc, p, b, t);
    const PlantDeriv k2 =
        derivative(advanced(state, k1, 0.5 * dt), u_abc, p, b, t + 0.5 * dt);
    const PlantDeriv k3 =
        derivative(advanced(state, k2, 0.5 * dt), u_abc, p, b, t + 0.5 * dt);
    const PlantDeriv k4 = derivative(advanced(state, k3, dt), u_abc, p, b, t + dt);

    PlantDeriv sum = k1;
    accumulate(sum, k2, 2.0);
    accumulate(sum, k3, 2.0);
    accumulate(sum, k4, 1.0);
    // sum currently holds k1 + 2k2 + 2k3 + k4 with weight 1 on k1.
    state = advanced(state, sum, dt / 6.0);
    check_finite(state, t + dt);
}

void apply_fault(PlantState& state, const PlantParams& p) {
    if (p.fault_kind == SimFaultKind::NONE || state.faulted) return;
    state.faulted = true;
    state.n_loop = (p.fault_kind == SimFaultKind::LL) ? 1 : 2;
    state.i_loop = {0.0, 0.0};
}

void clear_fault(PlantState& state, const PlantParams& p) {
    if (!state.faulted) return;
    const BranchConstants b = branches(p);
    const double share = b.l2 / (b.l1 + b.l2);
    if (p.fault_kind == SimFaultKind::LL) {
        // Reunite the series branch: the inverter- and grid-side inductors
        // carried different currents; the merged current conserves flux.
        const double iF = state.i_loop[0];
        state.i_o[1] -= share * iF;
        state.i_o[2] += share * iF;
    } else if (p.fault_kind == SimFaultKind::THREE_PHASE) {
        const double iFa = state.i_loop[0];
        const double iFb = state.i_loop[1];
        const double iFc = -iFa - iFb;
        state.i_o[0] -= share * iFa;
        state.i_o[1] -= share * iFb;
        state.i_o[2] -= share * iFc;
    }
    state.faulted = false;
    state.n_loop = 0;
    state.i_loop = {0.0, 0.0};
}

std::array<double, 3> fault_bus_voltage(const PlantState& state,
                                        const std::array<double, 3>& u_abc,
                                        const PlantParams& p, double t) {
    const BranchConstants b = branches(p);
    const PlantDeriv d = derivative(state, u_abc, p, b, t);
    std::array<double, 3> vb{};
    for (int k = 0; k < 3; ++k) {
        vb[k] = state.v_c[k] - b.r1 * state.i_o[k] - b.l1 * d.i_o[k];
    }
    return vb;
}

std::array<double, 2> clarke(const std::array<double, 3>& abc) {
    return {(2.0 * abc[0] - abc[1] - abc[2]) / 3.0,
            (abc[1] - abc[2]) / std::sqrt(3.0)};
}

std::array<double, 3> inverse_clarke(const std::array<double, 2>& ab) {
    const double half_beta = 0.5 * std::sqrt(3.0) * ab[1];
    return {ab[0], -0.5 * ab[0] + half_beta, -0.5 * ab[0] - half_beta};
}

namespace {

// One SOGI with DC-offset rejection: s tracks the input sinusoid, qs its
// quadrature, z the input's DC component.
//   ds/dt = w(k(in − s − z) − qs);  dqs/dt = w·s;  dz/dt = w·k_dc(in − s − z).
// At w_n the outputs are still exactly s = in, qs = quadrature(in); at DC
// both are zero (Routh: stable for any positive k, k_dc).
void sogi_rk4(Sogi& g, double in, double k, double k_dc, double w, double dt) {
    auto f = [&](double s, double qs, double z, double& ds, double& dqs,
                 double& dz) {
        const double e = in - s - z;
        ds = w * (k * e - qs);
        dqs = w * s;
        dz = w * k_dc * e;
    };
    double d1s, d1q, d1z, d2s, d2q, d2z, d3s, d3q, d3z, d4s, d4q, d4z;
    f(g.s, g.qs, g.z, d1s, d1q, d1z);
    f(g.s + 0.5 * dt * d1s, g.qs + 0.5 * dt * d1q, g.z + 0.5 * dt * d1z, d2s,
      d2q, d2z);
    f(g.s + 0.5 * dt * d2s, g.qs + 0.5 * dt * d2q, g.z + 0.5 * dt * d2z, d3s,
      d3q, d3z);
    f(g.s + dt * d3s, g.qs + dt * d3q, g.z + dt * d3z, d4s, d4q, d4z);
    g.s += dt / 6.0 * (d1s + 2.0 * d2s + 2.0 * d3s + d4s);
    g.qs += dt / 6.0 * (d1q + 2.0 * d2q + 2.0 * d3q + d4q);
    g.z += dt / 6.0 * (d1z + 2.0 * d2z + 2.0 * d3z + d4z);
}

}  // namespace

SequenceExtractor::Output SequenceExtractor::step(double in_alpha,
                                                  double in_beta, double k,
                                                  double k_dc, double w_n,
                                                  double dt) {
    sogi_rk4(alpha, in_alpha, k, k_dc, w_n, dt);
    sogi_rk4(beta, in_beta, k, k_dc, w_n, dt);
    Output out;
    out.pos = {0.5 * (alpha.s - beta.qs), 0.5 * (alpha.qs + beta.s)};
    out.neg = {0.5 * (alpha.s + beta.qs), 0.5 * (beta.s - alpha.qs)};
    return out;
}

void SequenceExtractor::preset(const Phasor& amp_alpha, const Phasor& amp_beta) {
    // Steady response to x(t) = Re(X·e^{jwt}): s carries Re(X), and the
    // quadrature integrator settles at qs = Im(X) at t = 0.
    alpha.s = amp_alpha.real();
    alpha.qs = amp_alpha.imag();
    alpha.z = 0.0;
    beta.s = amp_beta.real();
    beta.qs = amp_beta.imag();
    beta.z = 0.0;
}

DroopOutput droop_update(double p_filtered, double q_filtered, double v_cq,
                         const DroopParams& d, double theta_prev, double dt) {
    DroopOutput out;
    out.omega = d.w_n + d.m_p * (d.p_set - p_filtered);
    out.magnitude = d.v_n + d.n_q * (d.q_set - q_filtered) - d.k_oq * v_cq;
    out.theta = theta_prev + out.omega * dt;
    out.ref_ab = {out.magnitude * std::cos(out.theta),
                  out.magnitude * std::sin(out.theta)};
    return out;
}

std::array<double, 2> vi_reference(const std::array<double, 2>& ref_ab,
                                   const std::array<double, 2>& i_pos_ab,
                                   const std::array<double, 2>& i_neg_ab,
                                   double r_v, double x_v) {
    return {
        ref_ab[0] - (r_v * i_pos_ab[0] - x_v * i_pos_ab[1] + r_v * i_neg_ab[0] +
                     x_v * i_neg_ab[1]),
        ref_ab[1] - (r_v * i_pos_ab[1] + x_v * i_pos_ab[0] + r_v * i_neg_ab[1] -
                     x_v * i_neg_ab[0]),
    };
}

double compute_i_omag(const std::array<double, 2>& i_pos_ab,
                      const std::array<double, 2>& i_neg_ab) {
    // The instantaneous alpha/beta sequence pairs map back to phasors as
    // P = i_alpha+ + j·i_beta+ rotating forward and N = i_alpha− + j·i_beta−
    // rotating backward; the per-phase amplitudes use conj(N).
    const Phasor p(i_pos_ab[0], i_pos_ab[1]);
    const Phasor n(i_neg_ab[0], i_neg_ab[1]);
    return max_phase_magnitude(p, std::conj(n));
}

namespace {

// Stationary-frame proportional + resonant regulator; the resonant pair is
// advanced by exact rotation so the infinite-gain frequency sits exactly at
// w_n regardless of the sample rate.
struct Resonant {
    double s1 = 0.0;
    double s2 = 0.0;

    double step(double err, double kp, double kr, double w_n, double dt) {
        const double c = std::cos(w_n * dt);
        const double s = std::sin(w_n * dt);
        const double n1 = c * s1 - s * s2;
        const double n2 = s * s1 + c * s2;
        s1 = n1 + kr * err * dt;
        s2 = n2;
        return kp * err + s1;
    }
};

struct FirstOrderFilter {
    double y = 0.0;
    double step(double u, double alpha) {
        y += alpha * (u - y);
        return y;
    }
};

// Running single-bin DFT accumulators for the metrics window.
struct DftAccumulator {
    Phasor a{0.0, 0.0}, b{0.0, 0.0}, c{0.0, 0.0};
    long n = 0;

    void add(const std::array<double, 3>& abc, const Phasor& rot) {
        a += abc[0] * rot;
        b += abc[1] * rot;
        c += abc[2] * rot;
        ++n;
    }
    // Complex amplitude of each phase: X = (2/N)·Σ x[k]·e^{−jw t_k}.
    ThreePhaseSet phasors() const {
        const double g = (n > 0) ? 2.0 / static_cast<double>(n) : 0.0;
        return ThreePhaseSet{g * a, g * b, g * c};
    }
};

}  // namespace

SimResult run_scenario(const SimConfig& cfg) {
    const PlantParams& p = cfg.plant;
    const ControllerParams& c = cfg.ctrl;
    const DroopParams& droop = c.droop;

    if (cfg.duration_s <= 0.0) {
        throw std::invalid_argument("simulation duration must be > 0");
    }
    if (c.t_s <= 0.0 || cfg.plant_substeps < 1) {
        throw std::invalid_argument("invalid controller period or sub-steps");
    }
    if (!(cfg.metrics_start_s < cfg.metrics_end_s) ||
        cfg.metrics_end_s > cfg.duration_s) {
        throw std::invalid_argument("metrics window must be ordered and inside the run");
    }
    const bool has_fault = p.fault_kind != SimFaultKind::NONE;
    if (has_fault) {
        if (!(p.fault_apply_s < p.fault_clear_s)) {
            throw std::invalid_argument("fault apply time must precede clear time");
        }
        const double settle = 10.0 * 2.0 * pi / p.w_n;  // ten fundamental cycles
        if (cfg.metrics_start_s < p.fault_apply_s + settle ||
            cfg.metrics_end_s > p.fault_clear_s) {
            throw std::invalid_argument(
                "metrics window must sit inside the fault interval, at least "
                "ten cycles after application");
        }
    }

    // Start at the pre-fault operating point so the run spends its time on
    // the fault, not on synchronization from zero.
    const OperatingPoint pre =
        operating_point(steady_network(p, false), droop, Phasor(0.0, 0.0));
    if (!pre.exists) {
        throw std::invalid_argument(
            "no pre-fault operating point for these droop settings");
    }

    const Phasor a_rot = rotator_a();
    const Phasor a2_rot = a_rot * a_rot;
    auto instantaneous = [&](const Phasor& ph) {
        return std::array<double, 3>{std::real(ph), std::real(a2_rot * ph),
                                     std::real(a_rot * ph)};
    };

    PlantState state;
    const Phasor i_o_ph = pre.sol.i_pos;
    const Phasor v_c_ph = pre.sol.v_c_pos;
    const Phasor i_f_ph = i_o_ph + Phasor(0.0, p.w_n * p.c_f) * v_c_ph;
    state.i_o = instantaneous(i_o_ph);
    state.v_c = instantaneous(v_c_ph);
    state.i_f = instantaneous(i_f_ph);

    // Controller state, preloaded to the same operating point. theta starts
    // one sample behind so the first droop update emits the equilibrium
    // phase at t = 0.
    double theta = pre.theta - droop.w_n * c.t_s;
    FirstOrderFilter p_filt, q_filt;
    p_filt.y = pre.sol.p;
    q_filt.y = pre.sol.q;
    SequenceExtractor v_ext, i_ext;
    v_ext.preset(v_c_ph, Phasor(0.0, -1.0) * v_c_ph);
    i_ext.preset(i_o_ph, Phasor(0.0, -1.0) * i_o_ph);
    // Resonant states carry the steady control effort: the voltage loop
    // supplies the capacitor current, the current loop the filter-inductor
    // voltage drop. Beta channels lag alpha by 90 degrees.
    Resonant pr_v_a, pr_v_b, pr_i_a, pr_i_b;
    const Phasor j(0.0, 1.0);
    const Phasor i_cap = j * p.w_n * p.c_f * v_c_ph;
    const Phasor u_drop = j * p.w_n * p.l_f * i_f_ph;
    pr_v_a.s1 = i_cap.real();
    pr_v_a.s2 = i_cap.imag();
    pr_v_b.s1 = (-j * i_cap).real();
    pr_v_b.s2 = (-j * i_cap).imag();
    pr_i_a.s1 = u_drop.real();
    pr_i_a.s2 = u_drop.imag();
    pr_i_b.s1 = (-j * u_drop).real();
    pr_i_b.s2 = (-j * u_drop).imag();
    double vi_r = 0.0, vi_x = 0.0;  // smoothed VI state
    // Synchronous-frame states of the VI current conditioning, preset to the
    // operating point (positive sequence demodulated by theta; no negative
    // sequence before the fault).
    Phasor vi_pos_f = i_o_ph * std::polar(1.0, -pre.theta);
    Phasor vi_neg_f{0.0, 0.0};

    const double dt_sub = c.t_s / cfg.plant_substeps;
    const double filt_alpha = 1.0 - std::exp(-droop.w_f * c.t_s);
    const double vi_alpha =
        (c.vi.smoothing_tau > 0.0)
            ? 1.0 - std::exp(-c.t_s / c.vi.smoothing_tau)
            : 1.0;
    const double vi_seq_alpha = 1.0 - std::exp(-c.vi_filter_rad_s * c.t_s);
    const double act_decay = (c.vi.release_tau > 0.0)
                                 ? std::exp(-c.t_s / c.vi.release_tau)
                                 : 0.0;
    double i_act = 0.0;  // peak-held current magnitude for the gate
    bool engaged_prev = false;
    const long n_steps = std::lround(cfg.duration_s / c.t_s);

    SimResult out;
    out.series.time_s.reserve(n_steps);

    DftAccumulator dft_v_c, dft_i_o, dft_v_f;
    Phasor dft_ref{0.0, 0.0};
    long dft_ref_n = 0;
    double vi_r_sum = 0.0, vi_x_sum = 0.0;

    for (long k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * c.t_s;

        // --- measurements
        const std::array<double, 2> v_ab = clarke(state.v_c);
        const std::array<double, 2> io_ab = clarke(state.i_o);
        const std::array<double, 2> if_ab = clarke(state.i_f);

        const SequenceExtractor::Output v_seq =
            v_ext.step(v_ab[0], v_ab[1], c.sogi_k, c.sogi_k_dc, droop.w_n,
                       c.t_s);
        const SequenceExtractor::Output i_seq =
            i_ext.step(io_ab[0], io_ab[1], c.sogi_k, c.sogi_k_dc, droop.w_n,
                       c.t_s);

        const double p_inst = 1.5 * (v_ab[0] * io_ab[0] + v_ab[1] * io_ab[1]);
        const double q_inst = 1.5 * (v_ab[1] * io_ab[0] - v_ab[0] * io_ab[1]);
        const double p_f = p_filt.step(p_inst, filt_alpha);
        const double q_f = q_filt.step(q_inst, filt_alpha);

        // Rotate into the frame the droop is about to emit (theta is still
        // one sample behind at this point).
        const double theta_pred = theta + droop.w_n * c.t_s;
        const double v_cq = -std::sin(theta_pred) * v_seq.pos[0] +
                            std::cos(theta_pred) * v_seq.pos[1];

        // --- outer loop
        const DroopOutput dr = droop_update(p_f, q_f, v_cq, droop, theta, c.t_s);
        theta = dr.theta;

        // --- virtual impedance
        // Condition the sequence currents in their synchronous frames before
        // they drive the VI: transparent at the fundamental, attenuates the
        // extractor's low-frequency leakage (see ControllerParams).
        const Phasor rot = std::polar(1.0, theta);
        const Phasor u_pos(i_seq.pos[0], i_seq.pos[1]);
        const Phasor u_neg(i_seq.neg[0], i_seq.neg[1]);
        vi_pos_f += vi_seq_alpha * (u_pos * std::conj(rot) - vi_pos_f);
        vi_neg_f += vi_seq_alpha * (u_neg * rot - vi_neg_f);
        Phasor eff_pos = vi_pos_f * rot;
        Phasor eff_neg = vi_neg_f * std::conj(rot);

        // The gate and the adaptive law act on the filtered estimate (the
        // raw one carries enough sampling ripple to chatter a bare
        // threshold); the peak-hold bridges the transient dips the filter's
        // lag would otherwise turn into spurious releases.
        const double i_omag = compute_i_omag({eff_pos.real(), eff_pos.imag()},
                                             {eff_neg.real(), eff_neg.imag()});
        i_act = std::max(i_omag, i_act * act_decay);
        double r_t = 0.0, x_t = 0.0;
        if (c.vi.mode == ViControl::Mode::FIXED) {
            if (i_act >= c.vi.i_th) {
                r_t = c.vi.r_v;
                x_t = c.vi.x_v;
            }
        } else {
            const AdaptiveViParams law(c.vi.k_x, c.vi.n_xr, c.vi.i_th);
            const ViValue v = eval_adaptive_vi(i_omag, law);
            r_t = v.r_v;
            x_t = v.x_v;
        }
        // On the engage edge, snap the filter states to the present raw
        // estimates so the drop starts from the actual fault current instead
        // of ramping from the pre-fault value. One-shot event; the loop
        // dynamics stay those of the slow filter.
        const bool engaged = (r_t > 0.0) || (x_t > 0.0);
        if (engaged && !engaged_prev) {
            vi_pos_f = u_pos * std::conj(rot);
            vi_neg_f = u_neg * rot;
            eff_pos = u_pos;
            eff_neg = u_neg;
        }
        engaged_prev = engaged;
        vi_r += vi_alpha * (r_t - vi_r);
        vi_x += vi_alpha * (x_t - vi_x);

        const std::array<double, 2> i_pos_eff{eff_pos.real(), eff_pos.imag()};
        const std::array<double, 2> i_neg_eff{eff_neg.real(), eff_neg.imag()};
        const std::array<double, 2> ref_ab =
            vi_reference(dr.ref_ab, i_pos_eff, i_neg_eff, vi_r, vi_x);

        // --- inner loops (load-current and capacitor-voltage feedforwards)
        const double ev_a = ref_ab[0] - v_ab[0];
        const double ev_b = ref_ab[1] - v_ab[1];
        const double iref_a =
            pr_v_a.step(ev_a, c.inner.kp_v, c.inner.kr_v, droop.w_n, c.t_s) +
            io_ab[0];
        const double iref_b =
            pr_v_b.step(ev_b, c.inner.kp_v, c.inner.kr_v, droop.w_n, c.t_s) +
            io_ab[1];
        const double ei_a = iref_a - if_ab[0];
        const double ei_b = iref_b - if_ab[1];
        const double u_a =
            pr_i_a.step(ei_a, c.inner.kp_i, c.inner.kr_i, droop.w_n, c.t_s) +
            v_ab[0];
        const double u_b =
            pr_i_b.step(ei_b, c.inner.kp_i, c.inner.kr_i, droop.w_n, c.t_s) +
            v_ab[1];
        const std::array<double, 3> u_abc = inverse_clarke({u_a, u_b});

        // --- logging
        out.series.time_s.push_back(t);
        out.series.v_c.push_back(state.v_c);
        out.series.i_o.push_back(state.i_o);
        out.series.v_c_pos_mag.push_back(
            std::hypot(v_seq.pos[0], v_seq.pos[1]));
        out.series.v_c_neg_mag.push_back(
            std::hypot(v_seq.neg[0], v_seq.neg[1]));
        out.series.r_v.push_back(vi_r);
        out.series.x_v.push_back(vi_x);

        if (t >= cfg.metrics_start_s && t < cfg.metrics_end_s) {
            const Phasor rot = std::polar(1.0, -droop.w_n * t);
            dft_v_c.add(state.v_c, rot);
            dft_i_o.add(state.i_o, rot);
            dft_v_f.add(fault_bus_voltage(state, u_abc, p, t), rot);
            // The droop reference is already an analytic pair: E·e^{jθ}.
            dft_ref += Phasor(dr.ref_ab[0], dr.ref_ab[1]) * rot;
            ++dft_ref_n;
            vi_r_sum += vi_r;
            vi_x_sum += vi_x;
        }

        // --- plant advance with fault switching on sub-step boundaries
        for (int s = 0; s < cfg.plant_substeps; ++s) {
            const double t_sub = t + s * dt_sub;
            if (has_fault) {
                if (!state.faulted && t_sub >= p.fault_apply_s &&
                    t_sub < p.fault_clear_s) {
                    apply_fault(state, p);
                }
                if (state.faulted && t_sub >= p.fault_clear_s) {
                    clear_fault(state, p);
                }
            }
            step_plant(state, u_abc, p, t_sub, dt_sub);
        }
    }

    // --- window measurements
    const ThreePhaseSet vc_ph = dft_v_c.phasors();
    const ThreePhaseSet io_ph3 = dft_i_o.phasors();
    const ThreePhaseSet vf_ph = dft_v_f.phasors();
    const SequenceSet vc_seq = to_sequence(vc_ph);
    const SequenceSet io_seq = to_sequence(io_ph3);
    const SequenceSet vf_seq = to_sequence(vf_ph);

    out.settled.v_c_pos = vc_seq.pos;
    out.settled.v_c_neg = vc_seq.neg;
    out.settled.i_o_pos = io_seq.pos;
    out.settled.i_o_neg = io_seq.neg;
    out.settled.v_f_pos = vf_seq.pos;
    out.settled.v_f_neg = vf_seq.neg;
    const double inv_n =
        (dft_ref_n > 0) ? 1.0 / static_cast<double>(dft_ref_n) : 0.0;
    out.settled.v_cref_pos = dft_ref * inv_n;
    out.settled.r_v = vi_r_sum * inv_n;
    out.settled.x_v = vi_x_sum * inv_n;

    out.metrics.v_c_pos_mag = std::abs(vc_seq.pos);
    out.metrics.v_c_neg_mag = std::abs(vc_seq.neg);
    out.metrics.i_max = std::max(
        {std::abs(io_ph3.a), std::abs(io_ph3.b), std::abs(io_ph3.c)});
    out.metrics.window_start_s = cfg.metrics_start_s;
    out.metrics.window_end_s = cfg.metrics_end_s;
    return out;
}

}  // namespace gfmvs
