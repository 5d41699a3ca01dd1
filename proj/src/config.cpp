#include "gfmvs/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "gfmvs/steady_state.hpp"

namespace gfmvs {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg);
}

// One nested config object with a known key set; every accessor reports
// errors by full field path.
class Section {
  public:
    Section(const json& j, std::string path,
            std::initializer_list<const char*> keys)
        : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "must be an object");
        for (const auto& item : j_.items()) {
            bool known = false;
            for (const char* k : keys) {
                if (item.key() == k) {
                    known = true;
                    break;
                }
            }
            if (!known) fail(path_ + "." + item.key(), "unknown key");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    double num(const char* key) const {
        if (!has(key)) fail(path_ + "." + key, "missing required number");
        return as_number(key);
    }

    double num_or(const char* key, double def) const {
        return has(key) ? as_number(key) : def;
    }

    double positive(const char* key) const {
        const double v = num(key);
        if (!(v > 0.0)) fail(path_ + "." + key, "must be > 0");
        return v;
    }

    double positive_or(const char* key, double def) const {
        const double v = num_or(key, def);
        if (!(v > 0.0)) fail(path_ + "." + key, "must be > 0");
        return v;
    }

    double nonneg(const char* key) const {
        const double v = num(key);
        if (!(v >= 0.0)) fail(path_ + "." + key, "must be >= 0");
        return v;
    }

    double nonneg_or(const char* key, double def) const {
        const double v = num_or(key, def);
        if (!(v >= 0.0)) fail(path_ + "." + key, "must be >= 0");
        return v;
    }

    std::string str(const char* key) const {
        if (!has(key) || !j_[key].is_string()) {
            fail(path_ + "." + key, "missing required string");
        }
        return j_[key].get<std::string>();
    }

    const json& raw(const char* key) const { return j_[key]; }
    const std::string& path() const { return path_; }

  private:
    double as_number(const char* key) const {
        const json& v = j_[key];
        if (!v.is_number()) fail(path_ + "." + key, "must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(path_ + "." + key, "must be finite");
        return d;
    }

    const json& j_;
    std::string path_;
};

SystemBase parse_system(const json& j) {
    const Section s(j, "system",
                    {"rated_power_VA", "rated_voltage_ll_Vrms",
                     "frequency_rad_s", "current_limit_pu"});
    SystemBase out;
    out.s_rated_va = s.positive("rated_power_VA");
    out.v_ll_rms = s.positive("rated_voltage_ll_Vrms");
    out.w_n = s.positive("frequency_rad_s");
    out.i_limit_pu = s.positive("current_limit_pu");
    out.v_source_peak = out.v_ll_rms * std::sqrt(2.0 / 3.0);
    out.z_base = out.v_ll_rms * out.v_ll_rms / out.s_rated_va;
    out.i_rated_peak =
        std::sqrt(2.0) * out.s_rated_va / (std::sqrt(3.0) * out.v_ll_rms);
    out.i_limit_peak = out.i_limit_pu * out.i_rated_peak;
    return out;
}

NetworkSection parse_network(const json& j, const SystemBase& sys) {
    const Section s(
        j, "network",
        {"filter_inductance_H", "filter_capacitance_F",
         "transformer_reactance_pu", "parasitic_resistance_ohm",
         "grid1_resistance_ohm", "grid1_inductance_H", "grid2_resistance_ohm",
         "grid2_inductance_H", "negative_seq_resistance_ohm",
         "negative_seq_reactance_ohm", "zero_seq_resistance_ohm",
         "zero_seq_reactance_ohm", "source_angle_deg"});
    NetworkSection out;
    out.l_f = s.positive("filter_inductance_H");
    out.c_f = s.positive("filter_capacitance_F");
    out.x_t_pu = s.nonneg("transformer_reactance_pu");
    out.r_par = s.nonneg_or("parasitic_resistance_ohm", 0.0);
    const double r1 = s.nonneg_or("grid1_resistance_ohm", 0.0);
    const double l1 = s.nonneg_or("grid1_inductance_H", 0.0);
    const double r2 = s.nonneg("grid2_resistance_ohm");
    const double l2 = s.nonneg("grid2_inductance_H");
    out.z_g1 = Phasor(r1, sys.w_n * l1);
    out.z_g2 = Phasor(r2, sys.w_n * l2);
    if (std::abs(out.z_g2) == 0.0) {
        fail("network.grid2_resistance_ohm", "grid segment 2 must be nonzero");
    }
    if (s.has("negative_seq_resistance_ohm") ||
        s.has("negative_seq_reactance_ohm")) {
        out.z_g2_neg = Phasor(s.nonneg("negative_seq_resistance_ohm"),
                              s.num("negative_seq_reactance_ohm"));
    }
    if (s.has("zero_seq_resistance_ohm") || s.has("zero_seq_reactance_ohm")) {
        out.z_g2_zero = Phasor(s.nonneg("zero_seq_resistance_ohm"),
                               s.num("zero_seq_reactance_ohm"));
    }
    out.source_angle_deg = s.num_or("source_angle_deg", 0.0);
    out.l_t = out.x_t_pu * sys.z_base / sys.w_n;
    return out;
}

ControllerParams parse_controller(const json* j, const SystemBase& sys,
                                  const NetworkSection& net) {
    ControllerParams c;
    const json empty = json::object();
    const Section s(
        j ? *j : empty, "controller",
        {"sample_period_s", "nominal_voltage_V", "droop_m_p_rad_per_Ws",
         "droop_n_q_V_per_var", "power_filter_rad_s", "k_oq_V_per_V",
         "p_set_W", "q_set_var", "sogi_gain", "sogi_dc_gain",
         "vi_current_filter_rad_s", "voltage_kp_A_per_V", "voltage_kr_A_per_Vs",
         "current_kp_V_per_A", "current_kr_V_per_As"});

    c.t_s = s.positive_or("sample_period_s", 1e-4);
    c.sogi_k = s.positive_or("sogi_gain", std::sqrt(2.0));
    c.sogi_k_dc = s.positive_or("sogi_dc_gain", 0.25);
    c.vi_filter_rad_s = s.positive_or("vi_current_filter_rad_s", 30.0);

    DroopParams& d = c.droop;
    d.w_n = sys.w_n;
    d.v_n = s.positive_or("nominal_voltage_V", sys.v_source_peak);
    d.m_p = s.nonneg_or("droop_m_p_rad_per_Ws", 0.01 * sys.w_n / sys.s_rated_va);
    d.n_q = s.nonneg_or("droop_n_q_V_per_var", 0.05 * d.v_n / sys.s_rated_va);
    d.w_f = s.positive_or("power_filter_rad_s", 31.4);
    d.k_oq = s.nonneg_or("k_oq_V_per_V", 0.2);
    d.p_set = s.num_or("p_set_W", 0.0);
    d.q_set = s.num_or("q_set_var", 0.0);

    // Default inner bandwidths: one tenth (voltage) and one third (current)
    // of the sampling rate, taken as rad/s — the sampled current loop needs
    // kp·t_s/l_f < 2, which rules out the 2π-scaled reading. Resonant gains
    // default to a few hundred times proportional.
    InnerLoopParams& il = c.inner;
    const double w_v = 1.0 / (10.0 * c.t_s);
    const double w_i = 1.0 / (3.0 * c.t_s);
    il.kp_v = s.nonneg_or("voltage_kp_A_per_V", w_v * net.c_f);
    il.kr_v = s.nonneg_or("voltage_kr_A_per_Vs", 300.0 * il.kp_v);
    il.kp_i = s.nonneg_or("current_kp_V_per_A", w_i * net.l_f);
    il.kr_i = s.nonneg_or("current_kr_V_per_As", 300.0 * il.kp_i);
    return c;
}

ViSection parse_vi(const json& j, const SystemBase& sys) {
    const Section s(j, "vi",
                    {"mode", "r_ohm", "x_ohm", "angle_deg",
                     "current_target_pu", "k_x_ohm_per_A", "xr_ratio",
                     "threshold_pu", "smoothing_tau_s", "release_tau_s"});
    ViSection out;
    const std::string mode = s.str("mode");
    if (mode == "fixed") {
        out.mode = ViMode::FIXED;
        out.r_ohm = s.nonneg("r_ohm");
        out.x_ohm = s.nonneg("x_ohm");
    } else if (mode == "sized") {
        out.mode = ViMode::SIZED;
        out.angle_deg = s.num("angle_deg");
        if (out.angle_deg < 0.0 || out.angle_deg > 90.0) {
            fail("vi.angle_deg", "must lie in [0, 90]");
        }
    } else if (mode == "adaptive") {
        out.mode = ViMode::ADAPTIVE;
        if (!s.has("k_x_ohm_per_A")) {
            fail("vi.k_x_ohm_per_A", "missing (number or \"auto\")");
        }
        const json& kx = s.raw("k_x_ohm_per_A");
        if (kx.is_string() && kx.get<std::string>() == "auto") {
            out.k_x_auto = true;
        } else if (kx.is_number() && kx.get<double>() >= 0.0) {
            out.k_x = kx.get<double>();
        } else {
            fail("vi.k_x_ohm_per_A", "must be a number >= 0 or \"auto\"");
        }
    } else {
        fail("vi.mode", "must be one of \"fixed\", \"sized\", \"adaptive\"");
    }
    out.current_target_pu =
        s.positive_or("current_target_pu", sys.i_limit_pu);
    out.xr_ratio = s.positive_or("xr_ratio", 3.73);
    out.threshold_pu = s.nonneg_or("threshold_pu", 1.1);
    out.smoothing_tau_s = s.nonneg_or("smoothing_tau_s", 5e-3);
    out.release_tau_s = s.nonneg_or("release_tau_s", 0.2);
    return out;
}

FaultSection parse_fault(const json& j) {
    const Section s(j, "fault",
                    {"kind", "resistance_ohm", "reactance_ohm",
                     "apply_time_s", "clear_time_s"});
    FaultSection out;
    const std::string kind = s.str("kind");
    if (kind == "NONE") {
        out.spec = FaultSpec::open_circuit();
    } else {
        if (kind == "LL") {
            out.spec.kind = FaultKind::LL;
        } else if (kind == "THREE_PHASE") {
            out.spec.kind = FaultKind::THREE_PHASE;
        } else if (kind == "SLG") {
            out.spec.kind = FaultKind::SLG;
        } else if (kind == "LLG") {
            out.spec.kind = FaultKind::LLG;
        } else {
            fail("fault.kind",
                 "must be one of NONE, LL, THREE_PHASE, SLG, LLG");
        }
        out.spec.z_f = Phasor(s.nonneg("resistance_ohm"),
                              s.nonneg("reactance_ohm"));
    }
    if (s.has("apply_time_s") || s.has("clear_time_s")) {
        out.has_timing = true;
        out.apply_s = s.nonneg("apply_time_s");
        out.clear_s = s.nonneg("clear_time_s");
        if (!(out.apply_s < out.clear_s)) {
            fail("fault.clear_time_s", "must be after apply_time_s");
        }
    }
    return out;
}

FaultBusSection parse_fault_bus(const json& j) {
    const Section s(j, "fault_bus",
                    {"v_f_pos_V", "v_f_pos_deg", "v_f_neg_V", "v_f_neg_deg"});
    FaultBusSection out;
    out.v_f_pos =
        from_polar_deg(s.nonneg("v_f_pos_V"), s.num_or("v_f_pos_deg", 0.0));
    out.v_f_neg =
        from_polar_deg(s.nonneg("v_f_neg_V"), s.num_or("v_f_neg_deg", 0.0));
    return out;
}

SimulationSection parse_simulation(const json& j) {
    const Section s(j, "simulation",
                    {"duration_s", "metrics_start_s", "metrics_end_s",
                     "substeps", "seed"});
    SimulationSection out;
    out.duration_s = s.positive("duration_s");
    out.metrics_start_s = s.nonneg("metrics_start_s");
    out.metrics_end_s = s.positive("metrics_end_s");
    if (!(out.metrics_start_s < out.metrics_end_s)) {
        fail("simulation.metrics_end_s", "must be after metrics_start_s");
    }
    if (out.metrics_end_s > out.duration_s) {
        fail("simulation.metrics_end_s", "must be within duration_s");
    }
    const double substeps = s.num_or("substeps", 10.0);
    if (substeps < 1.0 || substeps != std::floor(substeps)) {
        fail("simulation.substeps", "must be a positive integer");
    }
    out.substeps = static_cast<int>(substeps);
    const double seed = s.num_or("seed", 0.0);
    if (seed < 0.0 || seed != std::floor(seed)) {
        fail("simulation.seed", "must be a nonnegative integer");
    }
    out.seed = static_cast<unsigned>(seed);
    return out;
}

std::vector<double> parse_sweep(const json& j) {
    const Section s(j, "sweep", {"angles_deg"});
    if (!s.has("angles_deg") || !s.raw("angles_deg").is_array() ||
        s.raw("angles_deg").empty()) {
        fail("sweep.angles_deg", "must be a non-empty array of numbers");
    }
    std::vector<double> out;
    for (const auto& v : s.raw("angles_deg")) {
        if (!v.is_number()) fail("sweep.angles_deg", "must contain numbers");
        const double a = v.get<double>();
        if (a < 0.0 || a > 90.0) {
            fail("sweep.angles_deg", "angles must lie in [0, 90]");
        }
        out.push_back(a);
    }
    return out;
}

}  // namespace

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }

    const Section top(j, "config",
                      {"system", "reference", "network", "fault", "fault_bus",
                       "vi", "controller", "simulation", "sweep"});

    ScenarioConfig cfg;
    if (!top.has("system")) fail("system", "missing required section");
    cfg.system = parse_system(top.raw("system"));
    if (!top.has("network")) fail("network", "missing required section");
    cfg.network = parse_network(top.raw("network"), cfg.system);
    cfg.ctrl = parse_controller(
        top.has("controller") ? &top.raw("controller") : nullptr, cfg.system,
        cfg.network);

    if (top.has("reference")) {
        const Section r(top.raw("reference"), "reference",
                        {"voltage_V", "angle_deg"});
        cfg.v_cref = from_polar_deg(r.positive_or("voltage_V",
                                                  cfg.ctrl.droop.v_n),
                                    r.num_or("angle_deg", 0.0));
    } else {
        cfg.v_cref = Phasor(cfg.ctrl.droop.v_n, 0.0);
    }

    if (!top.has("vi")) fail("vi", "missing required section");
    cfg.vi = parse_vi(top.raw("vi"), cfg.system);

    if (top.has("fault")) cfg.fault = parse_fault(top.raw("fault"));
    if (top.has("fault_bus")) cfg.fault_bus = parse_fault_bus(top.raw("fault_bus"));
    if (cfg.fault.has_value() == cfg.fault_bus.has_value()) {
        throw ConfigError(
            "config: exactly one of the 'fault' and 'fault_bus' sections "
            "must be present");
    }

    if (top.has("simulation")) {
        cfg.simulation = parse_simulation(top.raw("simulation"));
    }
    if (top.has("sweep")) cfg.sweep_angles = parse_sweep(top.raw("sweep"));
    return cfg;
}

Phasor ScenarioConfig::z_l() const {
    return Phasor(network.r_par + network.z_g1.real(),
                  system.w_n * network.l_t + network.z_g1.imag());
}

GridThevenin ScenarioConfig::grid_thevenin() const {
    GridThevenin g;
    g.e = from_polar_deg(system.v_source_peak, network.source_angle_deg);
    g.z1 = network.z_g2;
    g.z2 = network.z_g2_neg;
    g.z0 = network.z_g2_zero;
    return g;
}

std::pair<Phasor, Phasor> ScenarioConfig::fault_bus_sources() const {
    if (fault_bus) return {fault_bus->v_f_pos, fault_bus->v_f_neg};
    return fault_bus_voltages(grid_thevenin(), fault->spec);
}

SweepScenario ScenarioConfig::sweep_scenario() const {
    const auto [vf_pos, vf_neg] = fault_bus_sources();
    return SweepScenario{v_cref, vf_pos, vf_neg, z_l()};
}

PlantParams ScenarioConfig::make_plant() const {
    if (!fault) {
        throw ConfigError(
            "fault: simulation requires a fault section (directly "
            "prescribed fault_bus phasors cannot be simulated)");
    }
    PlantParams p;
    p.l_f = network.l_f;
    p.c_f = network.c_f;
    p.l_t = network.l_t;
    p.r_par = network.r_par;
    p.z_g1 = network.z_g1;
    p.z_g2 = network.z_g2;
    p.v_g_phase_peak = system.v_source_peak;
    p.source_angle_deg = network.source_angle_deg;
    p.w_n = system.w_n;

    if (fault->spec.is_open()) {
        p.fault_kind = SimFaultKind::NONE;
        return p;
    }
    switch (fault->spec.kind) {
        case FaultKind::LL:
            p.fault_kind = SimFaultKind::LL;
            break;
        case FaultKind::THREE_PHASE:
            p.fault_kind = SimFaultKind::THREE_PHASE;
            break;
        default:
            throw ConfigError(
                "fault.kind: only NONE, LL and THREE_PHASE can be simulated "
                "(no zero-sequence path is modeled)");
    }
    if (!fault->has_timing) {
        throw ConfigError(
            "fault.apply_time_s: required for time-domain simulation");
    }
    p.z_f = fault->spec.z_f;
    p.fault_apply_s = fault->apply_s;
    p.fault_clear_s = fault->clear_s;
    return p;
}

SimConfig ScenarioConfig::make_sim(const ViControl& vi_resolved) const {
    if (!simulation) {
        throw ConfigError("simulation: section required for simulate");
    }
    SimConfig sc;
    sc.plant = make_plant();
    sc.ctrl = ctrl;
    sc.ctrl.vi = vi_resolved;
    sc.duration_s = simulation->duration_s;
    sc.metrics_start_s = simulation->metrics_start_s;
    sc.metrics_end_s = simulation->metrics_end_s;
    sc.plant_substeps = simulation->substeps;
    sc.seed = simulation->seed;
    return sc;
}

Phasor resolve_vi_phasor(const ScenarioConfig& cfg) {
    if (cfg.vi.mode == ViMode::FIXED) {
        return Phasor(cfg.vi.r_ohm, cfg.vi.x_ohm);
    }

    const SweepScenario sc = cfg.sweep_scenario();
    FaultNetworkModel m{sc.v_cref_pos, sc.v_f_pos, sc.v_f_neg, sc.z_l,
                        Phasor(0.0, 0.0)};
    const ThreePhaseSet v_m = driving_voltages(m);
    const double v_m_max =
        std::max({std::abs(v_m.a), std::abs(v_m.b), std::abs(v_m.c)});
    const double target = cfg.vi.current_target_pu * cfg.system.i_rated_peak;

    if (cfg.vi.mode == ViMode::SIZED) {
        const ViSizing s =
            size_vi(cfg.vi.angle_deg, sc.z_l,
                    required_total_impedance(v_m_max, target));
        return from_polar_deg(s.magnitude, s.angle_deg);
    }

    // ADAPTIVE: fixed point of x = k_x·(i_omag(x) − i_th)+ against this model.
    const double i_th = cfg.vi.threshold_pu * cfg.system.i_rated_peak;
    double k_x = cfg.vi.k_x;
    if (cfg.vi.k_x_auto) {
        if (target <= i_th) {
            throw ConfigError(
                "vi.current_target_pu: auto gain needs a target above "
                "threshold_pu");
        }
        const double angle_deg = rad_to_deg(std::atan(cfg.vi.xr_ratio));
        const ViSizing s = size_vi(angle_deg, sc.z_l,
                                   required_total_impedance(v_m_max, target));
        k_x = s.magnitude * std::sin(deg_to_rad(angle_deg)) / (target - i_th);
    }
    auto i_at = [&](double x_v) {
        m.z_v = Phasor(x_v / cfg.vi.xr_ratio, x_v);
        return max_phase_current(m);
    };
    if (i_at(0.0) <= i_th || k_x == 0.0) return Phasor(0.0, 0.0);
    double lo = 0.0, hi = 400.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double residual = mid - k_x * std::max(i_at(mid) - i_th, 0.0);
        if (residual < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double x_v = 0.5 * (lo + hi);
    return Phasor(x_v / cfg.vi.xr_ratio, x_v);
}

ViControl resolve_vi_simulation(const ScenarioConfig& cfg, std::string* note) {
    ViControl vc;
    vc.i_th = cfg.vi.threshold_pu * cfg.system.i_rated_peak;
    vc.smoothing_tau = cfg.vi.smoothing_tau_s;
    vc.release_tau = cfg.vi.release_tau_s;
    vc.n_xr = cfg.vi.xr_ratio;

    const double target = cfg.vi.current_target_pu * cfg.system.i_rated_peak;
    auto tune_note = [&](const ViTuneResult& t, double angle_deg) {
        if (!t.reached && note) {
            *note = "VI tuning at " + std::to_string(angle_deg) +
                    " deg: settled worst-phase current " +
                    std::to_string(t.achieved_i_max) + " A, target " +
                    std::to_string(target) + " A is not attainable";
        }
    };

    switch (cfg.vi.mode) {
        case ViMode::FIXED:
            vc.mode = ViControl::Mode::FIXED;
            vc.r_v = cfg.vi.r_ohm;
            vc.x_v = cfg.vi.x_ohm;
            return vc;
        case ViMode::SIZED: {
            vc.mode = ViControl::Mode::FIXED;
            const SteadyNetwork n = steady_network(cfg.make_plant(), true);
            const ViTuneResult t = tune_vi_magnitude(n, cfg.ctrl.droop,
                                                     cfg.vi.angle_deg, target);
            tune_note(t, cfg.vi.angle_deg);
            vc.r_v = t.magnitude * std::cos(deg_to_rad(cfg.vi.angle_deg));
            vc.x_v = t.magnitude * std::sin(deg_to_rad(cfg.vi.angle_deg));
            return vc;
        }
        case ViMode::ADAPTIVE:
            vc.mode = ViControl::Mode::ADAPTIVE;
            if (cfg.vi.k_x_auto) {
                if (target <= vc.i_th) {
                    throw ConfigError(
                        "vi.current_target_pu: auto gain needs a target above "
                        "threshold_pu");
                }
                const SteadyNetwork n = steady_network(cfg.make_plant(), true);
                const AdaptiveGainResult g = tune_adaptive_gain(
                    n, cfg.ctrl.droop, cfg.vi.xr_ratio, vc.i_th, target);
                tune_note(g.tune, rad_to_deg(std::atan(cfg.vi.xr_ratio)));
                vc.k_x = g.k_x;
            } else {
                vc.k_x = cfg.vi.k_x;
            }
            return vc;
    }
    throw ConfigError("vi.mode: unknown mode");
}

}  // namespace gfmvs
