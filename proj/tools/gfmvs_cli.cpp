// Command-line front end: phasor analysis, VI angle sweeps, and full
// time-domain simulations from one JSON scenario config.
//
// Exit codes: 0 success, 2 invalid config/usage, 3 infeasible scenario
// (current limit unreachable even with zero VI), 4 numerical divergence.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gfmvs/config.hpp"
#include "gfmvs/csv_io.hpp"
#include "gfmvs/sequence_network.hpp"
#include "gfmvs/steady_state.hpp"
#include "gfmvs/timedomain.hpp"
#include "gfmvs/vi_design.hpp"

namespace {

namespace fs = std::filesystem;
using namespace gfmvs;

std::string resolve_out_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("GFMVS_OUT_DIR")) {
        if (*env != '\0') return env;
    }
    return ".";
}

std::string out_path(const std::string& dir, const char* name) {
    fs::create_directories(dir);
    return (fs::path(dir) / name).string();
}

void print_row(const LabeledPhasor& r) {
    std::printf("  %-14s %12.6g V|A|ohm  at %9.4f deg   (%.6g, %.6g)\n",
                r.name.c_str(), std::abs(r.value),
                std::abs(r.value) > 0.0 ? arg_deg(r.value) : 0.0,
                r.value.real(), r.value.imag());
}

int cmd_analyze(const ScenarioConfig& cfg, const std::string& dir) {
    const Phasor z_v = resolve_vi_phasor(cfg);
    const SweepScenario sc = cfg.sweep_scenario();
    const FaultNetworkModel m{sc.v_cref_pos, sc.v_f_pos, sc.v_f_neg, sc.z_l,
                              z_v};

    const SequenceCurrents i = sequence_currents(m);
    const ThreePhaseSet i_abc = phase_currents(m);
    const CapacitorVoltages vc = capacitor_voltages(m);
    const SupportDeviations dev = support_deviations(m);
    const double i_max = max_phase_current(m);

    std::vector<LabeledPhasor> rows{
        {"v_cref_pos", m.v_cref_pos}, {"v_f_pos", m.v_f_pos},
        {"v_f_neg", m.v_f_neg},       {"z_l", m.z_l},
        {"z_v", m.z_v},               {"i_pos", i.pos},
        {"i_neg", i.neg},             {"i_a", i_abc.a},
        {"i_b", i_abc.b},             {"i_c", i_abc.c},
        {"v_c_pos", vc.pos},          {"v_c_neg", vc.neg},
        {"dev_pos", Phasor(dev.dev_pos, 0.0)},
        {"dev_neg", Phasor(dev.dev_neg, 0.0)},
        {"i_max", Phasor(i_max, 0.0)},
    };
    if (dev.theta_pos_deg) {
        rows.push_back({"theta_pos_deg", Phasor(*dev.theta_pos_deg, 0.0)});
    }
    if (dev.theta_neg_deg) {
        rows.push_back({"theta_neg_deg", Phasor(*dev.theta_neg_deg, 0.0)});
    }

    std::printf("fault analysis (quantity, magnitude at angle, re/im):\n");
    for (const auto& r : rows) print_row(r);

    const std::string csv = out_path(dir, "analysis.csv");
    write_analysis_csv(csv, rows);
    std::printf("wrote %s\n", csv.c_str());
    return 0;
}

int cmd_sweep(const ScenarioConfig& cfg, const std::string& dir,
              const std::vector<double>& angles_flag, bool dense) {
    const SweepScenario sc = cfg.sweep_scenario();
    std::vector<double> angles;
    if (dense) {
        angles = dense_sweep_angles();
    } else if (!angles_flag.empty()) {
        angles = angles_flag;
    } else if (cfg.sweep_angles) {
        angles = *cfg.sweep_angles;
    } else {
        angles = default_sweep_angles(sc.z_l);
    }

    const double i_m = cfg.vi.current_target_pu * cfg.system.i_rated_peak;
    const std::vector<SweepPoint> points = angle_sweep(sc, i_m, angles);

    std::size_t best = 0;
    for (std::size_t k = 1; k < points.size(); ++k) {
        if (points[k].dev_pos < points[best].dev_pos) best = k;
    }

    const std::string csv = out_path(dir, "sweep.csv");
    write_sweep_csv(csv, points, points[best].angle_deg);
    std::printf(
        "swept %zu angles at i_max = %.6g A; best angle %.4g deg "
        "(dev_pos = %.6g V, v_c_pos = %.6g V)\n",
        points.size(), i_m, points[best].angle_deg, points[best].dev_pos,
        points[best].v_c_pos_mag);
    std::printf("wrote %s\n", csv.c_str());
    return 0;
}

int cmd_simulate(const ScenarioConfig& cfg, const std::string& dir,
                 std::optional<unsigned> seed) {
    std::string note;
    const ViControl vi = resolve_vi_simulation(cfg, &note);
    if (!note.empty()) std::fprintf(stderr, "warning: %s\n", note.c_str());

    SimConfig sim = cfg.make_sim(vi);
    if (seed) sim.seed = *seed;
    const SimResult res = run_scenario(sim);

    const std::string csv = out_path(dir, "timeseries.csv");
    write_timeseries_csv(csv, res.series);

    nlohmann::json metrics{
        {"v_c_pos_mag_V", res.metrics.v_c_pos_mag},
        {"v_c_neg_mag_V", res.metrics.v_c_neg_mag},
        {"i_max_A", res.metrics.i_max},
        {"window_start_s", res.metrics.window_start_s},
        {"window_end_s", res.metrics.window_end_s},
        {"settled_r_v_ohm", res.settled.r_v},
        {"settled_x_v_ohm", res.settled.x_v},
        {"seed", sim.seed},
    };
    const std::string mjson = out_path(dir, "metrics.json");
    std::ofstream mj(mjson);
    if (!mj) throw std::runtime_error(mjson + ": cannot open for writing");
    mj << metrics.dump(2) << '\n';

    std::printf(
        "simulated %.4g s: v_c_pos = %.6g V, v_c_neg = %.6g V, i_max = %.6g A "
        "(window %.4g..%.4g s)\n",
        sim.duration_s, res.metrics.v_c_pos_mag, res.metrics.v_c_neg_mag,
        res.metrics.i_max, res.metrics.window_start_s,
        res.metrics.window_end_s);
    std::printf("wrote %s and %s\n", csv.c_str(), mjson.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Grid-forming inverter voltage-support analysis: sequence-domain "
        "fault models, virtual-impedance sizing/sweeps, time-domain "
        "simulation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_flag;
    std::vector<double> angles;
    bool dense = false;
    std::optional<unsigned> seed;

    CLI::App* analyze =
        app.add_subcommand("analyze", "one operating point of the fault model");
    CLI::App* sweep =
        app.add_subcommand("sweep", "VI angle sweep at the current limit");
    CLI::App* simulate =
        app.add_subcommand("simulate", "full time-domain scenario");

    for (CLI::App* sub : {analyze, sweep, simulate}) {
        sub->add_option("--config", config_path, "scenario config (JSON)")
            ->required();
        sub->add_option("--out", out_flag,
                        "output directory (default: $GFMVS_OUT_DIR or .)");
    }
    sweep->add_option("--angles", angles, "comma-separated VI angles, deg")
        ->delimiter(',');
    sweep->add_flag("--dense", dense, "0.1 deg verification grid");
    simulate->add_option("--seed", seed, "override the config seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const ScenarioConfig cfg = load_scenario(config_path);
        const std::string dir = resolve_out_dir(out_flag);
        if (analyze->parsed()) return cmd_analyze(cfg, dir);
        if (sweep->parsed()) return cmd_sweep(cfg, dir, angles, dense);
        return cmd_simulate(cfg, dir, seed);
    } catch (const InfeasibleScenario& e) {
        std::fprintf(stderr, "infeasible scenario: %s\n", e.what());
        return 3;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "simulation diverged: %s\n", e.what());
        return 4;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
