#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gfmvs/phasor.hpp"
#include "gfmvs/sequence_network.hpp"
#include "gfmvs/vi_design.hpp"

using namespace gfmvs;

namespace {

// Reference desk-scale scenario: 104 V line-to-line system, LL fault through
// 6.8 ohm behind 1 ohm + j1.57 ohm, composed line impedance at 75 degrees.
const Phasor kZl(0.414703893328879, 1.547696);
const double kIM = 5.88819649707495;  // 1.5 pu of the 500 VA / 104 V base

SweepScenario reference_scenario() {
    GridThevenin g{Phasor(84.9156444164835, 0.0), Phasor(1.0, 1.57),
                   std::nullopt, std::nullopt};
    const auto [vf_pos, vf_neg] =
        fault_bus_voltages(g, FaultSpec{FaultKind::LL, Phasor(6.8, 0.0)});
    return SweepScenario{Phasor(84.85, 0.0), vf_pos, vf_neg, kZl};
}

// A sag whose positive-sequence bus voltage stays aligned with the
// reference; here the support maximum sits exactly at the matched angle.
SweepScenario collinear_scenario() {
    return SweepScenario{Phasor(84.85, 0.0), Phasor(40.0, 0.0),
                         from_polar_deg(20.0, -30.0), kZl};
}

const SweepPoint& at_angle(const std::vector<SweepPoint>& pts, double angle) {
    for (const auto& p : pts) {
        if (std::abs(p.angle_deg - angle) < 1e-9) return p;
    }
    REQUIRE(false);
    return pts.front();
}

}  // namespace

TEST_CASE("adaptive VI law: threshold branches") {
    const AdaptiveViParams p(2.0, 4.0, 4.0);
    CHECK(eval_adaptive_vi(2.0, p).x_v == 0.0);
    CHECK(eval_adaptive_vi(2.0, p).r_v == 0.0);
    CHECK(eval_adaptive_vi(4.0, p).x_v == 0.0);  // continuous at the threshold
    const ViValue v = eval_adaptive_vi(5.0, p);
    CHECK(v.x_v == doctest::Approx(2.0));
    CHECK(v.r_v == doctest::Approx(0.5));
}

TEST_CASE("adaptive VI law: parameter validation") {
    CHECK_THROWS_AS(AdaptiveViParams(-1.0, 4.0, 4.0), std::invalid_argument);
    CHECK_THROWS_AS(AdaptiveViParams(2.0, 0.0, 4.0), std::invalid_argument);
    CHECK_THROWS_AS(AdaptiveViParams(2.0, 4.0, -1.0), std::invalid_argument);
    const AdaptiveViParams p(2.0, 4.0, 4.0);
    CHECK_THROWS_AS(eval_adaptive_vi(-0.1, p), std::invalid_argument);
}

TEST_CASE("required_total_impedance") {
    CHECK(required_total_impedance(100.0, 10.0) == doctest::Approx(10.0));
    CHECK(required_total_impedance(0.0, 5.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(required_total_impedance(10.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(required_total_impedance(-1.0, 1.0), std::invalid_argument);
}

TEST_CASE("required_total_impedance: reference scenario ratio") {
    const SweepScenario sc = reference_scenario();
    FaultNetworkModel m{sc.v_cref_pos, sc.v_f_pos, sc.v_f_neg, sc.z_l,
                        Phasor(0.0, 0.0)};
    const ThreePhaseSet vm = driving_voltages(m);
    const double v_m_max =
        std::max({std::abs(vm.a), std::abs(vm.b), std::abs(vm.c)});
    CHECK(v_m_max == doctest::Approx(29.2766774879011).epsilon(1e-12));
    CHECK(required_total_impedance(v_m_max, kIM) ==
          doctest::Approx(4.97209587051736).epsilon(1e-12));
}

TEST_CASE("size_vi: boundary, quadratic root, collinear case") {
    const Phasor z_l(0.1, 0.5);
    CHECK(size_vi(30.0, z_l, std::abs(z_l)).magnitude == doctest::Approx(0.0));

    const ViSizing s = size_vi(90.0, z_l, 10.0);
    CHECK(s.magnitude == doctest::Approx(9.49949998749937).epsilon(1e-12));
    CHECK(std::abs(Phasor(0.0, s.magnitude) + z_l) ==
          doctest::Approx(10.0).epsilon(1e-12));

    const double collinear = arg_deg(z_l);
    const ViSizing c = size_vi(collinear, z_l, 3.0);
    CHECK(c.magnitude == doctest::Approx(3.0 - std::abs(z_l)).epsilon(1e-12));
}

TEST_CASE("size_vi: validation and infeasibility") {
    const Phasor z_l(0.1, 0.5);
    CHECK_THROWS_AS(size_vi(-1.0, z_l, 10.0), std::invalid_argument);
    CHECK_THROWS_AS(size_vi(91.0, z_l, 10.0), std::invalid_argument);
    CHECK_THROWS_AS(size_vi(45.0, z_l, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(size_vi(45.0, z_l, 0.9 * std::abs(z_l)),
                    InfeasibleScenario);
}

TEST_CASE("optimal_angle") {
    CHECK(optimal_angle(Phasor(0.0, 1.55)) == doctest::Approx(90.0));
    CHECK(optimal_angle(Phasor(1.0, 1.0)) == doctest::Approx(45.0));
    CHECK(optimal_angle(Phasor(0.415, 1.548)) ==
          doctest::Approx(74.9925876604814).epsilon(1e-12));
    CHECK_THROWS_AS(optimal_angle(Phasor(0.0, 0.0)), std::invalid_argument);
}

TEST_CASE("angle_sweep: every point carries the same worst-phase current") {
    const std::vector<SweepPoint> pts =
        angle_sweep(reference_scenario(), kIM, dense_sweep_angles());
    REQUIRE(pts.size() == 901);
    for (const auto& p : pts) {
        CHECK(std::abs(p.i_max - kIM) <= 1e-9 * kIM);
    }
}

TEST_CASE("angle_sweep: reference scenario values at 0/75/90 degrees") {
    const std::vector<SweepPoint> pts = angle_sweep(
        reference_scenario(), kIM, std::vector<double>{0.0, 75.0, 90.0});
    const SweepPoint& p0 = at_angle(pts, 0.0);
    CHECK(p0.vi_magnitude == doctest::Approx(4.31037541).epsilon(1e-8));
    CHECK(p0.v_c_pos_mag == doctest::Approx(71.2729339).epsilon(1e-8));
    CHECK(p0.v_c_neg_mag == doctest::Approx(14.6656913).epsilon(1e-8));
    CHECK(p0.dev_pos == doctest::Approx(14.6208082).epsilon(1e-8));

    const SweepPoint& p75 = at_angle(pts, 75.0);
    CHECK(p75.vi_magnitude == doctest::Approx(3.36980307).epsilon(1e-8));
    CHECK(p75.v_c_pos_mag == doctest::Approx(76.1691714).epsilon(1e-8));
    CHECK(p75.v_c_neg_mag == doctest::Approx(11.4654726).epsilon(1e-8));
    CHECK(p75.dev_pos == doctest::Approx(11.4303836).epsilon(1e-8));

    const SweepPoint& p90 = at_angle(pts, 90.0);
    CHECK(p90.vi_magnitude == doctest::Approx(3.40707524).epsilon(1e-8));
    CHECK(p90.v_c_pos_mag == doctest::Approx(76.7713872).epsilon(1e-8));
    CHECK(p90.v_c_neg_mag == doctest::Approx(11.5922881).epsilon(1e-8));
}

TEST_CASE("angle_sweep: deviations are minimized at the matched angle") {
    const SweepScenario sc = reference_scenario();
    const std::vector<SweepPoint> pts =
        angle_sweep(sc, kIM, dense_sweep_angles());
    std::size_t best_dev_pos = 0, best_dev_neg = 0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        if (pts[k].dev_pos < pts[best_dev_pos].dev_pos) best_dev_pos = k;
        if (pts[k].dev_neg < pts[best_dev_neg].dev_neg) best_dev_neg = k;
    }
    const double matched = optimal_angle(sc.z_l);
    CHECK(std::abs(pts[best_dev_pos].angle_deg - matched) <= 0.1);
    CHECK(std::abs(pts[best_dev_neg].angle_deg - matched) <= 0.1);
}

TEST_CASE("angle_sweep: collinear sag peaks v_c_pos exactly at 75 degrees") {
    const std::vector<SweepPoint> pts =
        angle_sweep(collinear_scenario(), kIM, dense_sweep_angles());
    std::size_t best = 0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        if (pts[k].v_c_pos_mag > pts[best].v_c_pos_mag) best = k;
    }
    CHECK(pts[best].angle_deg == doctest::Approx(75.0));
    CHECK(pts[best].v_c_pos_mag == doctest::Approx(46.7197885056).epsilon(1e-9));
    // The support dips past the optimum: 90 degrees is measurably worse.
    CHECK(at_angle(pts, 90.0).v_c_pos_mag ==
          doctest::Approx(46.5770959).epsilon(1e-8));
    CHECK(at_angle(pts, 90.0).v_c_pos_mag < pts[best].v_c_pos_mag);
    CHECK(at_angle(pts, 0.0).v_c_pos_mag ==
          doctest::Approx(43.1042577).epsilon(1e-8));
}

TEST_CASE("angle_sweep: purely inductive line moves the peak to 90 degrees") {
    SweepScenario sc = collinear_scenario();
    sc.z_l = Phasor(0.0, 1.547696);
    const std::vector<SweepPoint> pts =
        angle_sweep(sc, kIM, dense_sweep_angles());
    std::size_t best = 0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        if (pts[k].v_c_pos_mag > pts[best].v_c_pos_mag) best = k;
    }
    CHECK(pts[best].angle_deg == doctest::Approx(90.0));
}

TEST_CASE("angle_sweep: validation and infeasibility before any point") {
    const SweepScenario sc = reference_scenario();
    CHECK_THROWS_AS(angle_sweep(sc, kIM, {}), std::invalid_argument);
    CHECK_THROWS_AS(angle_sweep(sc, kIM, {95.0}), std::invalid_argument);
    // A current target far above what z_l alone allows is infeasible at
    // every angle; the sweep must refuse as a whole.
    CHECK_THROWS_AS(angle_sweep(sc, 50.0 * kIM, dense_sweep_angles()),
                    InfeasibleScenario);
}

TEST_CASE("sweep angle grids") {
    const std::vector<double> dense = dense_sweep_angles();
    REQUIRE(dense.size() == 901);
    CHECK(dense.front() == doctest::Approx(0.0));
    CHECK(dense.back() == doctest::Approx(90.0));

    const std::vector<double> grid = default_sweep_angles(kZl);
    CHECK(std::is_sorted(grid.begin(), grid.end()));
    const double matched = optimal_angle(kZl);
    CHECK(std::any_of(grid.begin(), grid.end(), [&](double a) {
        return a == matched;
    }));
    CHECK(std::count(grid.begin(), grid.end(), 0.0) == 1);
    CHECK(std::count(grid.begin(), grid.end(), 90.0) == 1);
}
