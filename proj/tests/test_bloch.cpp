#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mfcd/bloch.hpp"
#include "mfcd/quantum.hpp"

using namespace mfcd;

namespace {

ProblemInstance single_spin(double h, double gamma, double gamma_d) {
    ProblemInstance inst;
    inst.n_sites = 1;
    inst.couplings = {0.0};
    inst.fields = {h};
    inst.gamma = gamma;
    inst.gamma_d = gamma_d;
    return inst;
}

std::vector<Vec3> random_state(int n, std::uint64_t seed) {
    Rng rng({"mt19937_64", seed, "state"});
    std::vector<Vec3> m(n);
    for (auto& v : m) {
        Vec3 u{rng.normal(), rng.normal(), rng.normal()};
        const double r = u.norm();
        v = {u.x / r, u.y / r, u.z / r};
    }
    return m;
}

}  // namespace

TEST_CASE("cd_field matches the single-spin closed form") {
    // One spin: B_x = (1-f) Gamma_D, B_z = g h, so
    // B_y = (gdot h B_x + fdot Gamma_D B_z) / (2 (B_x^2 + B_z^2)).
    auto inst = single_spin(0.5, 0.0, 1.0);
    auto sch = Schedule::trig(0.1, 1e-3);
    std::vector<Vec3> m{{1, 0, 0}};
    for (double t : {0.01, 0.03, 0.05, 0.09}) {
        const auto fld = effective_field(inst, sch, m, t);
        const auto rates = solve_field_derivatives(inst, sch, m, t);
        const double bx = 1.0 - sch.f(t);
        const double bz = sch.g(t) * 0.5;
        const double expect = (sch.g_dot(t) * 0.5 * bx + sch.f_dot(t) * bz) / (2.0 * (bx * bx + bz * bz));
        CHECK(fld.bx[0] == doctest::Approx(bx));
        CHECK(fld.bz[0] == doctest::Approx(bz));
        CHECK(cd_field(fld.bx[0], fld.bz[0], rates.bx_dot[0], rates.bz_dot[0]) ==
              doctest::Approx(expect).epsilon(1e-13));
    }
    CHECK_THROWS_AS(cd_field(0.0, 1e-7, 1.0, 1.0), std::domain_error);
}

TEST_CASE("solved field rates satisfy their defining relation") {
    // dB_z,i/dt = fdot sum_j J_ij m_z,j + f sum_j J_ij dm_z,j/dt + gdot h_i with
    // dm_z,j/dt = 2 (m_x,j B_y,j - m_y,j B_x,j) and B_y,j built from the same rates.
    for (auto topology : {Topology::FullyConnected, Topology::Chain}) {
        auto inst = make_random_instance(7, 1.0, topology, 0.1, 1.0, 3, 4);
        auto sch = Schedule::trig(1.0, 1e-3);
        auto m = random_state(7, 17);
        for (double t : {0.2, 0.5, 0.8}) {
            const auto fld = effective_field(inst, sch, m, t);
            const auto rates = solve_field_derivatives(inst, sch, m, t);
            std::vector<double> mz_dot(7);
            for (int j = 0; j < 7; ++j) {
                const double by = cd_field(fld.bx[j], fld.bz[j], rates.bx_dot[j], rates.bz_dot[j]);
                mz_dot[j] = 2.0 * (m[j].x * by - m[j].y * fld.bx[j]);
                CHECK(rates.bx_dot[j] == doctest::Approx(-sch.f_dot(t)));
            }
            for (int i = 0; i < 7; ++i) {
                double expect = sch.g_dot(t) * inst.fields[i];
                for (int j = 0; j < 7; ++j) {
                    if (j == i) continue;
                    expect += inst.coupling(i, j) * (sch.f_dot(t) * m[j].z + sch.f(t) * mz_dot[j]);
                }
                CHECK(rates.bz_dot[i] == doctest::Approx(expect).epsilon(1e-11));
            }
        }
    }
}

TEST_CASE("corrupted feedback sign breaks the defining relation") {
    auto inst = make_random_instance(5, 1.0, Topology::FullyConnected, 0.1, 1.0, 2, 2);
    auto sch = Schedule::trig(1.0, 1e-3);
    auto m = random_state(5, 3);
    BlochOptions bad;
    bad.corrupt_feedback_sign = true;
    const auto good_rates = solve_field_derivatives(inst, sch, m, 0.5);
    const auto bad_rates = solve_field_derivatives(inst, sch, m, 0.5, bad);
    double diff = 0.0;
    for (int i = 0; i < 5; ++i) diff = std::max(diff, std::abs(good_rates.bz_dot[i] - bad_rates.bz_dot[i]));
    CHECK(diff > 1e-3);
}

TEST_CASE("single spin with CD stays aligned with its field") {
    auto inst = single_spin(0.5, 0.0, 1.0);
    auto sch = Schedule::trig(0.1, 1e-3);
    auto traj = integrate_bloch(inst, sch, CdMode::On, 2000);
    double worst = 0.0;
    for (int k = 0; k <= traj.steps(); ++k) {
        const auto& f = traj.field[k];
        const double r = std::hypot(f.bx[0], f.bz[0]);
        const Vec3& m = traj.at(k, 0);
        worst = std::max({worst, std::abs(m.x - f.bx[0] / r), std::abs(m.z - f.bz[0] / r), std::abs(m.y)});
    }
    // m(0) = (1,0,0) while the field has a delta-sized z part, so alignment
    // holds up to that initial offset.
    CHECK(worst < 2e-3);
    CHECK(traj.max_norm_drift < 1e-8);
}

TEST_CASE("single spin without CD matches the quantum Bloch vector") {
    auto inst = single_spin(0.7, 0.2, 1.0);
    auto sch = Schedule::trig(3.0, 0.0);
    auto traj = integrate_bloch(inst, sch, CdMode::Off, 4000);
    EvolveOptions opts;
    opts.steps = 4000;
    auto states = evolve(inst, sch, Drive::None, nullptr, opts);
    const auto& psi = states.final_state();
    const cplx a = psi[0], b = psi[1];
    const cplx ab = std::conj(a) * b;
    const Vec3& m = traj.at(traj.steps(), 0);
    CHECK(m.x == doctest::Approx(2.0 * ab.real()).epsilon(1e-9));
    CHECK(m.y == doctest::Approx(2.0 * ab.imag()).epsilon(1e-9));
    CHECK(m.z == doctest::Approx(std::norm(a) - std::norm(b)).epsilon(1e-9));
    CHECK(std::abs(m.y) > 1e-3);  // the run is genuinely diabatic
}

TEST_CASE("trajectory bookkeeping") {
    auto inst = staggered_instance(4, 1.1);
    auto sch = Schedule::trig(1.0, 1e-3);
    auto traj = integrate_bloch(inst, sch, CdMode::On, 200);
    CHECK(traj.steps() == 200);
    CHECK(traj.grid.front() == 0.0);
    CHECK(traj.grid.back() == 1.0);
    CHECK(traj.m.size() == 201u * 4u);
    CHECK(traj.field.size() == 201u);
    for (int i = 0; i < 4; ++i) {
        CHECK(traj.field.front().by[i] == 0.0);
        CHECK(std::abs(traj.field.back().by[i]) <= 1e-9);
        CHECK(traj.by_profile(i).size() == 201u);
    }
    const auto at_node = traj.by_at(traj.grid[37]);
    CHECK(at_node == traj.field[37].by);
    const auto mid = traj.by_at(0.5 * (traj.grid[37] + traj.grid[38]));
    CHECK(mid[1] == doctest::Approx(0.5 * (traj.field[37].by[1] + traj.field[38].by[1])));
    // Staggered fields give a staggered CD profile.
    for (const auto& f : traj.field) {
        CHECK(f.by[1] == doctest::Approx(-f.by[0]).epsilon(1e-12));
        CHECK(f.by[2] == doctest::Approx(f.by[0]).epsilon(1e-12));
    }
    auto plain = integrate_bloch(inst, sch, CdMode::Off, 200);
    CHECK_FALSE(plain.cd_enabled);
    for (const auto& f : plain.field) CHECK(f.by[0] == 0.0);
    CHECK_THROWS(integrate_bloch(inst, sch, CdMode::On, 0));
}

TEST_CASE("derivative consistency converges at second order") {
    auto inst = staggered_instance(4, 1.1);
    auto sch = Schedule::trig(1.0, 1e-3);
    const double coarse = derivative_consistency_rms(integrate_bloch(inst, sch, CdMode::On, 500));
    const double fine = derivative_consistency_rms(integrate_bloch(inst, sch, CdMode::On, 1000));
    CHECK(coarse < 1e-4);
    CHECK(coarse / fine > 3.9);
}

TEST_CASE("fixed point of a single spin") {
    auto inst = single_spin(0.5, 0.1, 1.0);
    auto sch = Schedule::trig(1.0, 1e-3);
    const double t = 0.6;
    std::vector<double> init{1.0};
    auto fp = self_consistent_magnetization(inst, sch, t, init);
    const double bx = (1.0 - sch.f(t)) + 0.1;
    const double bz = sch.g(t) * 0.5;
    CHECK(fp.converged);
    CHECK(fp.m_z[0] == doctest::Approx(bz / std::hypot(bx, bz)).epsilon(1e-9));
    CHECK(self_consistency_defect(inst, sch, t, fp.m_z) < 1e-9);
    CHECK(self_consistency_defect(inst, sch, t, init) > 0.1);
}

TEST_CASE("CD trajectory tracks the self-consistent magnetization") {
    auto inst = make_random_instance(8, 1.0, Topology::FullyConnected, 0.1, 1.0, 2, 2);
    auto sch = Schedule::trig(1.0, 1e-3);
    auto traj = integrate_bloch(inst, sch, CdMode::On, 4000);
    for (int k = 0; k <= 4000; k += 400) {
        std::vector<double> mz(8);
        for (int i = 0; i < 8; ++i) {
            mz[i] = traj.at(k, i).z;
            CHECK(std::abs(traj.at(k, i).y) <= 0.05);
        }
        auto fp = self_consistent_magnetization(inst, sch, traj.grid[k], mz);
        CHECK(fp.converged);
        for (int i = 0; i < 8; ++i) CHECK(std::abs(fp.m_z[i] - mz[i]) <= 0.05);
    }
}

TEST_CASE("trajectory csv layout") {
    auto inst = staggered_instance(2, 1.0);
    auto traj = integrate_bloch(inst, Schedule::trig(1.0, 1e-3), CdMode::On, 100);
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,site,m_x,m_y,m_z,bx,by,bz");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 101 * 2);
}
