#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "metarec/interp.hpp"

using namespace metarec;
using namespace metarec::test;

namespace {

ScalarField sampled(const CellGrid& g, double (*f)(double, double)) {
    ScalarField out(g);
    PointSet c = cell_centers(g);
    for (std::size_t p = 0; p < c.n; ++p) out.values[p] = f(c.at(p, 0), c.at(p, 1));
    return out;
}

}  // namespace

TEST_CASE("constant field reproduces value with zero gradient") {
    CellGrid g(2, 16);
    ScalarField f(g, 3.25);
    for (InterpOrder ord : {InterpOrder::linear, InterpOrder::cubic}) {
        FieldInterpolant I(f, ord);
        double x[2] = {0.41, 0.77}, v, gr[2];
        I.eval(x, &v, gr);
        CHECK(v == doctest::Approx(3.25).epsilon(1e-14));
        CHECK(std::abs(gr[0]) < 1e-12);
        CHECK(std::abs(gr[1]) < 1e-12);
    }
}

TEST_CASE("affine reproduction at an interior point") {
    CellGrid g(2, 32);
    ScalarField f = sampled(g, [](double x, double y) { return 2.0 * x + 3.0 * y; });
    for (InterpOrder ord : {InterpOrder::linear, InterpOrder::cubic}) {
        FieldInterpolant I(f, ord);
        double x[2] = {0.37, 0.61}, v, gr[2];
        I.eval(x, &v, gr);
        CHECK(std::abs(v - 2.57) < 1e-10);  // 2*0.37 + 3*0.61
        CHECK(std::abs(gr[0] - 2.0) < 1e-10);
        CHECK(std::abs(gr[1] - 3.0) < 1e-10);
    }
}

TEST_CASE("affine reproduction everywhere incl. boundary cells (extrapolating prefilter)") {
    CellGrid g(2, 16);
    ScalarField f = sampled(g, [](double x, double y) { return 0.7 * x - 1.3 * y + 0.4; });
    FieldInterpolant I(f, InterpOrder::cubic);
    PointSet c = cell_centers(g);
    InterpResult r = I.eval(c);
    for (std::size_t p = 0; p < c.n; ++p) {
        const double want = 0.7 * c.at(p, 0) - 1.3 * c.at(p, 1) + 0.4;
        CHECK(std::abs(r.values[p] - want) < 1e-10);
    }
}

TEST_CASE("3-D affine reproduction") {
    CellGrid g(3, 8);
    ScalarField f(g);
    PointSet c = cell_centers(g);
    for (std::size_t p = 0; p < c.n; ++p)
        f.values[p] = 1.1 * c.at(p, 0) - 0.6 * c.at(p, 1) + 2.0 * c.at(p, 2);
    FieldInterpolant I(f, InterpOrder::cubic);
    double x[3] = {0.31, 0.52, 0.64}, v, gr[3];
    I.eval(x, &v, gr);
    CHECK(std::abs(v - (1.1 * 0.31 - 0.6 * 0.52 + 2.0 * 0.64)) < 1e-10);
    CHECK(std::abs(gr[0] - 1.1) < 1e-9);
    CHECK(std::abs(gr[1] + 0.6) < 1e-9);
    CHECK(std::abs(gr[2] - 2.0) < 1e-9);
}

TEST_CASE("gradient matches central finite differences of the interpolant") {
    CellGrid g(2, 24);
    ScalarField f(g);
    fill_random(f.values);
    const double eps = 1e-5;
    for (InterpOrder ord : {InterpOrder::linear, InterpOrder::cubic}) {
        FieldInterpolant I(f, ord);
        int checked = 0;
        while (checked < 100) {
            // stay away from cell faces (linear kinks) and the clamp boundary
            double x[2] = {urand(0.15, 0.85), urand(0.15, 0.85)};
            bool near_face = false;
            if (ord == InterpOrder::linear)
                for (int k = 0; k < 2; ++k) {
                    const double fr = x[k] * g.m - 0.5;
                    if (std::abs(fr - std::round(fr)) < 5e-4) near_face = true;
                }
            if (near_face) continue;
            double v, gr[2];
            I.eval(x, &v, gr);
            for (int k = 0; k < 2; ++k) {
                double xp[2] = {x[0], x[1]}, xm[2] = {x[0], x[1]};
                xp[k] += eps;
                xm[k] -= eps;
                double vp, vm;
                I.eval(xp, &vp, nullptr);
                I.eval(xm, &vm, nullptr);
                const double fd = (vp - vm) / (2 * eps);
                CHECK(std::abs(gr[k] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
            }
            ++checked;
        }
    }
}

TEST_CASE("interpolation is linear in the field values") {
    CellGrid g(2, 12);
    ScalarField f(g), h(g);
    fill_random(f.values);
    fill_random(h.values);
    ScalarField comb(g);
    for (std::size_t i = 0; i < comb.size(); ++i)
        comb.values[i] = 2.0 * f.values[i] - 0.5 * h.values[i];
    FieldInterpolant If(f, InterpOrder::cubic), Ih(h, InterpOrder::cubic),
        Ic(comb, InterpOrder::cubic);
    double x[2] = {0.333, 0.617}, vf, vh, vc;
    If.eval(x, &vf, nullptr);
    Ih.eval(x, &vh, nullptr);
    Ic.eval(x, &vc, nullptr);
    CHECK(std::abs(vc - (2.0 * vf - 0.5 * vh)) < 1e-12);
}

TEST_CASE("non-finite input rejected") {
    CellGrid g(2, 4);
    ScalarField f(g);
    f.values[3] = std::nan("");
    CHECK_THROWS_AS(FieldInterpolant(f, InterpOrder::cubic), InvalidInput);
}

TEST_CASE("velocity interpolation: zero field") {
    CellGrid g(2, 8, 0);
    VelocityField v(g);
    double x[2] = {0.4, 0.6};
    VelPointEval e;
    eval_velocity_at(v, 0.3, x, e);
    CHECK(e.value[0] == 0.0);
    CHECK(e.value[1] == 0.0);
    for (int i = 0; i < 4; ++i) CHECK(e.jac[i] == 0.0);
    CHECK(e.nst <= 8);  // 2*2^d coefficient slots in 2-D
    CHECK(e.nst > 0);
}

TEST_CASE("velocity interpolation: spatially constant field is exact") {
    CellGrid g(2, 8, 2);
    VelocityField v(g);
    const std::size_t md = g.num_cells();
    for (int t = 0; t < g.time_nodes(); ++t)
        for (std::size_t i = 0; i < md; ++i) {
            v.values[v.block_offset(t, 0) + i] = 0.7;
            v.values[v.block_offset(t, 1) + i] = -0.2;
        }
    for (double t : {0.0, 0.25, 0.9, 1.0}) {
        double x[2] = {0.13, 0.88};
        VelPointEval e;
        eval_velocity_at(v, t, x, e);
        CHECK(e.value[0] == doctest::Approx(0.7).epsilon(1e-14));
        CHECK(e.value[1] == doctest::Approx(-0.2).epsilon(1e-14));
    }
}

TEST_CASE("velocity coefficient stencil matches finite differences") {
    CellGrid g(2, 8, 2);
    VelocityField v(g), dv(g);
    fill_random(v.values, 0.2);
    fill_random(dv.values);
    const double t = 0.37, eps = 1e-6;
    double x[2] = {0.41, 0.58};
    VelPointEval e;
    eval_velocity_at(v, t, x, e);
    // apply the sparse jac_v to dv
    double jd[2] = {0, 0};
    for (int s = 0; s < e.nst; ++s)
        for (int c = 0; c < 2; ++c)
            jd[c] += e.w[s] * dv.values[((std::size_t)e.tnode[s] * 2 + c) * g.num_cells() +
                                        e.cell[s]];
    VelocityField vp = v, vm = v;
    for (std::size_t i = 0; i < v.size(); ++i) {
        vp.values[i] += eps * dv.values[i];
        vm.values[i] -= eps * dv.values[i];
    }
    VelPointEval ep, em;
    eval_velocity_at(vp, t, x, ep);
    eval_velocity_at(vm, t, x, em);
    for (int c = 0; c < 2; ++c) {
        const double fd = (ep.value[c] - em.value[c]) / (2 * eps);
        CHECK(std::abs(jd[c] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("velocity time outside [0,1] rejected") {
    CellGrid g(2, 4, 0);
    VelocityField v(g);
    double x[2] = {0.5, 0.5};
    VelPointEval e;
    CHECK_THROWS_AS(eval_velocity_at(v, -0.1, x, e), InvalidInput);
    CHECK_THROWS_AS(eval_velocity_at(v, 1.1, x, e), InvalidInput);
}

TEST_CASE("prolongation: constants and the 1-D clamped rule") {
    CellGrid coarse(2, 2), fine(2, 4);
    ScalarField c(coarse, 5.0);
    ScalarField f = prolongate(c, fine);
    for (double e : f.values) CHECK(e == doctest::Approx(5.0).epsilon(1e-15));

    // x-profile [a, b], constant in y
    const double a = 1.0, b = 3.0;
    ScalarField s(coarse);
    s.values = {a, b, a, b};
    ScalarField p = prolongate(s, fine);
    const double want[4] = {a, 0.75 * a + 0.25 * b, 0.25 * a + 0.75 * b, b};
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i)
            CHECK(p.values[j * 4 + i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("prolongate then restrict reproduces a ramp on interior cells") {
    CellGrid coarse(2, 8), fine(2, 16);
    ScalarField r(coarse);
    PointSet c = cell_centers(coarse);
    for (std::size_t p = 0; p < c.n; ++p) r.values[p] = 2.0 * c.at(p, 0) - c.at(p, 1);
    ScalarField back = restrict_average(prolongate(r, fine));
    for (int j = 1; j < 7; ++j)
        for (int i = 1; i < 7; ++i)
            CHECK(std::abs(back.values[j * 8 + i] - r.values[j * 8 + i]) < 1e-12);
}

TEST_CASE("prolongation rejects non-doubling grids") {
    CellGrid coarse(2, 8), bad(2, 20);
    ScalarField c(coarse);
    CHECK_THROWS_AS(prolongate(c, bad), InvalidInput);
}

TEST_CASE("restriction averages 2^d blocks") {
    CellGrid fine(2, 4);
    ScalarField f(fine);
    for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = (double)i;
    ScalarField c = restrict_average(f);
    CHECK(c.grid.m == 2);
    CHECK(c.values[0] == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
    CHECK(c.values[3] == doctest::Approx((10 + 11 + 14 + 15) / 4.0));
}
