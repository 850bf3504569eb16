#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "helpers.hpp"
#include "metarec/cliio.hpp"
#include "metarec/interp.hpp"

using namespace metarec;
using namespace metarec::test;

namespace {

// intensity centroid of an image, in domain coordinates
void centroid(const ScalarField& f, double* out) {
    PointSet c = cell_centers(f.grid);
    double mass = 0.0;
    out[0] = out[1] = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        mass += f.values[i];
        out[0] += f.values[i] * c.at(i, 0);
        out[1] += f.values[i] * c.at(i, 1);
    }
    out[0] /= mass;
    out[1] /= mass;
}

}  // namespace

TEST_CASE("disk phantom hits the documented point values") {
    const int m = 64;
    ScalarField f = make_phantom("disk", m);
    // center cell (m/2, m/2) is inside, corner cell (0,0) outside
    CHECK(f.values[(std::size_t)(m / 2) * m + m / 2] == 1.0);
    CHECK(f.values[0] == 0.0);
    CHECK_THROWS_AS(make_phantom("no-such-phantom", m), InvalidInput);
    CHECK_THROWS_AS(make_phantom("disk", 4), InvalidInput);
}

TEST_CASE("shepp-logan range and rasterization consistency") {
    ScalarField f = make_phantom("shepp-logan", 128);
    double lo = 1e9, hi = -1e9;
    for (double v : f.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK(hi > 0.9);  // the skull ellipse reaches full intensity

    // 2x-downsampled 256 phantom matches the 128 phantom within one intensity
    // quantum (0.1, the ellipse increment) on at least 99% of cells
    ScalarField big = make_phantom("shepp-logan", 256);
    ScalarField ds = restrict_average(big);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (std::abs(ds.values[i] - f.values[i]) <= 0.1 + 1e-12) ++ok;
    CHECK((double)ok / (double)f.size() >= 0.99);
}

TEST_CASE("shepp-logan-square adds the documented square") {
    const int m = 128;
    ScalarField plain = make_phantom("shepp-logan", m);
    ScalarField sq = make_phantom("shepp-logan-square", m);
    PointSet c = cell_centers(plain.grid);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < sq.size(); ++i) {
        const bool inside =
            std::abs(c.at(i, 0) - 0.63) < 0.04 && std::abs(c.at(i, 1) - 0.37) < 0.04;
        if (inside) {
            CHECK(sq.values[i] == 1.0);
            if (sq.values[i] != plain.values[i]) ++changed;
        } else {
            CHECK(sq.values[i] == plain.values[i]);
        }
    }
    CHECK(changed > 0);
}

TEST_CASE("synth_deform: zero amplitude is the identity") {
    ScalarField T = make_phantom("gauss-bump", 32);
    ScalarField R = synth_deform(T, "swirl", 0.0);
    for (std::size_t i = 0; i < T.size(); ++i)
        CHECK(R.values[i] == doctest::Approx(T.values[i]).epsilon(1e-12));
}

TEST_CASE("translate-bump moves the disk centroid by its amplitude") {
    const int m = 64;
    ScalarField T = make_phantom("disk", m);
    ScalarField R = synth_deform(T, "translate-bump", 1.0);
    double c0[2], c1[2];
    centroid(T, c0);
    centroid(R, c1);
    const double h = T.grid.hx();
    CHECK(std::abs((c1[0] - c0[0]) - 0.05) < h);
    CHECK(std::abs(c1[1] - c0[1]) < h);
}

TEST_CASE("swirl preset is diffeomorphic: positive discrete Jacobian") {
    CellGrid g(2, 64);
    VelocityField v = preset_velocity("swirl", g);
    ScalarField T = make_phantom("gauss-bump", 64);
    ScalarField z(T.grid);
    SolutionMap sm = solution_map(T, v, z, SolverConfig{});
    const int m = g.m;
    const double h = g.hx();
    // forward differences of the foot-point map over the grid
    for (int j = 0; j < m - 1; ++j)
        for (int i = 0; i < m - 1; ++i) {
            const std::size_t p = (std::size_t)j * m + i;
            const double axx = (sm.flow.phi0.at(p + 1, 0) - sm.flow.phi0.at(p, 0)) / h;
            const double axy = (sm.flow.phi0.at(p + m, 0) - sm.flow.phi0.at(p, 0)) / h;
            const double ayx = (sm.flow.phi0.at(p + 1, 1) - sm.flow.phi0.at(p, 1)) / h;
            const double ayy = (sm.flow.phi0.at(p + m, 1) - sm.flow.phi0.at(p, 1)) / h;
            CHECK(axx * ayy - axy * ayx > 0.0);
        }
    CHECK_THROWS_AS(preset_velocity("no-such-preset", g), InvalidInput);
}

TEST_CASE("add_noise follows the relative-energy convention") {
    CellGrid g(2, 32);
    ScalarField T = make_phantom("shepp-logan", 32);
    Sinogram s = radon_forward(T, make_geometry(25, g));  // M = 25 * 48 = 1200
    REQUIRE(s.data.size() >= 1000);

    Sinogram same = add_noise(s, 0.0, 7);
    for (std::size_t i = 0; i < s.data.size(); ++i) CHECK(same.data[i] == s.data[i]);

    const double level = 0.05;
    Sinogram noisy = add_noise(s, level, 7);
    double ns = 0.0, gs = 0.0;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        const double d = noisy.data[i] - s.data[i];
        ns += d * d;
        gs += s.data[i] * s.data[i];
    }
    const double ratio = std::sqrt(ns / gs);
    CHECK(ratio > 0.9 * level);
    CHECK(ratio < 1.1 * level);

    Sinogram again = add_noise(s, level, 7);
    for (std::size_t i = 0; i < s.data.size(); ++i) CHECK(again.data[i] == noisy.data[i]);
    Sinogram other = add_noise(s, level, 8);
    double diff = 0.0;
    for (std::size_t i = 0; i < s.data.size(); ++i)
        diff += std::abs(other.data[i] - noisy.data[i]);
    CHECK(diff > 0.0);
    CHECK_THROWS_AS(add_noise(s, -0.1, 7), InvalidInput);
}

TEST_CASE("image metrics: pinned values and symmetry") {
    ScalarField a = make_phantom("shepp-logan", 64);
    CHECK(metric_ssd(a, a) == 0.0);
    CHECK(metric_ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    ScalarField b = make_phantom("disk", 64);
    CHECK(metric_ssd(a, b) == doctest::Approx(metric_ssd(b, a)).epsilon(1e-15));
    CHECK(metric_ssd(a, b) > 0.0);

    // SSD of two constant images is 1/2 h^d * m^d * diff^2 = 1/2 diff^2
    ScalarField c0(CellGrid(2, 32), 0.2), c1(CellGrid(2, 32), 0.7);
    CHECK(metric_ssd(c0, c1) == doctest::Approx(0.5 * 0.25).epsilon(1e-12));

    // anticorrelation: a binary image against its negative
    ScalarField inv = b;
    for (double& v : inv.values) v = 1.0 - v;
    CHECK(metric_ssim(b, inv) < 0.0);

    ScalarField small(CellGrid(2, 8));
    CHECK_THROWS_AS(metric_ssim(small, small), InvalidInput);
    CHECK_THROWS_AS(metric_ssd(a, c0), InvalidInput);
}

TEST_CASE("l2tv baseline: identity operator closed forms") {
    CellGrid g(2, 32);
    ScalarField img = make_phantom("gauss-bump", 32);
    IdentityOperator id(g);
    Sinogram meas = id.forward(img);

    // lambda = 0: the minimizer is the data itself
    BaselineResult r0 = l2tv_baseline(id, meas, g, 0.0, 1e-10, 5000);
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(r0.R.values[i] == doctest::Approx(img.values[i]).epsilon(1e-5));

    // dominant regularization: the result is flat
    BaselineResult rinf = l2tv_baseline(id, meas, g, 1e8, 1e-12, 20000);
    CHECK(tv_value(rinf.R) < 1e-6);
}

TEST_CASE("l2tv baseline minimizes below reference images") {
    CellGrid g(2, 32);
    ScalarField T = make_phantom("shepp-logan", 32);
    SinogramGeometry geom = make_geometry(10, g);
    RadonOperator K(geom, g);
    Sinogram meas = add_noise(K.forward(T), 0.05, 11);

    const double lambda = 0.05;
    BaselineResult r = l2tv_baseline(K, meas, g, lambda, 1e-8, 4000);
    auto obj = [&](const ScalarField& R) {
        Sinogram Kr = K.forward(R);
        double s = 0.0;
        for (std::size_t i = 0; i < Kr.data.size(); ++i) {
            const double d = Kr.data[i] - meas.data[i];
            s += d * d;
        }
        return s + lambda * tv_value(R);
    };
    CHECK(r.objective == doctest::Approx(obj(r.R)).epsilon(1e-9));
    ScalarField zero(g);
    CHECK(r.objective < obj(zero));
    // scaled backprojection as the "filtered initial" reference iterate
    ScalarField bp = K.adjoint(meas, g);
    double scale = 1.0 / K.opnorm_KtK();
    for (double& v : bp.values) v *= scale;
    CHECK(r.objective < obj(bp));
}

TEST_CASE("sinogram csv round trip and header validation") {
    CellGrid g(2, 16);
    ScalarField T = make_phantom("gauss-bump", 16);
    Sinogram s = radon_forward(T, make_geometry(5, g));
    s.geom.level = 4;
    const std::string path = "/tmp/metarec_test_sino.csv";
    write_sinogram_csv(path, s);
    Sinogram back = read_sinogram_csv(path);
    CHECK(back.geom.q == s.geom.q);
    CHECK(back.geom.level == 4);
    REQUIRE(back.geom.angles_deg.size() == s.geom.angles_deg.size());
    for (std::size_t i = 0; i < s.geom.angles_deg.size(); ++i)
        CHECK(back.geom.angles_deg[i] == s.geom.angles_deg[i]);
    for (std::size_t i = 0; i < s.data.size(); ++i) CHECK(back.data[i] == s.data[i]);
    std::remove(path.c_str());

    std::ofstream bad(path);
    bad << "angles=0,90;q=zero;level=1\n";
    bad.close();
    CHECK_THROWS(read_sinogram_csv(path));
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_sinogram_csv("/tmp/metarec_no_such_file.csv"), IoError);
}

TEST_CASE("raw sinogram import honors the sidecar geometry") {
    SinogramGeometry geom;
    geom.angles_deg = {0.0, 45.0, 90.0};
    geom.q = 4;
    geom.level = 2;
    Sinogram s(geom);
    for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = 0.5 * (double)i;

    const std::string dpath = "/tmp/metarec_test_raw.bin";
    const std::string gpath = "/tmp/metarec_test_raw.geom";
    std::ofstream df(dpath, std::ios::binary);
    std::vector<float> buf(s.data.begin(), s.data.end());
    df.write(reinterpret_cast<const char*>(buf.data()),
             (std::streamsize)(buf.size() * sizeof(float)));
    df.close();
    std::ofstream gf(gpath);
    gf << "# raw sidecar\nangles = 0,45,90\nq = 4\nlevel = 2\n";
    gf.close();

    Sinogram back = read_sinogram_raw(dpath, gpath);
    CHECK(back.geom.q == 4);
    CHECK(back.geom.level == 2);
    for (std::size_t i = 0; i < s.data.size(); ++i)
        CHECK(back.data[i] == (double)(float)s.data[i]);

    // truncated payload is an I/O error
    std::ofstream shortf(dpath, std::ios::binary);
    shortf.write(reinterpret_cast<const char*>(buf.data()), 8);
    shortf.close();
    CHECK_THROWS_AS(read_sinogram_raw(dpath, gpath), IoError);
    std::remove(dpath.c_str());
    std::remove(gpath.c_str());
}

TEST_CASE("image format round trips float32 losslessly") {
    ScalarField f = make_phantom("shepp-logan", 32);
    f.lo = -0.25;
    f.hi = 1.5;
    const std::string path = "/tmp/metarec_test_img.mrf";
    write_image(path, f);
    ScalarField back = read_image(path);
    CHECK(back.grid.d == 2);
    CHECK(back.grid.m == 32);
    CHECK(back.lo == doctest::Approx(-0.25));
    CHECK(back.hi == doctest::Approx(1.5));
    for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(back.values[i] == (double)(float)f.values[i]);
    // writing the read-back image reproduces it exactly (float32 fixed point)
    write_image(path, back);
    ScalarField twice = read_image(path);
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(twice.values[i] == back.values[i]);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_image("/tmp/metarec_no_such_img.mrf"), IoError);
}
