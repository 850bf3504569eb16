// Exercises the shared-library C interface only; no core C++ headers.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>

#include "metarec.h"

TEST_CASE("phantom lifecycle, dims and data access") {
    mr_image* img = nullptr;
    REQUIRE(mr_phantom("disk", 32, &img) == MR_OK);
    int d = 0, m = 0;
    CHECK(mr_image_dims(img, &d, &m) == MR_OK);
    CHECK(d == 2);
    CHECK(m == 32);
    const double* data = mr_image_data(img);
    REQUIRE(data != nullptr);
    CHECK(data[16 * 32 + 16] == 1.0);
    CHECK(data[0] == 0.0);
    mr_image_free(img);

    mr_image* bad = nullptr;
    CHECK(mr_phantom("no-such", 32, &bad) == MR_ERR_INVALID);
    CHECK(std::strlen(mr_last_error()) > 0);
    CHECK(bad == nullptr);
}

TEST_CASE("project, noise determinism and sinogram round trip") {
    mr_image* img = nullptr;
    REQUIRE(mr_phantom("shepp-logan", 32, &img) == MR_OK);
    mr_sinogram* s = nullptr;
    REQUIRE(mr_project(img, 10, &s) == MR_OK);
    int p = 0, q = 0, level = 0;
    CHECK(mr_sinogram_dims(s, &p, &q, &level) == MR_OK);
    CHECK(p == 10);
    CHECK(q == 48);

    mr_sinogram *n1 = nullptr, *n2 = nullptr;
    REQUIRE(mr_add_noise(s, 0.05, 42, &n1) == MR_OK);
    REQUIRE(mr_add_noise(s, 0.05, 42, &n2) == MR_OK);
    const double* a = mr_sinogram_data(n1);
    const double* b = mr_sinogram_data(n2);
    for (int i = 0; i < p * q; ++i) CHECK(a[i] == b[i]);

    const char* path = "/tmp/metarec_capi_sino.csv";
    REQUIRE(mr_sinogram_write_csv(n1, path) == MR_OK);
    mr_sinogram* back = nullptr;
    REQUIRE(mr_sinogram_read_csv(path, &back) == MR_OK);
    const double* c = mr_sinogram_data(back);
    for (int i = 0; i < p * q; ++i) CHECK(c[i] == a[i]);
    std::remove(path);

    CHECK(mr_sinogram_read_csv("/tmp/metarec_capi_missing.csv", &back) == MR_ERR_IO);
    mr_sinogram_free(back);
    mr_sinogram_free(n1);
    mr_sinogram_free(n2);
    mr_sinogram_free(s);
    mr_image_free(img);
}

TEST_CASE("image file round trip through the C API") {
    mr_image* img = nullptr;
    REQUIRE(mr_phantom("gauss-bump", 16, &img) == MR_OK);
    const char* path = "/tmp/metarec_capi_img.mrf";
    REQUIRE(mr_image_write(img, path) == MR_OK);
    mr_image* back = nullptr;
    REQUIRE(mr_image_read(path, &back) == MR_OK);
    const double* a = mr_image_data(img);
    const double* b = mr_image_data(back);
    for (int i = 0; i < 16 * 16; ++i) CHECK(b[i] == (double)(float)a[i]);
    std::remove(path);
    mr_image_free(back);
    mr_image_free(img);
}

TEST_CASE("metrics agree with their pinned values") {
    mr_image* img = nullptr;
    REQUIRE(mr_phantom("shepp-logan", 32, &img) == MR_OK);
    double ssd = -1.0, ssim = -2.0;
    CHECK(mr_metric_ssd(img, img, &ssd) == MR_OK);
    CHECK(ssd == 0.0);
    CHECK(mr_metric_ssim(img, img, &ssim) == MR_OK);
    CHECK(ssim == doctest::Approx(1.0));

    mr_image* other = nullptr;
    REQUIRE(mr_phantom("disk", 16, &other) == MR_OK);
    CHECK(mr_metric_ssd(img, other, &ssd) == MR_ERR_INVALID);
    mr_image_free(other);
    mr_image_free(img);
}

TEST_CASE("synthetic deformation shifts mass") {
    mr_image* img = nullptr;
    REQUIRE(mr_phantom("disk", 32, &img) == MR_OK);
    mr_image* moved = nullptr;
    REQUIRE(mr_synth_deform(img, "translate-bump", 1.0, &moved) == MR_OK);
    const double* a = mr_image_data(img);
    const double* b = mr_image_data(moved);
    double diff = 0.0;
    for (int i = 0; i < 32 * 32; ++i) diff += std::fabs(a[i] - b[i]);
    CHECK(diff > 0.0);
    CHECK(mr_synth_deform(img, "no-such", 1.0, &moved) == MR_ERR_INVALID);
    mr_image_free(moved);
    mr_image_free(img);
}

TEST_CASE("end-to-end reconstruction through the C API") {
    mr_image* tmpl = nullptr;
    REQUIRE(mr_phantom("gauss-bump", 32, &tmpl) == MR_OK);
    mr_image* target = nullptr;
    REQUIRE(mr_synth_deform(tmpl, "translate-bump", 0.5, &target) == MR_OK);
    mr_sinogram* meas = nullptr;
    REQUIRE(mr_project(target, 10, &meas) == MR_OK);

    mr_reconstruct_params p;
    mr_reconstruct_params_init(&p);
    p.max_iter = 15;
    p.lambda2 = 0.01;
    const char* report = "/tmp/metarec_capi_report.txt";
    p.report_path = report;

    mr_image *R = nullptr, *def = nullptr, *z = nullptr;
    REQUIRE(mr_reconstruct(tmpl, meas, &p, &R, &def, &z) == MR_OK);
    REQUIRE(R != nullptr);
    REQUIRE(def != nullptr);
    REQUIRE(z != nullptr);
    // decomposition identity and a better fit than the template itself
    const double* r = mr_image_data(R);
    const double* d = mr_image_data(def);
    const double* s = mr_image_data(z);
    for (int i = 0; i < 32 * 32; ++i)
        CHECK(r[i] == doctest::Approx(d[i] + s[i]).epsilon(1e-10));
    double fit = 0.0, base = 0.0;
    CHECK(mr_metric_ssd(R, target, &fit) == MR_OK);
    CHECK(mr_metric_ssd(tmpl, target, &base) == MR_OK);
    CHECK(fit < base);

    std::FILE* f = std::fopen(report, "r");
    REQUIRE(f != nullptr);
    std::fclose(f);
    std::remove(report);

    mr_image_free(R);
    mr_image_free(def);
    mr_image_free(z);
    mr_sinogram_free(meas);
    mr_image_free(target);
    mr_image_free(tmpl);
}

TEST_CASE("baseline reconstruction through the C API") {
    mr_image* img = nullptr;
    REQUIRE(mr_phantom("shepp-logan", 32, &img) == MR_OK);
    mr_sinogram* meas = nullptr;
    REQUIRE(mr_project(img, 10, &meas) == MR_OK);
    mr_image* R = nullptr;
    int conv = -1;
    REQUIRE(mr_baseline(meas, 32, 0.05, 1e-6, 3000, &R, &conv) == MR_OK);
    REQUIRE(R != nullptr);
    double fit = -1.0, zero_fit = -1.0;
    mr_image* zero = nullptr;
    REQUIRE(mr_image_create(2, 32, nullptr, &zero) == MR_OK);
    CHECK(mr_metric_ssd(R, img, &fit) == MR_OK);
    CHECK(mr_metric_ssd(zero, img, &zero_fit) == MR_OK);
    CHECK(fit < zero_fit);
    mr_image_free(zero);
    mr_image_free(R);
    mr_sinogram_free(meas);
    mr_image_free(img);
}
