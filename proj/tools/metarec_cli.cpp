// Command-line driver for the metamorphosis reconstruction library. Talks to
// the core exclusively through the C API (metarec.h).
//
// Exit codes: 0 success, 2 invalid input, 3 convergence failure, 4 I/O error.
#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "metarec.h"

namespace {

namespace fs = std::filesystem;

// ---- error plumbing -------------------------------------------------------

struct CliError {
    int code;
    std::string message;
};

void check(int rc, const std::string& context) {
    if (rc != MR_OK) throw CliError{rc, context + ": " + mr_last_error()};
}

// unique_ptr wrappers so early exits cannot leak C API handles
struct ImageDeleter {
    void operator()(mr_image* p) const { mr_image_free(p); }
};
struct SinoDeleter {
    void operator()(mr_sinogram* p) const { mr_sinogram_free(p); }
};
using Image = std::unique_ptr<mr_image, ImageDeleter>;
using Sino = std::unique_ptr<mr_sinogram, SinoDeleter>;

// ---- experiment spec file -------------------------------------------------
//
// Flat key-value text with [section] headers, `#` comments, `key = value`
// lines. Grammar and recognized keys are documented in the README.
struct SpecFile {
    // [experiment]
    std::string template_name = "shepp-logan";  // builtin name or image path
    std::string target_name;                    // optional builtin/path
    std::string deform_preset;                  // optional preset applied to the target
    double deform_scale = 1.0;
    std::string sinogram_path;  // measured data; skips synthesis when set
    int m = 64;
    int angles = 10;
    double noise = 0.05;
    std::uint64_t seed = 1234;
    // [model]
    int data_term = 0;   // 0 ssd, 1 ncc
    int source_reg = 0;  // 0 tv, 1 l2
    double lambda1[3] = {0.001, 0.001, 1e-6};
    double lambda2 = 0.1;
    int mt = 0;
    int n_steps = 5;
    // [solver]
    int max_iter = 200;
    int coarsest_m = 32;
    int guaranteed = 0;
    int gauss_newton = 1;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

SpecFile parse_spec(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw CliError{MR_ERR_IO, "cannot open spec file " + path};
    SpecFile sp;
    std::string line, section;
    int lineno = 0;
    auto fail = [&](const std::string& why) {
        throw CliError{MR_ERR_INVALID,
                       path + ":" + std::to_string(lineno) + ": " + why};
    };
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated section header");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto as_int = [&](const std::string& v) {
            try {
                return std::stoi(v);
            } catch (const std::exception&) {
                fail("bad integer for key '" + key + "'");
                return 0;
            }
        };
        auto as_double = [&](const std::string& v) {
            try {
                return std::stod(v);
            } catch (const std::exception&) {
                fail("bad number for key '" + key + "'");
                return 0.0;
            }
        };
        if (section == "experiment") {
            if (key == "template") sp.template_name = val;
            else if (key == "target") sp.target_name = val;
            else if (key == "deform") sp.deform_preset = val;
            else if (key == "deform_scale") sp.deform_scale = as_double(val);
            else if (key == "sinogram") sp.sinogram_path = val;
            else if (key == "m") sp.m = as_int(val);
            else if (key == "angles") sp.angles = as_int(val);
            else if (key == "noise") sp.noise = as_double(val);
            else if (key == "seed") sp.seed = (std::uint64_t)std::stoull(val);
            else fail("unknown key '" + key + "' in [experiment]");
        } else if (section == "model") {
            if (key == "data_term") {
                if (val == "ssd") sp.data_term = 0;
                else if (val == "ncc") sp.data_term = 1;
                else fail("data_term must be ssd or ncc");
            } else if (key == "source_reg") {
                if (val == "tv") sp.source_reg = 0;
                else if (val == "l2") sp.source_reg = 1;
                else fail("source_reg must be tv or l2");
            } else if (key == "lambda1") {
                std::stringstream ss(val);
                std::string tok;
                int i = 0;
                while (std::getline(ss, tok, ',') && i < 3) sp.lambda1[i++] = as_double(trim(tok));
                if (i != 3) fail("lambda1 needs three comma-separated values");
            } else if (key == "lambda2") sp.lambda2 = as_double(val);
            else if (key == "mt") sp.mt = as_int(val);
            else if (key == "n_steps") sp.n_steps = as_int(val);
            else fail("unknown key '" + key + "' in [model]");
        } else if (section == "solver") {
            if (key == "max_iter") sp.max_iter = as_int(val);
            else if (key == "coarsest_m") sp.coarsest_m = as_int(val);
            else if (key == "guaranteed") sp.guaranteed = as_int(val);
            else if (key == "gauss_newton") sp.gauss_newton = as_int(val);
            else fail("unknown key '" + key + "' in [solver]");
        } else {
            fail(section.empty() ? "key before any [section]" : "unknown section '" + section + "'");
        }
    }
    if (sp.angles < 1) throw CliError{MR_ERR_INVALID, path + ": angles must be >= 1"};
    if (sp.noise < 0) throw CliError{MR_ERR_INVALID, path + ": noise must be >= 0"};
    return sp;
}

// ---- shared helpers -------------------------------------------------------

Image load_image_or_builtin(const std::string& name, int m) {
    mr_image* img = nullptr;
    if (fs::exists(name)) {
        check(mr_image_read(name.c_str(), &img), "reading image " + name);
    } else {
        check(mr_phantom(name.c_str(), m, &img), "building phantom '" + name + "'");
    }
    return Image(img);
}

// target image of a spec: explicit target, else deformed template, else the
// template itself
Image build_target(const SpecFile& sp, const mr_image* tmpl) {
    if (!sp.target_name.empty()) {
        Image t = load_image_or_builtin(sp.target_name, sp.m);
        if (!sp.deform_preset.empty()) {
            mr_image* d = nullptr;
            check(mr_synth_deform(t.get(), sp.deform_preset.c_str(), sp.deform_scale, &d),
                  "deforming target");
            return Image(d);
        }
        return t;
    }
    if (!sp.deform_preset.empty()) {
        mr_image* d = nullptr;
        check(mr_synth_deform(tmpl, sp.deform_preset.c_str(), sp.deform_scale, &d),
              "deforming template");
        return Image(d);
    }
    mr_image* copy = nullptr;
    int dd = 0, mm = 0;
    check(mr_image_dims(tmpl, &dd, &mm), "image dims");
    check(mr_image_create(dd, mm, mr_image_data(tmpl), &copy), "copying template");
    return Image(copy);
}

Sino build_measurements(const SpecFile& sp, const mr_image* target) {
    if (!sp.sinogram_path.empty()) {
        mr_sinogram* s = nullptr;
        check(mr_sinogram_read_csv(sp.sinogram_path.c_str(), &s),
              "reading sinogram " + sp.sinogram_path);
        return Sino(s);
    }
    mr_sinogram* clean = nullptr;
    check(mr_project(target, sp.angles, &clean), "projecting target");
    Sino sc(clean);
    mr_sinogram* noisy = nullptr;
    check(mr_add_noise(sc.get(), sp.noise, sp.seed, &noisy), "adding noise");
    return Sino(noisy);
}

void write_image_to(const mr_image* img, const fs::path& path) {
    check(mr_image_write(img, path.string().c_str()), "writing " + path.string());
}

// |a - b| stretched to [0, 1] (min-max), the documented error-map contrast
Image error_map(const mr_image* a, const mr_image* b) {
    int d = 0, m = 0;
    check(mr_image_dims(a, &d, &m), "image dims");
    const double* pa = mr_image_data(a);
    const double* pb = mr_image_data(b);
    std::size_t n = 1;
    for (int k = 0; k < d; ++k) n *= (std::size_t)m;
    std::vector<double> e(n);
    double hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        e[i] = std::abs(pa[i] - pb[i]);
        hi = std::max(hi, e[i]);
    }
    if (hi > 0.0)
        for (double& v : e) v /= hi;
    mr_image* out = nullptr;
    check(mr_image_create(d, m, e.data(), &out), "building error map");
    return Image(out);
}

void ensure_outdir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw CliError{MR_ERR_IO, "cannot create output directory " + out};
}

struct ReconArtifacts {
    Image R, deformed, z;
};

ReconArtifacts run_reconstruct(const SpecFile& sp, const mr_image* tmpl, const mr_sinogram* meas,
                               const std::string& report_path, const std::string& log_path) {
    mr_reconstruct_params p;
    mr_reconstruct_params_init(&p);
    p.data_term = sp.data_term;
    p.source_reg = sp.source_reg;
    p.lambda1_spatial = sp.lambda1[0];
    p.lambda1_temporal = sp.lambda1[1];
    p.lambda1_l2 = sp.lambda1[2];
    p.lambda2 = sp.lambda2;
    p.coarsest_m = sp.coarsest_m;
    p.mt = sp.mt;
    p.max_iter = sp.max_iter;
    p.guaranteed_mode = sp.guaranteed;
    p.gauss_newton = sp.gauss_newton;
    p.n_steps = sp.n_steps;
    if (!report_path.empty()) p.report_path = report_path.c_str();
    if (!log_path.empty()) p.log_path = log_path.c_str();
    mr_image *R = nullptr, *def = nullptr, *z = nullptr;
    check(mr_reconstruct(tmpl, meas, &p, &R, &def, &z), "reconstruction");
    return ReconArtifacts{Image(R), Image(def), Image(z)};
}

// ---- subcommands ----------------------------------------------------------

int cmd_phantom(const std::string& name, int m, const std::string& out,
                const std::string& preset, double scale) {
    ensure_outdir(out);
    Image img = load_image_or_builtin(name, m);
    if (!preset.empty()) {
        mr_image* d = nullptr;
        check(mr_synth_deform(img.get(), preset.c_str(), scale, &d), "deforming phantom");
        img.reset(d);
    }
    write_image_to(img.get(), fs::path(out) / (name + ".mrf"));
    std::cout << "wrote " << (fs::path(out) / (name + ".mrf")).string() << "\n";
    return 0;
}

int cmd_project(const std::string& image, const std::string& name, int m, int angles,
                double noise, std::uint64_t seed, const std::string& out) {
    ensure_outdir(out);
    Image img = load_image_or_builtin(image.empty() ? name : image, m);
    mr_sinogram* s = nullptr;
    check(mr_project(img.get(), angles, &s), "projecting");
    Sino sino(s);
    if (noise > 0.0) {
        mr_sinogram* n = nullptr;
        check(mr_add_noise(sino.get(), noise, seed, &n), "adding noise");
        sino.reset(n);
    }
    const fs::path path = fs::path(out) / "sinogram.csv";
    check(mr_sinogram_write_csv(sino.get(), path.string().c_str()), "writing " + path.string());
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int cmd_reconstruct(const std::string& spec_path, const std::string& out, std::int64_t seed,
                    int level_coarsest, const std::string& log) {
    SpecFile sp = parse_spec(spec_path);
    if (seed >= 0) sp.seed = (std::uint64_t)seed;
    if (level_coarsest > 0) sp.coarsest_m = level_coarsest;
    ensure_outdir(out);

    Image tmpl = load_image_or_builtin(sp.template_name, sp.m);
    Image target = build_target(sp, tmpl.get());
    Sino meas = build_measurements(sp, target.get());

    const fs::path outp(out);
    const std::string report = (outp / "report.txt").string();
    ReconArtifacts art = run_reconstruct(sp, tmpl.get(), meas.get(), report, log);

    write_image_to(art.R.get(), outp / "reconstruction.mrf");
    write_image_to(art.deformed.get(), outp / "deformation_part.mrf");
    write_image_to(art.z.get(), outp / "source_part.mrf");
    Image emap = error_map(art.R.get(), target.get());
    write_image_to(emap.get(), outp / "error_map.mrf");

    // metrics against the (known or synthetic) target, appended to the report
    double ssd = 0.0, ssim = 0.0;
    check(mr_metric_ssd(art.R.get(), target.get(), &ssd), "ssd metric");
    check(mr_metric_ssim(art.R.get(), target.get(), &ssim), "ssim metric");
    {
        std::ofstream rf(report, std::ios::app);
        rf << "\n[metrics]\n";
        rf << "ssd_vs_target = " << ssd << "\n";
        rf << "ssim_vs_target = " << ssim << "\n";
        rf << "noise_convention = sigma = level * ||g||_2 / sqrt(M)\n";
        rf << "error_map_stretch = min-max to [0,1]\n";
        if (!rf) throw CliError{MR_ERR_IO, "cannot append metrics to " + report};
    }
    std::cout << "ssd = " << ssd << "\nssim = " << ssim << "\n";
    return 0;
}

int cmd_baseline(const std::string& sino_path, int m, double lambda, double tol, int max_iter,
                 const std::string& out) {
    ensure_outdir(out);
    mr_sinogram* s = nullptr;
    check(mr_sinogram_read_csv(sino_path.c_str(), &s), "reading sinogram " + sino_path);
    Sino sino(s);
    mr_image* R = nullptr;
    int conv = 0;
    check(mr_baseline(sino.get(), m, lambda, tol, max_iter, &R, &conv), "baseline");
    Image img(R);
    if (!conv) std::cerr << "warning: baseline hit the iteration cap; best iterate written\n";
    const fs::path path = fs::path(out) / "baseline.mrf";
    write_image_to(img.get(), path);
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int cmd_metrics(const std::string& a_path, const std::string& b_path) {
    mr_image* a = nullptr;
    check(mr_image_read(a_path.c_str(), &a), "reading " + a_path);
    Image ia(a);
    mr_image* b = nullptr;
    check(mr_image_read(b_path.c_str(), &b), "reading " + b_path);
    Image ib(b);
    double ssd = 0.0, ssim = 0.0;
    check(mr_metric_ssd(ia.get(), ib.get(), &ssd), "ssd metric");
    check(mr_metric_ssim(ia.get(), ib.get(), &ssim), "ssim metric");
    std::cout << "ssd = " << ssd << "\nssim = " << ssim << "\n";
    return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& out, std::int64_t seed,
              int threads) {
    SpecFile base = parse_spec(spec_path);
    if (seed >= 0) base.seed = (std::uint64_t)seed;
    ensure_outdir(out);

    const std::vector<double> scales = {0.01, 0.1, 1.0, 10.0, 100.0};
    const std::vector<double> lambda2s = {0.02, 0.2, 2.0, 20.0};

    Image tmpl = load_image_or_builtin(base.template_name, base.m);
    Image target = build_target(base, tmpl.get());
    Sino meas = build_measurements(base, target.get());

    struct Row {
        double scale, lambda2, ssd, ssim;
        bool ok;
        std::string error;
    };
    std::vector<Row> rows(scales.size() * lambda2s.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= rows.size()) return;
            const double scale = scales[j / lambda2s.size()];
            const double l2 = lambda2s[j % lambda2s.size()];
            Row& row = rows[j];
            row.scale = scale;
            row.lambda2 = l2;
            try {
                SpecFile sp = base;
                for (double& l : sp.lambda1) l *= scale;
                sp.lambda2 = l2;
                ReconArtifacts art = run_reconstruct(sp, tmpl.get(), meas.get(), "", "");
                check(mr_metric_ssd(art.R.get(), target.get(), &row.ssd), "ssd metric");
                check(mr_metric_ssim(art.R.get(), target.get(), &row.ssim), "ssim metric");
                row.ok = true;
            } catch (const CliError& e) {
                row.ok = false;
                row.error = e.message;
            }
        }
    };
    const int nthreads = std::max(1, threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads - 1; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();

    const fs::path path = fs::path(out) / "sweep.csv";
    std::ofstream f(path);
    if (!f) throw CliError{MR_ERR_IO, "cannot write " + path.string()};
    f << "lambda1_scale,lambda2,ssd,ssim\n";
    bool all_ok = true;
    for (const Row& r : rows) {
        if (r.ok) {
            f << r.scale << "," << r.lambda2 << "," << r.ssd << "," << r.ssim << "\n";
        } else {
            all_ok = false;
            std::cerr << "sweep (" << r.scale << ", " << r.lambda2 << ") failed: " << r.error
                      << "\n";
        }
    }
    std::cout << "wrote " << path.string() << "\n";
    return all_ok ? 0 : MR_ERR_CONVERGENCE;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"template-based tomographic reconstruction with metamorphosis"};
    app.require_subcommand(1);

    // phantom
    auto* ph = app.add_subcommand("phantom", "rasterize a builtin phantom image");
    std::string ph_name = "shepp-logan", ph_out = ".", ph_preset;
    int ph_m = 64;
    double ph_scale = 1.0;
    ph->add_option("--name", ph_name, "builtin phantom name");
    ph->add_option("--m", ph_m, "cells per axis");
    ph->add_option("--preset", ph_preset, "optional deformation preset");
    ph->add_option("--scale", ph_scale, "preset amplitude scale");
    ph->add_option("--out", ph_out, "output directory");

    // project
    auto* pj = app.add_subcommand("project", "forward-project an image to a sinogram");
    std::string pj_image, pj_name = "shepp-logan", pj_out = ".";
    int pj_m = 64, pj_angles = 10;
    double pj_noise = 0.0;
    std::uint64_t pj_seed = 1234;
    pj->add_option("--image", pj_image, "input image file (overrides --name)");
    pj->add_option("--name", pj_name, "builtin phantom name");
    pj->add_option("--m", pj_m, "cells per axis for builtins");
    pj->add_option("--angles", pj_angles, "number of angles in [0,180)");
    pj->add_option("--noise", pj_noise, "relative noise level");
    pj->add_option("--seed", pj_seed, "noise seed");
    pj->add_option("--out", pj_out, "output directory");

    // reconstruct
    auto* rc = app.add_subcommand("reconstruct", "run the multilevel reconstruction");
    std::string rc_spec, rc_out = ".", rc_log;
    std::int64_t rc_seed = -1;
    int rc_coarsest = 0, rc_threads = 1;
    rc->add_option("--spec", rc_spec, "experiment spec file")->required();
    rc->add_option("--out", rc_out, "output directory");
    rc->add_option("--seed", rc_seed, "override the spec seed");
    rc->add_option("--level-coarsest", rc_coarsest, "override the coarsest level resolution");
    rc->add_option("--threads", rc_threads, "accepted for symmetry; single pipeline");
    rc->add_option("--log", rc_log, "iteration log file");

    // baseline
    auto* bl = app.add_subcommand("baseline", "L2-TV comparison reconstruction");
    std::string bl_sino, bl_out = ".";
    int bl_m = 64, bl_max_iter = 20000;
    double bl_lambda = 0.1, bl_tol = 1e-6;
    bl->add_option("--sinogram", bl_sino, "input sinogram CSV")->required();
    bl->add_option("--m", bl_m, "reconstruction resolution");
    bl->add_option("--lambda", bl_lambda, "TV weight");
    bl->add_option("--tol", bl_tol, "relative objective tolerance");
    bl->add_option("--max-iter", bl_max_iter, "PDHG iteration cap");
    bl->add_option("--out", bl_out, "output directory");

    // metrics
    auto* mt = app.add_subcommand("metrics", "SSD and SSIM between two images");
    std::string mt_a, mt_b;
    mt->add_option("--a", mt_a, "first image")->required();
    mt->add_option("--b", mt_b, "second image")->required();

    // sweep
    auto* sw = app.add_subcommand("sweep", "lambda-grid sweep with SSD/SSIM table");
    std::string sw_spec, sw_out = ".";
    std::int64_t sw_seed = -1;
    int sw_threads = 1;
    sw->add_option("--spec", sw_spec, "experiment spec file")->required();
    sw->add_option("--out", sw_out, "output directory");
    sw->add_option("--seed", sw_seed, "override the spec seed");
    sw->add_option("--threads", sw_threads, "parallel jobs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc_parse = app.exit(e);
        return rc_parse == 0 ? 0 : MR_ERR_INVALID;
    }

    try {
        if (*ph) return cmd_phantom(ph_name, ph_m, ph_out, ph_preset, ph_scale);
        if (*pj) return cmd_project(pj_image, pj_name, pj_m, pj_angles, pj_noise, pj_seed, pj_out);
        if (*rc) return cmd_reconstruct(rc_spec, rc_out, rc_seed, rc_coarsest, rc_log);
        if (*bl) return cmd_baseline(bl_sino, bl_m, bl_lambda, bl_tol, bl_max_iter, bl_out);
        if (*mt) return cmd_metrics(mt_a, mt_b);
        if (*sw) return cmd_sweep(sw_spec, sw_out, sw_seed, sw_threads);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return MR_ERR_INVALID;
    }
    return 0;
}
