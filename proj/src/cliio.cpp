#include "metarec/cliio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace metarec {

namespace {

struct Ellipse {
    double value, a, b, x0, y0, phi_deg;
};

// Standard ten-ellipse head phantom (modified intensities), native
// coordinates in [-1, 1]^2.
constexpr Ellipse kSheppLogan[] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
};

double shepp_logan_at(double x, double y) {
    // map the unit square to the phantom's native [-1, 1]^2
    const double u = 2.0 * x - 1.0;
    const double v = 2.0 * y - 1.0;
    double s = 0.0;
    for (const Ellipse& e : kSheppLogan) {
        const double c = std::cos(e.phi_deg * M_PI / 180.0);
        const double sn = std::sin(e.phi_deg * M_PI / 180.0);
        const double du = u - e.x0, dv = v - e.y0;
        const double ra = (c * du + sn * dv) / e.a;
        const double rb = (-sn * du + c * dv) / e.b;
        if (ra * ra + rb * rb <= 1.0) s += e.value;
    }
    return std::clamp(s, 0.0, 1.0);
}

}  // namespace

ScalarField make_phantom(const std::string& name, int m) {
    if (m < 8) throw InvalidInput("make_phantom: m must be >= 8");
    CellGrid g(2, m);
    ScalarField f(g);
    PointSet c = cell_centers(g);
    // 8x8 supersampled area rasterization: keeps the analytic ellipse values
    // on cell interiors and makes resolution doubling consistent with block
    // averaging at edges, which pure center sampling cannot be
    const int ss = 8;
    const double h = g.hx();
    auto rasterize = [&](auto&& analytic) {
        for (std::size_t i = 0; i < c.n; ++i) {
            double acc = 0.0;
            for (int sj = 0; sj < ss; ++sj)
                for (int si = 0; si < ss; ++si)
                    acc += analytic(c.at(i, 0) + (si + 0.5) * h / ss - 0.5 * h,
                                    c.at(i, 1) + (sj + 0.5) * h / ss - 0.5 * h);
            f.values[i] = acc / (ss * ss);
        }
    };
    if (name == "shepp-logan" || name == "shepp-logan-square") {
        rasterize([](double x, double y) { return shepp_logan_at(x, y); });
        if (name == "shepp-logan-square") {
            for (std::size_t i = 0; i < c.n; ++i)
                if (std::abs(c.at(i, 0) - 0.63) < 0.04 && std::abs(c.at(i, 1) - 0.37) < 0.04)
                    f.values[i] = 1.0;
        }
    } else if (name == "gauss-bump") {
        rasterize([](double x, double y) {
            const double dx = x - 0.5, dy = y - 0.5;
            return std::exp(-(dx * dx + dy * dy) / (2.0 * 0.15 * 0.15));
        });
    } else if (name == "disk") {
        rasterize([](double x, double y) {
            const double dx = x - 0.5, dy = y - 0.5;
            return dx * dx + dy * dy <= 0.3 * 0.3 ? 1.0 : 0.0;
        });
    } else {
        throw InvalidInput("make_phantom: unknown phantom '" + name + "'");
    }
    return f;
}

VelocityField preset_velocity(const std::string& preset, const CellGrid& grid, double scale) {
    VelocityField v(grid);
    PointSet c = cell_centers(grid);
    const std::size_t n = grid.num_cells();
    const int tn = grid.time_nodes();
    const int d = grid.d;
    auto set = [&](std::size_t i, int comp, double val) {
        for (int t = 0; t < tn; ++t) v.values[((std::size_t)t * d + comp) * n + i] = val;
    };
    if (preset == "swirl") {
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = c.at(i, 0) - 0.5, dy = c.at(i, 1) - 0.5;
            const double env = scale * 0.6 * std::exp(-(dx * dx + dy * dy) / (2.0 * 0.2 * 0.2));
            set(i, 0, -env * dy);
            set(i, 1, env * dx);
        }
    } else if (preset == "bend") {
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = c.at(i, 0) - 0.5, dy = c.at(i, 1) - 0.5;
            const double env = std::exp(-(dx * dx + dy * dy) / (2.0 * 0.25 * 0.25));
            set(i, 1, scale * 0.1 * env * std::sin(M_PI * c.at(i, 0)));
        }
    } else if (preset == "translate-bump") {
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = c.at(i, 0) - 0.5, dy = c.at(i, 1) - 0.5;
            const double r = std::sqrt(dx * dx + dy * dy);
            // super-Gaussian plateau: ~1 over the central disk, -> 0 at the rim
            const double env = std::exp(-std::pow(r / 0.45, 8.0));
            set(i, 0, scale * 0.05 * env);
        }
    } else {
        throw InvalidInput("preset_velocity: unknown preset '" + preset + "'");
    }
    return v;
}

ScalarField synth_deform(const ScalarField& T, const std::string& preset, double scale,
                         const SolverConfig& solver) {
    CellGrid vg(T.grid.d, T.grid.m, 0);
    VelocityField v = preset_velocity(preset, vg, scale);
    ScalarField z(T.grid);
    SolutionMap sm = solution_map(T, v, z, solver);
    return sm.R;
}

Sinogram add_noise(const Sinogram& g, double level, std::uint64_t seed) {
    if (level < 0.0) throw InvalidInput("add_noise: level must be >= 0");
    if (level == 0.0) return g;
    double e = 0.0;
    for (double x : g.data) e += x * x;
    const double sigma = level * std::sqrt(e / (double)g.data.size());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, sigma);
    Sinogram out = g;
    for (double& x : out.data) x += dist(rng);
    return out;
}

double metric_ssd(const ScalarField& a, const ScalarField& b) {
    if (!a.grid.same_layout(b.grid)) throw InvalidInput("metric_ssd: grid mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return 0.5 * a.grid.cell_volume() * s;
}

double metric_ssim(const ScalarField& a, const ScalarField& b) {
    if (!a.grid.same_layout(b.grid)) throw InvalidInput("metric_ssim: grid mismatch");
    if (a.grid.d != 2) throw InvalidInput("metric_ssim: 2-D images only");
    const int m = a.grid.m;
    const int w = 11, r = w / 2;
    if (m < w) throw InvalidInput("metric_ssim: image smaller than the 11x11 window");
    double win[w * w];
    double wsum = 0.0;
    for (int j = 0; j < w; ++j)
        for (int i = 0; i < w; ++i) {
            const double dx = i - r, dy = j - r;
            win[j * w + i] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
            wsum += win[j * w + i];
        }
    for (double& x : win) x /= wsum;

    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;  // dynamic range 1.0
    double acc = 0.0;
    std::size_t count = 0;
    for (int cy = r; cy < m - r; ++cy)
        for (int cx = r; cx < m - r; ++cx) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int j = 0; j < w; ++j)
                for (int i = 0; i < w; ++i) {
                    const double wt = win[j * w + i];
                    const double av = a.values[(std::size_t)(cy - r + j) * m + (cx - r + i)];
                    const double bv = b.values[(std::size_t)(cy - r + j) * m + (cx - r + i)];
                    ma += wt * av;
                    mb += wt * bv;
                    saa += wt * av * av;
                    sbb += wt * bv * bv;
                    sab += wt * av * bv;
                }
            const double va = saa - ma * ma, vb = sbb - mb * mb, cab = sab - ma * mb;
            acc += ((2.0 * ma * mb + C1) * (2.0 * cab + C2)) /
                   ((ma * ma + mb * mb + C1) * (va + vb + C2));
            ++count;
        }
    return acc / (double)count;
}

namespace {

// forward-difference gradient with zero far-boundary rows (the TV stencil)
void grad_apply(const ScalarField& x, std::vector<double>& out) {
    const CellGrid& g = x.grid;
    const int d = g.d, m = g.m;
    const double hinv = (double)m;
    const std::size_t n = g.num_cells();
    std::size_t stride[3] = {1, (std::size_t)m, (std::size_t)m * m};
    out.assign(n * d, 0.0);
    std::vector<int> idx(d, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k)
            if (idx[k] < m - 1) out[i * d + k] = (x.values[i + stride[k]] - x.values[i]) * hinv;
        for (int k = 0; k < d; ++k) {
            if (++idx[k] < m) break;
            idx[k] = 0;
        }
    }
}

// negative adjoint of grad_apply (discrete divergence)
void grad_adjoint(const std::vector<double>& w, ScalarField& out) {
    const CellGrid& g = out.grid;
    const int d = g.d, m = g.m;
    const double hinv = (double)m;
    const std::size_t n = g.num_cells();
    std::size_t stride[3] = {1, (std::size_t)m, (std::size_t)m * m};
    std::fill(out.values.begin(), out.values.end(), 0.0);
    std::vector<int> idx(d, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k)
            if (idx[k] < m - 1) {
                out.values[i] -= w[i * d + k] * hinv;
                out.values[i + stride[k]] += w[i * d + k] * hinv;
            }
        for (int k = 0; k < d; ++k) {
            if (++idx[k] < m) break;
            idx[k] = 0;
        }
    }
}

}  // namespace

BaselineResult l2tv_baseline(const ForwardOperator& K, const Sinogram& g, const CellGrid& grid,
                             double lambda, double tol, int max_iter) {
    if (lambda < 0.0) throw InvalidInput("l2tv_baseline: lambda must be >= 0");
    if (!K.geometry().compatible(g.geom)) throw InvalidInput("l2tv_baseline: geometry mismatch");
    check_finite(g.data, "l2tv_baseline measurements");
    const double hd = grid.cell_volume();
    const int d = grid.d;
    const std::size_t n = grid.num_cells();
    const std::size_t M = g.data.size();

    const double L2 = K.opnorm_KtK() + 4.0 * d * grid.m * (double)grid.m;
    const double tau = 1.0 / std::sqrt(L2);
    const double sg = tau;

    ScalarField x(grid), xbar(grid);
    std::vector<double> p(M, 0.0);          // dual of K
    std::vector<double> w(n * (size_t)d, 0.0);  // dual of the gradient
    std::vector<double> gx;

    auto objective = [&](const ScalarField& R) {
        Sinogram Kr = K.forward(R);
        double data = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            const double df = Kr.data[i] - g.data[i];
            data += df * df;
        }
        return data + lambda * tv_value(R);
    };

    BaselineResult best;
    best.R = x;
    best.objective = objective(x);

    double prev_obj = best.objective;
    xbar = x;
    int it = 0;
    for (; it < max_iter; ++it) {
        // dual ascent: p for the data term, w projected onto the TV ball
        Sinogram Kxb = K.forward(xbar);
        for (std::size_t i = 0; i < M; ++i)
            p[i] = (p[i] + sg * Kxb.data[i] - sg * g.data[i]) / (1.0 + 0.5 * sg);
        grad_apply(xbar, gx);
        const double ball = lambda * hd;
        for (std::size_t i = 0; i < n; ++i) {
            double nrm = 0.0;
            for (int k = 0; k < d; ++k) {
                w[i * d + k] += sg * gx[i * d + k];
                nrm += w[i * d + k] * w[i * d + k];
            }
            nrm = std::sqrt(nrm);
            if (nrm > ball) {
                const double s = ball / nrm;
                for (int k = 0; k < d; ++k) w[i * d + k] *= s;
            }
        }
        // primal descent with extrapolation
        Sinogram ps(g.geom);
        ps.data = p;
        ScalarField ktp = K.adjoint(ps, grid);
        ScalarField dtw(grid);
        grad_adjoint(w, dtw);
        for (std::size_t i = 0; i < n; ++i) {
            const double xn = x.values[i] - tau * (ktp.values[i] + dtw.values[i]);
            xbar.values[i] = 2.0 * xn - x.values[i];
            x.values[i] = xn;
        }
        if ((it + 1) % 50 == 0) {
            const double obj = objective(x);
            if (obj < best.objective) {
                best.objective = obj;
                best.R = x;
            }
            const double rel = std::abs(prev_obj - obj) / std::max(std::abs(prev_obj), 1e-30);
            prev_obj = obj;
            if (rel < tol) {
                best.converged = true;
                ++it;
                break;
            }
        }
    }
    best.iterations = it;
    return best;
}

void write_sinogram_csv(const std::string& path, const Sinogram& s) {
    if (s.geom.dim != 2) throw InvalidInput("write_sinogram_csv: 2-D sinograms only");
    std::ofstream f(path);
    if (!f) throw IoError("write_sinogram_csv: cannot open " + path);
    f << "angles=";
    for (std::size_t a = 0; a < s.geom.angles_deg.size(); ++a) {
        if (a) f << ",";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", s.geom.angles_deg[a]);
        f << buf;
    }
    f << ";q=" << s.geom.q << ";level=" << s.geom.level << "\n";
    char buf[32];
    for (std::size_t a = 0; a < s.geom.angles_deg.size(); ++a) {
        for (int j = 0; j < s.geom.q; ++j) {
            if (j) f << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", s.data[a * s.geom.q + j]);
            f << buf;
        }
        f << "\n";
    }
    if (!f) throw IoError("write_sinogram_csv: write failed for " + path);
}

namespace {

std::vector<double> split_doubles(const std::string& s, const std::string& where) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw InvalidInput(where + ": bad number '" + tok + "'");
        }
    }
    return out;
}

SinogramGeometry parse_sino_header(const std::string& header, const std::string& where) {
    SinogramGeometry geom;
    geom.dim = 2;
    geom.slices = 1;
    bool have_angles = false, have_q = false;
    std::stringstream ss(header);
    std::string part;
    while (std::getline(ss, part, ';')) {
        const std::size_t eq = part.find('=');
        if (eq == std::string::npos) throw InvalidInput(where + ": malformed header field '" + part + "'");
        const std::string key = part.substr(0, eq);
        const std::string val = part.substr(eq + 1);
        if (key == "angles") {
            geom.angles_deg = split_doubles(val, where);
            have_angles = true;
        } else if (key == "q") {
            geom.q = std::stoi(val);
            have_q = true;
        } else if (key == "level") {
            geom.level = std::stoi(val);
        } else {
            throw InvalidInput(where + ": unknown header key '" + key + "'");
        }
    }
    if (!have_angles || !have_q || geom.q <= 0 || geom.angles_deg.empty())
        throw InvalidInput(where + ": header must carry angles and a positive q");
    return geom;
}

}  // namespace

Sinogram read_sinogram_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("read_sinogram_csv: cannot open " + path);
    std::string header;
    if (!std::getline(f, header)) throw IoError("read_sinogram_csv: empty file " + path);
    SinogramGeometry geom = parse_sino_header(header, "read_sinogram_csv");
    Sinogram s(geom);
    for (std::size_t a = 0; a < geom.angles_deg.size(); ++a) {
        std::string line;
        if (!std::getline(f, line))
            throw InvalidInput("read_sinogram_csv: expected " +
                               std::to_string(geom.angles_deg.size()) + " data rows");
        std::vector<double> row = split_doubles(line, "read_sinogram_csv");
        if ((int)row.size() != geom.q)
            throw InvalidInput("read_sinogram_csv: row " + std::to_string(a + 1) + " has " +
                               std::to_string(row.size()) + " values, expected q=" +
                               std::to_string(geom.q));
        std::copy(row.begin(), row.end(), s.data.begin() + a * geom.q);
    }
    return s;
}

Sinogram read_sinogram_raw(const std::string& data_path, const std::string& geom_path) {
    std::ifstream gf(geom_path);
    if (!gf) throw IoError("read_sinogram_raw: cannot open " + geom_path);
    SinogramGeometry geom;
    geom.dim = 2;
    geom.slices = 1;
    bool have_angles = false, have_q = false;
    std::string line;
    while (std::getline(gf, line)) {
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidInput("read_sinogram_raw: malformed sidecar line '" + line + "'");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "angles") {
            geom.angles_deg = split_doubles(val, "read_sinogram_raw");
            have_angles = true;
        } else if (key == "q") {
            geom.q = std::stoi(val);
            have_q = true;
        } else if (key == "level") {
            geom.level = std::stoi(val);
        } else {
            throw InvalidInput("read_sinogram_raw: unknown sidecar key '" + key + "'");
        }
    }
    if (!have_angles || !have_q || geom.q <= 0)
        throw InvalidInput("read_sinogram_raw: sidecar must carry angles and a positive q");

    std::ifstream df(data_path, std::ios::binary);
    if (!df) throw IoError("read_sinogram_raw: cannot open " + data_path);
    Sinogram s(geom);
    std::vector<float> buf(s.data.size());
    df.read(reinterpret_cast<char*>(buf.data()), (std::streamsize)(buf.size() * sizeof(float)));
    if ((std::size_t)df.gcount() != buf.size() * sizeof(float))
        throw IoError("read_sinogram_raw: " + data_path + " shorter than the sidecar geometry");
    for (std::size_t i = 0; i < buf.size(); ++i) s.data[i] = buf[i];
    return s;
}

void write_image(const std::string& path, const ScalarField& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_image: cannot open " + path);
    char header[128];
    std::snprintf(header, sizeof(header), "mrf %d %d %.9g %.9g\n", f.grid.d, f.grid.m, f.lo,
                  f.hi);
    out << header;
    std::vector<float> buf(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) buf[i] = (float)f.values[i];
    out.write(reinterpret_cast<const char*>(buf.data()),
              (std::streamsize)(buf.size() * sizeof(float)));
    if (!out) throw IoError("write_image: write failed for " + path);
}

ScalarField read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_image: cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw IoError("read_image: empty file " + path);
    std::stringstream ss(header);
    std::string magic;
    int d = 0, m = 0;
    double lo = 0.0, hi = 1.0;
    ss >> magic >> d >> m >> lo >> hi;
    if (magic != "mrf" || ss.fail()) throw InvalidInput("read_image: bad header in " + path);
    ScalarField f(CellGrid(d, m));
    f.lo = lo;
    f.hi = hi;
    std::vector<float> buf(f.size());
    in.read(reinterpret_cast<char*>(buf.data()), (std::streamsize)(buf.size() * sizeof(float)));
    if ((std::size_t)in.gcount() != buf.size() * sizeof(float))
        throw IoError("read_image: " + path + " shorter than its header promises");
    for (std::size_t i = 0; i < buf.size(); ++i) f.values[i] = buf[i];
    return f;
}

}  // namespace metarec
