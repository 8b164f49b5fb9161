#include "vpgrav/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace vpgrav {

SpatialGrid SpatialGrid::uniform(int n1, int n2, int n3, double L3) {
    if (n1 < 1 || n2 < 1 || n3 < 1 || !(L3 > 0.0))
        throw std::invalid_argument("spatial grid: need n1,n2 >= 1, n3 >= 1, L3 > 0");
    SpatialGrid g;
    g.n1 = n1;
    g.n2 = n2;
    g.n3 = n3;
    g.L3 = L3;
    g.x3.resize(n3 + 1);
    for (int j = 0; j <= n3; ++j) g.x3[j] = L3 * j / n3;
    g.x3[n3] = L3;
    return g;
}

SpatialGrid SpatialGrid::refined(int n1, int n2, int n3, double L3, double ratio) {
    if (ratio <= 1.0) return uniform(n1, n2, n3, L3);
    SpatialGrid g = uniform(n1, n2, n3, L3);
    // cell widths h0 * ratio^j normalized to sum to L3
    double sum = (std::pow(ratio, n3) - 1.0) / (ratio - 1.0);
    double h0 = L3 / sum;
    double acc = 0.0;
    for (int j = 0; j < n3; ++j) {
        g.x3[j] = acc;
        acc += h0 * std::pow(ratio, j);
    }
    g.x3[n3] = L3;
    return g;
}

int SpatialGrid::locate_x3(double h, double& t) const {
    if (h <= 0.0) {
        t = 0.0;
        return 0;
    }
    if (h >= L3) {
        t = 1.0;
        return n3 - 1;
    }
    // binary search over the (possibly non-uniform) node array
    int lo = 0, hi = n3;
    while (hi - lo > 1) {
        int mid = (lo + hi) / 2;
        (x3[mid] <= h ? lo : hi) = mid;
    }
    t = (h - x3[lo]) / (x3[lo + 1] - x3[lo]);
    return lo;
}

bool SpatialGrid::tail_tolerance_ok(double beta, double g, double tol) const {
    return std::exp(-beta * g * L3 / 2.0) < tol;
}

VelocityGrid VelocityGrid::cube(int m1, int m2, int m3, double vmax) {
    if (m1 < 1 || m2 < 1 || m3 < 2 || !(vmax > 0.0))
        throw std::invalid_argument("velocity grid: need m >= 2 on v3 and vmax > 0");
    VelocityGrid v;
    v.m1 = m1;
    v.m2 = m2;
    v.m3 = m3;
    v.vmax = vmax;
    return v;
}

bool VelocityGrid::tail_tolerance_ok(double beta, double tol) const {
    return std::exp(-beta * vmax * vmax) < tol;
}

std::string role_name(Role r) {
    switch (r) {
        case Role::steady_h: return "steady_h";
        case Role::perturbation_f: return "perturbation_f";
        case Role::total_F: return "total_F";
    }
    return "unknown";
}

Role role_from_name(const std::string& s) {
    if (s == "steady_h") return Role::steady_h;
    if (s == "perturbation_f") return Role::perturbation_f;
    if (s == "total_F") return Role::total_F;
    throw std::invalid_argument("unknown distribution role: " + s);
}

Distribution Distribution::zeros(const SpatialGrid& sg, const VelocityGrid& vg, Role role,
                                 double beta) {
    Distribution d;
    d.sg = sg;
    d.vg = vg;
    d.role = role;
    d.beta = beta;
    d.values.assign(sg.num_nodes() * vg.num_nodes(), 0.0);
    return d;
}

void Distribution::assert_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("distribution holds non-finite values");
}

double Distribution::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

double DensityField::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

namespace {

// analytic bound on  int_{outside box} e^{-beta |v|^2} dv  relative to the
// full Gaussian, used as tail metadata for the moment quadratures
double gaussian_tail_bound(double beta, double vmax, double amplitude) {
    if (beta <= 0.0) return std::numeric_limits<double>::infinity();
    double full = std::pow(std::numbers::pi / beta, 1.5);
    double edge = std::erfc(std::sqrt(beta) * vmax);
    return amplitude * 3.0 * edge * full;
}

}  // namespace

DensityField moment_density(const Distribution& f) {
    DensityField rho;
    rho.sg = f.sg;
    rho.values.assign(f.sg.num_nodes(), 0.0);

    const auto& vg = f.vg;
    std::vector<double> w1(vg.m1), w2(vg.m2), w3(vg.m3);
    for (int k = 0; k < vg.m1; ++k) w1[k] = vg.quad_weight(0, k);
    for (int k = 0; k < vg.m2; ++k) w2[k] = vg.quad_weight(1, k);
    for (int k = 0; k < vg.m3; ++k) w3[k] = vg.quad_weight(2, k);

    for (int i1 = 0; i1 < f.sg.n1; ++i1)
        for (int i2 = 0; i2 < f.sg.n2; ++i2)
            for (int j = 0; j <= f.sg.n3; ++j) {
                double acc = 0.0;
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2) {
                        double w12 = w1[k1] * w2[k2];
                        const double* row = &f.values[f.index(i1, i2, j, k1, k2, 0)];
                        double s = 0.0;
                        for (int k3 = 0; k3 < vg.m3; ++k3) s += w3[k3] * row[k3];
                        acc += w12 * s;
                    }
                rho.values[f.sg.node_index(i1, i2, j)] = acc;
            }
    rho.tail_bound = gaussian_tail_bound(f.beta, vg.vmax, f.max_abs());
    return rho;
}

FluxField moment_flux(const Distribution& f) {
    FluxField b;
    b.sg = f.sg;
    for (auto& c : b.comp) c.assign(f.sg.num_nodes(), 0.0);

    const auto& vg = f.vg;
    for (int i1 = 0; i1 < f.sg.n1; ++i1)
        for (int i2 = 0; i2 < f.sg.n2; ++i2)
            for (int j = 0; j <= f.sg.n3; ++j) {
                double a0 = 0.0, a1 = 0.0, a2 = 0.0;
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2) {
                        double w12 = vg.quad_weight(0, k1) * vg.quad_weight(1, k2);
                        double v1 = vg.node(0, k1), v2 = vg.node(1, k2);
                        const double* row = &f.values[f.index(i1, i2, j, k1, k2, 0)];
                        double s = 0.0, s3 = 0.0;
                        for (int k3 = 0; k3 < vg.m3; ++k3) {
                            double w = vg.quad_weight(2, k3) * row[k3];
                            s += w;
                            s3 += w * vg.node(2, k3);
                        }
                        a0 += w12 * v1 * s;
                        a1 += w12 * v2 * s;
                        a2 += w12 * s3;
                    }
                std::size_t idx = f.sg.node_index(i1, i2, j);
                b.comp[0][idx] = a0;
                b.comp[1][idx] = a1;
                b.comp[2][idx] = a2;
            }
    b.tail_bound = gaussian_tail_bound(f.beta, vg.vmax, f.max_abs()) * (vg.vmax + 1.0);
    return b;
}

namespace {

struct AxisLoc {
    int k = 0;
    double t = 0.0;
    bool outside = false;
};

AxisLoc locate_velocity(const VelocityGrid& vg, int axis, double v) {
    AxisLoc loc;
    int m = axis == 0 ? vg.m1 : (axis == 1 ? vg.m2 : vg.m3);
    if (m == 1) {
        loc.outside = false;  // homogeneous axis carries a single sample
        return loc;
    }
    double h = vg.spacing(axis);
    double fidx = (v + vg.vmax) / h;
    if (fidx < 0.0 || fidx > m - 1) {
        loc.outside = true;
        return loc;
    }
    loc.k = std::min(static_cast<int>(fidx), m - 2);
    loc.t = fidx - loc.k;
    return loc;
}

}  // namespace

InterpValue interpolate_raw(const SpatialGrid& sg, const VelocityGrid& vg,
                            const std::vector<double>& values, const PhasePoint& z) {
    if (z.x3 < 0.0) throw std::domain_error("interpolate: x3 < 0 (resolve boundary exits first)");
    if (z.x3 > sg.L3) return {0.0, true};

    AxisLoc l1 = locate_velocity(vg, 0, z.v[0]);
    AxisLoc l2 = locate_velocity(vg, 1, z.v[1]);
    AxisLoc l3 = locate_velocity(vg, 2, z.v[2]);
    if (l1.outside || l2.outside || l3.outside) return {0.0, false};

    double tj;
    int j = sg.locate_x3(z.x3, tj);

    double f1 = (wrap_cell(z.x_par.x1) + 0.5) * sg.n1;
    double f2 = (wrap_cell(z.x_par.x2) + 0.5) * sg.n2;
    int i1 = std::min(static_cast<int>(f1), sg.n1 - 1);
    int i2 = std::min(static_cast<int>(f2), sg.n2 - 1);
    double t1 = sg.n1 == 1 ? 0.0 : f1 - i1;
    double t2 = sg.n2 == 1 ? 0.0 : f2 - i2;

    auto at = [&](int a1, int a2, int aj, int b1, int b2, int b3) {
        return values[((((static_cast<std::size_t>(a1) * sg.n2 + a2) * (sg.n3 + 1) + aj) *
                            vg.m1 + b1) * vg.m2 + b2) * vg.m3 + b3];
    };

    double acc = 0.0;
    for (int d1 = 0; d1 < 2; ++d1) {
        double wd1 = d1 ? t1 : 1.0 - t1;
        if (wd1 == 0.0) continue;
        int a1 = (i1 + d1) % sg.n1;
        for (int d2 = 0; d2 < 2; ++d2) {
            double wd2 = wd1 * (d2 ? t2 : 1.0 - t2);
            if (wd2 == 0.0) continue;
            int a2 = (i2 + d2) % sg.n2;
            for (int dj = 0; dj < 2; ++dj) {
                double wdj = wd2 * (dj ? tj : 1.0 - tj);
                if (wdj == 0.0) continue;
                int aj = std::min(j + dj, sg.n3);
                for (int e1 = 0; e1 < 2; ++e1) {
                    double we1 = wdj * (e1 ? l1.t : 1.0 - l1.t);
                    if (we1 == 0.0) continue;
                    int b1 = std::min(l1.k + e1, vg.m1 - 1);
                    for (int e2 = 0; e2 < 2; ++e2) {
                        double we2 = we1 * (e2 ? l2.t : 1.0 - l2.t);
                        if (we2 == 0.0) continue;
                        int b2 = std::min(l2.k + e2, vg.m2 - 1);
                        double wlo = we2 * (1.0 - l3.t), whi = we2 * l3.t;
                        int b3 = std::min(l3.k, vg.m3 - 1);
                        int b3p = std::min(l3.k + 1, vg.m3 - 1);
                        acc += wlo * at(a1, a2, aj, b1, b2, b3);
                        if (whi != 0.0) acc += whi * at(a1, a2, aj, b1, b2, b3p);
                    }
                }
            }
        }
    }
    return {acc, false};
}

InterpValue interpolate(const Distribution& f, const PhasePoint& z) {
    return interpolate_raw(f.sg, f.vg, f.values, z);
}

InterpValue interpolate(const DensityField& field, const Vec2& x_par, double x3) {
    if (x3 < 0.0) throw std::domain_error("interpolate: x3 < 0");
    if (x3 > field.sg.L3) return {0.0, true};
    double tj;
    int j = field.sg.locate_x3(x3, tj);
    double f1 = (wrap_cell(x_par.x1) + 0.5) * field.sg.n1;
    double f2 = (wrap_cell(x_par.x2) + 0.5) * field.sg.n2;
    int i1 = std::min(static_cast<int>(f1), field.sg.n1 - 1);
    int i2 = std::min(static_cast<int>(f2), field.sg.n2 - 1);
    double t1 = field.sg.n1 == 1 ? 0.0 : f1 - i1;
    double t2 = field.sg.n2 == 1 ? 0.0 : f2 - i2;

    double acc = 0.0;
    for (int d1 = 0; d1 < 2; ++d1)
        for (int d2 = 0; d2 < 2; ++d2)
            for (int dj = 0; dj < 2; ++dj) {
                double w = (d1 ? t1 : 1 - t1) * (d2 ? t2 : 1 - t2) * (dj ? tj : 1 - tj);
                if (w == 0.0) continue;
                acc += w * field.values[field.sg.node_index((i1 + d1) % field.sg.n1,
                                                            (i2 + d2) % field.sg.n2,
                                                            std::min(j + dj, field.sg.n3))];
            }
    return {acc, false};
}

}  // namespace vpgrav
