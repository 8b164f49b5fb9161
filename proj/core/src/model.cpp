#include "vpgrav/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace vpgrav {

namespace {
constexpr double kPi = std::numbers::pi;
}

void Params::validate() const {
    if (!(g > 0.0)) throw std::invalid_argument("physics.g must be positive");
    if (eta != 1 && eta != -1) throw std::invalid_argument("physics.eta must be +1 or -1");
    if (!(beta > 0.0)) throw std::invalid_argument("physics.beta must be positive");
    if (!(beta_tilde > 0.0)) throw std::invalid_argument("physics.beta_tilde must be positive");
    if (!(green_constant > 0.0))
        throw std::invalid_argument("physics.green_constant must be positive");
}

double weight_exponent(WeightKind kind, const PhasePoint& z, const Params& p,
                       const PotentialFn& Phi, const PotentialFn* Psi) {
    if (z.x3 < 0.0) throw std::domain_error("weight: x3 < 0");
    double e = norm2(z.v) + 2.0 * p.g * z.x3;
    if (z.x3 > 0.0) {
        // the Dirichlet condition makes the potential terms vanish at x3 = 0;
        // skipping the evaluation keeps the boundary value exact
        e += 2.0 * Phi(z.x_par, z.x3);
        if (kind == WeightKind::dynamic) {
            if (Psi == nullptr) throw std::invalid_argument("dynamic weight needs Psi");
            e += 2.0 * (*Psi)(z.x_par, z.x3);
        }
    } else if (kind == WeightKind::dynamic && Psi == nullptr) {
        throw std::invalid_argument("dynamic weight needs Psi");
    }
    return p.beta * e;
}

double evaluate_weight(WeightKind kind, const PhasePoint& z, const Params& p,
                       const PotentialFn& Phi, const PotentialFn* Psi) {
    return std::exp(weight_exponent(kind, z, p, Phi, Psi));
}

double kinetic_distance(const PhasePoint& z, const Params& p,
                        const std::function<double(const Vec2&)>& dPhi3_boundary) {
    if (z.x3 < 0.0) throw std::domain_error("kinetic_distance: x3 < 0");
    double v3 = z.v[2];
    if (z.x3 == 0.0) return std::abs(v3);
    double r = v3 * v3 + z.x3 * z.x3 + 2.0 * dPhi3_boundary(z.x_par) * z.x3 + 2.0 * p.g * z.x3;
    if (r < 0.0)
        throw std::domain_error(
            "kinetic_distance: negative radicand (field gradient exceeds the g/2 bound?)");
    return std::sqrt(r);
}

// ---------------------------------------------------------------------------
// BoundaryDatum

BoundaryDatum BoundaryDatum::maxwellian(double amplitude, double decay_beta) {
    if (amplitude < 0.0) throw std::invalid_argument("boundary amplitude must be >= 0");
    if (!(decay_beta > 0.0)) throw std::invalid_argument("boundary decay must be positive");
    BoundaryDatum b;
    b.kind_ = Kind::analytic_maxwellian;
    b.amplitude_ = amplitude;
    b.decay_ = decay_beta;
    return b;
}

BoundaryDatum BoundaryDatum::tabulated(int n1, int n2, int mv, double vmax,
                                       std::vector<double> samples, double amp_tail,
                                       double decay_tail) {
    if (n1 < 1 || n2 < 1 || mv < 2) throw std::invalid_argument("tabulated datum: bad dims");
    if (samples.size() != static_cast<std::size_t>(n1) * n2 * mv * mv * mv)
        throw std::invalid_argument("tabulated datum: sample count mismatch");
    for (double s : samples)
        if (!std::isfinite(s) || s < 0.0)
            throw std::invalid_argument("tabulated datum: samples must be finite and >= 0");
    BoundaryDatum b;
    b.kind_ = Kind::tabulated;
    b.n1_ = n1;
    b.n2_ = n2;
    b.mv_ = mv;
    b.vmax_ = vmax;
    b.table_ = std::move(samples);
    b.amp_tail_ = amp_tail;
    b.decay_tail_ = decay_tail;
    return b;
}

bool BoundaryDatum::horizontally_homogeneous() const {
    return kind_ == Kind::analytic_maxwellian || (n1_ == 1 && n2_ == 1);
}

double BoundaryDatum::table_value(const Vec2& x_par, const Vec3& v) const {
    // multilinear in all five table coordinates; v1,v2 on [-vmax,vmax], v3 on [0,vmax]
    auto clamp01 = [](double t) { return t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t); };
    double fx1 = (wrap_cell(x_par.x1) + 0.5) * n1_;
    double fx2 = (wrap_cell(x_par.x2) + 0.5) * n2_;
    int i1 = static_cast<int>(fx1) % n1_, i2 = static_cast<int>(fx2) % n2_;
    double t1 = fx1 - std::floor(fx1), t2 = fx2 - std::floor(fx2);

    auto vindex = [&](double vi, double lo, double hi, int& k, double& t) {
        double f = (vi - lo) / (hi - lo) * (mv_ - 1);
        if (f <= 0.0) { k = 0; t = 0.0; return vi >= lo; }
        if (f >= mv_ - 1) { k = mv_ - 2; t = 1.0; return vi <= hi; }
        k = static_cast<int>(f);
        t = f - k;
        return true;
    };
    int k1, k2, k3;
    double s1, s2, s3;
    bool in1 = vindex(v[0], -vmax_, vmax_, k1, s1);
    bool in2 = vindex(v[1], -vmax_, vmax_, k2, s2);
    bool in3 = vindex(v[2], 0.0, vmax_, k3, s3);
    if (!in1 || !in2 || !in3) return 0.0;  // beyond the table; tail metadata bounds this
    s1 = clamp01(s1), s2 = clamp01(s2), s3 = clamp01(s3);

    auto at = [&](int a1, int a2, int b1, int b2, int b3) {
        std::size_t idx = (((static_cast<std::size_t>(a1) * n2_ + a2) * mv_ + b1) * mv_ + b2) * mv_ + b3;
        return table_[idx];
    };
    double acc = 0.0;
    for (int d1 = 0; d1 < 2; ++d1)
        for (int d2 = 0; d2 < 2; ++d2)
            for (int e1 = 0; e1 < 2; ++e1)
                for (int e2 = 0; e2 < 2; ++e2)
                    for (int e3 = 0; e3 < 2; ++e3) {
                        double w = (d1 ? t1 : 1 - t1) * (d2 ? t2 : 1 - t2) *
                                   (e1 ? s1 : 1 - s1) * (e2 ? s2 : 1 - s2) * (e3 ? s3 : 1 - s3);
                        acc += w * at((i1 + d1) % n1_, (i2 + d2) % n2_,
                                      std::min(k1 + e1, mv_ - 1), std::min(k2 + e2, mv_ - 1),
                                      std::min(k3 + e3, mv_ - 1));
                    }
    return acc;
}

double BoundaryDatum::value(const Vec2& x_par, const Vec3& v) const {
    if (kind_ == Kind::analytic_maxwellian) return amplitude_ * std::exp(-decay_ * norm2(v));
    return table_value(x_par, v);
}

Vec2 BoundaryDatum::grad_xpar(const Vec2& x_par, const Vec3& v) const {
    if (kind_ == Kind::analytic_maxwellian) return {0.0, 0.0};
    double h1 = 0.5 / n1_, h2 = 0.5 / n2_;
    double d1 = (table_value({x_par.x1 + h1, x_par.x2}, v) -
                 table_value({x_par.x1 - h1, x_par.x2}, v)) / (2 * h1);
    double d2 = (table_value({x_par.x1, x_par.x2 + h2}, v) -
                 table_value({x_par.x1, x_par.x2 - h2}, v)) / (2 * h2);
    return {d1, d2};
}

Vec3 BoundaryDatum::grad_v(const Vec2& x_par, const Vec3& v) const {
    if (kind_ == Kind::analytic_maxwellian) {
        double s = -2.0 * decay_ * value(x_par, v);
        return {s * v[0], s * v[1], s * v[2]};
    }
    double h = vmax_ / (mv_ - 1);
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
        Vec3 vp = v, vm = v;
        vp[i] += h;
        vm[i] -= h;
        g[i] = (table_value(x_par, vp) - table_value(x_par, vm)) / (2 * h);
    }
    return g;
}

double BoundaryDatum::sup_norm() const {
    if (kind_ == Kind::analytic_maxwellian) return amplitude_;
    double m = amp_tail_;
    for (double s : table_) m = std::max(m, s);
    return m;
}

double BoundaryDatum::weighted_sup(double beta) const {
    if (kind_ == Kind::analytic_maxwellian) {
        if (amplitude_ == 0.0) return 0.0;
        if (beta > decay_) return std::numeric_limits<double>::infinity();
        return amplitude_;  // sup at v = 0 when beta <= decay
    }
    // grid max plus the analytic tail bound amp_tail * exp((beta - decay) |v|^2)
    double m = 0.0;
    double h = vmax_ / (mv_ - 1);
    double hx = 2.0 * vmax_ / (mv_ - 1);
    std::size_t idx = 0;
    for (int i1 = 0; i1 < n1_; ++i1)
        for (int i2 = 0; i2 < n2_; ++i2)
            for (int k1 = 0; k1 < mv_; ++k1)
                for (int k2 = 0; k2 < mv_; ++k2)
                    for (int k3 = 0; k3 < mv_; ++k3, ++idx) {
                        double v1 = -vmax_ + k1 * hx, v2 = -vmax_ + k2 * hx, v3 = k3 * h;
                        double vv = v1 * v1 + v2 * v2 + v3 * v3;
                        m = std::max(m, std::exp(beta * vv) * table_[idx]);
                    }
    double vv = vmax_ * vmax_;
    double tail = (beta >= decay_tail_) ? std::numeric_limits<double>::infinity()
                                        : amp_tail_ * std::exp((beta - decay_tail_) * vv);
    return std::max(m, tail);
}

double BoundaryDatum::weighted_grad_sup(double beta_t) const {
    if (kind_ == Kind::analytic_maxwellian) {
        if (amplitude_ == 0.0) return 0.0;
        double d = decay_ - beta_t;
        if (d <= 0.0) return std::numeric_limits<double>::infinity();
        // sup_v 2 decay |v| A exp(-d |v|^2) = 2 decay A / sqrt(2 e d)
        return 2.0 * decay_ * amplitude_ / std::sqrt(2.0 * std::numbers::e * d);
    }
    // finite-difference gradient on the table nodes
    double m = 0.0;
    double h = vmax_ / (mv_ - 1);
    double hx = 2.0 * vmax_ / (mv_ - 1);
    for (int i1 = 0; i1 < n1_; ++i1)
        for (int i2 = 0; i2 < n2_; ++i2)
            for (int k1 = 0; k1 < mv_; ++k1)
                for (int k2 = 0; k2 < mv_; ++k2)
                    for (int k3 = 0; k3 < mv_; ++k3) {
                        double v1 = -vmax_ + k1 * hx, v2 = -vmax_ + k2 * hx, v3 = k3 * h;
                        Vec2 xp{-0.5 + double(i1) / n1_, -0.5 + double(i2) / n2_};
                        Vec3 v{v1, v2, v3};
                        Vec2 gx = grad_xpar(xp, v);
                        Vec3 gv = grad_v(xp, v);
                        double mag = std::sqrt(gx.x1 * gx.x1 + gx.x2 * gx.x2 + norm2(gv));
                        double vv = v1 * v1 + v2 * v2 + v3 * v3;
                        m = std::max(m, std::exp(beta_t * vv) * mag);
                    }
    return m;
}

// ---------------------------------------------------------------------------
// ConditionReport

const ConditionEntry* ConditionReport::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

bool ConditionReport::passed(const std::string& name) const {
    const auto* e = find(name);
    return e != nullptr && e->status == CheckStatus::pass;
}

bool ConditionReport::all_passed() const {
    for (const auto& e : entries)
        if (e.status != CheckStatus::pass) return false;
    return !entries.empty();
}

std::string ConditionReport::to_text() const {
    std::ostringstream os;
    for (const auto& e : entries) {
        const char* st = e.status == CheckStatus::pass ? "pass"
                        : e.status == CheckStatus::fail ? "FAIL"
                                                        : "unchecked";
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-18s lhs=%.6g rhs=%.6g margin=%.6g %s\n",
                      e.name.c_str(), e.lhs, e.rhs, e.margin, st);
        os << buf;
    }
    return os.str();
}

ConditionReport check_conditions(const Params& p, const ConditionInputs& in) {
    p.validate();
    ConditionReport rep;
    auto push = [&](const std::string& name, double lhs, double rhs, bool known) {
        ConditionEntry e;
        e.name = name;
        if (known) {
            e.lhs = lhs;
            e.rhs = rhs;
            e.margin = rhs - lhs;
            e.status = e.margin >= 0.0 ? CheckStatus::pass : CheckStatus::fail;
        }
        rep.entries.push_back(e);
    };

    // beta >= (8 pi^{3/2} C)^{2/5} ||e^{beta|v|^2} G||^{2/5} g^{-4/5}
    if (in.norm_wG) {
        double rhs = std::pow(8.0 * std::pow(kPi, 1.5) * p.green_constant, 0.4) *
                     std::pow(*in.norm_wG, 0.4) * std::pow(p.g, -0.8);
        push("condition_beta", rhs, p.beta, true);
    } else {
        push("condition_beta", 0, 0, false);
    }

    // data-regularity smallness with the logarithmic factor
    if (in.norm_wG && in.norm_wtG_grad && in.sup_grad_Phi) {
        double bt = p.beta_tilde, g = p.g;
        double inner = (1.0 + (*in.sup_grad_Phi) / g + 1.0 / (g * g * bt)) / (g * bt * bt) +
                       (1.0 + std::sqrt(bt) * (*in.sup_grad_Phi)) / std::pow(bt, 1.5);
        double lhs = (*in.norm_wG) *
                     std::log(std::numbers::e + inner * (*in.norm_wtG_grad));
        double rhs = g * g * bt * std::pow(p.beta, 1.5) / 16.0;
        push("condition_G", lhs, rhs, true);
    } else {
        push("condition_G", 0, 0, false);
    }

    // field-gradient bootstrap  ||grad Phi|| + sup ||grad Psi|| <= g/2
    if (in.sup_grad_Phi) {
        double lhs = *in.sup_grad_Phi + in.sup_grad_Psi.value_or(0.0);
        push("bootstrap", lhs, p.g / 2.0, true);
    } else {
        push("bootstrap", 0, 0, false);
    }

    // weighted-perturbation bootstrap
    if (in.norm_f_weighted) {
        double rhs = std::sqrt(std::numbers::ln2) * std::sqrt(p.g) * std::pow(p.beta, 1.5) /
                     (64.0 * kPi * (1.0 + 1.0 / (p.beta * p.g)));
        push("bootstrap_f", *in.norm_f_weighted, rhs, true);
    } else {
        push("bootstrap_f", 0, 0, false);
    }

    // dynamic-construction smallness  M <= sqrt(ln2)/(2^{17/2} pi) g^{3/2} beta^{5/2}
    if (in.data_M) {
        double rhs = std::sqrt(std::numbers::ln2) / (std::pow(2.0, 8.5) * kPi) *
                     std::pow(p.g, 1.5) * std::pow(p.beta, 2.5);
        push("choice_g", *in.data_M, rhs, true);
    } else {
        push("choice_g", 0, 0, false);
    }

    // M and L much smaller than the regularity scales
    if (in.data_M && in.data_L) {
        double bt = p.beta_tilde;
        double mscale = std::min(p.g * std::sqrt(bt) * std::pow(p.beta, 1.5),
                                 p.g * std::pow(p.beta, 2.5));
        double lscale = std::min(std::pow(bt, 1.5), p.g * p.g * std::pow(bt, 2.5));
        double lhs = std::max(*in.data_M / mscale, *in.data_L / lscale);
        push("choice_ML", lhs, in.ml_ratio, true);
    } else {
        push("choice_ML", 0, 0, false);
    }

    // uniqueness smallness  ||w_{bar beta} grad_v h|| < eps g^2 bar_beta^3
    if (in.norm_wbar_dvh && in.bar_beta > 0.0) {
        double rhs = in.epsilon_unique * p.g * p.g * std::pow(in.bar_beta, 3.0);
        push("condition_unique", *in.norm_wbar_dvh, rhs, true);
    } else {
        push("condition_unique", 0, 0, false);
    }

    return rep;
}

}  // namespace vpgrav
