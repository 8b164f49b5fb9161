#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vpgrav/geometry.hpp"

namespace vpgrav {

/// Physical parameters of the half-space problem. eta = +1 selects the
/// attractive (gravitational) coupling, eta = -1 the repulsive (electrostatic)
/// one. beta is the Gaussian weight exponent, beta_tilde the one used for
/// derivative norms, and green_constant the elliptic-gradient constant that
/// the Green-function self-test calibrates empirically.
struct Params {
    double g = 1.0;
    int eta = +1;
    double beta = 1.0;
    double beta_tilde = 1.0;
    double green_constant = 4.0;

    void validate() const;
};

/// A point of phase space: horizontal position in the periodic cell
/// [-1/2,1/2)^2, height x3 >= 0, velocity in R^3.
struct PhasePoint {
    Vec2 x_par;
    double x3 = 0.0;
    Vec3 v;

    PhasePoint() = default;
    PhasePoint(Vec2 xp, double h, Vec3 vel) : x_par(wrap_cell(xp)), x3(h), v(vel) {}
};

/// Scalar potential evaluated at (x_par, x3).
using PotentialFn = std::function<double(const Vec2&, double)>;

enum class WeightKind { steady, dynamic };

/// Gaussian total-energy weight exp(beta (|v|^2 + 2 Phi [+ 2 Psi] + 2 g x3)).
/// At x3 = 0 both kinds reduce to exp(beta |v|^2) exactly because the
/// potentials satisfy a zero Dirichlet condition.
double evaluate_weight(WeightKind kind, const PhasePoint& z, const Params& p,
                       const PotentialFn& Phi, const PotentialFn* Psi = nullptr);

/// Exponent of the weight, for overflow-safe norm computations.
double weight_exponent(WeightKind kind, const PhasePoint& z, const Params& p,
                       const PotentialFn& Phi, const PotentialFn* Psi = nullptr);

/// Boundary-adapted kinetic distance
///   alpha = sqrt(v3^2 + x3^2 + 2 d3Phi(x_par,0) x3 + 2 g x3),
/// equal to |v3| on the boundary and vanishing only on the grazing set while
/// the field obeys the g/2 gradient bound. dPhi3_boundary evaluates
/// d(Phi)/dx3 at (x_par, 0).
double kinetic_distance(const PhasePoint& z, const Params& p,
                        const std::function<double(const Vec2&)>& dPhi3_boundary);

/// Prescribed inflow data G(x_par, v) on {x3 = 0, v3 > 0}.
class BoundaryDatum {
  public:
    enum class Kind { analytic_maxwellian, tabulated };

    static BoundaryDatum maxwellian(double amplitude, double decay_beta);

    /// Tabulated samples on a (x1, x2, v1, v2, v3>0) grid; values beyond the
    /// tabulated velocity box are bounded by amp_tail * exp(-decay_tail |v|^2).
    static BoundaryDatum tabulated(int n1, int n2, int mv, double vmax,
                                   std::vector<double> samples, double amp_tail,
                                   double decay_tail);

    Kind kind() const { return kind_; }
    bool horizontally_homogeneous() const;

    double value(const Vec2& x_par, const Vec3& v) const;
    Vec2 grad_xpar(const Vec2& x_par, const Vec3& v) const;
    Vec3 grad_v(const Vec2& x_par, const Vec3& v) const;

    /// sup over the inflow set of exp(beta |v|^2) G.
    double weighted_sup(double beta) const;
    /// sup of exp(beta_t |v|^2) |grad_{x_par,v} G|.
    double weighted_grad_sup(double beta_t) const;
    /// plain sup norm of G.
    double sup_norm() const;

    double amplitude() const { return amplitude_; }
    double decay() const { return decay_; }

  private:
    BoundaryDatum() = default;

    Kind kind_ = Kind::analytic_maxwellian;
    double amplitude_ = 0.0;  // analytic: G = amplitude * exp(-decay |v|^2)
    double decay_ = 1.0;

    // tabulated data
    int n1_ = 0, n2_ = 0, mv_ = 0;
    double vmax_ = 0.0;
    std::vector<double> table_;
    double amp_tail_ = 0.0, decay_tail_ = 1.0;

    double table_value(const Vec2& x_par, const Vec3& v) const;
};

enum class CheckStatus { pass, fail, unchecked };

struct ConditionEntry {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;  // rhs - lhs for "lhs <= rhs" style conditions
    CheckStatus status = CheckStatus::unchecked;
};

struct ConditionReport {
    std::vector<ConditionEntry> entries;

    const ConditionEntry* find(const std::string& name) const;
    bool passed(const std::string& name) const;
    bool all_passed() const;
    std::string to_text() const;
};

/// Norms feeding the smallness/compatibility conditions. Leave a field empty
/// to have the dependent conditions reported as "unchecked".
struct ConditionInputs {
    std::optional<double> norm_wG;         // || e^{beta |v|^2} G ||_inf on the inflow set
    std::optional<double> norm_wtG_grad;   // || e^{beta_t |v|^2} grad G ||_inf
    std::optional<double> sup_grad_Phi;    // || grad Phi ||_inf
    std::optional<double> sup_grad_Psi;    // sup_t || grad Psi(t) ||_inf
    std::optional<double> norm_f_weighted; // sup_t || e^{beta/2 (|v|^2+g x3)} f(t) ||_inf
    std::optional<double> data_M;          // constant M of the dynamic construction
    std::optional<double> data_L;          // constant L of the dynamic regularity theorem
    std::optional<double> norm_wbar_dvh;   // || w_{bar beta} grad_v h ||_inf
    double bar_beta = 0.0;                 // exponent used for norm_wbar_dvh
    double epsilon_unique = 1e-2;          // smallness factor of the uniqueness criterion
    double ml_ratio = 0.1;                 // "much smaller than" threshold for M and L
};

/// Evaluate every smallness/compatibility condition with explicit margins:
/// the weight-exponent condition, the data-regularity condition, the two
/// bootstrap bounds, the dynamic-construction smallness, the M/L regularity
/// smallness, and the uniqueness smallness.
ConditionReport check_conditions(const Params& p, const ConditionInputs& in);

}  // namespace vpgrav
