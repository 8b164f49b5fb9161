#pragma once

#include <complex>
#include <vector>

#include "vpgrav/grid.hpp"

namespace vpgrav {

/// Interpolation order of the density inside the vertical kernel quadrature:
/// linear reproduces composite-trapezoid accuracy (2nd order), cubic the
/// Simpson class (4th order). The kernel factor is always integrated exactly.
enum class QuadOrder { linear, cubic };

/// Vertical Green kernel of (d^2/dx3^2 - a^2) on [0, inf) with a Dirichlet
/// condition at x3 = 0, by odd reflection: K(x3,y3) = w(x3-y3) - w(x3+y3)
/// with w(s) = |s|/2 for the zero mode and -exp(-a|s|)/(2a) otherwise.
struct ModeKernel {
    double a = 0.0;  // 2 pi |m|

    double w(double s) const;
    double K(double x3, double y3) const;
    double dK_dx3(double x3, double y3) const;  // away from the kink
};

/// One horizontal Fourier mode of the solve: vertical profiles of density,
/// potential, and the potential's vertical derivative.
struct ModeProfile {
    int m1 = 0, m2 = 0;
    std::vector<std::complex<double>> rho, phi, dphi;
};

struct SpectralField {
    std::vector<ModeProfile> modes;

    const ModeProfile* find(int m1, int m2) const;
};

/// Solved potential with Dirichlet trace zero: node values of Phi and grad
/// Phi, the boundary trace of the vertical derivative, on-demand Hessian,
/// and the per-mode spectral data. Off-node evaluation is horizontal
/// multilinear x vertical cubic (fields are smooth; distributions are not).
struct Field {
    SpatialGrid sg;
    int eta = +1;
    std::vector<double> phi;
    std::array<std::vector<double>, 3> grad;
    // symmetric Hessian components ordered 11,12,13,22,23,33
    std::array<std::vector<double>, 6> hess;
    bool derivatives_ready = false;
    bool hessian_ready = false;
    std::vector<double> dphi3_boundary;  // n1*n2 values of d3 Phi(x_par, 0)
    SpectralField spectral;

    double value_at(const Vec2& x_par, double x3) const;
    Vec3 grad_at(const Vec2& x_par, double x3) const;
    Mat3 hess_at(const Vec2& x_par, double x3) const;
    double boundary_dphi3_at(const Vec2& x_par) const;

    double sup_grad() const;
    double sup_abs_hess33() const;
    double sup_boundary_mixed_hess() const;  // |grad_par d3 Phi| on x3 = 0
};

/// Solve  Delta Phi = eta rho  on T^2 x (0, L3->inf) with Phi(.,0) = 0 by the
/// half-space mode kernels; mcut < 0 keeps every mode representable on the
/// grid; an mcut beyond the grid Nyquist is a configuration error.
Field solve_dirichlet(const DensityField& rho, int eta, int mcut = -1,
                      QuadOrder order = QuadOrder::cubic);

/// Fill grad, Hessian, and the boundary trace. Horizontal derivatives use the
/// mode multipliers; the vertical second derivative uses the exact mode
/// identity  d33 phi_m = (2 pi |m|)^2 phi_m + eta rho_m  instead of a
/// differentiated kernel.
void field_derivatives(Field& field, const DensityField& rho);

struct FluxPotential {
    SpatialGrid sg;
    std::vector<double> values;
    double sup_norm = 0.0;
};

/// Half-space solve of the divergence source in integration-by-parts form:
/// computes  Delta_0^{-1}(div b) = -int b(y) . grad_y G(x,y) dy  without ever
/// differencing b numerically.
FluxPotential flux_potential(const FluxField& b, int mcut = -1,
                             QuadOrder order = QuadOrder::cubic);

struct GreenSelfTest {
    double c2 = 0.0;             // Fourier constant of the singular part
    double c2_expected = 0.0;    // 1/(2 pi)
    double remainder_sup = 0.0;  // max |b0| over the sampled separations
    double envelope_C = 0.0;     // fitted C with |b0| <= C exp(-|x3-y3|)
    double decay_ratio = 0.0;    // |b0| at separation 1 over separation 3
    double empirical_constant = 0.0;  // measured elliptic-gradient constant
    bool converged = true;
    bool pass = false;

    std::string to_text() const;
};

/// Evaluate the Green function by truncated mode sums, subtract the explicit
/// singular parts, and verify that the remainder is bounded and decays like
/// exp(-|x3 - y3|) for separations >= 1. Also sweeps exponential densities to
/// measure the gradient-bound constant empirically.
GreenSelfTest green_selftest(int max_mode = 64);

}  // namespace vpgrav
