#pragma once

#include <cstddef>
#include <string_view>

#include "mips/linalg.hpp"

namespace mips {

/// Scalar summary of a (query region, reference ball) pair. Every bound only
/// needs these numbers, so the inner product between the two centers is
/// computed once per prune test and passed in.
struct BoundInputs {
    double dot_q0_p0 = 0.0;
    double p0_norm = 0.0;
    double rp = 0.0;
    double q0_norm = 0.0;
    double rq = 0.0;           // ball-ball only
    double cos_omega_q = 1.0;  // cone-ball only
};

BoundInputs make_bound_inputs(Vector q0, double rq, Vector p0, double rp);

/// <q, c> + R ||q||.
double mip_point_ball(Vector q, double q_norm, Vector center, double radius);

/// <q0,p0> + Rp Rq + Rq ||p0|| + Rp ||q0||.
double mip_ball_ball(const BoundInputs& in);

/// Upper bound on max <q, p> over unit q in the cone (axis q0, half-aperture
/// acos(cos_omega_q)) and p in the ball (p0, Rp).
double mip_cone_ball(const BoundInputs& in);

/// Ball enclosing the spherical cap of unit vectors within half-aperture
/// omega of a unit axis: center cos(omega) axis, radius sin(omega). Only
/// defined for omega <= pi/2.
struct CapBall {
    double center_scale;
    double radius;
};
CapBall cap_enclosing_ball(double cos_omega);

struct OptimizerSettings {
    std::size_t iters = 100;
    double tol = 1e-8;
};

enum class OptimizerOutcome {
    closed_form,  // a radius or norm vanished; the ball-ball closed form is exact
    fallback,     // range assumptions failed or no certificate; ball-ball closed form
    optimized,    // certified stationary point inside the feasible region
};

struct OptimizedBound {
    double value = 0.0;
    OptimizerOutcome outcome = OptimizerOutcome::closed_form;
    double theta_p = 0.0;
    double theta_q = 0.0;
    double residual = 0.0;
    std::size_t iterations = 0;
};

/// Two-angle tightening of the ball-ball bound. Maximizes
///   f(tp, tq) = <q0,p0> + Rp Rq cos(phi - tp - tq) + Rp ||q0|| cos(phi - tp)
///               + Rq ||p0|| cos(phi - tq)
/// by projected coordinate ascent with a Newton polish; the result is
/// min(max f, mip_ball_ball).
OptimizedBound mip_ball_ball_opt2_detail(const BoundInputs& in, OptimizerSettings settings = {});
double mip_ball_ball_opt2(const BoundInputs& in, std::size_t iters = 100, double tol = 1e-8);

/// One-angle tightening: golden-section maximization of
///   g(tq) = <p0,q0> + Rq ||p0|| cos(phi - tq) + Rp sqrt(||q0||^2 + Rq^2 + 2 Rq ||q0|| cos tq);
/// returns min(max g, mip_ball_ball).
OptimizedBound mip_cone_ball_opt1_detail(const BoundInputs& in, OptimizerSettings settings = {});
double mip_cone_ball_opt1(const BoundInputs& in, std::size_t iters = 100, double tol = 1e-8);

/// The two-angle objective and its one-angle reduction, exposed for oracles.
double ball_ball_angle_objective(const BoundInputs& in, double phi, double theta_p, double theta_q);
double ball_ball_single_angle_objective(const BoundInputs& in, double phi, double theta_q);

enum class BoundKind { thm1, thm2, thm3, opt1, opt2 };

std::string_view to_string(BoundKind kind);
BoundKind parse_bound_kind(std::string_view name);

}  // namespace mips
