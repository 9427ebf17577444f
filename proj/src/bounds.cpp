#include "mips/bounds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "mips/error.hpp"

namespace mips {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kHalfPi = std::numbers::pi / 2.0;
// Margin keeping a certified optimum strictly inside the feasible region.
constexpr double kInteriorMargin = 1e-12;

double angle_between(const BoundInputs& in) {
    return std::acos(clamp_unit(in.dot_q0_p0 / (in.q0_norm * in.p0_norm)));
}

bool has_zero_term(const BoundInputs& in) {
    return in.rp == 0.0 || in.rq == 0.0 || in.p0_norm == 0.0 || in.q0_norm == 0.0;
}

// Maximizer of amp_a cos(phase_a - t) + amp_b cos(phase_b - t) over t in
// [lo, hi]. On the feasible region both cosines have non-negative argument
// cosines, so the restriction is concave and the max is the unconstrained
// peak if it falls inside, else an endpoint.
template <class Objective>
double coordinate_argmax(double amp_a, double phase_a, double amp_b, double phase_b, double lo, double hi,
                         Objective&& objective) {
    const double re = amp_a * std::cos(phase_a) + amp_b * std::cos(phase_b);
    const double im = amp_a * std::sin(phase_a) + amp_b * std::sin(phase_b);
    std::array<double, 3> candidates{lo, hi, lo};
    std::size_t n = 2;
    if (re != 0.0 || im != 0.0) {
        const double peak = std::atan2(im, re);
        const double mid = 0.5 * (lo + hi);
        const double shifted = peak + 2.0 * kPi * std::round((mid - peak) / (2.0 * kPi));
        if (shifted >= lo && shifted <= hi) candidates[n++] = shifted;
    }
    double best = candidates[0];
    double best_value = objective(best);
    for (std::size_t i = 1; i < n; ++i) {
        const double v = objective(candidates[i]);
        if (v > best_value) {
            best_value = v;
            best = candidates[i];
        }
    }
    return best;
}

}  // namespace

BoundInputs make_bound_inputs(Vector q0, double rq, Vector p0, double rp) {
    BoundInputs in;
    in.dot_q0_p0 = dot(q0, p0);
    in.q0_norm = norm(q0);
    in.p0_norm = norm(p0);
    in.rq = rq;
    in.rp = rp;
    return in;
}

double mip_point_ball(Vector q, double q_norm, Vector center, double radius) {
    return dot(q, center) + radius * q_norm;
}

double mip_ball_ball(const BoundInputs& in) {
    return in.dot_q0_p0 + in.rp * in.rq + in.rq * in.p0_norm + in.rp * in.q0_norm;
}

double mip_cone_ball(const BoundInputs& in) {
    if (in.p0_norm == 0.0) return in.rp;
    // An axis of zero length carries no direction: the cone is everything.
    if (in.q0_norm == 0.0) return in.p0_norm + in.rp;
    const double cos_phi = clamp_unit(in.dot_q0_p0 / (in.q0_norm * in.p0_norm));
    const double cos_omega = clamp_unit(in.cos_omega_q);
    if (cos_phi >= cos_omega) return in.p0_norm + in.rp;
    const double sin_phi = std::sqrt(std::max(0.0, 1.0 - cos_phi * cos_phi));
    const double sin_omega = std::sqrt(std::max(0.0, 1.0 - cos_omega * cos_omega));
    const double cos_gap = clamp_unit(cos_phi * cos_omega + sin_phi * sin_omega);
    return in.p0_norm * cos_gap + in.rp;
}

CapBall cap_enclosing_ball(double cos_omega) {
    if (cos_omega < 0.0) throw ContractViolation("cap_enclosing_ball needs a half-aperture of at most pi/2");
    const double c = std::min(cos_omega, 1.0);
    return {c, std::sqrt(std::max(0.0, 1.0 - c * c))};
}

double ball_ball_angle_objective(const BoundInputs& in, double phi, double theta_p, double theta_q) {
    return in.dot_q0_p0 + in.rp * in.rq * std::cos(phi - (theta_p + theta_q)) +
           in.rp * in.q0_norm * std::cos(phi - theta_p) + in.rq * in.p0_norm * std::cos(phi - theta_q);
}

double ball_ball_single_angle_objective(const BoundInputs& in, double phi, double theta_q) {
    const double q_sq = in.q0_norm * in.q0_norm + in.rq * in.rq + 2.0 * in.rq * in.q0_norm * std::cos(theta_q);
    return in.dot_q0_p0 + in.rq * in.p0_norm * std::cos(phi - theta_q) + in.rp * std::sqrt(std::max(0.0, q_sq));
}

OptimizedBound mip_ball_ball_opt2_detail(const BoundInputs& in, OptimizerSettings settings) {
    OptimizedBound out;
    const double closed = mip_ball_ball(in);
    out.value = closed;
    if (has_zero_term(in)) return out;

    out.outcome = OptimizerOutcome::fallback;
    const double phi = angle_between(in);
    // The maximizer sits at angles within [0, phi]; for phi <= pi/2 that
    // region is inside the box where f is concave.
    if (phi > kHalfPi) return out;

    const double a = in.rp * in.rq;
    const double b = in.rp * in.q0_norm;
    const double c = in.rq * in.p0_norm;
    auto f = [&](double tp, double tq) { return ball_ball_angle_objective(in, phi, tp, tq); };
    auto gradient = [&](double tp, double tq) {
        const double s = std::sin(phi - tp - tq);
        return std::array<double, 2>{a * s + b * std::sin(phi - tp), a * s + c * std::sin(phi - tq)};
    };
    auto residual = [&](double tp, double tq) {
        const auto g = gradient(tp, tq);
        return std::max(std::abs(g[0]) / (a + b), std::abs(g[1]) / (a + c));
    };
    auto feasible = [&](double tp, double tq, double margin) {
        const double lim = kHalfPi - margin;
        return std::abs(phi - tp) <= lim && std::abs(phi - tq) <= lim && std::abs(phi - tp - tq) <= lim;
    };

    double tp = 0.5 * phi;
    double tq = 0.5 * phi;
    std::size_t it = 0;
    double res = residual(tp, tq);
    for (; it < settings.iters && res >= settings.tol; ++it) {
        {
            const double lo = std::max(phi - kHalfPi, phi - tq - kHalfPi);
            const double hi = std::min(phi + kHalfPi, phi - tq + kHalfPi);
            tp = coordinate_argmax(a, phi - tq, b, phi, lo, hi, [&](double t) { return f(t, tq); });
        }
        {
            const double lo = std::max(phi - kHalfPi, phi - tp - kHalfPi);
            const double hi = std::min(phi + kHalfPi, phi - tp + kHalfPi);
            tq = coordinate_argmax(a, phi - tp, c, phi, lo, hi, [&](double t) { return f(tp, t); });
        }
        res = residual(tp, tq);
    }

    // Coordinate ascent crawls when the two angles are strongly coupled;
    // Newton converges quadratically on the concave interior.
    for (std::size_t polish = 0; polish < settings.iters && res >= settings.tol; ++polish, ++it) {
        const auto g = gradient(tp, tq);
        const double cs = std::cos(phi - tp - tq);
        const double hpp = -a * cs - b * std::cos(phi - tp);
        const double hqq = -a * cs - c * std::cos(phi - tq);
        const double hpq = -a * cs;
        const double det = hpp * hqq - hpq * hpq;
        if (!(det > 0.0)) break;
        double dp = -(hqq * g[0] - hpq * g[1]) / det;
        double dq = -(hpp * g[1] - hpq * g[0]) / det;
        const double base = f(tp, tq);
        bool moved = false;
        for (int halvings = 0; halvings < 40; ++halvings) {
            const double np = tp + dp;
            const double nq = tq + dq;
            if (feasible(np, nq, 0.0) && f(np, nq) >= base) {
                tp = np;
                tq = nq;
                moved = true;
                break;
            }
            dp *= 0.5;
            dq *= 0.5;
        }
        if (!moved) break;
        res = residual(tp, tq);
    }

    out.theta_p = tp;
    out.theta_q = tq;
    out.residual = res;
    out.iterations = it;
    if (res >= settings.tol || !feasible(tp, tq, kInteriorMargin)) return out;

    out.outcome = OptimizerOutcome::optimized;
    out.value = std::min(f(tp, tq), closed);
    return out;
}

double mip_ball_ball_opt2(const BoundInputs& in, std::size_t iters, double tol) {
    return mip_ball_ball_opt2_detail(in, {iters, tol}).value;
}

OptimizedBound mip_cone_ball_opt1_detail(const BoundInputs& in, OptimizerSettings settings) {
    OptimizedBound out;
    const double closed = mip_ball_ball(in);
    out.value = closed;
    if (has_zero_term(in)) return out;

    out.outcome = OptimizerOutcome::fallback;
    const double phi = angle_between(in);
    if (phi > kHalfPi) return out;

    // g is concave on [0, phi] when phi <= pi/2 and the global maximizer
    // lies there, so golden-section over that bracket is exact.
    auto g = [&](double t) { return ball_ball_single_angle_objective(in, phi, t); };
    constexpr double kInvPhi = 0.6180339887498949;
    double lo = 0.0;
    double hi = phi;
    double x1 = hi - kInvPhi * (hi - lo);
    double x2 = lo + kInvPhi * (hi - lo);
    double g1 = g(x1);
    double g2 = g(x2);
    std::size_t it = 0;
    for (; it < settings.iters && hi - lo > settings.tol; ++it) {
        if (g1 < g2) {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + kInvPhi * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - kInvPhi * (hi - lo);
            g1 = g(x1);
        }
    }
    double best_t = g1 >= g2 ? x1 : x2;
    double best = std::max(g1, g2);
    for (double t : {0.0, phi, 0.5 * (lo + hi)}) {
        const double v = g(t);
        if (v > best) {
            best = v;
            best_t = t;
        }
    }

    const double q_sq = in.q0_norm * in.q0_norm + in.rq * in.rq + 2.0 * in.rq * in.q0_norm * std::cos(best_t);
    const double deriv = in.rq * in.p0_norm * std::sin(phi - best_t) -
                         in.rp * in.rq * in.q0_norm * std::sin(best_t) / std::sqrt(std::max(q_sq, 1e-300));
    out.theta_q = best_t;
    out.residual = std::abs(deriv) / (in.rq * (in.p0_norm + in.rp));
    out.iterations = it;
    if (hi - lo > settings.tol) return out;

    out.outcome = OptimizerOutcome::optimized;
    out.value = std::min(best, closed);
    return out;
}

double mip_cone_ball_opt1(const BoundInputs& in, std::size_t iters, double tol) {
    return mip_cone_ball_opt1_detail(in, {iters, tol}).value;
}

std::string_view to_string(BoundKind kind) {
    switch (kind) {
        case BoundKind::thm1: return "thm1";
        case BoundKind::thm2: return "thm2";
        case BoundKind::thm3: return "thm3";
        case BoundKind::opt1: return "opt1";
        case BoundKind::opt2: return "opt2";
    }
    return "unknown";
}

BoundKind parse_bound_kind(std::string_view name) {
    if (name == "thm1") return BoundKind::thm1;
    if (name == "thm2") return BoundKind::thm2;
    if (name == "thm3") return BoundKind::thm3;
    if (name == "opt1") return BoundKind::opt1;
    if (name == "opt2") return BoundKind::opt2;
    throw ContractViolation("unknown bound '" + std::string(name) + "'");
}

}  // namespace mips
