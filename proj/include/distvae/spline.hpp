#pragma once

// Linear isotonic spline quantile functions
//
//   D(alpha) = gamma + sum_{m=0}^{M} b_m (alpha - d_m)_+ ,   alpha in [0, 1]
//
// with knots 0 = d_0 < ... < d_M = 1 and non-negative partial sums of b, so
// that D is non-decreasing. The slope on segment [d_k, d_{k+1}] is
// s_k = b_0 + ... + b_k. Also provides the inverse (a conditional CDF) and the
// closed-form CRPS  2 * int_0^1 rho_alpha(x - D(alpha)) d alpha  with its
// gradient.

#include "distvae/error.hpp"
#include "distvae/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace distvae::spline {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct SplineCoeffs {
    Scalar gamma = Scalar(0);
    Vector<Scalar> b;      // M + 1 increments
    Vector<Scalar> knots;  // M + 1 knots, d_0 = 0, d_M = 1

    Eigen::Index segments() const { return knots.size() - 1; }
};

template <typename Scalar>
struct SplineInverse {
    Scalar alpha_tilde = Scalar(0);
    Eigen::Index segment = 0;
};

template <typename Scalar>
struct CrpsBreakdown {
    Scalar loss = Scalar(0);  // twice the alpha-integral of the check loss
    Scalar alpha_tilde = Scalar(0);
    Eigen::Index segment = 0;
};

template <typename Scalar>
struct CrpsGradient {
    Scalar gamma = Scalar(0);
    Vector<Scalar> b;
};

/// Gradient with respect to the unconstrained decoder outputs.
template <typename Scalar>
struct RawGradient {
    Scalar gamma_raw = Scalar(0);
    Vector<Scalar> slope_raw;
};

template <typename Scalar>
Vector<Scalar> uniform_knots(Eigen::Index knot_count) {
    if (knot_count < 1) throw Error("knot count M must be at least 1");
    Vector<Scalar> d(knot_count + 1);
    for (Eigen::Index m = 0; m <= knot_count; ++m) d(m) = static_cast<Scalar>(m) / static_cast<Scalar>(knot_count);
    d(knot_count) = Scalar(1);
    return d;
}

template <typename Scalar>
void check_knots(const Vector<Scalar>& knots) {
    if (knots.size() < 2) throw Error("a spline needs at least two knots");
    if (knots(0) != Scalar(0) || knots(knots.size() - 1) != Scalar(1))
        throw Error("spline knots must start at 0 and end at 1");
    for (Eigen::Index m = 1; m < knots.size(); ++m)
        if (!(knots(m) > knots(m - 1))) throw Error("spline knots must be strictly increasing");
}

/// Check (pinball) loss rho_alpha(u) = u (alpha - 1{u < 0}).
template <typename Scalar>
Scalar check_loss(Scalar alpha, Scalar u) {
    return u * (alpha - (u < Scalar(0) ? Scalar(1) : Scalar(0)));
}

/// Maps raw outputs to coefficients: the cumulative slopes are
/// softplus(slope_raw) and b holds their successive differences, so every
/// partial sum of b is non-negative whatever the raw values.
template <typename Scalar>
SplineCoeffs<Scalar> build_spline(Scalar gamma_raw, const Vector<Scalar>& slope_raw, const Vector<Scalar>& knots) {
    check_knots(knots);
    if (slope_raw.size() != knots.size()) throw Error("slope vector and knot vector differ in length");
    SplineCoeffs<Scalar> c;
    c.gamma = gamma_raw;
    c.knots = knots;
    c.b.resize(slope_raw.size());
    Scalar previous = Scalar(0);
    for (Eigen::Index m = 0; m < slope_raw.size(); ++m) {
        const Scalar s = nn::softplus(slope_raw(m));
        c.b(m) = s - previous;
        previous = s;
    }
    return c;
}

/// Cumulative slopes s_k = b_0 + ... + b_k.
template <typename Scalar>
Vector<Scalar> cumulative_slopes(const SplineCoeffs<Scalar>& c) {
    Vector<Scalar> s(c.b.size());
    Scalar acc = Scalar(0);
    for (Eigen::Index m = 0; m < c.b.size(); ++m) s(m) = acc += c.b(m);
    return s;
}

template <typename Scalar>
Scalar spline_eval(const SplineCoeffs<Scalar>& c, Scalar alpha) {
    if (!(alpha >= Scalar(0) && alpha <= Scalar(1)))
        throw Error("quantile level must lie in [0, 1], got " + std::to_string(static_cast<double>(alpha)));
    // Segment form, accumulated exactly as in knot_values. The running sum of
    // b can round to a tiny negative number on a flat segment; it is floored
    // at zero so the result stays monotone in alpha.
    Scalar value = c.gamma;
    Scalar slope = Scalar(0);
    for (Eigen::Index m = 0; m + 1 < c.knots.size(); ++m) {
        slope += c.b(m);
        const Scalar s = std::max(slope, Scalar(0));
        if (alpha <= c.knots(m + 1)) return value + s * (alpha - c.knots(m));
        value += s * (c.knots(m + 1) - c.knots(m));
    }
    return value;
}

/// D at every knot, D(d_0) .. D(d_M).
template <typename Scalar>
Vector<Scalar> knot_values(const SplineCoeffs<Scalar>& c) {
    Vector<Scalar> values(c.knots.size());
    values(0) = c.gamma;
    Scalar slope = Scalar(0);
    for (Eigen::Index m = 1; m < c.knots.size(); ++m) {
        slope += c.b(m - 1);
        values(m) = values(m - 1) + std::max(slope, Scalar(0)) * (c.knots(m) - c.knots(m - 1));
    }
    return values;
}

/// Solves D(alpha) = x. Values outside [D(0), D(1)] clamp to 0 or 1. When
/// D(alpha) = x on a whole interval the left end is returned; the segment
/// search scans left to right, so a knot image resolves to the segment on its
/// left.
template <typename Scalar>
SplineInverse<Scalar> spline_inverse(const SplineCoeffs<Scalar>& c, Scalar x) {
    const auto values = knot_values(c);
    const Eigen::Index M = c.segments();
    if (x <= values(0)) return {Scalar(0), 0};
    if (x > values(M)) return {Scalar(1), M - 1};
    Eigen::Index m0 = 0;
    while (m0 < M - 1 && x > values(m0 + 1)) ++m0;
    Scalar slope = Scalar(0);
    Scalar offset = Scalar(0);
    for (Eigen::Index m = 0; m <= m0; ++m) {
        slope += c.b(m);
        offset += c.b(m) * c.knots(m);
    }
    if (!(slope > Scalar(0))) return {c.knots(m0), m0};
    const Scalar alpha = (x - c.gamma + offset) / slope;
    return {std::clamp(alpha, c.knots(m0), c.knots(m0 + 1)), m0};
}

/// The b_m coefficient of the closed-form loss at a fixed alpha-tilde. This
/// is also the partial derivative of the loss wrt b_m.
template <typename Scalar>
Scalar crps_b_term(Scalar alpha_tilde, Scalar d) {
    const Scalar a = std::max(alpha_tilde, d);
    return (Scalar(1) - d * d * d) / Scalar(3) - d - a * a + Scalar(2) * a * d;
}

/// Closed form of the loss at an arbitrary alpha-tilde (not necessarily the
/// solution of D(alpha) = x).
template <typename Scalar>
Scalar crps_at(const SplineCoeffs<Scalar>& c, Scalar x, Scalar alpha_tilde) {
    Scalar loss = (Scalar(2) * alpha_tilde - Scalar(1)) * x + (Scalar(1) - Scalar(2) * alpha_tilde) * c.gamma;
    for (Eigen::Index m = 0; m < c.b.size(); ++m) loss += c.b(m) * crps_b_term(alpha_tilde, c.knots(m));
    return loss;
}

template <typename Scalar>
CrpsBreakdown<Scalar> crps_loss(const SplineCoeffs<Scalar>& c, Scalar x) {
    const auto inv = spline_inverse(c, x);
    return {std::max(Scalar(0), crps_at(c, x, inv.alpha_tilde)), inv.alpha_tilde, inv.segment};
}

/// (1/K) sum_k rho_{k/K}(x - D(k/K)), the finite-mixture reconstruction term.
template <typename Scalar>
Scalar crps_loss_finite_k(const SplineCoeffs<Scalar>& c, Scalar x, long K) {
    if (K < 1) throw Error("K must be positive");
    const auto values = knot_values(c);
    const auto slopes = cumulative_slopes(c);
    Scalar sum = Scalar(0);
    Eigen::Index seg = 0;
    const Eigen::Index M = c.segments();
    for (long k = 1; k <= K; ++k) {
        const Scalar alpha = static_cast<Scalar>(k) / static_cast<Scalar>(K);
        while (seg < M - 1 && alpha > c.knots(seg + 1)) ++seg;
        const Scalar d = values(seg) + slopes(seg) * (alpha - c.knots(seg));
        sum += check_loss(alpha, x - d);
    }
    return sum / static_cast<Scalar>(K);
}

/// (1/K) sum_{k=1}^{K-1} log(alpha_k (1 - alpha_k)); the k = K term is
/// log 0 and is dropped. Tends to -2.
template <typename Scalar = double>
Scalar mean_log_ald_scale(long K) {
    if (K < 2) throw Error("K must be at least 2");
    Scalar sum = Scalar(0);
    for (long k = 1; k < K; ++k) {
        const Scalar a = static_cast<Scalar>(k) / static_cast<Scalar>(K);
        sum += std::log(a * (Scalar(1) - a));
    }
    return sum / static_cast<Scalar>(K);
}

/// Gradient of crps_loss wrt gamma and b, holding alpha-tilde fixed; the
/// alpha-tilde derivative of the closed form vanishes at the solution.
template <typename Scalar>
CrpsGradient<Scalar> crps_grad(const SplineCoeffs<Scalar>& c, Scalar x) {
    const auto inv = spline_inverse(c, x);
    CrpsGradient<Scalar> g;
    g.gamma = Scalar(1) - Scalar(2) * inv.alpha_tilde;
    g.b.resize(c.b.size());
    for (Eigen::Index m = 0; m < c.b.size(); ++m) g.b(m) = crps_b_term(inv.alpha_tilde, c.knots(m));
    return g;
}

/// Chains a (gamma, b) gradient back through build_spline.
template <typename Scalar>
RawGradient<Scalar> chain_to_raw(const CrpsGradient<Scalar>& g, const Vector<Scalar>& slope_raw) {
    RawGradient<Scalar> out;
    out.gamma_raw = g.gamma;
    const Eigen::Index n = g.b.size();
    out.slope_raw.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        // b_k = s_k - s_{k-1}  =>  dL/ds_k = dL/db_k - dL/db_{k+1}
        const Scalar ds = g.b(k) - (k + 1 < n ? g.b(k + 1) : Scalar(0));
        out.slope_raw(k) = ds * nn::softplus_grad(slope_raw(k));
    }
    return out;
}

}  // namespace distvae::spline
