#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "dasep/lattice.hpp"
#include "dasep/sim.hpp"

namespace dasep {

struct MissingEventLog : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// theta1 = (1 - sqrt(q))^2, theta2 = 2 sqrt(q), q = e^{-eps}
inline double theta1(double eps) {
    double r = -std::expm1(-eps / 2.0);  // 1 - sqrt(q)
    return r * r;
}
inline double theta2(double eps) { return 2.0 * std::exp(-eps / 2.0); }

// Z_t(x) = e^{theta1 t} (q^{-s/2} - q^{s/2}) at effective height s (alpha
// already folded in as a shift): q^{-s/2} - q^{s/2} = 2 sinh(eps s / 2).
inline double transform_w(double eps, double s_eff) {
    return 2.0 * std::sinh(0.5 * eps * s_eff);
}

inline double transform_z(double eps, double t, double s_eff) {
    return std::exp(theta1(eps) * t) * transform_w(eps, s_eff);
}

// ---------------------------------------------------------------------------
// Transform of a whole trajectory

struct TransformField {
    std::vector<double> times;
    std::vector<int64_t> sites;
    std::vector<std::vector<double>> z;  // [time][site]
    double theta1 = 0.0;
    double theta2 = 0.0;
};

inline TransformField hopf_cole_transform(const Trajectory& traj, double alpha) {
    if (!traj.params.is_classic())
        throw std::invalid_argument("the transform applies to the classic model");
    const double eps = traj.params.eps;
    const double shift = -std::log(alpha) / eps;  // log_q(alpha)

    TransformField f;
    f.theta1 = theta1(eps);
    f.theta2 = theta2(eps);
    const HeightFunction& h0 = traj.initial;
    int64_t x0 = h0.x_begin();
    f.sites.resize(static_cast<size_t>(h0.site_count()));
    for (int64_t i = 0; i < h0.site_count(); ++i) f.sites[static_cast<size_t>(i)] = x0 + i;
    for (const auto& [t, h] : traj.snapshots) {
        f.times.push_back(t);
        std::vector<double> row(f.sites.size());
        for (size_t i = 0; i < f.sites.size(); ++i)
            row[i] = transform_z(eps, t, static_cast<double>(h.values()[i]) - shift);
        f.z.push_back(std::move(row));
    }
    return f;
}

// ---------------------------------------------------------------------------
// Generator identity:  L Z(x) + theta1 Z(x) = (theta2/2) Lap Z(x)
// for every local configuration. The sweep enumerates all four slope
// patterns around x and all heights in the range.

// Residual for one local configuration (heights may be shifted by a
// non-integer amount when alpha is folded in).
inline double generator_residual(double eps, double s_left, double s_mid, double s_right,
                                 double t = 0.0) {
    const double th1 = theta1(eps);
    const double th2 = theta2(eps);
    const double e = std::exp(th1 * t);
    double z = e * transform_w(eps, s_mid);
    double zl = e * transform_w(eps, s_left);
    double zr = e * transform_w(eps, s_right);
    double gen = 0.0;
    if (s_mid > s_left && s_mid > s_right) {
        JumpRates r = rates_for_exponent(eps, s_mid);
        gen = r.down * (e * transform_w(eps, s_mid - 2.0) - z);
    } else if (s_mid < s_left && s_mid < s_right) {
        JumpRates r = rates_for_exponent(eps, s_mid);
        gen = r.up * (e * transform_w(eps, s_mid + 2.0) - z);
    }
    return gen + th1 * z - 0.5 * th2 * (zl - 2.0 * z + zr);
}

struct GeneratorCheck {
    double max_residual = 0.0;
    double max_abs_z = 0.0;
};

inline GeneratorCheck generator_identity_check(const std::vector<double>& eps_grid,
                                               int64_t s_min, int64_t s_max,
                                               double alpha = 1.0, double t = 0.0) {
    GeneratorCheck out;
    for (double eps : eps_grid) {
        const double shift = -std::log(alpha) / eps;
        for (int64_t s = s_min; s <= s_max; ++s) {
            double sm = static_cast<double>(s) - shift;
            for (int dl : {-1, +1}) {
                for (int dr : {-1, +1}) {
                    double r = generator_residual(eps, sm + dl, sm, sm + dr, t);
                    out.max_residual = std::max(out.max_residual, std::fabs(r));
                    out.max_abs_z = std::max(out.max_abs_z,
                                             std::fabs(transform_z(eps, t, sm)));
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quadratic variation of the transform martingale.
//
// exact:   d<M(x)>/dt = eta_down a_down (Z(s-2)-Z(s))^2 + eta_up a_up (Z(s+2)-Z(s))^2
// leading: (eps^2 e^{2 t theta1}/4) q^{-1} (1+q^{-s}) (q^{(s_l+s_r)/2}+1)
//          (1 - grad_plus s * grad_minus s)
// bound:   2 eps^2 (Z^2 + 2 e^{2 t theta1})

struct QvRate {
    double exact = 0.0;
    double leading = 0.0;
    double upper_bound = 0.0;
};

inline QvRate qv_rate(double eps, double s_left, double s_mid, double s_right, double t) {
    const double th1 = theta1(eps);
    const double q = std::exp(-eps);
    const double e2 = std::exp(2.0 * th1 * t);
    QvRate out;

    if (s_mid > s_left && s_mid > s_right) {
        JumpRates r = rates_for_exponent(eps, s_mid);
        double dw = transform_w(eps, s_mid - 2.0) - transform_w(eps, s_mid);
        out.exact = r.down * dw * dw * e2;
    } else if (s_mid < s_left && s_mid < s_right) {
        JumpRates r = rates_for_exponent(eps, s_mid);
        double dw = transform_w(eps, s_mid + 2.0) - transform_w(eps, s_mid);
        out.exact = r.up * dw * dw * e2;
    }

    double grad_p = s_right - s_mid;
    double grad_m = s_mid - s_left;
    out.leading = 0.25 * eps * eps * e2 / q * (1.0 + std::exp(eps * s_mid)) *
                  (std::exp(-0.5 * eps * (s_left + s_right)) + 1.0) *
                  (1.0 - grad_p * grad_m);

    double z = transform_z(eps, t, s_mid);
    out.upper_bound = 2.0 * eps * eps * (z * z + 2.0 * e2);
    return out;
}

inline QvRate predicted_qv_rate(const HeightFunction& h, int64_t x, double t,
                                const ModelParams& params) {
    if (!params.is_classic())
        throw std::invalid_argument("qv formulas apply to the classic model");
    double shift = params.log_q_alpha();
    return qv_rate(params.eps, static_cast<double>(h.neighbour(x, -1)) - shift,
                   static_cast<double>(h.at(x)) - shift,
                   static_cast<double>(h.neighbour(x, +1)) - shift, t);
}

// Residual of the gradient identity:
//   eps^{-2} e^{-2 t theta1} grad+ Z grad- Z  =  grad+ s grad- s  +  B_eps
// with |B_eps| <= (e^{-t theta1} Z)^2 / 4 + C eps.
inline double gradient_identity_residual(const HeightFunction& h, int64_t x, double t,
                                         const ModelParams& params) {
    const double eps = params.eps;
    const double shift = params.log_q_alpha();
    double sm = static_cast<double>(h.at(x)) - shift;
    double sl = static_cast<double>(h.neighbour(x, -1)) - shift;
    double sr = static_cast<double>(h.neighbour(x, +1)) - shift;
    double z = transform_z(eps, t, sm);
    double zl = transform_z(eps, t, sl);
    double zr = transform_z(eps, t, sr);
    double gp = (zr - z), gm = (z - zl);
    double grad_s = (sr - sm) * (sm - sl);
    return std::exp(-2.0 * theta1(eps) * t) * gp * gm / (eps * eps) - grad_s;
}

// ---------------------------------------------------------------------------
// Martingale path extraction:
//   M_t(x) = Z_t(x) - Z_0(x) - int_0^t (theta2/2) Lap Z_r(x) dr
// with the time integral evaluated in closed form between events (the state
// is frozen there, so Lap Z_r = e^{theta1 r} * const).

struct MartingalePath {
    int64_t site = 0;
    std::vector<double> times;
    std::vector<double> m;
    std::vector<double> qv_emp;          // sum of squared jumps of M up to t
    std::vector<double> qv_pred_exact;   // integral of the exact rate
    std::vector<double> qv_pred_leading; // integral of the printed leading form
    int bound_violations = 0;            // intervals where exact rate > eq-(2) bound
};

inline MartingalePath martingale_path(const Trajectory& traj, int64_t x,
                                      const std::vector<double>& checkpoint_times) {
    if (traj.events.empty() && traj.event_count > 0)
        throw MissingEventLog("martingale extraction needs the event log");
    if (!traj.params.is_classic())
        throw std::invalid_argument("martingale path applies to the classic model");

    const double eps = traj.params.eps;
    const double th1 = theta1(eps);
    const double th2 = theta2(eps);
    const double shift = traj.params.log_q_alpha();
    const HeightFunction& h0 = traj.initial;

    double sl = static_cast<double>(h0.at(x - 1)) - shift;
    double sm = static_cast<double>(h0.at(x)) - shift;
    double sr = static_cast<double>(h0.at(x + 1)) - shift;

    // event sites live in the storage domain; resolve the three neighbours
    int64_t period = h0.is_ring() ? std::get<Ring>(h0.domain()).period : 0;
    auto wrap = [&](int64_t y) {
        return period > 0 ? ((y % period) + period) % period : y;
    };
    const int64_t id_l = wrap(x - 1), id_m = wrap(x), id_r = wrap(x + 1);

    MartingalePath out;
    out.site = x;
    out.times = checkpoint_times;
    out.m.resize(checkpoint_times.size());
    out.qv_emp.resize(checkpoint_times.size());
    out.qv_pred_exact.resize(checkpoint_times.size());
    out.qv_pred_leading.resize(checkpoint_times.size());

    const double z0 = transform_w(eps, sm);  // Z_0(x), e^{0}=1
    double lap_w = transform_w(eps, sl) - 2.0 * transform_w(eps, sm) + transform_w(eps, sr);
    QvRate qr0 = qv_rate(eps, sl, sm, sr, 0.0);
    double qv0 = qr0.exact;    // rate at t=0 scale
    double lead0 = qr0.leading;

    double t_prev = 0.0;
    double integral = 0.0;       // int (theta2/2) Lap Z dr
    double qv_exact_int = 0.0;   // int exact rate dr
    double qv_lead_int = 0.0;
    double jumps_sq = 0.0;
    size_t ck = 0;
    // rate/bound ratio is constant between events, so checking each visited
    // state covers the whole path
    int violations = (qr0.exact > qr0.upper_bound * (1.0 + 1e-12)) ? 1 : 0;

    auto advance_to = [&](double t) {
        // frozen interval [t_prev, t]: Z-quantities scale as e^{theta1 r}
        double g1 = (std::exp(th1 * t) - std::exp(th1 * t_prev)) / th1;
        double g2 = (std::exp(2.0 * th1 * t) - std::exp(2.0 * th1 * t_prev)) / (2.0 * th1);
        integral += 0.5 * th2 * lap_w * g1;
        qv_exact_int += qv0 * g2;
        qv_lead_int += lead0 * g2;
        t_prev = t;
    };
    auto emit_until = [&](double cut) {
        while (ck < checkpoint_times.size() && checkpoint_times[ck] < cut) {
            double t = checkpoint_times[ck];
            advance_to(t);
            out.m[ck] = transform_z(eps, t, sm) - z0 - integral;
            out.qv_emp[ck] = jumps_sq;
            out.qv_pred_exact[ck] = qv_exact_int;
            out.qv_pred_leading[ck] = qv_lead_int;
            ++ck;
        }
    };

    for (const Event& ev : traj.events) {
        if (ev.site != id_l && ev.site != id_m && ev.site != id_r) continue;
        emit_until(ev.time);
        if (ck >= checkpoint_times.size()) break;
        advance_to(ev.time);
        double delta = 2.0 * static_cast<double>(ev.direction);
        if (ev.site == id_m) {
            double w_before = transform_w(eps, sm);
            sm += delta;
            double dz = std::exp(th1 * ev.time) * (transform_w(eps, sm) - w_before);
            jumps_sq += dz * dz;
        } else if (ev.site == id_l) {
            sl += delta;
        } else {
            sr += delta;
        }
        lap_w = transform_w(eps, sl) - 2.0 * transform_w(eps, sm) + transform_w(eps, sr);
        QvRate qr = qv_rate(eps, sl, sm, sr, 0.0);
        qv0 = qr.exact;
        lead0 = qr.leading;
        if (qr.exact > qr.upper_bound * (1.0 + 1e-12)) ++violations;
    }
    if (!checkpoint_times.empty()) emit_until(checkpoint_times.back() + 1.0);
    out.bound_violations = violations;
    return out;
}

// Long-format exports: `time,site,value`.
inline void write_transform_csv(std::ostream& os, const TransformField& f) {
    os << "time,site,value\n";
    for (size_t ti = 0; ti < f.times.size(); ++ti)
        for (size_t si = 0; si < f.sites.size(); ++si) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", f.z[ti][si]);
            os << f.times[ti] << "," << f.sites[si] << "," << buf << "\n";
        }
}

inline void write_martingale_csv(std::ostream& os, const MartingalePath& mp) {
    os << "time,site,value\n";
    for (size_t i = 0; i < mp.times.size(); ++i) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", mp.m[i]);
        os << mp.times[i] << "," << mp.site << "," << buf << "\n";
    }
}

// Identity q^{-/+ s/2} = sqrt(1 + w^2/4) +/- w/2 where w = q^{-s/2} - q^{s/2};
// returns the worst absolute residual over the two signs.
inline double q_to_z_residual(double eps, double s_eff) {
    double w = transform_w(eps, s_eff);
    double root = std::sqrt(1.0 + 0.25 * w * w);
    double r1 = std::exp(0.5 * eps * s_eff) - (root + 0.5 * w);
    double r2 = std::exp(-0.5 * eps * s_eff) - (root - 0.5 * w);
    return std::max(std::fabs(r1), std::fabs(r2));
}

} // namespace dasep
