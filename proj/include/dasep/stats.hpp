#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasep/hopf_cole.hpp"
#include "dasep/sim.hpp"

namespace dasep {

struct GridMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientSamples : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Compensated accumulation and basic moments

class KahanSum {
  public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

  private:
    double s_ = 0.0;
    double c_ = 0.0;
};

struct MomentTable {
    size_t n = 0;
    double mean = 0.0, mean_se = 0.0;
    double var = 0.0, var_se = 0.0;
    double m3 = 0.0, m3_se = 0.0;  // central
    double m4 = 0.0, m4_se = 0.0;  // central
};

inline MomentTable moments(const std::vector<double>& xs) {
    MomentTable t;
    t.n = xs.size();
    if (t.n < 2) throw InsufficientSamples("moment estimation needs at least 2 samples");
    KahanSum s;
    for (double x : xs) s.add(x);
    t.mean = s.value() / static_cast<double>(t.n);
    KahanSum s2, s3, s4, s6, s8;
    for (double x : xs) {
        double d = x - t.mean;
        s2.add(d * d);
        s3.add(d * d * d);
        s4.add(d * d * d * d);
        s6.add(std::pow(d, 6));
        s8.add(std::pow(d, 8));
    }
    double n = static_cast<double>(t.n);
    t.var = s2.value() / (n - 1.0);
    t.m3 = s3.value() / n;
    t.m4 = s4.value() / n;
    t.mean_se = std::sqrt(t.var / n);
    double m2 = s2.value() / n, m4 = t.m4, m6 = s6.value() / n, m8 = s8.value() / n;
    t.var_se = std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
    t.m3_se = std::sqrt(std::max(m6 - t.m3 * t.m3, 0.0) / n);
    t.m4_se = std::sqrt(std::max(m8 - m4 * m4, 0.0) / n);
    return t;
}

// ---------------------------------------------------------------------------
// Special functions for p-values

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730951); }

namespace detail {
// regularized upper incomplete gamma Q(a, x)
inline double gamma_q(double a, double x) {
    if (x < 0 || a <= 0) throw std::invalid_argument("gamma_q domain");
    if (x == 0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {  // series for P, return 1-P
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    // continued fraction for Q
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}
} // namespace detail

inline double chi_squared_p_value(double chi2, int dof) {
    return detail::gamma_q(0.5 * dof, 0.5 * chi2);
}

// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{j-1} e^{-2 j^2 lambda^2}
inline double kolmogorov_q(double lambda) {
    if (lambda < 1e-8) return 1.0;
    double sum = 0.0, sign = 1.0;
    for (int j = 1; j <= 200; ++j) {
        double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += sign * term;
        if (term < 1e-16) break;
        sign = -sign;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

// ---------------------------------------------------------------------------
// Two-sample Kolmogorov-Smirnov

inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / a.size() -
                                  static_cast<double>(j) / b.size()));
    }
    return d;
}

// Exact two-sample null distribution by lattice-path counting (no ties):
// the fraction of interleavings whose running CDF gap stays strictly below d.
inline double ks_exact_p_value(double d, size_t n, size_t m) {
    // c[j] = number of admissible paths reaching (i, j); one row at a time
    std::vector<double> cur(m + 1, 0.0), nxt(m + 1, 0.0);
    auto inside = [&](size_t i, size_t j) {
        return std::fabs(static_cast<double>(i) / n - static_cast<double>(j) / m) <
               d - 1e-12;
    };
    cur[0] = 1.0;
    for (size_t j = 1; j <= m; ++j) cur[j] = inside(0, j) ? cur[j - 1] : 0.0;
    for (size_t i = 1; i <= n; ++i) {
        nxt[0] = inside(i, 0) ? cur[0] : 0.0;
        for (size_t j = 1; j <= m; ++j)
            nxt[j] = inside(i, j) ? nxt[j - 1] + cur[j] : 0.0;
        std::swap(cur, nxt);
    }
    double total = std::exp(std::lgamma(static_cast<double>(n + m + 1)) -
                            std::lgamma(static_cast<double>(n + 1)) -
                            std::lgamma(static_cast<double>(m + 1)));
    return 1.0 - cur[m] / total;
}

struct KsResult {
    double d = 0.0;
    double p = 1.0;
    bool exact = false;
};

inline KsResult two_sample_ks(const std::vector<double>& a, const std::vector<double>& b) {
    KsResult r;
    r.d = ks_statistic(a, b);
    size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) throw InsufficientSamples("ks needs nonempty samples");
    if (n + m <= 24) {
        r.p = ks_exact_p_value(r.d, n, m);
        r.exact = true;
    } else {
        double ne = static_cast<double>(n) * static_cast<double>(m) /
                    static_cast<double>(n + m);
        double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * r.d;
        r.p = kolmogorov_q(lambda);
    }
    return r;
}

// One-sample KS against a cdf
template <typename Cdf>
inline KsResult one_sample_ks(std::vector<double> xs, Cdf cdf) {
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    size_t n = xs.size();
    for (size_t i = 0; i < n; ++i) {
        double f = cdf(xs[i]);
        d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
    }
    KsResult r;
    r.d = d;
    double sn = std::sqrt(static_cast<double>(n));
    r.p = kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
    return r;
}

// ---------------------------------------------------------------------------
// Field ensembles and comparisons

struct FieldEnsemble {
    std::string meta;
    std::vector<double> Ts;
    std::vector<double> Xs;
    // samples[k] holds the field of trajectory k, flattened T-major
    std::vector<std::vector<double>> samples;
    std::vector<SeedRecord> seeds;

    size_t point_count() const { return Ts.size() * Xs.size(); }
    std::vector<double> at_point(size_t p) const {
        std::vector<double> v(samples.size());
        for (size_t k = 0; k < samples.size(); ++k) v[k] = samples[k][p];
        return v;
    }
};

struct PointComparison {
    size_t point = 0;
    double ks_d = 0.0;
    double ks_p = 1.0;
    MomentTable a;
    MomentTable b;
};

struct ComparisonReport {
    std::vector<PointComparison> points;
    std::vector<std::vector<double>> cov_a;  // cross-covariance of ensemble a
    std::vector<std::vector<double>> cov_b;
    double bonferroni_alpha = 0.01;
    bool pass = true;
};

inline std::vector<std::vector<double>> cross_covariance(const FieldEnsemble& e,
                                                         const std::vector<size_t>& pts) {
    size_t n = e.samples.size(), p = pts.size();
    std::vector<double> mean(p, 0.0);
    for (size_t k = 0; k < n; ++k)
        for (size_t i = 0; i < p; ++i) mean[i] += e.samples[k][pts[i]];
    for (double& m : mean) m /= static_cast<double>(n);
    std::vector<std::vector<double>> cov(p, std::vector<double>(p, 0.0));
    for (size_t k = 0; k < n; ++k)
        for (size_t i = 0; i < p; ++i)
            for (size_t j = i; j < p; ++j)
                cov[i][j] += (e.samples[k][pts[i]] - mean[i]) * (e.samples[k][pts[j]] - mean[j]);
    for (size_t i = 0; i < p; ++i)
        for (size_t j = i; j < p; ++j) {
            cov[i][j] /= static_cast<double>(n - 1);
            cov[j][i] = cov[i][j];
        }
    return cov;
}

inline ComparisonReport ensemble_compare(const FieldEnsemble& a, const FieldEnsemble& b,
                                         const std::vector<size_t>& points,
                                         double alpha = 0.01) {
    if (a.samples.size() < 50 || b.samples.size() < 50)
        throw InsufficientSamples("ensemble comparison needs at least 50 samples");
    ComparisonReport rep;
    rep.bonferroni_alpha = alpha / static_cast<double>(std::max<size_t>(points.size(), 1));
    for (size_t p : points) {
        PointComparison pc;
        pc.point = p;
        auto va = a.at_point(p), vb = b.at_point(p);
        KsResult ks = two_sample_ks(va, vb);
        pc.ks_d = ks.d;
        pc.ks_p = ks.p;
        pc.a = moments(va);
        pc.b = moments(vb);
        if (pc.ks_p < rep.bonferroni_alpha) rep.pass = false;
        rep.points.push_back(pc);
    }
    rep.cov_a = cross_covariance(a, points);
    rep.cov_b = cross_covariance(b, points);
    return rep;
}

// Cholesky-based positive-semidefiniteness check with tolerance.
inline bool is_positive_semidefinite(std::vector<std::vector<double>> m, double tol) {
    size_t n = m.size();
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            double s = m[i][j];
            for (size_t k = 0; k < j; ++k) s -= m[i][k] * m[j][k];
            if (i == j) {
                if (s < -tol) return false;
                m[i][i] = std::sqrt(std::max(s, 0.0));
            } else {
                m[i][j] = (m[j][j] > tol) ? s / m[j][j] : 0.0;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Macroscopic rescaling
//
//   shat_T(X) = sqrt(eps) ( s_{eps^{-2} T}(eps^{-1} X) - log_q alpha )   (line)
//   shat_T(X) = sqrt(eps) ( s_{eps^{-2} T}(eps^{-1} X) - chi X )        (ring)
//
// with linear interpolation off-lattice.

inline double height_interp(const HeightFunction& h, double x) {
    double fl = std::floor(x);
    int64_t xi = static_cast<int64_t>(fl);
    double frac = x - fl;
    if (frac == 0.0) return static_cast<double>(h.at(xi));
    return (1.0 - frac) * static_cast<double>(h.at(xi)) +
           frac * static_cast<double>(h.at(xi + 1));
}

inline void check_rescale_grid(const Trajectory& traj, double eps,
                               const std::vector<double>& Ts) {
    if (traj.snapshots.size() < Ts.size())
        throw GridMismatch("trajectory lacks snapshots for the requested times");
    for (size_t i = 0; i < Ts.size(); ++i) {
        double micro = Ts[i] / (eps * eps);
        if (std::fabs(traj.snapshots[i].first - micro) > 1e-9 * std::max(1.0, micro))
            throw GridMismatch("snapshot times are not the eps^{-2}-scaled grid");
    }
    if (traj.initial.is_ring()) {
        const auto& r = std::get<Ring>(traj.initial.domain());
        if (std::fabs(eps * static_cast<double>(r.period) - 1.0) > 1e-12)
            throw GridMismatch("ring rescaling requires eps = 1/N");
    }
}

// Returns values flattened T-major over (Ts, Xs).
inline std::vector<double> rescale_height(const Trajectory& traj, double eps, double alpha,
                                          const std::vector<double>& Ts,
                                          const std::vector<double>& Xs) {
    check_rescale_grid(traj, eps, Ts);
    const double root = std::sqrt(eps);
    const bool ring = traj.initial.is_ring();
    const double recenter = ring ? 0.0 : -std::log(alpha) / eps;  // log_q alpha
    const double chi = ring ? static_cast<double>(std::get<Ring>(traj.initial.domain()).winding) : 0.0;

    std::vector<double> out;
    out.reserve(Ts.size() * Xs.size());
    for (size_t ti = 0; ti < Ts.size(); ++ti) {
        const HeightFunction& h = traj.snapshots[ti].second;
        for (double X : Xs) {
            // reduce ring arguments to one period so the tilted field is
            // 1-periodic to the exact float
            double Xr = ring ? X - std::floor(X) : X;
            double s = height_interp(h, Xr / eps);
            out.push_back(root * (s - recenter - chi * Xr));
        }
    }
    return out;
}

// Z-field rescaling  Zcal_T(X) = eps^{-1/2} Z_{eps^{-2}T}(eps^{-1}X), with the
// Taylor-relation diagnostic  sup | e^{eps^{-2} T theta1} shat - Zcal |.
struct HopfColeRescaling {
    std::vector<double> values;       // flattened T-major
    double taylor_diagnostic = 0.0;
};

inline HopfColeRescaling rescale_hopf_cole(const Trajectory& traj, double eps,
                                           const std::vector<double>& Ts,
                                           const std::vector<double>& Xs) {
    check_rescale_grid(traj, eps, Ts);
    const double alpha = traj.params.alpha;
    const double shift = traj.params.log_q_alpha();
    const double root = std::sqrt(eps);

    HopfColeRescaling out;
    out.values.reserve(Ts.size() * Xs.size());
    for (size_t ti = 0; ti < Ts.size(); ++ti) {
        const HeightFunction& h = traj.snapshots[ti].second;
        double micro_t = traj.snapshots[ti].first;
        double growth = std::exp(theta1(eps) * micro_t);
        for (double X : Xs) {
            double x = X / eps;
            // interpolate Z linearly in x (not s)
            double fl = std::floor(x);
            int64_t xi = static_cast<int64_t>(fl);
            double frac = x - fl;
            double z0 = transform_z(eps, micro_t, static_cast<double>(h.at(xi)) - shift);
            double z = z0;
            if (frac != 0.0) {
                double z1 = transform_z(eps, micro_t, static_cast<double>(h.at(xi + 1)) - shift);
                z = (1.0 - frac) * z0 + frac * z1;
            }
            double zcal = z / root;
            out.values.push_back(zcal);
            double shat = root * (height_interp(h, x) - shift);
            out.taylor_diagnostic =
                std::max(out.taylor_diagnostic, std::fabs(growth * shat - zcal));
        }
    }
    (void)alpha;
    return out;
}

// ---------------------------------------------------------------------------
// Regularity diagnostics: exponential moments, increment moment ratios and
// the fitted spatial/temporal Hoelder exponents of an ensemble.

struct RegularityReport {
    double exp_moment_norm = 0.0;       // max over points of |e^{u|shat|}|_{2k}
    double spatial_ratio_max = 0.0;     // max |D shat|_{2k} / |DX|^{2 beta}
    double temporal_ratio_max = 0.0;    // max over time pairs (eps^2 v |DT|)^beta
    double spatial_exponent = 0.0;      // fitted log-log slope of |D shat|_2
    double temporal_exponent = 0.0;
    bool flagged = false;               // any ratio above the configured cap
};

inline double lp_norm_of_increments(const FieldEnsemble& e, size_t p1, size_t p2, int two_k) {
    KahanSum s;
    for (const auto& sample : e.samples)
        s.add(std::pow(std::fabs(sample[p1] - sample[p2]), two_k));
    return std::pow(s.value() / static_cast<double>(e.samples.size()), 1.0 / two_k);
}

inline RegularityReport regularity_report(const FieldEnsemble& e, double u, double beta,
                                          int k_max, double eps, double c0_cap = 1e9) {
    RegularityReport rep;
    const size_t nt = e.Ts.size(), nx = e.Xs.size();
    const int two_k = 2 * std::max(1, k_max);

    for (size_t p = 0; p < e.point_count(); ++p) {
        KahanSum s;
        for (const auto& sample : e.samples)
            s.add(std::exp(static_cast<double>(two_k) * u * std::fabs(sample[p])));
        rep.exp_moment_norm = std::max(
            rep.exp_moment_norm,
            std::pow(s.value() / static_cast<double>(e.samples.size()), 1.0 / two_k));
    }

    // spatial increments within each fixed-T slice
    std::vector<double> log_dx, log_norm;
    for (size_t ti = 0; ti < nt; ++ti) {
        for (size_t i = 0; i < nx; ++i) {
            for (size_t j = i + 1; j < nx; ++j) {
                double dxv = std::fabs(e.Xs[j] - e.Xs[i]);
                if (dxv == 0.0) continue;
                double nrm = lp_norm_of_increments(e, ti * nx + i, ti * nx + j, two_k);
                rep.spatial_ratio_max = std::max(
                    rep.spatial_ratio_max, nrm / std::pow(std::min(dxv, 1.0), 2.0 * beta));
                double n2 = lp_norm_of_increments(e, ti * nx + i, ti * nx + j, 2);
                if (n2 > 0) {
                    log_dx.push_back(std::log(dxv));
                    log_norm.push_back(std::log(n2));
                }
            }
        }
    }
    auto fit_slope = [](const std::vector<double>& xs, const std::vector<double>& ys) {
        if (xs.size() < 2) return 0.0;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
        }
        double n = static_cast<double>(xs.size());
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    rep.spatial_exponent = fit_slope(log_dx, log_norm);

    // temporal increments at each fixed X
    std::vector<double> log_dt, log_tnorm;
    for (size_t xi = 0; xi < nx; ++xi) {
        for (size_t i = 0; i < nt; ++i) {
            for (size_t j = i + 1; j < nt; ++j) {
                double dtv = std::fabs(e.Ts[j] - e.Ts[i]);
                if (dtv == 0.0) continue;
                double nrm = lp_norm_of_increments(e, i * nx + xi, j * nx + xi, two_k);
                rep.temporal_ratio_max =
                    std::max(rep.temporal_ratio_max,
                             nrm / std::pow(std::max(eps * eps, dtv), beta));
                double n2 = lp_norm_of_increments(e, i * nx + xi, j * nx + xi, 2);
                if (n2 > 0) {
                    log_dt.push_back(std::log(dtv));
                    log_tnorm.push_back(std::log(n2));
                }
            }
        }
    }
    rep.temporal_exponent = fit_slope(log_dt, log_tnorm);
    rep.flagged = rep.exp_moment_norm > c0_cap || rep.spatial_ratio_max > c0_cap ||
                  rep.temporal_ratio_max > c0_cap;
    return rep;
}

} // namespace dasep
