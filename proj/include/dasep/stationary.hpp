#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "dasep/lattice.hpp"
#include "dasep/rng.hpp"
#include "dasep/sim.hpp"

namespace dasep {

struct NonConvergent : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Truncated q-Pochhammer symbol (a;q)_inf = prod_{k>=0} (1 - a q^k).
// Stops once the multiplicative tail correction is below tol: the remaining
// factors differ from 1 by at most |a| q^k / (1-q) in log, so the cut is safe.
inline double q_pochhammer(double a, double q, double tol = 1e-14) {
    if (!(std::fabs(q) < 1.0)) throw NonConvergent("q-Pochhammer requires |q| < 1");
    double prod = 1.0;
    double aq = a;
    for (int k = 0; k < 100000; ++k) {
        prod *= (1.0 - aq);
        double tail = std::fabs(aq) * std::fabs(q) / (1.0 - std::fabs(q));
        if (tail < tol) break;
        aq *= q;
    }
    return prod;
}

// ---------------------------------------------------------------------------
// One-point marginals of the stationary measure.
//
// Even sites:  P(s = 2n)   prop. alpha^{-2n}   q^{n(2n-1)} (1 + alpha^{-1} q^{2n})
// Odd sites:   P(s = 2n+1) prop. alpha^{-2n-1} q^{n(2n+1)} (1 + alpha^{-1} q^{2n+1})
//
// Both sectors normalize by (-1/alpha, -q alpha, q; q)_inf (Jacobi triple
// product). The odd weight carries alpha^{-(2n+1)}: that is the form
// consistent with one step of the stationary spatial Markov chain from the
// even marginal, and it matches the even-sector algebra at alpha = 1.

enum class Parity { Even, Odd };

struct MarginalPmf {
    Parity parity = Parity::Even;
    int64_t n_min = 0;  // support is s = 2n (even) or s = 2n+1 (odd), n in [n_min, n_max]
    int64_t n_max = 0;
    std::vector<double> probs;
    double truncation_error = 0.0;

    int64_t height_of(int64_t n) const { return parity == Parity::Even ? 2 * n : 2 * n + 1; }

    double mean_height() const {
        double m = 0.0;
        for (int64_t n = n_min; n <= n_max; ++n)
            m += probs[static_cast<size_t>(n - n_min)] * static_cast<double>(height_of(n));
        return m;
    }

    double moment_height(int power) const {
        double m = 0.0;
        for (int64_t n = n_min; n <= n_max; ++n)
            m += probs[static_cast<size_t>(n - n_min)] *
                 std::pow(static_cast<double>(height_of(n)), power);
        return m;
    }

    // Inverse-CDF draw of a height value.
    int64_t sample(RngStream& rng) const {
        double u = rng.uniform01();
        double acc = 0.0;
        for (int64_t n = n_min; n <= n_max; ++n) {
            acc += probs[static_cast<size_t>(n - n_min)];
            if (u <= acc) return height_of(n);
        }
        return height_of(n_max);
    }
};

namespace detail {
// log of the unnormalized weight
inline double log_weight(Parity parity, int64_t n, double log_q, double log_alpha) {
    if (parity == Parity::Even) {
        double e = static_cast<double>(n) * static_cast<double>(2 * n - 1);
        return -2.0 * static_cast<double>(n) * log_alpha + e * log_q +
               log1pexp(2.0 * static_cast<double>(n) * log_q - log_alpha);
    }
    double e = static_cast<double>(n) * static_cast<double>(2 * n + 1);
    return -static_cast<double>(2 * n + 1) * log_alpha + e * log_q +
           log1pexp(static_cast<double>(2 * n + 1) * log_q - log_alpha);
}
} // namespace detail

inline MarginalPmf marginal_pmf(const ModelParams& params, Parity parity, double tol = 1e-12) {
    if (!params.is_classic())
        throw std::invalid_argument("stationary marginals exist only for the classic model");
    const double log_q = -params.eps;
    const double log_alpha = std::log(params.alpha);

    // locate the mode, then extend until the weight ratio to it drops below tol*1e-3
    int64_t n_mode = 0;
    double best = detail::log_weight(parity, 0, log_q, log_alpha);
    for (int dir : {-1, +1}) {
        for (int64_t n = dir;; n += dir) {
            double w = detail::log_weight(parity, n, log_q, log_alpha);
            if (w > best) {
                best = w;
                n_mode = n;
            } else if (n * dir > std::llabs(n_mode) + 8) {
                break;
            }
        }
    }
    const double cut = std::log(tol) + std::log(1e-3);
    auto below = [&](int64_t n) {
        return detail::log_weight(parity, n, log_q, log_alpha) - best < cut;
    };
    int64_t lo = n_mode, hi = n_mode;
    while (!below(lo - 1)) --lo;
    while (!below(hi + 1)) ++hi;

    MarginalPmf pmf;
    pmf.parity = parity;
    pmf.n_min = lo;
    pmf.n_max = hi;
    pmf.probs.resize(static_cast<size_t>(hi - lo + 1));
    double sum = 0.0;
    for (int64_t n = lo; n <= hi; ++n) {
        double w = std::exp(detail::log_weight(parity, n, log_q, log_alpha) - best);
        pmf.probs[static_cast<size_t>(n - lo)] = w;
        sum += w;
    }
    for (double& p : pmf.probs) p /= sum;
    // geometric bound on the neglected tail mass, relative
    double edge = std::exp(detail::log_weight(parity, lo - 1, log_q, log_alpha) - best) +
                  std::exp(detail::log_weight(parity, hi + 1, log_q, log_alpha) - best);
    pmf.truncation_error = edge / sum / (1.0 - std::exp(log_q));
    return pmf;
}

// Normalization cross-check: sum of unnormalized weights over the support
// against the closed form (-1/alpha, -q alpha, q; q)_inf.
inline double marginal_norm_residual(const ModelParams& params, Parity parity) {
    const double q = params.q();
    const double alpha = params.alpha;
    const double log_q = -params.eps;
    const double log_alpha = std::log(alpha);
    MarginalPmf pmf = marginal_pmf(params, parity);
    double sum = 0.0;
    for (int64_t n = pmf.n_min; n <= pmf.n_max; ++n)
        sum += std::exp(detail::log_weight(parity, n, log_q, log_alpha));
    double closed = q_pochhammer(-1.0 / alpha, q) * q_pochhammer(-q * alpha, q) *
                    q_pochhammer(q, q);
    return sum / closed - 1.0;
}

// ---------------------------------------------------------------------------
// Exact sampler of the stationary initial data on a line window: draw
// s(x_max) from the parity-matching marginal, then walk leftward with the
// transition   s(x-1) = s(x)+1  w.p. q^{s(x)} / (alpha + q^{s(x)})
//              s(x-1) = s(x)-1  w.p. alpha    / (alpha + q^{s(x)}).

inline double stationary_up_probability(const ModelParams& params, int64_t s) {
    // q^s/(alpha+q^s) = 1/(1 + alpha q^{-s}) = 1/(1 + e^{eps s + ln alpha - ...})
    double t = params.eps * static_cast<double>(s) + std::log(params.alpha);
    return 1.0 / (1.0 + std::exp(std::min(t, 700.0)));
}

inline HeightFunction sample_stationary(const ModelParams& params, const Domain& domain,
                                        RngStream& rng) {
    if (!params.is_classic())
        throw std::invalid_argument("stationary sampler requires the classic model");
    const auto* w = std::get_if<LineWindow>(&domain);
    if (!w) throw std::invalid_argument("stationary sampler requires a line window");

    Parity parity = (((w->x_max % 2) + 2) % 2 == 0) ? Parity::Even : Parity::Odd;
    MarginalPmf pmf = marginal_pmf(params, parity);

    const int64_t n = w->x_max - w->x_min + 1;
    std::vector<int64_t> v(static_cast<size_t>(n));
    int64_t s = pmf.sample(rng);
    v[static_cast<size_t>(n - 1)] = s;
    for (int64_t x = w->x_max; x > w->x_min; --x) {
        double pu = stationary_up_probability(params, s);
        s += (rng.uniform01() <= pu) ? +1 : -1;
        v[static_cast<size_t>(x - 1 - w->x_min)] = s;
    }
    return HeightFunction(domain, std::move(v));
}

// ---------------------------------------------------------------------------
// Spatial Ornstein-Uhlenbeck sampler (the stationary measure's scaling limit):
//   dZ(X) = -theta Z(X) dX + sigma dW(X),  Z(0) ~ N(0, init_var),
// sampled exactly on an arbitrary grid, two-sided from the origin.

struct OuParams {
    double theta = 0.5;
    double sigma = 1.0;
    double init_var = 1.0;
};

inline std::vector<double> spatial_ou_sample(const OuParams& ou,
                                             const std::vector<double>& grid,
                                             RngStream& rng) {
    if (grid.empty()) throw std::invalid_argument("grid must be nonempty");
    for (size_t i = 1; i < grid.size(); ++i)
        if (grid[i] < grid[i - 1]) throw std::invalid_argument("grid must be sorted");
    if (!(ou.theta > 0)) throw std::invalid_argument("theta must be positive");

    double z0 = rng.gaussian(0.0, std::sqrt(ou.init_var));
    auto transition = [&](double z, double h) {
        double decay = std::exp(-ou.theta * h);
        double var = ou.sigma * ou.sigma * -std::expm1(-2.0 * ou.theta * h) / (2.0 * ou.theta);
        return decay * z + rng.gaussian(0.0, std::sqrt(var));
    };

    std::vector<double> out(grid.size());
    // split the grid at 0 and evolve outward on each side independently
    size_t first_nonneg = 0;
    while (first_nonneg < grid.size() && grid[first_nonneg] < 0.0) ++first_nonneg;

    double z = z0, pos = 0.0;
    for (size_t i = first_nonneg; i < grid.size(); ++i) {
        z = transition(z, grid[i] - pos);
        pos = grid[i];
        out[i] = z;
    }
    z = z0;
    pos = 0.0;
    for (size_t i = first_nonneg; i-- > 0;) {
        z = transition(z, pos - grid[i]);
        pos = grid[i];
        out[i] = z;
    }
    return out;
}

inline void write_pmf_csv(std::ostream& os, const MarginalPmf& pmf) {
    os << "n,prob\n";
    for (int64_t n = pmf.n_min; n <= pmf.n_max; ++n)
        os << n << "," << pmf.probs[static_cast<size_t>(n - pmf.n_min)] << "\n";
}

} // namespace dasep
