#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "dasep/lattice.hpp"
#include "dasep/rng.hpp"

namespace dasep {

// ---------------------------------------------------------------------------
// Jump rates.
//
// Classic:      s(x) -> s(x)-2 at rate q(1+alpha q^{-s})/(1+alpha q^{-s+1})
//               s(x) -> s(x)+2 at rate  (1+alpha q^{-s})/(1+alpha q^{-s-1})
// Generalized:  same with alpha q^{-s} replaced by q^{-f(s - chi x/N)}.
//
// Both reduce to the alpha=1 classic rates evaluated at the shifted exponent
// g = s - log_q(alpha), so everything below works with g directly.

// log(1 + e^x) without overflow.
inline double log1pexp(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct JumpRates {
    double down = 0.0;
    double up = 0.0;
};

// Rates of the alpha=1 classic model at (possibly non-integer) height g.
// Both lie in (q, 1): down = q(1+e^{eps g})/(1+e^{eps(g-1)}),
// up = (1+e^{eps g})/(1+e^{eps(g+1)}).
inline JumpRates rates_for_exponent(double eps, double g) {
    double le = log1pexp(eps * g);
    JumpRates r;
    // clamp float roundoff at the open upper bound; the engine's rejection
    // sampler relies on rate <= 1
    r.down = std::min(std::exp(le - log1pexp(eps * (g - 1.0)) - eps), 1.0);
    r.up = std::min(std::exp(le - log1pexp(eps * (g + 1.0))), 1.0);
    return r;
}

// Effective exponent at site x: classic uses s - log_q(alpha); generalized
// uses f(s - chi x / N).
inline double rate_exponent(const ModelParams& p, int64_t s, int64_t x) {
    if (p.is_classic()) return static_cast<double>(s) - p.log_q_alpha();
    const auto& g = std::get<Generalized>(p.rate_function);
    double tilt = 0.0;
    if (const auto* r = std::get_if<Ring>(&p.domain))
        tilt = static_cast<double>(r->winding) * static_cast<double>(x) /
               static_cast<double>(r->period);
    return g.f(static_cast<double>(s) - tilt);
}

inline JumpRates jump_rates(const ModelParams& p, const HeightFunction& h, int64_t x) {
    return rates_for_exponent(p.eps, rate_exponent(p, h.at(x), x));
}

// ---------------------------------------------------------------------------
// Trajectory record

struct Event {
    double time = 0.0;
    int64_t site = 0;
    int8_t direction = 0;  // +1 up, -1 down (height moves by 2*direction)
};

struct SeedRecord {
    std::uint64_t master = 0;
    std::uint64_t index = 0;
};

struct Trajectory {
    ModelParams params;
    HeightFunction initial;
    std::vector<Event> events;  // empty unless keep_events was requested
    std::vector<std::pair<double, HeightFunction>> snapshots;
    SeedRecord seed;
    std::uint64_t event_count = 0;
};

// ---------------------------------------------------------------------------
// Exact event-driven engine (Gillespie direct method).
//
// Active sites live in a dense vector; each flip only re-examines x-1, x, x+1.
// Site selection is rejection sampling against the uniform bound rate < 1,
// so the per-event cost is O(1) amortized. The total rate is maintained
// incrementally and recomputed exactly every 2^16 events to cap float drift.

class SimEngine {
  public:
    SimEngine(HeightFunction h, const ModelParams& params)
        : h_(std::move(h)), params_(params) {
        const int64_t n = h_.site_count();
        rate_.assign(static_cast<size_t>(n), 0.0);
        dir_.assign(static_cast<size_t>(n), 0);
        pos_.assign(static_cast<size_t>(n), -1);
        x0_ = h_.x_begin();
        // rates depend on the height alone unless the generalized model has a
        // nonzero winding tilt; memoize per integer height in that case
        cacheable_ = params_.is_classic();
        if (const auto* r = std::get_if<Ring>(&params_.domain))
            cacheable_ = cacheable_ || r->winding == 0;
        for (int64_t i = 0; i < n; ++i) refresh_site(x0_ + i);
        recompute_total();
    }

    const HeightFunction& height() const { return h_; }
    double total_rate() const { return total_; }
    bool frozen() const { return active_.empty(); }

    // Samples the next event without applying it. Returns nullopt when frozen.
    std::optional<Event> sample_next(double clock, RngStream& rng) {
        if (active_.empty()) return std::nullopt;
        double wait = rng.exponential(total_);
        size_t idx;
        for (;;) {
            idx = static_cast<size_t>(rng.uniform01_halfopen() *
                                      static_cast<double>(active_.size()));
            if (idx >= active_.size()) idx = active_.size() - 1;
            if (rng.uniform01() <= rate_[static_cast<size_t>(active_[idx] - x0_)]) break;
        }
        int64_t x = active_[idx];
        return Event{clock + wait, x, dir_[static_cast<size_t>(x - x0_)]};
    }

    void apply_event(const Event& ev) {
        h_.apply_flip(ev.site, 2 * static_cast<int64_t>(ev.direction));
        touch(ev.site - 1);
        touch(ev.site);
        touch(ev.site + 1);
        if (++events_since_recompute_ >= 65536) recompute_total();
    }

  private:
    void touch(int64_t x) {
        if (h_.is_ring()) {
            const auto& r = std::get<Ring>(h_.domain());
            x = ((x % r.period) + r.period) % r.period;
        } else {
            const auto& w = std::get<LineWindow>(h_.domain());
            if (x < w.x_min || x > w.x_max) return;
        }
        refresh_site(x);
    }

    JumpRates rates_at(int64_t x) {
        if (!cacheable_) return jump_rates(params_, h_, x);
        int64_t s = h_.at(x);
        auto it = rate_cache_.find(s);
        if (it != rate_cache_.end()) return it->second;
        JumpRates r = jump_rates(params_, h_, x);
        rate_cache_.emplace(s, r);
        return r;
    }

    void refresh_site(int64_t x) {
        size_t i = static_cast<size_t>(x - x0_);
        Flip f = flip_eligibility(h_, x);
        double new_rate = 0.0;
        int8_t new_dir = 0;
        if (f != Flip::None) {
            JumpRates r = rates_at(x);
            new_rate = (f == Flip::Up) ? r.up : r.down;
            new_dir = (f == Flip::Up) ? 1 : -1;
        }
        total_ += new_rate - rate_[i];
        if (rate_[i] == 0.0 && new_rate > 0.0) {
            pos_[i] = static_cast<int64_t>(active_.size());
            active_.push_back(x);
        } else if (rate_[i] > 0.0 && new_rate == 0.0) {
            size_t p = static_cast<size_t>(pos_[i]);
            active_[p] = active_.back();
            pos_[static_cast<size_t>(active_.back() - x0_)] = static_cast<int64_t>(p);
            active_.pop_back();
            pos_[i] = -1;
        }
        rate_[i] = new_rate;
        dir_[i] = new_dir;
    }

    void recompute_total() {
        events_since_recompute_ = 0;
        double t = 0.0;
        for (int64_t x : active_) t += rate_[static_cast<size_t>(x - x0_)];
        total_ = t;
    }

    HeightFunction h_;
    ModelParams params_;
    bool cacheable_ = false;
    std::unordered_map<int64_t, JumpRates> rate_cache_;
    int64_t x0_ = 0;
    std::vector<double> rate_;
    std::vector<int8_t> dir_;
    std::vector<int64_t> pos_;
    std::vector<int64_t> active_;
    double total_ = 0.0;
    int events_since_recompute_ = 0;
};

// Single exact CTMC step from the given state; nullopt when frozen.
// `clock` advances to the event time on success and the flip is applied to h.
inline std::optional<Event> step_event(HeightFunction& h, const ModelParams& params,
                                       double& clock, RngStream& rng) {
    SimEngine engine(h, params);
    auto ev = engine.sample_next(clock, rng);
    if (!ev) return std::nullopt;
    engine.apply_event(*ev);
    clock = ev->time;
    h = engine.height();
    return ev;
}

struct SimulateOptions {
    bool keep_events = false;
    SeedRecord seed;
};

// Event-driven simulation with snapshots at the requested times (state is
// right-continuous: a snapshot at t reflects all events with time <= t).
inline Trajectory simulate(const HeightFunction& initial, const ModelParams& params,
                           double t_end, const std::vector<double>& sample_times,
                           RngStream rng, const SimulateOptions& opts = {}) {
    for (size_t i = 0; i < sample_times.size(); ++i) {
        if (sample_times[i] < 0 || sample_times[i] > t_end)
            throw std::invalid_argument("sample times must lie in [0, t_end]");
        if (i > 0 && sample_times[i] < sample_times[i - 1])
            throw std::invalid_argument("sample times must be sorted");
    }

    Trajectory traj;
    traj.params = params;
    traj.initial = initial;
    traj.seed = opts.seed;

    SimEngine engine(initial, params);
    double clock = 0.0;
    size_t next_sample = 0;

    auto emit_before = [&](double cut) {
        while (next_sample < sample_times.size() && sample_times[next_sample] < cut) {
            traj.snapshots.emplace_back(sample_times[next_sample], engine.height());
            ++next_sample;
        }
    };

    for (;;) {
        auto ev = engine.sample_next(clock, rng);
        if (!ev || ev->time > t_end) {
            emit_before(t_end + 1.0);  // remaining samples see the final state
            break;
        }
        emit_before(ev->time);
        engine.apply_event(*ev);
        clock = ev->time;
        traj.event_count++;
        if (opts.keep_events) traj.events.push_back(*ev);
        while (next_sample < sample_times.size() && sample_times[next_sample] == ev->time) {
            traj.snapshots.emplace_back(sample_times[next_sample], engine.height());
            ++next_sample;
        }
    }
    return traj;
}

// Replays a trajectory's event log from its initial state; used to check that
// snapshots are exactly reproducible.
inline HeightFunction replay(const Trajectory& traj, double up_to_time) {
    HeightFunction h = traj.initial;
    for (const Event& e : traj.events) {
        if (e.time > up_to_time) break;
        h.apply_flip(e.site, 2 * static_cast<int64_t>(e.direction));
    }
    return h;
}

// ---------------------------------------------------------------------------
// Drift/noise decomposition of the generalized rates:
//
//   rho_eps(shat)    = (a_up + a_down)/2
//   lambda_eps(shat) = eps^{-3/2} (a_up - a_down)/2
//
// evaluated at the recentred height s = eps^{-1/2} shat (the winding tilt
// cancels against the recentring, so the x dependence drops out).

struct RateDecomposition {
    double rho = 0.0;
    double lambda = 0.0;
};

inline RateDecomposition rate_drift_decomposition(const ModelParams& p, double shat,
                                                  double /*x_frac*/ = 0.0) {
    const auto* g = std::get_if<Generalized>(&p.rate_function);
    if (!g) throw std::invalid_argument("rate decomposition requires the generalized model");
    const double eps = p.eps;
    const double fval = g->f(shat / std::sqrt(eps));
    const double a = eps * fval;

    JumpRates jr = rates_for_exponent(eps, fval);
    RateDecomposition out;
    out.rho = 0.5 * (jr.up + jr.down);

    // lambda via the cancellation-free closed form
    //   (a_up - a_down)/2 = (1-e^{-eps})/2 * (1-e^{2a}) / ((1+e^{a+eps})(1+e^{a-eps}))
    // which vanishes identically when the exponent is zero.
    double bracket;
    if (a > 350.0) {
        bracket = -1.0;  // limit of the ratio for a -> +inf
    } else if (a < -350.0) {
        bracket = 1.0;
    } else {
        bracket = -std::expm1(2.0 * a) /
                  std::exp(log1pexp(a + eps) + log1pexp(a - eps));
    }
    out.lambda = -std::expm1(-eps) / (2.0 * std::pow(eps, 1.5)) * bracket;
    return out;
}

} // namespace dasep
