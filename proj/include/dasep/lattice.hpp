#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dasep {

struct ParityViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SlopeViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct WindingMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct OutOfDomain : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Domains

enum class LineBoundary { Frozen, ReflectingBuffer };

struct Ring {
    int64_t period = 0;   // N
    int64_t winding = 0;  // chi, net height gain over one period
};

struct LineWindow {
    int64_t x_min = 0;
    int64_t x_max = 0;
    LineBoundary boundary = LineBoundary::Frozen;
};

using Domain = std::variant<Ring, LineWindow>;

inline void validate_domain(const Domain& d) {
    if (const auto* r = std::get_if<Ring>(&d)) {
        if (r->period <= 0) throw WindingMismatch("ring period must be positive");
        if (((r->winding % 2) + 2) % 2 != ((r->period % 2) + 2) % 2)
            throw ParityViolation("ring winding must satisfy chi == N mod 2");
        if (std::llabs(r->winding) > r->period)
            throw WindingMismatch("ring winding must satisfy |chi| <= N");
    } else {
        const auto& w = std::get<LineWindow>(d);
        if (w.x_min >= w.x_max) throw OutOfDomain("line window requires x_min < x_max");
    }
}

inline int64_t domain_site_count(const Domain& d) {
    if (const auto* r = std::get_if<Ring>(&d)) return r->period;
    const auto& w = std::get<LineWindow>(d);
    return w.x_max - w.x_min + 1;
}

// ---------------------------------------------------------------------------
// Height function: solid-on-solid integer profile on the domain.
// Ring storage holds one fundamental period [0, N); the periodic extension
// s(x + mN) = s(x) + chi*m is applied on access.

enum class Flip { None, Up, Down };

class HeightFunction {
  public:
    HeightFunction() = default;

    HeightFunction(Domain domain, std::vector<int64_t> values)
        : domain_(std::move(domain)), values_(std::move(values)) {
        validate();
    }

    const Domain& domain() const { return domain_; }
    const std::vector<int64_t>& values() const { return values_; }
    int64_t site_count() const { return static_cast<int64_t>(values_.size()); }

    bool is_ring() const { return std::holds_alternative<Ring>(domain_); }

    // First lattice coordinate held in values_ (0 for rings, x_min for windows).
    int64_t x_begin() const {
        if (is_ring()) return 0;
        return std::get<LineWindow>(domain_).x_min;
    }

    // Height at any integer x (rings extend with winding; windows require
    // x inside [x_min, x_max]).
    int64_t at(int64_t x) const {
        if (is_ring()) {
            const auto& r = std::get<Ring>(domain_);
            int64_t m = x >= 0 ? x / r.period : -((-x + r.period - 1) / r.period);
            int64_t k = x - m * r.period;
            return values_[static_cast<size_t>(k)] + r.winding * m;
        }
        const auto& w = std::get<LineWindow>(domain_);
        if (x < w.x_min || x > w.x_max) throw OutOfDomain("height query outside window");
        return values_[static_cast<size_t>(x - w.x_min)];
    }

    // Neighbour height used by the dynamics; for ReflectingBuffer windows the
    // out-of-window neighbour mirrors the interior one.
    int64_t neighbour(int64_t x, int dir) const {
        int64_t y = x + dir;
        if (!is_ring()) {
            const auto& w = std::get<LineWindow>(domain_);
            if (w.boundary == LineBoundary::ReflectingBuffer) {
                if (y < w.x_min) y = x - dir;
                if (y > w.x_max) y = x - dir;
            }
        }
        return at(y);
    }

    void apply_flip(int64_t x, int64_t delta) {
        size_t i = index_of(x);
        values_[i] += delta;
    }

    void validate() const {
        validate_domain(domain_);
        if (values_.size() != static_cast<size_t>(domain_site_count(domain_)))
            throw SlopeViolation("value array length does not match domain");
        const int64_t n = site_count();
        for (int64_t i = 0; i + 1 < n; ++i) {
            if (std::llabs(values_[i + 1] - values_[i]) != 1)
                throw SlopeViolation("adjacent heights must differ by exactly 1");
        }
        if (is_ring()) {
            const auto& r = std::get<Ring>(domain_);
            // wrap increment: s(N) - s(N-1) where s(N) = s(0) + chi
            int64_t wrap = values_[0] + r.winding - values_[static_cast<size_t>(n - 1)];
            if (std::llabs(wrap) != 1)
                throw WindingMismatch("periodic extension violates the slope condition");
        }
    }

    size_t index_of(int64_t x) const {
        if (is_ring()) {
            const auto& r = std::get<Ring>(domain_);
            int64_t k = ((x % r.period) + r.period) % r.period;
            return static_cast<size_t>(k);
        }
        const auto& w = std::get<LineWindow>(domain_);
        if (x < w.x_min || x > w.x_max) throw OutOfDomain("site outside window");
        return static_cast<size_t>(x - w.x_min);
    }

  private:
    Domain domain_{Ring{2, 0}};
    std::vector<int64_t> values_{0, 1};
};

// Flip eligibility: Up at a strict local minimum, Down at a strict local
// maximum. Frozen window boundary sites never flip.
inline Flip flip_eligibility(const HeightFunction& h, int64_t x) {
    if (!h.is_ring()) {
        const auto& w = std::get<LineWindow>(h.domain());
        if (x < w.x_min || x > w.x_max) throw OutOfDomain("site outside window");
        if ((x == w.x_min || x == w.x_max) && w.boundary == LineBoundary::Frozen)
            return Flip::None;
    }
    int64_t s = h.at(x);
    int64_t sl = h.neighbour(x, -1);
    int64_t sr = h.neighbour(x, +1);
    if (s < sl && s < sr) return Flip::Up;
    if (s > sl && s > sr) return Flip::Down;
    return Flip::None;
}

// ---------------------------------------------------------------------------
// Initial profiles

enum class ProfileKind { Wedge, FlatAlternating, MaxSlope };

struct Profile {
    ProfileKind kind = ProfileKind::FlatAlternating;
    std::optional<std::vector<int64_t>> custom;  // overrides kind when set

    static Profile wedge() { return {ProfileKind::Wedge, std::nullopt}; }
    static Profile flat_alternating() { return {ProfileKind::FlatAlternating, std::nullopt}; }
    static Profile max_slope() { return {ProfileKind::MaxSlope, std::nullopt}; }
    static Profile from(std::vector<int64_t> v) { return {ProfileKind::Wedge, std::move(v)}; }
};

inline HeightFunction new_height(const Domain& domain, const Profile& profile) {
    validate_domain(domain);
    const int64_t n = domain_site_count(domain);
    if (profile.custom) return HeightFunction(domain, *profile.custom);

    std::vector<int64_t> v(static_cast<size_t>(n));
    if (const auto* r = std::get_if<Ring>(&domain)) {
        switch (profile.kind) {
            case ProfileKind::FlatAlternating:
                if (r->winding != 0)
                    throw WindingMismatch("flat-alternating profile requires chi = 0");
                for (int64_t i = 0; i < n; ++i) v[static_cast<size_t>(i)] = i % 2;
                break;
            case ProfileKind::MaxSlope:
                if (r->winding != r->period)
                    throw WindingMismatch("max-slope profile requires chi = N");
                for (int64_t i = 0; i < n; ++i) v[static_cast<size_t>(i)] = i;
                break;
            case ProfileKind::Wedge: {
                if (r->winding != 0 || r->period % 2 != 0)
                    throw WindingMismatch("ring wedge requires chi = 0 and even N");
                for (int64_t i = 0; i < n; ++i)
                    v[static_cast<size_t>(i)] = std::min(i, r->period - i);
                break;
            }
        }
    } else {
        const auto& w = std::get<LineWindow>(domain);
        for (int64_t x = w.x_min; x <= w.x_max; ++x) {
            int64_t i = x - w.x_min;
            switch (profile.kind) {
                case ProfileKind::Wedge: v[static_cast<size_t>(i)] = std::llabs(x); break;
                case ProfileKind::FlatAlternating:
                    v[static_cast<size_t>(i)] = ((x % 2) + 2) % 2;
                    break;
                case ProfileKind::MaxSlope: v[static_cast<size_t>(i)] = x; break;
            }
        }
    }
    return HeightFunction(domain, std::move(v));
}

// ---------------------------------------------------------------------------
// Model parameters

// Generalized rate exponent f with the linear-growth decomposition
// f(z) = f(0) + a*z + bounded remainder of order |z|^gamma.
struct FSpec {
    enum class Kind { Zero, Linear, LinearCosine };
    Kind kind = Kind::Linear;
    double a = 1.0;        // linear coefficient
    double cos_amp = 0.5;  // amplitude of the cosine part (LinearCosine only)
    double gamma = 0.0;    // remainder exponent in [0, 1/2)
    double c = 1.0;        // remainder constant

    double operator()(double z) const {
        switch (kind) {
            case Kind::Zero: return 0.0;
            case Kind::Linear: return a * z;
            case Kind::LinearCosine: return a * z + cos_amp * std::cos(z);
        }
        return 0.0;
    }
};

struct Classic {
    // rates use alpha * q^{-s}; alpha folds into a height shift by log_q(alpha)
};

struct Generalized {
    FSpec f;
};

using RateFunction = std::variant<Classic, Generalized>;

struct ModelParams {
    double eps = 0.1;    // q = exp(-eps)
    double alpha = 1.0;  // dynamic parameter (Classic only)
    RateFunction rate_function = Classic{};
    Domain domain = Ring{16, 0};

    double q() const { return std::exp(-eps); }
    bool is_classic() const { return std::holds_alternative<Classic>(rate_function); }
    // log_q(alpha) = -ln(alpha)/eps, the preferred height of the classic model
    double log_q_alpha() const { return -std::log(alpha) / eps; }
};

// Checks the linear-growth assumption |f(z) - f(0) - a z| <= c |z|^gamma on a
// sampled grid. Returns the worst violation margin (<= 0 means it holds).
inline double rate_assumption_margin(const FSpec& f, double z_max = 50.0, double dz = 0.1) {
    double worst = -1e300;
    const double f0 = f(0.0);
    for (double z = -z_max; z <= z_max; z += dz) {
        double lhs = std::fabs(f(z) - f0 - f.a * z);
        double rhs = f.c * std::pow(std::fabs(z), f.gamma);
        worst = std::max(worst, lhs - rhs);
    }
    return worst;
}

inline void validate_params(const ModelParams& p) {
    if (!(p.eps > 0)) throw std::invalid_argument("eps must be positive");
    if (!(p.alpha > 0)) throw std::invalid_argument("alpha must be positive");
    validate_domain(p.domain);
    if (const auto* g = std::get_if<Generalized>(&p.rate_function)) {
        if (g->f.a < 0 || g->f.gamma < 0 || g->f.gamma >= 0.5 || g->f.c < 0)
            throw std::invalid_argument("generalized rate constants out of range");
        if (rate_assumption_margin(g->f) > 1e-9)
            throw std::invalid_argument("generalized f violates the linear-growth assumption");
    }
}

// Snapshot rows `site,value` with a leading comment carrying domain metadata.
inline void write_height_csv(std::ostream& os, const HeightFunction& h) {
    if (h.is_ring()) {
        const auto& r = std::get<Ring>(h.domain());
        os << "# domain=ring period=" << r.period << " winding=" << r.winding << "\n";
    } else {
        const auto& w = std::get<LineWindow>(h.domain());
        os << "# domain=line x_min=" << w.x_min << " x_max=" << w.x_max << " boundary="
           << (w.boundary == LineBoundary::Frozen ? "frozen" : "reflecting") << "\n";
    }
    os << "site,value\n";
    int64_t x0 = h.x_begin();
    for (int64_t i = 0; i < h.site_count(); ++i)
        os << (x0 + i) << "," << h.values()[static_cast<size_t>(i)] << "\n";
}

} // namespace dasep
