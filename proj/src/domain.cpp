#include "fpk/domain.hpp"

#include <cmath>

namespace fpk {

DomainSpec DomainSpec::interval(double lo, double hi, Exhaustion e, double step) {
    DomainSpec d;
    d.kind = Kind::Interval;
    d.dim = 1;
    d.lower = {lo};
    d.upper = {hi};
    d.exhaustion = e;
    d.step = step;
    d.check();
    return d;
}

DomainSpec DomainSpec::box(std::vector<double> lo, std::vector<double> hi,
                           Exhaustion e, double step) {
    DomainSpec d;
    d.kind = Kind::Box;
    d.dim = static_cast<int>(lo.size());
    d.lower = std::move(lo);
    d.upper = std::move(hi);
    d.exhaustion = e;
    d.step = step;
    d.check();
    return d;
}

DomainSpec DomainSpec::whole_space(int dd, double step) {
    DomainSpec d;
    d.kind = Kind::WholeSpace;
    d.dim = dd;
    d.step = step;
    d.check();
    return d;
}

void DomainSpec::check() const {
    if (dim < 1 || dim > 3)
        throw Error(errc::config, "domain dimension must be 1, 2 or 3");
    if (step <= 0)
        throw Error(errc::config, "exhaustion step must be positive");
    if (kind != Kind::WholeSpace) {
        if (static_cast<int>(lower.size()) != dim || static_cast<int>(upper.size()) != dim)
            throw Error(errc::config, "domain bounds do not match the dimension");
        for (int i = 0; i < dim; ++i) {
            auto s = static_cast<std::size_t>(i);
            if (!(lower[s] < upper[s]))
                throw Error(errc::config, "domain bounds must satisfy lower < upper");
            if (!std::isfinite(lower[s]) || !std::isfinite(upper[s]))
                throw Error(errc::config, "domain bounds must be finite");
        }
    }
}

bool DomainSpec::contains(std::span<const double> x) const {
    if (kind == Kind::WholeSpace) return true;
    for (int i = 0; i < dim; ++i) {
        auto s = static_cast<std::size_t>(i);
        if (!(x[s] > lower[s] && x[s] < upper[s])) return false;
    }
    return true;
}

bool Region::contains(std::span<const double> x) const {
    if (ball) {
        double r2 = 0;
        for (double v : x) r2 += v * v;
        return r2 <= radius * radius;
    }
    for (std::size_t i = 0; i < lo.size(); ++i)
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
}

Region exhaust(const DomainSpec& d, int k) {
    if (k < 1) throw Error(errc::invalid, "exhaustion shell index must be >= 1");
    Region r;
    if (d.kind == DomainSpec::Kind::WholeSpace) {
        r.radius = d.step * k;
        r.ball = d.dim >= 2;
        r.lo.assign(static_cast<std::size_t>(d.dim), -r.radius);
        r.hi.assign(static_cast<std::size_t>(d.dim), r.radius);
        return r;
    }
    r.lo.resize(static_cast<std::size_t>(d.dim));
    r.hi.resize(static_cast<std::size_t>(d.dim));
    for (int i = 0; i < d.dim; ++i) {
        auto s = static_cast<std::size_t>(i);
        double w = d.upper[s] - d.lower[s];
        double inset;
        if (d.exhaustion == DomainSpec::Exhaustion::Dyadic)
            inset = w * std::ldexp(1.0, -k - 1);
        else
            inset = (w / 2) / (1 + d.step * k);
        r.lo[s] = d.lower[s] + inset;
        r.hi[s] = d.upper[s] - inset;
    }
    return r;
}

} // namespace fpk
