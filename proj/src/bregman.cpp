#include "procal/bregman.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "procal/rng.hpp"
#include "procal/simplex.hpp"

namespace procal {

namespace {

void check_dimension(const ConvexGenerator& f, std::span<const double> p) {
    if (f.domain_dimension != 0 && static_cast<int>(p.size()) != f.domain_dimension)
        throw DimensionMismatchError("generator '" + f.name + "' expects dimension " +
                                     std::to_string(f.domain_dimension) + ", got " +
                                     std::to_string(p.size()));
    if (p.size() < 2) throw DimensionMismatchError("generator input needs k >= 2");
}

double entropy_sum(std::span<const double> p) {
    // 0 log 0 = 0: sum over the support only, so vertices give exactly 0.
    double s = 0.0;
    for (double x : p)
        if (x > 0.0) s += x * std::log(x);
    return s;
}

std::vector<double> entropy_gradient(std::span<const double> p) {
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = clamped_log(p[i]) + 1.0;
    return g;
}

}  // namespace

namespace generators {

ConvexGenerator squared_norm() {
    return {
        .name = "brier",
        .domain_dimension = 0,
        .value =
            [](std::span<const double> p) {
                double s = 0.0;
                for (double x : p) s += x * x;
                return s;
            },
        .gradient =
            [](std::span<const double> p) {
                std::vector<double> g(p.size());
                for (std::size_t i = 0; i < p.size(); ++i) g[i] = 2.0 * p[i];
                return g;
            },
    };
}

ConvexGenerator neg_entropy() {
    return {
        .name = "kl",
        .domain_dimension = 0,
        .value = [](std::span<const double> p) { return entropy_sum(p); },
        .gradient = [](std::span<const double> p) { return entropy_gradient(p); },
    };
}

ConvexGenerator binary_brier() {
    auto g = squared_norm();
    g.name = "binary-brier";
    g.domain_dimension = 2;
    return g;
}

ConvexGenerator binary_entropy() {
    auto g = neg_entropy();
    g.name = "binary-entropy";
    g.domain_dimension = 2;
    return g;
}

ConvexGenerator binary_sq() {
    return {
        .name = "binary-sq",
        .domain_dimension = 2,
        .value = [](std::span<const double> p) { return p[0] * p[0]; },
        .gradient =
            [](std::span<const double> p) {
                return std::vector<double>{2.0 * p[0], 0.0};
            },
    };
}

}  // namespace generators

double generator_value(const ConvexGenerator& f, std::span<const double> p) {
    check_dimension(f, p);
    return f.value(p);
}

std::vector<double> generator_gradient(const ConvexGenerator& f, std::span<const double> p) {
    check_dimension(f, p);
    return f.gradient(p);
}

double bregman_divergence(const ConvexGenerator& f, std::span<const double> p,
                          std::span<const double> q) {
    if (p.size() != q.size())
        throw DimensionMismatchError("divergence arguments have sizes " +
                                     std::to_string(p.size()) + " and " +
                                     std::to_string(q.size()));
    check_dimension(f, p);
    const std::vector<double> grad_q = f.gradient(q);
    double inner = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) inner += grad_q[i] * (p[i] - q[i]);
    return f.value(p) - f.value(q) - inner;
}

namespace {

std::vector<double> random_simplex_point(Rng& rng, int k) {
    std::vector<double> p(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (double& x : p) {
        x = rng.exponential();
        sum += x;
    }
    for (double& x : p) x /= sum;
    return p;
}

std::vector<double> random_interior_point(Rng& rng, int k) {
    // Mixed halfway to uniform so every coordinate stays well away from 0.
    auto p = random_simplex_point(rng, k);
    for (double& x : p) x = 0.5 * x + 0.5 / static_cast<double>(k);
    return p;
}

}  // namespace

void validate_generator(const ConvexGenerator& f, int k, std::uint64_t seed) {
    if (!f.value || !f.gradient)
        throw GeneratorValidationError("'" + f.name + "' is missing value or gradient");
    if (f.domain_dimension != 0) k = f.domain_dimension;
    if (k < 2) throw GeneratorValidationError("validation dimension must be >= 2");
    Rng rng(seed);

    for (int trial = 0; trial < 1000; ++trial) {
        const auto p = random_simplex_point(rng, k);
        const auto q = random_simplex_point(rng, k);
        const double lambda = rng.uniform();
        std::vector<double> mix(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) mix[i] = lambda * p[i] + (1.0 - lambda) * q[i];
        const double lhs = f.value(mix);
        const double rhs = lambda * f.value(p) + (1.0 - lambda) * f.value(q);
        if (!(lhs <= rhs + 1e-9))
            throw GeneratorValidationError("'" + f.name + "' failed a convexity spot-check (F(mix)=" +
                                           std::to_string(lhs) + " > " + std::to_string(rhs) + ")");
    }

    const double step = 1e-6;
    for (int trial = 0; trial < 32; ++trial) {
        const auto p = random_interior_point(rng, k);
        const auto grad = f.gradient(p);
        if (grad.size() != p.size())
            throw GeneratorValidationError("'" + f.name + "' gradient has wrong dimension");
        for (std::size_t i = 0; i < p.size(); ++i) {
            auto hi = p;
            auto lo = p;
            hi[i] += step;
            lo[i] -= step;
            const double fd = (f.value(hi) - f.value(lo)) / (2.0 * step);
            const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1.0});
            if (std::abs(fd - grad[i]) > 1e-5 * scale)
                throw GeneratorValidationError("'" + f.name + "' gradient mismatch at coordinate " +
                                               std::to_string(i) + ": analytic " +
                                               std::to_string(grad[i]) + " vs finite-difference " +
                                               std::to_string(fd));
        }
    }
}

namespace {

std::map<std::string, ConvexGenerator>& registry() {
    static std::map<std::string, ConvexGenerator> reg = [] {
        std::map<std::string, ConvexGenerator> r;
        for (const auto& g : {generators::squared_norm(), generators::neg_entropy(),
                              generators::binary_brier(), generators::binary_entropy(),
                              generators::binary_sq()})
            r.emplace(g.name, g);
        return r;
    }();
    return reg;
}

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

const ConvexGenerator& generator_by_name(const std::string& name) {
    std::lock_guard<std::mutex> lock(registry_mutex());
    auto& reg = registry();
    auto it = reg.find(name);
    if (it == reg.end()) throw InputError("unknown generator '" + name + "'");
    return it->second;
}

void register_generator(const ConvexGenerator& f, int validation_dim, std::uint64_t seed) {
    validate_generator(f, validation_dim, seed);
    std::lock_guard<std::mutex> lock(registry_mutex());
    registry()[f.name] = f;
}

std::vector<std::string> registered_generator_names() {
    std::lock_guard<std::mutex> lock(registry_mutex());
    std::vector<std::string> names;
    for (const auto& [name, gen] : registry()) names.push_back(name);
    return names;
}

}  // namespace procal
