#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "procal/errors.hpp"

namespace procal {

// A convex function F on the simplex together with its gradient. F picks the
// Bregman divergence and with it every calibration, refinement, and sharpness
// quantity in this library.
struct ConvexGenerator {
    std::string name;
    // 0 means any dimension; otherwise inputs must have exactly this many entries.
    int domain_dimension = 0;
    std::function<double(std::span<const double>)> value;
    std::function<std::vector<double>(std::span<const double>)> gradient;
};

namespace generators {

// F(p) = ||p||_2^2, the Brier-score generator.
ConvexGenerator squared_norm();

// F(p) = sum_i p_i log p_i with 0 log 0 = 0, the log-loss generator.
ConvexGenerator neg_entropy();

// Binary one-vs-rest generators on 2-vectors (q, 1-q).
ConvexGenerator binary_brier();    // F(q) = q^2 + (1-q)^2
ConvexGenerator binary_entropy();  // F(q) = q log q + (1-q) log(1-q)
ConvexGenerator binary_sq();       // F(q) = q^2

}  // namespace generators

// D_F(p, q) = F(p) - F(q) - <grad F(q), p - q>.
double bregman_divergence(const ConvexGenerator& f, std::span<const double> p,
                          std::span<const double> q);

double generator_value(const ConvexGenerator& f, std::span<const double> p);
std::vector<double> generator_gradient(const ConvexGenerator& f, std::span<const double> p);

// Spot-checks convexity on random simplex triples and the gradient against
// central finite differences at random interior points. Throws
// GeneratorValidationError on failure.
void validate_generator(const ConvexGenerator& f, int k, std::uint64_t seed = 2024);

// Name registry. Built-ins are pre-registered under: brier, kl, binary-brier,
// binary-entropy, binary-sq. Custom generators are validated before they are
// accepted.
const ConvexGenerator& generator_by_name(const std::string& name);
void register_generator(const ConvexGenerator& f, int validation_dim,
                        std::uint64_t seed = 2024);
std::vector<std::string> registered_generator_names();

}  // namespace procal
