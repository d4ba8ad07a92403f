#pragma once

#include <stdexcept>
#include <string>

namespace bbmlab {

// Raised when a requested simulation would exceed the configured memory
// budget. Carries the estimate so callers can report it.
class ResourceRefusal : public std::runtime_error {
public:
    ResourceRefusal(std::string what, double estimated_nodes, double budget_nodes)
        : std::runtime_error(std::move(what)),
          estimated_nodes(estimated_nodes),
          budget_nodes(budget_nodes) {}

    double estimated_nodes;
    double budget_nodes;
};

// Raised when a rejection/conditioning sampler exhausts its retry budget.
class SamplerBudgetExhausted : public std::runtime_error {
public:
    SamplerBudgetExhausted(std::string what, double acceptance_rate_estimate)
        : std::runtime_error(std::move(what)),
          acceptance_rate_estimate(acceptance_rate_estimate) {}

    double acceptance_rate_estimate;
};

// Bad configuration file or CLI usage.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace bbmlab
