#pragma once

#include <stdexcept>
#include <string>

namespace heston {

// Parameter or argument outside its mathematical domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A numerical evaluation produced a non-finite value (overflow, 0/0, ...).
class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A root-finder or fixed-point iteration failed to reach a solution.
class NoSolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input document (params file, chain file).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace heston
