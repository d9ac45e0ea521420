#pragma once

#include <stdexcept>

namespace lnnet {

// Base of every error thrown by this library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dimensions do not conform (matrix shapes, group counts, layer chains).
struct shape_error : error {
    using error::error;
};

// Input on which the requested map is undefined: zero variance, zero vector,
// vanishing scatter, undefined ratio.
struct degenerate_error : error {
    using error::error;
};

// A scatter matrix that must be positive definite is not.
struct singular_error : error {
    using error::error;
};

// A seeded search (rejection sampling, line search) exhausted its budget or
// has no descent direction to follow.
struct search_error : error {
    using error::error;
};

// Data or a document violates a stated invariant.
struct validation_error : error {
    using error::error;
};

// Malformed CSV or JSON input; the message carries a location.
struct parse_error : error {
    using error::error;
};

// A classification tie that the readout rule cannot resolve.
struct ambiguity_error : error {
    using error::error;
};

} // namespace lnnet
