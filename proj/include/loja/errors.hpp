#pragma once

#include <stdexcept>
#include <string>

namespace loja {

/// Bad user input: malformed polynomial text, dimension mismatches,
/// precondition violations on values supplied by the caller.
class input_error : public std::runtime_error {
public:
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical procedure failed: Newton divergence, iterate escaping its
/// trust region, insufficient data for a fit.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

class parse_error : public input_error {
public:
    parse_error(const std::string& what, std::size_t offset)
        : input_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

class dimension_mismatch : public input_error {
public:
    using input_error::input_error;
};

class no_convergence : public numeric_error {
public:
    using numeric_error::numeric_error;
};

class left_trust_region : public numeric_error {
public:
    using numeric_error::numeric_error;
};

class outside_neighborhood : public numeric_error {
public:
    using numeric_error::numeric_error;
};

class singular_matrix : public numeric_error {
public:
    using numeric_error::numeric_error;
};

class not_critical : public input_error {
public:
    using input_error::input_error;
};

class not_converged : public numeric_error {
public:
    using numeric_error::numeric_error;
};

class insufficient_decay : public numeric_error {
public:
    using numeric_error::numeric_error;
};

} // namespace loja
