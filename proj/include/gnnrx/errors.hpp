#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace gnnrx {

/// Raised when an array, vector or graph has the wrong dimensions.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A requested configuration is valid syntax but not supported (e.g. joint graph with M > 2).
class UnsupportedConfiguration : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Exact inference would exceed the configured state/likelihood budget.
class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values during training or inference.
class NumericalDivergence : public std::runtime_error {
public:
    explicit NumericalDivergence(const std::string& what,
                                 std::optional<std::uint64_t> seed = std::nullopt)
        : std::runtime_error(seed ? what + " (batch seed " + std::to_string(*seed) + ")" : what),
          seed_(seed)
    {
    }

    [[nodiscard]] std::optional<std::uint64_t> seed() const { return seed_; }

private:
    std::optional<std::uint64_t> seed_;
};

/// Text input (alist, config, CIR literal) could not be parsed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line)
    {
    }

    [[nodiscard]] int line() const { return line_; }

private:
    int line_;
};

} // namespace gnnrx
