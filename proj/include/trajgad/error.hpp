#pragma once

#include <stdexcept>
#include <string>

namespace trajgad {

// Every failure raised by the library derives from Error so callers can
// catch one type and still dispatch on the concrete subclass.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class EmptyGraphError : public Error { using Error::Error; };
class InvalidArgument : public Error { using Error::Error; };
class NumericalError : public Error { using Error::Error; };
class ContractionError : public Error { using Error::Error; };
class UndefinedMetricError : public Error { using Error::Error; };

class DivergenceError : public Error {
public:
    DivergenceError(int iteration, std::size_t node)
        : Error("non-finite state at iteration " + std::to_string(iteration) + ", node " +
                std::to_string(node)),
          iteration_(iteration), node_(node) {}

    [[nodiscard]] int iteration() const noexcept { return iteration_; }
    [[nodiscard]] std::size_t node() const noexcept { return node_; }

private:
    int iteration_;
    std::size_t node_;
};

} // namespace trajgad
