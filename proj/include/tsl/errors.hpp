#ifndef TSL_ERRORS_HPP
#define TSL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tsl {

// Malformed input file (bad JSON, wrong schema version, missing keys).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string &msg) : std::runtime_error(msg) {}
};

// Structurally invalid scenario; carries the id of the offending element.
class ValidationError : public std::runtime_error {
public:
    ValidationError(const std::string &msg, std::string element)
        : std::runtime_error(msg + " (element: " + element + ")"), element_(std::move(element)) {}

    const std::string &element() const { return element_; }

private:
    std::string element_;
};

} // namespace tsl

#endif
