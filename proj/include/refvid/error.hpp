#pragma once

#include <stdexcept>
#include <string>

namespace refvid {

// Error taxonomy. Each maps to one failure class the callers can test for.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateBoxError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VocabError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CompatibilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContextError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace refvid
