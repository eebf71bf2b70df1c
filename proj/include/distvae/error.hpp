#pragma once

#include <iostream>
#include <stdexcept>
#include <string>

namespace distvae {

// Every recoverable failure in the library surfaces as this type; the CLI
// maps it to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-fatal conditions (degenerate columns, clamped arguments) go to stderr.
inline void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

}  // namespace distvae
