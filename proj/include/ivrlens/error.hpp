#pragma once

#include <stdexcept>
#include <string>

namespace ivrlens {

// Invalid or inconsistent input data (bad CSV, broken invariants, empty
// cohorts). Maps to process exit code 2 at the CLI boundary.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Bad command-line usage or configuration. Maps to exit code 1.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ivrlens
