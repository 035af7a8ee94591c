#pragma once

#include <stdexcept>
#include <string>

namespace deva {

// Fatal data/usage error. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace deva
