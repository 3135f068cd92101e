#pragma once

#include <stdexcept>
#include <string>

namespace focus {

// Broad failure classes. The CLI maps them onto process exit codes.
enum class ErrorKind {
    usage = 1,
    data = 2,
    explainer = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error data_error(const std::string& what) { return Error(ErrorKind::data, what); }
inline Error usage_error(const std::string& what) { return Error(ErrorKind::usage, what); }

}  // namespace focus
