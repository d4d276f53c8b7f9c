#pragma once

#include <stdexcept>
#include <string>

namespace ionsim {

// Library-wide exception. `code()` is a short kebab-case tag the CLI prints
// verbatim so failures stay machine-parsable.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

inline Error invalid_argument(const std::string& what) { return Error("invalid-argument", what); }

}  // namespace ionsim
