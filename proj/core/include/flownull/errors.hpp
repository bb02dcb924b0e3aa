#ifndef FLOWNULL_ERRORS_HPP
#define FLOWNULL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace flownull {

// All library failures throw Error. `code` is a stable machine-readable
// identifier (the CLI forwards it in its error JSON); `what()` is the
// human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool cond, const std::string& code, const std::string& message) {
    if (!cond) fail(code, message);
}

} // namespace flownull

#endif
