#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace stackgen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexVector = std::vector<std::size_t>;

enum class Task { regress, classify };

std::string to_string(Task task);
Task parse_task(const std::string& text);

enum class ErrorCode {
    invalid_argument = 1,
    io,
    parse,
    data,
    numeric,
    model_format,
    version,
    internal,
};

// Every failure inside the library surfaces as this exception; the C layer
// maps `code()` onto its status enum.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) fail(ErrorCode::invalid_argument, message);
}

using WarningHandler = std::function<void(const std::string&)>;

// Installs a process-wide warning sink. Passing an empty handler restores the
// default, which writes "warning: ..." to stderr.
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

bool has_nan(const Matrix& m);

}  // namespace stackgen
