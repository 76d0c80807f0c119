#pragma once

#include <stdexcept>
#include <string>

namespace qla {

// Error taxonomy shared by the whole pipeline. The CLI maps InvalidConfig to
// exit code 2 and every numeric failure to exit code 3, printing name() on
// the diagnostic stream.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string &what)
        : std::runtime_error(what), name_(std::move(name)) {}
    const std::string &name() const { return name_; }

private:
    std::string name_;
};

struct InvalidConfig : Error {
    explicit InvalidConfig(const std::string &what) : Error("InvalidConfig", what) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string &what) : Error("DomainError", what) {}
};

struct TruncationError : Error {
    explicit TruncationError(const std::string &what) : Error("TruncationError", what) {}
};

struct DegenerateVacation : Error {
    explicit DegenerateVacation(const std::string &what) : Error("DegenerateVacation", what) {}
};

struct KernelTooShort : Error {
    explicit KernelTooShort(const std::string &what) : Error("KernelTooShort", what) {}
};

struct PrecisionLoss : Error {
    explicit PrecisionLoss(const std::string &what) : Error("PrecisionLoss", what) {}
};

struct NoRootError : Error {
    explicit NoRootError(const std::string &what) : Error("NoRootError", what) {}
};

struct UnclassifiableError : Error {
    explicit UnclassifiableError(const std::string &what) : Error("UnclassifiableError", what) {}
};

}  // namespace qla
