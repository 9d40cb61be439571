#pragma once

#include <stdexcept>
#include <string>

namespace kfp {

// Error categories; the CLI maps them onto exit codes
// (parse -> 2, validation -> 3, numeric -> 4, horizon -> 5).
enum class errc { parse, validation, numeric, horizon };

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const noexcept { return code_; }

private:
    errc code_;
};

struct ParseError final : Error {
    explicit ParseError(const std::string& w) : Error(errc::parse, w) {}
};

struct BadBlockShape final : Error {
    explicit BadBlockShape(const std::string& w) : Error(errc::validation, w) {}
};

struct RankDeficientBlock final : Error {
    RankDeficientBlock(int block, const std::string& w) : Error(errc::validation, w), block_index(block) {}
    int block_index;
};

struct NonZeroForbiddenBlock final : Error {
    explicit NonZeroForbiddenBlock(const std::string& w) : Error(errc::validation, w) {}
};

struct NonPositivePiece final : Error {
    explicit NonPositivePiece(const std::string& w) : Error(errc::validation, w) {}
};

struct NotSymmetric final : Error {
    explicit NotSymmetric(const std::string& w) : Error(errc::validation, w) {}
};

struct InconsistentSigma final : Error {
    explicit InconsistentSigma(const std::string& w) : Error(errc::validation, w) {}
};

struct UnsupportedDimension final : Error {
    explicit UnsupportedDimension(const std::string& w) : Error(errc::validation, w) {}
};

struct NotPositiveDefinite final : Error {
    explicit NotPositiveDefinite(const std::string& w) : Error(errc::numeric, w) {}
};

struct NotAfterInitialTime final : Error {
    explicit NotAfterInitialTime(const std::string& w) : Error(errc::numeric, w) {}
};

struct CovarianceFailure final : Error {
    explicit CovarianceFailure(const std::string& w) : Error(errc::numeric, w) {}
};

struct OverflowError final : Error {
    explicit OverflowError(const std::string& w) : Error(errc::numeric, w) {}
};

struct BreakpointTooClose final : Error {
    explicit BreakpointTooClose(const std::string& w) : Error(errc::numeric, w) {}
};

struct FitFailed final : Error {
    explicit FitFailed(const std::string& w) : Error(errc::numeric, w) {}
};

struct NoPositiveHorizon final : Error {
    explicit NoPositiveHorizon(const std::string& w) : Error(errc::numeric, w) {}
};

struct HorizonExceeded final : Error {
    HorizonExceeded(double usable, const std::string& w) : Error(errc::horizon, w), usable_horizon(usable) {}
    double usable_horizon;
};

} // namespace kfp
