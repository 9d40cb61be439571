#pragma once

#include <optional>
#include <string>

#include "kfp/cauchy.hpp"
#include "kfp/expression.hpp"
#include "kfp/operator_spec.hpp"
#include "kfp/verify.hpp"

namespace kfp::io {

inline constexpr const char* PROBLEM_SCHEMA = "kfp-problem/1";
inline constexpr const char* DATUM_SCHEMA = "kfp-datum/1";

// Parses a problem description (schema "kfp-problem/1") into a validated
// OperatorSpec. Throws ParseError on malformed input, validation errors from
// OperatorSpec::make otherwise.
OperatorSpec parse_problem(const std::string& json_text);
OperatorSpec load_problem(const std::string& path);

/// Raw problem fields plus the validation outcome; lets diagnostic commands
/// describe operators that do not satisfy the block structure.
struct ProblemSummary {
    int N = 0;
    int q = 0;
    Matrix B;
    std::vector<int> blocks;
    std::optional<OperatorSpec> spec;  // present iff validation succeeded
    std::string validation_error;     // reason when it did not
};

// Parses the raw fields (throws ParseError on malformed input) and attempts
// full validation without letting validation failures escape.
ProblemSummary parse_problem_lenient(const std::string& json_text);
ProblemSummary load_problem_lenient(const std::string& path);

// Re-emits a spec in the problem schema; numbers are serialized
// shortest-round-trip so a parse/emit cycle is bit-identical.
std::string emit_problem(const OperatorSpec& spec);

/// Datum file contents: the datum plus what is needed to re-emit it.
struct DatumFile {
    CauchyDatum datum;
    std::string variant;               // "grid" | "bounded" | "gaussian_growth"
    std::optional<Expression> callable;
    std::optional<double> alpha;
    std::optional<double> sup_bound;
};

DatumFile parse_datum(const std::string& json_text, int dim);
DatumFile load_datum(const std::string& path, int dim);

// Structured-text report mirroring VerificationReport.
std::string report_to_text(const VerificationReport& report);
std::string reports_to_text(const std::vector<VerificationReport>& reports);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

} // namespace kfp::io
