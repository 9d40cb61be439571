#include "kfp/problem_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kfp::io {

using nlohmann::json;

namespace {

json parse_json(const std::string& text, const char* what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw ParseError(std::string(what) + ": not valid JSON");
    return j;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

Matrix matrix_from_json(const json& rows, const char* what) {
    if (!rows.is_array() || rows.empty())
        throw ParseError(std::string(what) + ": expected a nonempty array of rows");
    const std::size_t nrows = rows.size();
    const std::size_t ncols = rows[0].is_array() ? rows[0].size() : 0;
    if (ncols == 0)
        throw ParseError(std::string(what) + ": rows must be nonempty arrays");
    Matrix M(nrows, ncols);
    for (std::size_t i = 0; i < nrows; ++i) {
        if (!rows[i].is_array() || rows[i].size() != ncols)
            throw ParseError(std::string(what) + ": ragged rows");
        for (std::size_t j = 0; j < ncols; ++j) {
            if (!rows[i][j].is_number())
                throw ParseError(std::string(what) + ": non-numeric entry");
            M(i, j) = rows[i][j].get<double>();
        }
    }
    return M;
}

json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

OperatorSpec parse_problem(const std::string& json_text) {
    const json j = parse_json(json_text, "problem file");
    if (!j.is_object() || j.value("schema", "") != PROBLEM_SCHEMA)
        throw ParseError(std::string("problem file: missing schema field \"") + PROBLEM_SCHEMA + "\"");

    for (const char* key : {"N", "q", "B", "blocks", "coefficients"})
        if (!j.contains(key))
            throw ParseError(std::string("problem file: missing field '") + key + "'");

    const int N = j["N"].get<int>();
    const int q = j["q"].get<int>();
    const Matrix B = matrix_from_json(j["B"], "problem file: B");
    if (B.rows() != N || B.cols() != N)
        throw ParseError("problem file: B must be N x N");

    std::vector<int> blocks;
    for (const auto& v : j["blocks"])
        blocks.push_back(v.get<int>());
    if (!blocks.empty() && blocks[0] != q)
        throw ParseError("problem file: first block size must equal q");

    const json& coeff = j["coefficients"];
    if (!coeff.contains("breakpoints") || !coeff.contains("pieces"))
        throw ParseError("problem file: coefficients need 'breakpoints' and 'pieces'");
    CoefficientTrack track;
    track.q = q;
    for (const auto& v : coeff["breakpoints"])
        track.breakpoints.push_back(v.get<double>());
    for (const auto& piece : coeff["pieces"])
        track.pieces.push_back(matrix_from_json(piece, "problem file: coefficient piece"));

    std::optional<double> nu;
    if (j.contains("nu") && !j["nu"].is_null())
        nu = j["nu"].get<double>();

    return OperatorSpec::make(B, blocks, std::move(track), nu);
}

OperatorSpec load_problem(const std::string& path) { return parse_problem(slurp(path)); }

ProblemSummary parse_problem_lenient(const std::string& json_text) {
    const json j = parse_json(json_text, "problem file");
    if (!j.is_object() || j.value("schema", "") != PROBLEM_SCHEMA)
        throw ParseError(std::string("problem file: missing schema field \"") + PROBLEM_SCHEMA + "\"");
    for (const char* key : {"N", "q", "B", "blocks", "coefficients"})
        if (!j.contains(key))
            throw ParseError(std::string("problem file: missing field '") + key + "'");

    ProblemSummary out;
    out.N = j["N"].get<int>();
    out.q = j["q"].get<int>();
    out.B = matrix_from_json(j["B"], "problem file: B");
    if (out.B.rows() != out.N || out.B.cols() != out.N)
        throw ParseError("problem file: B must be N x N");
    for (const auto& v : j["blocks"])
        out.blocks.push_back(v.get<int>());

    try {
        out.spec = parse_problem(json_text);
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        out.validation_error = e.what();
    }
    return out;
}

ProblemSummary load_problem_lenient(const std::string& path) {
    return parse_problem_lenient(slurp(path));
}

std::string emit_problem(const OperatorSpec& spec) {
    json j;
    j["schema"] = PROBLEM_SCHEMA;
    j["N"] = spec.N;
    j["q"] = spec.q;
    j["B"] = matrix_to_json(spec.B);
    j["blocks"] = spec.structure.m;
    json coeff;
    coeff["breakpoints"] = spec.track.breakpoints;
    json pieces = json::array();
    for (const Matrix& piece : spec.track.pieces)
        pieces.push_back(matrix_to_json(piece));
    coeff["pieces"] = std::move(pieces);
    j["coefficients"] = std::move(coeff);
    j["nu"] = spec.nu;
    return j.dump(2) + "\n";
}

DatumFile parse_datum(const std::string& json_text, int dim) {
    const json j = parse_json(json_text, "datum file");
    if (!j.is_object() || j.value("schema", "") != DATUM_SCHEMA)
        throw ParseError(std::string("datum file: missing schema field \"") + DATUM_SCHEMA + "\"");
    const std::string variant = j.value("variant", "");

    DatumFile out;
    out.variant = variant;

    if (variant == "grid") {
        if (!j.contains("grid"))
            throw ParseError("datum file: grid variant needs a 'grid' object");
        const json& g = j["grid"];
        GridSampled grid;
        const auto lo = g.at("lo").get<std::vector<double>>();
        const auto hi = g.at("hi").get<std::vector<double>>();
        grid.lo = Eigen::Map<const Vector>(lo.data(), static_cast<Eigen::Index>(lo.size()));
        grid.hi = Eigen::Map<const Vector>(hi.data(), static_cast<Eigen::Index>(hi.size()));
        grid.shape = g.at("shape").get<std::vector<int>>();
        grid.values = g.at("values").get<std::vector<double>>();
        if (grid.dim() != dim)
            throw ParseError("datum file: grid dimension does not match the problem");
        grid.validate();
        out.datum = std::move(grid);
        return out;
    }

    if (variant == "bounded" || variant == "gaussian_growth") {
        if (!j.contains("expression"))
            throw ParseError("datum file: callable variants need an 'expression' string");
        Expression expr = Expression::parse(j["expression"].get<std::string>(), dim);

        // spot-check that the expression evaluates to finite values
        for (int probe = 0; probe < 32; ++probe) {
            Vector x(dim);
            for (int k = 0; k < dim; ++k)
                x(k) = -2.0 + 4.0 * ((probe * 7 + k * 13) % 17) / 16.0;
            if (!std::isfinite(expr(x)))
                throw ParseError("datum file: expression is not finite on the sampling box");
        }

        if (variant == "bounded") {
            BoundedCallable callable;
            callable.f = [expr](const Vector& x) { return expr(x); };
            if (j.contains("sup_bound")) {
                callable.sup_bound = j["sup_bound"].get<double>();
                out.sup_bound = callable.sup_bound;
            }
            out.callable = std::move(expr);
            out.datum = std::move(callable);
        } else {
            if (!j.contains("alpha"))
                throw ParseError("datum file: gaussian_growth needs 'alpha'");
            GaussianGrowth growth;
            growth.alpha = j["alpha"].get<double>();
            if (!(growth.alpha > 0.0))
                throw ParseError("datum file: alpha must be positive");
            growth.f = [expr](const Vector& x) { return expr(x); };
            out.alpha = growth.alpha;
            out.callable = std::move(expr);
            out.datum = std::move(growth);
        }
        return out;
    }

    throw ParseError("datum file: unknown variant '" + variant +
                     "' (expected grid | bounded | gaussian_growth)");
}

DatumFile load_datum(const std::string& path, int dim) { return parse_datum(slurp(path), dim); }

namespace {

json report_json(const VerificationReport& report) {
    json j;
    j["suite"] = report.suite;
    j["seed"] = report.seed;
    j["config"] = report.config;
    j["passed"] = report.passed();
    json checks = json::array();
    for (const auto& c : report.checks) {
        json cj;
        cj["id"] = c.id;
        cj["samples"] = c.samples;
        cj["worst"] = c.worst;
        cj["tolerance"] = c.tol;
        cj["pass"] = c.pass;
        cj["worst_at"] = c.worst_at;
        checks.push_back(std::move(cj));
    }
    j["checks"] = std::move(checks);
    return j;
}

} // namespace

std::string report_to_text(const VerificationReport& report) {
    return report_json(report).dump(2) + "\n";
}

std::string reports_to_text(const std::vector<VerificationReport>& reports) {
    json j = json::array();
    for (const auto& r : reports)
        j.push_back(report_json(r));
    return j.dump(2) + "\n";
}

} // namespace kfp::io
