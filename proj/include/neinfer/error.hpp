#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace neinfer {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Iterative solve did not reach the requested relative residual.
class SolverFailure : public Error {
public:
    SolverFailure(const std::string& what, double residual, std::size_t iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    std::size_t iterations() const noexcept { return iterations_; }

private:
    double residual_;
    std::size_t iterations_;
};

/// Malformed or inconsistent field / manifest file. Carries the file and
/// 1-based line number where the problem was detected.
class IngestionError : public Error {
public:
    IngestionError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class GenerationFailure : public Error {
public:
    using Error::Error;
};

class OverflowError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// The observation is not bracketed by the prior envelope. Inference cannot
/// proceed until more prior realisations are introduced.
class CoverageGateFailure : public Error {
public:
    CoverageGateFailure(const std::string& what, double coverage)
        : Error(what), coverage_(coverage) {}

    double coverage() const noexcept { return coverage_; }

private:
    double coverage_;
};

/// No threshold on the search grid produced a posterior envelope that
/// covers the observation band at the requested fraction.
class SigmaSearchFailure : public Error {
public:
    SigmaSearchFailure(const std::string& what, double best_coverage, double best_sigma)
        : Error(what), best_coverage_(best_coverage), best_sigma_(best_sigma) {}

    double best_coverage() const noexcept { return best_coverage_; }
    double best_sigma() const noexcept { return best_sigma_; }

private:
    double best_coverage_;
    double best_sigma_;
};

/// Category used to map failures to process exit codes.
enum class ErrorKind { Other, Config, CoverageGate, Solver };

inline ErrorKind classify(const std::exception& e) noexcept {
    if (dynamic_cast<const CoverageGateFailure*>(&e)) return ErrorKind::CoverageGate;
    if (dynamic_cast<const SigmaSearchFailure*>(&e)) return ErrorKind::CoverageGate;
    if (dynamic_cast<const SolverFailure*>(&e)) return ErrorKind::Solver;
    if (dynamic_cast<const ConfigError*>(&e)) return ErrorKind::Config;
    return ErrorKind::Other;
}

/// Wraps an error raised inside a pipeline stage with the stage name. The
/// original category is kept.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what, ErrorKind kind = ErrorKind::Other)
        : Error("[" + stage + "] " + what), stage_(std::move(stage)), kind_(kind) {}

    const std::string& stage() const noexcept { return stage_; }
    ErrorKind kind() const noexcept { return kind_; }

private:
    std::string stage_;
    ErrorKind kind_;
};

}  // namespace neinfer
