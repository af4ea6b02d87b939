#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace actionkit {

// Coarse error classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
    kUsage,     // bad arguments or configuration
    kData,      // malformed or inconsistent input data
    kExternal,  // a remote service (judge, embedder) failed
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    // Stable machine-readable identifier, e.g. "ParseError".
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t offset, std::string expected)
        : Error(ErrorKind::kData, "ParseError",
                "expected " + expected + " at byte " + std::to_string(offset)),
          offset_(offset), expected_(std::move(expected)) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t offset_;
    std::string expected_;
};

class EmptyInput : public Error {
public:
    EmptyInput() : Error(ErrorKind::kData, "EmptyInput", "input is empty or whitespace-only") {}
};

class UnmappedToken : public Error {
public:
    explicit UnmappedToken(std::string token)
        : Error(ErrorKind::kData, "UnmappedToken", "no mapping for placeholder " + token),
          token_(std::move(token)) {}
    const std::string& token() const noexcept { return token_; }

private:
    std::string token_;
};

class EmptyCorpus : public Error {
public:
    EmptyCorpus() : Error(ErrorKind::kData, "EmptyCorpus", "corpus is empty") {}
};

class EmptyPrediction : public Error {
public:
    EmptyPrediction() : Error(ErrorKind::kData, "EmptyPrediction", "prediction has no tokens") {}
};

class IdMismatch : public Error {
public:
    explicit IdMismatch(std::vector<std::string> ids)
        : Error(ErrorKind::kData, "IdMismatch", describe(ids)), ids_(std::move(ids)) {}
    const std::vector<std::string>& ids() const noexcept { return ids_; }

private:
    static std::string describe(const std::vector<std::string>& ids) {
        std::string msg = std::to_string(ids.size()) + " orphaned record id(s):";
        for (const auto& id : ids) msg += " " + id;
        return msg;
    }
    std::vector<std::string> ids_;
};

class MalformedLine : public Error {
public:
    MalformedLine(std::size_t lineno, const std::string& why)
        : Error(ErrorKind::kData, "MalformedLine",
                "line " + std::to_string(lineno) + ": " + why),
          lineno_(lineno) {}
    std::size_t lineno() const noexcept { return lineno_; }

private:
    std::size_t lineno_;
};

class MissingField : public Error {
public:
    MissingField(const std::string& id, const std::string& field)
        : Error(ErrorKind::kData, "MissingField", "record " + id + " has no " + field) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::kData, "Io", what) {}
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& what)
        : Error(ErrorKind::kData, "DimensionMismatch", what) {}
};

class EmptyPoints : public Error {
public:
    EmptyPoints() : Error(ErrorKind::kData, "EmptyPoints", "no points to estimate a density from") {}
};

class GridMismatch : public Error {
public:
    GridMismatch() : Error(ErrorKind::kData, "GridMismatch", "densities are on different grids") {}
};

class Exhausted : public Error {
public:
    explicit Exhausted(std::size_t attempts)
        : Error(ErrorKind::kData, "Exhausted",
                "candidate stream exhausted after " + std::to_string(attempts) + " attempts"),
          attempts_(attempts) {}
    std::size_t attempts() const noexcept { return attempts_; }

private:
    std::size_t attempts_;
};

class EmptyTokens : public Error {
public:
    EmptyTokens() : Error(ErrorKind::kData, "EmptyTokens", "token embedding set is empty") {}
};

class JudgeUnavailable : public Error {
public:
    JudgeUnavailable(const std::string& name, const std::string& why)
        : Error(ErrorKind::kExternal, "JudgeUnavailable", "judge " + name + ": " + why) {}
};

class PromptTooLong : public Error {
public:
    PromptTooLong(std::size_t length, std::size_t limit)
        : Error(ErrorKind::kUsage, "PromptTooLong",
                "prompt of " + std::to_string(length) + " bytes exceeds limit " +
                    std::to_string(limit)) {}
};

class ServiceError : public Error {
public:
    explicit ServiceError(const std::string& what)
        : Error(ErrorKind::kExternal, "ServiceError", what) {}
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what)
        : Error(ErrorKind::kUsage, "InvalidArgument", what) {}
};

}  // namespace actionkit
