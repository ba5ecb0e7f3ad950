#pragma once

#include <stdexcept>
#include <string>

namespace embedcap {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateQueryError : std::runtime_error {
    explicit DegenerateQueryError(const std::string& what) : std::runtime_error(what) {}
};

struct ScanError : std::runtime_error {
    explicit ScanError(const std::string& what) : std::runtime_error(what) {}
};

struct FitError : std::runtime_error {
    explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

struct VocabError : std::runtime_error {
    explicit VocabError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyQueryError : std::runtime_error {
    explicit EmptyQueryError(const std::string& what) : std::runtime_error(what) {}
};

struct MissingQueryError : std::runtime_error {
    explicit MissingQueryError(const std::string& what) : std::runtime_error(what) {}
};

struct ZeroVectorError : std::runtime_error {
    explicit ZeroVectorError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace embedcap
