#pragma once

#include <stdexcept>
#include <string>

namespace repgeom {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// An error tagged with the pipeline stage that produced it ("id-profile", "overlap", ...).
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what);

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace repgeom
