#include "repgeom/error.hpp"

#include <utility>

namespace repgeom {

StageError::StageError(std::string stage, const std::string& what)
    : Error(stage + ": " + what), stage_(std::move(stage)) {}

}  // namespace repgeom
