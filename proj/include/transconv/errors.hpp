#pragma once

#include <stdexcept>
#include <string>

namespace transconv {

/// Base class for all domain errors raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A frame concatenation whose determinant is below the configured floor.
struct SingularFrame : Error {
    explicit SingularFrame(const std::string& what) : Error(what) {}
};

/// A matrix that was required to have full rank does not.
struct RankDeficient : Error {
    explicit RankDeficient(const std::string& what) : Error(what) {}
};

/// A surface or map triple whose transversality constant sits below the floor.
struct NonTransversal : Error {
    explicit NonTransversal(const std::string& what) : Error(what) {}
};

/// Null spaces of a map triple fail to span the ambient space at some cell.
struct NonSpanning : Error {
    explicit NonSpanning(const std::string& what) : Error(what) {}
};

/// A facet whose domain simplex is numerically degenerate.
struct DegenerateFacet : Error {
    explicit DegenerateFacet(const std::string& what) : Error(what) {}
};

/// Scenario input that does not parse or violates a structural constraint.
struct ScenarioError : Error {
    explicit ScenarioError(const std::string& what) : Error(what) {}
};

}  // namespace transconv
