#pragma once

#include <stdexcept>
#include <string>

namespace decreg {

// Base class for every error this library raises on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateConfiguration : Error {
    using Error::Error;
};

struct NonPositiveVoxel : Error {
    using Error::Error;
};

struct EmptyCloud : Error {
    using Error::Error;
};

struct InsufficientCorrespondences : Error {
    using Error::Error;
};

struct AllSubsetsDegenerate : Error {
    using Error::Error;
};

struct EmptyResultSet : Error {
    using Error::Error;
};

struct MissingViewpoint : Error {
    using Error::Error;
};

struct DegenerateCloud : Error {
    using Error::Error;
};

struct SingleClassDataset : Error {
    using Error::Error;
};

struct NonFiniteLoss : Error {
    using Error::Error;
};

struct ArityMismatch : Error {
    using Error::Error;
};

struct ExternalScorerError : Error {
    using Error::Error;
};

struct NoWrongCandidates : Error {
    using Error::Error;
};

struct TooFewPairs : Error {
    using Error::Error;
};

struct OverlapUnachievable : Error {
    using Error::Error;
};

struct NoHypothesisSurvivedSvc : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Carries the 1-based line number of the offending manifest line.
struct ManifestParseError : Error {
    ManifestParseError(const std::string& what, std::size_t line_number)
        : Error(what + " (line " + std::to_string(line_number) + ")"), line(line_number) {}
    std::size_t line;
};

}  // namespace decreg
