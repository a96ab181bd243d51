#pragma once

#include <stdexcept>
#include <string>

namespace atom {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// diffparse
struct MalformedDiff : Error {
    using Error::Error;
};
struct BadHunkHeader : Error {
    BadHunkHeader(const std::string& what, int line_index)
        : Error(what + " (line " + std::to_string(line_index) + ")"), line(line_index) {}
    int line;
};

// ast-paths
struct LexError : Error {
    LexError(const std::string& what, int line_, int col_)
        : Error(what + " at " + std::to_string(line_) + ":" + std::to_string(col_)),
          line(line_), col(col_) {}
    int line;
    int col;
};
struct UnbalancedBraces : Error {
    using Error::Error;
};
struct NoEnclosingFunction : Error {
    using Error::Error;
};
struct LeafNotInTree : Error {
    using Error::Error;
};
struct EmptyContext : Error {
    using Error::Error;
};

// preprocess
struct IoError : Error {
    using Error::Error;
};
struct SchemaError : Error {
    SchemaError(int line_, const std::string& field_)
        : Error("missing or invalid field '" + field_ + "' on line " + std::to_string(line_)),
          line(line_), field(field_) {}
    int line;
    std::string field;
};
struct TooFewProjects : Error {
    using Error::Error;
};
struct EmptyAfterNormalization : Error {
    using Error::Error;
};

// autodiff
struct ShapeMismatch : Error {
    using Error::Error;
};
struct NonFiniteDetected : Error {
    using Error::Error;
};

// retrieval / ranking / training
struct EmptyIndex : Error {
    using Error::Error;
};
struct EmptyTrainingSet : Error {
    using Error::Error;
};
struct EmptyMessage : Error {
    using Error::Error;
};

// metrics
struct EmptyReference : Error {
    using Error::Error;
};
struct EmptySequence : Error {
    using Error::Error;
};

// cli / artifacts
struct MissingArtifact : Error {
    explicit MissingArtifact(const std::string& name)
        : Error("missing artifact: " + name), artifact(name) {}
    std::string artifact;
};
struct ConfigMismatch : Error {
    using Error::Error;
};

}  // namespace atom
