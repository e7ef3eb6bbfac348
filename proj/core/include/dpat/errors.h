#pragma once

#include <stdexcept>
#include <string>

namespace dpat {

// Bad user configuration: schema violations, invalid hyperparameters,
// geometry that cannot be honored. CLI maps this family to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or divisibility violations in tensor-level operations.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Prompt parameters that cannot be attached (odd length, width mismatch).
class InvalidPromptError : public std::runtime_error {
public:
    explicit InvalidPromptError(const std::string& msg) : std::runtime_error(msg) {}
};

// Key/prompt selection against an unknown task or empty bank.
class SelectionError : public std::runtime_error {
public:
    explicit SelectionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Zero-norm vectors fed to cosine-distance machinery.
class DegenerateInputError : public std::runtime_error {
public:
    explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violations of the class-incremental protocol (overlapping classes,
// indivisible class counts).
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

// Labels or samples inconsistent with the current stream state.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Synthetic clip generation that cannot satisfy its preconditions.
class GenerationError : public std::runtime_error {
public:
    explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable/corrupt checkpoints or report artifacts.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dpat
