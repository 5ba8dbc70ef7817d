#pragma once

#include <stdexcept>
#include <string>

namespace chimera {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

// An evaluator or caller broke a documented contract (negative loss, lr out of bounds, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "contract_violation"; }
};

// random_genome could not produce a valid genome within the retry budget.
class GenerationExhausted : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "generation_exhausted"; }
};

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }
    const char* kind() const noexcept override { return "config_error"; }

private:
    std::string field_;
};

class VersionMismatch : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "version_mismatch"; }
};

class CorruptSnapshot : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "corrupt_snapshot"; }
};

class SpawnFailed : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "spawn_failed"; }
};

// Evaluation could not produce a usable loss where one is mandatory (initial population).
class EvaluationFailed : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "evaluation_failed"; }
};

class SchemaError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "schema_error"; }
};

// Malformed or unexpected message on the evaluator wire protocol.
class ProtocolError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "protocol_error"; }
};

class MissingArtifact : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "missing_artifact"; }
};

}  // namespace chimera
