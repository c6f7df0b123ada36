#ifndef IEQ_ERRORS_HPP
#define IEQ_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ieq {

/// Bad run configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unusable input data (CLI exit code 2).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input file does not match the declared column schema.
class SchemaError : public DataError {
public:
    explicit SchemaError(const std::string& msg) : DataError(msg) {}
};

/// File could not be read or written.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A checked function produced a non-finite value.
class EvaluationError : public std::runtime_error {
public:
    explicit EvaluationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Training hit a non-finite loss or gradient (CLI exit code 3).
class TrainingAbort : public std::runtime_error {
public:
    TrainingAbort(const std::string& msg, int epoch, int batch, double lr)
        : std::runtime_error(msg), epoch(epoch), batch(batch), lr(lr) {}

    int epoch;
    int batch;
    double lr;
};

}  // namespace ieq

#endif  // IEQ_ERRORS_HPP
