#pragma once

#include <stdexcept>
#include <string>

namespace bcih {

// Error taxonomy shared by all modules. Callers that only care about
// "something failed" can catch std::runtime_error.

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DesignError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SceneError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bcih
