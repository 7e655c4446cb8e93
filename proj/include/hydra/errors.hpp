#pragma once

#include <stdexcept>
#include <string>

namespace hydra {

class HydraError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A metric that is undefined for the given input (e.g. single-class labels).
class MetricError : public HydraError {
public:
    using HydraError::HydraError;
};

/// Invalid parameters or configuration; maps to CLI exit code 2.
class ConfigError : public HydraError {
public:
    using HydraError::HydraError;
};

class ShapeError : public HydraError {
public:
    using HydraError::HydraError;
};

class FoldError : public HydraError {
public:
    FoldError(const std::string& what, int fold) : HydraError(what), fold_(fold) {}
    int fold() const { return fold_; }

private:
    int fold_;
};

class DataError : public HydraError {
public:
    using HydraError::HydraError;
};

/// Training diverged or could not proceed.
class TrainingError : public HydraError {
public:
    using HydraError::HydraError;
};

}  // namespace hydra
