#pragma once

#include <stdexcept>
#include <string>

namespace adlim {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class PoleError : public Error {
public:
    PoleError(const std::string& what, double pole, int order = 1)
        : Error(what), pole_(pole), order_(order) {}
    double pole() const { return pole_; }
    int order() const { return order_; }

private:
    double pole_;
    int order_;
};

class NonConvergence : public Error {
public:
    using Error::Error;
};

class KernelPresent : public Error {
public:
    using Error::Error;
};

class NotSelfAdjoint : public Error {
public:
    using Error::Error;
};

class CoverFailure : public Error {
public:
    using Error::Error;
};

class TruncationTooSmall : public Error {
public:
    using Error::Error;
};

class EigensolveFailure : public Error {
public:
    EigensolveFailure(const std::string& what, int block = -1) : Error(what), block_(block) {}
    int block() const { return block_; }

private:
    int block_;
};

class RegionError : public Error {
public:
    using Error::Error;
};

class FitFailure : public Error {
public:
    using Error::Error;
};

class IllConditioned : public Error {
public:
    using Error::Error;
};

class NotInvertible : public Error {
public:
    NotInvertible(const std::string& what, double theta) : Error(what), theta_(theta) {}
    double theta() const { return theta_; }

private:
    double theta_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace adlim
