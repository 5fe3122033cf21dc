#pragma once

#include <stdexcept>
#include <string>

namespace adprec {

/// Base for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A negative matrix power was requested on a matrix that is not positive
/// definite after clamping. For preconditioner states this means corruption.
class NonPositiveDefinite : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

/// An iterate, gradient, or preconditioner produced NaN/Inf.
class NonFiniteIterate : public Error {
public:
    using Error::Error;
};

} // namespace adprec
