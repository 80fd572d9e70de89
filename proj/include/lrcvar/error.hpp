#pragma once

#include <stdexcept>
#include <string>

namespace lrcvar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model, policy, distribution or configuration input.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The chain induced by a policy has more than one recurrent class.
class ReducibleChain : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed to converge or produced an inconsistent result.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

} // namespace lrcvar
