#pragma once

#include <stdexcept>
#include <string>

namespace fabloop {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// kinematics
struct OutOfReachError : Error {
    using Error::Error;
};
struct SingularTargetError : Error {
    using Error::Error;
};

// vision geometry
struct DegenerateQuadError : Error {
    using Error::Error;
};
struct PointAtInfinityError : Error {
    using Error::Error;
};
struct NonInvertibleError : Error {
    using Error::Error;
};

// thermal / extrusion
struct OpenCircuitError : Error {
    using Error::Error;
};
struct NonPhysicalError : Error {
    using Error::Error;
};
struct SingularSystemError : Error {
    using Error::Error;
};
struct UnstableStepError : Error {
    using Error::Error;
};

// simulation
struct OutOfBedError : Error {
    using Error::Error;
};
struct ThermalTimeoutError : Error {
    using Error::Error;
};

// configuration / I/O
struct ParseError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct UnknownKeyError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

}  // namespace fabloop
