#pragma once

#include <stdexcept>
#include <string>

namespace armwave {

/// Base type for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A parameter is out of range, inconsistent, or missing.
struct ParameterError : Error {
    using Error::Error;
};

/// Attitude representation hit a kinematic singularity (|pitch| -> pi/2).
struct SingularityError : Error {
    using Error::Error;
};

/// Geometry is degenerate (zero range, unreachable target, ...).
struct GeometryError : Error {
    using Error::Error;
};

/// A sample grid does not match or does not cover what the operation needs.
struct GridError : Error {
    using Error::Error;
};

/// Calibration standards are inconsistent or the error model is degenerate.
struct CalibrationError : Error {
    using Error::Error;
};

/// The tracker could not follow the commanded motion within its limits.
struct TrackingError : Error {
    using Error::Error;
};

/// A detector found nothing that satisfies its acceptance rule.
struct DetectionError : Error {
    using Error::Error;
};

/// Malformed config or data file; message carries file/line context.
struct ParseError : Error {
    using Error::Error;
};

} // namespace armwave
