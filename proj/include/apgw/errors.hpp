#pragma once

#include <stdexcept>
#include <string>

namespace apgw {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A distributional parameter violates its domain (phi/lambda/gamma <= 0, kappa <= -1, ...).
struct InvalidParameter : Error {
    using Error::Error;
};

/// A function argument is outside the mathematical domain (t <= 0, u outside (0,1), ...).
struct DomainViolation : Error {
    using Error::Error;
};

/// Quantile request beyond the survivor plateau of a cure model (u >= 1 - cure mass).
struct CurePlateau : DomainViolation {
    using DomainViolation::DomainViolation;
};

/// A linear predictor exceeded the safe range of the log link.
struct LinkOverflow : Error {
    LinkOverflow(const std::string& block, double value)
        : Error("link overflow in block '" + block + "': linear predictor " +
                std::to_string(value) + " exceeds |700|"),
          block_name(block) {}
    std::string block_name;
};

/// The log-likelihood is not finite at the requested point.
struct NonFiniteLikelihood : Error {
    NonFiniteLikelihood(std::size_t row)
        : Error("non-finite likelihood contribution at data row " + std::to_string(row)),
          row_index(row) {}
    std::size_t row_index;
};

/// Vector/matrix dimensions do not line up with the model specification.
struct DimensionMismatch : Error {
    using Error::Error;
};

/// Fit has no covariance matrix (observed information was not positive definite).
struct CovarianceUnavailable : Error {
    using Error::Error;
};

/// Dataset ingestion problem; message carries the file/row at fault.
struct DataError : Error {
    using Error::Error;
};

/// Configuration problem; message carries the key at fault.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace apgw
