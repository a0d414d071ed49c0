#include "latent_align/error.hpp"

namespace latent_align {

std::string_view error_kind_name(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidShape: return "InvalidShape";
    case ErrorKind::DegenerateVector: return "DegenerateVector";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::DataError: return "DataError";
    case ErrorKind::PairingError: return "PairingError";
    case ErrorKind::InvalidSplit: return "InvalidSplit";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::DegenerateKernel: return "DegenerateKernel";
    case ErrorKind::InsufficientAnchors: return "InsufficientAnchors";
    case ErrorKind::InvalidRank: return "InvalidRank";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::UnderDetermined: return "UnderDetermined";
    case ErrorKind::DivergenceError: return "DivergenceError";
    case ErrorKind::InvalidK: return "InvalidK";
    case ErrorKind::DegenerateCorrelation: return "DegenerateCorrelation";
    }
    return "Unknown";
}

ErrorFamily error_family(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::IoError:
    case ErrorKind::FormatError:
        return ErrorFamily::Io;
    case ErrorKind::DegenerateVector:
    case ErrorKind::DegenerateKernel:
    case ErrorKind::SingularCovariance:
    case ErrorKind::UnderDetermined:
    case ErrorKind::DivergenceError:
    case ErrorKind::DegenerateCorrelation:
        return ErrorFamily::Numerical;
    default:
        return ErrorFamily::Validation;
    }
}

} // namespace latent_align
