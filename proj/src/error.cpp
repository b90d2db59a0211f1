#include "starseg/error.hpp"

namespace starseg {

std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::MalformedHeader: return "MalformedHeader";
        case Errc::UnsupportedDtype: return "UnsupportedDtype";
        case Errc::FortranOrderUnsupported: return "FortranOrderUnsupported";
        case Errc::InvalidShape: return "InvalidShape";
        case Errc::TruncatedPayload: return "TruncatedPayload";
        case Errc::IoFailure: return "IoFailure";
        case Errc::MalformedJson: return "MalformedJson";
        case Errc::ClassOutOfRange: return "ClassOutOfRange";
        case Errc::DuplicateId: return "DuplicateId";
        case Errc::InvalidId: return "InvalidId";
        case Errc::InvalidLabel: return "InvalidLabel";
        case Errc::BackgroundPixel: return "BackgroundPixel";
        case Errc::EmptyDataset: return "EmptyDataset";
        case Errc::EmptyMask: return "EmptyMask";
        case Errc::EmptyList: return "EmptyList";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::RaysNotDivisibleBy4: return "RaysNotDivisibleBy4";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::SimplexViolation: return "SimplexViolation";
        case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace starseg
