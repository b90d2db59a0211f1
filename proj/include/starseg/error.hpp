#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace starseg {

enum class Errc {
    MalformedHeader,
    UnsupportedDtype,
    FortranOrderUnsupported,
    InvalidShape,
    TruncatedPayload,
    IoFailure,
    MalformedJson,
    ClassOutOfRange,
    DuplicateId,
    InvalidId,
    InvalidLabel,
    BackgroundPixel,
    EmptyDataset,
    EmptyMask,
    EmptyList,
    ShapeMismatch,
    RaysNotDivisibleBy4,
    DimensionMismatch,
    LengthMismatch,
    SimplexViolation,
    InvalidArgument,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace starseg
