#pragma once

// NPY v1.0 tensor container and the JSON class-assignment sidecar.
//
// Only C-order little-endian float32 / int32 / uint8 tensors of rank 2 or 3
// are accepted. Readers reject anything else outright; a short payload is an
// error, never a partial tensor.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "starseg/array.hpp"

namespace starseg {

enum class DType { Float32, Int32, UInt8 };

std::size_t dtype_size(DType t);

struct TensorFile {
    std::vector<std::size_t> shape;
    DType dtype = DType::Float32;
    std::vector<std::uint8_t> payload;

    std::size_t element_count() const;
    /// Throws Errc::InvalidShape unless rank is 2 or 3, every extent is
    /// positive, and the payload length matches.
    void validate() const;

    friend bool operator==(const TensorFile&, const TensorFile&) = default;
};

/// Instance id (> 0) -> class label (1..T).
using ClassAssignment = std::map<std::int32_t, std::int32_t>;

TensorFile read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const TensorFile& t);

/// Parse/serialize the raw bytes of an NPY v1.0 container.
TensorFile decode_npy(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_npy(const TensorFile& t);

/// `max_class` bounds the accepted labels to 1..max_class.
ClassAssignment read_class_assignment(const std::filesystem::path& path, int max_class);
ClassAssignment parse_class_assignment(const std::string& text, int max_class);
void write_class_assignment(const std::filesystem::path& path, const ClassAssignment& classes);
std::string format_class_assignment(const ClassAssignment& classes);

// Typed conversions. The `to_*` functions check dtype and rank and throw
// Errc::UnsupportedDtype / Errc::InvalidShape on mismatch.
TensorFile from_array(const Array2<float>& a);
TensorFile from_array(const Array2<std::int32_t>& a);
TensorFile from_array(const Array2<std::uint8_t>& a);
TensorFile from_array(const Array3<float>& a);

Array2<float> to_array2f(const TensorFile& t);
Array2<std::int32_t> to_array2i(const TensorFile& t);
Array3<float> to_array3f(const TensorFile& t);

/// Writes the whole buffer or throws Errc::IoFailure.
void write_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace starseg
