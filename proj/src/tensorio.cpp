#include "starseg/tensorio.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "starseg/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are copied verbatim; big-endian hosts need byte swapping");

namespace starseg {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreludeLen = kMagicLen + 2 + 2;  // magic, version, header length

const char* descr_of(DType t) {
    switch (t) {
        case DType::Float32: return "<f4";
        case DType::Int32: return "<i4";
        case DType::UInt8: return "|u1";
    }
    return "";
}

DType dtype_from_descr(const std::string& descr) {
    if (descr == "<f4") return DType::Float32;
    if (descr == "<i4") return DType::Int32;
    if (descr == "|u1" || descr == "<u1") return DType::UInt8;
    throw Error(Errc::UnsupportedDtype, "dtype '" + descr + "' is not one of <f4, <i4, |u1");
}

// Minimal reader for the python dict literal inside an NPY header.
class HeaderParser {
public:
    explicit HeaderParser(std::string_view text) : s_(text) {}

    void parse(std::string& descr, bool& fortran, std::vector<std::size_t>& shape) {
        bool have_descr = false, have_fortran = false, have_shape = false;
        expect('{');
        while (true) {
            skip_ws();
            if (peek() == '}') {
                ++pos_;
                break;
            }
            const std::string key = quoted();
            expect(':');
            if (key == "descr") {
                descr = quoted();
                have_descr = true;
            } else if (key == "fortran_order") {
                fortran = boolean();
                have_fortran = true;
            } else if (key == "shape") {
                shape = tuple();
                have_shape = true;
            } else {
                fail("unexpected key '" + key + "'");
            }
            skip_ws();
            if (peek() == ',') {
                ++pos_;
            } else if (peek() != '}') {
                fail("expected ',' or '}'");
            }
        }
        skip_ws();
        if (pos_ != s_.size()) fail("trailing characters after header dict");
        if (!have_descr || !have_fortran || !have_shape) fail("header dict missing descr/fortran_order/shape");
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(Errc::MalformedHeader, msg + " at offset " + std::to_string(pos_));
    }
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    void expect(char c) {
        skip_ws();
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }
    std::string quoted() {
        skip_ws();
        const char q = peek();
        if (q != '\'' && q != '"') fail("expected quoted string");
        const auto end = s_.find(q, pos_ + 1);
        if (end == std::string_view::npos) fail("unterminated string");
        std::string out(s_.substr(pos_ + 1, end - pos_ - 1));
        pos_ = end + 1;
        return out;
    }
    bool boolean() {
        skip_ws();
        if (s_.substr(pos_, 4) == "True") {
            pos_ += 4;
            return true;
        }
        if (s_.substr(pos_, 5) == "False") {
            pos_ += 5;
            return false;
        }
        fail("expected True or False");
    }
    std::vector<std::size_t> tuple() {
        std::vector<std::size_t> dims;
        expect('(');
        while (true) {
            skip_ws();
            if (peek() == ')') {
                ++pos_;
                return dims;
            }
            std::size_t v = 0;
            const char* first = s_.data() + pos_;
            const char* last = s_.data() + s_.size();
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || ptr == first) fail("expected integer in shape");
            pos_ += static_cast<std::size_t>(ptr - first);
            // numpy may write "3L" on old python 2 files
            if (peek() == 'L') ++pos_;
            dims.push_back(v);
            skip_ws();
            if (peek() == ',') {
                ++pos_;
            } else if (peek() != ')') {
                fail("expected ',' or ')' in shape");
            }
        }
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

std::string header_text(const TensorFile& t) {
    std::string dict = "{'descr': '";
    dict += descr_of(t.dtype);
    dict += "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) dict += ", ";
        dict += std::to_string(t.shape[i]);
    }
    if (t.shape.size() == 1) dict += ",";
    dict += "), }";
    // Pad with spaces so that prelude + header + '\n' is a multiple of 64.
    const std::size_t unpadded = kPreludeLen + dict.size() + 1;
    const std::size_t padded = (unpadded + 63) / 64 * 64;
    dict.append(padded - unpadded, ' ');
    dict += '\n';
    return dict;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(Errc::IoFailure, "read failed for '" + path.string() + "'");
    return bytes;
}

void write_bytes(const std::filesystem::path& path, const void* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot open '" + path.string() + "' for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    out.flush();
    if (!out) throw Error(Errc::IoFailure, "write failed for '" + path.string() + "'");
}

template <typename T>
TensorFile pack(const std::vector<T>& data, std::vector<std::size_t> shape, DType dtype) {
    TensorFile t;
    t.shape = std::move(shape);
    t.dtype = dtype;
    t.payload.resize(data.size() * sizeof(T));
    if (!data.empty()) std::memcpy(t.payload.data(), data.data(), t.payload.size());
    return t;
}

template <typename T>
std::vector<T> unpack(const TensorFile& t) {
    std::vector<T> out(t.element_count());
    if (!out.empty()) std::memcpy(out.data(), t.payload.data(), out.size() * sizeof(T));
    return out;
}

void require(const TensorFile& t, DType dtype, std::size_t rank) {
    t.validate();
    if (t.dtype != dtype) throw Error(Errc::UnsupportedDtype, std::string("expected dtype ") + descr_of(dtype));
    if (t.shape.size() != rank) {
        throw Error(Errc::InvalidShape, "expected rank " + std::to_string(rank) + ", got " +
                                            std::to_string(t.shape.size()));
    }
}

}  // namespace

std::size_t dtype_size(DType t) {
    switch (t) {
        case DType::Float32: return 4;
        case DType::Int32: return 4;
        case DType::UInt8: return 1;
    }
    return 0;
}

std::size_t TensorFile::element_count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

void TensorFile::validate() const {
    if (shape.size() != 2 && shape.size() != 3) {
        throw Error(Errc::InvalidShape, "rank must be 2 or 3, got " + std::to_string(shape.size()));
    }
    if (std::any_of(shape.begin(), shape.end(), [](std::size_t d) { return d == 0; })) {
        throw Error(Errc::InvalidShape, "zero-length dimension");
    }
    if (payload.size() != element_count() * dtype_size(dtype)) {
        throw Error(Errc::InvalidShape, "payload holds " + std::to_string(payload.size()) +
                                            " bytes, shape requires " +
                                            std::to_string(element_count() * dtype_size(dtype)));
    }
}

TensorFile decode_npy(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kPreludeLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
        throw Error(Errc::MalformedHeader, "missing \\x93NUMPY magic");
    }
    if (bytes[6] != 1 || bytes[7] != 0) {
        throw Error(Errc::MalformedHeader,
                    "unsupported NPY version " + std::to_string(bytes[6]) + "." + std::to_string(bytes[7]));
    }
    const std::size_t header_len = bytes[8] | (static_cast<std::size_t>(bytes[9]) << 8);
    if (bytes.size() < kPreludeLen + header_len) throw Error(Errc::MalformedHeader, "header truncated");
    const std::string_view text(reinterpret_cast<const char*>(bytes.data()) + kPreludeLen, header_len);

    std::string descr;
    bool fortran = false;
    TensorFile t;
    HeaderParser(text).parse(descr, fortran, t.shape);
    t.dtype = dtype_from_descr(descr);
    if (fortran) throw Error(Errc::FortranOrderUnsupported, "fortran_order=True is not supported");
    if (t.shape.size() != 2 && t.shape.size() != 3) {
        throw Error(Errc::InvalidShape, "rank must be 2 or 3, got " + std::to_string(t.shape.size()));
    }
    if (std::any_of(t.shape.begin(), t.shape.end(), [](std::size_t d) { return d == 0; })) {
        throw Error(Errc::InvalidShape, "zero-length dimension");
    }

    const std::size_t expected = t.element_count() * dtype_size(t.dtype);
    const std::size_t available = bytes.size() - kPreludeLen - header_len;
    if (available < expected) {
        throw Error(Errc::TruncatedPayload, "payload has " + std::to_string(available) + " of " +
                                                std::to_string(expected) + " bytes");
    }
    if (available > expected) {
        throw Error(Errc::MalformedHeader, std::to_string(available - expected) + " trailing bytes after payload");
    }
    t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(kPreludeLen + header_len), bytes.end());
    return t;
}

std::vector<std::uint8_t> encode_npy(const TensorFile& t) {
    t.validate();
    const std::string header = header_text(t);
    if (header.size() > 0xFFFF) throw Error(Errc::InvalidShape, "header exceeds NPY v1.0 limit");
    std::vector<std::uint8_t> out;
    out.reserve(kPreludeLen + header.size() + t.payload.size());
    out.insert(out.end(), kMagic, kMagic + kMagicLen);
    out.push_back(1);
    out.push_back(0);
    out.push_back(static_cast<std::uint8_t>(header.size() & 0xFF));
    out.push_back(static_cast<std::uint8_t>(header.size() >> 8));
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), t.payload.begin(), t.payload.end());
    return out;
}

TensorFile read_tensor(const std::filesystem::path& path) { return decode_npy(read_bytes(path)); }

void write_tensor(const std::filesystem::path& path, const TensorFile& t) {
    const auto bytes = encode_npy(t);  // validates before touching the file
    write_bytes(path, bytes.data(), bytes.size());
}

ClassAssignment parse_class_assignment(const std::string& text, int max_class) {
    using nlohmann::json;
    std::set<std::string> seen;
    std::string duplicate;
    json::parser_callback_t cb = [&](int depth, json::parse_event_t event, json& parsed) {
        if (depth == 1 && event == json::parse_event_t::key) {
            const auto key = parsed.get<std::string>();
            if (!seen.insert(key).second && duplicate.empty()) duplicate = key;
        }
        return true;
    };
    json doc;
    try {
        doc = json::parse(text, cb);
    } catch (const json::parse_error& e) {
        throw Error(Errc::MalformedJson, e.what());
    }
    if (!duplicate.empty()) throw Error(Errc::DuplicateId, "instance id '" + duplicate + "' appears twice");
    if (!doc.is_object()) throw Error(Errc::MalformedJson, "top level must be an object");

    ClassAssignment out;
    for (const auto& [key, value] : doc.items()) {
        std::int64_t id = 0;
        auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
        if (ec != std::errc{} || ptr != key.data() + key.size() || key.empty()) {
            throw Error(Errc::InvalidId, "instance id '" + key + "' is not a decimal integer");
        }
        if (id <= 0 || id > INT32_MAX) {
            throw Error(Errc::InvalidId, "instance id " + key + " must be positive (0 is background)");
        }
        if (!value.is_number_integer()) {
            throw Error(Errc::MalformedJson, "class of instance " + key + " is not an integer");
        }
        const auto cls = value.get<std::int64_t>();
        if (cls < 1 || cls > max_class) {
            throw Error(Errc::ClassOutOfRange, "instance " + key + " has class " + std::to_string(cls) +
                                                   ", expected 1.." + std::to_string(max_class));
        }
        if (!out.emplace(static_cast<std::int32_t>(id), static_cast<std::int32_t>(cls)).second) {
            // "01" and "1" name the same instance
            throw Error(Errc::DuplicateId, "instance id " + std::to_string(id) + " appears twice");
        }
    }
    return out;
}

ClassAssignment read_class_assignment(const std::filesystem::path& path, int max_class) {
    return parse_class_assignment(read_text_file(path), max_class);
}

std::string format_class_assignment(const ClassAssignment& classes) {
    std::ostringstream os;
    os << '{';
    bool first = true;
    for (const auto& [id, cls] : classes) {
        os << (first ? "\n  \"" : ",\n  \"") << id << "\": " << cls;
        first = false;
    }
    os << (first ? "}\n" : "\n}\n");
    return os.str();
}

void write_class_assignment(const std::filesystem::path& path, const ClassAssignment& classes) {
    write_file(path, format_class_assignment(classes));
}

std::string read_text_file(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    write_bytes(path, contents.data(), contents.size());
}

TensorFile from_array(const Array2<float>& a) { return pack(a.data, {a.rows, a.cols}, DType::Float32); }
TensorFile from_array(const Array2<std::int32_t>& a) { return pack(a.data, {a.rows, a.cols}, DType::Int32); }
TensorFile from_array(const Array2<std::uint8_t>& a) { return pack(a.data, {a.rows, a.cols}, DType::UInt8); }
TensorFile from_array(const Array3<float>& a) {
    return pack(a.data, {a.rows, a.cols, a.channels}, DType::Float32);
}

Array2<float> to_array2f(const TensorFile& t) {
    require(t, DType::Float32, 2);
    Array2<float> a;
    a.rows = t.shape[0];
    a.cols = t.shape[1];
    a.data = unpack<float>(t);
    return a;
}

Array2<std::int32_t> to_array2i(const TensorFile& t) {
    require(t, DType::Int32, 2);
    Array2<std::int32_t> a;
    a.rows = t.shape[0];
    a.cols = t.shape[1];
    a.data = unpack<std::int32_t>(t);
    return a;
}

Array3<float> to_array3f(const TensorFile& t) {
    require(t, DType::Float32, 3);
    Array3<float> a;
    a.rows = t.shape[0];
    a.cols = t.shape[1];
    a.channels = t.shape[2];
    a.data = unpack<float>(t);
    return a;
}

}  // namespace starseg
