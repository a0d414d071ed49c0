#include "latent_align/npy.hpp"

#include "latent_align/error.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <regex>
#include <string>
#include <vector>

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace latent_align {

namespace {

constexpr std::array<char, 6> kMagic = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

struct Header {
    NpyDtype dtype;
    std::vector<std::size_t> shape;
};

[[noreturn]] void format_error(const std::filesystem::path& path, const std::string& what) {
    fail(ErrorKind::FormatError, path.string() + ": " + what);
}

Header parse_header(const std::filesystem::path& path, const std::string& dict) {
    static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
    static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
    static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");

    std::smatch m;
    Header h{};
    if (!std::regex_search(dict, m, descr_re)) {
        format_error(path, "header has no descr");
    }
    const std::string descr = m[1];
    if (descr == "<f8") {
        h.dtype = NpyDtype::Float64;
    } else if (descr == "<f4") {
        h.dtype = NpyDtype::Float32;
    } else {
        format_error(path, "unsupported dtype '" + descr + "' (need <f4 or <f8)");
    }

    if (!std::regex_search(dict, m, order_re)) {
        format_error(path, "header has no fortran_order");
    }
    if (m[1] == "True") {
        format_error(path, "Fortran-ordered arrays are not supported");
    }

    if (!std::regex_search(dict, m, shape_re)) {
        format_error(path, "header has no shape");
    }
    const std::string dims = m[1];
    static const std::regex dim_re(R"(\d+)");
    for (auto it = std::sregex_iterator(dims.begin(), dims.end(), dim_re);
         it != std::sregex_iterator(); ++it) {
        h.shape.push_back(static_cast<std::size_t>(std::stoull(it->str())));
    }
    return h;
}

} // namespace

Matrix load_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::IoError, "cannot open " + path.string());
    }
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

    if (bytes.size() < 10 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        format_error(path, "missing NPY magic string");
    }
    const auto major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t offset = 0;
    if (major == 1) {
        header_len = static_cast<unsigned char>(bytes[8]) |
                     (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
        offset = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) {
            format_error(path, "truncated header");
        }
        for (int b = 0; b < 4; ++b) {
            header_len |= static_cast<std::size_t>(static_cast<unsigned char>(bytes[8 + b]))
                          << (8 * b);
        }
        offset = 12;
    } else {
        format_error(path, "unsupported NPY version " + std::to_string(major));
    }
    if (offset + header_len > bytes.size()) {
        format_error(path, "truncated header");
    }
    const Header h = parse_header(path, bytes.substr(offset, header_len));
    if (h.shape.size() != 2) {
        fail(ErrorKind::InvalidShape, path.string() + ": expected a 2-D array, got " +
                                          std::to_string(h.shape.size()) + " dimension(s)");
    }

    const std::size_t rows = h.shape[0];
    const std::size_t cols = h.shape[1];
    const std::size_t width = h.dtype == NpyDtype::Float64 ? 8 : 4;
    const std::size_t payload = offset + header_len;
    if (bytes.size() - payload < rows * cols * width) {
        format_error(path, "payload shorter than declared shape");
    }

    Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const char* src = bytes.data() + payload;
    if (h.dtype == NpyDtype::Float64) {
        std::memcpy(out.data(), src, rows * cols * width);
    } else {
        for (std::size_t i = 0; i < rows * cols; ++i) {
            float v;
            std::memcpy(&v, src + i * width, width);
            out.data()[i] = static_cast<double>(v);
        }
    }
    require_finite(out, path.string());
    return out;
}

void save_matrix(const std::filesystem::path& path, const Matrix& m, NpyDtype dtype) {
    const bool f64 = dtype == NpyDtype::Float64;
    std::string dict = std::string("{'descr': '") + (f64 ? "<f8" : "<f4") +
                       "', 'fortran_order': False, 'shape': (" + std::to_string(m.rows()) + ", " +
                       std::to_string(m.cols()) + "), }";
    // Pad so magic + length field + dict + newline is a multiple of 64 bytes.
    const std::size_t unpadded = kMagic.size() + 4 + dict.size() + 1;
    dict.append((64 - unpadded % 64) % 64, ' ');
    dict.push_back('\n');

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorKind::IoError, "cannot write " + path.string());
    }
    out.write(kMagic.data(), kMagic.size());
    const char version[2] = {1, 0};
    out.write(version, 2);
    const auto len = static_cast<std::uint16_t>(dict.size());
    const char len_bytes[2] = {static_cast<char>(len & 0xFF), static_cast<char>(len >> 8)};
    out.write(len_bytes, 2);
    out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
    if (f64) {
        out.write(reinterpret_cast<const char*>(m.data()),
                  static_cast<std::streamsize>(m.size() * sizeof(double)));
    } else {
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const auto v = static_cast<float>(m.data()[i]);
            out.write(reinterpret_cast<const char*>(&v), sizeof(float));
        }
    }
    if (!out) {
        fail(ErrorKind::IoError, "failed writing " + path.string());
    }
}

} // namespace latent_align
