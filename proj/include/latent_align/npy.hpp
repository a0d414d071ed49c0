#pragma once

// Reader/writer for the NumPy .npy single-array format (versions 1.0-3.0 read,
// 1.0 written). Only little-endian float32/float64, C-order, 2-D arrays are
// accepted; float32 payloads are widened to double.

#include "latent_align/matrix.hpp"

#include <filesystem>

namespace latent_align {

enum class NpyDtype { Float32, Float64 };

/// Load a 2-D matrix. Errors: IoError (unreadable), FormatError (bad header or
/// dtype), InvalidShape (not 2-D), DataError via CellError (NaN/Inf).
Matrix load_matrix(const std::filesystem::path& path);

/// Write a 2-D matrix as NPY 1.0.
void save_matrix(const std::filesystem::path& path, const Matrix& m,
                 NpyDtype dtype = NpyDtype::Float64);

} // namespace latent_align
