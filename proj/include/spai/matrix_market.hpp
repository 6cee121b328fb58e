#pragma once

#include "spai/sparse.hpp"

#include <filesystem>
#include <iosfwd>

namespace spai {

/// Reads `%%MatrixMarket matrix coordinate real general|symmetric`.
/// Symmetric files are expanded to full storage. Duplicate coordinates are rejected.
SparseMatrix read_matrix_market(std::istream& in);
SparseMatrix read_matrix_market(const std::filesystem::path& path);

enum class MatrixMarketSymmetry { general, symmetric };

/// Writes values with 17 significant digits so a read reproduces them bit-exactly.
/// `symmetric` stores only the lower triangle and requires a symmetric matrix.
void write_matrix_market(const SparseMatrix& a, std::ostream& out,
                         MatrixMarketSymmetry symmetry = MatrixMarketSymmetry::general);
void write_matrix_market(const SparseMatrix& a, const std::filesystem::path& path,
                         MatrixMarketSymmetry symmetry = MatrixMarketSymmetry::general);

} // namespace spai
