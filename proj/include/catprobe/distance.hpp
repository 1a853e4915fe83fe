#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include "catprobe/matrix.hpp"
#include "catprobe/uast.hpp"

namespace catprobe {

// All-pairs shortest paths between leaves over tree edges plus adjacency
// edges, every edge weight 1. One BFS per leaf; the rows run in parallel.
DistanceMatrix distance_matrix(const UAst& uast);

// Single-threaded reference for distance_matrix(); same result, cell for cell.
DistanceMatrix distance_matrix_serial(const UAst& uast);

// CSV with token texts as header row and first column. An empty `labels`
// falls back to numeric indices.
void write_distance_csv(std::ostream& out, const DistanceMatrix& d,
                        std::span<const std::string> labels = {});

// Binary block form: little-endian uint32 cells, row-major, base64 encoded.
std::string encode_distance_block(const DistanceMatrix& d);
// Throws FormatError / ShapeError when the payload does not decode to n*n cells.
DistanceMatrix decode_distance_block(std::string_view b64, std::size_t n);

}  // namespace catprobe
