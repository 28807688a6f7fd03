#pragma once

// Binary checkpoint container.
//
//   magic    8 bytes  "GNNRXCKP"
//   version  uint32   (currently 1)
//   entries  until end of stream, each:
//     uint32 name length, UTF-8 name bytes,
//     uint32 rank, rank × uint64 dims,
//     prod(dims) × float64 payload in row-major order
//
// All integers and floats are little-endian.

#include "gnnrx/nn/adam.hpp"
#include "gnnrx/nn/autodiff.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace gnnrx::nn {

inline constexpr char kCheckpointMagic[8] = {'G', 'N', 'N', 'R', 'X', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<double> data; // row-major
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

NamedArray to_named_array(std::string name, const Matrix& m);
Matrix to_matrix(const NamedArray& a);

void write_checkpoint(std::ostream& out, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_checkpoint(std::istream& in);

/// Parameters, plus Adam moments and step counter when `adam` is given.
std::vector<NamedArray> pack_training_state(const ParameterSet& params, const AdamState* adam);

/// Restores values by name. Every parameter must be present with matching shape.
/// Adam state is restored when `adam` is non-null and the moments are present.
void unpack_training_state(const std::vector<NamedArray>& arrays, ParameterSet& params, AdamState* adam);

void save_checkpoint_file(const std::string& path, const ParameterSet& params, const AdamState* adam);
void load_checkpoint_file(const std::string& path, ParameterSet& params, AdamState* adam);

} // namespace gnnrx::nn
