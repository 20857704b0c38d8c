#pragma once

#include "psld/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace psld {

// Binary layout (all integers little-endian):
//   "PSLD1"
//   repeated until EOF:
//     u32 name length, name bytes, u32 rank, rank x u64 dims,
//     prod(dims) x f64 payload
// Biases are stored with rank 1, weights with rank 2.

inline constexpr char kCheckpointMagic[] = "PSLD1";

struct StoredTensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<double> values;
};

std::string encode_checkpoint(std::span<const StoredTensor> tensors);
/// Throws FormatError("bad magic") / FormatError on truncation.
std::vector<StoredTensor> decode_checkpoint(const std::string& bytes);

std::vector<StoredTensor> to_stored(std::span<const ConstNamedTensor> tensors);
/// Copies stored values into `targets` by name; every target must be present
/// with a matching element count.
void assign_stored(std::span<const StoredTensor> stored, std::span<const NamedTensor> targets);

void write_checkpoint(const std::filesystem::path& path, std::span<const ConstNamedTensor> tensors);
std::vector<StoredTensor> read_checkpoint(const std::filesystem::path& path);

} // namespace psld
