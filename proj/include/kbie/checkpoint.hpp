#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "kbie/tensor.hpp"

namespace kbie {

// Binary parameter checkpoint. Layout:
//   magic "KBIECKP1"
//   u64 tensor count
//   per tensor: u32 name length, name bytes, u32 rank, u64 extents, f64 payload
// All integers and float bit patterns little-endian. Round-trips bit-exact.
inline constexpr char kCheckpointMagic[8] = {'K', 'B', 'I', 'E', 'C', 'K', 'P', '1'};

void write_checkpoint(std::ostream& os, const std::vector<std::pair<std::string, const Tensor*>>& tensors);
void write_checkpoint_file(const std::string& path, const std::vector<Parameter*>& params);

// Preserves file order in the returned vector; names must be unique.
std::vector<std::pair<std::string, Tensor>> read_checkpoint(std::istream& is);
std::vector<std::pair<std::string, Tensor>> read_checkpoint_file(const std::string& path);

// Loads values into matching parameters by name. Every parameter must be
// present in the file with an identical shape.
void load_into_params(const std::vector<std::pair<std::string, Tensor>>& entries,
                      const std::vector<Parameter*>& params);

}  // namespace kbie
