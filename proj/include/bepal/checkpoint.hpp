#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "bepal/tensor.hpp"
#include "bepal/training.hpp"

namespace bepal::io {

/// Tensor wire format (little-endian):
///   u32 ndim, u64 dims[ndim], f64 values[prod(dims)]
void write_tensor(std::ostream& os, const num::Tensor& t);
num::Tensor read_tensor(std::istream& is);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Self-describing checkpoint container:
///   "BEPALCKP" u32 version
///   u64 metadata_len, metadata (JSON text)
///   u64 n_tensors, then per tensor: u32 name_len, name, tensor
/// Parameters are stored under their model names, optimizer accumulators
/// under "rmsprop.<name>".
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string metadata;  // JSON: run config, epoch, RNG state, code version
  std::vector<std::pair<std::string, num::Tensor>> tensors;
};

void save_checkpoint_file(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint_file(const std::string& path);

/// Copies `tensors` entries into the trainer's parameters and optimizer
/// accumulators by name; throws on any missing or mis-shaped entry.
void restore_tensors(const Checkpoint& ckpt, train::TrainerState& state);
std::vector<std::pair<std::string, num::Tensor>> collect_tensors(const train::TrainerState& state);

/// SHA-free content fingerprint (FNV-1a 64) of a file, for mutation checks.
std::uint64_t file_fingerprint(const std::string& path);

}  // namespace bepal::io
