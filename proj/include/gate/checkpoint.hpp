#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "gate/training.hpp"

GATE_NAMESPACE_BEGIN

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'G', 'A', 'T', 'E', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary snapshot of a model, its optimizer state and the triangle
/// counters. Loading then saving reproduces the file byte for byte.
void save_checkpoint(std::ostream& out, const Model& model, const TriangleTrainState& state,
                     std::uint64_t config_hash);
void save_checkpoint(const std::filesystem::path& path, const Model& model, const TriangleTrainState& state,
                     std::uint64_t config_hash);

struct LoadedCheckpoint {
  Model model;
  TriangleTrainState state;
  std::uint64_t config_hash = 0;
};

/// Rebuilds the model for (scene, encoder) and restores its state. Throws
/// CheckpointError when the file is malformed, written by the other precision
/// build, or its config hash differs from `expected_hash`.
LoadedCheckpoint load_checkpoint(std::istream& in, const Scene& scene, const EncoderConfig& encoder,
                                 std::uint64_t expected_hash);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const Scene& scene,
                                 const EncoderConfig& encoder, std::uint64_t expected_hash);

GATE_NAMESPACE_END
