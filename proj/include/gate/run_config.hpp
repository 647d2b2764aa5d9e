#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "gate/fixtures.hpp"
#include "gate/nao.hpp"
#include "gate/training.hpp"

GATE_NAMESPACE_BEGIN

/// Everything a CLI run needs. Serializes to and from JSON without loss.
struct RunConfig {
  /// Scene manifest (.json) or a single OBJ file; ignored when `fixture` is set.
  std::string scene;
  /// Built-in scene: corner, quad, stadium or mixed.
  std::string fixture;
  EncoderConfig encoder = EncoderConfig::gate_default();
  /// Hash-grid side of `compare`.
  EncoderConfig baseline = EncoderConfig::hashgrid_default();
  /// When true, `compare` matches the baseline table size to the GATE
  /// parameter count instead of using baseline.hash.table_size.
  bool auto_table_size = true;
  TrainerConfig trainer;
  AoParams ao;
  std::optional<Camera> camera;
  /// Evaluate against the reference every K iterations (0: final only).
  int eval_every = 0;
  std::string out = "out";
  std::uint64_t seed = 1;
  bool deterministic = false;
  unsigned threads = 0;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

nlohmann::json encoder_to_json(const EncoderConfig& cfg);
/// Missing keys keep the values of `defaults`.
EncoderConfig encoder_from_json(const nlohmann::json& j, const EncoderConfig& defaults);

nlohmann::json camera_to_json(const Camera& camera);
Camera camera_from_json(const nlohmann::json& j, const Camera& defaults = {});

nlohmann::json to_json(const RunConfig& cfg);
/// Relative scene paths are resolved against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Scene and camera of a run: the fixture or the manifest, with the config
/// camera (if any) taking precedence.
Fixture load_run_scene(const RunConfig& cfg);

/// Manifest format: {"meshes": [{"obj": path, "albedo": [r, g, b]}], "camera": {...}}.
Fixture load_scene_manifest(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t scene_hash(const Scene& scene);
/// Identifies the trained model: scene geometry plus the encoder and MLP
/// shape. Iteration count, seed, camera and output settings are excluded.
std::uint64_t config_hash(const Scene& scene, const EncoderConfig& encoder);
std::string hex64(std::uint64_t value);

GATE_NAMESPACE_END
