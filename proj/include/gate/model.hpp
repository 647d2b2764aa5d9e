#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gate/adam.hpp"
#include "gate/gate_encoding.hpp"
#include "gate/hash_grid.hpp"
#include "gate/mlp.hpp"
#include "gate/oneblob.hpp"

GATE_NAMESPACE_BEGIN

enum class EncoderKind { Gate, HashGrid };

std::string to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(const std::string& name);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::Gate;
  ResolutionConfig resolution;
  StorageMode storage = StorageMode::Shared;
  HashGridConfig hash;
  /// Extra MLP inputs: the normal as one-blob encoded spherical angles, and
  /// the mesh albedo passed raw.
  bool normal_input = false;
  bool albedo_input = false;
  int oneblob_bins = kDefaultOneBlobBins;

  static EncoderConfig gate_default();
  /// Hash grid with the normal as an extra input.
  static EncoderConfig hashgrid_default();

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

/// Everything the model needs to know about a query: where it is on the
/// surface and its world-space attributes.
struct QueryPoint {
  SurfacePoint point;
  Vec3 position;
  Vec3 normal;
};

QueryPoint make_query(const Scene& scene, const SurfacePoint& point);
QueryPoint make_query(const Hit& hit);

/// Encoder (GATE features or hash grid) followed by the MLP, together with
/// all optimizer state.
class Model {
 public:
  Model() = default;
  Model(const Scene& scene, const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  EncoderKind kind() const { return config_.kind; }

  /// Width of the encoder output (without extra inputs).
  std::size_t encoding_width() const { return encoding_width_; }
  std::size_t input_width() const { return input_width_; }
  /// Trainable encoder parameters (feature values or grid entries).
  std::size_t encoder_parameter_count() const;
  std::size_t encoder_bytes() const { return encoder_parameter_count() * sizeof(float); }

  /// Writes the MLP input row for one query.
  void encode(const QueryPoint& query, std::span<Real> out) const;
  /// Batched inference, clamping is left to the caller.
  std::vector<Real> predict(std::span<const QueryPoint> queries) const;

  const FeatureLayout& layout() const { return *layout_; }
  bool has_layout() const { return layout_.has_value(); }
  const Aabb& bounds() const { return bounds_; }

  Mlp mlp;
  std::vector<Real> mlp_m;
  std::vector<Real> mlp_v;
  std::uint64_t mlp_step = 0;
  FeatureStore features;  // GATE only
  HashGrid grid;          // hash grid only

  bool operator==(const Model& other) const;

 private:
  EncoderConfig config_;
  std::optional<FeatureLayout> layout_;
  Aabb bounds_;
  std::vector<Rgb> albedo_;
  std::size_t encoding_width_ = 0;
  std::size_t input_width_ = 0;
};

GATE_NAMESPACE_END
