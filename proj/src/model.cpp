#include "gate/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "gate/parallel.hpp"

GATE_NAMESPACE_BEGIN

namespace {

constexpr std::size_t kPredictChunk = 256;
const Rgb kDefaultAlbedo{1, 1, 1};

}  // namespace

std::string to_string(EncoderKind kind) { return kind == EncoderKind::Gate ? "gate" : "hashgrid"; }

EncoderKind encoder_kind_from_string(const std::string& name) {
  if (name == "gate") return EncoderKind::Gate;
  if (name == "hashgrid") return EncoderKind::HashGrid;
  throw std::invalid_argument("unknown encoder '" + name + "' (expected gate or hashgrid)");
}

EncoderConfig EncoderConfig::gate_default() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::hashgrid_default() {
  EncoderConfig cfg;
  cfg.kind = EncoderKind::HashGrid;
  cfg.normal_input = true;
  return cfg;
}

void EncoderConfig::validate() const {
  if (kind == EncoderKind::Gate) {
    resolution.validate();
  } else {
    hash.validate();
  }
  if (oneblob_bins < 2) throw std::invalid_argument("one-blob bins must be >= 2");
}

QueryPoint make_query(const Scene& scene, const SurfacePoint& point) {
  return {point, surface_position(scene, point), surface_normal(scene, point)};
}

QueryPoint make_query(const Hit& hit) { return {hit.point, hit.position, hit.geo_normal}; }

Model::Model(const Scene& scene, const EncoderConfig& config, std::uint64_t seed)
    : config_(config), bounds_(scene.aabb()) {
  config_.validate();
  for (const Mesh& mesh : scene.meshes()) albedo_.push_back(mesh.albedo.value_or(kDefaultAlbedo));

  if (config_.kind == EncoderKind::Gate) {
    layout_ = build_layout(scene, config_.resolution, config_.storage);
    features = init_features(*layout_, derive_seed(seed, 0x66656174ULL));
    encoding_width_ = gate_encoding_width(*layout_);
  } else {
    grid = make_hash_grid(config_.hash, derive_seed(seed, 0x68617368ULL));
    encoding_width_ = grid.width();
  }
  input_width_ = encoding_width_;
  if (config_.normal_input) input_width_ += 2 * std::size_t(config_.oneblob_bins);
  if (config_.albedo_input) input_width_ += 3;

  mlp = mlp_init(static_cast<int>(input_width_), 1, derive_seed(seed, 0x6e6574ULL));
  mlp_m.assign(mlp.parameter_count(), 0);
  mlp_v.assign(mlp.parameter_count(), 0);
}

std::size_t Model::encoder_parameter_count() const {
  return config_.kind == EncoderKind::Gate ? features.values.size() : grid.params.size();
}

void Model::encode(const QueryPoint& query, std::span<Real> out) const {
  if (out.size() != input_width_) throw std::invalid_argument("Model::encode: bad output width");
  if (config_.kind == EncoderKind::Gate) {
    gate_encode(features, *layout_, query.point, out.first(encoding_width_));
  } else {
    hashgrid_encode(grid, query.position, bounds_, out.first(encoding_width_));
  }
  std::size_t offset = encoding_width_;
  if (config_.normal_input) {
    const std::size_t n = 2 * std::size_t(config_.oneblob_bins);
    encode_direction(query.normal, config_.oneblob_bins, out.subspan(offset, n));
    offset += n;
  }
  if (config_.albedo_input) {
    const Rgb& a = albedo_.at(query.point.mesh_id);
    std::copy(a.begin(), a.end(), out.begin() + static_cast<std::ptrdiff_t>(offset));
  }
}

std::vector<Real> Model::predict(std::span<const QueryPoint> queries) const {
  std::vector<Real> out(queries.size());
  const std::size_t chunks = (queries.size() + kPredictChunk - 1) / kPredictChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * kPredictChunk;
    const std::size_t end = std::min(queries.size(), begin + kPredictChunk);
    std::vector<Real> inputs((end - begin) * input_width_);
    for (std::size_t i = begin; i < end; ++i) {
      encode(queries[i], std::span<Real>(inputs).subspan((i - begin) * input_width_, input_width_));
    }
    ForwardCache cache;
    mlp_forward(mlp, inputs, end - begin, cache);
    std::copy(cache.output.begin(), cache.output.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
  });
  return out;
}

bool Model::operator==(const Model& other) const {
  return config_ == other.config_ && mlp == other.mlp && mlp_m == other.mlp_m && mlp_v == other.mlp_v &&
         mlp_step == other.mlp_step && features == other.features && grid == other.grid;
}

GATE_NAMESPACE_END
