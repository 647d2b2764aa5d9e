#include "gate/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <type_traits>

#include "gate/run_config.hpp"

GATE_NAMESPACE_BEGIN

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void pod(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  template <typename T>
  void array(const std::vector<T>& v) {
    pod(std::uint64_t(v.size()));
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  void array(std::span<const Real> v) {
    pod(std::uint64_t(v.size()));
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(Real)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) throw CheckpointError("checkpoint truncated");
    return v;
  }
  /// Reads an array whose length must equal `expected`.
  template <typename T>
  void array_into(T* dst, std::size_t expected, const char* what) {
    const auto n = pod<std::uint64_t>();
    if (n != expected) {
      throw CheckpointError(std::string("checkpoint ") + what + " has " + std::to_string(n) + " entries, expected " +
                            std::to_string(expected));
    }
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in_) throw CheckpointError("checkpoint truncated");
  }
  template <typename T>
  void array_into(std::vector<T>& v, const char* what) {
    array_into(v.data(), v.size(), what);
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_checkpoint(std::ostream& out, const Model& model, const TriangleTrainState& state,
                     std::uint64_t config_hash) {
  Writer w(out);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  w.pod(kCheckpointVersion);
  w.pod(std::uint32_t(sizeof(Real)));
  w.pod(config_hash);
  w.pod(state.last_iteration);
  w.pod(std::uint8_t(model.kind() == EncoderKind::Gate ? 0 : 1));

  w.pod(std::uint32_t(model.mlp.input_width()));
  w.pod(std::uint32_t(model.mlp.output_width()));
  w.array(model.mlp.params());
  w.array(model.mlp_m);
  w.array(model.mlp_v);
  w.pod(model.mlp_step);

  if (model.kind() == EncoderKind::Gate) {
    const FeatureStore& f = model.features;
    w.pod(std::int32_t(f.features));
    w.array(f.values);
    w.array(f.adam_m);
    w.array(f.adam_v);
    w.array(f.slot_step_count);
    w.array(f.level_bases);
  } else {
    const HashGrid& g = model.grid;
    w.pod(std::uint32_t(g.config.table_size));
    w.array(g.params);
    w.array(g.adam_m);
    w.array(g.adam_v);
    w.pod(g.step);
  }

  w.array(state.steps);
  w.array(state.last_trained_iter);
  if (!out) throw CheckpointError("failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const TriangleTrainState& state,
                     std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  save_checkpoint(out, model, state, config_hash);
}

LoadedCheckpoint load_checkpoint(std::istream& in, const Scene& scene, const EncoderConfig& encoder,
                                 std::uint64_t expected_hash) {
  Reader r(in);
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw CheckpointError("not a checkpoint file");
  if (const auto version = r.pod<std::uint32_t>(); version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  if (const auto real_size = r.pod<std::uint32_t>(); real_size != sizeof(Real)) {
    throw CheckpointError("checkpoint stores " + std::to_string(8 * real_size) + "-bit values, this build uses " +
                          std::to_string(8 * sizeof(Real)) + "-bit");
  }
  LoadedCheckpoint out;
  out.config_hash = r.pod<std::uint64_t>();
  if (out.config_hash != expected_hash) {
    throw CheckpointError("checkpoint config hash " + hex64(out.config_hash) + " does not match the run config (" +
                          hex64(expected_hash) + ")");
  }
  const auto last_iteration = r.pod<std::int64_t>();
  const auto kind = r.pod<std::uint8_t>();
  if (kind != (encoder.kind == EncoderKind::Gate ? 0 : 1)) throw CheckpointError("checkpoint encoder kind mismatch");

  out.model = Model(scene, encoder, 0);
  Model& m = out.model;
  const auto d_in = r.pod<std::uint32_t>();
  const auto d_out = r.pod<std::uint32_t>();
  if (d_in != std::uint32_t(m.mlp.input_width()) || d_out != std::uint32_t(m.mlp.output_width())) {
    throw CheckpointError("checkpoint MLP shape mismatch");
  }
  r.array_into(m.mlp.params().data(), m.mlp.parameter_count(), "MLP parameters");
  r.array_into(m.mlp_m, "MLP first moments");
  r.array_into(m.mlp_v, "MLP second moments");
  m.mlp_step = r.pod<std::uint64_t>();

  if (encoder.kind == EncoderKind::Gate) {
    FeatureStore& f = m.features;
    if (r.pod<std::int32_t>() != f.features) throw CheckpointError("checkpoint feature width mismatch");
    r.array_into(f.values, "feature values");
    r.array_into(f.adam_m, "feature first moments");
    r.array_into(f.adam_v, "feature second moments");
    r.array_into(f.slot_step_count, "slot step counts");
    r.array_into(f.level_bases, "level bases");
  } else {
    HashGrid& g = m.grid;
    if (r.pod<std::uint32_t>() != g.config.table_size) throw CheckpointError("checkpoint hash table size mismatch");
    r.array_into(g.params, "grid entries");
    r.array_into(g.adam_m, "grid first moments");
    r.array_into(g.adam_v, "grid second moments");
    g.step = r.pod<std::uint64_t>();
  }

  out.state = TriangleTrainState(scene.triangle_count());
  out.state.last_iteration = last_iteration;
  r.array_into(out.state.steps, "triangle step counts");
  r.array_into(out.state.last_trained_iter, "triangle iteration stamps");
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing data after checkpoint");
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const Scene& scene,
                                 const EncoderConfig& encoder, std::uint64_t expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return load_checkpoint(in, scene, encoder, expected_hash);
}

GATE_NAMESPACE_END
