#include "gate/run_config.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

GATE_NAMESPACE_BEGIN

using nlohmann::json;

namespace {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
}

void read_real(const json& j, const char* key, Real& out) {
  if (j.contains(key)) {
    if (!j.at(key).is_number()) throw ConfigError(std::string("config key '") + key + "' must be a number");
    out = static_cast<Real>(j.at(key).get<double>());
  }
}

json vec_to_json(const Vec3& v) { return json::array({double(v.x), double(v.y), double(v.z)}); }

Vec3 vec_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3 || !std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_number(); })) {
    throw ConfigError(std::string(what) + " must be an array of 3 numbers");
  }
  return {Real(j[0].get<double>()), Real(j[1].get<double>()), Real(j[2].get<double>())};
}

json trainer_to_json(const TrainerConfig& t) {
  return {{"batch", t.batch_size},         {"candidates", t.candidates},
          {"count_cap", t.count_cap},      {"group", t.group_size},
          {"iterations", t.iterations},    {"prioritize", t.prioritize},
          {"lr", double(t.adam.lr)},       {"beta1", double(t.adam.beta1)},
          {"beta2", double(t.adam.beta2)}, {"epsilon", double(t.adam.epsilon)}};
}

TrainerConfig trainer_from_json(const json& j) {
  reject_unknown_keys(j, {"batch", "candidates", "count_cap", "group", "iterations", "prioritize", "lr", "beta1",
                          "beta2", "epsilon"},
                      "trainer");
  TrainerConfig t;
  read(j, "batch", t.batch_size);
  read(j, "candidates", t.candidates);
  read(j, "count_cap", t.count_cap);
  read(j, "group", t.group_size);
  read(j, "iterations", t.iterations);
  read(j, "prioritize", t.prioritize);
  read_real(j, "lr", t.adam.lr);
  read_real(j, "beta1", t.adam.beta1);
  read_real(j, "beta2", t.adam.beta2);
  read_real(j, "epsilon", t.adam.epsilon);
  return t;
}

json ao_to_json(const AoParams& a) {
  return {{"spp", a.spp}, {"max_dist", double(a.max_dist)}, {"reference_spp", a.reference_spp}};
}

AoParams ao_from_json(const json& j) {
  reject_unknown_keys(j, {"spp", "max_dist", "reference_spp"}, "ao");
  AoParams a;
  read(j, "spp", a.spp);
  read_real(j, "max_dist", a.max_dist);
  read(j, "reference_spp", a.reference_spp);
  return a;
}

Camera default_camera(const Scene& scene) {
  const Aabb& box = scene.aabb();
  Camera cam;
  cam.look_at = box.center();
  cam.position = box.center() + normalize(Vec3{1, Real(0.8), Real(1.6)}) * (Real(1.1) * box.diagonal());
  return cam;
}

}  // namespace

json encoder_to_json(const EncoderConfig& cfg) {
  json j;
  j["encoder"] = to_string(cfg.kind);
  if (cfg.kind == EncoderKind::Gate) {
    Real r_scale = 1;
    for (const ResolutionLevel& l : cfg.resolution.levels) {
      if (l.kind == ResolutionLevel::Kind::Adaptive) {
        r_scale = l.r_scale;
        break;
      }
    }
    json levels = json::array();
    for (const ResolutionLevel& l : cfg.resolution.levels) {
      if (l.kind == ResolutionLevel::Kind::Fixed) {
        levels.push_back(l.fixed_r);
      } else if (l.r_scale == r_scale) {
        levels.push_back("adaptive");
      } else {
        levels.push_back(json{{"adaptive", double(l.r_scale)}});
      }
    }
    j["levels"] = levels;
    j["features"] = cfg.resolution.features_per_level;
    j["R_scale"] = double(r_scale);
    j["storage"] = to_string(cfg.storage);
  } else {
    j["levels"] = cfg.hash.levels;
    j["features"] = cfg.hash.features;
    j["base_resolution"] = cfg.hash.base_resolution;
    j["growth_factor"] = double(cfg.hash.growth_factor);
    j["table_size"] = cfg.hash.table_size;
  }
  json extra = json::array();
  if (cfg.normal_input) extra.push_back("normal");
  if (cfg.albedo_input) extra.push_back("albedo");
  j["extra_inputs"] = extra;
  j["oneblob_bins"] = cfg.oneblob_bins;
  return j;
}

EncoderConfig encoder_from_json(const json& j, const EncoderConfig& defaults) {
  reject_unknown_keys(j, {"encoder", "levels", "features", "R_scale", "storage", "base_resolution", "growth_factor",
                          "table_size", "extra_inputs", "oneblob_bins"},
                      "encoder");
  EncoderConfig cfg = defaults;
  if (j.contains("encoder")) {
    const EncoderKind kind = encoder_kind_from_string(j.at("encoder").get<std::string>());
    if (kind != defaults.kind) {
      cfg = kind == EncoderKind::Gate ? EncoderConfig::gate_default() : EncoderConfig::hashgrid_default();
    }
  }
  if (cfg.kind == EncoderKind::Gate) {
    for (const char* key : {"base_resolution", "growth_factor", "table_size"}) {
      if (j.contains(key)) throw ConfigError(std::string("encoder key '") + key + "' applies to hashgrid only");
    }
    Real r_scale = 1;
    read_real(j, "R_scale", r_scale);
    if (j.contains("levels")) {
      const json& levels = j.at("levels");
      if (!levels.is_array()) throw ConfigError("encoder.levels must be an array for the gate encoder");
      cfg.resolution.levels.clear();
      for (const json& l : levels) {
        if (l.is_number_integer()) {
          cfg.resolution.levels.push_back(ResolutionLevel::fixed(l.get<int>()));
        } else if (l.is_string() && l.get<std::string>() == "adaptive") {
          cfg.resolution.levels.push_back(ResolutionLevel::adaptive(r_scale));
        } else if (l.is_object() && l.size() == 1 && l.contains("adaptive") && l.at("adaptive").is_number()) {
          cfg.resolution.levels.push_back(ResolutionLevel::adaptive(Real(l.at("adaptive").get<double>())));
        } else {
          throw ConfigError("encoder.levels entries must be integers, \"adaptive\" or {\"adaptive\": scale}");
        }
      }
    } else if (j.contains("R_scale")) {
      for (ResolutionLevel& l : cfg.resolution.levels) {
        if (l.kind == ResolutionLevel::Kind::Adaptive) l.r_scale = r_scale;
      }
    }
    read(j, "features", cfg.resolution.features_per_level);
    if (j.contains("storage")) cfg.storage = storage_mode_from_string(j.at("storage").get<std::string>());
  } else {
    for (const char* key : {"R_scale", "storage"}) {
      if (j.contains(key)) throw ConfigError(std::string("encoder key '") + key + "' applies to gate only");
    }
    if (j.contains("levels") && !j.at("levels").is_number_integer()) {
      throw ConfigError("encoder.levels must be an integer for the hashgrid encoder");
    }
    read(j, "levels", cfg.hash.levels);
    read(j, "features", cfg.hash.features);
    read(j, "base_resolution", cfg.hash.base_resolution);
    read_real(j, "growth_factor", cfg.hash.growth_factor);
    if (j.contains("table_size") && !j.at("table_size").is_string()) read(j, "table_size", cfg.hash.table_size);
  }
  if (j.contains("extra_inputs")) {
    cfg.normal_input = false;
    cfg.albedo_input = false;
    for (const json& e : j.at("extra_inputs")) {
      const std::string name = e.get<std::string>();
      if (name == "normal") {
        cfg.normal_input = true;
      } else if (name == "albedo") {
        cfg.albedo_input = true;
      } else if (name == "direction") {
        throw ConfigError("extra input 'direction' is not available: ambient occlusion has no view direction");
      } else {
        throw ConfigError("unknown extra input '" + name + "' (expected normal or albedo)");
      }
    }
  }
  read(j, "oneblob_bins", cfg.oneblob_bins);
  cfg.validate();
  return cfg;
}

json camera_to_json(const Camera& c) {
  return {{"position", vec_to_json(c.position)},
          {"look_at", vec_to_json(c.look_at)},
          {"up", vec_to_json(c.up)},
          {"vfov", double(c.vfov_degrees)},
          {"width", c.width},
          {"height", c.height}};
}

Camera camera_from_json(const json& j, const Camera& defaults) {
  reject_unknown_keys(j, {"position", "look_at", "up", "vfov", "width", "height"}, "camera");
  Camera c = defaults;
  if (j.contains("position")) c.position = vec_from_json(j.at("position"), "camera.position");
  if (j.contains("look_at")) c.look_at = vec_from_json(j.at("look_at"), "camera.look_at");
  if (j.contains("up")) c.up = vec_from_json(j.at("up"), "camera.up");
  read_real(j, "vfov", c.vfov_degrees);
  read(j, "width", c.width);
  read(j, "height", c.height);
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (scene.empty() == fixture.empty()) throw ConfigError("exactly one of 'scene' and 'fixture' must be set");
  if (!fixture.empty() && fixture != "corner" && fixture != "quad" && fixture != "stadium" && fixture != "mixed") {
    throw ConfigError("unknown fixture '" + fixture + "' (expected corner|quad|stadium|mixed)");
  }
  if (!scene.empty() && !std::filesystem::exists(scene)) throw ConfigError("scene file not found: " + scene);
  encoder.validate();
  if (baseline.kind != EncoderKind::HashGrid) throw ConfigError("baseline encoder must be hashgrid");
  baseline.validate();
  trainer.validate();
  ao.validate();
  if (camera) camera->validate();
  if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
  if (out.empty()) throw ConfigError("output directory must not be empty");
}

json to_json(const RunConfig& cfg) {
  json j;
  if (!cfg.scene.empty()) j["scene"] = cfg.scene;
  if (!cfg.fixture.empty()) j["fixture"] = cfg.fixture;
  j["encoder"] = encoder_to_json(cfg.encoder);
  json baseline = encoder_to_json(cfg.baseline);
  if (cfg.auto_table_size) baseline["table_size"] = "auto";
  j["baseline"] = baseline;
  j["trainer"] = trainer_to_json(cfg.trainer);
  j["ao"] = ao_to_json(cfg.ao);
  if (cfg.camera) j["camera"] = camera_to_json(*cfg.camera);
  j["eval_every"] = cfg.eval_every;
  j["out"] = cfg.out;
  j["seed"] = cfg.seed;
  j["deterministic"] = cfg.deterministic;
  j["threads"] = cfg.threads;
  return j;
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  reject_unknown_keys(j, {"scene", "fixture", "encoder", "baseline", "trainer", "ao", "camera", "eval_every", "out",
                          "seed", "deterministic", "threads"},
                      "config");
  RunConfig cfg;
  read(j, "scene", cfg.scene);
  if (!cfg.scene.empty() && !base_dir.empty() && std::filesystem::path(cfg.scene).is_relative()) {
    cfg.scene = (base_dir / cfg.scene).lexically_normal().string();
  }
  read(j, "fixture", cfg.fixture);
  if (j.contains("encoder")) {
    if (j.at("encoder").contains("table_size") && j.at("encoder").at("table_size").is_string()) {
      throw ConfigError("encoder.table_size must be an integer ('auto' is only valid for the baseline)");
    }
    cfg.encoder = encoder_from_json(j.at("encoder"), cfg.encoder);
  }
  if (j.contains("baseline")) {
    const json& b = j.at("baseline");
    cfg.baseline = encoder_from_json(b, cfg.baseline);
    if (b.contains("table_size")) {
      const json& t = b.at("table_size");
      if (t.is_string() && t.get<std::string>() != "auto") {
        throw ConfigError("baseline.table_size must be an integer or \"auto\"");
      }
      cfg.auto_table_size = t.is_string();
    }
  }
  if (j.contains("trainer")) cfg.trainer = trainer_from_json(j.at("trainer"));
  if (j.contains("ao")) cfg.ao = ao_from_json(j.at("ao"));
  if (j.contains("camera")) cfg.camera = camera_from_json(j.at("camera"));
  read(j, "eval_every", cfg.eval_every);
  read(j, "out", cfg.out);
  read(j, "seed", cfg.seed);
  read(j, "deterministic", cfg.deterministic);
  read(j, "threads", cfg.threads);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << to_json(cfg).dump(2) << '\n';
}

Fixture load_scene_manifest(const std::filesystem::path& path) {
  if (path.extension() == ".obj") {
    Fixture f;
    f.scene = load_obj(path);
    f.camera = default_camera(f.scene);
    return f;
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  reject_unknown_keys(j, {"meshes", "camera"}, "scene manifest");
  if (!j.contains("meshes") || !j.at("meshes").is_array() || j.at("meshes").empty()) {
    throw ConfigError(path.string() + ": 'meshes' must be a non-empty array");
  }
  Fixture f;
  for (const json& m : j.at("meshes")) {
    reject_unknown_keys(m, {"obj", "albedo"}, "scene manifest mesh");
    if (!m.contains("obj")) throw ConfigError(path.string() + ": every mesh needs an 'obj' path");
    std::filesystem::path obj = m.at("obj").get<std::string>();
    if (obj.is_relative()) obj = path.parent_path() / obj;
    std::optional<Rgb> albedo;
    if (m.contains("albedo")) {
      const Vec3 a = vec_from_json(m.at("albedo"), "albedo");
      albedo = Rgb{a.x, a.y, a.z};
    }
    Scene part = load_obj(obj);
    for (Mesh mesh : part.meshes()) {
      if (albedo) mesh.albedo = albedo;
      f.scene.add_mesh(std::move(mesh));
    }
  }
  f.camera = j.contains("camera") ? camera_from_json(j.at("camera"), default_camera(f.scene)) : default_camera(f.scene);
  return f;
}

Fixture load_run_scene(const RunConfig& cfg) {
  Fixture f = cfg.fixture.empty() ? load_scene_manifest(cfg.scene) : make_fixture(cfg.fixture);
  if (cfg.camera) f.camera = *cfg.camera;
  return f;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t scene_hash(const Scene& scene) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto add = [&h](const auto& value) { h = fnv1a64(&value, sizeof value, h); };
  add(std::uint64_t(scene.mesh_count()));
  for (const Mesh& mesh : scene.meshes()) {
    h = fnv1a64(mesh.name.data(), mesh.name.size(), h);
    add(std::uint64_t(mesh.vertices.size()));
    // Hash positions at single precision so both precision builds agree.
    for (const Vec3& v : mesh.vertices) {
      add(float(v.x));
      add(float(v.y));
      add(float(v.z));
    }
    add(std::uint64_t(mesh.indices.size()));
    for (const Triangle& t : mesh.indices) add(t);
    add(std::uint8_t(mesh.albedo.has_value()));
    if (mesh.albedo) {
      for (Real c : *mesh.albedo) add(float(c));
    }
  }
  return h;
}

std::uint64_t config_hash(const Scene& scene, const EncoderConfig& encoder) {
  std::uint64_t h = scene_hash(scene);
  const std::string enc = encoder_to_json(encoder).dump();
  h = fnv1a64(enc.data(), enc.size(), h);
  const std::string mlp = "mlp:2x" + std::to_string(kHiddenWidth) + ":leaky0.01:out1";
  return fnv1a64(mlp.data(), mlp.size(), h);
}

std::string hex64(std::uint64_t value) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << value;
  return s.str();
}

GATE_NAMESPACE_END
