#include "gate/nao.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gate/parallel.hpp"

GATE_NAMESPACE_BEGIN

Image::Image(int w, int h, Rgb fill) : width(w), height(h) {
  if (w < 1 || h < 1) throw std::invalid_argument("image dimensions must be >= 1");
  pixels.assign(std::size_t(w) * std::size_t(h), fill);
}

void AoParams::validate() const {
  if (spp < 1) throw std::invalid_argument("AO spp must be >= 1");
  if (reference_spp < 1) throw std::invalid_argument("AO reference spp must be >= 1");
  if (!(max_dist >= 0) || !std::isfinite(max_dist)) {
    throw std::invalid_argument("AO max_dist must be positive (or 0 for automatic)");
  }
}

AoParams AoParams::resolved(const Scene& scene) const {
  validate();
  AoParams out = *this;
  if (out.max_dist == 0) out.max_dist = Real(0.2) * scene.aabb().diagonal();
  if (!(out.max_dist > 0)) throw std::invalid_argument("AO max_dist resolves to zero for an empty scene");
  return out;
}

Real ao_oracle(const Bvh& bvh, const Vec3& position, const Vec3& normal, int spp, Real max_dist, Pcg32& rng) {
  Vec3 tangent, bitangent;
  make_frame(normal, tangent, bitangent);
  Ray ray;
  ray.origin = position + normal * ray_offset(position, bvh.scene().aabb().diagonal());
  ray.t_min = 0;
  ray.t_max = max_dist;
  int open = 0;
  for (int s = 0; s < spp; ++s) {
    const Real u1 = rng.uniform();
    const Real u2 = rng.uniform();
    const Real r = std::sqrt(u1);
    const Real phi = 2 * kPi * u2;
    const Real z = std::sqrt(std::max(Real(0), 1 - u1));
    ray.dir = normalize(tangent * (r * std::cos(phi)) + bitangent * (r * std::sin(phi)) + normal * z);
    if (!bvh.occluded(ray)) ++open;
  }
  return Real(open) / Real(spp);
}

TargetOracle make_ao_oracle(const Bvh& bvh, const AoParams& params) {
  const AoParams p = params.resolved(bvh.scene());
  return [&bvh, p](const QueryPoint& q, Pcg32& rng) {
    return ao_oracle(bvh, q.position, q.normal, p.spp, p.max_dist, rng);
  };
}

Image render_reference(const Bvh& bvh, const Camera& camera, const AoParams& params, std::uint64_t seed) {
  camera.validate();
  const AoParams p = params.resolved(bvh.scene());
  Image image(camera.width, camera.height, {1, 1, 1});
  parallel_for(std::size_t(camera.height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < camera.width; ++x) {
      const auto hit = bvh.intersect(camera.generate_ray(x, y));
      if (!hit) continue;
      Pcg32 rng(derive_seed(seed, std::uint64_t(y) * std::uint64_t(camera.width) + std::uint64_t(x)));
      const Real ao = ao_oracle(bvh, hit->position, hit->geo_normal, p.reference_spp, p.max_dist, rng);
      image.at(x, y) = {ao, ao, ao};
    }
  });
  return image;
}

namespace {

struct PrimaryHits {
  std::vector<std::optional<Hit>> hits;
};

PrimaryHits trace_primary(const Bvh& bvh, const Camera& camera) {
  camera.validate();
  PrimaryHits out;
  out.hits.resize(std::size_t(camera.width) * std::size_t(camera.height));
  parallel_for(std::size_t(camera.height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < camera.width; ++x) {
      out.hits[row * std::size_t(camera.width) + std::size_t(x)] = bvh.intersect(camera.generate_ray(x, y));
    }
  });
  return out;
}

}  // namespace

Image render_inference(const Bvh& bvh, const Camera& camera, const Model& model) {
  const PrimaryHits primary = trace_primary(bvh, camera);
  std::vector<QueryPoint> queries;
  std::vector<std::size_t> pixel_of;
  for (std::size_t i = 0; i < primary.hits.size(); ++i) {
    if (primary.hits[i]) {
      queries.push_back(make_query(*primary.hits[i]));
      pixel_of.push_back(i);
    }
  }
  const std::vector<Real> values = model.predict(queries);
  Image image(camera.width, camera.height, {1, 1, 1});
  for (std::size_t q = 0; q < values.size(); ++q) {
    const Real v = std::clamp(values[q], Real(0), Real(1));
    image.pixels[pixel_of[q]] = {v, v, v};
  }
  return image;
}

Rgb slot_color(std::uint32_t slot) {
  const std::uint64_t h = mix64(std::uint64_t(slot) + 0x9e3779b97f4a7c15ULL);
  Rgb c;
  for (int k = 0; k < 3; ++k) {
    const auto byte = static_cast<std::uint32_t>((h >> (16 * k)) & 0xffu);
    c[k] = Real(0.15) + Real(0.85) * Real(byte) / Real(255);
  }
  return c;
}

Image render_voronoi(const Bvh& bvh, const Camera& camera, const FeatureLayout& layout) {
  const PrimaryHits primary = trace_primary(bvh, camera);
  const std::size_t level = layout.finest_level();
  Image image(camera.width, camera.height, {0, 0, 0});
  for (std::size_t i = 0; i < primary.hits.size(); ++i) {
    if (!primary.hits[i]) continue;
    const LookupResult r = layout.resolve(level, primary.hits[i]->point);
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (r.weights[k] > r.weights[best] || (r.weights[k] == r.weights[best] && r.slots[k] < r.slots[best])) {
        best = k;
      }
    }
    image.pixels[i] = slot_color(r.slots[best]);
  }
  return image;
}

double mse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("mse: image dimensions differ (" + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                                std::to_string(b.height) + ")");
  }
  double sum = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double d = double(a.pixels[i][c]) - double(b.pixels[i][c]);
      sum += d * d;
    }
  }
  return sum / (3.0 * double(a.pixels.size()));
}

double psnr_from_mse(double m) { return m < 1e-10 ? 99.0 : 10.0 * std::log10(1.0 / m); }

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> bytes;
  bytes.reserve(image.pixels.size() * 3);
  for (const Rgb& p : image.pixels) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::pow(std::clamp(double(p[c]), 0.0, 1.0), 1.0 / 2.2);
      bytes.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_pfm(const Image& image, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "PF\n" << image.width << ' ' << image.height << "\n-1.0\n";
  for (int y = image.height - 1; y >= 0; --y) {
    for (int x = 0; x < image.width; ++x) {
      for (Real v : image.at(x, y)) {
        const float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof f);
      }
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Image read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (magic != "PF" || w < 1 || h < 1 || scale >= 0) {
    throw std::runtime_error(path.string() + ": not a little-endian RGB PFM file");
  }
  Image image(w, h);
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      for (Real& v : image.at(x, y)) {
        float f = 0;
        in.read(reinterpret_cast<char*>(&f), sizeof f);
        v = f;
      }
    }
  }
  if (!in) throw std::runtime_error(path.string() + ": truncated PFM data");
  return image;
}

GATE_NAMESPACE_END
