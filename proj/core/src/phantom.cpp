#include "boneage/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "boneage/error.hpp"

namespace boneage {

double maturity_to_age(double maturity) {
  return kPhantomMinAgeMonths + (kPhantomMaxAgeMonths - kPhantomMinAgeMonths) * maturity;
}

double age_to_maturity(double age_months) {
  return (age_months - kPhantomMinAgeMonths) / (kPhantomMaxAgeMonths - kPhantomMinAgeMonths);
}

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x, y;
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a, ap = p - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  const double t = std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Everything random about a phantom, drawn in a fixed order so that two specs
// differing only in maturity or joint presence share the same layout.
struct Layout {
  double scale;
  Vec2 joint;
  Vec2 humerus_dir;
  Vec2 forearm_dir;
  double bone_radius;
  double skin_radius;
  double gap;
  double disc_radius;
  double region_radius;
  Vec2 humerus_end;
  Vec2 forearm_end;
  std::uint64_t noise_seed;
};

Layout make_layout(const PhantomSpec& spec) {
  if (spec.width < 16 || spec.height < 16) {
    throw ContractError("phantom image must be at least 16x16");
  }
  if (!(spec.maturity >= 0.0 && spec.maturity <= 1.0)) {
    throw ContractError("phantom maturity must lie in [0,1]");
  }
  if (!(spec.noise_level >= 0.0)) throw ContractError("phantom noise level must be >= 0");

  std::mt19937_64 rng(splitmix64(spec.seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double w = spec.width, h = spec.height;
  Layout l{};
  l.scale = std::min(w / 240.0, h / 160.0);
  const double jx = w * (0.35 + 0.30 * unit(rng));
  const double jy = h * (0.35 + 0.30 * unit(rng));
  const double humerus_angle = kPi + (unit(rng) - 0.5) * (kPi / 3.0);
  const double flexion = (unit(rng) - 0.5) * (kPi / 4.0);
  const double width_jitter = 0.9 + 0.2 * unit(rng);
  l.noise_seed = rng();

  l.humerus_dir = {std::cos(humerus_angle), std::sin(humerus_angle)};
  const double forearm_angle = humerus_angle + kPi + flexion;
  l.forearm_dir = {std::cos(forearm_angle), std::sin(forearm_angle)};

  const double sex_factor = spec.sex == Sex::kMale ? 1.0 : 0.85;
  l.bone_radius = 9.0 * l.scale * width_jitter * sex_factor;
  l.skin_radius = 2.2 * l.bone_radius + 4.0 * l.scale;
  l.gap = l.scale * (12.0 - 10.0 * spec.maturity);
  l.disc_radius = l.scale * (2.0 + 5.0 * spec.maturity);
  l.region_radius = 28.0 * l.scale;

  l.joint = {jx, jy};
  if (!spec.joint_present) {
    // Park the joint beyond the frame on the side the forearm comes from, so
    // only a forearm shaft crosses the image.
    const double half_diagonal = 0.5 * std::hypot(w, h);
    const Vec2 centre{w / 2.0, h / 2.0};
    l.joint = centre - (half_diagonal + l.region_radius + l.skin_radius) * l.forearm_dir;
  }
  const double reach = l.gap / 2.0 + l.bone_radius;
  l.humerus_end = l.joint + reach * l.humerus_dir;
  l.forearm_end = l.joint + reach * l.forearm_dir;
  return l;
}

}  // namespace

PhantomGeometry phantom_geometry(const PhantomSpec& spec) {
  const Layout l = make_layout(spec);
  PhantomGeometry g;
  g.joint_x = l.joint.x;
  g.joint_y = l.joint.y;
  g.bone_radius = l.bone_radius;
  g.skin_radius = l.skin_radius;
  g.gap_width = norm(l.humerus_end - l.forearm_end) - 2.0 * l.bone_radius;
  g.disc_radius = l.disc_radius;
  g.joint_region_radius = l.region_radius;
  return g;
}

PhantomSample generate_phantom(const PhantomSpec& spec) {
  const Layout l = make_layout(spec);
  const double far = 4.0 * (spec.width + spec.height);
  const Vec2 humerus_far = l.joint + far * l.humerus_dir;
  const Vec2 forearm_far = l.joint + far * l.forearm_dir;

  PhantomSample s;
  s.maturity = spec.maturity;
  s.age_months = spec.age_months();
  s.sex = spec.sex;
  s.is_true = spec.joint_present;
  s.geometry = phantom_geometry(spec);
  s.image = GrayImage(spec.width, spec.height, kPhantomBackground);
  s.bone_mask = GrayImage(spec.width, spec.height, 0.0f);

  std::mt19937_64 noise_rng(l.noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  int x0 = spec.width, y0 = spec.height, x1 = -1, y1 = -1;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
      const double d_humerus = segment_distance(p, l.humerus_end, humerus_far);
      const double d_forearm = segment_distance(p, l.forearm_end, forearm_far);
      const double d_bone = std::min(d_humerus, d_forearm);
      const double d_joint = norm(p - l.joint);
      float value = kPhantomBackground;
      bool bone = false;
      if (d_bone <= l.skin_radius || d_joint <= l.skin_radius) value = kPhantomSkin;
      if (d_bone <= l.bone_radius) {
        const double r = d_bone / l.bone_radius;
        value = kPhantomBone - 0.08f * static_cast<float>(r * r);
        bone = true;
      }
      if (d_joint <= l.disc_radius) {
        value = kPhantomDisc;
        bone = true;
      }
      // Always draw so the noise stream does not depend on the noise level.
      const double n = noise(noise_rng);
      if (spec.noise_level > 0.0) value += static_cast<float>(spec.noise_level * n);
      s.image.at(x, y) = std::clamp(value, 0.0f, 1.0f);
      if (bone) {
        s.bone_mask.at(x, y) = 1.0f;
        if (spec.joint_present && d_joint <= l.region_radius) {
          x0 = std::min(x0, x);
          y0 = std::min(y0, y);
          x1 = std::max(x1, x);
          y1 = std::max(y1, y);
        }
      }
    }
  }
  if (spec.joint_present && x1 >= x0 && y1 >= y0) {
    s.roi = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  } else {
    s.roi = {0, 0, spec.width, spec.height};
  }
  return s;
}

std::vector<PhantomSample> generate_dataset(const PhantomDatasetSpec& spec) {
  if (spec.count < 1) throw ContractError("phantom dataset count must be >= 1");
  if (!(spec.negative_fraction >= 0.0 && spec.negative_fraction < 1.0)) {
    throw ContractError("negative fraction must lie in [0,1)");
  }
  if (!(spec.maturity_min >= 0.0 && spec.maturity_max <= 1.0 &&
        spec.maturity_min <= spec.maturity_max)) {
    throw ContractError("maturity range must satisfy 0 <= min <= max <= 1");
  }
  std::mt19937_64 master(splitmix64(spec.seed ^ 0xA5A5A5A5ULL));
  std::vector<std::size_t> strata(spec.count);
  std::iota(strata.begin(), strata.end(), 0);
  std::shuffle(strata.begin(), strata.end(), master);
  std::vector<std::size_t> order(spec.count);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), master);
  const auto negatives =
      static_cast<std::size_t>(std::floor(static_cast<double>(spec.count) * spec.negative_fraction));
  std::vector<bool> negative(spec.count, false);
  for (std::size_t i = 0; i < negatives; ++i) negative[order[i]] = true;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double span = spec.maturity_max - spec.maturity_min;
  std::vector<PhantomSample> samples;
  samples.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const double jitter = unit(master);
    const bool female = unit(master) < 0.5;
    PhantomSpec p;
    p.seed = splitmix64(spec.seed * 0x100000001B3ULL + i);
    p.maturity = std::min(spec.maturity_max,
                          spec.maturity_min + span * (static_cast<double>(strata[i]) + jitter) /
                                                  static_cast<double>(spec.count));
    p.sex = female ? Sex::kFemale : Sex::kMale;
    p.width = spec.width;
    p.height = spec.height;
    p.noise_level = spec.noise_level;
    p.joint_present = !negative[i];
    samples.push_back(generate_phantom(p));
  }
  return samples;
}

std::string phantom_manifest_line(const std::string& id, const PhantomSample& s) {
  std::ostringstream line;
  line << id << ' ' << s.age_months << ' ' << to_string(s.sex) << ' ' << (s.is_true ? 1 : 0)
       << ' ' << to_string(s.roi);
  return line.str();
}

}  // namespace boneage
