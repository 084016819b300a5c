#include "stripescan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>

#include "stripescan/error.hpp"
#include "stripescan/io_util.hpp"
#include "stripescan/parallel.hpp"

namespace stripescan {

namespace {

constexpr double kMaxIntensity = 65535.0;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "synth config: " + what);
}

std::string padded(int value, int width) {
  std::string s = std::to_string(value);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

RowInterval fov_rows(const FovMask& m) { return {m.row_min, m.row_max + 1}; }

void check_band(const GrayImage& img, RowInterval band, RowInterval valid_rows) {
  if (band.start >= band.end || band.start < valid_rows.start || band.end > valid_rows.end || band.start < 0 ||
      band.end > img.height()) {
    throw Error(ErrorCode::kBandOutOfFov, "band [" + std::to_string(band.start) + "," + std::to_string(band.end) +
                                              ") outside rows [" + std::to_string(valid_rows.start) + "," +
                                              std::to_string(valid_rows.end) + ")");
  }
}

}  // namespace

void SynthConfig::validate() const {
  require(width >= 16 && height >= 16, "image must be at least 16x16");
  require(patients >= 1 && sequences_per_patient >= 1 && images_per_sequence >= 1, "counts must be >= 1");
  require(artifact_prob >= 0.0 && artifact_prob <= 1.0, "artifact_prob must lie in [0,1]");
  require(stretch_ratio >= 0.0 && stretch_ratio <= 1.0, "stretch_ratio must lie in [0,1]");
  require(shift_max >= 0.0, "shift_max must be >= 0");
  require(stretch_min > 1.0 && stretch_max >= stretch_min, "stretch range must satisfy 1 < min <= max");
  require(band_min >= 2 && band_max >= band_min, "band range must satisfy 2 <= min <= max");
  const auto disc = disc_mask(width, height);
  require(band_max <= disc.row_max - disc.row_min + 1, "band_max exceeds the FOV height");
  require(blob_density >= 0.0, "blob_density must be >= 0");
  require(sigma_minor_lo > 0.0 && sigma_minor_hi >= sigma_minor_lo, "bad minor sigma range");
  require(sigma_major_lo > 0.0 && sigma_major_hi >= sigma_major_lo, "bad major sigma range");
  require(amplitude_hi >= amplitude_lo, "bad amplitude range");
  require(orientation_domains >= 0.0 && orientation_jitter >= 0.0, "orientation parameters must be >= 0");
  require(noise >= 0.0, "noise must be >= 0");
  require(intensity_gain > 0.0, "intensity_gain must be positive");
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"width", c.width},
          {"height", c.height},
          {"seed", c.seed},
          {"patients", c.patients},
          {"sequences_per_patient", c.sequences_per_patient},
          {"images_per_sequence", c.images_per_sequence},
          {"artifact_prob", c.artifact_prob},
          {"stretch_ratio", c.stretch_ratio},
          {"shift_max", c.shift_max},
          {"stretch_min", c.stretch_min},
          {"stretch_max", c.stretch_max},
          {"band_min", c.band_min},
          {"band_max", c.band_max},
          {"blob_density", c.blob_density},
          {"sigma_minor_lo", c.sigma_minor_lo},
          {"sigma_minor_hi", c.sigma_minor_hi},
          {"sigma_major_lo", c.sigma_major_lo},
          {"sigma_major_hi", c.sigma_major_hi},
          {"amplitude_lo", c.amplitude_lo},
          {"amplitude_hi", c.amplitude_hi},
          {"orientation_domains", c.orientation_domains},
          {"orientation_jitter", c.orientation_jitter},
          {"noise", c.noise},
          {"intensity_offset", c.intensity_offset},
          {"intensity_gain", c.intensity_gain}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  const auto known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::kInvalidArgument, "synth config: unknown key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("width", c.width);
    get("height", c.height);
    get("seed", c.seed);
    get("patients", c.patients);
    get("sequences_per_patient", c.sequences_per_patient);
    get("images_per_sequence", c.images_per_sequence);
    get("artifact_prob", c.artifact_prob);
    get("stretch_ratio", c.stretch_ratio);
    get("shift_max", c.shift_max);
    get("stretch_min", c.stretch_min);
    get("stretch_max", c.stretch_max);
    get("band_min", c.band_min);
    get("band_max", c.band_max);
    get("blob_density", c.blob_density);
    get("sigma_minor_lo", c.sigma_minor_lo);
    get("sigma_minor_hi", c.sigma_minor_hi);
    get("sigma_major_lo", c.sigma_major_lo);
    get("sigma_major_hi", c.sigma_major_hi);
    get("amplitude_lo", c.amplitude_lo);
    get("amplitude_hi", c.amplitude_hi);
    get("orientation_domains", c.orientation_domains);
    get("orientation_jitter", c.orientation_jitter);
    get("noise", c.noise);
    get("intensity_offset", c.intensity_offset);
    get("intensity_gain", c.intensity_gain);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("synth config: ") + e.what());
  }
  return c;
}

std::string_view to_string(ArtifactKind kind) { return kind == ArtifactKind::kStripe ? "stripe" : "stretch"; }

FovMask disc_mask(int width, int height) {
  FovMask m;
  m.width = width;
  m.height = height;
  m.mask.assign(static_cast<std::size_t>(width) * height, 0);
  const double r = (std::min(width, height) - 4) / 2.0;
  const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
  m.row_min = height;
  for (int y = 0; y < height; ++y) {
    const double dy = y - cy;
    if (dy * dy > r * r) continue;
    const double half = std::sqrt(r * r - dy * dy);
    const int x0 = std::max(0, static_cast<int>(std::ceil(cx - half)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(cx + half)));
    if (x1 - x0 + 1 < 2) continue;
    std::fill_n(m.mask.begin() + static_cast<std::ptrdiff_t>(y) * width + x0, x1 - x0 + 1, 1);
    m.row_min = std::min(m.row_min, y);
    m.row_max = y;
    if (x1 - x0 + 1 > m.x_extent) {
      m.x_extent = x1 - x0 + 1;
      m.x_start = x0;
    }
  }
  return m;
}

GrayImage render_texture(const SynthConfig& cfg, int width, int height, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::vector<double> field(static_cast<std::size_t>(width) * height);
  for (double& v : field) v = cfg.noise * gauss(rng);

  const double area = static_cast<double>(width) * height;
  std::vector<std::pair<double, double>> domain_seeds;
  std::vector<double> domain_angle;
  if (cfg.orientation_domains > 0.0) {
    const int n = std::max(1, static_cast<int>(std::lround(cfg.orientation_domains * area / (578.0 * 576.0))));
    for (int i = 0; i < n; ++i) {
      domain_seeds.emplace_back(uniform(0.0, width), uniform(0.0, height));
      domain_angle.push_back(uniform(0.0, std::numbers::pi));
    }
  }

  const double pad = 3.5 * cfg.sigma_major_hi;
  const auto count = static_cast<long>(std::lround(cfg.blob_density * (width + 2 * pad) * (height + 2 * pad) / 1e4));
  for (long b = 0; b < count; ++b) {
    const double cx = uniform(-pad, width + pad);
    const double cy = uniform(-pad, height + pad);
    const double sa = uniform(cfg.sigma_major_lo, cfg.sigma_major_hi);
    const double sb = uniform(cfg.sigma_minor_lo, cfg.sigma_minor_hi);
    const double amp = uniform(cfg.amplitude_lo, cfg.amplitude_hi);
    double phi = 0.0;
    if (domain_seeds.empty()) {
      phi = uniform(0.0, std::numbers::pi);
    } else {
      std::size_t nearest = 0;
      double best = 1e300;
      for (std::size_t d = 0; d < domain_seeds.size(); ++d) {
        const double dx = cx - domain_seeds[d].first, dy = cy - domain_seeds[d].second;
        if (dx * dx + dy * dy < best) {
          best = dx * dx + dy * dy;
          nearest = d;
        }
      }
      phi = domain_angle[nearest] + cfg.orientation_jitter * gauss(rng);
    }
    const double c = std::cos(phi), s = std::sin(phi);
    const double reach = 3.5 * std::max(sa, sb);
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(cx + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(cy + reach)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = (dx * c + dy * s) / sa;
        const double v = (-dx * s + dy * c) / sb;
        field[static_cast<std::size_t>(y) * width + x] += amp * std::exp(-0.5 * (u * u + v * v));
      }
    }
  }

  for (double& v : field) v = std::clamp(cfg.intensity_offset + cfg.intensity_gain * v, 0.0, kMaxIntensity);
  return GrayImage(width, height, std::move(field), 16);
}

void apply_disc(GrayImage& img, const FovMask& disc) {
  if (disc.width != img.width() || disc.height != img.height()) {
    throw Error(ErrorCode::kInvalidArgument, "disc shape differs from image shape");
  }
  auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = disc.mask[i] ? std::round(std::clamp(px[i], 2.0, kMaxIntensity)) : 0.0;
}

SynthImage generate_clean(const SynthConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  SynthImage out{render_texture(cfg, cfg.width, cfg.height, rng), disc_mask(cfg.width, cfg.height)};
  apply_disc(out.image, out.fov);
  return out;
}

void inject_stripe(GrayImage& img, RowInterval band, double shift, std::mt19937_64& rng, RowInterval valid_rows) {
  check_band(img, band, valid_rows);
  if (img.width() < 2) throw Error(ErrorCode::kImageTooSmall, "stripe injection needs width >= 2");
  const auto px = img.pixels();
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  std::normal_distribution<double> noise(0.0, 0.01 * (*hi - *lo));

  const int w = img.width();
  const std::vector<double> source(img.row(band.start).begin(), img.row(band.start).end());
  for (int r = band.start + 1; r < band.end; ++r) {
    const double offset = (r - band.start) * shift;
    auto row = img.row(r);
    for (int x = 0; x < w; ++x) {
      const double sx = std::clamp(x - offset, 0.0, static_cast<double>(w - 1));
      const int x0 = std::min(static_cast<int>(sx), w - 2);
      const double t = sx - x0;
      const double v = source[x0] * (1.0 - t) + source[x0 + 1] * t;
      row[x] = std::clamp(v + noise(rng), 0.0, kMaxIntensity);
    }
  }
}

void inject_stretch(GrayImage& img, RowInterval band, double factor, RowInterval valid_rows) {
  check_band(img, band, valid_rows);
  if (!(factor > 1.0)) throw Error(ErrorCode::kInvalidArgument, "stretch factor must exceed 1");
  const int w = img.width();
  const int h = band.length();
  std::vector<double> original(img.pixels().begin() + static_cast<std::ptrdiff_t>(band.start) * w,
                               img.pixels().begin() + static_cast<std::ptrdiff_t>(band.end) * w);
  const double mid = (h - 1) / 2.0;
  for (int t = 0; t < h; ++t) {
    const double sy = std::clamp(mid + (t - mid) / factor, 0.0, static_cast<double>(h - 1));
    const int y0 = std::min(static_cast<int>(sy), std::max(0, h - 2));
    const double f = sy - y0;
    const int y1 = std::min(y0 + 1, h - 1);
    auto row = img.row(band.start + t);
    for (int x = 0; x < w; ++x) {
      row[x] = original[static_cast<std::size_t>(y0) * w + x] * (1.0 - f) + original[static_cast<std::size_t>(y1) * w + x] * f;
    }
  }
}

SynthRecord generate_record(const SynthConfig& cfg, int index) {
  cfg.validate();
  if (index < 0 || index >= cfg.image_count()) throw Error(ErrorCode::kInvalidArgument, "image index out of range");

  SynthRecord rec;
  rec.seed = cfg.seed + static_cast<std::uint64_t>(index);
  std::mt19937_64 rng(rec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int per_patient = cfg.sequences_per_patient * cfg.images_per_sequence;
  const int p = index / per_patient;
  const int s = (index % per_patient) / cfg.images_per_sequence;
  const int i = index % cfg.images_per_sequence;
  rec.entry.patient_id = "p" + padded(p + 1, 2);
  rec.entry.sequence_id = rec.entry.patient_id + "s" + padded(s + 1, 2);
  rec.entry.image_id = rec.entry.sequence_id + "i" + padded(i + 1, 3);
  rec.entry.path = std::filesystem::path("images") / (rec.entry.image_id + ".png");

  const FovMask disc = disc_mask(cfg.width, cfg.height);
  // Artifact parameters come first so the canvas only gets the side margin a
  // stripe actually needs; shifted rows then pull in real texture instead of
  // clamped edge pixels.
  std::optional<SynthArtifact> artifact;
  if (unit(rng) < cfg.artifact_prob) {
    SynthArtifact a;
    a.kind = unit(rng) < cfg.stretch_ratio ? ArtifactKind::kStretch : ArtifactKind::kStripe;
    const int len = std::uniform_int_distribution<int>(cfg.band_min, cfg.band_max)(rng);
    const int start = std::uniform_int_distribution<int>(disc.row_min, disc.row_max + 1 - len)(rng);
    a.rows = {start, start + len};
    if (a.kind == ArtifactKind::kStripe) {
      a.shift = cfg.shift_max * (2.0 * unit(rng) - 1.0);
    } else {
      a.factor = cfg.stretch_min + (cfg.stretch_max - cfg.stretch_min) * unit(rng);
    }
    artifact = a;
  }
  const int margin = artifact && artifact->kind == ArtifactKind::kStripe
                         ? static_cast<int>(std::ceil(std::abs(artifact->shift) * (artifact->rows.length() - 1))) + 2
                         : 0;
  GrayImage canvas = render_texture(cfg, cfg.width + 2 * margin, cfg.height, rng);
  if (artifact) {
    if (artifact->kind == ArtifactKind::kStripe) {
      inject_stripe(canvas, artifact->rows, artifact->shift, rng, fov_rows(disc));
    } else {
      inject_stretch(canvas, artifact->rows, artifact->factor, fov_rows(disc));
    }
    rec.artifacts.push_back(*artifact);
    rec.entry.artifact_intervals.push_back(artifact->rows);
  }

  GrayImage img(cfg.width, cfg.height, 16);
  for (int y = 0; y < cfg.height; ++y) {
    std::copy_n(canvas.row(y).begin() + margin, cfg.width, img.row(y).begin());
  }
  apply_disc(img, disc);
  rec.data = {std::move(img), disc};
  return rec;
}

nlohmann::json sidecar_json(const SynthRecord& r) {
  auto artifacts = nlohmann::json::array();
  for (const auto& a : r.artifacts) {
    nlohmann::json j = {{"kind", std::string(to_string(a.kind))}, {"start", a.rows.start}, {"end", a.rows.end}};
    if (a.kind == ArtifactKind::kStripe) {
      j["shift"] = a.shift;
    } else {
      j["factor"] = a.factor;
    }
    artifacts.push_back(std::move(j));
  }
  const double cx = (r.data.image.width() - 1) / 2.0, cy = (r.data.image.height() - 1) / 2.0;
  return {{"patient_id", r.entry.patient_id},
          {"sequence_id", r.entry.sequence_id},
          {"image_id", r.entry.image_id},
          {"path", r.entry.path.generic_string()},
          {"seed", r.seed},
          {"fov", {{"cx", cx}, {"cy", cy}, {"diameter", std::min(r.data.image.width(), r.data.image.height()) - 4}}},
          {"artifacts", std::move(artifacts)}};
}

DatasetManifest generate_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + (out_dir / "images").string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  manifest.entries.resize(static_cast<std::size_t>(cfg.image_count()));
  parallel_for(manifest.entries.size(), [&](std::size_t i) {
    auto rec = generate_record(cfg, static_cast<int>(i));
    write_png(out_dir / rec.entry.path, rec.data.image);
    auto sidecar = rec.entry.path;
    sidecar.replace_extension(".json");
    write_file_atomic(out_dir / sidecar, sidecar_json(rec).dump(2) + "\n");
    manifest.entries[i] = std::move(rec.entry);
  });
  write_manifest(out_dir / "manifest.csv", manifest);
  return manifest;
}

}  // namespace stripescan
