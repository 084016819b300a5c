#include "stripescan/feature_matrix.hpp"

#include <charconv>
#include <sstream>

#include "stripescan/error.hpp"
#include "stripescan/io_util.hpp"

namespace stripescan {

std::size_t FeatureMatrix::count(Label label) const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.label == label ? 1 : 0;
  return n;
}

FeatureMatrix FeatureMatrix::subset(const std::vector<std::size_t>& indices) const {
  FeatureMatrix out;
  out.kind = kind;
  out.standardized = standardized;
  out.rows.reserve(indices.size());
  for (auto i : indices) out.rows.push_back(rows.at(i));
  return out;
}

void FeatureMatrix::check_rectangular() const {
  const auto d = dimension();
  for (const auto& r : rows) {
    if (r.values.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch, "feature rows differ in length (" + std::to_string(r.values.size()) +
                                                     " vs " + std::to_string(d) + ")");
    }
  }
}

std::string image_key(const Provenance& p) { return p.patient_id + "/" + p.sequence_id + "/" + p.image_id; }

std::string format_feature_csv(const FeatureMatrix& m) {
  m.check_rectangular();
  std::string out = "patient_id,sequence_id,image_id,row_start,label";
  for (std::size_t i = 0; i < m.dimension(); ++i) out += ",f" + std::to_string(i);
  out += "\n";
  for (const auto& r : m.rows) {
    out += csv_escape(r.provenance.patient_id) + "," + csv_escape(r.provenance.sequence_id) + "," +
           csv_escape(r.provenance.image_id) + "," + std::to_string(r.provenance.row_start) + "," +
           (r.label == Label::kArtifact ? "1" : "0");
    for (double v : r.values) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

namespace {

double parse_double(const std::string& s, int line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

FeatureMatrix parse_feature_csv(const std::string& text, FeatureKind kind) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "empty feature CSV");
  const auto header = split_csv_line(line);
  if (header.size() < 5 || header[0] != "patient_id" || header[1] != "sequence_id" || header[2] != "image_id" ||
      header[3] != "row_start" || header[4] != "label") {
    throw Error(ErrorCode::kParseError, "unexpected feature CSV header");
  }
  const std::size_t dim = header.size() - 5;
  for (std::size_t i = 0; i < dim; ++i) {
    if (header[5 + i] != "f" + std::to_string(i)) throw Error(ErrorCode::kParseError, "bad feature column name");
  }

  FeatureMatrix m;
  m.kind = kind;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": wrong field count");
    }
    FeatureRow row;
    row.provenance = {f[0], f[1], f[2], static_cast<int>(parse_double(f[3], line_no))};
    if (f[4] == "1") {
      row.label = Label::kArtifact;
    } else if (f[4] == "0") {
      row.label = Label::kClean;
    } else {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": label must be 0 or 1");
    }
    row.values.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) row.values.push_back(parse_double(f[5 + i], line_no));
    m.rows.push_back(std::move(row));
  }
  return m;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m) {
  write_file_atomic(path, format_feature_csv(m));
}

nlohmann::json to_json(const HogConfig& cfg) {
  return {{"cell", cfg.cell}, {"block", cfg.block}, {"bins", cfg.bins}, {"block_stride", cfg.block_stride},
          {"clip", cfg.clip}};
}

nlohmann::json to_json(const CorrAngleConfig& cfg) {
  return {{"radius", cfg.radius},
          {"segment_len", cfg.segment_len},
          {"n_angles", cfg.n_angles},
          {"angle_lo", cfg.angle_lo},
          {"angle_hi", cfg.angle_hi}};
}

nlohmann::json to_json(const FeatureMeta& meta) {
  return {{"kind", std::string(to_string(meta.kind))},
          {"dimension", meta.dimension},
          {"hog", to_json(meta.hog)},
          {"corrangle", to_json(meta.corr)},
          {"slices",
           {{"height", meta.slices.height},
            {"overlap", meta.slices.overlap},
            {"positivity", meta.slices.positivity}}}};
}

FeatureMeta feature_meta_from_json(const nlohmann::json& j) {
  try {
    FeatureMeta m;
    m.kind = parse_feature_kind(j.at("kind").get<std::string>());
    m.dimension = j.at("dimension").get<int>();
    const auto& h = j.at("hog");
    m.hog = {h.at("cell").get<int>(), h.at("block").get<int>(), h.at("bins").get<int>(),
             h.at("block_stride").get<int>(), h.at("clip").get<double>()};
    const auto& c = j.at("corrangle");
    m.corr = {c.at("radius").get<int>(), c.at("segment_len").get<int>(), c.at("n_angles").get<int>(),
              c.at("angle_lo").get<double>(), c.at("angle_hi").get<double>()};
    const auto& s = j.at("slices");
    m.slices = {s.at("height").get<int>(), s.at("overlap").get<double>(), s.at("positivity").get<double>()};
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("feature metadata: ") + e.what());
  }
}

std::filesystem::path meta_path_for(const std::filesystem::path& features_csv) {
  auto p = features_csv;
  return p.replace_extension(".meta.json");
}

void write_feature_meta(const std::filesystem::path& features_csv, const FeatureMeta& meta) {
  write_file_atomic(meta_path_for(features_csv), to_json(meta).dump(2) + "\n");
}

FeatureMeta read_feature_meta(const std::filesystem::path& features_csv) {
  const auto text = read_text_file(meta_path_for(features_csv));
  try {
    return feature_meta_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, std::string("feature metadata: ") + e.what());
  }
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
  FeatureKind kind = FeatureKind::kCorrAngle;
  if (std::filesystem::exists(meta_path_for(path))) {
    kind = read_feature_meta(path).kind;
  } else {
    // Without a sidecar, 36 columns is taken to be hog36.
    auto m = parse_feature_csv(read_text_file(path), kind);
    if (m.dimension() == 36) m.kind = FeatureKind::kHog36;
    return m;
  }
  return parse_feature_csv(read_text_file(path), kind);
}

}  // namespace stripescan
