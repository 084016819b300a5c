#include "stripescan/config.hpp"

#include <set>
#include <sstream>

#include <toml.hpp>

#include "stripescan/error.hpp"
#include "stripescan/io_util.hpp"

namespace stripescan {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "config: " + what);
}

// Walks one JSON object, rejecting keys nobody asked for.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorCode::kInvalidArgument, "config: [" + path_ + "] must be a table");
  }

  template <typename T>
  void get(const char* key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer() && (std::is_signed_v<T> || v.get<long long>() >= 0);
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else {
      ok = v.is_string();
    }
    if (!ok) throw Error(ErrorCode::kInvalidArgument, "config: " + name(key) + " has the wrong type");
    field = v.get<T>();
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), name(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw Error(ErrorCode::kInvalidArgument, "config: unknown key " + name(key.c_str()));
    }
  }

 private:
  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

nlohmann::json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    auto out = nlohmann::json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    auto out = nlohmann::json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  throw Error(ErrorCode::kInvalidArgument, "config: dates and times are not supported");
}

}  // namespace

SliceParams SliceConfig::params_for(FeatureKind kind) const {
  const double ov = overlap ? *overlap : (kind == FeatureKind::kHog36 ? overlap_hog : overlap_corrangle);
  return {height, ov, positivity};
}

std::string_view to_string(CvMode mode) { return mode == CvMode::kGrouped ? "grouped" : "lopo"; }

CvMode parse_cv_mode(std::string_view text) {
  if (text == "grouped5" || text == "grouped") return CvMode::kGrouped;
  if (text == "lopo") return CvMode::kLeaveOnePatientOut;
  throw Error(ErrorCode::kInvalidArgument, "unknown CV mode '" + std::string(text) + "' (grouped5 or lopo)");
}

void PipelineConfig::validate() const {
  const auto& p = preprocess;
  require(p.q_low >= 0.0 && p.q_high <= 1.0 && p.q_low < p.q_high, "preprocess quantiles need 0 <= q_low < q_high <= 1");
  require(p.snr_threshold >= 0.0, "preprocess.snr_threshold must be >= 0");
  for (double ov : {slices.overlap_hog, slices.overlap_corrangle, slices.overlap.value_or(0.0)}) {
    require(ov >= 0.0 && ov < 1.0, "slice overlap must lie in [0,1)");
  }
  require(slices.height >= 1, "slices.height must be >= 1");
  require(slices.positivity > 0.0 && slices.positivity <= 1.0, "slices.positivity must lie in (0,1]");
  hog.validate();
  corrangle.validate();
  require(slices.height > 2 * corrangle.radius, "slices.height must exceed twice the corrangle radius");
  train.validate();
  require(cv.k >= 2, "cv.k must be >= 2");
  synth.validate();
}

void PipelineConfig::set_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
}

nlohmann::json to_json(const PipelineConfig& c) {
  auto train = to_json(c.train);
  train.erase("seed");
  nlohmann::json slices = {{"height", c.slices.height},
                           {"overlap_hog", c.slices.overlap_hog},
                           {"overlap_corrangle", c.slices.overlap_corrangle},
                           {"positivity", c.slices.positivity}};
  if (c.slices.overlap) slices["overlap"] = *c.slices.overlap;
  return {{"seed", c.seed},
          {"preprocess",
           {{"q_low", c.preprocess.q_low},
            {"q_high", c.preprocess.q_high},
            {"snr_threshold", c.preprocess.snr_threshold},
            {"fov_floor", c.preprocess.fov_floor}}},
          {"slices", slices},
          {"hog", to_json(c.hog)},
          {"corrangle", to_json(c.corrangle)},
          {"train", train},
          {"cv", {{"mode", std::string(c.cv.mode == CvMode::kGrouped ? "grouped5" : "lopo")}, {"k", c.cv.k}}},
          {"synth", to_json(c.synth)}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  if (auto s = root.child("preprocess")) {
    s->get("q_low", c.preprocess.q_low);
    s->get("q_high", c.preprocess.q_high);
    s->get("snr_threshold", c.preprocess.snr_threshold);
    s->get("fov_floor", c.preprocess.fov_floor);
    s->finish();
  }
  if (auto s = root.child("slices")) {
    s->get("height", c.slices.height);
    s->get("overlap_hog", c.slices.overlap_hog);
    s->get("overlap_corrangle", c.slices.overlap_corrangle);
    s->get("positivity", c.slices.positivity);
    double ov = -1.0;
    s->get("overlap", ov);
    if (ov != -1.0) c.slices.overlap = ov;
    s->finish();
  }
  if (auto s = root.child("hog")) {
    s->get("cell", c.hog.cell);
    s->get("block", c.hog.block);
    s->get("bins", c.hog.bins);
    s->get("block_stride", c.hog.block_stride);
    s->get("clip", c.hog.clip);
    s->finish();
  }
  if (auto s = root.child("corrangle")) {
    s->get("radius", c.corrangle.radius);
    s->get("segment_len", c.corrangle.segment_len);
    s->get("n_angles", c.corrangle.n_angles);
    s->get("angle_lo", c.corrangle.angle_lo);
    s->get("angle_hi", c.corrangle.angle_hi);
    s->finish();
  }
  if (auto s = root.child("train")) {
    s->get("standardize_forest", c.train.standardize_forest);
    if (auto rf = s->child("rf")) {
      rf->get("n_trees", c.train.rf.n_trees);
      rf->get("max_depth", c.train.rf.max_depth);
      rf->get("min_leaf", c.train.rf.min_leaf);
      rf->get("features_per_split", c.train.rf.features_per_split);
      rf->get("bootstrap", c.train.rf.bootstrap);
      rf->finish();
    }
    if (auto svm = s->child("svm")) {
      svm->get("C", c.train.svm.c);
      svm->get("epochs", c.train.svm.epochs);
      svm->get("tolerance", c.train.svm.tolerance);
      svm->get("batch_size", c.train.svm.batch_size);
      svm->finish();
    }
    s->finish();
  }
  if (auto s = root.child("cv")) {
    std::string mode = "grouped5";
    s->get("mode", mode);
    c.cv.mode = parse_cv_mode(mode);
    s->get("k", c.cv.k);
    s->finish();
  }
  if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
  root.child("synth");
  root.finish();
  c.set_seed(c.seed);
  c.validate();
  return c;
}

PipelineConfig parse_pipeline_toml(std::string_view text, std::string_view source) {
  toml::table table;
  try {
    table = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ": " << e.description();
    throw Error(ErrorCode::kParseError, msg.str());
  }
  return pipeline_config_from_json(toml_to_json(table));
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  return parse_pipeline_toml(read_text_file(path), path.string());
}

void write_resolved_config(const std::filesystem::path& dir, const PipelineConfig& cfg) {
  write_file_atomic(dir / "resolved-config.json", to_json(cfg).dump(2) + "\n");
}

}  // namespace stripescan
