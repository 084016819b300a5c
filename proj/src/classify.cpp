#include "stripescan/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "stripescan/error.hpp"
#include "stripescan/io_util.hpp"
#include "stripescan/parallel.hpp"

namespace stripescan {

namespace {

void require_both_classes(const FeatureMatrix& m) {
  if (m.count(Label::kArtifact) == 0 || m.count(Label::kClean) == 0) {
    throw Error(ErrorCode::kSingleClass, "training data holds a single class");
  }
}

double gini(double pos, double n) {
  if (n <= 0.0) return 0.0;
  const double p = pos / n;
  return 2.0 * p * (1.0 - p);
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double decrease = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& m, const ForestConfig& cfg, std::uint64_t seed)
      : m_(m), cfg_(cfg), rng_(seed), dim_(static_cast<int>(m.dimension())) {
    mtry_ = cfg.features_per_split > 0 ? std::min(cfg.features_per_split, dim_)
                                       : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(dim_))));
    mtry_ = std::max(1, mtry_);
    features_.resize(static_cast<std::size_t>(dim_));
    std::iota(features_.begin(), features_.end(), 0);
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    DecisionTree tree;
    grow(tree, rows, 0);
    return tree;
  }

 private:
  int grow(DecisionTree& tree, std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double pos = 0.0;
    for (auto r : rows) pos += m_.rows[r].label == Label::kArtifact ? 1.0 : 0.0;
    const double n = static_cast<double>(rows.size());
    tree.nodes[id].artifact_fraction = pos / n;

    const bool pure = pos == 0.0 || pos == n;
    if (pure || depth >= cfg_.max_depth || rows.size() < 2 * static_cast<std::size_t>(cfg_.min_leaf)) return id;

    const auto split = best_split(rows, pos);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (m_.rows[r].values[split.feature] <= split.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[id].feature = split.feature;
    tree.nodes[id].threshold = split.threshold;
    const int l = grow(tree, left, depth + 1);
    tree.nodes[id].left = l;
    const int r = grow(tree, right, depth + 1);
    tree.nodes[id].right = r;
    return id;
  }

  SplitChoice best_split(const std::vector<std::size_t>& rows, double pos) {
    // Partial Fisher-Yates draw of mtry distinct features, visited in index order.
    for (int i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<int> pick(i, dim_ - 1);
      std::swap(features_[i], features_[pick(rng_)]);
    }
    std::vector<int> chosen(features_.begin(), features_.begin() + mtry_);
    std::sort(chosen.begin(), chosen.end());

    const double n = static_cast<double>(rows.size());
    const double parent = gini(pos, n);
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_leaf);
    SplitChoice best;
    std::vector<std::pair<double, int>> column(rows.size());
    for (int f : chosen) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = m_.rows[rows[i]];
        column[i] = {row.values[f], row.label == Label::kArtifact ? 1 : 0};
      }
      std::sort(column.begin(), column.end());
      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_pos += column[i].second;
        if (column[i].first == column[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = column.size() - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double dl = static_cast<double>(nl), dr = static_cast<double>(nr);
        const double decrease = parent - (dl / n) * gini(left_pos, dl) - (dr / n) * gini(pos - left_pos, dr);
        if (decrease > best.decrease + 1e-12) {
          double mid = 0.5 * (column[i].first + column[i + 1].first);
          if (!(mid < column[i + 1].first)) mid = column[i].first;
          best = {f, mid, decrease};
        }
      }
    }
    return best;
  }

  const FeatureMatrix& m_;
  const ForestConfig& cfg_;
  std::mt19937_64 rng_;
  int dim_;
  int mtry_ = 1;
  std::vector<int> features_;
};

int labels_sign(Label l) { return l == Label::kArtifact ? 1 : -1; }

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

void TrainConfig::validate() const {
  if (rf.n_trees < 1) throw Error(ErrorCode::kInvalidArgument, "n_trees must be >= 1");
  if (rf.max_depth < 1) throw Error(ErrorCode::kInvalidArgument, "max_depth must be >= 1");
  if (rf.min_leaf < 1) throw Error(ErrorCode::kInvalidArgument, "min_leaf must be >= 1");
  if (rf.features_per_split < 0) throw Error(ErrorCode::kInvalidArgument, "features_per_split must be >= 0");
  if (!(svm.c > 0.0)) throw Error(ErrorCode::kInvalidArgument, "SVM C must be positive");
  if (svm.epochs < 1) throw Error(ErrorCode::kInvalidArgument, "SVM epochs must be >= 1");
  if (svm.batch_size < 0) throw Error(ErrorCode::kInvalidArgument, "SVM batch size must be >= 0");
}

FeatureMatrix undersample(const FeatureMatrix& m, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < m.rows.size(); ++i) (m.rows[i].label == Label::kArtifact ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw Error(ErrorCode::kSingleClass, "undersampling needs both classes");

  std::mt19937_64 rng(seed);
  auto& majority = pos.size() > neg.size() ? pos : neg;
  const auto& minority = pos.size() > neg.size() ? neg : pos;
  std::shuffle(majority.begin(), majority.end(), rng);
  majority.resize(minority.size());

  std::vector<std::size_t> keep;
  keep.reserve(2 * minority.size());
  keep.insert(keep.end(), pos.begin(), pos.end());
  keep.insert(keep.end(), neg.begin(), neg.end());
  std::sort(keep.begin(), keep.end());
  std::shuffle(keep.begin(), keep.end(), rng);
  return m.subset(keep);
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) throw Error(ErrorCode::kDimensionMismatch, "standardizer dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = stddev[i] > 0.0 ? (x[i] - mean[i]) / stddev[i] : 0.0;
  return out;
}

Standardizer fit_standardizer(const FeatureMatrix& train) {
  if (train.rows.size() < 2) throw Error(ErrorCode::kTooFewRows, "standardizer needs at least two rows");
  train.check_rectangular();
  const std::size_t d = train.dimension();
  const double n = static_cast<double>(train.rows.size());
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0, lo = train.rows[0].values[j], hi = lo;
    for (const auto& r : train.rows) {
      sum += r.values[j];
      lo = std::min(lo, r.values[j]);
      hi = std::max(hi, r.values[j]);
    }
    s.mean[j] = sum / n;
    if (lo == hi) continue;
    double ss = 0.0;
    for (const auto& r : train.rows) ss += (r.values[j] - s.mean[j]) * (r.values[j] - s.mean[j]);
    s.stddev[j] = std::sqrt(ss / n);
  }
  return s;
}

FeatureMatrix apply_standardizer(const Standardizer& state, const FeatureMatrix& m) {
  FeatureMatrix out = m;
  for (auto& r : out.rows) r.values = state.apply(r.values);
  out.standardized = true;
  return out;
}

double DecisionTree::leaf_fraction(std::span<const double> x) const {
  int i = 0;
  while (nodes[i].feature >= 0) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].artifact_fraction;
}

int DecisionTree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[nodes[i].left] = level[i] + 1;
      level[nodes[i].right] = level[i] + 1;
    }
  }
  return deepest;
}

DecisionTree grow_tree(const FeatureMatrix& m, const std::vector<std::size_t>& rows, const ForestConfig& cfg,
                       std::uint64_t seed) {
  TreeBuilder builder(m, cfg, seed);
  return builder.build(rows);
}

TrainedModel train_random_forest(const FeatureMatrix& m, const TrainConfig& cfg) {
  cfg.validate();
  if (m.rows.size() < 2) throw Error(ErrorCode::kTooFewRows, "forest needs at least two rows");
  require_both_classes(m);
  m.check_rectangular();

  TrainedModel model;
  model.kind = ModelKind::kRandomForest;
  model.feature_kind = m.kind;
  model.dimension = m.dimension();
  model.config = cfg;
  model.class_prior = static_cast<double>(m.count(Label::kArtifact)) / static_cast<double>(m.rows.size());

  const FeatureMatrix* data = &m;
  FeatureMatrix scaled;
  if (cfg.standardize_forest) {
    model.standardizer = fit_standardizer(m);
    scaled = apply_standardizer(*model.standardizer, m);
    data = &scaled;
  }

  const std::size_t n = data->rows.size();
  model.forest.resize(static_cast<std::size_t>(cfg.rf.n_trees));
  parallel_for(model.forest.size(), [&](std::size_t t) {
    const std::uint64_t tree_seed = cfg.seed + t;
    std::vector<std::size_t> rows(n);
    if (cfg.rf.bootstrap) {
      std::mt19937_64 boot(tree_seed ^ 0x9E3779B97F4A7C15ULL);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(boot);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    model.forest[t] = grow_tree(*data, rows, cfg.rf, tree_seed);
  });
  return model;
}

double svm_objective(const FeatureMatrix& m, std::span<const double> w, double bias, double c) {
  double hinge = 0.0;
  for (const auto& r : m.rows) hinge += std::max(0.0, 1.0 - labels_sign(r.label) * (dot(w, r.values) + bias));
  return 0.5 * dot(w, w) + c * hinge;
}

TrainedModel train_linear_svm(const FeatureMatrix& standardized, const Standardizer& state, const TrainConfig& cfg) {
  cfg.validate();
  if (!standardized.standardized) {
    throw Error(ErrorCode::kNotStandardized, "linear SVM input must pass through apply_standardizer first");
  }
  require_both_classes(standardized);
  standardized.check_rectangular();
  if (state.mean.size() != standardized.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch, "standardizer dimension differs from the data");
  }

  const auto& rows = standardized.rows;
  const std::size_t n = rows.size();
  const std::size_t d = standardized.dimension();
  const double c = cfg.svm.c;
  // Pegasos form: lambda/2 |w|^2 + mean hinge, with lambda = 1/(C n) sharing
  // the minimiser of the C-weighted objective.
  const double lambda = 1.0 / (c * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);
  const std::size_t batch = cfg.svm.batch_size > 0 ? std::min<std::size_t>(cfg.svm.batch_size, n) : n;

  std::vector<double> w(d, 0.0), best_w = w;
  double b = 0.0, best_b = 0.0;
  double best_obj = svm_objective(standardized, w, b, c);
  double last_obj = best_obj;
  std::vector<double> trace{best_obj};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> step(d);
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < cfg.svm.epochs; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      std::fill(step.begin(), step.end(), 0.0);
      long long bias_votes = 0;
      for (std::size_t k = start; k < stop; ++k) {
        const auto& r = rows[order[k]];
        const int y = labels_sign(r.label);
        if (y * (dot(w, r.values) + b) < 1.0) {
          for (std::size_t j = 0; j < d; ++j) step[j] += y * r.values[j];
          bias_votes += y;
        }
      }
      const double scale = eta / static_cast<double>(stop - start);
      for (std::size_t j = 0; j < d; ++j) w[j] = (1.0 - eta * lambda) * w[j] + scale * step[j];
      b += scale * static_cast<double>(bias_votes);
      const double norm = std::sqrt(dot(w, w));
      if (norm > radius) {
        for (double& v : w) v *= radius / norm;
      }
    }
    const double obj = svm_objective(standardized, w, b, c);
    if (obj < best_obj) {
      best_obj = obj;
      best_w = w;
      best_b = b;
    }
    trace.push_back(best_obj);
    if (std::abs(last_obj - obj) < cfg.svm.tolerance * std::max(1.0, std::abs(last_obj))) break;
    last_obj = obj;
  }

  TrainedModel model;
  model.kind = ModelKind::kLinearSvm;
  model.feature_kind = standardized.kind;
  model.dimension = d;
  model.config = cfg;
  model.svm = {std::move(best_w), best_b, std::move(trace)};
  model.standardizer = state;
  model.class_prior = static_cast<double>(standardized.count(Label::kArtifact)) / static_cast<double>(n);
  return model;
}

double predict_score(const TrainedModel& model, std::span<const double> x) {
  if (x.size() != model.dimension) {
    throw Error(ErrorCode::kDimensionMismatch, "model expects " + std::to_string(model.dimension) +
                                                   " features, got " + std::to_string(x.size()));
  }
  std::vector<double> scaled;
  if (model.standardizer) {
    scaled = model.standardizer->apply(x);
    x = scaled;
  }
  if (model.kind == ModelKind::kLinearSvm) return dot(model.svm.weights, x) + model.svm.bias;
  double votes = 0.0;
  for (const auto& tree : model.forest) {
    const double f = tree.leaf_fraction(x);
    votes += f > 0.5 ? 1.0 : (f == 0.5 ? 0.5 : 0.0);
  }
  return votes / static_cast<double>(model.forest.size());
}

std::vector<double> predict_score(const TrainedModel& model, const FeatureMatrix& m) {
  std::vector<double> out;
  out.reserve(m.rows.size());
  for (const auto& r : m.rows) out.push_back(predict_score(model, r.values));
  return out;
}

double decision_threshold(ModelKind kind) { return kind == ModelKind::kRandomForest ? 0.5 : 0.0; }

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::kRandomForest ? "random_forest" : "linear_svm";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "random_forest" || text == "rf") return ModelKind::kRandomForest;
  if (text == "linear_svm" || text == "svm") return ModelKind::kLinearSvm;
  throw Error(ErrorCode::kInvalidArgument, "unknown classifier '" + std::string(text) + "'");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"seed", cfg.seed},
          {"standardize_forest", cfg.standardize_forest},
          {"rf",
           {{"n_trees", cfg.rf.n_trees},
            {"max_depth", cfg.rf.max_depth},
            {"min_leaf", cfg.rf.min_leaf},
            {"features_per_split", cfg.rf.features_per_split},
            {"bootstrap", cfg.rf.bootstrap}}},
          {"svm",
           {{"C", cfg.svm.c},
            {"epochs", cfg.svm.epochs},
            {"tolerance", cfg.svm.tolerance},
            {"batch_size", cfg.svm.batch_size}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.standardize_forest = j.at("standardize_forest").get<bool>();
  const auto& rf = j.at("rf");
  cfg.rf = {rf.at("n_trees").get<int>(), rf.at("max_depth").get<int>(), rf.at("min_leaf").get<int>(),
            rf.at("features_per_split").get<int>(), rf.at("bootstrap").get<bool>()};
  const auto& svm = j.at("svm");
  cfg.svm = {svm.at("C").get<double>(), svm.at("epochs").get<int>(), svm.at("tolerance").get<double>(),
             svm.at("batch_size").get<int>()};
  return cfg;
}

nlohmann::json to_json(const TrainedModel& model) {
  nlohmann::json j = {{"format", "stripescan-model"},
                      {"version", 1},
                      {"kind", std::string(to_string(model.kind))},
                      {"feature_kind", std::string(to_string(model.feature_kind))},
                      {"dimension", model.dimension},
                      {"class_prior", model.class_prior},
                      {"config", to_json(model.config)}};
  if (model.standardizer) {
    j["standardizer"] = {{"mean", model.standardizer->mean}, {"stddev", model.standardizer->stddev}};
  } else {
    j["standardizer"] = nullptr;
  }
  if (model.kind == ModelKind::kRandomForest) {
    auto trees = nlohmann::json::array();
    for (const auto& tree : model.forest) {
      auto nodes = nlohmann::json::array();
      for (const auto& n : tree.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.artifact_fraction});
      trees.push_back(std::move(nodes));
    }
    j["forest"] = std::move(trees);
  } else {
    j["svm"] = {{"weights", model.svm.weights}, {"bias", model.svm.bias}, {"objective_trace", model.svm.objective_trace}};
  }
  return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "stripescan-model") {
      throw Error(ErrorCode::kParseError, "not a stripescan model file");
    }
    if (j.at("version").get<int>() != 1) throw Error(ErrorCode::kParseError, "unsupported model version");
    TrainedModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.feature_kind = parse_feature_kind(j.at("feature_kind").get<std::string>());
    m.dimension = j.at("dimension").get<std::size_t>();
    m.class_prior = j.at("class_prior").get<double>();
    m.config = train_config_from_json(j.at("config"));
    if (!j.at("standardizer").is_null()) {
      const auto& s = j.at("standardizer");
      m.standardizer = Standardizer{s.at("mean").get<std::vector<double>>(), s.at("stddev").get<std::vector<double>>()};
    }
    if (m.kind == ModelKind::kRandomForest) {
      for (const auto& nodes : j.at("forest")) {
        DecisionTree tree;
        for (const auto& n : nodes) {
          tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                                n.at(4).get<double>()});
        }
        m.forest.push_back(std::move(tree));
      }
    } else {
      const auto& s = j.at("svm");
      m.svm.weights = s.at("weights").get<std::vector<double>>();
      m.svm.bias = s.at("bias").get<double>();
      m.svm.objective_trace = s.at("objective_trace").get<std::vector<double>>();
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("model file: ") + e.what());
  }
}

std::string serialize_model(const TrainedModel& model) { return to_json(model).dump() + "\n"; }

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  write_file_atomic(path, serialize_model(model));
}

TrainedModel load_model(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return model_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, std::string("model file: ") + e.what());
  }
}

}  // namespace stripescan
