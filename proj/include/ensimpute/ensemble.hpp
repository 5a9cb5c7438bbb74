#pragma once

// The twelve imputation/classification methods: four single-tree methods and
// three ensemble families (bagging + single imputation, bagging + multiple
// imputation, multiple-imputation ensemble), combined by majority vote.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "ensimpute/data.hpp"
#include "ensimpute/impute.hpp"
#include "ensimpute/random.hpp"
#include "ensimpute/tree.hpp"

namespace ensimpute {

enum class MethodId {
  NoImp,
  MEI,
  GRandI,
  EM,
  BagNoImp,
  BagMEI,
  BagGRandI,
  BagEM,
  BagMIGRandI,
  BagMIEM,
  MIGrandI,
  MIEM,
};

inline constexpr std::array<MethodId, 12> kAllMethods = {
    MethodId::NoImp,     MethodId::MEI,       MethodId::GRandI,      MethodId::EM,
    MethodId::BagNoImp,  MethodId::BagMEI,    MethodId::BagGRandI,   MethodId::BagEM,
    MethodId::BagMIGRandI, MethodId::BagMIEM, MethodId::MIGrandI,    MethodId::MIEM,
};

enum class Family { Single, BagSingle, BagMI, MIEnsemble };

inline std::string to_string(MethodId m) {
  switch (m) {
    case MethodId::NoImp: return "NoImp";
    case MethodId::MEI: return "MEI";
    case MethodId::GRandI: return "GRandI";
    case MethodId::EM: return "EM";
    case MethodId::BagNoImp: return "BagNoImp";
    case MethodId::BagMEI: return "BagMEI";
    case MethodId::BagGRandI: return "BagGRandI";
    case MethodId::BagEM: return "BagEM";
    case MethodId::BagMIGRandI: return "BagMIGRandI";
    case MethodId::BagMIEM: return "BagMIEM";
    case MethodId::MIGrandI: return "MIGrandI";
    case MethodId::MIEM: return "MIEM";
  }
  return "?";
}

inline MethodId parse_method(std::string s) {
  std::string key;
  for (char c : s)
    if (c != '-' && c != '_') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (MethodId m : kAllMethods) {
    std::string name = to_string(m);
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    if (name == key) return m;
  }
  throw ValidationError("unknown method '" + s + "'");
}

inline Family family_of(MethodId m) {
  switch (m) {
    case MethodId::NoImp:
    case MethodId::MEI:
    case MethodId::GRandI:
    case MethodId::EM: return Family::Single;
    case MethodId::BagNoImp:
    case MethodId::BagMEI:
    case MethodId::BagGRandI:
    case MethodId::BagEM: return Family::BagSingle;
    case MethodId::BagMIGRandI:
    case MethodId::BagMIEM: return Family::BagMI;
    case MethodId::MIGrandI:
    case MethodId::MIEM: return Family::MIEnsemble;
  }
  return Family::Single;
}

/// Base imputer of a method; nullopt for the no-imputation methods.
inline std::optional<ImputerKind> imputer_of(MethodId m) {
  switch (m) {
    case MethodId::NoImp:
    case MethodId::BagNoImp: return std::nullopt;
    case MethodId::MEI:
    case MethodId::BagMEI: return ImputerKind::MEI;
    case MethodId::GRandI:
    case MethodId::BagGRandI:
    case MethodId::BagMIGRandI:
    case MethodId::MIGrandI: return ImputerKind::GRandI;
    case MethodId::EM:
    case MethodId::BagEM:
    case MethodId::BagMIEM:
    case MethodId::MIEM: return ImputerKind::EMI;
  }
  return std::nullopt;
}

inline bool is_ensemble(MethodId m) { return family_of(m) != Family::Single; }

struct EnsembleConfig {
  std::size_t B = 25;
  std::size_t M = 5;
  TreeConfig tree;
  ImputeConfig impute;
  std::uint64_t seed = 0;
  /// Impute missing test cells with each member's fitted imputer. When false,
  /// every member relies on the tree's fractional descent instead.
  bool test_imputation = true;
};

inline void validate(const EnsembleConfig& c, std::optional<MethodId> method = std::nullopt) {
  if (c.B < 1) throw ValidationError("B must be >= 1");
  if (c.M < 1) throw ValidationError("M must be >= 1");
  validate(c.tree);
  validate(c.impute.em);
  if (!(c.impute.z_bound > 0.0)) throw ValidationError("z_bound must be positive");
  if (method && family_of(*method) == Family::BagMI && c.B % c.M != 0)
    throw ValidationError("B (" + std::to_string(c.B) + ") must be a multiple of M (" + std::to_string(c.M) +
                          ") for " + to_string(*method));
}

struct EnsembleMember {
  DecisionTree tree;
  std::optional<FittedImputer> imputer;
  /// Seeds test-time stochastic imputation, per record.
  std::uint64_t seed = 0;
};

struct EnsembleModel {
  MethodId method = MethodId::NoImp;
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  bool test_imputation = true;
  std::vector<EnsembleMember> members;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
};

// ---------------------------------------------------------------------------
// Accounting

struct DatasetCount {
  std::size_t bootstraps = 0;
  std::size_t imputations = 0;
  std::size_t datasets = 0;
  bool operator==(const DatasetCount&) const = default;
};

/// Bootstrap samples, imputations and datasets created by each ensemble family.
inline DatasetCount dataset_count(Family f, std::size_t b, std::size_t m) {
  switch (f) {
    case Family::BagSingle: return {b, b * m, b + b * m};
    case Family::BagMI:
      if (m == 0 || b % m != 0) throw ValidationError("dataset_count: B must be a multiple of M");
      return {b / m, b, b + b / m};
    case Family::MIEnsemble: return {0, b, b};
    case Family::Single: break;
  }
  throw ValidationError("dataset_count: not an ensemble family");
}

// ---------------------------------------------------------------------------
// Construction

/// N records drawn uniformly with replacement.
inline Dataset bootstrap(const Dataset& data, RandomStream& rng) {
  if (data.rows() == 0) throw ValidationError("bootstrap: empty dataset");
  std::vector<std::size_t> idx(data.rows());
  for (auto& i : idx) i = rng.index(data.rows());
  return data.subset(idx);
}

namespace detail {

// Bootstrap streams depend only on the base seed and the bootstrap index, so
// methods that share a seed share their bootstrap samples.
inline RandomStream bootstrap_stream(const EnsembleConfig& c, std::size_t b) {
  return RandomStream(derive_seed(c.seed, {hash_name("bootstrap"), b}));
}

inline RandomStream impute_stream(const EnsembleConfig& c, MethodId m, std::size_t unit) {
  return RandomStream(derive_seed(c.seed, {hash_name("impute"), hash_name(to_string(m)), unit}));
}

inline std::uint64_t member_seed(const EnsembleConfig& c, MethodId m, std::size_t j) {
  return derive_seed(c.seed, {hash_name("member"), hash_name(to_string(m)), j});
}

inline EnsembleModel empty_model(MethodId method, const Dataset& train, const EnsembleConfig& c) {
  EnsembleModel model;
  model.method = method;
  model.n_classes = train.n_classes();
  model.n_features = train.cols();
  model.test_imputation = c.test_imputation;
  model.feature_names = train.meta.feature_names;
  model.class_names = train.meta.class_names;
  return model;
}

/// One member from one (possibly incomplete) training set using single or
/// average-of-MI imputation.
inline EnsembleMember single_member(MethodId method, const Dataset& train, const EnsembleConfig& c,
                                    std::size_t j) {
  EnsembleMember mem;
  mem.seed = member_seed(c, method, j);
  const auto kind = imputer_of(method);
  if (!kind) {
    mem.tree = train_tree(train, c.tree);
    return mem;
  }
  if (*kind == ImputerKind::MEI) {
    FittedImputer imp = fit_mei(train);
    mem.tree = train_tree(apply_mei(imp, train), c.tree);
    mem.imputer = std::move(imp);
    return mem;
  }
  const auto mi = multiple_impute_fitted(*kind, train, c.M, c.impute, impute_stream(c, method, j));
  mem.tree = train_tree(average_imputations(mi.copies, train), c.tree);
  mem.imputer = merge_for_average(mi.imputers);
  return mem;
}

}  // namespace detail

inline EnsembleModel build_single(MethodId method, const Dataset& train, const EnsembleConfig& c) {
  if (family_of(method) != Family::Single) throw ValidationError(to_string(method) + " is not a single-tree method");
  validate(c, method);
  EnsembleModel model = detail::empty_model(method, train, c);
  model.members.push_back(detail::single_member(method, train, c, 0));
  return model;
}

inline EnsembleModel build_bag_single(MethodId method, const Dataset& train, const EnsembleConfig& c) {
  if (family_of(method) != Family::BagSingle)
    throw ValidationError(to_string(method) + " is not a bagging single-imputation method");
  validate(c, method);
  EnsembleModel model = detail::empty_model(method, train, c);
  for (std::size_t b = 0; b < c.B; ++b) {
    RandomStream bs = detail::bootstrap_stream(c, b);
    model.members.push_back(detail::single_member(method, bootstrap(train, bs), c, b));
  }
  return model;
}

inline EnsembleModel build_bag_mi(MethodId method, const Dataset& train, const EnsembleConfig& c) {
  if (method == MethodId::BagMEI || method == MethodId::MEI)
    throw ValidationError("MEI is single-valued and is excluded from bagging multiple imputation");
  if (family_of(method) != Family::BagMI)
    throw ValidationError(to_string(method) + " is not a bagging multiple-imputation method");
  validate(c, method);
  EnsembleModel model = detail::empty_model(method, train, c);
  const auto kind = *imputer_of(method);
  for (std::size_t b = 0; b < c.B / c.M; ++b) {
    RandomStream bs = detail::bootstrap_stream(c, b);
    const Dataset boot = bootstrap(train, bs);
    auto mi = multiple_impute_fitted(kind, boot, c.M, c.impute, detail::impute_stream(c, method, b));
    for (std::size_t i = 0; i < c.M; ++i) {
      EnsembleMember mem;
      const std::size_t j = b * c.M + i;
      mem.seed = detail::member_seed(c, method, j);
      mem.tree = train_tree(mi.copies[i], c.tree);
      mem.imputer = std::move(mi.imputers[i]);
      model.members.push_back(std::move(mem));
    }
  }
  return model;
}

inline EnsembleModel build_mi_ensemble(MethodId method, const Dataset& train, const EnsembleConfig& c) {
  if (method == MethodId::MEI || method == MethodId::BagMEI || method == MethodId::NoImp ||
      method == MethodId::BagNoImp)
    throw ValidationError("the multiple-imputation ensemble needs a stochastic imputer (GRandI or EM), got " +
                          to_string(method));
  if (family_of(method) != Family::MIEnsemble)
    throw ValidationError(to_string(method) + " is not a multiple-imputation ensemble method");
  validate(c, method);
  EnsembleModel model = detail::empty_model(method, train, c);
  auto mi = multiple_impute_fitted(*imputer_of(method), train, c.B, c.impute, detail::impute_stream(c, method, 0));
  for (std::size_t j = 0; j < c.B; ++j) {
    EnsembleMember mem;
    mem.seed = detail::member_seed(c, method, j);
    mem.tree = train_tree(mi.copies[j], c.tree);
    mem.imputer = std::move(mi.imputers[j]);
    model.members.push_back(std::move(mem));
  }
  return model;
}

inline EnsembleModel build(MethodId method, const Dataset& train, const EnsembleConfig& c) {
  switch (family_of(method)) {
    case Family::Single: return build_single(method, train, c);
    case Family::BagSingle: return build_bag_single(method, train, c);
    case Family::BagMI: return build_bag_mi(method, train, c);
    case Family::MIEnsemble: return build_mi_ensemble(method, train, c);
  }
  throw ValidationError("unknown method family");
}

// ---------------------------------------------------------------------------
// Prediction

/// One member's hard vote for a record. `record_key` seeds any stochastic
/// test-time imputation so predictions are reproducible.
inline int member_vote(const EnsembleModel& model, const EnsembleMember& mem, const Vector& values,
                       const std::vector<bool>& observed, std::uint64_t record_key) {
  const bool incomplete = std::find(observed.begin(), observed.end(), false) != observed.end();
  if (incomplete && mem.imputer && model.test_imputation) {
    Vector filled = values;
    RandomStream rng(derive_seed(mem.seed, {record_key}));
    impute_record(*mem.imputer, filled, observed, rng);
    const std::vector<bool> all(observed.size(), true);
    return argmax(predict_dist(mem.tree, filled, all));
  }
  return argmax(predict_dist(mem.tree, values, observed));
}

/// Plurality of member votes; ties go to the lowest class index.
inline int plurality(const std::vector<int>& votes, std::size_t n_classes) {
  if (votes.empty()) throw ValidationError("predict: empty ensemble");
  std::vector<std::size_t> counts(n_classes, 0);
  for (int v : votes) ++counts[static_cast<std::size_t>(v)];
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

inline int predict(const EnsembleModel& model, const Vector& values, const std::vector<bool>& observed,
                   std::uint64_t record_key = 0) {
  if (model.members.empty()) throw ValidationError("predict: empty ensemble");
  if (static_cast<std::size_t>(values.size()) != model.n_features || observed.size() != model.n_features)
    throw ValidationError("predict: record has " + std::to_string(values.size()) + " cells, model expects " +
                          std::to_string(model.n_features));
  std::vector<int> votes;
  votes.reserve(model.members.size());
  for (const auto& mem : model.members) votes.push_back(member_vote(model, mem, values, observed, record_key));
  return plurality(votes, model.n_classes);
}

namespace detail {
inline void row_of(const Dataset& d, std::size_t r, Vector& v, std::vector<bool>& m) {
  v = d.values.row(static_cast<Eigen::Index>(r)).transpose();
  m.resize(d.cols());
  for (std::size_t c = 0; c < d.cols(); ++c) m[c] = d.observed(r, c);
}
}  // namespace detail

/// Per-member predictions for every record: result[member][record].
inline std::vector<std::vector<int>> member_predictions(const EnsembleModel& model, const Dataset& data) {
  if (data.cols() != model.n_features) throw ValidationError("member_predictions: feature count mismatch");
  std::vector<std::vector<int>> out(model.members.size(), std::vector<int>(data.rows()));
  Vector v;
  std::vector<bool> m;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    detail::row_of(data, r, v, m);
    for (std::size_t j = 0; j < model.members.size(); ++j)
      out[j][r] = member_vote(model, model.members[j], v, m, r);
  }
  return out;
}

inline std::vector<int> predict_all(const EnsembleModel& model, const Dataset& data) {
  const auto per_member = member_predictions(model, data);
  std::vector<int> out(data.rows());
  std::vector<int> votes(model.members.size());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t j = 0; j < per_member.size(); ++j) votes[j] = per_member[j][r];
    out[r] = plurality(votes, model.n_classes);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization (versioned JSON; doubles round-trip exactly)

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const FittedImputer& imp) {
  nlohmann::json j;
  j["kind"] = to_string(imp.kind);
  j["z_bound"] = imp.z_bound;
  j["ridge"] = imp.ridge;
  j["draws"] = imp.draws;
  auto& stats = j["stats"] = nlohmann::json::array();
  for (const auto& s : imp.stats) stats.push_back({s.mean, s.sd, s.observed_count});
  auto& models = j["models"] = nlohmann::json::array();
  for (const auto& m : imp.models) {
    nlohmann::json jm;
    jm["mean"] = std::vector<double>(m.mean.data(), m.mean.data() + m.mean.size());
    jm["cov"] = std::vector<double>(m.cov.data(), m.cov.data() + m.cov.size());
    models.push_back(std::move(jm));
  }
  return j;
}

inline FittedImputer imputer_from_json(const nlohmann::json& j) {
  FittedImputer imp;
  imp.kind = parse_imputer_kind(j.at("kind").get<std::string>());
  imp.z_bound = j.at("z_bound").get<double>();
  imp.ridge = j.at("ridge").get<double>();
  imp.draws = j.at("draws").get<int>();
  for (const auto& s : j.at("stats")) imp.stats.push_back({s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<std::size_t>()});
  for (const auto& jm : j.at("models")) {
    const auto mean = jm.at("mean").get<std::vector<double>>();
    const auto cov = jm.at("cov").get<std::vector<double>>();
    const auto f = static_cast<Eigen::Index>(mean.size());
    if (cov.size() != mean.size() * mean.size()) throw ValidationError("model file: covariance size mismatch");
    GaussianModel m;
    m.mean = Eigen::Map<const Vector>(mean.data(), f);
    m.cov = Eigen::Map<const Matrix>(cov.data(), f, f);
    imp.models.push_back(std::move(m));
  }
  return imp;
}

inline nlohmann::json to_json(const EnsembleModel& model) {
  nlohmann::json j;
  j["format"] = "ensimpute-model";
  j["version"] = kModelFormatVersion;
  j["method"] = to_string(model.method);
  j["n_classes"] = model.n_classes;
  j["n_features"] = model.n_features;
  j["test_imputation"] = model.test_imputation;
  j["feature_names"] = model.feature_names;
  j["class_names"] = model.class_names;
  auto& members = j["members"] = nlohmann::json::array();
  for (const auto& mem : model.members) {
    nlohmann::json jm;
    jm["seed"] = mem.seed;
    auto& nodes = jm["nodes"] = nlohmann::json::array();
    for (const auto& n : mem.tree.nodes) {
      if (n.leaf)
        nodes.push_back({{"leaf", n.class_weights}});
      else
        nodes.push_back({{"attr", n.attr},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"weights", {n.weight_left, n.weight_right}}});
    }
    jm["imputer"] = mem.imputer ? to_json(*mem.imputer) : nlohmann::json(nullptr);
    members.push_back(std::move(jm));
  }
  return j;
}

inline EnsembleModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ensimpute-model") throw ValidationError("not an ensimpute model file");
  if (j.at("version").get<int>() != kModelFormatVersion)
    throw ValidationError("unsupported model format version " + j.at("version").dump());
  EnsembleModel model;
  model.method = parse_method(j.at("method").get<std::string>());
  model.n_classes = j.at("n_classes").get<std::size_t>();
  model.n_features = j.at("n_features").get<std::size_t>();
  model.test_imputation = j.at("test_imputation").get<bool>();
  model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  model.class_names = j.at("class_names").get<std::vector<std::string>>();
  for (const auto& jm : j.at("members")) {
    EnsembleMember mem;
    mem.seed = jm.at("seed").get<std::uint64_t>();
    mem.tree.n_classes = model.n_classes;
    mem.tree.n_features = model.n_features;
    for (const auto& jn : jm.at("nodes")) {
      TreeNode n;
      if (jn.contains("leaf")) {
        n.class_weights = jn.at("leaf").get<std::vector<double>>();
      } else {
        n.leaf = false;
        n.attr = jn.at("attr").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
        n.weight_left = jn.at("weights").at(0).get<double>();
        n.weight_right = jn.at("weights").at(1).get<double>();
      }
      mem.tree.nodes.push_back(std::move(n));
    }
    if (!jm.at("imputer").is_null()) mem.imputer = imputer_from_json(jm.at("imputer"));
    model.members.push_back(std::move(mem));
  }
  return model;
}

inline void save_model(const EnsembleModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << to_json(model).dump() << '\n';
}

inline EnsembleModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": malformed model file: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace ensimpute
