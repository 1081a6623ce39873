#include "cipipe/model_json.hpp"

#include <fstream>

namespace cipipe {
namespace {

using nlohmann::json;

json vector_json(const VectorD& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_json(const MatrixD& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

VectorD vector_from(const json& j) {
  VectorD v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

MatrixD matrix_from(const json& j, Eigen::Index cols) {
  MatrixD m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& row = j.at(i);
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(Errc::invariant_violation, "matrix rows have inconsistent lengths");
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row.at(c).get<double>();
    }
  }
  return m;
}

void check_header(const json& j, std::string_view kind) {
  if (!j.is_object()) throw Error(Errc::invariant_violation, "model document is not a JSON object");
  const int version = j.at("schema_version").get<int>();
  if (version != kSchemaVersion) {
    throw Error(Errc::schema_version, "unsupported schema_version " + std::to_string(version));
  }
  if (j.at("kind").get<std::string>() != kind) {
    throw Error(Errc::invariant_violation, "expected a model of kind '" + std::string(kind) + "'");
  }
}

template <typename Fn>
auto parse_guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(Errc::invariant_violation, std::string("malformed model document: ") + e.what());
  }
}

json reducer_json(const Reducer& r) {
  json j;
  j["kind"] = r.kind == ReducerKind::pca ? "pca" : "identity";
  j["input_dim"] = r.input_dim;
  j["output_dim"] = r.output_dim;
  j["explained_variance_ratio"] = r.explained_variance_ratio;
  if (r.kind == ReducerKind::pca) {
    j["mean"] = vector_json(r.mean);
    j["components"] = matrix_json(r.components);
  }
  return j;
}

Reducer reducer_from(const json& j) {
  Reducer r;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "pca") {
    r.kind = ReducerKind::pca;
  } else if (kind == "identity") {
    r.kind = ReducerKind::identity;
  } else {
    throw Error(Errc::invariant_violation, "unknown reducer kind '" + kind + "'");
  }
  r.input_dim = j.at("input_dim").get<int>();
  r.output_dim = j.at("output_dim").get<int>();
  r.explained_variance_ratio = j.at("explained_variance_ratio").get<double>();
  if (r.kind == ReducerKind::pca) {
    r.mean = vector_from(j.at("mean"));
    r.components = matrix_from(j.at("components"), r.input_dim);
  }
  return r;
}

}  // namespace

json to_json(const PipelineConfig& c) {
  return json{{"n_partitions", c.n_partitions}, {"theta_image", c.theta_image}, {"theta_ci", c.theta_ci},
              {"reduced_dim", c.reduced_dim},   {"min_likes", c.min_likes},     {"seed", c.seed},
              {"kmeans_max_iters", c.kmeans_max_iters}, {"kmeans_tol", c.kmeans_tol}};
}

PipelineConfig config_from_json(const json& j) {
  return parse_guarded([&] {
    PipelineConfig c;
    c.n_partitions = j.value("n_partitions", c.n_partitions);
    c.theta_image = j.value("theta_image", c.theta_image);
    c.theta_ci = j.value("theta_ci", c.theta_ci);
    c.reduced_dim = j.value("reduced_dim", c.reduced_dim);
    c.min_likes = j.value("min_likes", c.min_likes);
    c.seed = j.value("seed", c.seed);
    c.kmeans_max_iters = j.value("kmeans_max_iters", c.kmeans_max_iters);
    c.kmeans_tol = j.value("kmeans_tol", c.kmeans_tol);
    return c;
  });
}

json to_json(const PartitionModel& m) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "partition_model";
  j["config"] = to_json(m.config);
  j["reducer"] = reducer_json(m.reducer);
  j["centroids"] = matrix_json(m.centroids);
  j["assignment"] = m.assignment;
  json log = json::array();
  for (const auto& ev : m.merge_log) {
    log.push_back({{"left_id", ev.left_id},
                   {"right_id", ev.right_id},
                   {"new_id", ev.new_id},
                   {"ward_distance", ev.ward_distance},
                   {"user_iou", ev.user_iou}});
  }
  j["merge_log"] = std::move(log);
  json l2f = json::array();
  for (const auto& [leaf, fin] : m.leaf_to_final) l2f.push_back(fin);
  j["leaf_to_final"] = std::move(l2f);
  json ci = json::array();
  for (const auto& [id, score] : m.ci_scores) ci.push_back({{"id", id}, {"ci", score}});
  j["ci_scores"] = std::move(ci);
  return j;
}

PartitionModel partition_model_from_json(const json& j) {
  PartitionModel m = parse_guarded([&] {
    check_header(j, "partition_model");
    PartitionModel m;
    m.config = config_from_json(j.at("config"));
    m.reducer = reducer_from(j.at("reducer"));
    m.centroids = matrix_from(j.at("centroids"), m.reducer.output_dim);
    m.assignment = j.at("assignment").get<std::map<std::string, int>>();
    for (const auto& ev : j.at("merge_log")) {
      m.merge_log.push_back({ev.at("left_id").get<int>(), ev.at("right_id").get<int>(), ev.at("new_id").get<int>(),
                             ev.at("ward_distance").get<double>(), ev.at("user_iou").get<double>()});
    }
    const auto& l2f = j.at("leaf_to_final");
    for (std::size_t i = 0; i < l2f.size(); ++i) m.leaf_to_final[static_cast<int>(i)] = l2f.at(i).get<int>();
    for (const auto& entry : j.at("ci_scores")) {
      m.ci_scores[entry.at("id").get<int>()] = entry.at("ci").get<double>();
    }
    return m;
  });
  m.validate();
  return m;
}

json to_json(const CiRegressor& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "ci_regressor";
  j["weights"] = vector_json(r.weights);
  j["bias"] = r.bias;
  j["ridge_lambda"] = r.ridge_lambda;
  j["target_min"] = r.target_min;
  j["target_max"] = r.target_max;
  return j;
}

CiRegressor regressor_from_json(const json& j) {
  CiRegressor r = parse_guarded([&] {
    check_header(j, "ci_regressor");
    CiRegressor r;
    r.weights = vector_from(j.at("weights"));
    r.bias = j.at("bias").get<double>();
    r.ridge_lambda = j.at("ridge_lambda").get<double>();
    r.target_min = j.at("target_min").get<double>();
    r.target_max = j.at("target_max").get<double>();
    return r;
  });
  r.validate();
  return r;
}

json to_json(const GroupAssignment& g) {
  json groups = json::array();
  for (const auto& [id, group] : g.group_of) groups.push_back({{"id", id}, {"group", std::string(to_string(group))}});
  return json{{"group_of", std::move(groups)}, {"boundaries", g.boundaries}};
}

json to_json(const AttributeTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"attribute", r.attribute},
                    {"comm", r.percent_comm},
                    {"inter", r.percent_inter},
                    {"subj", r.percent_subj},
                    {"delta", r.delta}});
  }
  json numeric = json::array();
  for (const auto& r : t.numeric_rows) {
    json entry{{"attribute", r.attribute}};
    for (int g = 0; g < 3; ++g) {
      const auto& q = r.per_group[static_cast<std::size_t>(g)];
      std::string key(to_string(static_cast<Group>(g)));
      entry[key] = q ? json{{"q25", q->q25}, {"q50", q->q50}, {"q75", q->q75}} : json(nullptr);
    }
    numeric.push_back(std::move(entry));
  }
  return json{{"rows", std::move(rows)}, {"numeric_rows", std::move(numeric)}};
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_failure, "cannot open '" + path.string() + "' for writing");
  out << j.dump(1) << '\n';
  out.close();
  if (!out) throw Error(Errc::io_failure, "failed to write '" + path.string() + "'");
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::invariant_violation, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void save_model(const PartitionModel& model, const std::filesystem::path& path) {
  model.validate();
  write_json_file(to_json(model), path);
}

void save_model(const CiRegressor& model, const std::filesystem::path& path) {
  model.validate();
  write_json_file(to_json(model), path);
}

PartitionModel load_partition_model(const std::filesystem::path& path) {
  return partition_model_from_json(read_json_file(path));
}

CiRegressor load_regressor(const std::filesystem::path& path) { return regressor_from_json(read_json_file(path)); }

}  // namespace cipipe
