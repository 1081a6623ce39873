// ci_pipeline: subcommand front end for the common-interest engine.

#include "cipipe/analysis.hpp"
#include "cipipe/io.hpp"
#include "cipipe/model_json.hpp"
#include "cipipe/parallel.hpp"
#include "cipipe/pipeline.hpp"
#include "cipipe/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cipipe;

namespace {

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("CI_PIPELINE_LOG");
  if (env == nullptr) return LogLevel::error;
  const std::string_view v(env);
  if (v == "debug") return LogLevel::debug;
  if (v == "info") return LogLevel::info;
  return LogLevel::error;
}

void log(LogLevel level, const std::string& msg) {
  static const LogLevel threshold = log_level();
  if (level <= threshold) std::cerr << (level == LogLevel::debug ? "debug: " : "info: ") << msg << '\n';
}

/// Thrown for bad flag combinations that CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void fail(const std::string& message, std::optional<Errc> code = std::nullopt) {
  json j{{"error", message}};
  if (code) j["code"] = std::string(to_string(*code));
  std::cerr << j.dump() << '\n';
}

// shortest representation that reads back to the same double
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// default shown in --help; keeps a trailing ".0" on integral doubles
std::string shown(double v) { return json(v).dump(); }

bool is_config_error(Errc code) {
  switch (code) {
    case Errc::bad_n_partitions:
    case Errc::bad_theta_image:
    case Errc::bad_theta_ci:
    case Errc::bad_reduced_dim:
    case Errc::bad_min_likes:
    case Errc::bad_kmeans_max_iters:
    case Errc::bad_kmeans_tol:
    case Errc::bad_fraction:
      return true;
    default:
      return false;
  }
}

/// Writes to `path`, or to stdout when it is empty.
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty()) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot open '" + path + "' for writing");
  write(out);
  if (!out) throw Error(Errc::io_failure, "failed writing '" + path + "'");
}

struct Options {
  std::string embeddings, likes, attributes, model, regressor, out, config, json_out;
  PipelineConfig pipeline;
  std::string reducer = "pca";
  double ridge_lambda = 0.0;
  double train_fraction = 0.8;
  int threads = 0;
  bool clamp = false;
  SyntheticSpec synth;
};

struct Flags {
  CLI::Option* n_partitions = nullptr;
  CLI::Option* theta_image = nullptr;
  CLI::Option* theta_ci = nullptr;
  CLI::Option* reduced_dim = nullptr;
  CLI::Option* min_likes = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* ridge_lambda = nullptr;
};

void add_threads(CLI::App* app, Options& o) {
  app->add_option("--threads", o.threads, "Worker threads (0 = machine parallelism)")->default_str("0");
}

void add_pipeline_flags(CLI::App* app, Options& o, Flags& f) {
  const PipelineConfig d;
  f.n_partitions = app->add_option("--n-partitions", o.pipeline.n_partitions, "Leaf partitions N")
                       ->default_str(std::to_string(d.n_partitions));
  f.theta_image = app->add_option("--theta-image", o.pipeline.theta_image, "Ward distance threshold")
                      ->default_str(shown(d.theta_image));
  f.theta_ci = app->add_option("--theta-ci", o.pipeline.theta_ci, "User IoU threshold")->default_str(shown(d.theta_ci));
  f.reduced_dim = app->add_option("--reduced-dim", o.pipeline.reduced_dim, "PCA output dimension r")
                      ->default_str(std::to_string(d.reduced_dim));
  f.min_likes = app->add_option("--min-likes", o.pipeline.min_likes, "Likes needed to count a user in a partition")
                    ->default_str(std::to_string(d.min_likes));
  f.seed = app->add_option("--seed", o.pipeline.seed, "Random seed")->default_str(std::to_string(d.seed));
  app->add_option("--reducer", o.reducer, "Dimensionality reduction")
      ->check(CLI::IsMember({"pca", "identity"}))
      ->default_str("pca");
  app->add_option("--config", o.config, "PipelineConfig JSON; explicit flags take precedence");
}

/// Config from --config (if any) with explicitly given flags applied on top.
PipelineConfig resolve_config(const Options& o, const Flags& f) {
  PipelineConfig c = o.config.empty() ? PipelineConfig{} : config_from_json(read_json_file(o.config));
  if (f.n_partitions->count()) c.n_partitions = o.pipeline.n_partitions;
  if (f.theta_image->count()) c.theta_image = o.pipeline.theta_image;
  if (f.theta_ci->count()) c.theta_ci = o.pipeline.theta_ci;
  if (f.reduced_dim->count()) c.reduced_dim = o.pipeline.reduced_dim;
  if (f.min_likes->count()) c.min_likes = o.pipeline.min_likes;
  if (f.seed->count()) c.seed = o.pipeline.seed;
  c.validate();
  return c;
}

std::vector<std::pair<int, double>> by_ci(const PartitionModel& model) {
  std::vector<std::pair<int, double>> order(model.ci_scores.begin(), model.ci_scores.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return order;
}

void run_synth(const Options& o) {
  if (o.out.empty()) throw UsageError("synth needs --out DIR");
  SyntheticSpec spec = o.synth;
  spec.seed = o.pipeline.seed;
  const auto data = generate_synthetic(spec);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_embeddings_file(data.embeddings, dir / "embeddings.ciem");
  emit((dir / "likes.csv").string(), [&](std::ostream& os) { write_likes(data.likes, os); });
  write_json_file(to_json(data.truth, data.embeddings), dir / "ground_truth.json");
  log(LogLevel::info, "synth: " + std::to_string(data.embeddings.records.size()) + " images, " +
                          std::to_string(data.likes.total_users()) + " users");
}

void run_fit(const Options& o, const Flags& f) {
  if (o.out.empty()) throw UsageError("fit needs --out MODEL.json");
  const auto config = resolve_config(o, f);
  const auto embeddings = read_embeddings_file(o.embeddings);
  const auto likes = read_likes_file(o.likes);
  const auto kind = o.reducer == "identity" ? ReducerKind::identity : ReducerKind::pca;
  log(LogLevel::info, "fit: " + std::to_string(embeddings.records.size()) + " images, dim " +
                          std::to_string(embeddings.dim) + ", N=" + std::to_string(config.n_partitions));
  const auto model = fit_partition_model(embeddings, likes, config, kind, resolve_threads(o.threads));
  save_model(model, o.out);
  log(LogLevel::info, "fit: " + std::to_string(model.merge_log.size()) + " merges, " +
                          std::to_string(model.ci_scores.size()) + " final partitions");
  for (const auto& ev : model.merge_log) {
    log(LogLevel::debug, "merge " + std::to_string(ev.left_id) + " + " + std::to_string(ev.right_id) + " -> " +
                             std::to_string(ev.new_id) + " (ward " + fmt(ev.ward_distance) + ", iou " +
                             fmt(ev.user_iou) + ")");
  }
  const auto sizes = model.final_partition_sizes();
  std::cout << "partition_id,size,ci\n";
  for (const auto& [id, ci] : by_ci(model)) std::cout << id << ',' << sizes.at(id) << ',' << fmt(ci) << '\n';
}

void run_train(const Options& o, const Flags& f) {
  if (o.out.empty()) throw UsageError("train needs --out REGRESSOR.json");
  const auto model = load_partition_model(o.model);
  const auto embeddings = read_embeddings_file(o.embeddings);
  const std::uint64_t seed = f.seed->count() ? o.pipeline.seed : model.config.seed;
  const std::optional<double> lambda = f.ridge_lambda->count() ? std::optional(o.ridge_lambda) : std::nullopt;
  const auto report = train_regressor(model, embeddings, lambda, o.train_fraction, seed, resolve_threads(o.threads));
  save_model(report.regressor, o.out);
  json j{{"train_r2", report.train_r2},
         {"test_r2", std::isfinite(report.test_r2) ? json(report.test_r2) : json(nullptr)},
         {"n_train", report.n_train},
         {"n_test", report.n_test},
         {"ridge_lambda", report.regressor.ridge_lambda}};
  std::cout << j.dump() << '\n';
}

void run_score(const Options& o, bool sorted) {
  const auto regressor = load_regressor(o.regressor);
  const auto embeddings = read_embeddings_file(o.embeddings);
  std::vector<std::pair<std::string, double>> rows;
  if (sorted) {
    rows = rank_images(regressor, embeddings, o.clamp);
  } else {
    const VectorD s = predict(regressor, embeddings.matrix(), o.clamp);
    for (std::size_t i = 0; i < embeddings.records.size(); ++i) {
      rows.emplace_back(embeddings.records[i].image_id, s(static_cast<Eigen::Index>(i)));
    }
  }
  emit(o.out, [&](std::ostream& os) {
    os << "image_id,score\n";
    for (const auto& [id, score] : rows) os << id << ',' << fmt(score) << '\n';
  });
}

void run_group(const Options& o) {
  const auto model = load_partition_model(o.model);
  const auto groups = group_partitions(model);
  emit(o.out, [&](std::ostream& os) { os << to_json(groups).dump(1) << '\n'; });
}

void run_attrs(const Options& o) {
  const auto model = load_partition_model(o.model);
  const auto attrs = read_attributes_file(o.attributes);
  const auto table = attribute_table(attrs, group_partitions(model), model.final_assignment());
  emit(o.out, [&](std::ostream& os) {
    os << "attribute,comm,inter,subj,delta\n";
    for (const auto& r : table.rows) {
      os << r.attribute << ',' << fmt(r.percent_comm) << ',' << fmt(r.percent_inter) << ',' << fmt(r.percent_subj)
         << ',' << fmt(r.delta) << '\n';
    }
  });
  if (!o.json_out.empty()) write_json_file(to_json(table), o.json_out);
}

void run_assign(const Options& o) {
  const auto model = load_partition_model(o.model);
  const auto embeddings = read_embeddings_file(o.embeddings);
  const auto result = assign_external(model, group_partitions(model), embeddings.matrix(), resolve_threads(o.threads));
  json counts, shares;
  for (std::size_t g = 0; g < 3; ++g) {
    const std::string name(to_string(static_cast<Group>(g)));
    counts[name] = result.counts[g];
    shares[name] = result.shares[g];
  }
  const json j{{"n", embeddings.records.size()}, {"counts", counts}, {"shares", shares}};
  emit(o.out, [&](std::ostream& os) { os << j.dump(1) << '\n'; });
}

void run_report(const Options& o) {
  const auto model = load_partition_model(o.model);
  const auto groups = group_partitions(model);
  const auto sizes = model.final_partition_sizes();
  emit(o.out, [&](std::ostream& os) {
    os << "partition_id,size,ci,group\n";
    for (const auto& [id, ci] : by_ci(model)) {
      os << id << ',' << sizes.at(id) << ',' << fmt(ci) << ',' << to_string(groups.group_of.at(id)) << '\n';
    }
  });
}

int run(int argc, char** argv) {
  CLI::App app{"Common-interest scoring pipeline for image collections"};
  app.require_subcommand(1);
  Options o;
  Flags f;

  auto* synth = app.add_subcommand("synth", "Generate a planted synthetic dataset");
  {
    const SyntheticSpec d;
    synth->add_option("--out", o.out, "Output directory")->required();
    synth->add_option("--n-topics", o.synth.n_topics, "Topics")->default_str(std::to_string(d.n_topics));
    synth->add_option("--dim", o.synth.topic_dim, "Embedding dimension")->default_str(std::to_string(d.topic_dim));
    synth->add_option("--n-users", o.synth.n_users, "Users")->default_str(std::to_string(d.n_users));
    synth->add_option("--common-topics", o.synth.common_topic_count, "Topics liked by most users")
        ->default_str(std::to_string(d.common_topic_count));
    synth->add_option("--common-like-prob", o.synth.common_like_prob, "Probability a user likes a common topic")
        ->default_str(shown(d.common_like_prob));
    synth->add_option("--niche-users", o.synth.niche_users_per_topic, "Users per niche topic")
        ->default_str(std::to_string(d.niche_users_per_topic));
    synth->add_option("--images-per-topic", o.synth.images_per_topic, "Images per topic")
        ->default_str(std::to_string(d.images_per_topic));
    synth->add_option("--cluster-std", o.synth.cluster_std, "Per-coordinate spread around a topic center")
        ->default_str(shown(d.cluster_std));
    synth->add_option("--max-likes-per-topic", o.synth.max_likes_per_topic, "Most images a user likes per topic")
        ->default_str(std::to_string(d.max_likes_per_topic));
    f.seed = synth->add_option("--seed", o.pipeline.seed, "Random seed")->default_str("0");
  }

  auto* fit_cmd = app.add_subcommand("fit", "Partition, merge and score a collection");
  fit_cmd->add_option("--embeddings", o.embeddings, "CIEM embeddings")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--likes", o.likes, "Likes CSV (user_id,image_id)")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", o.out, "Partition model JSON to write")->required();
  Flags fit_flags;
  add_pipeline_flags(fit_cmd, o, fit_flags);
  add_threads(fit_cmd, o);

  auto* train = app.add_subcommand("train", "Fit the linear CI regressor on a partition model");
  train->add_option("--model", o.model, "Partition model JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--embeddings", o.embeddings, "CIEM embeddings")->required()->check(CLI::ExistingFile);
  train->add_option("--out", o.out, "Regressor JSON to write")->required();
  Flags train_flags;
  train_flags.ridge_lambda = train->add_option("--ridge-lambda", o.ridge_lambda, "Ridge penalty")
                                 ->default_str("1e-4 * trace(Xc^T Xc) / d");
  train_flags.seed = train->add_option("--seed", o.pipeline.seed, "Split seed")->default_str("model seed");
  train->add_option("--train-fraction", o.train_fraction, "Share of images used for fitting")->default_str("0.8");
  add_threads(train, o);

  auto* score = app.add_subcommand("score", "Score images with a regressor (input order)");
  auto* rank = app.add_subcommand("rank", "Score images with a regressor, highest first");
  for (auto* cmd : {score, rank}) {
    cmd->add_option("--regressor", o.regressor, "Regressor JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--embeddings", o.embeddings, "CIEM embeddings")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "CSV to write (default: stdout)");
    cmd->add_flag("--clamp", o.clamp, "Clip scores to [0,1]");
  }

  auto* group = app.add_subcommand("group", "Comm/Inter/Subj grouping of a partition model");
  group->add_option("--model", o.model, "Partition model JSON")->required()->check(CLI::ExistingFile);
  group->add_option("--out", o.out, "JSON to write (default: stdout)");

  auto* attrs = app.add_subcommand("attrs", "Attribute percentages per group");
  attrs->add_option("--model", o.model, "Partition model JSON")->required()->check(CLI::ExistingFile);
  attrs->add_option("--attributes", o.attributes, "Attributes CSV (image_id,attribute,value)")
      ->required()
      ->check(CLI::ExistingFile);
  attrs->add_option("--out", o.out, "CSV to write (default: stdout)");
  attrs->add_option("--json-out", o.json_out, "Also write the full table, with quartiles, as JSON");

  auto* assign_cmd = app.add_subcommand("assign", "Group shares of an external image set");
  assign_cmd->add_option("--model", o.model, "Partition model JSON")->required()->check(CLI::ExistingFile);
  assign_cmd->add_option("--embeddings", o.embeddings, "CIEM embeddings")->required()->check(CLI::ExistingFile);
  assign_cmd->add_option("--out", o.out, "JSON to write (default: stdout)");
  add_threads(assign_cmd, o);

  auto* report = app.add_subcommand("report", "Final partitions ordered by CI");
  report->add_option("--model", o.model, "Partition model JSON")->required()->check(CLI::ExistingFile);
  report->add_option("--out", o.out, "CSV to write (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail(e.what());
    return 2;
  }
  if (o.threads < 0) {
    fail("--threads must be >= 0");
    return 2;
  }

  try {
    if (*synth) run_synth(o);
    if (*fit_cmd) run_fit(o, fit_flags);
    if (*train) run_train(o, train_flags);
    if (*score) run_score(o, false);
    if (*rank) run_score(o, true);
    if (*group) run_group(o);
    if (*attrs) run_attrs(o);
    if (*assign_cmd) run_assign(o);
    if (*report) run_report(o);
  } catch (const UsageError& e) {
    fail(e.what());
    return 2;
  } catch (const Error& e) {
    fail(e.what(), e.code());
    return is_config_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    fail(e.what());
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
