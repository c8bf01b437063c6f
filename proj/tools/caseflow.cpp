// caseflow: generate synthetic caseload data, train assignment models, check
// replicate consistency and test discretionary assignments.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "caseflow/caseflow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace caseflow;

namespace {

constexpr const char* kVersion = "1.0.0";

enum Exit { kOk = 0, kConfigError = 2, kDataError = 3, kInternalError = 4 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_config(const std::string& path) {
  if (path.empty()) throw ConfigError("--config is required");
  if (!fs::is_regular_file(path)) throw ConfigError("config file '" + path + "' not found");
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

/// Collects every emitted file so the manifest can list it.
class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec || !fs::is_directory(root_)) throw ConfigError("cannot create output directory '" + root_.string() + "'");
  }

  void write(const std::string& rel, const std::string& content) {
    const auto path = root_ / rel;
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw ConfigError("write failed for '" + path.string() + "'");
    files_[rel] = {sha256_hex(content), content.size()};
  }

  template <class F>
  void write_with(const std::string& rel, F&& fill) {
    std::ostringstream os;
    fill(os);
    write(rel, os.str());
  }

  void write_json(const std::string& rel, const json& j) { write(rel, j.dump(2) + "\n"); }

  // Written last and not listed in itself.
  void manifest(json record) {
    json files = json::array();
    for (const auto& [rel, f] : files_) files.push_back({{"path", rel}, {"sha256", f.first}, {"bytes", f.second}});
    record["files"] = files;
    const auto path = root_ / "manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << record.dump(2) << "\n";
  }

 private:
  fs::path root_;
  std::map<std::string, std::pair<std::string, std::size_t>> files_;
};

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::size_t threads = 1;
};

json manifest_header(const std::string& command, const CommonOptions& o, std::uint64_t seed) {
  return {{"tool", "caseflow"},
          {"version", kVersion},
          {"command", command},
          {"config", o.config},
          {"config_sha256", sha256_hex(read_file(o.config))},
          {"seed", seed}};
}

Schema schema_for(const std::string& path) { return path.empty() ? default_schema() : load_schema(path); }

// ---------------------------------------------------------------------------
// gen

int cmd_gen(const CommonOptions& o) {
  const auto j = parse_config(o.config);
  const auto schema = schema_for(j.is_object() ? j.value("schema", std::string{}) : std::string{});
  auto cfg = generator_config_from_json(j, schema);
  if (o.seed) cfg.seed = *o.seed;
  const auto data = generate(cfg, schema);

  OutputDir out(o.out);
  out.write_with("households.csv", [&](std::ostream& s) { write_records(s, schema, data.records); });
  out.write_with("ground_truth.csv", [&](std::ostream& s) { write_ground_truth_csv(s, data.truth); });

  std::array<std::size_t, kNumInterventions> counts{};
  std::size_t flipped = 0;
  for (const auto& r : data.records) ++counts[index_of(r.actual)];
  for (const auto& t : data.truth) flipped += t.flipped;
  json labels = json::object(), expected = json::object(), icpt = json::object();
  for (auto t : kReportOrder) {
    labels[std::string(to_string(t))] = counts[index_of(t)];
    expected[std::string(to_string(t))] = data.expected_shares[index_of(t)];
    icpt[std::string(to_string(t))] = data.intercepts[index_of(t)];
  }
  out.write_json("generator_summary.json", {{"n", cfg.n},
                                            {"seed", cfg.seed},
                                            {"label_counts", labels},
                                            {"expected_shares", expected},
                                            {"intercepts", icpt},
                                            {"flip_probability", data.flip_probability},
                                            {"flipped", flipped}});
  out.manifest(manifest_header("gen", o, cfg.seed));
  std::cerr << "generated " << cfg.n << " households (" << flipped << " discretionary flips) in " << o.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// Shared run setup

struct RunContext {
  RunConfig cfg;
  Prepared prep;
  LoadStats stats;
};

RunContext load_run(const CommonOptions& o) {
  const auto j = parse_config(o.config);
  RunContext c;
  c.cfg = run_config_from_json(j);
  if (o.seed) c.cfg.seed = *o.seed;
  c.cfg.threads = o.threads;
  auto schema = schema_for(c.cfg.schema);
  auto records = load_csv(c.cfg.data, schema, &c.stats);
  c.prep = prepare(std::move(records), std::move(schema), c.cfg);
  return c;
}

json run_manifest(const std::string& command, const CommonOptions& o, const RunContext& c) {
  auto m = manifest_header(command, o, c.cfg.seed);
  m["data"] = c.cfg.data;
  m["data_sha256"] = sha256_hex(read_file(c.cfg.data));
  m["rows"] = c.prep.records.size();
  m["excluded_psh"] = c.stats.excluded_psh;
  return m;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const CommonOptions& o) {
  auto c = load_run(o);
  std::optional<TruthProbs> truth;
  if (!c.cfg.ground_truth.empty()) truth = load_truth_probs(c.cfg.ground_truth);
  const auto res = train_all(c.prep, c.cfg, truth ? &*truth : nullptr);

  OutputDir out(o.out);
  const auto& cols = c.prep.split.train.columns;
  std::array<std::vector<svg::RocSeries>, 3> roc;
  for (const auto& r : res.interventions) {
    const std::string name(to_string(r.target));
    const auto& st = r.short_trees;
    for (std::size_t k = 0; k < st.trees.size(); ++k) {
      if (st.trees[k].depth() > c.cfg.short_tree.max_depth)
        throw std::logic_error("short tree exceeds the depth cap");
      out.write_json("models/short_" + name + "_r" + std::to_string(k + 1) + ".json", to_json(st.trees[k]));
    }
    out.write_json("models/cart_" + name + ".json", to_json(r.cart));
    out.write_json("models/boosted_" + name + ".json", to_json(r.boosted));
    const auto rules = extract_rules(st.best_tree(), cols, c.prep.schema, c.cfg.min_support, name);
    out.write_with("rules/short_" + name + ".txt", [&](std::ostream& s) { write_rules_text(s, rules); });
    out.write_with("rules/short_" + name + ".csv", [&](std::ostream& s) { write_rules_csv(s, rules); });
    for (std::size_t f = 0; f < 3; ++f) {
      out.write_with("roc/" + r.rows[f].model + "_" + name + ".csv",
                     [&](std::ostream& s) { write_roc_csv(s, r.rows[f].roc); });
      roc[f].push_back({std::string(long_name(r.target)), r.rows[f].roc, r.rows[f].best.auc});
    }
  }
  const char* titles[] = {"Short decision trees (best replicate)", "CART", "Boosted trees"};
  for (std::size_t f = 0; f < 3; ++f)
    out.write_with("roc_" + res.interventions[0].rows[f].model + ".svg",
                   [&](std::ostream& s) { svg::roc_plot(s, roc[f], titles[f]); });
  out.write_with("auc_table.csv", [&](std::ostream& s) { write_auc_table_csv(s, res); });
  out.write_with("auc_table.txt", [&](std::ostream& s) { write_auc_table_text(s, res); });
  out.write_json("train_summary.json", summary_json(res, c.prep));
  out.write_json("run_config.json", to_json(c.cfg));
  out.manifest(run_manifest("train", o, c));
  write_auc_table_text(std::cout, res);
  return kOk;
}

// ---------------------------------------------------------------------------
// consistency

int cmd_consistency(const CommonOptions& o) {
  auto c = load_run(o);
  if (c.cfg.replicates == 1)
    std::cerr << "warning: only 1 replicate; the consistency matrix is trivially [[1]]\n";
  const auto shorts = fit_all_short(c.prep, c.cfg);
  const auto cons = consistency(shorts);
  OutputDir out(o.out);
  json summary = json::array();
  for (std::size_t t = 0; t < kNumInterventions; ++t) {
    const std::string name(to_string(kReportOrder[t]));
    out.write_with("spearman_" + name + ".csv", [&](std::ostream& s) { write_matrix_csv(s, cons.matrices[t]); });
    summary.push_back({{"intervention", name},
                       {"replicates", c.cfg.replicates},
                       {"mean_off_diagonal_rho", cons.mean_rho[t]},
                       {"test_auc", shorts[t].test_auc}});
    std::printf("%s\tmean pairwise Spearman rho %.4f over %zu replicates\n", name.c_str(), cons.mean_rho[t],
                c.cfg.replicates);
  }
  out.write_json("consistency.json", {{"interventions", summary}, {"n_test", c.prep.split.test.n_rows()}});
  out.manifest(run_manifest("consistency", o, c));
  return kOk;
}

// ---------------------------------------------------------------------------
// discretion

int cmd_discretion(const CommonOptions& o, std::optional<bool> full_data) {
  auto c = load_run(o);
  if (full_data) c.cfg.discretion_full_data = *full_data;
  const auto scorer = c.cfg.rules.empty() ? VulnerabilityScorer(c.prep.schema)
                                          : VulnerabilityScorer(c.prep.schema, load_rules(c.cfg.rules));
  const auto shorts = fit_all_short(c.prep, c.cfg);
  const auto rep = run_discretion(c.prep, shorts, scorer, c.cfg);

  OutputDir out(o.out);
  auto j = to_json(rep);
  j["population"] = c.cfg.discretion_full_data ? "full" : "test";
  out.write_json("discretion.json", j);
  out.write_with("discretion.txt", [&](std::ostream& s) { write_text_report(s, rep); });
  for (const auto& t : rep.tests) {
    if (!t.result) continue;
    const std::string title = t.subgroup + " " + t.measure + ": null distribution of group means (predicted " +
                              std::string(to_string(t.population)) + ")";
    out.write_with("null_" + t.subgroup + "_" + t.measure + ".svg",
                   [&](std::ostream& s) { svg::null_histogram(s, *t.result, title); });
  }
  out.manifest(run_manifest("discretion", o, c));
  write_text_report(std::cout, rep);
  return kOk;
}

int exit_code_for(ErrorKind k) {
  if (k == ErrorKind::InvalidConfig || k == ErrorKind::InvalidArgument) return kConfigError;
  if (is_data_error(k)) return kDataError;
  return kInternalError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"caseflow: caseworker assignment modelling and discretion analysis"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonOptions opt;
  std::optional<bool> full_data;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON config file")->required();
    sub->add_option("--seed", opt.seed, "Override the config seed");
    sub->add_option("--out", opt.out, "Output directory")->capture_default_str();
    sub->add_option("--threads", opt.threads, "Worker thread cap")->check(CLI::PositiveNumber)->capture_default_str();
  };
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset and its ground truth");
  auto* train = app.add_subcommand("train", "Fit short trees, CART and boosted models; report AUCs");
  auto* cons = app.add_subcommand("consistency", "Spearman agreement across short-tree seed replicates");
  auto* disc = app.add_subcommand("discretion", "Resampling tests on discretionary assignments");
  for (auto* s : {gen, train, cons, disc}) add_common(s);
  auto* fd = disc->add_flag_callback("--full-data", [&] { full_data = true; }, "Score every record (default)");
  auto* ts = disc->add_flag_callback("--test-split", [&] { full_data = false; }, "Score the test split only");
  fd->excludes(ts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*gen) return cmd_gen(opt);
    if (*train) return cmd_train(opt);
    if (*cons) return cmd_consistency(opt);
    if (*disc) return cmd_discretion(opt, full_data);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    std::cerr << (code == kConfigError ? "config error: " : code == kDataError ? "data error: " : "internal error: ")
              << e.what() << "\n";
    return code;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}
