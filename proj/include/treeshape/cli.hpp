#pragma once

// Batch command-line front end. `run_cli` is the whole program; the
// executable in tools/ only forwards argv to it.
//
// Exit codes: 0 success, 1 computation or I/O error, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "treeshape/clustering.hpp"
#include "treeshape/error.hpp"
#include "treeshape/metric.hpp"
#include "treeshape/parallel.hpp"
#include "treeshape/render.hpp"
#include "treeshape/statistics.hpp"
#include "treeshape/tree_io.hpp"

namespace treeshape::cli {

namespace fs = std::filesystem;

/// Raised for bad flag values detected after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct CommonFlags {
  double lambda_m = 0.02;
  double lambda_s = 1.0;
  double lambda_p = 1.0;
  bool normalize = false;
  int n_main = 100;
  int n_lat = 50;
  int threads = 0;
  int reg_iter = 10;
  bool remap_attachments = false;

  Weights weights() const {
    Weights w{lambda_m, lambda_s, lambda_p};
    try {
      w.validate();
    } catch (const ValidationError& e) {
      throw UsageError(e.what());
    }
    return w;
  }
  MetricOptions metric() const {
    if (n_main < 3 || n_lat < 3) throw UsageError("--n-main and --n-lat must be at least 3");
    MetricOptions o;
    o.sampling = {n_main, n_lat};
    o.registration.max_iter = reg_iter;
    o.registration.remap_attachments = remap_attachments;
    return o;
  }
  int thread_count() const { return threads > 0 ? threads : default_thread_count(); }
  RootTree prepare(const RootTree& t) const { return normalize ? normalize_scale(t) : t; }
  std::vector<RootTree> prepare(std::vector<RootTree> ts) const {
    for (auto& t : ts) t = prepare(t);
    return ts;
  }
};

inline void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--lambda-m", f.lambda_m, "Weight of the main-branch shape term")->capture_default_str();
  app->add_option("--lambda-s", f.lambda_s, "Weight of the lateral shape term")->capture_default_str();
  app->add_option("--lambda-p", f.lambda_p, "Weight of the attachment-position term")->capture_default_str();
  app->add_flag("--normalize", f.normalize, "Scale every root to unit main length first");
  app->add_option("--n-main", f.n_main, "Samples on the main branch")->capture_default_str();
  app->add_option("--n-lat", f.n_lat, "Samples on each lateral")->capture_default_str();
  app->add_option("--threads", f.threads, "Worker threads (default: TREESHAPE_THREADS or all cores)");
  app->add_option("--reg-iter", f.reg_iter, "Registration sweeps per pair")->capture_default_str();
  app->add_flag("--remap-attachments", f.remap_attachments, "Move attachment positions with the main reparameterization");
}

namespace detail {

inline std::string extension(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

inline void require_ext(const std::string& path, std::initializer_list<const char*> allowed) {
  const auto ext = extension(path);
  for (const char* a : allowed)
    if (ext == a) return;
  std::string list;
  for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  throw UsageError("unsupported output extension '" + ext + "' for " + path + " (expected " + list + ")");
}

inline void write(const std::string& path, const std::string& text) { treeshape::detail::write_text_file(path, text); }
inline void write_json(const std::string& path, const nlohmann::json& j) { write(path, j.dump(2) + "\n"); }

inline std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad number in ") + what + ": '" + cell + "'");
    }
  }
  return out;
}

inline std::pair<double, double> parse_range(const std::string& text, const char* what) {
  const auto v = parse_list(text, what);
  if (v.size() != 2 || !(v[0] <= v[1])) throw UsageError(std::string(what) + " must be 'lo,hi' with lo <= hi");
  return {v[0], v[1]};
}

inline nlohmann::json trees_to_json(const std::vector<RootTree>& trees) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trees) arr.push_back(root_to_json(t));
  return arr;
}

inline void emit_trees(const std::string& out, const std::vector<RootTree>& trees,
                       const std::vector<std::vector<std::size_t>>& labels = {}) {
  require_ext(out, {".json", ".svg"});
  if (extension(out) == ".svg")
    write(out, render_panels(trees, labels));
  else if (trees.size() == 1)
    write_json(out, root_to_json(trees.front()));
  else
    write_json(out, trees_to_json(trees));
}

inline KarcherOptions karcher_options(const CommonFlags& f, int max_iter, double tol) {
  KarcherOptions o;
  o.metric = f.metric();
  o.max_iter = max_iter;
  o.tol = tol;
  o.threads = f.thread_count();
  return o;
}

inline Atlas load_atlas(const std::string& path) {
  return atlas_from_json(treeshape::detail::read_json_file(path));
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Elastic shape analysis of two-layer root trees", "treeshape"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "treeshape 1.0");

  CommonFlags f;
  std::string a_path, b_path, in_path, out_path;
  int steps = 5, max_iter = 50, mode = 1, count = 1, k = 2;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  std::string alpha_range = "-2,2", coeff_range = "-1,1", params, linkage_name = "single";

  auto* geo = app.add_subcommand("geodesic", "Geodesic between two roots");
  geo->add_option("a", a_path, "Source root")->required()->check(CLI::ExistingFile);
  geo->add_option("b", b_path, "Target root")->required()->check(CLI::ExistingFile);
  geo->add_option("--steps", steps, "Trees along the path, endpoints included")->capture_default_str();
  geo->add_option("--out", out_path, "Output (.svg or .json)");
  add_common(geo, f);

  auto* dist = app.add_subcommand("distance", "Registered distance between two roots");
  dist->add_option("a", a_path)->required()->check(CLI::ExistingFile);
  dist->add_option("b", b_path)->required()->check(CLI::ExistingFile);
  dist->add_option("--out", out_path, "Optional JSON report");
  add_common(dist, f);

  auto* mat = app.add_subcommand("matrix", "Pairwise distance matrix of a collection");
  mat->add_option("collection", in_path, "Directory of roots or JSON array")->required()->check(CLI::ExistingPath);
  mat->add_option("--out", out_path, "Output (.csv or .json)")->required();
  add_common(mat, f);

  auto* mean = app.add_subcommand("mean", "Karcher mean of a collection");
  mean->add_option("collection", in_path)->required()->check(CLI::ExistingPath);
  mean->add_option("--max-iter", max_iter)->capture_default_str();
  mean->add_option("--tol", tol)->capture_default_str();
  mean->add_option("--out", out_path, "Output (.json root or .svg)")->required();
  add_common(mean, f);

  auto* atl = app.add_subcommand("atlas", "Mean, modes of variation and coefficients");
  atl->add_option("collection", in_path)->required()->check(CLI::ExistingPath);
  atl->add_option("--max-iter", max_iter)->capture_default_str();
  atl->add_option("--tol", tol)->capture_default_str();
  atl->add_option("--out", out_path, "Atlas JSON")->required();
  add_common(atl, f);

  auto* modes = app.add_subcommand("modes", "Trees along one mode of variation");
  modes->add_option("atlas", in_path)->required()->check(CLI::ExistingFile);
  modes->add_option("--mode", mode, "Mode index, 1-based")->capture_default_str();
  modes->add_option("--alpha-range", alpha_range, "lo,hi in standard deviations")->capture_default_str();
  modes->add_option("--steps", steps)->capture_default_str();
  modes->add_option("--out", out_path, "Output (.svg or .json)")->required();

  auto* samp = app.add_subcommand("sample", "Random roots from the atlas Gaussian");
  samp->add_option("atlas", in_path)->required()->check(CLI::ExistingFile);
  samp->add_option("--n", count)->capture_default_str();
  samp->add_option("--seed", seed)->capture_default_str();
  samp->add_option("--range", coeff_range, "Coefficient range lo,hi")->capture_default_str();
  samp->add_option("--out", out_path, "Output (.json or .svg)");

  auto* rfit = app.add_subcommand("regress-fit", "Fit parameter-to-shape regression");
  rfit->add_option("collection", in_path)->required()->check(CLI::ExistingPath);
  rfit->add_option("--max-iter", max_iter)->capture_default_str();
  rfit->add_option("--tol", tol)->capture_default_str();
  rfit->add_option("--out", out_path, "Model JSON")->required();
  add_common(rfit, f);

  auto* rpred = app.add_subcommand("regress-predict", "Synthesize a root from parameters");
  rpred->add_option("model", in_path)->required()->check(CLI::ExistingFile);
  rpred->add_option("--params", params, "Comma-separated parameter values")->required();
  rpred->add_option("--out", out_path, "Output (.json or .svg)");

  auto* clu = app.add_subcommand("cluster", "Hierarchical clustering");
  clu->add_option("input", in_path, "Distance matrix (.csv/.json) or root collection")->required()->check(CLI::ExistingPath);
  clu->add_option("--linkage", linkage_name)->capture_default_str()->check(CLI::IsMember({"single", "complete", "average"}));
  clu->add_option("--k", k, "Number of clusters")->capture_default_str();
  clu->add_option("--out", out_path, "Output (.json or .svg)");
  add_common(clu, f);

  auto* ren = app.add_subcommand("render", "Draw one root as SVG");
  ren->add_option("root", in_path)->required()->check(CLI::ExistingFile);
  ren->add_option("--out", out_path, "SVG output")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << "treeshape 1.0\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "treeshape: " << e.what() << "\n";
    return 2;
  }

  using namespace detail;
  try {
    if (*geo) {
      if (steps < 2) throw UsageError("--steps must be at least 2");
      const auto a = f.prepare(load_root(a_path));
      const auto b = f.prepare(load_root(b_path));
      const auto g = geodesic(a, b, f.weights(), steps, f.metric());
      std::vector<std::vector<std::size_t>> labels;
      const auto trees = g.trees(&labels);
      if (!out_path.empty()) {
        require_ext(out_path, {".svg", ".json"});
        if (extension(out_path) == ".svg") {
          write(out_path, render_panels(trees, labels));
        } else {
          write_json(out_path, {{"distance", g.alignment.distance},
                                {"squared", g.alignment.squared},
                                {"r", g.r_values},
                                {"registration", registration_to_json(g.alignment.registration)},
                                {"trees", trees_to_json(trees)}});
        }
      }
      out << "geodesic: " << steps << " steps, distance " << number(g.alignment.distance) << "\n";
    } else if (*dist) {
      const auto al = align_pair(f.prepare(load_root(a_path)), f.prepare(load_root(b_path)), f.weights(), f.metric());
      if (!out_path.empty()) {
        require_ext(out_path, {".json"});
        write_json(out_path, {{"distance", al.distance},
                              {"squared", al.squared},
                              {"registration", registration_to_json(al.registration)}});
      }
      out << number(al.distance) << "\n";
    } else if (*mat) {
      require_ext(out_path, {".csv", ".json"});
      const auto trees = f.prepare(load_collection(in_path));
      const auto d = pairwise_matrix(trees, f.weights(), f.metric(), f.thread_count());
      if (extension(out_path) == ".csv")
        write(out_path, matrix_to_csv(d));
      else
        write_json(out_path, matrix_to_json(d));
      out << "matrix: " << d.size() << " roots, " << d.size() * (d.size() - 1) / 2 << " pairs\n";
      for (const auto& e : d.errors) err << "pair " << e << "\n";
      if (!d.errors.empty()) return 1;
    } else if (*mean) {
      require_ext(out_path, {".json", ".svg"});
      const auto trees = f.prepare(load_collection(in_path));
      const auto km = karcher_mean(trees, f.weights(), karcher_options(f, max_iter, tol));
      std::vector<std::size_t> src;
      auto tree = srvft_to_tree(km.mean, &src);
      tree.id = "mean";
      emit_trees(out_path, {tree}, {src});
      out << "mean: " << trees.size() << " roots, " << km.iterations << " iterations, objective "
          << number(km.objective.back()) << (km.converged ? "" : " (not converged)") << "\n";
    } else if (*atl) {
      require_ext(out_path, {".json"});
      const auto trees = f.prepare(load_collection(in_path));
      const auto atlas = fit_atlas(trees, f.weights(), karcher_options(f, max_iter, tol));
      write_json(out_path, atlas_to_json(atlas));
      out << "atlas: " << trees.size() << " roots, " << atlas.mode_count() << " modes, " << atlas.retained
          << " retained\n";
    } else if (*modes) {
      if (steps < 1) throw UsageError("--steps must be positive");
      const auto [lo, hi] = parse_range(alpha_range, "--alpha-range");
      const auto atlas = load_atlas(in_path);
      std::vector<RootTree> trees;
      for (int i = 0; i < steps; ++i) {
        const double alpha = steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
        auto t = mode_path(atlas, mode - 1, alpha);
        t.id = "mode" + std::to_string(mode) + "_alpha" + number(alpha);
        trees.push_back(std::move(t));
      }
      emit_trees(out_path, trees);
      out << "modes: mode " << mode << ", " << steps << " trees\n";
    } else if (*samp) {
      if (count < 1) throw UsageError("--n must be positive");
      const auto [lo, hi] = parse_range(coeff_range, "--range");
      const auto atlas = load_atlas(in_path);
      std::vector<RootTree> trees;
      nlohmann::json arr = nlohmann::json::array();
      for (int i = 0; i < count; ++i) {
        auto s = sample_random(atlas, seed + static_cast<std::uint64_t>(i), lo, hi);
        s.tree.id = "sample" + std::to_string(i);
        auto j = root_to_json(s.tree);
        j["coefficients"] = std::vector<double>(s.coeffs.data(), s.coeffs.data() + s.coeffs.size());
        arr.push_back(std::move(j));
        trees.push_back(std::move(s.tree));
      }
      if (!out_path.empty()) {
        require_ext(out_path, {".json", ".svg"});
        if (extension(out_path) == ".svg")
          write(out_path, render_panels(trees));
        else
          write_json(out_path, arr);
      } else {
        out << arr.dump(2) << "\n";
      }
      out << "sample: " << count << " roots, seed " << seed << "\n";
    } else if (*rfit) {
      require_ext(out_path, {".json"});
      const auto raw = load_collection(in_path);
      const auto trees = f.prepare(raw);
      const auto atlas = fit_atlas(trees, f.weights(), karcher_options(f, max_iter, tol));
      const auto model = fit_regression(atlas, bio_param_matrix(trees), bio_param_names());
      write_json(out_path, regression_to_json(model));
      out << "regress-fit: " << trees.size() << " roots, " << atlas.retained << " retained modes"
          << (model.rank_deficient ? ", parameter matrix is rank deficient" : "") << "\n";
      if (model.rank_deficient) err << "warning: parameter matrix is rank deficient; minimum-norm fit returned\n";
    } else if (*rpred) {
      const auto model = regression_from_json(treeshape::detail::read_json_file(in_path));
      const auto p = parse_list(params, "--params");
      if (p.size() != model.param_names.size())
        throw UsageError("--params needs " + std::to_string(model.param_names.size()) + " values");
      auto tree = predict(model, Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
      tree.id = "predicted";
      if (!out_path.empty()) emit_trees(out_path, {tree});
      const auto bp = extract_bio_params(tree);
      out << "regress-predict: main length " << number(bp.main_length) << ", " << tree.real_lateral_count()
          << " laterals\n";
    } else if (*clu) {
      const auto method = parse_linkage(linkage_name);
      DistanceMatrix d;
      const auto ext = extension(in_path);
      if (!fs::is_directory(in_path) && (ext == ".csv" || (ext == ".json" && treeshape::detail::read_json_file(in_path).is_object() &&
                                                          treeshape::detail::read_json_file(in_path).contains("values"))))
        d = load_matrix(in_path);
      else
        d = pairwise_matrix(f.prepare(load_collection(in_path)), f.weights(), f.metric(), f.thread_count());
      if (k < 1 || static_cast<std::size_t>(k) > d.size()) throw UsageError("--k must be between 1 and the number of roots");
      const auto dend = linkage(d, method);
      const auto labels = cut(dend, static_cast<std::size_t>(k));
      if (!out_path.empty()) {
        require_ext(out_path, {".json", ".svg"});
        if (extension(out_path) == ".svg") {
          write(out_path, render_dendrogram(dend));
        } else {
          auto j = dendrogram_to_json(dend);
          j["k"] = k;
          j["labels"] = labels;
          write_json(out_path, j);
        }
      }
      for (std::size_t i = 0; i < labels.size(); ++i) out << d.labels[i] << "\t" << labels[i] << "\n";
    } else if (*ren) {
      require_ext(out_path, {".svg"});
      write(out_path, render_tree(load_root(in_path)));
      out << "render: wrote " << out_path << "\n";
    }
  } catch (const UsageError& e) {
    err << "treeshape: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "treeshape: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

inline int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace treeshape::cli
