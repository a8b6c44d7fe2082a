#include "scenepool/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "scenepool/aggregation.hpp"
#include "scenepool/evaluation.hpp"
#include "scenepool/io.hpp"
#include "scenepool/synth.hpp"

namespace scenepool {

namespace {

struct RecipeFlags {
  std::string manifest;
  std::string descriptors;
  std::string measures = "mean";
  std::size_t n_frames = 0;
  std::string sampling = "linear";
  std::uint64_t seed = 0;
  std::string normalize = "block";
  std::string vlad_model;
};

struct SvmFlags {
  std::string kernel = "linear";
  double c = 1.0;
  double tolerance = 1e-3;
};

void add_recipe_flags(CLI::App* cmd, RecipeFlags& f, bool allow_descriptors) {
  cmd->add_option("--manifest", f.manifest, "Dataset manifest (JSON)");
  if (allow_descriptors)
    cmd->add_option("--descriptors", f.descriptors, "Precomputed descriptor set from `aggregate`");
  cmd->add_option("--measures", f.measures, "Comma list of mean,sd,skew,kurt,max,vlad")
      ->capture_default_str();
  cmd->add_option("--n-frames", f.n_frames, "Frames per video (0 = all)")->capture_default_str();
  cmd->add_option("--sampling", f.sampling, "Frame sampling: linear|random")
      ->check(CLI::IsMember({"linear", "random"}))
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed for random sampling")->capture_default_str();
  cmd->add_option("--normalize", f.normalize, "Descriptor normalization: block|global|none")
      ->check(CLI::IsMember({"block", "global", "none"}))
      ->capture_default_str();
  cmd->add_option("--vlad-model", f.vlad_model, "VLAD model for the vlad measure");
}

void add_svm_flags(CLI::App* cmd, SvmFlags& f, bool allow_both) {
  auto* opt = cmd->add_option("--kernel", f.kernel,
                              allow_both ? "SVM kernel: linear|hik|both" : "SVM kernel: linear|hik");
  if (allow_both)
    opt->check(CLI::IsMember({"linear", "hik", "both"}));
  else
    opt->check(CLI::IsMember({"linear", "hik"}));
  opt->capture_default_str();
  cmd->add_option("--c", f.c, "SVM regularization constant")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--tolerance", f.tolerance, "SMO stopping tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

SvmParams to_params(const SvmFlags& f, KernelKind kind) {
  SvmParams p;
  p.kernel = kind;
  p.c = f.c;
  p.solver.tolerance = f.tolerance;
  return p;
}

std::vector<KernelKind> kernels_of(const SvmFlags& f) {
  if (f.kernel == "both") return {KernelKind::Linear, KernelKind::Hik};
  return {parse_kernel(f.kernel)};
}

/// Checks flag combinations that do not need any data.
std::vector<Measure> check_recipe_flags(const RecipeFlags& f) {
  auto measures = parse_measures(f.measures);
  if (needs_higher_moments(measures) && f.n_frames == 1)
    throw InvalidArgument("insufficient frames for higher moments");
  return measures;
}

void warn_hik(std::span<const Measure> measures, const std::vector<KernelKind>& kernels,
              std::ostream& err) {
  const bool hik = std::find(kernels.begin(), kernels.end(), KernelKind::Hik) != kernels.end();
  if (hik && needs_higher_moments(measures))
    err << "warning: the histogram intersection kernel is applied to skew/kurt blocks, which "
           "can be negative; prefer mean, sd and max with --kernel hik\n";
}

struct Inputs {
  DescriptorSet set;
  std::vector<Measure> measures;
  std::optional<VladModel> vlad;
};

Inputs load_inputs(const RecipeFlags& f) {
  Inputs in;
  in.measures = check_recipe_flags(f);
  if (!f.descriptors.empty()) {
    if (!f.manifest.empty()) throw InvalidArgument("give either --manifest or --descriptors, not both");
    in.set = load_descriptor_set(f.descriptors);
    in.measures.clear();
    for (const auto& b : in.set.blocks) in.measures.push_back(b.measure);
    return in;
  }
  if (f.manifest.empty()) throw InvalidArgument("--manifest is required");

  DescriptorRecipe recipe;
  recipe.measures = in.measures;
  recipe.n_frames = f.n_frames;
  recipe.sampling = f.sampling == "random" ? SamplingMode::Random : SamplingMode::Linear;
  recipe.seed = f.seed;
  recipe.normalization = parse_normalization(f.normalize);
  const bool wants_vlad =
      std::find(in.measures.begin(), in.measures.end(), Measure::Vlad) != in.measures.end();
  if (wants_vlad) {
    if (f.vlad_model.empty()) throw InvalidArgument("the vlad measure requires --vlad-model");
    in.vlad = load_vlad_model(f.vlad_model);
    recipe.vlad = &*in.vlad;
  }
  in.set = build_descriptor_set(load_videos(read_manifest(f.manifest)), recipe);
  return in;
}

void write_text(const std::string& path, const std::string& text) {
  write_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || item.empty() || v == 0)
      throw InvalidArgument("invalid frame count '" + item + "' in --n-list");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw InvalidArgument("--n-list is empty");
  return out;
}

void print_report(std::ostream& out, const EvaluationReport& r, const std::string& title) {
  out << "== " << title << " ==\n" << format_report_table(r);
  out << "overall accuracy: " << std::fixed << std::setprecision(2) << r.overall_accuracy
      << "%\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video scene classification by temporal pooling of per-frame features", "scenepool"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // synth
  SynthOptions synth_opts;
  std::string synth_kind = "variance";
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset (features + manifest)");
  synth->add_option("--kind", synth_kind, "variance|noisy-mean|vote-noise")
      ->check(CLI::IsMember({"variance", "noisy-mean", "vote-noise"}))
      ->capture_default_str();
  synth->add_option("--classes", synth_opts.classes)->capture_default_str();
  synth->add_option("--videos", synth_opts.videos_per_class, "Videos per class")->capture_default_str();
  synth->add_option("--frames", synth_opts.frames, "Frames per video")->capture_default_str();
  synth->add_option("--dim", synth_opts.dim, "Feature dimension")->capture_default_str();
  synth->add_option("--seed", synth_opts.seed)->capture_default_str();
  synth->add_option("--noise", synth_opts.noise, "Per-frame noise (negative = kind default)");
  synth->add_option("--noise-fraction", synth_opts.noise_fraction)->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // validate
  std::string validate_manifest_path;
  auto* validate = app.add_subcommand("validate", "Check a manifest and its feature files");
  validate->add_option("--manifest", validate_manifest_path)->required();

  // aggregate
  RecipeFlags agg_flags;
  std::string agg_out;
  auto* aggregate_cmd = app.add_subcommand("aggregate", "Pool per-frame features into descriptors");
  add_recipe_flags(aggregate_cmd, agg_flags, false);
  aggregate_cmd->add_option("--out", agg_out, "Descriptor set output file");

  // vlad
  auto* vlad = app.add_subcommand("vlad", "Learn or apply a VLAD encoder");
  vlad->require_subcommand(1);
  std::string vfit_manifest;
  std::string vfit_out;
  std::string vfit_norm = "power-l2";
  std::size_t vfit_frames = 0;
  VladOptions vlad_opts;
  auto* vlad_fit = vlad->add_subcommand("fit", "Fit PCA whitening and a K-Means++ codebook");
  vlad_fit->add_option("--manifest", vfit_manifest)->required();
  vlad_fit->add_option("--k", vlad_opts.k, "Codebook size")->capture_default_str();
  vlad_fit->add_option("--d-prime", vlad_opts.d_prime, "PCA output dimension")->capture_default_str();
  vlad_fit->add_option("--seed", vlad_opts.seed)->capture_default_str();
  vlad_fit->add_option("--n-frames", vfit_frames, "Linearly spaced frames per video (0 = all)")
      ->capture_default_str();
  vlad_fit->add_option("--normalization", vfit_norm, "power-l2|raw")
      ->check(CLI::IsMember({"power-l2", "raw"}))
      ->capture_default_str();
  vlad_fit->add_option("--out", vfit_out)->required();
  std::string venc_model;
  std::string venc_features;
  std::string venc_out;
  auto* vlad_encode_cmd = vlad->add_subcommand("encode", "Encode one feature file");
  vlad_encode_cmd->add_option("--model", venc_model)->required();
  vlad_encode_cmd->add_option("--features", venc_features)->required();
  vlad_encode_cmd->add_option("--out", venc_out)->required();

  // train
  RecipeFlags train_flags;
  SvmFlags train_svm;
  std::string train_out;
  auto* train = app.add_subcommand("train", "Train a one-vs-rest SVM on video descriptors");
  add_recipe_flags(train, train_flags, true);
  add_svm_flags(train, train_svm, false);
  train->add_option("--out", train_out)->required();

  // predict
  std::string pred_model;
  std::string pred_features;
  auto* predict_cmd = app.add_subcommand("predict", "Classify one feature file with a trained model");
  predict_cmd->add_option("--model", pred_model)->required();
  predict_cmd->add_option("--features", pred_features)->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-video-out evaluation");
  evaluate->require_subcommand(1);
  RecipeFlags lovo_flags;
  SvmFlags lovo_svm;
  std::string lovo_report;
  auto* lovo = evaluate->add_subcommand("lovo", "LOVO over pooled video descriptors");
  add_recipe_flags(lovo, lovo_flags, true);
  add_svm_flags(lovo, lovo_svm, true);
  lovo->add_option("--report", lovo_report, "Write the JSON report here");
  std::string vote_manifest;
  std::size_t vote_frames = 10;
  SvmFlags vote_svm;
  std::string vote_report;
  auto* vote = evaluate->add_subcommand("vote", "LOVO with per-frame majority voting");
  vote->add_option("--manifest", vote_manifest)->required();
  vote->add_option("--n-frames", vote_frames, "Linearly spaced frames voted per video")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_svm_flags(vote, vote_svm, true);
  vote->add_option("--report", vote_report, "Write the JSON report here");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Multi-trial experiments");
  experiment->require_subcommand(1);
  std::string exp_manifest;
  std::string exp_nlist = "1,2,3,5,10,15,20,30,40,50,60";
  std::size_t exp_trials = 18;
  std::uint64_t exp_seed = 0;
  SvmFlags exp_svm;
  std::string exp_out;
  std::string exp_report;
  auto* frames = experiment->add_subcommand("frames", "Accuracy against the number of pooled frames");
  frames->add_option("--manifest", exp_manifest)->required();
  frames->add_option("--n-list", exp_nlist, "Comma list of frame counts")->capture_default_str();
  frames->add_option("--trials", exp_trials)->check(CLI::PositiveNumber)->capture_default_str();
  frames->add_option("--seed", exp_seed, "Base seed; trial t uses seed + t")->capture_default_str();
  add_svm_flags(frames, exp_svm, false);
  frames->add_option("--out", exp_out, "Columnar output (n, mean, min, max, std)");
  frames->add_option("--report", exp_report, "Write per-trial JSON here");

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("scenepool");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (synth->parsed()) {
      synth_opts.kind = parse_synth_kind(synth_kind);
      const auto videos = synthesize(synth_opts);
      const auto m = write_dataset(videos, synth_out);
      out << "wrote " << m.videos.size() << " videos in " << m.label_space.size()
          << " classes to " << (std::filesystem::path(synth_out) / "manifest.json").string()
          << '\n';
    } else if (validate->parsed()) {
      const auto m = read_manifest(validate_manifest_path);
      const auto report = validate_manifest(m);
      if (!report.ok()) throw InvalidArgument(report.summary());
      out << "manifest ok: " << m.videos.size() << " videos, " << m.label_space.size()
          << " classes\n";
    } else if (aggregate_cmd->parsed()) {
      const Inputs in = load_inputs(agg_flags);
      out << "aggregated " << in.set.ids.size() << " videos into " << in.set.descriptors.cols()
          << "-dim descriptors (" << format_measures(in.measures) << ")\n";
      if (!agg_out.empty()) save_descriptor_set(agg_out, in.set);
    } else if (vlad_fit->parsed()) {
      vlad_opts.normalization =
          vfit_norm == "raw" ? VladNormalization::Raw : VladNormalization::PowerL2;
      auto videos = load_videos(read_manifest(vfit_manifest));
      if (vfit_frames > 0)
        for (auto& X : videos.features) {
          const auto total = static_cast<std::size_t>(X.frames());
          X = X.select_frames(linspace_indices(total, std::min(vfit_frames, total)).indices);
        }
      const VladModel model = fit_vlad(videos.features, vlad_opts);
      save_vlad_model(vfit_out, model);
      out << "VLAD model: k=" << model.codebook.k() << " d'=" << model.pca.d_prime()
          << " D=" << model.pca.dim() << " inertia=" << model.codebook.inertia << '\n';
    } else if (vlad_encode_cmd->parsed()) {
      const VladModel model = load_vlad_model(venc_model);
      const VladCode code = model.encode(read_feature_file(venc_features));
      Bundle b;
      b.put("format", std::string("vlad-code"));
      b.put("code", Matrix(code.values.transpose()));
      b.put_scalar("normalized", code.normalized ? 1.0 : 0.0);
      b.save(venc_out);
      out << "encoded " << code.values.size() << "-dim VLAD code\n";
    } else if (train->parsed()) {
      const Inputs in = load_inputs(train_flags);
      const auto kind = parse_kernel(train_svm.kernel);
      warn_hik(in.measures, {kind}, err);
      const OvrSvmModel model = train_ovr(in.set.descriptors, in.set.classes, in.set.labels,
                                          to_params(train_svm, kind));
      for (const auto& w : model.warnings()) err << "warning: " << w << '\n';
      std::map<std::string, std::string> meta{
          {"measures", format_measures(in.measures)},
          {"normalization", std::string(normalization_name(in.set.normalization))}};
      if (!train_flags.vlad_model.empty()) meta["vlad_model"] = train_flags.vlad_model;
      save_svm_model(train_out, model, meta);
      out << "trained " << model.models().size() << " one-vs-rest models on "
          << in.set.ids.size() << " videos\n";
    } else if (predict_cmd->parsed()) {
      std::map<std::string, std::string> meta;
      const OvrSvmModel model = load_svm_model(pred_model, &meta);
      DescriptorRecipe recipe;
      recipe.measures = parse_measures(meta.count("measures") ? meta["measures"] : "mean");
      recipe.normalization =
          parse_normalization(meta.count("normalization") ? meta["normalization"] : "block");
      std::optional<VladModel> vlad_model;
      if (meta.count("vlad_model")) {
        vlad_model = load_vlad_model(meta["vlad_model"]);
        recipe.vlad = &*vlad_model;
      }
      const auto d = build_descriptor(read_feature_file(pred_features), recipe, 0);
      const Prediction p = model.predict(d.values());
      out << "predicted: " << model.labels().name(p.label) << '\n';
      for (std::size_t c = 0; c < p.decision_values.size(); ++c)
        out << "  " << model.labels().name(static_cast<int>(c)) << '\t' << p.decision_values[c]
            << '\n';
    } else if (lovo->parsed()) {
      const Inputs in = load_inputs(lovo_flags);
      const auto kernels = kernels_of(lovo_svm);
      warn_hik(in.measures, kernels, err);
      nlohmann::json reports = nlohmann::json::object();
      for (KernelKind kind : kernels) {
        EvaluationReport r =
            lovo_evaluate(in.set.labels, in.set.classes, in.set.descriptors, to_params(lovo_svm, kind));
        r.config["measures"] = format_measures(in.measures);
        r.config["normalization"] = normalization_name(in.set.normalization);
        if (lovo_flags.n_frames > 0) {
          r.config["n_frames"] = lovo_flags.n_frames;
          r.config["sampling"] = lovo_flags.sampling;
          r.config["seed"] = lovo_flags.seed;
        }
        for (const auto& w : r.warnings) err << "warning: " << w << '\n';
        print_report(out, r, "LOVO, kernel " + std::string(kernel_name(kind)));
        reports[std::string(kernel_name(kind))] = report_to_json(r);
      }
      if (!lovo_report.empty())
        write_text(lovo_report, (kernels.size() == 1 ? reports.begin().value() : reports).dump(2) + "\n");
    } else if (vote->parsed()) {
      const auto videos = load_videos(read_manifest(vote_manifest));
      nlohmann::json reports = nlohmann::json::object();
      const auto kernels = kernels_of(vote_svm);
      for (KernelKind kind : kernels) {
        const auto r = lovo_majority_vote(videos, vote_frames, to_params(vote_svm, kind));
        for (const auto& w : r.warnings) err << "warning: " << w << '\n';
        print_report(out, r, "LOVO majority vote, kernel " + std::string(kernel_name(kind)));
        reports[std::string(kernel_name(kind))] = report_to_json(r);
      }
      if (!vote_report.empty())
        write_text(vote_report, (kernels.size() == 1 ? reports.begin().value() : reports).dump(2) + "\n");
    } else if (frames->parsed()) {
      const auto n_list = parse_size_list(exp_nlist);
      const auto videos = load_videos(read_manifest(exp_manifest));
      const auto curve = frames_vs_accuracy(videos, n_list, exp_trials, exp_seed,
                                            to_params(exp_svm, parse_kernel(exp_svm.kernel)));
      const std::string tsv = format_curve_tsv(curve);
      out << tsv;
      if (!exp_out.empty()) write_text(exp_out, tsv);
      if (!exp_report.empty()) write_text(exp_report, curve_to_json(curve).dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace scenepool
