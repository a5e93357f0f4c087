// rppcert command-line front end. Every stage reads and writes files so a
// pipeline can be resumed (or fed by external tools) at any boundary.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "rppcert.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPrecondition = 2;
constexpr int kExitValidatorFailed = 3;

struct Failure {
  int code;
  std::string message;
};

int exit_code_for(rppcert_status s) {
  switch (s) {
    case RPPCERT_OK:
      return kExitOk;
    case RPPCERT_E_INVALID_ARGUMENT:
    case RPPCERT_E_PARSE:
      return kExitUsage;
    default:
      return kExitPrecondition;
  }
}

void check(rppcert_status s) {
  if (s != RPPCERT_OK) throw Failure{exit_code_for(s), rppcert_last_error()};
}

// unique_ptr aliases with the C API's free functions.
template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Dataset = std::unique_ptr<rppcert_dataset, Deleter<rppcert_dataset, rppcert_dataset_free>>;
using Model = std::unique_ptr<rppcert_model, Deleter<rppcert_model, rppcert_model_free>>;
using Oracle = std::unique_ptr<rppcert_oracle, Deleter<rppcert_oracle, rppcert_oracle_free>>;
using Scores = std::unique_ptr<rppcert_scores, Deleter<rppcert_scores, rppcert_scores_free>>;
using Profile = std::unique_ptr<rppcert_profile, Deleter<rppcert_profile, rppcert_profile_free>>;
using Verdicts = std::unique_ptr<rppcert_verdicts, Deleter<rppcert_verdicts, rppcert_verdicts_free>>;
using Certificates =
    std::unique_ptr<rppcert_certificates, Deleter<rppcert_certificates, rppcert_certificates_free>>;
using Report = std::unique_ptr<rppcert_report, Deleter<rppcert_report, rppcert_report_free>>;

template <typename Handle, typename F>
Handle make(F&& f) {
  typename Handle::pointer raw = nullptr;
  check(f(&raw));
  return Handle(raw);
}

std::uint64_t default_seed() {
  const char* env = std::getenv("RPPCERT_SEED");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') throw Failure{kExitUsage, "RPPCERT_SEED is not an unsigned integer"};
  return v;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::FILE* f = std::fopen(tmp.string().c_str(), "wb");
    if (!f) throw Failure{kExitPrecondition, "cannot open " + tmp.string() + " for writing"};
    const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
    if (std::fclose(f) != 0 || !ok) throw Failure{kExitPrecondition, "short write to " + tmp.string()};
  }
  std::filesystem::rename(tmp, target);
}

int spv_code(const std::string& s) { return s == "hard" ? RPPCERT_SPV_HARD : RPPCERT_SPV_SOFT; }

// ---- shared option groups --------------------------------------------------

struct NoiseFlags {
  double sigma = 1.0;
  std::size_t draws = 3;
  bool clip = false;
  std::vector<double> clip_range = {0.0, 1.0};
  unsigned workers = 0;

  void add(CLI::App* app) {
    app->add_option("--sigma", sigma, "Gaussian noise standard deviation")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--noise-draws,-J", draws, "Noise draws per sample")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000000}))
        ->capture_default_str();
    app->add_flag("--clip-noise", clip, "Clip noisy inputs to --clip-range");
    app->add_option("--clip-range", clip_range, "Clip range lo hi")->expected(2)->capture_default_str();
    app->add_option("--workers", workers, "Scoring threads (0: hardware concurrency)");
  }

  rppcert_noise_options options(std::uint64_t seed) const {
    rppcert_noise_options o;
    rppcert_noise_options_init(&o);
    o.sigma = sigma;
    o.draws = draws;
    o.seed = seed;
    o.clip = clip ? 1 : 0;
    o.clip_lo = clip_range.at(0);
    o.clip_hi = clip_range.at(1);
    o.workers = workers ? workers : std::max(1u, std::thread::hardware_concurrency());
    return o;
  }
};

struct TriggerFlags {
  std::string kind = "chessboard";
  double target_l2 = 0.8;
  double blend_rate = 0.2;
  std::size_t patch_side = 3;
  std::size_t target_class = 0;

  void add(CLI::App* app) {
    app->add_option("--trigger", kind, "Trigger kind")
        ->check(CLI::IsMember({"chessboard", "blend"}))
        ->capture_default_str();
    app->add_option("--target-l2", target_l2, "Trigger L2 norm")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--blend-rate", blend_rate, "Blend rate")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app->add_option("--patch-side", patch_side, "Chessboard patch side")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--target-class", target_class, "Attack target class")->capture_default_str();
  }

  rppcert_trigger_options options() const {
    rppcert_trigger_options t;
    rppcert_trigger_options_init(&t);
    t.kind = kind == "blend" ? RPPCERT_TRIGGER_BLEND : RPPCERT_TRIGGER_CHESSBOARD;
    t.target_l2 = target_l2;
    t.blend_rate = blend_rate;
    t.patch_side = patch_side;
    t.target_class = target_class;
    return t;
  }
};

struct OracleFlags {
  std::string model;
  std::string oracle;
  std::string spv = "soft";

  void add(CLI::App* app) {
    auto* m = app->add_option("--model", model, "Trained model JSON");
    auto* o = app->add_option("--oracle", oracle, "Analytic oracle JSON");
    m->excludes(o);
    app->add_option("--spv", spv, "Probability vector mode")
        ->check(CLI::IsMember({"soft", "hard"}))
        ->capture_default_str();
  }

  Oracle load(std::string* model_checksum = nullptr) const {
    if (!model.empty()) {
      Model m = make<Model>([&](auto** out) { return rppcert_model_load(model.c_str(), out); });
      if (model_checksum) *model_checksum = rppcert_model_checksum(m.get());
      return make<Oracle>([&](auto** out) { return rppcert_oracle_from_model(m.get(), spv_code(spv), out); });
    }
    if (!oracle.empty()) {
      return make<Oracle>([&](auto** out) { return rppcert_oracle_analytic_load(oracle.c_str(), out); });
    }
    throw Failure{kExitUsage, "one of --model or --oracle is required"};
  }
};

struct ReportFlags {
  std::string out;
  std::string format = "json";

  void add(CLI::App* app) {
    app->add_option("--out,-o", out, "Report path (stdout when omitted)");
    app->add_option("--format", format, "Report format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
  }

  int code() const { return format == "csv" ? RPPCERT_FORMAT_CSV : RPPCERT_FORMAT_JSON; }
};

int emit_report(rppcert_report* report, const ReportFlags& flags) {
  if (flags.out.empty()) {
    std::fputs(rppcert_report_render(report, flags.code()), stdout);
  } else {
    check(rppcert_report_save(report, flags.out.c_str(), flags.code()));
    std::printf("%s: %s (observed %s, bound %s)\n", flags.out.c_str(),
                rppcert_report_passed(report) ? "PASS" : "FAIL", short_num(rppcert_report_observed(report)).c_str(),
                short_num(rppcert_report_bound(report)).c_str());
  }
  return rppcert_report_passed(report) ? kExitOk : kExitValidatorFailed;
}

// ---- synth -----------------------------------------------------------------

struct SynthCmd {
  std::string out_dir;
  std::size_t classes = 10, dim = 64, per_class = 300;
  double separation = 3.0, noise_std = 1.0;
  std::string imbalance = "none";
  double rho = 1.0, mu = 0.9;
  std::size_t n_max = 0;
  TriggerFlags trigger;
  std::optional<std::size_t> poison_count;
  std::optional<double> poison_rate;
  std::string sources = "minority";
  std::size_t calib_size = 100;
  std::string calib_mode = "balanced";
  double test_fraction = 0.2;

  void add(CLI::App* app) {
    app->add_option("--out-dir", out_dir, "Directory for train/calib/test CSVs")->required();
    app->add_option("--classes", classes, "Number of classes")->check(CLI::Range(2, 100000))->capture_default_str();
    app->add_option("--dim", dim, "Feature dimension")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--per-class", per_class, "Samples per class before imbalance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--separation", separation, "Distance between class means")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app->add_option("--noise-std", noise_std, "Within-class standard deviation")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--imbalance", imbalance, "Imbalance profile")
        ->check(CLI::IsMember({"none", "longtail", "step"}))
        ->capture_default_str();
    app->add_option("--rho", rho, "Imbalance ratio")->check(CLI::Range(1.0, 1e9))->capture_default_str();
    app->add_option("--mu", mu, "Minority fraction (step)")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app->add_option("--n-max", n_max, "Largest class size (0: available)")->capture_default_str();
    trigger.add(app);
    auto* c = app->add_option("--poison-count", poison_count, "Number of poisoned samples");
    auto* r = app->add_option("--poison-rate", poison_rate, "Poisoned fraction")->check(CLI::Range(0.0, 1.0));
    c->excludes(r);
    app->add_option("--sources", sources, "Poison source policy")
        ->check(CLI::IsMember({"minority", "any"}))
        ->capture_default_str();
    app->add_option("--calib-size", calib_size, "Calibration set size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--calib-mode", calib_mode, "Calibration class balance")
        ->check(CLI::IsMember({"balanced", "imbalanced"}))
        ->capture_default_str();
    app->add_option("--test-fraction", test_fraction, "Held-out clean fraction")
        ->check(CLI::Range(0.0, 0.99))
        ->capture_default_str();
  }

  int run(std::uint64_t seed) const {
    rppcert_blob_options b;
    rppcert_blob_options_init(&b);
    b.num_classes = classes;
    b.dim = dim;
    b.per_class = per_class;
    b.separation = separation;
    b.noise_std = noise_std;
    b.seed = seed;
    Dataset data = make<Dataset>([&](auto** out) { return rppcert_dataset_make_blobs(&b, out); });

    if (imbalance != "none") {
      rppcert_imbalance_options im;
      rppcert_imbalance_options_init(&im);
      im.kind = imbalance == "longtail" ? RPPCERT_IMBALANCE_LONGTAIL : RPPCERT_IMBALANCE_STEP;
      im.rho = rho;
      im.mu = mu;
      im.n_max = n_max;
      im.seed = seed + 1;
      data = make<Dataset>([&](auto** out) { return rppcert_dataset_subsample(data.get(), &im, out); });
    }

    if (poison_count || poison_rate) {
      rppcert_poison_options p;
      rppcert_poison_options_init(&p);
      p.trigger = trigger.options();
      p.mode = poison_rate ? RPPCERT_POISON_RATE : RPPCERT_POISON_COUNT;
      p.count = poison_count.value_or(0);
      p.rate = poison_rate.value_or(0.0);
      p.policy = sources == "any" ? RPPCERT_SOURCES_ANY : RPPCERT_SOURCES_MINORITY;
      p.seed = seed + 2;
      data = make<Dataset>([&](auto** out) { return rppcert_dataset_poison(data.get(), &p, out); });
    }

    rppcert_split_options s;
    rppcert_split_options_init(&s);
    s.calib_n = calib_size;
    s.test_fraction = test_fraction;
    s.calib_mode = calib_mode == "imbalanced" ? RPPCERT_CALIB_IMBALANCED : RPPCERT_CALIB_BALANCED;
    s.seed = seed + 3;
    rppcert_dataset *tr = nullptr, *ca = nullptr, *te = nullptr;
    check(rppcert_dataset_split(data.get(), &s, &tr, &ca, &te));
    Dataset train(tr), calib(ca), test(te);

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    for (auto& [name, d] : {std::pair{"train.csv", train.get()}, {"calib.csv", calib.get()}, {"test.csv", test.get()}}) {
      check(rppcert_dataset_save(d, (dir / name).string().c_str()));
    }
    for (std::size_t i = 0; i < rppcert_dataset_warning_count(data.get()); ++i) {
      std::fprintf(stderr, "warning: %s\n", rppcert_dataset_warning(data.get(), i));
    }
    std::printf("train=%zu (poisoned %zu) calib=%zu test=%zu -> %s\n", rppcert_dataset_size(train.get()),
                rppcert_dataset_poisoned_count(train.get()), rppcert_dataset_size(calib.get()),
                rppcert_dataset_size(test.get()), out_dir.c_str());
    return kExitOk;
  }
};

// ---- train -----------------------------------------------------------------

struct TrainCmd {
  std::string data, out;
  std::string arch = "softmax";
  std::size_t hidden = 32, epochs = 30, batch = 32;
  double lr = 0.1, weight_decay = 0.0;

  void add(CLI::App* app) {
    app->add_option("--data", data, "Training CSV")->required();
    app->add_option("--out,-o", out, "Model JSON")->required();
    app->add_option("--arch", arch, "Architecture")->check(CLI::IsMember({"softmax", "mlp"}))->capture_default_str();
    app->add_option("--hidden", hidden, "Hidden units (mlp)")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--epochs", epochs, "Epochs")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--batch-size", batch, "Mini-batch size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--lr", lr, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--weight-decay", weight_decay, "L2 penalty")->check(CLI::NonNegativeNumber)->capture_default_str();
  }

  int run(std::uint64_t seed) const {
    Dataset d = make<Dataset>([&](auto** o) { return rppcert_dataset_load(data.c_str(), o); });
    rppcert_train_options t;
    rppcert_train_options_init(&t);
    t.architecture = arch == "mlp" ? RPPCERT_ARCH_ONE_HIDDEN_LAYER : RPPCERT_ARCH_SOFTMAX_LINEAR;
    t.hidden = hidden;
    t.epochs = epochs;
    t.batch_size = batch;
    t.learning_rate = lr;
    t.weight_decay = weight_decay;
    t.seed = seed;
    Model m = make<Model>([&](auto** o) { return rppcert_model_train(d.get(), &t, o); });
    check(rppcert_model_save(m.get(), out.c_str()));
    std::printf("train accuracy %.4f -> %s\n", rppcert_model_train_accuracy(m.get()), out.c_str());
    return kExitOk;
  }
};

// ---- score -----------------------------------------------------------------

struct ScoreCmd {
  std::string data, table, out;
  std::size_t table_classes = 0;
  OracleFlags oracle;
  NoiseFlags noise;

  void add(CLI::App* app) {
    auto* d = app->add_option("--data", data, "Dataset CSV to score");
    auto* t = app->add_option("--table", table, "Probability table CSV (clean row, then noisy rows)");
    d->excludes(t);
    app->add_option("--classes", table_classes, "Classes in the probability table");
    app->add_option("--out,-o", out, "Score CSV")->required();
    oracle.add(app);
    noise.add(app);
  }

  int run(std::uint64_t seed) const {
    const auto opts = noise.options(seed);
    Scores s;
    if (!table.empty()) {
      if (table_classes == 0) throw Failure{kExitUsage, "--classes is required with --table"};
      s = make<Scores>([&](auto** o) { return rppcert_score_table(table.c_str(), table_classes, &opts, o); });
    } else {
      if (data.empty()) throw Failure{kExitUsage, "one of --data or --table is required"};
      Dataset d = make<Dataset>([&](auto** o) { return rppcert_dataset_load(data.c_str(), o); });
      Oracle orc = oracle.load();
      s = make<Scores>([&](auto** o) { return rppcert_score_dataset(orc.get(), d.get(), &opts, o); });
    }
    check(rppcert_scores_save(s.get(), out.c_str()));
    if (!table.empty()) {
      std::printf("scored %zu samples from table -> %s\n", rppcert_scores_size(s.get()), out.c_str());
      return kExitOk;
    }
    std::printf("scored %zu samples (sigma=%s, J=%zu) -> %s\n", rppcert_scores_size(s.get()),
                short_num(noise.sigma).c_str(), noise.draws, out.c_str());
    return kExitOk;
  }
};

// ---- calibrate -------------------------------------------------------------

Profile calibrate_scores(rppcert_scores* scores, std::optional<std::size_t> calib_size, double alpha) {
  Scores head;
  if (calib_size) {
    if (*calib_size > rppcert_scores_size(scores)) {
      throw Failure{kExitPrecondition, "--calib-size " + std::to_string(*calib_size) + " exceeds the " +
                                           std::to_string(rppcert_scores_size(scores)) + " available scores"};
    }
    head = make<Scores>([&](auto** o) { return rppcert_scores_head(scores, *calib_size, o); });
    scores = head.get();
  }
  return make<Profile>([&](auto** o) { return rppcert_calibrate(scores, alpha, o); });
}

struct CalibrateCmd {
  std::string scores, out, dataset, model;
  double alpha = 0.05;
  std::optional<std::size_t> calib_size;

  void add(CLI::App* app) {
    app->add_option("--scores", scores, "Calibration score CSV")->required();
    app->add_option("--out,-o", out, "Profile JSON")->required();
    app->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app->add_option("--calib-size,-n", calib_size, "Use the first n scores")->check(CLI::PositiveNumber);
    app->add_option("--dataset", dataset, "Calibration dataset (recorded as provenance)");
    app->add_option("--model", model, "Model (recorded as provenance)");
  }

  int run() const {
    Scores s = make<Scores>([&](auto** o) { return rppcert_scores_load(scores.c_str(), o); });
    Profile p = calibrate_scores(s.get(), calib_size, alpha);
    std::string dsum, msum;
    if (!dataset.empty()) {
      Dataset d = make<Dataset>([&](auto** o) { return rppcert_dataset_load(dataset.c_str(), o); });
      dsum = rppcert_dataset_checksum(d.get());
    }
    if (!model.empty()) {
      Model m = make<Model>([&](auto** o) { return rppcert_model_load(model.c_str(), o); });
      msum = rppcert_model_checksum(m.get());
    }
    check(rppcert_profile_set_provenance(p.get(), dsum.c_str(), msum.c_str()));
    check(rppcert_profile_save(p.get(), out.c_str()));
    rppcert_profile_info info;
    check(rppcert_profile_info_get(p.get(), &info));
    std::printf("n=%zu k=%zu q_hat=%s fpr_upper=%.4f -> %s\n", info.n, info.k, num(info.q_hat).c_str(),
                info.fpr_upper, out.c_str());
    return kExitOk;
  }
};

// ---- detect ----------------------------------------------------------------

struct DetectCmd {
  std::string scores, profile, out;
  bool force = false;
  // One-shot mode: score and calibrate in place.
  std::string data, calib;
  OracleFlags oracle;
  NoiseFlags noise;
  double alpha = 0.05;
  std::size_t calib_size = 100;

  void add(CLI::App* app) {
    app->add_option("--scores", scores, "Score CSV of the samples to inspect");
    app->add_option("--profile", profile, "Calibration profile JSON");
    app->add_option("--out,-o", out, "Verdict CSV")->required();
    app->add_flag("--force", force, "Ignore sigma/J provenance mismatches");
    app->add_option("--data", data, "Dataset to inspect (one-shot mode)");
    app->add_option("--calib", calib, "Clean calibration dataset (one-shot mode)");
    app->add_option("--alpha", alpha, "Significance level (one-shot mode)")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    app->add_option("--calib-size,-n", calib_size, "Calibration samples (one-shot mode)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    oracle.add(app);
    noise.add(app);
  }

  int run(std::uint64_t seed) const {
    Scores s;
    Profile p;
    if (!scores.empty() || !profile.empty()) {
      if (scores.empty() || profile.empty()) throw Failure{kExitUsage, "--scores and --profile go together"};
      s = make<Scores>([&](auto** o) { return rppcert_scores_load(scores.c_str(), o); });
      p = make<Profile>([&](auto** o) { return rppcert_profile_load(profile.c_str(), o); });
    } else {
      if (data.empty() || calib.empty()) {
        throw Failure{kExitUsage, "give --scores/--profile, or --data/--calib with --model or --oracle"};
      }
      const auto opts = noise.options(seed);
      Oracle orc = oracle.load();
      Dataset cd = make<Dataset>([&](auto** o) { return rppcert_dataset_load(calib.c_str(), o); });
      if (calib_size > rppcert_dataset_size(cd.get())) {
        throw Failure{kExitPrecondition, "calibration set has " + std::to_string(rppcert_dataset_size(cd.get())) +
                                             " samples, fewer than --calib-size " + std::to_string(calib_size)};
      }
      Dataset head = make<Dataset>([&](auto** o) { return rppcert_dataset_head(cd.get(), calib_size, o); });
      Scores cs = make<Scores>([&](auto** o) { return rppcert_score_dataset(orc.get(), head.get(), &opts, o); });
      p = make<Profile>([&](auto** o) { return rppcert_calibrate(cs.get(), alpha, o); });
      Dataset d = make<Dataset>([&](auto** o) { return rppcert_dataset_load(data.c_str(), o); });
      s = make<Scores>([&](auto** o) { return rppcert_score_dataset(orc.get(), d.get(), &opts, o); });
    }
    Verdicts v = make<Verdicts>([&](auto** o) { return rppcert_detect(s.get(), p.get(), force ? 1 : 0, o); });
    check(rppcert_verdicts_save(v.get(), out.c_str()));
    rppcert_profile_info info;
    check(rppcert_profile_info_get(p.get(), &info));
    std::printf("flagged %zu/%zu q_hat=%s fpr_upper=%.4f\n", rppcert_verdicts_flagged(v.get()),
                rppcert_verdicts_size(v.get()), num(info.q_hat).c_str(), info.fpr_upper);
    return kExitOk;
  }
};

// ---- certify ---------------------------------------------------------------

struct CertifyCmd {
  std::string data, profile, out;
  std::string subset = "poisoned";
  std::optional<double> delta_l2;
  std::optional<double> confidence;
  bool force = false;
  OracleFlags oracle;
  NoiseFlags noise;

  void add(CLI::App* app) {
    app->add_option("--data", data, "Dataset holding the inputs to certify")->required();
    app->add_option("--profile", profile, "Calibration profile JSON")->required();
    app->add_option("--out,-o", out, "Certificate JSONL")->required();
    app->add_option("--subset", subset, "Rows to certify")
        ->check(CLI::IsMember({"all", "poisoned", "clean"}))
        ->capture_default_str();
    app->add_option("--delta-l2", delta_l2, "Trigger norm (default: the dataset's poisoning record)")
        ->check(CLI::PositiveNumber);
    app->add_option("--confidence", confidence, "Binomial bound confidence (default 1 - alpha)")
        ->check(CLI::Range(0.0, 1.0));
    app->add_flag("--force", force, "Ignore sigma/J provenance mismatches");
    oracle.add(app);
    noise.add(app);
  }

  int run(std::uint64_t seed) const {
    Dataset full = make<Dataset>([&](auto** o) { return rppcert_dataset_load(data.c_str(), o); });
    const int which = subset == "all" ? RPPCERT_SUBSET_ALL
                      : subset == "clean" ? RPPCERT_SUBSET_CLEAN
                                          : RPPCERT_SUBSET_POISONED;
    Dataset d = make<Dataset>([&](auto** o) { return rppcert_dataset_subset(full.get(), which, o); });
    Profile p = make<Profile>([&](auto** o) { return rppcert_profile_load(profile.c_str(), o); });
    rppcert_profile_info info;
    check(rppcert_profile_info_get(p.get(), &info));
    double norm = delta_l2.value_or(0.0);
    if (!delta_l2) {
      rppcert_trigger_options t;
      if (rppcert_dataset_trigger(full.get(), &t) == RPPCERT_OK) norm = t.target_l2;
    }
    Oracle orc = oracle.load();
    const auto nopts = noise.options(seed);
    rppcert_certify_options c;
    rppcert_certify_options_init(&c);
    c.confidence = confidence.value_or(1.0 - info.alpha);
    c.spv_mode = spv_code(oracle.spv);
    c.force = force ? 1 : 0;
    Certificates certs = make<Certificates>(
        [&](auto** o) { return rppcert_certify_dataset(orc.get(), d.get(), p.get(), &nopts, &c, norm, o); });
    check(rppcert_certificates_save(certs.get(), out.c_str()));
    std::printf("certified %zu samples: guaranteed %zu, unguaranteed %zu, undefined %zu -> %s\n",
                rppcert_certificates_size(certs.get()),
                rppcert_certificates_count(certs.get(), RPPCERT_VERDICT_GUARANTEED),
                rppcert_certificates_count(certs.get(), RPPCERT_VERDICT_UNGUARANTEED),
                rppcert_certificates_count(certs.get(), RPPCERT_VERDICT_UNDEFINED), out.c_str());
    return kExitOk;
  }
};

// ---- eval ------------------------------------------------------------------

struct EvalCmd {
  std::string verdicts, data, model, test;
  ReportFlags report;

  void add(CLI::App* app) {
    app->add_option("--verdicts", verdicts, "Verdict CSV")->required();
    app->add_option("--data", data, "Dataset the verdicts refer to (ground truth)")->required();
    app->add_option("--model", model, "Model for attack metrics");
    app->add_option("--test", test, "Clean test CSV for attack metrics");
    report.add(app);
  }

  int run() const {
    Verdicts v = make<Verdicts>([&](auto** o) { return rppcert_verdicts_load(verdicts.c_str(), o); });
    Dataset d = make<Dataset>([&](auto** o) { return rppcert_dataset_load(data.c_str(), o); });
    rppcert_detection_report r;
    check(rppcert_eval_detection(v.get(), d.get(), &r));
    std::vector<std::pair<std::string, std::string>> rows = {
        {"tp", std::to_string(r.tp)}, {"fp", std::to_string(r.fp)}, {"tn", std::to_string(r.tn)},
        {"fn", std::to_string(r.fn)}, {"tpr", r.tpr_defined ? num(r.tpr) : "null"},
        {"fpr", r.fpr_defined ? num(r.fpr) : "null"}};
    if (!model.empty() || !test.empty()) {
      if (model.empty() || test.empty()) throw Failure{kExitUsage, "--model and --test go together"};
      rppcert_trigger_options t;
      check(rppcert_dataset_trigger(d.get(), &t));
      Model m = make<Model>([&](auto** o) { return rppcert_model_load(model.c_str(), o); });
      Dataset td = make<Dataset>([&](auto** o) { return rppcert_dataset_load(test.c_str(), o); });
      rppcert_attack_report a;
      check(rppcert_eval_attack(m.get(), td.get(), &t, &a));
      rows.emplace_back("asr", num(a.asr));
      rows.emplace_back("acc", num(a.acc));
    }
    std::string text;
    if (report.format == "csv") {
      text = "# rppcert detection-report schema_version=1.0\nkey,value\n";
      for (const auto& [k, val] : rows) text += k + "," + val + "\n";
    } else {
      text = "{\n  \"schema_version\": \"1.0\",\n  \"kind\": \"rppcert-detection-report\"";
      for (const auto& [k, val] : rows) text += ",\n  \"" + k + "\": " + val;
      text += "\n}\n";
    }
    if (report.out.empty()) {
      std::fputs(text.c_str(), stdout);
    } else {
      write_text(report.out, text);
      std::printf("TPR=%s FPR=%s -> %s\n", r.tpr_defined ? short_num(r.tpr).c_str() : "undefined",
                  r.fpr_defined ? short_num(r.fpr).c_str() : "undefined", report.out.c_str());
    }
    return kExitOk;
  }
};

// ---- validate --------------------------------------------------------------

struct ValidateFprCmd {
  std::string pool, sampler = "uniform";
  std::size_t pool_size = 1000, calib_size = 100, trials = 300;
  double alpha = 0.05, slack = 0.01;
  ReportFlags report;

  void add(CLI::App* app) {
    app->add_option("--pool", pool, "Clean score CSV (default: synthetic pool)");
    app->add_option("--sampler", sampler, "Synthetic pool distribution")
        ->check(CLI::IsMember({"uniform", "normal", "exponential"}))
        ->capture_default_str();
    app->add_option("--pool-size", pool_size, "Synthetic pool size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--calib-size,-n", calib_size, "Calibration size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app->add_option("--trials", trials, "Resampling trials")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--slack", slack, "Allowed excess over the bound")->check(CLI::NonNegativeNumber)->capture_default_str();
    report.add(app);
  }

  int run(std::uint64_t seed) const {
    std::vector<double> values;
    if (!pool.empty()) {
      Scores s = make<Scores>([&](auto** o) { return rppcert_scores_load(pool.c_str(), o); });
      values.resize(rppcert_scores_size(s.get()));
      for (std::size_t i = 0; i < values.size(); ++i) check(rppcert_scores_get(s.get(), i, nullptr, &values[i]));
    } else {
      values.resize(pool_size);
      check(rppcert_sample_scores(sampler.c_str(), pool_size, seed, values.data()));
    }
    Report r = make<Report>([&](auto** o) {
      return rppcert_validate_fpr(values.data(), values.size(), calib_size, alpha, trials, seed, slack, o);
    });
    return emit_report(r.get(), report);
  }
};

struct ValidateCoverageCmd {
  std::string sampler = "uniform";
  std::size_t calib_size = 100, trials = 1000;
  double alpha = 0.05;
  ReportFlags report;

  void add(CLI::App* app) {
    app->add_option("--sampler", sampler, "Score distribution")
        ->check(CLI::IsMember({"uniform", "normal", "exponential", "discrete"}))
        ->capture_default_str();
    app->add_option("--calib-size,-n", calib_size, "Calibration size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app->add_option("--trials", trials, "Trials")->check(CLI::PositiveNumber)->capture_default_str();
    report.add(app);
  }

  int run(std::uint64_t seed) const {
    Report r = make<Report>(
        [&](auto** o) { return rppcert_validate_coverage(sampler.c_str(), calib_size, alpha, trials, seed, o); });
    return emit_report(r.get(), report);
  }
};

struct ValidateErppCmd {
  std::string oracle;
  std::size_t dim = 8, points = 20, mc_draws = 100000;
  double sigma0 = 1.0;
  ReportFlags report;

  void add(CLI::App* app) {
    app->add_option("--oracle", oracle, "Analytic oracle JSON (default: random direction)");
    app->add_option("--dim", dim, "Dimension of the default oracle")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--sigma0", sigma0, "Scale of the default oracle")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--points", points, "Grid points")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--mc-draws", mc_draws, "Monte Carlo draws per point")->check(CLI::PositiveNumber)->capture_default_str();
    report.add(app);
  }

  int run(std::uint64_t seed) const {
    Oracle o;
    if (!oracle.empty()) {
      o = make<Oracle>([&](auto** out) { return rppcert_oracle_analytic_load(oracle.c_str(), out); });
    } else {
      std::vector<double> w(dim);
      check(rppcert_sample_scores("normal", dim, seed, w.data()));
      o = make<Oracle>([&](auto** out) { return rppcert_oracle_analytic(w.data(), dim, 0.0, sigma0, out); });
    }
    Report r = make<Report>([&](auto** out) { return rppcert_validate_erpp(o.get(), points, mc_draws, seed, out); });
    return emit_report(r.get(), report);
  }
};

struct ValidateA1Cmd {
  std::string data;
  std::optional<std::size_t> target_class;
  double min_rate = 0.95;
  OracleFlags oracle;
  NoiseFlags noise;
  ReportFlags report;

  void add(CLI::App* app) {
    app->add_option("--data", data, "Dataset whose poisoned rows are tested")->required();
    app->add_option("--target-class", target_class, "Target class (default: poisoning record)");
    app->add_option("--min-rate", min_rate, "Required share of satisfying samples")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    oracle.add(app);
    noise.add(app);
    report.add(app);
  }

  int run(std::uint64_t seed) const {
    Dataset full = make<Dataset>([&](auto** o) { return rppcert_dataset_load(data.c_str(), o); });
    Dataset d = make<Dataset>([&](auto** o) { return rppcert_dataset_subset(full.get(), RPPCERT_SUBSET_POISONED, o); });
    std::size_t target = 0;
    if (target_class) {
      target = *target_class;
    } else {
      rppcert_trigger_options t;
      check(rppcert_dataset_trigger(full.get(), &t));
      target = t.target_class;
    }
    Oracle orc = oracle.load();
    const auto nopts = noise.options(seed);
    Report r = make<Report>([&](auto** o) {
      return rppcert_validate_a1(orc.get(), d.get(), target, &nopts, min_rate, spv_code(oracle.spv), o);
    });
    return emit_report(r.get(), report);
  }
};

struct ValidateTrendCmd {
  rppcert_trend_options defaults{};
  std::vector<double> rhos = {1.0, 100.0};
  std::size_t seeds = 3;
  std::string imbalance = "step";
  TriggerFlags trigger;
  std::size_t epochs = 30;
  double lr = 0.1;
  ReportFlags report;

  ValidateTrendCmd() {
    rppcert_trend_options_init(&defaults);
    trigger.target_l2 = defaults.trigger.target_l2;
  }

  void add(CLI::App* app) {
    app->add_option("--rho", rhos, "Imbalance ratios")->capture_default_str();
    app->add_option("--seeds", seeds, "Number of seeds (from --seed upward)")
        ->check(CLI::Range(3, 1000))
        ->capture_default_str();
    app->add_option("--imbalance", imbalance, "Imbalance profile")
        ->check(CLI::IsMember({"longtail", "step"}))
        ->capture_default_str();
    app->add_option("--mu", defaults.mu, "Minority fraction")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app->add_option("--n-max", defaults.n_max, "Largest class size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--poison-count", defaults.poison_count, "Poisoned samples")->capture_default_str();
    app->add_option("--classes", defaults.num_classes, "Classes")->check(CLI::Range(2, 100000))->capture_default_str();
    app->add_option("--dim", defaults.dim, "Dimension")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--separation", defaults.separation, "Class mean distance")->capture_default_str();
    app->add_option("--test-per-class", defaults.test_per_class, "Clean test samples per class")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--lr", lr, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    trigger.add(app);
    report.add(app);
  }

  int run(std::uint64_t seed) {
    std::vector<std::uint64_t> seed_list;
    for (std::size_t i = 0; i < seeds; ++i) seed_list.push_back(seed + i);
    rppcert_trend_options o = defaults;
    o.imbalance_kind = imbalance == "longtail" ? RPPCERT_IMBALANCE_LONGTAIL : RPPCERT_IMBALANCE_STEP;
    o.rhos = rhos.data();
    o.rho_count = rhos.size();
    o.seeds = seed_list.data();
    o.seed_count = seed_list.size();
    o.trigger = trigger.options();
    o.training.epochs = epochs;
    o.training.learning_rate = lr;
    Report r = make<Report>([&](auto** out) { return rppcert_validate_trend(&o, out); });
    return emit_report(r.get(), report);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rppcert: certified poisoned-sample detection by randomized probability perturbation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rppcert_version()));

  std::optional<std::uint64_t> seed_flag;
  app.add_option("--seed", seed_flag, "Master seed (default: $RPPCERT_SEED or 0)");

  SynthCmd synth;
  TrainCmd train;
  ScoreCmd score;
  CalibrateCmd calibrate;
  DetectCmd detect;
  CertifyCmd certify;
  EvalCmd eval;
  ValidateFprCmd vfpr;
  ValidateCoverageCmd vcov;
  ValidateErppCmd verpp;
  ValidateA1Cmd va1;
  ValidateTrendCmd vtrend;

  auto* c_synth = app.add_subcommand("synth", "Generate a (poisoned, imbalanced) synthetic dataset split");
  synth.add(c_synth);
  auto* c_train = app.add_subcommand("train", "Train a classifier");
  train.add(c_train);
  auto* c_score = app.add_subcommand("score", "Compute eRPP scores");
  score.add(c_score);
  auto* c_cal = app.add_subcommand("calibrate", "Build a calibration profile from clean scores");
  calibrate.add(c_cal);
  auto* c_detect = app.add_subcommand("detect", "Flag samples whose score is at or below q_hat");
  detect.add(c_detect);
  auto* c_cert = app.add_subcommand("certify", "Certified detection interval per sample");
  certify.add(c_cert);
  auto* c_eval = app.add_subcommand("eval", "Detection (and attack) metrics");
  eval.add(c_eval);
  auto* c_val = app.add_subcommand("validate", "Statistical validators");
  c_val->require_subcommand(1);
  auto* v_fpr = c_val->add_subcommand("fpr", "0.95-quantile FPR against alpha + 1/(n+1)");
  vfpr.add(v_fpr);
  auto* v_cov = c_val->add_subcommand("coverage", "KS test of the coverage law");
  vcov.add(v_cov);
  auto* v_erpp = c_val->add_subcommand("erpp", "Monte Carlo eRPP against exact quadrature");
  verpp.add(v_erpp);
  auto* v_a1 = c_val->add_subcommand("a1", "Noise lowers the target probability of triggered inputs");
  va1.add(v_a1);
  auto* v_trend = c_val->add_subcommand("trend", "ASR against imbalance ratio at a fixed poison count");
  vtrend.add(v_trend);

  for (auto* sub : {c_synth, c_train, c_score, c_detect, c_cert, v_fpr, v_cov, v_erpp, v_a1, v_trend}) {
    sub->add_option("--seed", seed_flag, "Master seed (default: $RPPCERT_SEED or 0)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const std::uint64_t seed = seed_flag ? *seed_flag : default_seed();
    if (c_synth->parsed()) return synth.run(seed);
    if (c_train->parsed()) return train.run(seed);
    if (c_score->parsed()) return score.run(seed);
    if (c_cal->parsed()) return calibrate.run();
    if (c_detect->parsed()) return detect.run(seed);
    if (c_cert->parsed()) return certify.run(seed);
    if (c_eval->parsed()) return eval.run();
    if (v_fpr->parsed()) return vfpr.run(seed);
    if (v_cov->parsed()) return vcov.run(seed);
    if (v_erpp->parsed()) return verpp.run(seed);
    if (v_a1->parsed()) return va1.run(seed);
    if (v_trend->parsed()) return vtrend.run(seed);
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitPrecondition;
  }
  return kExitUsage;
}
