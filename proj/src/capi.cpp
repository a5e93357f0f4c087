#include "rppcert.h"

#include <cstring>
#include <map>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "rppcert/certify.hpp"
#include "rppcert/classifier.hpp"
#include "rppcert/conformal.hpp"
#include "rppcert/datagen.hpp"
#include "rppcert/error.hpp"
#include "rppcert/evalkit.hpp"
#include "rppcert/io.hpp"
#include "rppcert/rpp.hpp"

using namespace rppcert;

struct rppcert_dataset {
  Dataset data;
  DatasetManifest manifest;
};

struct rppcert_model {
  std::shared_ptr<const ModelParams> params;
  std::string checksum;
};

struct rppcert_oracle {
  std::shared_ptr<const Oracle> oracle;
  const AnalyticLinearOracle* analytic = nullptr;
};

struct rppcert_scores {
  std::vector<RppScore> items;
};

struct rppcert_profile {
  CalibrationProfile profile;
};

struct rppcert_verdicts {
  std::vector<DetectionVerdict> items;
};

struct rppcert_certificates {
  std::vector<Certificate> items;
};

struct rppcert_report {
  ValidationReport report;
  std::string rendered;
};

namespace {

thread_local std::string g_last_error;

rppcert_status status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
      return RPPCERT_E_INVALID_ARGUMENT;
    case ErrorKind::Domain:
      return RPPCERT_E_DOMAIN;
    case ErrorKind::Parse:
      return RPPCERT_E_PARSE;
    case ErrorKind::Io:
      return RPPCERT_E_IO;
    case ErrorKind::Precondition:
      return RPPCERT_E_PRECONDITION;
    case ErrorKind::Provenance:
      return RPPCERT_E_PROVENANCE;
    case ErrorKind::Training:
      return RPPCERT_E_TRAINING;
    case ErrorKind::Internal:
      break;
  }
  return RPPCERT_E_INTERNAL;
}

rppcert_status fail(rppcert_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
rppcert_status guarded(F&& body) {
  try {
    body();
    return RPPCERT_OK;
  } catch (const Error& e) {
    return fail(status_for(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(RPPCERT_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RPPCERT_E_INTERNAL, e.what());
  } catch (...) {
    return fail(RPPCERT_E_INTERNAL, "unknown error");
  }
}

template <typename T>
void require_arg(const T* p, const char* name) {
  if (p == nullptr) throw InvalidArgument(std::string(name) + " must not be NULL");
}

ImageDims dims_for(const rppcert_trigger_options& t, std::size_t dim) {
  if (t.height == 0 && t.width == 0 && t.channels == 0) return ImageDims::infer(dim);
  return {t.height, t.width, t.channels == 0 ? 1 : t.channels};
}

TriggerSpec to_trigger(const rppcert_trigger_options& t, std::size_t dim) {
  TriggerSpec s;
  if (t.kind != RPPCERT_TRIGGER_CHESSBOARD && t.kind != RPPCERT_TRIGGER_BLEND) {
    throw InvalidArgument("trigger: unknown kind " + std::to_string(t.kind));
  }
  s.kind = t.kind == RPPCERT_TRIGGER_BLEND ? TriggerKind::Blend : TriggerKind::Chessboard;
  s.target_l2 = t.target_l2;
  s.dims = dims_for(t, dim);
  s.patch_side = t.patch_side;
  s.blend_rate = t.blend_rate;
  s.pattern_seed = t.pattern_seed;
  s.target_class = t.target_class;
  return s;
}

void from_trigger(const TriggerSpec& s, rppcert_trigger_options* out) {
  rppcert_trigger_options_init(out);
  out->kind = s.kind == TriggerKind::Blend ? RPPCERT_TRIGGER_BLEND : RPPCERT_TRIGGER_CHESSBOARD;
  out->target_l2 = s.target_l2;
  out->height = s.dims.height;
  out->width = s.dims.width;
  out->channels = s.dims.channels;
  out->patch_side = s.patch_side;
  out->blend_rate = s.blend_rate;
  out->pattern_seed = s.pattern_seed;
  out->target_class = s.target_class;
}

TrainingConfig to_training(const rppcert_train_options& o) {
  TrainingConfig c;
  if (o.architecture != RPPCERT_ARCH_SOFTMAX_LINEAR && o.architecture != RPPCERT_ARCH_ONE_HIDDEN_LAYER) {
    throw InvalidArgument("train: unknown architecture " + std::to_string(o.architecture));
  }
  c.architecture = o.architecture == RPPCERT_ARCH_ONE_HIDDEN_LAYER ? Architecture::OneHiddenLayer
                                                                   : Architecture::SoftmaxLinear;
  c.hidden = o.hidden;
  c.epochs = o.epochs;
  c.learning_rate = o.learning_rate;
  c.batch_size = o.batch_size;
  c.weight_decay = o.weight_decay;
  c.seed = o.seed;
  return c;
}

NoiseConfig to_noise(const rppcert_noise_options& o) {
  NoiseConfig c;
  c.sigma = o.sigma;
  c.draws = o.draws;
  c.master_seed = o.seed;
  if (o.clip) c.clip = std::make_pair(o.clip_lo, o.clip_hi);
  c.validate();
  return c;
}

SpvMode to_mode(int m) {
  if (m != RPPCERT_SPV_SOFT && m != RPPCERT_SPV_HARD) {
    throw InvalidArgument("unknown SPV mode " + std::to_string(m));
  }
  return m == RPPCERT_SPV_HARD ? SpvMode::Hard : SpvMode::Soft;
}

rppcert_dataset* wrap(Dataset data, DatasetManifest manifest) {
  manifest.num_classes = data.num_classes;
  manifest.dim = data.dim;
  return new rppcert_dataset{std::move(data), std::move(manifest)};
}

// Derived datasets keep the provenance of their source except the checksum,
// which only describes a file on disk.
DatasetManifest derived_manifest(const rppcert_dataset& src) {
  DatasetManifest m = src.manifest;
  m.checksum.clear();
  m.sample_ids.clear();
  m.csv_path.clear();
  m.poison_index_path.clear();
  return m;
}

}  // namespace

extern "C" {

const char* rppcert_last_error(void) { return g_last_error.c_str(); }

const char* rppcert_status_name(rppcert_status status) {
  switch (status) {
    case RPPCERT_OK:
      return "ok";
    case RPPCERT_E_INVALID_ARGUMENT:
      return "invalid argument";
    case RPPCERT_E_DOMAIN:
      return "domain error";
    case RPPCERT_E_PARSE:
      return "parse error";
    case RPPCERT_E_IO:
      return "i/o error";
    case RPPCERT_E_PRECONDITION:
      return "precondition failed";
    case RPPCERT_E_PROVENANCE:
      return "provenance mismatch";
    case RPPCERT_E_TRAINING:
      return "training failed";
    case RPPCERT_E_INTERNAL:
      break;
  }
  return "internal error";
}

const char* rppcert_version(void) { return "1.0.0"; }

// ---- datasets --------------------------------------------------------------

void rppcert_blob_options_init(rppcert_blob_options* o) {
  if (!o) return;
  *o = {};
  o->num_classes = 2;
  o->dim = 2;
  o->per_class = 100;
  o->separation = 4.0;
  o->noise_std = 1.0;
}

void rppcert_imbalance_options_init(rppcert_imbalance_options* o) {
  if (!o) return;
  *o = {};
  o->kind = RPPCERT_IMBALANCE_STEP;
  o->rho = 1.0;
  o->mu = 0.9;
}

void rppcert_trigger_options_init(rppcert_trigger_options* o) {
  if (!o) return;
  *o = {};
  o->kind = RPPCERT_TRIGGER_CHESSBOARD;
  o->target_l2 = 0.8;
  o->patch_side = 3;
  o->blend_rate = 0.2;
}

void rppcert_poison_options_init(rppcert_poison_options* o) {
  if (!o) return;
  *o = {};
  rppcert_trigger_options_init(&o->trigger);
  o->mode = RPPCERT_POISON_COUNT;
  o->policy = RPPCERT_SOURCES_MINORITY;
  o->clip_hi = 1.0;
}

void rppcert_split_options_init(rppcert_split_options* o) {
  if (!o) return;
  *o = {};
  o->calib_n = 100;
  o->test_fraction = 0.2;
  o->calib_mode = RPPCERT_CALIB_BALANCED;
}

rppcert_status rppcert_dataset_make_blobs(const rppcert_blob_options* o, rppcert_dataset** out) {
  return guarded([&] {
    require_arg(o, "options");
    require_arg(out, "out");
    BlobSpec spec;
    spec.num_classes = o->num_classes;
    spec.dim = o->dim;
    spec.per_class = {o->per_class};
    spec.separation = o->separation;
    spec.noise_std = o->noise_std;
    spec.seed = o->seed;
    DatasetManifest m;
    m.seed = o->seed;
    *out = wrap(make_blobs(spec), std::move(m));
  });
}

rppcert_status rppcert_dataset_subsample(const rppcert_dataset* data, const rppcert_imbalance_options* o,
                                         rppcert_dataset** out) {
  return guarded([&] {
    require_arg(data, "dataset");
    require_arg(o, "options");
    require_arg(out, "out");
    if (o->kind != RPPCERT_IMBALANCE_LONGTAIL && o->kind != RPPCERT_IMBALANCE_STEP) {
      throw InvalidArgument("imbalance: unknown kind " + std::to_string(o->kind));
    }
    ImbalanceSpec spec;
    spec.kind = o->kind == RPPCERT_IMBALANCE_LONGTAIL ? ImbalanceKind::LongTail : ImbalanceKind::Step;
    spec.rho = o->rho;
    spec.mu = o->mu;
    spec.n_max = o->n_max;
    DatasetManifest m = derived_manifest(*data);
    m.imbalance = spec;
    *out = wrap(subsample_imbalanced(data->data, spec, o->seed), std::move(m));
  });
}

rppcert_status rppcert_dataset_poison(const rppcert_dataset* data, const rppcert_poison_options* o,
                                      rppcert_dataset** out) {
  return guarded([&] {
    require_arg(data, "dataset");
    require_arg(o, "options");
    require_arg(out, "out");
    if (o->mode != RPPCERT_POISON_COUNT && o->mode != RPPCERT_POISON_RATE) {
      throw InvalidArgument("poison: unknown mode " + std::to_string(o->mode));
    }
    if (o->policy != RPPCERT_SOURCES_MINORITY && o->policy != RPPCERT_SOURCES_ANY) {
      throw InvalidArgument("poison: unknown source policy " + std::to_string(o->policy));
    }
    PoisonPlan plan;
    plan.mode = o->mode == RPPCERT_POISON_RATE ? PoisonMode::Rate : PoisonMode::Count;
    plan.count = o->count;
    plan.rate = o->rate;
    plan.policy = o->policy == RPPCERT_SOURCES_ANY ? SourcePolicy::Any : SourcePolicy::MinorityOnly;
    plan.trigger = to_trigger(o->trigger, data->data.dim);
    plan.seed = o->seed;
    plan.clip = o->clip != 0;
    plan.clip_lo = o->clip_lo;
    plan.clip_hi = o->clip_hi;
    DatasetManifest m = derived_manifest(*data);
    m.poison = plan;
    *out = wrap(apply_poison(data->data, plan).data, std::move(m));
  });
}

rppcert_status rppcert_dataset_split(const rppcert_dataset* data, const rppcert_split_options* o,
                                     rppcert_dataset** train, rppcert_dataset** calib,
                                     rppcert_dataset** test) {
  return guarded([&] {
    require_arg(data, "dataset");
    require_arg(o, "options");
    require_arg(train, "train");
    require_arg(calib, "calib");
    require_arg(test, "test");
    SplitSpec spec;
    spec.calib_n = o->calib_n;
    spec.test_fraction = o->test_fraction;
    spec.calib_mode = o->calib_mode == RPPCERT_CALIB_IMBALANCED ? CalibrationMode::Imbalanced
                                                                : CalibrationMode::Balanced;
    spec.seed = o->seed;
    SplitResult parts = split(data->data, spec);
    auto tr = std::unique_ptr<rppcert_dataset>(wrap(std::move(parts.train), derived_manifest(*data)));
    auto ca = std::unique_ptr<rppcert_dataset>(wrap(std::move(parts.calibration), derived_manifest(*data)));
    auto te = std::unique_ptr<rppcert_dataset>(wrap(std::move(parts.test), derived_manifest(*data)));
    *train = tr.release();
    *calib = ca.release();
    *test = te.release();
  });
}

rppcert_status rppcert_dataset_subset(const rppcert_dataset* data, int which, rppcert_dataset** out) {
  return guarded([&] {
    require_arg(data, "dataset");
    require_arg(out, "out");
    if (which != RPPCERT_SUBSET_ALL && which != RPPCERT_SUBSET_POISONED && which != RPPCERT_SUBSET_CLEAN) {
      throw InvalidArgument("subset: unknown selector " + std::to_string(which));
    }
    Dataset d;
    d.num_classes = data->data.num_classes;
    d.dim = data->data.dim;
    d.warnings = data->data.warnings;
    for (const auto& s : data->data.samples) {
      if (which == RPPCERT_SUBSET_ALL || (which == RPPCERT_SUBSET_POISONED) == s.poisoned) {
        d.samples.push_back(s);
      }
    }
    *out = wrap(std::move(d), derived_manifest(*data));
  });
}

rppcert_status rppcert_dataset_head(const rppcert_dataset* data, size_t count, rppcert_dataset** out) {
  return guarded([&] {
    require_arg(data, "dataset");
    require_arg(out, "out");
    Dataset d;
    d.num_classes = data->data.num_classes;
    d.dim = data->data.dim;
    d.warnings = data->data.warnings;
    const std::size_t n = std::min(count, data->data.size());
    d.samples.assign(data->data.samples.begin(), data->data.samples.begin() + static_cast<std::ptrdiff_t>(n));
    *out = wrap(std::move(d), derived_manifest(*data));
  });
}

rppcert_status rppcert_dataset_save(rppcert_dataset* data, const char* csv_path) {
  return guarded([&] {
    require_arg(data, "dataset");
    require_arg(csv_path, "path");
    data->manifest = save_dataset(data->data, csv_path, data->manifest);
    data->data.checksum = data->manifest.checksum;
  });
}

rppcert_status rppcert_dataset_load(const char* csv_path, rppcert_dataset** out) {
  return guarded([&] {
    require_arg(csv_path, "path");
    require_arg(out, "out");
    Dataset data = load_dataset(csv_path);
    DatasetManifest m = manifest_from_json(io::read_file(manifest_path_for(csv_path)));
    *out = new rppcert_dataset{std::move(data), std::move(m)};
  });
}

void rppcert_dataset_free(rppcert_dataset* data) { delete data; }

size_t rppcert_dataset_size(const rppcert_dataset* d) { return d ? d->data.size() : 0; }
size_t rppcert_dataset_num_classes(const rppcert_dataset* d) { return d ? d->data.num_classes : 0; }
size_t rppcert_dataset_dim(const rppcert_dataset* d) { return d ? d->data.dim : 0; }
size_t rppcert_dataset_poisoned_count(const rppcert_dataset* d) {
  return d ? d->data.poison_indices().size() : 0;
}
const char* rppcert_dataset_checksum(const rppcert_dataset* d) { return d ? d->data.checksum.c_str() : ""; }
size_t rppcert_dataset_warning_count(const rppcert_dataset* d) { return d ? d->data.warnings.size() : 0; }
const char* rppcert_dataset_warning(const rppcert_dataset* d, size_t i) {
  return d && i < d->data.warnings.size() ? d->data.warnings[i].c_str() : nullptr;
}

rppcert_status rppcert_dataset_class_counts(const rppcert_dataset* d, size_t* counts, size_t len) {
  return guarded([&] {
    require_arg(d, "dataset");
    require_arg(counts, "counts");
    if (len < d->data.num_classes) throw InvalidArgument("class_counts: buffer shorter than K");
    const auto c = d->data.class_counts();
    std::copy(c.begin(), c.end(), counts);
  });
}

rppcert_status rppcert_dataset_sample(const rppcert_dataset* d, size_t index, double* features,
                                      size_t len, size_t* label, int* poisoned, uint64_t* id) {
  return guarded([&] {
    require_arg(d, "dataset");
    if (index >= d->data.size()) throw InvalidArgument("sample: index out of range");
    const Sample& s = d->data.samples[index];
    if (features) {
      if (len < s.features.size()) throw InvalidArgument("sample: feature buffer too short");
      std::copy(s.features.begin(), s.features.end(), features);
    }
    if (label) *label = s.label;
    if (poisoned) *poisoned = s.poisoned ? 1 : 0;
    if (id) *id = s.id;
  });
}

rppcert_status rppcert_dataset_trigger(const rppcert_dataset* d, rppcert_trigger_options* out) {
  return guarded([&] {
    require_arg(d, "dataset");
    require_arg(out, "out");
    if (!d->manifest.poison) throw PreconditionError("dataset carries no poisoning record");
    from_trigger(d->manifest.poison->trigger, out);
  });
}

rppcert_status rppcert_trigger_render(const rppcert_trigger_options* o, size_t dim, double* out, size_t len) {
  return guarded([&] {
    require_arg(o, "options");
    require_arg(out, "out");
    const auto delta = render_trigger(to_trigger(*o, dim));
    if (delta.size() != dim) throw InvalidArgument("trigger: image layout does not cover dim");
    if (len < delta.size()) throw InvalidArgument("trigger: output buffer too short");
    std::copy(delta.begin(), delta.end(), out);
  });
}

// ---- models and oracles ----------------------------------------------------

void rppcert_train_options_init(rppcert_train_options* o) {
  if (!o) return;
  const TrainingConfig c;
  *o = {};
  o->architecture = RPPCERT_ARCH_SOFTMAX_LINEAR;
  o->hidden = 32;
  o->epochs = c.epochs;
  o->learning_rate = c.learning_rate;
  o->batch_size = c.batch_size;
  o->weight_decay = c.weight_decay;
}

rppcert_status rppcert_model_train(const rppcert_dataset* data, const rppcert_train_options* o,
                                   rppcert_model** out) {
  return guarded([&] {
    require_arg(data, "dataset");
    require_arg(o, "options");
    require_arg(out, "out");
    auto params = std::make_shared<ModelParams>(train(data->data, to_training(*o)));
    const std::string sum = model_checksum(*params);
    *out = new rppcert_model{std::move(params), sum};
  });
}

rppcert_status rppcert_model_save(const rppcert_model* m, const char* path) {
  return guarded([&] {
    require_arg(m, "model");
    require_arg(path, "path");
    save_model(*m->params, path);
  });
}

rppcert_status rppcert_model_load(const char* path, rppcert_model** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    auto params = std::make_shared<ModelParams>(load_model(path));
    const std::string sum = model_checksum(*params);
    *out = new rppcert_model{std::move(params), sum};
  });
}

void rppcert_model_free(rppcert_model* m) { delete m; }

rppcert_status rppcert_model_accuracy(const rppcert_model* m, const rppcert_dataset* d, double* out) {
  return guarded([&] {
    require_arg(m, "model");
    require_arg(d, "dataset");
    require_arg(out, "out");
    *out = accuracy(*m->params, d->data);
  });
}

double rppcert_model_train_accuracy(const rppcert_model* m) { return m ? m->params->meta.train_accuracy : 0.0; }
const char* rppcert_model_checksum(const rppcert_model* m) { return m ? m->checksum.c_str() : ""; }

rppcert_status rppcert_oracle_from_model(const rppcert_model* m, int spv_mode, rppcert_oracle** out) {
  return guarded([&] {
    require_arg(m, "model");
    require_arg(out, "out");
    std::shared_ptr<const Oracle> o = std::make_shared<ModelOracle>(m->params);
    if (to_mode(spv_mode) == SpvMode::Hard) o = std::make_shared<HardLabelOracle>(o);
    *out = new rppcert_oracle{std::move(o), nullptr};
  });
}

namespace {
rppcert_oracle* wrap_analytic(AnalyticLinearOracle oracle) {
  auto sp = std::make_shared<AnalyticLinearOracle>(std::move(oracle));
  const AnalyticLinearOracle* raw = sp.get();
  return new rppcert_oracle{std::move(sp), raw};
}
}  // namespace

rppcert_status rppcert_oracle_analytic(const double* w, size_t dim, double b, double sigma0,
                                       rppcert_oracle** out) {
  return guarded([&] {
    require_arg(w, "w");
    require_arg(out, "out");
    *out = wrap_analytic(AnalyticLinearOracle(std::vector<double>(w, w + dim), b, sigma0));
  });
}

rppcert_status rppcert_oracle_analytic_load(const char* path, rppcert_oracle** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = wrap_analytic(AnalyticLinearOracle::from_json(io::read_file(path)));
  });
}

rppcert_status rppcert_oracle_analytic_save(const rppcert_oracle* o, const char* path) {
  return guarded([&] {
    require_arg(o, "oracle");
    require_arg(path, "path");
    if (!o->analytic) throw InvalidArgument("oracle is not an analytic oracle");
    io::write_atomic(path, o->analytic->to_json());
  });
}

void rppcert_oracle_free(rppcert_oracle* o) { delete o; }
size_t rppcert_oracle_num_classes(const rppcert_oracle* o) { return o ? o->oracle->num_classes() : 0; }
size_t rppcert_oracle_dim(const rppcert_oracle* o) { return o ? o->oracle->dim() : 0; }

rppcert_status rppcert_oracle_spv(const rppcert_oracle* o, const double* x, size_t dim, double* probs,
                                  size_t num_classes) {
  return guarded([&] {
    require_arg(o, "oracle");
    require_arg(x, "x");
    require_arg(probs, "probs");
    if (dim != o->oracle->dim()) throw InvalidArgument("spv: dimension mismatch");
    if (num_classes < o->oracle->num_classes()) throw InvalidArgument("spv: output buffer shorter than K");
    const ProbVector p = o->oracle->spv(std::span<const double>(x, dim));
    std::copy(p.probs.begin(), p.probs.end(), probs);
  });
}

// ---- scoring ---------------------------------------------------------------

void rppcert_noise_options_init(rppcert_noise_options* o) {
  if (!o) return;
  *o = {};
  o->sigma = 1.0;
  o->draws = 3;
  o->clip_hi = 1.0;
  o->workers = 1;
}

rppcert_status rppcert_erpp(const rppcert_oracle* o, const double* x, size_t dim,
                            const rppcert_noise_options* n, uint64_t sample_id, double* out) {
  return guarded([&] {
    require_arg(o, "oracle");
    require_arg(x, "x");
    require_arg(n, "noise");
    require_arg(out, "out");
    *out = erpp(*o->oracle, std::span<const double>(x, dim), to_noise(*n), sample_id).value;
  });
}

rppcert_status rppcert_rpp_exact(const rppcert_oracle* o, const double* x, size_t dim, double sigma,
                                 double* out) {
  return guarded([&] {
    require_arg(o, "oracle");
    require_arg(x, "x");
    require_arg(out, "out");
    if (!o->analytic) throw InvalidArgument("exact RPP needs an analytic oracle");
    *out = rpp_exact_analytic(*o->analytic, std::span<const double>(x, dim), sigma);
  });
}

rppcert_status rppcert_score_dataset(const rppcert_oracle* o, const rppcert_dataset* d,
                                     const rppcert_noise_options* n, rppcert_scores** out) {
  return guarded([&] {
    require_arg(o, "oracle");
    require_arg(d, "dataset");
    require_arg(n, "noise");
    require_arg(out, "out");
    *out = new rppcert_scores{erpp_dataset(*o->oracle, d->data, to_noise(*n), n->workers)};
  });
}

rppcert_status rppcert_score_table(const char* path, size_t num_classes, const rppcert_noise_options* n,
                                   rppcert_scores** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(n, "noise");
    require_arg(out, "out");
    const auto table = ProbabilityTable::load_csv(path, num_classes);
    *out = new rppcert_scores{erpp_from_table(table, to_noise(*n))};
  });
}

rppcert_status rppcert_scores_save(const rppcert_scores* s, const char* path) {
  return guarded([&] {
    require_arg(s, "scores");
    require_arg(path, "path");
    save_scores(s->items, path);
  });
}

rppcert_status rppcert_scores_load(const char* path, rppcert_scores** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new rppcert_scores{load_scores(path)};
  });
}

void rppcert_scores_free(rppcert_scores* s) { delete s; }
size_t rppcert_scores_size(const rppcert_scores* s) { return s ? s->items.size() : 0; }

rppcert_status rppcert_scores_get(const rppcert_scores* s, size_t i, uint64_t* id, double* value) {
  return guarded([&] {
    require_arg(s, "scores");
    if (i >= s->items.size()) throw InvalidArgument("scores: index out of range");
    if (id) *id = s->items[i].sample_id;
    if (value) *value = s->items[i].value;
  });
}

rppcert_status rppcert_scores_head(const rppcert_scores* s, size_t count, rppcert_scores** out) {
  return guarded([&] {
    require_arg(s, "scores");
    require_arg(out, "out");
    const std::size_t n = std::min(count, s->items.size());
    *out = new rppcert_scores{{s->items.begin(), s->items.begin() + static_cast<std::ptrdiff_t>(n)}};
  });
}

// ---- calibration and detection --------------------------------------------

rppcert_status rppcert_calibrate(const rppcert_scores* s, double alpha, rppcert_profile** out) {
  return guarded([&] {
    require_arg(s, "scores");
    require_arg(out, "out");
    *out = new rppcert_profile{calibrate(s->items, alpha)};
  });
}

rppcert_status rppcert_profile_set_provenance(rppcert_profile* p, const char* dataset_checksum,
                                             const char* model_checksum) {
  return guarded([&] {
    require_arg(p, "profile");
    if (dataset_checksum) p->profile.dataset_checksum = dataset_checksum;
    if (model_checksum) p->profile.model_checksum = model_checksum;
  });
}

rppcert_status rppcert_profile_info_get(const rppcert_profile* p, rppcert_profile_info* out) {
  return guarded([&] {
    require_arg(p, "profile");
    require_arg(out, "out");
    const auto b = theoretical_bounds(p->profile);
    *out = {p->profile.n,     p->profile.k,     p->profile.alpha,   p->profile.q_hat,
            p->profile.sigma, p->profile.draws, b.clean_pass_lower, b.fpr_upper};
  });
}

rppcert_status rppcert_profile_save(const rppcert_profile* p, const char* path) {
  return guarded([&] {
    require_arg(p, "profile");
    require_arg(path, "path");
    save_profile(p->profile, path);
  });
}

rppcert_status rppcert_profile_load(const char* path, rppcert_profile** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new rppcert_profile{load_profile(path)};
  });
}

void rppcert_profile_free(rppcert_profile* p) { delete p; }

rppcert_status rppcert_detect(const rppcert_scores* s, const rppcert_profile* p, int force,
                              rppcert_verdicts** out) {
  return guarded([&] {
    require_arg(s, "scores");
    require_arg(p, "profile");
    require_arg(out, "out");
    *out = new rppcert_verdicts{detect_all(s->items, p->profile, force != 0)};
  });
}

rppcert_status rppcert_verdicts_save(const rppcert_verdicts* v, const char* path) {
  return guarded([&] {
    require_arg(v, "verdicts");
    require_arg(path, "path");
    save_verdicts(v->items, path);
  });
}

rppcert_status rppcert_verdicts_load(const char* path, rppcert_verdicts** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new rppcert_verdicts{load_verdicts(path)};
  });
}

void rppcert_verdicts_free(rppcert_verdicts* v) { delete v; }
size_t rppcert_verdicts_size(const rppcert_verdicts* v) { return v ? v->items.size() : 0; }

size_t rppcert_verdicts_flagged(const rppcert_verdicts* v) {
  if (!v) return 0;
  std::size_t n = 0;
  for (const auto& x : v->items) n += x.flagged ? 1 : 0;
  return n;
}

rppcert_status rppcert_verdicts_get(const rppcert_verdicts* v, size_t i, uint64_t* id, double* score,
                                    int* flagged) {
  return guarded([&] {
    require_arg(v, "verdicts");
    if (i >= v->items.size()) throw InvalidArgument("verdicts: index out of range");
    if (id) *id = v->items[i].sample_id;
    if (score) *score = v->items[i].score;
    if (flagged) *flagged = v->items[i].flagged ? 1 : 0;
  });
}

// ---- certification ---------------------------------------------------------

void rppcert_certify_options_init(rppcert_certify_options* o) {
  if (!o) return;
  *o = {};
  o->confidence = 0.95;
  o->spv_mode = RPPCERT_SPV_SOFT;
}

rppcert_status rppcert_certified_lower_bound(double p_x, double zeta, double pt_bar, double sigma,
                                             double* out) {
  return guarded([&] {
    require_arg(out, "out");
    CertificationInput in;
    in.p_x = p_x;
    in.zeta = zeta;
    in.pt_bar = pt_bar;
    in.sigma = sigma;
    const Bound b = certified_lower_bound(in);
    if (!b.defined()) throw DomainError(b.reason);
    *out = *b.value;
  });
}

rppcert_status rppcert_radius_upper_bound(double p_x, double pt_bar, double sigma, double* out) {
  return guarded([&] {
    require_arg(out, "out");
    CertificationInput in;
    in.p_x = p_x;
    in.pt_bar = pt_bar;
    in.sigma = sigma;
    const Bound b = radius_upper_bound(in);
    if (!b.defined()) throw DomainError(b.reason);
    *out = *b.value;
  });
}

rppcert_status rppcert_certify_dataset(const rppcert_oracle* o, const rppcert_dataset* d,
                                       const rppcert_profile* p, const rppcert_noise_options* n,
                                       const rppcert_certify_options* c, double delta_l2,
                                       rppcert_certificates** out) {
  return guarded([&] {
    require_arg(o, "oracle");
    require_arg(d, "dataset");
    require_arg(p, "profile");
    require_arg(n, "noise");
    require_arg(c, "options");
    require_arg(out, "out");
    CertifyOptions opts;
    opts.confidence = c->confidence;
    opts.mode = to_mode(c->spv_mode);
    opts.force = c->force != 0;
    const NoiseConfig cfg = to_noise(*n);
    const std::optional<double> norm = delta_l2 > 0.0 ? std::optional<double>(delta_l2) : std::nullopt;
    auto certs = std::make_unique<rppcert_certificates>();
    for (const auto& s : d->data.samples) {
      certs->items.push_back(certify_sample(*o->oracle, s.features, norm, p->profile, cfg, opts, s.id));
    }
    *out = certs.release();
  });
}

size_t rppcert_certificates_size(const rppcert_certificates* c) { return c ? c->items.size() : 0; }

size_t rppcert_certificates_count(const rppcert_certificates* c, int verdict) {
  if (!c) return 0;
  std::size_t n = 0;
  for (const auto& x : c->items) {
    const int v = x.verdict == Verdict::Guaranteed     ? RPPCERT_VERDICT_GUARANTEED
                  : x.verdict == Verdict::Unguaranteed ? RPPCERT_VERDICT_UNGUARANTEED
                                                       : RPPCERT_VERDICT_UNDEFINED;
    n += v == verdict ? 1 : 0;
  }
  return n;
}

rppcert_status rppcert_certificates_save(const rppcert_certificates* c, const char* path) {
  return guarded([&] {
    require_arg(c, "certificates");
    require_arg(path, "path");
    io::write_atomic(path, certificates_to_jsonl(c->items));
  });
}

void rppcert_certificates_free(rppcert_certificates* c) { delete c; }

// ---- evaluation ------------------------------------------------------------

rppcert_status rppcert_eval_detection(const rppcert_verdicts* v, const rppcert_dataset* d,
                                      rppcert_detection_report* out) {
  return guarded([&] {
    require_arg(v, "verdicts");
    require_arg(d, "dataset");
    require_arg(out, "out");
    std::map<std::uint64_t, bool> by_id;
    for (const auto& s : d->data.samples) by_id[s.id] = s.poisoned;
    std::vector<GroundTruth> truth;
    truth.reserve(v->items.size());
    for (const auto& x : v->items) {
      const auto it = by_id.find(x.sample_id);
      if (it == by_id.end()) {
        throw InvalidArgument("eval: verdict for sample " + std::to_string(x.sample_id) +
                              " has no row in the dataset");
      }
      truth.push_back({x.sample_id, it->second});
    }
    const DetectionReport r = tpr_fpr(v->items, truth);
    *out = {r.tp, r.fp, r.tn, r.fn, r.tpr.value_or(0.0), r.fpr.value_or(0.0),
            r.tpr.has_value() ? 1 : 0, r.fpr.has_value() ? 1 : 0};
  });
}

rppcert_status rppcert_eval_attack(const rppcert_model* m, const rppcert_dataset* d,
                                   const rppcert_trigger_options* t, rppcert_attack_report* out) {
  return guarded([&] {
    require_arg(m, "model");
    require_arg(d, "dataset");
    require_arg(t, "trigger");
    require_arg(out, "out");
    const AttackReport r = attack_metrics(*m->params, d->data, to_trigger(*t, d->data.dim));
    *out = {r.asr, r.acc, r.asr_samples, r.acc_samples};
  });
}

// ---- validators ------------------------------------------------------------

void rppcert_trend_options_init(rppcert_trend_options* o) {
  if (!o) return;
  *o = {};
  o->num_classes = 10;
  o->dim = 64;
  o->separation = 6.0;
  o->noise_std = 1.0;
  o->imbalance_kind = RPPCERT_IMBALANCE_STEP;
  o->mu = 0.9;
  o->n_max = 1000;
  o->poison_count = 18;
  rppcert_trigger_options_init(&o->trigger);
  o->trigger.target_l2 = 4.0;
  o->policy = RPPCERT_SOURCES_MINORITY;
  rppcert_train_options_init(&o->training);
  o->test_per_class = 100;
}

rppcert_status rppcert_sample_scores(const char* sampler, size_t count, uint64_t seed, double* out) {
  return guarded([&] {
    require_arg(sampler, "sampler");
    require_arg(out, "out");
    const ScoreSampler s = make_sampler(sampler);
    rng::Stream stream(rng::derive(seed, {rng::kValidate, 0x9001}));
    for (std::size_t i = 0; i < count; ++i) out[i] = s.draw(stream);
  });
}

rppcert_status rppcert_validate_fpr(const double* pool, size_t pool_len, size_t n, double alpha,
                                    size_t trials, uint64_t seed, double slack, rppcert_report** out) {
  return guarded([&] {
    require_arg(pool, "pool");
    require_arg(out, "out");
    *out = new rppcert_report{
        validate_fpr_bound(std::vector<double>(pool, pool + pool_len), n, alpha, trials, seed, slack), {}};
  });
}

rppcert_status rppcert_validate_coverage(const char* sampler, size_t n, double alpha, size_t trials,
                                         uint64_t seed, rppcert_report** out) {
  return guarded([&] {
    require_arg(sampler, "sampler");
    require_arg(out, "out");
    *out = new rppcert_report{validate_coverage_beta(make_sampler(sampler), n, alpha, trials, seed), {}};
  });
}

rppcert_status rppcert_validate_erpp(const rppcert_oracle* o, size_t points, size_t j_mc, uint64_t seed,
                                     rppcert_report** out) {
  return guarded([&] {
    require_arg(o, "oracle");
    require_arg(out, "out");
    if (!o->analytic) throw InvalidArgument("validate erpp: needs an analytic oracle");
    const auto grid = random_oracle_grid(*o->analytic, points, seed);
    *out = new rppcert_report{validate_erpp_oracle(*o->analytic, grid, j_mc, seed), {}};
  });
}

rppcert_status rppcert_validate_a1(const rppcert_oracle* o, const rppcert_dataset* d, size_t target,
                                   const rppcert_noise_options* n, double min_rate, int spv_mode,
                                   rppcert_report** out) {
  return guarded([&] {
    require_arg(o, "oracle");
    require_arg(d, "dataset");
    require_arg(n, "noise");
    require_arg(out, "out");
    std::vector<std::vector<double>> xs;
    for (const auto& s : d->data.samples) xs.push_back(s.features);
    *out = new rppcert_report{validate_a1(*o->oracle, xs, target, to_noise(*n), min_rate, to_mode(spv_mode)), {}};
  });
}

rppcert_status rppcert_validate_trend(const rppcert_trend_options* o, rppcert_report** out) {
  return guarded([&] {
    require_arg(o, "options");
    require_arg(out, "out");
    if (o->rho_count > 0) require_arg(o->rhos, "rhos");
    if (o->seed_count > 0) require_arg(o->seeds, "seeds");
    TrendConfig cfg;
    cfg.base.num_classes = o->num_classes;
    cfg.base.dim = o->dim;
    cfg.base.separation = o->separation;
    cfg.base.noise_std = o->noise_std;
    cfg.imbalance.kind = o->imbalance_kind == RPPCERT_IMBALANCE_LONGTAIL ? ImbalanceKind::LongTail
                                                                         : ImbalanceKind::Step;
    cfg.imbalance.mu = o->mu;
    cfg.imbalance.n_max = o->n_max;
    cfg.rhos.assign(o->rhos, o->rhos + o->rho_count);
    cfg.poison_count = o->poison_count;
    cfg.trigger = to_trigger(o->trigger, o->dim);
    cfg.policy = o->policy == RPPCERT_SOURCES_ANY ? SourcePolicy::Any : SourcePolicy::MinorityOnly;
    cfg.seeds.assign(o->seeds, o->seeds + o->seed_count);
    cfg.training = to_training(o->training);
    cfg.test_per_class = o->test_per_class;
    *out = new rppcert_report{imbalance_trend(cfg), {}};
  });
}

int rppcert_report_passed(const rppcert_report* r) { return r && r->report.passed ? 1 : 0; }
double rppcert_report_observed(const rppcert_report* r) { return r ? r->report.observed : 0.0; }
double rppcert_report_bound(const rppcert_report* r) { return r ? r->report.bound : 0.0; }

rppcert_status rppcert_report_metric(const rppcert_report* r, const char* key, double* out) {
  return guarded([&] {
    require_arg(r, "report");
    require_arg(key, "key");
    require_arg(out, "out");
    *out = r->report.metric(key);
  });
}

const char* rppcert_report_render(rppcert_report* r, int format) {
  if (!r) return "";
  r->rendered = format == RPPCERT_FORMAT_CSV ? report_to_csv(r->report) : report_to_json(r->report);
  return r->rendered.c_str();
}

rppcert_status rppcert_report_save(const rppcert_report* r, const char* path, int format) {
  return guarded([&] {
    require_arg(r, "report");
    require_arg(path, "path");
    io::write_atomic(path, format == RPPCERT_FORMAT_CSV ? report_to_csv(r->report) : report_to_json(r->report));
  });
}

void rppcert_report_free(rppcert_report* r) { delete r; }

}  // extern "C"
