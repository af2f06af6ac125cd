#include "ecgsal/ecgsal.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "ecgsal/beatset.hpp"
#include "ecgsal/error.hpp"
#include "ecgsal/model.hpp"
#include "ecgsal/parallel.hpp"
#include "ecgsal/pipeline.hpp"
#include "ecgsal/record_io.hpp"
#include "ecgsal/saliency.hpp"

struct ecgsal_record {
  ecgsal::record_io::EcgRecord record;
};

struct ecgsal_model {
  ecgsal::models::TrainedModel model;
  std::string arch;
};

struct ecgsal_config {
  ecgsal::pipeline::KeyValues file_entries;
  ecgsal::pipeline::KeyValues overrides;

  ecgsal::pipeline::KeyValues merged() const {
    auto m = file_entries;
    for (const auto& [k, v] : overrides) m[k] = v;
    return m;
  }
};

namespace {

thread_local std::string g_last_error;

ecgsal_status set_error(ecgsal_status s, const std::string& message) {
  g_last_error = message;
  return s;
}

template <typename F>
ecgsal_status guarded(F&& fn) {
  try {
    g_last_error.clear();
    fn();
    return ECGSAL_OK;
  } catch (const ecgsal::Error& e) {
    return set_error(static_cast<ecgsal_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(ECGSAL_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(ECGSAL_INTERNAL, e.what());
  } catch (...) {
    return set_error(ECGSAL_INTERNAL, "unknown exception");
  }
}

void require_arg(bool ok, const char* what) {
  if (!ok) ecgsal::fail(ecgsal::ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ecgsal::models::Mat input_batch(const float* inputs, std::size_t n) {
  ecgsal::models::Mat x(static_cast<Eigen::Index>(ecgsal::beatset::kVectorLength), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < ecgsal::beatset::kVectorLength; ++i) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = inputs[j * ecgsal::beatset::kVectorLength + i];
    }
  }
  return x;
}

}  // namespace

extern "C" {

const char* ecgsal_version(void) { return ecgsal::pipeline::kToolVersion; }

const char* ecgsal_last_error(void) { return g_last_error.c_str(); }

const char* ecgsal_status_name(ecgsal_status status) {
  static thread_local std::string name;
  name = std::string(ecgsal::error_code_name(static_cast<ecgsal::ErrorCode>(status)));
  return name.c_str();
}

int ecgsal_exit_code(ecgsal_status status) {
  switch (status) {
    case ECGSAL_OK: return 0;
    case ECGSAL_INVALID_CONFIG:
    case ECGSAL_CONFIG_CONFLICT:
    case ECGSAL_MISSING_ARTIFACT:
    case ECGSAL_UNTRAINED_MODEL:
    case ECGSAL_CORRUPT_CHECKPOINT: return 2;
    case ECGSAL_MALFORMED_HEADER:
    case ECGSAL_UNSUPPORTED_FORMAT:
    case ECGSAL_LEAD_COUNT_MISMATCH:
    case ECGSAL_TRUNCATED_SIGNAL:
    case ECGSAL_ZERO_GAIN:
    case ECGSAL_MALFORMED_ANNOTATION_STREAM:
    case ECGSAL_NON_BEAT_SYMBOL:
    case ECGSAL_NO_BEAT_ANNOTATIONS:
    case ECGSAL_EMPTY_SEGMENT:
    case ECGSAL_BEAT_TOO_LONG:
    case ECGSAL_TOO_FEW_BEATS:
    case ECGSAL_UNKNOWN_RECORD_ID:
    case ECGSAL_EMPTY_CLASS:
    case ECGSAL_LENGTH_MISMATCH:
    case ECGSAL_EMPTY_MATRIX:
    case ECGSAL_MISSING_RECORDS:
    case ECGSAL_IO: return 3;
    case ECGSAL_DIVERGED_TRAINING: return 4;
    default: return 1;
  }
}

void ecgsal_set_threads(unsigned n) { ecgsal::set_thread_count(n); }

void ecgsal_string_free(char* s) { std::free(s); }

const char* ecgsal_class_key(int class_index) {
  if (class_index < 0 || class_index >= static_cast<int>(ecgsal::kNumClasses)) return nullptr;
  return ecgsal::class_key(ecgsal::kAllClasses[static_cast<std::size_t>(class_index)]).data();
}

ecgsal_status ecgsal_record_load(const char* dir, const char* record_id, ecgsal_record** out) {
  return guarded([&] {
    require_arg(dir && record_id && out, "null argument");
    *out = nullptr;
    auto* r = new ecgsal_record{ecgsal::record_io::load_record(dir, record_id)};
    *out = r;
  });
}

void ecgsal_record_free(ecgsal_record* record) { delete record; }

size_t ecgsal_record_num_samples(const ecgsal_record* record) {
  return record ? record->record.header.n_samples : 0;
}

double ecgsal_record_sampling_frequency(const ecgsal_record* record) { return record ? record->record.header.fs : 0.0; }

size_t ecgsal_record_num_annotations(const ecgsal_record* record) {
  return record ? record->record.annotations.size() : 0;
}

ecgsal_status ecgsal_record_signal(const ecgsal_record* record, int lead, const double** data, size_t* length) {
  return guarded([&] {
    require_arg(record && data && length, "null argument");
    require_arg(lead == 0 || lead == 1, "lead must be 0 or 1");
    const auto& s = record->record.signal[static_cast<std::size_t>(lead)];
    *data = s.data();
    *length = s.size();
  });
}

ecgsal_status ecgsal_record_to_json(const ecgsal_record* record, char** json) {
  return guarded([&] {
    require_arg(record && json, "null argument");
    *json = dup_string(ecgsal::record_io::record_to_json(record->record).dump());
  });
}

ecgsal_status ecgsal_record_beats(const ecgsal_record* record, float* vectors, int* labels, size_t capacity,
                                  size_t* count) {
  return guarded([&] {
    require_arg(record && count, "null argument");
    ecgsal::beatset::BeatSet set;
    ecgsal::beatset::append_record(set, record->record);
    *count = set.vectors.size();
    if (!vectors) return;
    if (capacity < set.vectors.size()) ecgsal::fail(ecgsal::ErrorCode::InvalidArgument, "capacity too small");
    for (std::size_t i = 0; i < set.vectors.size(); ++i) {
      std::memcpy(vectors + i * ecgsal::beatset::kVectorLength, set.vectors[i].values.data(),
                  sizeof(float) * ecgsal::beatset::kVectorLength);
      if (labels) labels[i] = static_cast<int>(ecgsal::index_of(set.vectors[i].label));
    }
  });
}

ecgsal_status ecgsal_model_create(const char* arch, uint64_t seed, ecgsal_model** out) {
  return guarded([&] {
    require_arg(arch && out, "null argument");
    *out = nullptr;
    const std::string tag(arch);
    ecgsal::models::Architecture a;
    if (tag == "cnn") {
      a = ecgsal::models::CnnConfig{};
    } else if (tag == "lstm") {
      a = ecgsal::models::LstmConfig{};
    } else {
      ecgsal::fail(ecgsal::ErrorCode::InvalidConfig, "unknown architecture '" + tag + "'");
    }
    *out = new ecgsal_model{ecgsal::models::make_model(a, seed), tag};
  });
}

ecgsal_status ecgsal_model_load(const char* path, ecgsal_model** out) {
  return guarded([&] {
    require_arg(path && out, "null argument");
    *out = nullptr;
    auto m = ecgsal::models::read_checkpoint(path);
    std::string tag = m.tag();
    *out = new ecgsal_model{std::move(m), std::move(tag)};
  });
}

ecgsal_status ecgsal_model_save(const ecgsal_model* model, const char* path) {
  return guarded([&] {
    require_arg(model && path, "null argument");
    ecgsal::models::write_checkpoint(path, model->model);
  });
}

void ecgsal_model_free(ecgsal_model* model) { delete model; }

const char* ecgsal_model_arch(const ecgsal_model* model) { return model ? model->arch.c_str() : nullptr; }

int ecgsal_model_is_trained(const ecgsal_model* model) { return model && model->model.trained() ? 1 : 0; }

ecgsal_status ecgsal_model_predict(const ecgsal_model* model, const float* inputs, size_t n, double* probs) {
  return guarded([&] {
    require_arg(model && (n == 0 || (inputs && probs)), "null argument");
    if (n == 0) return;
    const auto p = ecgsal::models::predict_proba(model->model, input_batch(inputs, n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < ecgsal::kNumClasses; ++c) {
        probs[i * ecgsal::kNumClasses + c] = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      }
    }
  });
}

ecgsal_status ecgsal_model_saliency(const ecgsal_model* model, const float* input, int target, int true_class,
                                    double* out, int* target_class) {
  return guarded([&] {
    require_arg(model && input && out, "null argument");
    require_arg(target == ECGSAL_TARGET_PREDICTED || target == ECGSAL_TARGET_TRUE, "unknown saliency target");
    ecgsal::beatset::BeatVector beat;
    std::memcpy(beat.values.data(), input, sizeof(float) * ecgsal::beatset::kVectorLength);
    if (target == ECGSAL_TARGET_TRUE) {
      require_arg(true_class >= 0 && true_class < static_cast<int>(ecgsal::kNumClasses), "true_class out of range");
      beat.label = ecgsal::kAllClasses[static_cast<std::size_t>(true_class)];
    }
    const auto map = ecgsal::saliency::input_saliency(
        model->model, beat,
        target == ECGSAL_TARGET_TRUE ? ecgsal::saliency::Target::TrueClass : ecgsal::saliency::Target::PredictedClass);
    std::memcpy(out, map.values.data(), sizeof(double) * map.values.size());
    if (target_class) *target_class = static_cast<int>(ecgsal::index_of(map.target_class));
  });
}

ecgsal_status ecgsal_config_create(ecgsal_config** out) {
  return guarded([&] {
    require_arg(out != nullptr, "null argument");
    *out = new ecgsal_config{};
  });
}

void ecgsal_config_free(ecgsal_config* config) { delete config; }

ecgsal_status ecgsal_config_load_file(ecgsal_config* config, const char* path) {
  return guarded([&] {
    require_arg(config && path, "null argument");
    const auto bytes = ecgsal::record_io::read_file_bytes(path);
    config->file_entries = ecgsal::models::parse_key_values(std::string(bytes.begin(), bytes.end()));
  });
}

ecgsal_status ecgsal_config_set(ecgsal_config* config, const char* key, const char* value) {
  return guarded([&] {
    require_arg(config && key && value, "null argument");
    config->overrides[key] = value;
  });
}

ecgsal_status ecgsal_config_to_json(const ecgsal_config* config, char** json) {
  return guarded([&] {
    require_arg(config && json, "null argument");
    *json = dup_string(ecgsal::pipeline::config_to_json(ecgsal::pipeline::resolve_config(config->merged())).dump(2));
  });
}

ecgsal_status ecgsal_run(const char* command, const ecgsal_config* config, ecgsal_log_fn log, void* user,
                         char** summary) {
  return guarded([&] {
    require_arg(command && config, "null argument");
    if (summary) *summary = nullptr;
    const auto cfg = ecgsal::pipeline::resolve_config(config->merged());
    ecgsal::set_thread_count(cfg.threads);
    ecgsal::pipeline::Logger logger;
    if (log) logger = [log, user](const std::string& line) { log(line.c_str(), user); };
    const std::string cmd(command);
    ecgsal::pipeline::CommandResult result;
    if (cmd == "ingest") {
      result = ecgsal::pipeline::cmd_ingest(cfg, logger);
    } else if (cmd == "split") {
      result = ecgsal::pipeline::cmd_split(cfg, logger);
    } else if (cmd == "train") {
      result = ecgsal::pipeline::cmd_train(cfg, logger);
    } else if (cmd == "eval") {
      result = ecgsal::pipeline::cmd_eval(cfg, logger);
    } else if (cmd == "explain") {
      result = ecgsal::pipeline::cmd_explain(cfg, logger);
    } else if (cmd == "report") {
      result = ecgsal::pipeline::cmd_report(cfg, logger);
    } else {
      ecgsal::fail(ecgsal::ErrorCode::InvalidArgument, "unknown command '" + cmd + "'");
    }
    if (summary) *summary = dup_string(result.summary);
  });
}

}  // extern "C"
