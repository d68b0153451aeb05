#include "cdmine/cdmine.h"

#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "cdmine/commands.hpp"
#include "cdmine/config.hpp"
#include "cdmine/decompose.hpp"
#include "cdmine/error.hpp"
#include "cdmine/orchestrator.hpp"
#include "cdmine/rule_engine.hpp"

struct cdm_context {
  std::optional<std::filesystem::path> config_path;
  std::vector<cdmine::Override> overrides;
  cdm_log_fn log_fn = nullptr;
  void* log_user = nullptr;
  std::string dump;

  cdmine::RunConfig effective() const {
    if (config_path) return cdmine::load_config(*config_path, overrides);
    return cdmine::default_config(std::filesystem::current_path(), overrides);
  }

  cdmine::Logger logger() const {
    if (!log_fn) return {};
    return [fn = log_fn, user = log_user](cdmine::LogLevel level, std::string_view message) {
      const std::string text(message);
      fn(user, static_cast<int>(level), text.c_str());
    };
  }
};

struct cdm_model {
  cdmine::ExtraTreesModel model;
};

struct cdm_state {
  cdmine::RiskState state;
};

namespace {

thread_local std::string last_error;

int set_error(int code, std::string message) {
  last_error = std::move(message);
  return code;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return CDM_OK;
  } catch (const cdmine::Error& e) {
    return set_error(static_cast<int>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(CDM_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(CDM_E_INTERNAL, e.what());
  } catch (...) {
    return set_error(CDM_E_INTERNAL, "unknown error");
  }
}

int null_argument(const char* name) { return set_error(CDM_E_INVALID_ARGUMENT, std::string(name) + " is NULL"); }

}  // namespace

extern "C" {

const char* cdm_version(void) { return CDMINE_VERSION; }

const char* cdm_status_name(int status) {
  if (status < 0 || status > static_cast<int>(cdmine::Errc::internal)) return "unknown";
  return cdmine::errc_name(static_cast<cdmine::Errc>(status));
}

const char* cdm_last_error(void) { return last_error.c_str(); }

int cdm_context_create(cdm_context** out) {
  if (!out) return null_argument("out");
  return guarded([&] { *out = new cdm_context(); });
}

void cdm_context_destroy(cdm_context* ctx) { delete ctx; }

int cdm_context_load_config(cdm_context* ctx, const char* path) {
  if (!ctx) return null_argument("ctx");
  if (!path) return null_argument("path");
  return guarded([&] {
    const std::filesystem::path p(path);
    cdmine::load_config(p, ctx->overrides);
    ctx->config_path = p;
  });
}

int cdm_context_set(cdm_context* ctx, const char* key, const char* value) {
  if (!ctx) return null_argument("ctx");
  if (!key) return null_argument("key");
  if (!value) return null_argument("value");
  return guarded([&] {
    ctx->overrides.emplace_back(key, value);
    try {
      ctx->effective();
    } catch (...) {
      ctx->overrides.pop_back();
      throw;
    }
  });
}

void cdm_context_set_log(cdm_context* ctx, cdm_log_fn fn, void* user) {
  if (!ctx) return;
  ctx->log_fn = fn;
  ctx->log_user = user;
}

int cdm_context_dump_config(cdm_context* ctx, const char** out) {
  if (!ctx) return null_argument("ctx");
  if (!out) return null_argument("out");
  return guarded([&] {
    ctx->dump = cdmine::dump_config(ctx->effective());
    *out = ctx->dump.c_str();
  });
}

int cdm_synth(cdm_context* ctx) {
  if (!ctx) return null_argument("ctx");
  return guarded([&] { cdmine::cmd_synth(ctx->effective(), ctx->logger()); });
}

int cdm_decompose(cdm_context* ctx) {
  if (!ctx) return null_argument("ctx");
  return guarded([&] { cdmine::cmd_decompose(ctx->effective(), ctx->logger()); });
}

int cdm_train(cdm_context* ctx) {
  if (!ctx) return null_argument("ctx");
  return guarded([&] { cdmine::cmd_train(ctx->effective(), ctx->logger()); });
}

int cdm_run(cdm_context* ctx, cdm_report_row* rows, size_t capacity, size_t* count) {
  if (!ctx) return null_argument("ctx");
  if (capacity > 0 && !rows) return null_argument("rows");
  return guarded([&] {
    const auto reports = cdmine::cmd_run(ctx->effective(), ctx->logger());
    if (count) *count = reports.size();
    for (size_t i = 0; i < reports.size() && i < capacity; ++i) {
      const auto& r = reports[i];
      rows[i] = {r.batch,           r.metrics.accuracy, r.metrics.precision, r.metrics.recall,
                 r.metrics.f_score, r.offline_seconds,  r.online_seconds};
    }
  });
}

int cdm_bench(cdm_context* ctx, double* slope, double* intercept, double* r2) {
  if (!ctx) return null_argument("ctx");
  return guarded([&] {
    const auto result = cdmine::cmd_bench(ctx->effective(), ctx->logger());
    if (slope) *slope = result.fit.slope;
    if (intercept) *intercept = result.fit.intercept;
    if (r2) *r2 = result.fit.r2;
  });
}

int cdm_model_load(const char* path, cdm_model** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  return guarded([&] {
    auto m = std::make_unique<cdm_model>(cdm_model{cdmine::ExtraTreesModel::load(std::filesystem::path(path))});
    *out = m.release();
  });
}

int cdm_model_save(const cdm_model* model, const char* path) {
  if (!model) return null_argument("model");
  if (!path) return null_argument("path");
  return guarded([&] { model->model.save(std::filesystem::path(path)); });
}

void cdm_model_free(cdm_model* model) { delete model; }

size_t cdm_model_feature_count(const cdm_model* model) { return model ? model->model.n_features() : 0; }

int cdm_model_importances(const cdm_model* model, double* out, size_t n) {
  if (!model) return null_argument("model");
  if (!out) return null_argument("out");
  const auto& imp = model->model.feature_importances();
  if (n != imp.size()) {
    return set_error(CDM_E_INVALID_ARGUMENT, "importances: buffer holds " + std::to_string(n) + " values, model has " +
                                                 std::to_string(imp.size()) + " features");
  }
  std::copy(imp.begin(), imp.end(), out);
  last_error.clear();
  return CDM_OK;
}

int cdm_model_predict(const cdm_model* model, const double* features, size_t n, double* probability) {
  if (!model) return null_argument("model");
  if (!features) return null_argument("features");
  if (!probability) return null_argument("probability");
  return guarded([&] { *probability = model->model.predict_proba(std::span<const double>(features, n)); });
}

int cdm_state_load(const char* path, cdm_state** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  return guarded([&] {
    auto s = std::make_unique<cdm_state>(cdm_state{cdmine::RiskState::load(std::filesystem::path(path))});
    *out = s.release();
  });
}

void cdm_state_free(cdm_state* state) { delete state; }

size_t cdm_state_count(const cdm_state* state) { return state ? state->state.size() : 0; }

int cdm_state_get(const cdm_state* state, int64_t account, cdm_risk_record* out) {
  if (!state) return null_argument("state");
  if (!out) return null_argument("out");
  return guarded([&] {
    const auto& r = state->state.get(account);
    *out = {r.account, r.r_offline, r.last_r_total, r.last_batch, r.last_ordinal};
  });
}

int cdm_r_online_score(const double* weights, const unsigned char* in_x, const unsigned char* in_y, size_t n,
                       double* out) {
  if (n > 0 && (!weights || !in_x || !in_y)) return null_argument("weights/in_x/in_y");
  if (!out) return null_argument("out");
  return guarded([&] {
    const std::unique_ptr<bool[]> x(new bool[n + 1]), y(new bool[n + 1]);
    for (size_t i = 0; i < n; ++i) {
      x[i] = in_x[i] != 0;
      y[i] = in_y[i] != 0;
    }
    *out = cdmine::r_online_score(std::span<const double>(weights, n), std::span<const bool>(x.get(), n),
                                  std::span<const bool>(y.get(), n));
  });
}

int cdm_combine(double r_online, double r_offline, double lambda, double* out) {
  if (!out) return null_argument("out");
  return guarded([&] { *out = cdmine::combine(r_online, r_offline, lambda); });
}

int cdm_rescale(double v, double min1, double max1, double min2, double max2, double* out) {
  if (!out) return null_argument("out");
  return guarded([&] { *out = cdmine::rescale(v, {min1, max1, min2, max2}); });
}

}  // extern "C"
