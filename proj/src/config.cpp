#include "ddss/config.hpp"

#include <cmath>
#include <sstream>

#include "ddss/csv.hpp"
#include "ddss/errors.hpp"
#include "ddss/tensor.hpp"

namespace ddss {

namespace {

// reads one section, erasing consumed keys so leftovers can be reported
struct SectionReader {
  std::string name;
  TomlSection sec;

  TomlValue take(const char* key, bool* found) {
    auto it = sec.find(key);
    if (it == sec.end()) {
      *found = false;
      return {};
    }
    TomlValue v = std::move(it->second);
    sec.erase(it);
    *found = true;
    return v;
  }
  [[noreturn]] void bad(const char* key, const char* want) {
    throw ConfigError("[" + name + "] " + key + ": expected " + want);
  }
  void str(const char* key, std::string* out) {
    bool found;
    TomlValue v = take(key, &found);
    if (!found) return;
    if (v.kind != TomlValue::string) bad(key, "a string");
    *out = std::move(v.s);
  }
  void uint(const char* key, std::size_t* out) {
    bool found;
    TomlValue v = take(key, &found);
    if (!found) return;
    if (v.kind != TomlValue::integer || v.i < 0) bad(key, "a non-negative integer");
    *out = std::size_t(v.i);
  }
  void u64(const char* key, std::uint64_t* out) {
    bool found;
    TomlValue v = take(key, &found);
    if (!found) return;
    if (v.kind != TomlValue::integer || v.i < 0) bad(key, "a non-negative integer");
    *out = std::uint64_t(v.i);
  }
  void num(const char* key, double* out) {
    bool found;
    TomlValue v = take(key, &found);
    if (!found) return;
    if (v.kind != TomlValue::integer && v.kind != TomlValue::floating) bad(key, "a number");
    *out = v.as_number();
  }
  void flag(const char* key, bool* out) {
    bool found;
    TomlValue v = take(key, &found);
    if (!found) return;
    if (v.kind != TomlValue::boolean) bad(key, "true or false");
    *out = v.b;
  }
  void uint_list(const char* key, std::vector<std::size_t>* out) {
    bool found;
    TomlValue v = take(key, &found);
    if (!found) return;
    if (v.kind != TomlValue::array) bad(key, "an array of integers");
    out->clear();
    for (const auto& item : v.items) {
      if (item.kind != TomlValue::integer || item.i < 0) bad(key, "an array of integers");
      out->push_back(std::size_t(item.i));
    }
  }
  void u64_list(const char* key, std::vector<std::uint64_t>* out) {
    bool found;
    TomlValue v = take(key, &found);
    if (!found) return;
    if (v.kind != TomlValue::array) bad(key, "an array of integers");
    out->clear();
    for (const auto& item : v.items) {
      if (item.kind != TomlValue::integer || item.i < 0) bad(key, "an array of integers");
      out->push_back(std::uint64_t(item.i));
    }
  }
  void str_list(const char* key, std::vector<std::string>* out) {
    bool found;
    TomlValue v = take(key, &found);
    if (!found) return;
    if (v.kind != TomlValue::array) bad(key, "an array of strings");
    out->clear();
    for (const auto& item : v.items) {
      if (item.kind != TomlValue::string) bad(key, "an array of strings");
      out->push_back(item.s);
    }
  }
  void finish() {
    if (sec.empty()) return;
    std::string keys;
    for (const auto& [k, _] : sec) {
      if (!keys.empty()) keys += ", ";
      keys += k;
    }
    throw ConfigError("unknown key(s) in [" + name + "]: " + keys);
  }
};

void check_one_of(const char* where, const std::string& got,
                  std::initializer_list<const char*> allowed) {
  std::string opts;
  for (const char* a : allowed) {
    if (got == a) return;
    if (!opts.empty()) opts += ", ";
    opts += a;
  }
  throw ConfigError(std::string(where) + ": '" + got + "' is not one of {" + opts + "}");
}

void check_features(const char* where, const std::string& got) {
  if (got == "identity" || got == "rff" || got.rfind("file:", 0) == 0) return;
  throw ConfigError(std::string(where) + ": '" + got +
                    "' is not identity, rff, or file:PATH");
}

template <typename T>
std::string list_str(const std::vector<T>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(xs[i]);
  }
  return out + "]";
}

std::string list_str(const std::vector<std::string>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += toml_quote(xs[i]);
  }
  return out + "]";
}

}  // namespace

RunConfig RunConfig::from_toml(const TomlTable& table) {
  RunConfig c;
  TomlTable rest = table;
  auto section = [&](const char* name) {
    SectionReader r{name, {}};
    auto it = rest.find(name);
    if (it != rest.end()) {
      r.sec = std::move(it->second);
      rest.erase(it);
    }
    return r;
  };

  {
    SectionReader r = section("dataset");
    r.str("kind", &c.dataset.kind);
    r.str("path", &c.dataset.path);
    r.uint("n", &c.dataset.n);
    r.uint("n_val", &c.dataset.n_val);
    r.num("radius", &c.dataset.radius);
    r.num("sigma", &c.dataset.sigma);
    r.u64("seed", &c.dataset.seed);
    r.finish();
  }
  {
    SectionReader r = section("schedule");
    r.str("kind", &c.schedule.kind);
    r.uint("T", &c.schedule.T);
    r.num("logsnr_min", &c.schedule.logsnr_min);
    r.num("logsnr_max", &c.schedule.logsnr_max);
    r.num("beta_min", &c.schedule.beta_min);
    r.num("beta_max", &c.schedule.beta_max);
    r.finish();
  }
  {
    SectionReader r = section("model");
    r.uint("width", &c.model.width);
    r.uint("emb_dim", &c.model.emb_dim);
    r.uint("blocks", &c.model.blocks);
    r.finish();
  }
  {
    SectionReader r = section("train");
    r.num("lr", &c.train.lr);
    r.uint("batch", &c.train.batch);
    r.uint("steps", &c.train.steps);
    r.str("weighting", &c.train.weighting);
    r.num("ema", &c.train.ema);
    r.u64("seed", &c.train.seed);
    r.finish();
  }
  {
    SectionReader r = section("search");
    r.str("family", &c.search.family);
    r.flag("time", &c.search.time);
    r.uint("K", &c.search.K);
    r.uint("n", &c.search.n);
    r.uint("steps", &c.search.steps);
    r.num("lr", &c.search.lr);
    r.str("kernel", &c.search.kernel);
    r.str("features", &c.search.features);
    r.uint("rff_dim", &c.search.rff_dim);
    r.str("stride", &c.search.stride);
    r.u64("seed", &c.search.seed);
    r.flag("checkpoint", &c.search.checkpoint);
    r.num("off_diag", &c.search.off_diag);
    r.finish();
  }
  {
    SectionReader r = section("sample");
    r.str("sampler", &c.sample.sampler);
    r.str("params", &c.sample.params);
    r.uint("n", &c.sample.n);
    r.uint("K", &c.sample.K);
    r.num("eta", &c.sample.eta);
    r.str("stride", &c.sample.stride);
    r.u64("seed", &c.sample.seed);
    r.flag("trajectories", &c.sample.trajectories);
    r.finish();
  }
  {
    SectionReader r = section("eval");
    r.uint("n_eval", &c.eval.n_eval);
    r.u64_list("seeds", &c.eval.seeds);
    r.uint_list("Ks", &c.eval.Ks);
    r.str("kernel", &c.eval.kernel);
    r.str("features", &c.eval.features);
    r.uint("rff_dim", &c.eval.rff_dim);
    r.num("coverage_radius", &c.eval.coverage_radius);
    r.str_list("samplers", &c.eval.samplers);
    r.num("eta", &c.eval.eta);
    r.str_list("params", &c.eval.params);
    r.str("stride", &c.eval.stride);
    r.finish();
  }
  {
    SectionReader r = section("out");
    r.str("dir", &c.out.dir);
    r.finish();
  }

  if (!rest.empty()) {
    std::string names;
    for (const auto& [k, _] : rest) {
      if (!names.empty()) names += ", ";
      names += "[" + k + "]";
    }
    throw ConfigError("unknown config section(s): " + names);
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  return from_toml(parse_toml(read_text_file(path)));
}

void RunConfig::validate() const {
  check_one_of("[dataset] kind", dataset.kind, {"eight_gaussians", "csv"});
  if (dataset.kind == "csv" && dataset.path.empty())
    throw ConfigError("[dataset] path: required when kind = \"csv\"");
  if (dataset.n < 2) throw ConfigError("[dataset] n: need at least 2 points");
  if (dataset.n_val < 2) throw ConfigError("[dataset] n_val: need at least 2 points");
  if (!(dataset.sigma > 0.0)) throw ConfigError("[dataset] sigma: must be positive");
  check_one_of("[schedule] kind", schedule.kind, {"cosine_logsnr", "linear_beta"});
  if (schedule.T < 2) throw ConfigError("[schedule] T: must be >= 2");
  check_one_of("[train] weighting", train.weighting, {"simple", "max1snr"});
  if (!(train.lr > 0.0)) throw ConfigError("[train] lr: must be positive");
  if (train.batch == 0) throw ConfigError("[train] batch: must be positive");
  if (!(train.ema > 0.0 && train.ema < 1.0)) throw ConfigError("[train] ema: must be in (0,1)");
  check_one_of("[search] family", search.family, {"ddim", "vars", "ggdm", "ggdm_pred"});
  check_one_of("[search] kernel", search.kernel, {"linear", "cubic"});
  check_features("[search] features", search.features);
  check_one_of("[search] stride", search.stride, {"linear", "quadratic"});
  if (search.K == 0) throw ConfigError("[search] K: must be positive");
  if (search.n < 2) throw ConfigError("[search] n: must be >= 2");
  if (!(search.lr > 0.0)) throw ConfigError("[search] lr: must be positive");
  if (search.rff_dim < 2 || search.rff_dim % 2 != 0)
    throw ConfigError("[search] rff_dim: must be even and >= 2");
  check_one_of("[sample] sampler", sample.sampler, {"ddpm", "ddim", "searched"});
  if (sample.sampler == "searched" && sample.params.empty())
    throw ConfigError("[sample] params: required when sampler = \"searched\"");
  check_one_of("[sample] stride", sample.stride, {"linear", "quadratic"});
  if (sample.n == 0) throw ConfigError("[sample] n: must be positive");
  if (sample.K == 0) throw ConfigError("[sample] K: must be positive");
  if (!(sample.eta >= 0.0)) throw ConfigError("[sample] eta: must be >= 0");
  check_one_of("[eval] kernel", eval.kernel, {"linear", "cubic"});
  check_features("[eval] features", eval.features);
  check_one_of("[eval] stride", eval.stride, {"linear", "quadratic"});
  if (eval.rff_dim < 2 || eval.rff_dim % 2 != 0)
    throw ConfigError("[eval] rff_dim: must be even and >= 2");
  for (const auto& s : eval.samplers) check_one_of("[eval] samplers", s, {"ddpm", "ddim"});
  if (!(eval.eta >= 0.0)) throw ConfigError("[eval] eta: must be >= 0");
  if (out.dir.empty()) throw ConfigError("[out] dir: must not be empty");
}

std::string RunConfig::resolved_toml() const {
  std::ostringstream o;
  o << "[dataset]\n"
    << "kind = " << toml_quote(dataset.kind) << "\n"
    << "path = " << toml_quote(dataset.path) << "\n"
    << "n = " << dataset.n << "\n"
    << "n_val = " << dataset.n_val << "\n"
    << "radius = " << fmt_g17(dataset.radius) << "\n"
    << "sigma = " << fmt_g17(dataset.sigma) << "\n"
    << "seed = " << dataset.seed << "\n\n";
  o << "[schedule]\n"
    << "kind = " << toml_quote(schedule.kind) << "\n"
    << "T = " << schedule.T << "\n"
    << "logsnr_min = " << fmt_g17(schedule.logsnr_min) << "\n"
    << "logsnr_max = " << fmt_g17(schedule.logsnr_max) << "\n"
    << "beta_min = " << fmt_g17(schedule.beta_min) << "\n"
    << "beta_max = " << fmt_g17(schedule.beta_max) << "\n\n";
  o << "[model]\n"
    << "width = " << model.width << "\n"
    << "emb_dim = " << model.emb_dim << "\n"
    << "blocks = " << model.blocks << "\n\n";
  o << "[train]\n"
    << "lr = " << fmt_g17(train.lr) << "\n"
    << "batch = " << train.batch << "\n"
    << "steps = " << train.steps << "\n"
    << "weighting = " << toml_quote(train.weighting) << "\n"
    << "ema = " << fmt_g17(train.ema) << "\n"
    << "seed = " << train.seed << "\n\n";
  o << "[search]\n"
    << "family = " << toml_quote(search.family) << "\n"
    << "time = " << (search.time ? "true" : "false") << "\n"
    << "K = " << search.K << "\n"
    << "n = " << search.n << "\n"
    << "steps = " << search.steps << "\n"
    << "lr = " << fmt_g17(search.lr) << "\n"
    << "kernel = " << toml_quote(search.kernel) << "\n"
    << "features = " << toml_quote(search.features) << "\n"
    << "rff_dim = " << search.rff_dim << "\n"
    << "stride = " << toml_quote(search.stride) << "\n"
    << "seed = " << search.seed << "\n"
    << "checkpoint = " << (search.checkpoint ? "true" : "false") << "\n"
    << "off_diag = " << fmt_g17(search.off_diag) << "\n\n";
  o << "[sample]\n"
    << "sampler = " << toml_quote(sample.sampler) << "\n"
    << "params = " << toml_quote(sample.params) << "\n"
    << "n = " << sample.n << "\n"
    << "K = " << sample.K << "\n"
    << "eta = " << fmt_g17(sample.eta) << "\n"
    << "stride = " << toml_quote(sample.stride) << "\n"
    << "seed = " << sample.seed << "\n"
    << "trajectories = " << (sample.trajectories ? "true" : "false") << "\n\n";
  o << "[eval]\n"
    << "n_eval = " << eval.n_eval << "\n"
    << "seeds = " << list_str(eval.seeds) << "\n"
    << "Ks = " << list_str(eval.Ks) << "\n"
    << "kernel = " << toml_quote(eval.kernel) << "\n"
    << "features = " << toml_quote(eval.features) << "\n"
    << "rff_dim = " << eval.rff_dim << "\n"
    << "coverage_radius = " << fmt_g17(eval.coverage_radius) << "\n"
    << "samplers = " << list_str(eval.samplers) << "\n"
    << "eta = " << fmt_g17(eval.eta) << "\n"
    << "params = " << list_str(eval.params) << "\n"
    << "stride = " << toml_quote(eval.stride) << "\n\n";
  o << "[out]\n"
    << "dir = " << toml_quote(out.dir) << "\n";
  return o.str();
}

std::uint64_t RunConfig::config_hash() const {
  const std::string text = resolved_toml();
  return tg::fnv1a(text.data(), text.size());
}

}  // namespace ddss
