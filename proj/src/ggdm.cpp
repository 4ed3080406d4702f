#include "ddss/ggdm.hpp"

#include <cmath>

#include "ddss/errors.hpp"

namespace ddss {

Family family_from_string(const std::string& s) {
  if (s == "ddim") return Family::ddim;
  if (s == "vars") return Family::vars;
  if (s == "ggdm") return Family::ggdm;
  if (s == "ggdm_pred") return Family::ggdm_pred;
  throw ConfigError("unknown family '" + s + "' (expected ddim|vars|ggdm|ggdm_pred)");
}

const char* family_name(Family f) {
  switch (f) {
    case Family::ddim: return "ddim";
    case Family::vars: return "vars";
    case Family::ggdm: return "ggdm";
    case Family::ggdm_pred: return "ggdm_pred";
  }
  return "?";
}

std::size_t mu_table_len(std::size_t K) { return K < 2 ? 0 : K * (K + 1) / 2 - 1; }

std::size_t mu_row_offset(std::size_t K, std::size_t t) {
  // row t holds 1 + (K - t) entries; rows 1..t-1 precede it
  std::size_t off = 0;
  for (std::size_t r = 1; r < t; ++r) off += 1 + (K - r);
  return off;
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("logit: argument outside (0,1)");
  return std::log(p) - std::log1p(-p);
}

double softplus_inv(double y) {
  if (!(y > 0.0)) throw DomainError("softplus_inv: argument must be positive");
  return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

std::vector<std::string> SamplerParams::keys() const {
  std::vector<std::string> out;
  for (const auto& kv : raw) out.push_back(kv.first);  // std::map: already sorted
  return out;
}

void SamplerParams::validate(std::size_t T) const {
  if (K == 0) throw DomainError("sampler params: K must be positive");
  if (base_times.size() != K) throw DomainError("sampler params: base_times length != K");
  for (std::size_t i = 0; i < K; ++i) {
    if (base_times[i] <= 0.0 || base_times[i] > static_cast<double>(T))
      throw DomainError("sampler params: base time outside (0, T]");
    if (i && base_times[i] <= base_times[i - 1])
      throw DomainError("sampler params: base times must be strictly increasing");
  }
  auto want = [&](const char* key, std::size_t len) {
    auto it = raw.find(key);
    if (len == 0) {
      if (it != raw.end()) throw DomainError(std::string("sampler params: key '") + key +
                                             "' should be absent for K=" + std::to_string(K));
      return;
    }
    if (it == raw.end()) throw DomainError(std::string("sampler params: missing key '") + key + "'");
    if (it->second.size() != len)
      throw DomainError(std::string("sampler params: key '") + key + "' has length " +
                        std::to_string(it->second.size()) + ", expected " + std::to_string(len));
  };
  std::size_t expected = 0;
  auto count = [&](std::size_t len) { expected += len > 0 ? 1 : 0; };
  switch (family) {
    case Family::ggdm:
    case Family::ggdm_pred:
      want("mu", mu_table_len(K));
      count(mu_table_len(K));
      want("sigma", K - 1);
      count(K - 1);
      break;
    case Family::ddim:
      want("sigma", K - 1);
      count(K - 1);
      break;
    case Family::vars:
      want("vars", K - 1);
      count(K - 1);
      break;
  }
  if (family == Family::ggdm_pred) {
    want("pred_a", K);
    want("pred_b", K);
    expected += 2;
  }
  if (learn_time) {
    want("time", K - 1);
    count(K - 1);
  }
  if (raw.size() != expected) throw DomainError("sampler params: unexpected extra raw keys");
}

MarginalTable theorem1_marginals(const FactorTable& f) {
  const std::size_t K = f.K;
  if (K == 0 || f.mu0.size() != K + 1 || f.sigma.size() != K + 1 || f.mu.size() != K + 1)
    throw ShapeError("theorem1: factor table arrays must be sized K+1");
  for (std::size_t t = 1; t < K; ++t)
    if (f.mu[t].size() != K - t)
      throw ShapeError("theorem1: mu row " + std::to_string(t) + " has " +
                       std::to_string(f.mu[t].size()) + " entries, expected " +
                       std::to_string(K - t));
  MarginalTable m;
  m.K = K;
  m.coef.assign(K + 1, {});
  m.var.assign(K + 1, {});
  for (std::size_t t = 1; t <= K; ++t) {
    std::vector<double> a;
    double v;
    if (t == K) {
      a = {f.term_a};
      v = f.term_sigma * f.term_sigma;
    } else {
      a.push_back(f.mu0[t]);
      for (double x : f.mu[t]) a.push_back(x);
      v = f.sigma[t] * f.sigma[t];
    }
    m.coef[t].push_back(a);
    m.var[t].push_back(v);
    for (std::size_t i = 1; t + i <= K; ++i) {
      const std::size_t r = t + i;
      const double pivot = a[1];
      std::vector<double> na;
      na.reserve(a.size() - 1);
      na.push_back(pivot * (r == K ? f.term_a : f.mu0[r]) + a[0]);
      if (r < K)
        for (std::size_t j = 0; j < K - r; ++j) na.push_back(pivot * f.mu[r][j] + a[2 + j]);
      const double sr = r == K ? f.term_sigma : f.sigma[r];
      v = v + (pivot * sr) * (pivot * sr);
      a = std::move(na);
      m.coef[t].push_back(a);
      m.var[t].push_back(v);
    }
  }
  return m;
}

FactorTable ddim_embedding(const std::vector<double>& abar, const std::vector<double>& sigma) {
  const std::size_t K = abar.size();
  if (K == 0) throw ShapeError("ddim_embedding: empty schedule");
  if (sigma.size() + 1 != K) throw ShapeError("ddim_embedding: need K-1 sigmas");
  FactorTable f;
  f.K = K;
  f.mu0.assign(K + 1, 0.0);
  f.sigma.assign(K + 1, 0.0);
  f.mu.assign(K + 1, {});
  for (std::size_t t = 1; t < K; ++t) {
    const double rad = 1.0 - abar[t - 1] - sigma[t - 1] * sigma[t - 1];
    if (rad < 0.0)
      throw DomainError("ddim_embedding: sigma at step " + std::to_string(t) +
                        " exceeds sqrt(1 - alpha_bar)");
    const double mu_next = std::sqrt(rad) / std::sqrt(1.0 - abar[t]);
    f.mu[t].assign(K - t, 0.0);
    f.mu[t][0] = mu_next;
    f.mu0[t] = std::sqrt(abar[t - 1]) - mu_next * std::sqrt(abar[t]);
    f.sigma[t] = sigma[t - 1];
  }
  f.term_a = std::sqrt(abar[K - 1]);
  f.term_sigma = std::sqrt(1.0 - abar[K - 1]);
  return f;
}

FactorTable ddpm_subchain_factors(const std::vector<double>& abar) {
  const std::size_t K = abar.size();
  if (K == 0) throw ShapeError("ddpm_subchain_factors: empty schedule");
  FactorTable f;
  f.K = K;
  f.mu0.assign(K + 1, 0.0);
  f.sigma.assign(K + 1, 0.0);
  f.mu.assign(K + 1, {});
  for (std::size_t t = 1; t < K; ++t) {
    const double as = abar[t - 1], au = abar[t];
    const double step = au / as;  // alpha of the fused step
    f.mu[t].assign(K - t, 0.0);
    f.mu[t][0] = std::sqrt(step) * (1.0 - as) / (1.0 - au);
    f.mu0[t] = std::sqrt(as) * (1.0 - step) / (1.0 - au);
    f.sigma[t] = std::sqrt((1.0 - as) / (1.0 - au) * (1.0 - step));
  }
  f.term_a = std::sqrt(abar[K - 1]);
  f.term_sigma = std::sqrt(1.0 - abar[K - 1]);
  return f;
}

std::vector<double> vars_to_alpha_bar(const std::vector<double>& raw) {
  // run the exact transform the search uses so both agree bitwise
  tg::Tape tp;
  const std::size_t K = raw.size() + 1;
  tg::Value logits;
  if (raw.empty()) {
    logits = tp.constant(tg::Tensor::from({1}, {1.0}));
  } else {
    logits = tp.concat({tp.constant(tg::Tensor::from({raw.size()}, raw)),
                        tp.constant(tg::Tensor::from({1}, {1.0}))},
                       0);
  }
  tg::Value w = tp.cumsum(tp.softmax(logits), true);
  std::vector<double> out(K);
  for (std::size_t t = 0; t < K; ++t) out[t] = 1.0 - tp.val(w).at(t);
  return out;
}

namespace {

double raw_target(const std::string& what, double v) {
  if (!(v > 0.0 && v < 1.0))
    throw InitError("initialization target " + what + " = " + std::to_string(v) +
                    " falls outside (0,1)");
  return logit(v);
}

// invert softmax([raw;1]) = p: raw_i = 1 + ln(p_i / p_last)
std::vector<double> simplex_raw(const std::vector<double>& p) {
  for (double x : p)
    if (!(x > 0.0)) throw InitError("initialization simplex entry not positive");
  std::vector<double> raw(p.size() - 1);
  for (std::size_t i = 0; i + 1 < p.size(); ++i) raw[i] = 1.0 + std::log(p[i] / p.back());
  return raw;
}

}  // namespace

SamplerParams init_from_ddpm(const NoiseSchedule& s, std::size_t K, const std::string& stride_kind,
                             Family family, bool learn_time, double off_diag) {
  const auto stride = stride_timesteps(s.T, K, stride_kind);
  SamplerParams p;
  p.family = family;
  p.learn_time = learn_time;
  p.K = K;
  p.schedule_fingerprint = s.fingerprint();
  p.base_times.resize(K);
  std::vector<double> ab(K + 1, 0.0);
  for (std::size_t t = 1; t <= K; ++t) {
    p.base_times[t - 1] = static_cast<double>(stride[t - 1]);
    ab[t] = s.alpha_bar_at(stride[t - 1]);
  }
  FactorTable f = ddpm_subchain_factors(std::vector<double>(ab.begin() + 1, ab.end()));

  switch (family) {
    case Family::ggdm:
    case Family::ggdm_pred: {
      if (K >= 2) {
        std::vector<double> rmu(mu_table_len(K));
        std::vector<double> rsig(K - 1);
        const double off_raw = off_diag > 0.0 ? logit(off_diag) : -750.0;  // sigmoid -> exact 0
        for (std::size_t t = 1; t < K; ++t) {
          const std::size_t off = mu_row_offset(K, t);
          rmu[off] = raw_target("mu_{" + std::to_string(t) + ",0}", f.mu0[t]);
          rmu[off + 1] =
              raw_target("mu_{" + std::to_string(t) + "," + std::to_string(t + 1) + "}", f.mu[t][0]);
          for (std::size_t j = 1; j < K - t; ++j) rmu[off + 1 + j] = off_raw;
          rsig[t - 1] = raw_target("sigma_" + std::to_string(t), f.sigma[t]);
        }
        p.raw["mu"] = std::move(rmu);
        p.raw["sigma"] = std::move(rsig);
      }
      break;
    }
    case Family::ddim: {
      if (K >= 2) {
        std::vector<double> rsig(K - 1);
        for (std::size_t t = 1; t < K; ++t)
          rsig[t - 1] = raw_target("sigma_" + std::to_string(t) + "/bound",
                                   f.sigma[t] / std::sqrt(1.0 - ab[t]));
        p.raw["sigma"] = std::move(rsig);
      }
      break;
    }
    case Family::vars: {
      if (K >= 2) {
        // increments of the marginal variances 1-ab, renormalized so the
        // simplex sums to exactly one (the family pins w_K = 1)
        std::vector<double> inc(K);
        double prev = 0.0;
        for (std::size_t t = 1; t <= K; ++t) {
          const double w = 1.0 - ab[t];
          inc[t - 1] = (w - prev) / (1.0 - ab[K]);
          prev = w;
        }
        p.raw["vars"] = simplex_raw(inc);
      }
      break;
    }
  }
  if (family == Family::ggdm_pred) {
    std::vector<double> ra(K), rb(K);
    for (std::size_t t = 1; t <= K; ++t) {
      ra[t - 1] = softplus_inv(1.0 / std::sqrt(ab[t]) - 1.0);
      rb[t - 1] = softplus_inv(std::sqrt(1.0 - ab[t]) / std::sqrt(ab[t]));
    }
    p.raw["pred_a"] = std::move(ra);
    p.raw["pred_b"] = std::move(rb);
  }
  if (learn_time && K >= 2) {
    std::vector<double> inc(K);
    double prev = 0.0;
    for (std::size_t t = 1; t <= K; ++t) {
      inc[t - 1] = (p.base_times[t - 1] - prev) / static_cast<double>(s.T);
      prev = p.base_times[t - 1];
    }
    p.raw["time"] = simplex_raw(inc);
  }
  p.validate(s.T);
  return p;
}

std::vector<tg::Value> register_params(tg::Tape& tp, const SamplerParams& p) {
  std::vector<tg::Value> out;
  for (const auto& k : p.keys()) {
    const auto& v = p.raw.at(k);
    out.push_back(tp.leaf(tg::Tensor::from({v.size()}, v), true));
  }
  return out;
}

namespace {

void theorem1_tape(tg::Tape& tp, SamplerTable& tbl) {
  const std::size_t K = tbl.K;
  tbl.marg_a.assign(K + 1, {});
  tbl.marg_v.assign(K + 1, {});
  for (std::size_t t = 1; t <= K; ++t) {
    std::vector<tg::Value> a;
    tg::Value v;
    if (t == K) {
      a = {tbl.term_a};
      v = tp.square(tbl.term_sigma);
    } else {
      a.push_back(tbl.mu0[t]);
      for (tg::Value m : tbl.mu[t]) a.push_back(m);
      v = tp.square(tbl.sigma[t]);
    }
    for (std::size_t i = 1; t + i <= K; ++i) {
      const std::size_t r = t + i;
      tg::Value pivot = a[1];
      std::vector<tg::Value> na;
      na.push_back(tp.add(tp.mul(pivot, r == K ? tbl.term_a : tbl.mu0[r]), a[0]));
      if (r < K)
        for (std::size_t j = 0; j < K - r; ++j)
          na.push_back(tp.add(tp.mul(pivot, tbl.mu[r][j]), a[2 + j]));
      v = tp.add(v, tp.square(tp.mul(pivot, r == K ? tbl.term_sigma : tbl.sigma[r])));
      a = std::move(na);
    }
    tbl.marg_a[t] = a[0];
    tbl.marg_v[t] = v;
  }
}

}  // namespace

SamplerTable build_sampler_table(tg::Tape& tp, const SamplerParams& p,
                                 const std::vector<tg::Value>& leaves, const NoiseSchedule& s) {
  p.validate(s.T);
  const std::size_t K = p.K;
  const auto ks = p.keys();
  if (leaves.size() != ks.size()) throw ShapeError("build_sampler_table: leaf count mismatch");
  std::map<std::string, tg::Value> L;
  for (std::size_t i = 0; i < ks.size(); ++i) L[ks[i]] = leaves[i];

  SamplerTable tbl;
  tbl.K = K;
  tbl.family = p.family;
  tbl.learn_time = p.learn_time;
  tbl.tau.assign(K + 1, 0.0);
  tbl.tau_v.assign(K + 1, tg::Value{});
  tbl.mu0.assign(K + 1, tg::Value{});
  tbl.mu.assign(K + 1, {});
  tbl.sigma.assign(K + 1, tg::Value{});

  tg::Value one = tp.constant(1.0);

  // lattice times
  if (p.learn_time && K >= 2) {
    tg::Value logits = tp.concat({L.at("time"), tp.constant(tg::Tensor::from({1}, {1.0}))}, 0);
    tg::Value times = tp.scale(tp.cumsum(tp.softmax(logits), true), static_cast<double>(s.T));
    for (std::size_t t = 1; t <= K; ++t) {
      tbl.tau_v[t] = tp.slice(times, 0, t - 1, 1);
      tbl.tau[t] = tp.val(tbl.tau_v[t]).item();
    }
  } else {
    for (std::size_t t = 1; t <= K; ++t) tbl.tau[t] = p.base_times[t - 1];
    if (p.learn_time)  // K == 1: the single time is pinned to T
      tbl.tau_v[1] = tp.constant(static_cast<double>(s.T));
  }

  // base-schedule signal levels at the lattice times
  std::vector<tg::Value> ab(K + 1);
  for (std::size_t t = 1; t <= K; ++t) {
    if (p.learn_time)
      ab[t] = tp.sigmoid(tp.schedule_logsnr(tbl.tau_v[t], s.logsnr));
    else
      ab[t] = tp.constant(s.alpha_bar_at(static_cast<std::size_t>(std::llround(tbl.tau[t]))));
  }
  tbl.term_a = tp.sqrt(ab[K]);
  tbl.term_sigma = tp.sqrt(tp.sub(one, ab[K]));

  switch (p.family) {
    case Family::ggdm:
    case Family::ggdm_pred: {
      if (K >= 2) {
        tg::Value rmu = L.at("mu"), rsig = L.at("sigma");
        for (std::size_t t = 1; t < K; ++t) {
          const std::size_t off = mu_row_offset(K, t);
          tbl.mu0[t] = tp.sigmoid(tp.slice(rmu, 0, off, 1));
          for (std::size_t j = 0; j < K - t; ++j)
            tbl.mu[t].push_back(tp.sigmoid(tp.slice(rmu, 0, off + 1 + j, 1)));
          tbl.sigma[t] = tp.sigmoid(tp.slice(rsig, 0, t - 1, 1));
        }
      }
      break;
    }
    case Family::ddim: {
      for (std::size_t t = 1; t < K; ++t) {
        tg::Value bound = tp.sqrt(tp.sub(one, ab[t]));
        tg::Value sig = tp.mul(bound, tp.sigmoid(tp.slice(L.at("sigma"), 0, t - 1, 1)));
        tg::Value mu_next = tp.div(tp.sqrt(tp.sub(tp.sub(one, ab[t]), tp.square(sig))),
                                   tp.sqrt(tp.sub(one, ab[t + 1])));
        tbl.mu[t].push_back(mu_next);
        for (std::size_t j = 1; j < K - t; ++j) tbl.mu[t].push_back(tp.constant(0.0));
        tbl.mu0[t] = tp.sub(tp.sqrt(ab[t]), tp.mul(mu_next, tp.sqrt(ab[t + 1])));
        tbl.sigma[t] = sig;
      }
      break;
    }
    case Family::vars: {
      if (K >= 2) {
        tg::Value logits =
            tp.concat({L.at("vars"), tp.constant(tg::Tensor::from({1}, {1.0}))}, 0);
        tg::Value w = tp.cumsum(tp.softmax(logits), true);
        std::vector<tg::Value> abp(K + 1);  // implied alpha_bar'; abp[K] = 0 exactly
        for (std::size_t t = 1; t <= K; ++t) abp[t] = tp.sub(one, tp.slice(w, 0, t - 1, 1));
        for (std::size_t t = 1; t + 1 < K; ++t) {
          tg::Value step = tp.div(abp[t + 1], abp[t]);
          tg::Value ratio = tp.div(tp.sub(one, abp[t]), tp.sub(one, abp[t + 1]));
          tbl.mu[t].push_back(tp.mul(tp.sqrt(step), ratio));
          for (std::size_t j = 1; j < K - t; ++j) tbl.mu[t].push_back(tp.constant(0.0));
          tbl.mu0[t] = tp.div(tp.mul(tp.sqrt(abp[t]), tp.sub(one, step)), tp.sub(one, abp[t + 1]));
          tbl.sigma[t] = tp.sqrt(tp.mul(ratio, tp.sub(one, step)));
        }
        // last transition: alpha'_K = 0 exactly, so the x_K column vanishes
        // and the factor collapses to q(x_{K-1}|x_0); folding the zero by
        // hand keeps sqrt out of the 0-gradient trap
        const std::size_t t = K - 1;
        tbl.mu[t].push_back(tp.constant(0.0));
        tbl.mu0[t] = tp.sqrt(abp[t]);
        tbl.sigma[t] = tp.sqrt(tp.sub(one, abp[t]));
      }
      break;
    }
  }

  theorem1_tape(tp, tbl);

  tbl.pred_a.assign(K + 1, tg::Value{});
  tbl.pred_b.assign(K + 1, tg::Value{});
  if (p.family == Family::ggdm_pred) {
    tg::Value ra = L.at("pred_a"), rb = L.at("pred_b");
    for (std::size_t t = 1; t <= K; ++t) {
      tbl.pred_a[t] = tp.add(one, tp.softplus(tp.slice(ra, 0, t - 1, 1)));
      tbl.pred_b[t] = tp.softplus(tp.slice(rb, 0, t - 1, 1));
    }
  } else {
    for (std::size_t t = 1; t <= K; ++t) {
      if (std::abs(tp.val(tbl.marg_a[t]).item()) < 1e-8)
        throw SingularityError("predict_x0: marginal coefficient at step " + std::to_string(t) +
                               " is below 1e-8");
      tbl.pred_a[t] = tp.div(one, tbl.marg_a[t]);
      tbl.pred_b[t] = tp.div(tp.sqrt(tbl.marg_v[t]), tbl.marg_a[t]);
    }
  }
  return tbl;
}

tg::Value predict_x0(tg::Tape& tp, tg::Value x, tg::Value eps, const SamplerTable& tbl,
                     std::size_t t) {
  if (t == 0 || t > tbl.K) throw DomainError("predict_x0: step index out of range");
  if (!tbl.pred_a[t].defined()) throw SingularityError("predict_x0: no inversion at this step");
  return tp.sub(tp.scale(x, tbl.pred_a[t]), tp.scale(eps, tbl.pred_b[t]));
}

tg::Tensor predict_x0_plain(const tg::Tensor& x, const tg::Tensor& eps, double marg_a,
                            double marg_v) {
  if (std::abs(marg_a) < 1e-8)
    throw SingularityError("predict_x0: marginal coefficient below 1e-8");
  if (!x.same_shape(eps)) throw ShapeError("predict_x0: x/eps shape mismatch");
  const double pa = 1.0 / marg_a, pb = std::sqrt(marg_v) / marg_a;
  tg::Tensor out = tg::Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.mut()[i] = x.data()[i] * pa - eps.data()[i] * pb;
  return out;
}

}  // namespace ddss
