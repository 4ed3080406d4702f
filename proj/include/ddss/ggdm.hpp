#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ddss/schedule.hpp"
#include "ddss/tape.hpp"

namespace ddss {

enum class Family { ddim, vars, ggdm, ggdm_pred };
Family family_from_string(const std::string& s);
const char* family_name(Family f);

// Raw (pre-transform) search variables. Keys present depend on family:
//   ggdm, ggdm_pred : "mu" (rows t=1..K-1 flattened as [u=0, u=t+1..K]),
//                     "sigma" (K-1)
//   ddim            : "sigma" (K-1)
//   vars            : "vars"  (K-1)
//   ggdm_pred extra : "pred_a" (K), "pred_b" (K)
//   learn_time extra: "time" (K-1)
// Zero-length vectors are omitted entirely (K=1 has nothing to learn
// except pred/time-free terminals).
struct SamplerParams {
  Family family = Family::ggdm;
  bool learn_time = false;
  std::size_t K = 0;
  std::vector<double> base_times;  // stride tau_1..tau_K, fixed unless learn_time
  std::map<std::string, std::vector<double>> raw;
  std::uint64_t schedule_fingerprint = 0;

  std::vector<std::string> keys() const;  // sorted raw keys
  void validate(std::size_t T) const;     // shape/length checks per family
};

std::size_t mu_row_offset(std::size_t K, std::size_t t);  // start of row t in "mu"
std::size_t mu_table_len(std::size_t K);

double logit(double p);         // inverse sigmoid; DomainError outside (0,1)
double softplus_inv(double y);  // log(expm1(y)); DomainError for y <= 0

// Plain factor table: q(x_t | x_{t+1..K}, x_0) for t=1..K-1 with mean
// mu0[t] x_0 + sum_u mu[t][u] x_u and stddev sigma[t], plus the terminal
// factor q(x_K|x_0) = N(term_a x_0, term_sigma^2 I). Index 0 unused.
struct FactorTable {
  std::size_t K = 0;
  std::vector<double> mu0;              // [K+1]
  std::vector<std::vector<double>> mu;  // mu[t][j] = mu_{t, t+1+j}
  std::vector<double> sigma;            // [K+1]
  double term_a = 0.0, term_sigma = 0.0;
};

// Every recursion level is retained so tests can inspect intermediate rows:
// coef[t][i-1] = [a_{t,0}, a_{t,t+i}, ..., a_{t,K}] and var[t][i-1] = v_t^(i).
struct MarginalTable {
  std::size_t K = 0;
  std::vector<std::vector<std::vector<double>>> coef;
  std::vector<std::vector<double>> var;
  double marginal_a(std::size_t t) const { return coef[t].back()[0]; }
  double marginal_v(std::size_t t) const { return var[t].back(); }
};

MarginalTable theorem1_marginals(const FactorTable& f);

// DDIM posteriors rewritten as sparse lattice factors. abar[t-1] is the base
// alpha_bar at kept time tau_t; sigma has K-1 entries. Throws DomainError
// when some sigma_t^2 exceeds 1 - abar_t.
FactorTable ddim_embedding(const std::vector<double>& abar, const std::vector<double>& sigma);

// DDPM ancestral posterior on the kept-times subchain.
FactorTable ddpm_subchain_factors(const std::vector<double>& abar);

// implied marginal alpha' for VARS: 1 - cumsum(softmax([raw; 1]))
std::vector<double> vars_to_alpha_bar(const std::vector<double>& raw);

// Raw variables whose transformed table reproduces the K-substep DDPM
// sampler. off_diag seeds the unused mu entries; pass 0 for an exact match
// (the raw value saturates sigmoid to exactly zero).
SamplerParams init_from_ddpm(const NoiseSchedule& s, std::size_t K, const std::string& stride_kind,
                             Family family, bool learn_time, double off_diag = 1e-4);

// ---- tape-side transformed table -------------------------------------------

struct SamplerTable {
  std::size_t K = 0;
  Family family = Family::ggdm;
  bool learn_time = false;
  std::vector<double> tau;                 // query times (forward values), t=1..K
  std::vector<tg::Value> tau_v;            // defined when learn_time
  std::vector<tg::Value> mu0;              // t=1..K-1
  std::vector<std::vector<tg::Value>> mu;  // mu[t][j] = mu_{t,t+1+j}
  std::vector<tg::Value> sigma;            // t=1..K-1
  tg::Value term_a, term_sigma;            // q(x_K|x_0): coefficient, stddev
  std::vector<tg::Value> marg_a, marg_v;   // t=1..K
  std::vector<tg::Value> pred_a, pred_b;   // xhat0 = pred_a x - pred_b eps
};

// one leaf per raw vector, in p.keys() order
std::vector<tg::Value> register_params(tg::Tape& tp, const SamplerParams& p);

SamplerTable build_sampler_table(tg::Tape& tp, const SamplerParams& p,
                                 const std::vector<tg::Value>& leaves, const NoiseSchedule& s);

// SingularityError if the inversion scale was degenerate at build time.
tg::Value predict_x0(tg::Tape& tp, tg::Value x, tg::Value eps, const SamplerTable& tbl,
                     std::size_t t);

// plain variant: (x - sqrt(marg_v) eps) / marg_a with the same guard
tg::Tensor predict_x0_plain(const tg::Tensor& x, const tg::Tensor& eps, double marg_a,
                            double marg_v);

}  // namespace ddss
