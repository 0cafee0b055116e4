#include "scalweight/grad_mto.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scalweight/error.hpp"

namespace scalweight {

GradientSet per_task_gradients(const ModelParams& model,
                               std::span<const Matrix> features,
                               std::span<const Matrix> labels,
                               std::span<const LossKind> losses,
                               std::vector<double>* loss_out) {
  const std::size_t t_count = model.task_count();
  if (features.size() != t_count || labels.size() != t_count ||
      losses.size() != t_count)
    throw ConfigError("per_task_gradients: need one batch per task");
  GradientSet set;
  set.grads.assign(t_count, std::vector<double>(model.param_count(), 0.0));
  if (loss_out) loss_out->assign(t_count, 0.0);
  Tape tape;
  for (std::size_t t = 0; t < t_count; ++t) {
    const Matrix out = forward(model, features[t], t, &tape);
    const LossGrad lg = loss_and_grad(losses[t], out, labels[t]);
    backward(model, tape, lg.grad, 1.0, set.grads[t]);
    if (loss_out) (*loss_out)[t] = lg.loss;
  }
  return set;
}

ConflictStat is_conflicting(std::span<const double> gi,
                            std::span<const double> gj) {
  if (gi.size() != gj.size())
    throw ConfigError("is_conflicting: gradient size mismatch");
  const double ni = norm2(gi), nj = norm2(gj);
  if (ni == 0.0 || nj == 0.0) return {0.0, false, true};
  const double cosine = dot(gi, gj) / (ni * nj);
  return {cosine, cosine < 0.0, false};
}

std::vector<double> pcgrad_combine(const GradientSet& grads, Rng& rng) {
  const std::size_t t_count = grads.task_count();
  if (t_count == 0) throw ConfigError("pcgrad: empty gradient set");
  const std::size_t p = grads.param_count();
  for (const auto& g : grads.grads)
    if (g.size() != p) throw ConfigError("pcgrad: ragged gradient set");

  std::vector<double> norms_sq(t_count);
  for (std::size_t t = 0; t < t_count; ++t)
    norms_sq[t] = dot(grads.grads[t], grads.grads[t]);

  std::vector<double> combined(p, 0.0);
  std::vector<double> gi(p);
  for (std::size_t i = 0; i < t_count; ++i) {
    gi = grads.grads[i];
    // fresh order of the other tasks for every i
    const auto order = rng.permutation(t_count);
    for (const std::size_t j : order) {
      if (j == i || norms_sq[j] == 0.0) continue;
      const double d = dot(gi, grads.grads[j]);
      if (d < 0.0) axpy(-d / norms_sq[j], grads.grads[j], gi);
    }
    for (std::size_t k = 0; k < p; ++k) combined[k] += gi[k];
  }
  return combined;
}

std::vector<double> graddrop_combine(const GradientSet& grads, Rng& rng) {
  const std::size_t t_count = grads.task_count();
  if (t_count == 0) throw ConfigError("graddrop: empty gradient set");
  const std::size_t p = grads.param_count();
  for (const auto& g : grads.grads)
    if (g.size() != p) throw ConfigError("graddrop: ragged gradient set");

  std::vector<double> out(p, 0.0);
  for (std::size_t k = 0; k < p; ++k) {
    double signed_sum = 0.0, abs_sum = 0.0;
    double pos = 0.0, neg = 0.0;
    for (std::size_t t = 0; t < t_count; ++t) {
      const double g = grads.grads[t][k];
      signed_sum += g;
      abs_sum += std::abs(g);
      if (g > 0.0)
        pos += g;
      else
        neg += g;
    }
    const double purity = abs_sum > 0.0 ? signed_sum / abs_sum : 0.0;
    const double keep_pos = 0.5 * (1.0 + purity);
    const double u = rng.uniform();  // one draw per coordinate, always
    out[k] = u < keep_pos ? pos : neg;
  }
  return out;
}

void CagradConfig::validate() const {
  if (c < 0.0 || !std::isfinite(c)) throw ConfigError("cagrad: c must be >= 0");
  if (inner_iters == 0) throw ConfigError("cagrad: inner_iters must be positive");
  if (!(inner_lr > 0.0)) throw ConfigError("cagrad: inner_lr must be positive");
}

std::vector<double> euclidean_simplex_projection(std::span<const double> v) {
  if (v.empty()) throw ConfigError("simplex projection: empty input");
  const std::size_t n = v.size();
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, tau = 0.0;
  std::size_t rho = 0;
  for (std::size_t j = 0; j < n; ++j) {
    css += u[j];
    const double cand = (1.0 - css) / static_cast<double>(j + 1);
    if (u[j] + cand > 0.0) {
      rho = j + 1;
      tau = cand;
    }
  }
  if (rho == 0) throw ConfigError("simplex projection: degenerate input");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(v[i] + tau, 0.0);
  return out;
}

CagradResult cagrad_combine(const GradientSet& grads, const CagradConfig& cfg) {
  cfg.validate();
  const std::size_t t_count = grads.task_count();
  if (t_count == 0) throw ConfigError("cagrad: empty gradient set");
  const std::size_t p = grads.param_count();
  for (const auto& g : grads.grads)
    if (g.size() != p) throw ConfigError("cagrad: ragged gradient set");

  CagradResult res;
  std::vector<double> g0(p, 0.0);
  for (const auto& g : grads.grads) axpy(1.0, g, g0);
  scale_inplace(g0, 1.0 / static_cast<double>(t_count));

  const double g0_norm = norm2(g0);
  const double sqrt_phi = cfg.c * g0_norm;
  if (t_count == 1 || sqrt_phi == 0.0 || g0_norm == 0.0) {
    res.direction = std::move(g0);
    return res;
  }

  // gram[i][j] = g_i . g_j lets the inner solve work in T dims, not P
  std::vector<std::vector<double>> gram(t_count, std::vector<double>(t_count));
  for (std::size_t i = 0; i < t_count; ++i)
    for (std::size_t j = i; j < t_count; ++j)
      gram[i][j] = gram[j][i] = dot(grads.grads[i], grads.grads[j]);
  std::vector<double> gram_g0(t_count, 0.0);  // g_t . g0
  for (std::size_t i = 0; i < t_count; ++i) {
    for (std::size_t j = 0; j < t_count; ++j) gram_g0[i] += gram[i][j];
    gram_g0[i] /= static_cast<double>(t_count);
  }

  auto gw_norm = [&](const std::vector<double>& w) {
    double q = 0.0;
    for (std::size_t i = 0; i < t_count; ++i)
      for (std::size_t j = 0; j < t_count; ++j) q += w[i] * w[j] * gram[i][j];
    return std::sqrt(std::max(q, 0.0));
  };
  auto objective = [&](const std::vector<double>& w) {
    double lin = 0.0;
    for (std::size_t i = 0; i < t_count; ++i) lin += w[i] * gram_g0[i];
    return lin + sqrt_phi * gw_norm(w);
  };

  std::vector<double> w(t_count, 1.0 / static_cast<double>(t_count));
  double fw = objective(w);
  res.objective_trace.push_back(fw);

  std::vector<double> grad_w(t_count), trial(t_count);
  for (std::size_t iter = 0; iter < cfg.inner_iters; ++iter) {
    const double norm_w = gw_norm(w);
    for (std::size_t i = 0; i < t_count; ++i) {
      double gw_dot = 0.0;  // g_i . g_w
      for (std::size_t j = 0; j < t_count; ++j) gw_dot += w[j] * gram[i][j];
      grad_w[i] =
          gram_g0[i] + (norm_w > 0.0 ? sqrt_phi * gw_dot / norm_w : 0.0);
    }
    // step halving keeps the trace monotone
    double step = cfg.inner_lr;
    for (int tries = 0; tries < 20; ++tries) {
      for (std::size_t i = 0; i < t_count; ++i)
        trial[i] = w[i] - step * grad_w[i];
      trial = euclidean_simplex_projection(trial);
      const double ft = objective(trial);
      if (ft <= fw) {
        w = trial;
        fw = ft;
        break;
      }
      step *= 0.5;
    }
    res.objective_trace.push_back(fw);
  }

  const double norm_w = gw_norm(w);
  res.direction = g0;
  if (norm_w > 0.0) {
    const double coef = sqrt_phi / norm_w;
    for (std::size_t k = 0; k < p; ++k) {
      double gw_k = 0.0;
      for (std::size_t t = 0; t < t_count; ++t)
        gw_k += w[t] * grads.grads[t][k];
      res.direction[k] += coef * gw_k;
    }
  }
  for (double v : res.direction)
    if (!std::isfinite(v)) {
      res.direction = std::move(g0);
      res.fallback = true;
      break;
    }
  return res;
}

}  // namespace scalweight
