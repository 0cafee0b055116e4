#include "oracles.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace scalweight::testing {

Matrix reference_forward(const ModelParams& model, const Matrix& inputs,
                         std::size_t task) {
  const auto path = model.task_path(task);
  const std::span<const double> theta = model.values();
  Matrix cur = inputs;
  for (const LayerRef& layer : path) {
    Matrix next(cur.rows, layer.out);
    for (std::size_t r = 0; r < cur.rows; ++r) {
      for (std::size_t o = 0; o < layer.out; ++o) {
        double acc = theta[layer.b_off + o];
        for (std::size_t i = 0; i < layer.in; ++i)
          acc += theta[layer.w_off + o * layer.in + i] * cur.at(r, i);
        if (layer.relu && acc < 0.0) acc = 0.0;
        next.at(r, o) = acc;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

GradCheck check_gradient(ModelParams& model, const Matrix& inputs,
                         const Matrix& labels, LossKind kind, std::size_t task,
                         double h, double tol) {
  const std::size_t n = model.param_count();
  std::vector<double> analytic(n, 0.0);
  {
    Tape tape;
    const Matrix out = forward(model, inputs, task, &tape);
    const LossGrad lg = loss_and_grad(kind, out, labels);
    backward(model, tape, lg.grad, 1.0, analytic);
  }
  auto loss_at = [&]() {
    return loss_value(kind, forward(model, inputs, task), labels);
  };
  GradCheck result;
  const std::span<double> theta = model.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double saved = theta[i];
    auto central = [&](double step) {
      theta[i] = saved + step;
      const double up = loss_at();
      theta[i] = saved - step;
      const double down = loss_at();
      theta[i] = saved;
      return (up - down) / (2.0 * step);
    };
    const double coarse = central(h);
    const double fine = central(h / 2.0);
    if (std::abs(coarse - fine) > 1e-7 * std::max(1.0, std::abs(fine))) {
      ++result.skipped;  // estimate straddles a kink
      continue;
    }
    ++result.checked;
    const double rel =
        std::abs(analytic[i] - fine) / std::max(1.0, std::abs(fine));
    result.max_rel = std::max(result.max_rel, rel);
    if (rel >= tol) ++result.failed;
  }
  return result;
}

double adamw_first_step(double param, double grad, double lr, double beta1,
                        double beta2, double epsilon, double weight_decay) {
  const double m = (1.0 - beta1) * grad;
  const double v = (1.0 - beta2) * grad * grad;
  const double m_hat = m / (1.0 - beta1);
  const double v_hat = v / (1.0 - beta2);
  return param - lr * (m_hat / (std::sqrt(v_hat) + epsilon) + weight_decay * param);
}

std::vector<double> simplex_projection_bisect(std::span<const double> v) {
  // w_i = max(v_i - lambda, 0) with lambda chosen so the sum is 1; the sum is
  // continuous and decreasing in lambda, so bisection converges.
  double lo = -1.0, hi = 0.0;
  for (double x : v) {
    lo = std::min(lo, x - 1.0);
    hi = std::max(hi, x);
  }
  auto mass = [&](double lambda) {
    double s = 0.0;
    for (double x : v) s += std::max(x - lambda, 0.0);
    return s;
  };
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) > 1.0)
      lo = mid;
    else
      hi = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  std::vector<double> w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::max(v[i] - lambda, 0.0);
  return w;
}

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

void parallel_map(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < std::min(jobs, count); ++w) {
    workers.emplace_back([&, w] {
      try {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= count) return;
          fn(i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
        next.store(count);
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace scalweight::testing
