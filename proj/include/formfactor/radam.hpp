#pragma once

// Rectified Adam. With t the step count after increment:
//   m_t   = b1 m + (1 - b1) g
//   v_t   = b2 v + (1 - b2) g^2
//   m_hat = m_t / (1 - b1^t)
//   rho_inf = 2 / (1 - b2) - 1
//   rho_t   = rho_inf - 2 t b2^t / (1 - b2^t)
//   if rho_t > threshold:
//     v_hat = sqrt(v_t / (1 - b2^t))
//     r_t   = sqrt((rho_t - 4)(rho_t - 2) rho_inf / ((rho_inf - 4)(rho_inf - 2) rho_t))
//     theta -= lr * r_t * m_hat / (v_hat + eps)
//   else:
//     theta -= lr * m_hat

#include <cmath>
#include <cstdint>
#include <limits>

#include "formfactor/errors.hpp"
#include "formfactor/scorer.hpp"

namespace formfactor {

struct RAdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double threshold = 4.0;  // SMA length above which the adaptive step is used
  bool rectify = true;     // false: r_t = 1 (with threshold = -inf this is Adam)
};

template <typename T>
struct OptimizerState {
  std::uint64_t step = 0;
  ScorerParams<T> first_moment;
  ScorerParams<T> second_moment;

  static OptimizerState for_params(const ScorerParams<T>& p) {
    OptimizerState s;
    s.first_moment = ScorerParams<T>::zeros(p.dims, p.vocab_size(), p.num_fields());
    s.second_moment = s.first_moment;
    return s;
  }
};

struct RAdamCoefficients {
  bool adaptive = false;
  double first_correction = 1;   // 1 - b1^t
  double second_correction = 1;  // 1 - b2^t
  double rectifier = 1;
};

inline RAdamCoefficients radam_coefficients(std::uint64_t t, const RAdamOptions& o) {
  RAdamCoefficients c;
  const double td = static_cast<double>(t);
  const double b2t = std::pow(o.beta2, td);
  c.first_correction = 1 - std::pow(o.beta1, td);
  c.second_correction = 1 - b2t;
  const double rho_inf = 2 / (1 - o.beta2) - 1;
  const double rho_t = rho_inf - 2 * td * b2t / (1 - b2t);
  c.adaptive = rho_t > o.threshold;
  if (c.adaptive && o.rectify)
    c.rectifier = std::sqrt((rho_t - 4) * (rho_t - 2) * rho_inf / ((rho_inf - 4) * (rho_inf - 2) * rho_t));
  return c;
}

template <typename T>
void radam_step(ScorerParams<T>& params, const ScorerParams<T>& grad, OptimizerState<T>& state,
                const RAdamOptions& o) {
  bool finite = true;
  ScorerParams<T>::visit(grad, [&](std::string_view, const Matrix<T>& g) { finite = finite && g.allFinite(); });
  if (!finite) throw NumericError("non-finite gradient passed to radam_step");
  bool shapes = true;
  ScorerParams<T>::visit_pair(params, grad, [&](std::string_view, const Matrix<T>& a, const Matrix<T>& b) {
    shapes = shapes && a.rows() == b.rows() && a.cols() == b.cols();
  });
  if (!shapes) throw ShapeError("gradient shape does not match parameters");

  const auto c = radam_coefficients(++state.step, o);
  const T b1 = static_cast<T>(o.beta1), b2 = static_cast<T>(o.beta2);
  const T lr = static_cast<T>(o.learning_rate);
  const T inv_c1 = static_cast<T>(1 / c.first_correction);
  const T inv_c2 = static_cast<T>(1 / c.second_correction);
  const T step_scale = static_cast<T>(o.learning_rate * c.rectifier);
  const T eps = static_cast<T>(o.epsilon);

  auto update = [&](Matrix<T>& theta, const Matrix<T>& g, Matrix<T>& m, Matrix<T>& v) {
    T* th = theta.data();
    const T* gd = g.data();
    T* md = m.data();
    T* vd = v.data();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      md[i] = b1 * md[i] + (1 - b1) * gd[i];
      vd[i] = b2 * vd[i] + (1 - b2) * gd[i] * gd[i];
      const T m_hat = md[i] * inv_c1;
      if (c.adaptive) {
        th[i] -= step_scale * m_hat / (std::sqrt(vd[i] * inv_c2) + eps);
      } else {
        th[i] -= lr * m_hat;
      }
    }
  };
  update(params.token_embeddings, grad.token_embeddings, state.first_moment.token_embeddings, state.second_moment.token_embeddings);
  update(params.pos_projection, grad.pos_projection, state.first_moment.pos_projection, state.second_moment.pos_projection);
  update(params.query, grad.query, state.first_moment.query, state.second_moment.query);
  update(params.key, grad.key, state.first_moment.key, state.second_moment.key);
  update(params.value, grad.value, state.first_moment.value, state.second_moment.value);
  update(params.output_projection, grad.output_projection, state.first_moment.output_projection, state.second_moment.output_projection);
  update(params.field_embeddings, grad.field_embeddings, state.first_moment.field_embeddings, state.second_moment.field_embeddings);
  update(params.field_bias, grad.field_bias, state.first_moment.field_bias, state.second_moment.field_bias);
}

}  // namespace formfactor
