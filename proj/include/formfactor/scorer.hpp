#pragma once

// Candidate scorer: a single-head self-attention encoder over a candidate's
// neighborhood, a table of field embeddings in the same space, and exact
// reverse-mode gradients of the binary cross-entropy loss.
//
// Per neighbor i the encoder input is
//   x_i = [ E[token_i] ; (rel_x, rel_y, distance) * P ]            (d_in = d_w + d_p)
// followed by
//   A = softmax(X Wq (X Wk)^T / sqrt(d_in)),  h = mean_i (A X Wv)_i,  c = h Wo
// and the (field, candidate) logit is  c . F[field] / sqrt(d_c) + b[field].

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "formfactor/errors.hpp"
#include "formfactor/neighborhood.hpp"
#include "formfactor/random.hpp"
#include "formfactor/vocab.hpp"

namespace formfactor {

struct ScorerDims {
  std::size_t token_dim = 64;     // d_w
  std::size_t position_dim = 16;  // d_p
  std::size_t output_dim = 80;    // d_c

  std::size_t input_dim() const { return token_dim + position_dim; }

  friend bool operator==(const ScorerDims&, const ScorerDims&) = default;
};

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// All learnable state. Also used as the gradient container.
template <typename T>
struct ScorerParams {
  ScorerDims dims;
  Matrix<T> token_embeddings;   // |V| x d_w, row 0 (PAD) stays zero
  Matrix<T> pos_projection;     // 3 x d_p
  Matrix<T> query;              // d_in x d_in
  Matrix<T> key;                // d_in x d_in
  Matrix<T> value;              // d_in x d_in
  Matrix<T> output_projection;  // d_in x d_c
  Matrix<T> field_embeddings;   // F x d_c
  Matrix<T> field_bias;         // F x 1

  static ScorerParams zeros(const ScorerDims& dims, std::size_t vocab_size, std::size_t num_fields) {
    const auto d_in = static_cast<Eigen::Index>(dims.input_dim());
    ScorerParams p;
    p.dims = dims;
    p.token_embeddings = Matrix<T>::Zero(static_cast<Eigen::Index>(vocab_size), static_cast<Eigen::Index>(dims.token_dim));
    p.pos_projection = Matrix<T>::Zero(3, static_cast<Eigen::Index>(dims.position_dim));
    p.query = Matrix<T>::Zero(d_in, d_in);
    p.key = Matrix<T>::Zero(d_in, d_in);
    p.value = Matrix<T>::Zero(d_in, d_in);
    p.output_projection = Matrix<T>::Zero(d_in, static_cast<Eigen::Index>(dims.output_dim));
    p.field_embeddings = Matrix<T>::Zero(static_cast<Eigen::Index>(num_fields), static_cast<Eigen::Index>(dims.output_dim));
    p.field_bias = Matrix<T>::Zero(static_cast<Eigen::Index>(num_fields), 1);
    return p;
  }

  std::size_t vocab_size() const { return static_cast<std::size_t>(token_embeddings.rows()); }
  std::size_t num_fields() const { return static_cast<std::size_t>(field_embeddings.rows()); }

  template <typename U>
  ScorerParams<U> cast() const {
    ScorerParams<U> out;
    out.dims = dims;
    visit_pair(out, *this, [](std::string_view, Matrix<U>& dst, const Matrix<T>& src) { dst = src.template cast<U>(); });
    return out;
  }

  friend bool operator==(const ScorerParams& a, const ScorerParams& b) {
    bool same = a.dims == b.dims;
    visit_pair(a, b, [&](std::string_view, const Matrix<T>& x, const Matrix<T>& y) {
      same = same && x.rows() == y.rows() && x.cols() == y.cols() && x == y;
    });
    return same;
  }

  // Calls f(name, tensor) for each tensor in a fixed order.
  template <typename P, typename F>
  static void visit(P& p, F&& f) {
    f("token_embeddings", p.token_embeddings);
    f("pos_projection", p.pos_projection);
    f("query", p.query);
    f("key", p.key);
    f("value", p.value);
    f("output_projection", p.output_projection);
    f("field_embeddings", p.field_embeddings);
    f("field_bias", p.field_bias);
  }

  template <typename A, typename B, typename F>
  static void visit_pair(A& a, B& b, F&& f) {
    f("token_embeddings", a.token_embeddings, b.token_embeddings);
    f("pos_projection", a.pos_projection, b.pos_projection);
    f("query", a.query, b.query);
    f("key", a.key, b.key);
    f("value", a.value, b.value);
    f("output_projection", a.output_projection, b.output_projection);
    f("field_embeddings", a.field_embeddings, b.field_embeddings);
    f("field_bias", a.field_bias, b.field_bias);
  }
};

template <typename T>
bool all_finite(const ScorerParams<T>& p) {
  bool ok = true;
  ScorerParams<T>::visit(p, [&](std::string_view, const Matrix<T>& m) { ok = ok && m.allFinite(); });
  return ok;
}

// Glorot-uniform bound for a rows x cols matrix.
inline double init_bound(std::size_t rows, std::size_t cols) {
  return std::sqrt(6.0 / static_cast<double>(rows + cols));
}

template <typename T = float>
ScorerParams<T> init_params(std::uint64_t seed, std::size_t vocab_size, std::size_t num_fields,
                            const ScorerDims& dims = {}) {
  auto p = ScorerParams<T>::zeros(dims, vocab_size, num_fields);
  Rng rng(derive_seed(seed, "init_params"));
  ScorerParams<T>::visit(p, [&](std::string_view name, Matrix<T>& m) {
    if (name == "field_bias") return;
    const double s = init_bound(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-s, s));
  });
  if (p.token_embeddings.rows() > 0) p.token_embeddings.row(Vocab::kPad).setZero();
  return p;
}

// ---------------------------------------------------------------------------
// Model input

// Vocabulary ids and position features of the non-pad neighbors. Padding is
// implicit: absent rows are masked out of attention and pooling.
struct EncodedNeighbors {
  std::vector<std::int32_t> token_ids;
  std::vector<std::array<double, 3>> positions;  // (rel_x, rel_y, distance)

  std::size_t size() const { return token_ids.size(); }

  friend bool operator==(const EncodedNeighbors&, const EncodedNeighbors&) = default;
};

inline EncodedNeighbors encode_neighbors(const NeighborSet& ns, const Vocab& vocab) {
  EncodedNeighbors e;
  e.token_ids.reserve(ns.neighbors.size());
  e.positions.reserve(ns.neighbors.size());
  for (const auto& n : ns.neighbors) {
    e.token_ids.push_back(vocab.lookup(n.token_text));
    e.positions.push_back({n.rel_x, n.rel_y, n.distance});
  }
  return e;
}

struct ScoredCandidate {
  std::string candidate_id;
  std::string field_name;
  double score = 0.5;  // logistic(logit), kept strictly inside (0, 1)
  double logit = 0.0;
};

inline double logistic(double z) {
  double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  constexpr double kLo = 0x1.0p-1074;
  const double kHi = std::nextafter(1.0, 0.0);
  return std::min(std::max(s, kLo), kHi);
}

// -log(sigmoid(z)) if y = 1, -log(1 - sigmoid(z)) if y = 0, stable for any z.
inline double sigmoid_cross_entropy(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

// One (neighborhood, field, label) training or validation example.
struct ScorerExample {
  const EncodedNeighbors* input = nullptr;
  std::size_t field_index = 0;
  double label = 0;
};

// ---------------------------------------------------------------------------
// Forward / backward

namespace scorer_detail {

template <typename T>
struct BatchForward {
  std::vector<Eigen::Index> offsets;  // row offset of each example in X; size B + 1
  Matrix<T> x, q, k, v;               // R x d_in
  std::vector<Matrix<T>> attention;   // per example, n x n
  Matrix<T> pooled;                   // B x d_in
  Matrix<T> encoded;                  // B x d_c
  std::vector<double> logits;
};

template <typename T>
void check_field(const ScorerParams<T>& p, std::size_t field) {
  if (field >= p.num_fields())
    throw ShapeError("field index " + std::to_string(field) + " out of range (" + std::to_string(p.num_fields()) + " fields)");
}

template <typename T>
BatchForward<T> forward(const std::vector<const EncodedNeighbors*>& inputs, const ScorerParams<T>& p) {
  const Eigen::Index d_w = static_cast<Eigen::Index>(p.dims.token_dim);
  const Eigen::Index d_in = static_cast<Eigen::Index>(p.dims.input_dim());
  const auto batch = static_cast<Eigen::Index>(inputs.size());
  BatchForward<T> f;
  f.offsets.resize(inputs.size() + 1, 0);
  for (std::size_t b = 0; b < inputs.size(); ++b)
    f.offsets[b + 1] = f.offsets[b] + static_cast<Eigen::Index>(inputs[b]->size());
  const Eigen::Index rows = f.offsets.back();

  f.x.resize(rows, d_in);
  Matrix<T> pos(rows, 3);
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const auto& in = *inputs[b];
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Eigen::Index r = f.offsets[b] + static_cast<Eigen::Index>(i);
      const auto id = in.token_ids[i];
      if (id < 0 || static_cast<std::size_t>(id) >= p.vocab_size()) throw ShapeError("token id out of vocabulary range");
      f.x.row(r).head(d_w) = p.token_embeddings.row(id);
      for (int c = 0; c < 3; ++c) pos(r, c) = static_cast<T>(in.positions[i][static_cast<std::size_t>(c)]);
    }
  }
  if (rows > 0) {
    f.x.rightCols(d_in - d_w).noalias() = pos * p.pos_projection;
    f.q.noalias() = f.x * p.query;
    f.k.noalias() = f.x * p.key;
    f.v.noalias() = f.x * p.value;
  } else {
    f.q.resize(0, d_in);
    f.k.resize(0, d_in);
    f.v.resize(0, d_in);
  }

  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_in)));
  f.pooled = Matrix<T>::Zero(batch, d_in);
  f.attention.resize(inputs.size());
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::Index off = f.offsets[static_cast<std::size_t>(b)];
    const Eigen::Index n = f.offsets[static_cast<std::size_t>(b) + 1] - off;
    if (n == 0) continue;  // mean over nothing is the zero vector
    Matrix<T> s = (f.q.middleRows(off, n) * f.k.middleRows(off, n).transpose()) * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      const T mx = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - mx).exp().matrix();
      s.row(i) /= s.row(i).sum();
    }
    // mean_i (A V)_i = (column means of A) V
    RowVector<T> weights = s.colwise().sum() / static_cast<T>(n);
    f.pooled.row(b).noalias() = weights * f.v.middleRows(off, n);
    f.attention[static_cast<std::size_t>(b)] = std::move(s);
  }
  f.encoded.noalias() = f.pooled * p.output_projection;
  return f;
}

template <typename T>
double logit_of(const RowVector<T>& encoded, std::size_t field, const ScorerParams<T>& p) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(p.dims.output_dim));
  const auto fi = static_cast<Eigen::Index>(field);
  return static_cast<double>(encoded.dot(p.field_embeddings.row(fi))) * inv + static_cast<double>(p.field_bias(fi, 0));
}

}  // namespace scorer_detail

// Candidate embedding (d_c) of one neighborhood.
template <typename T>
RowVector<T> embed_candidate(const EncodedNeighbors& input, const ScorerParams<T>& p) {
  auto f = scorer_detail::forward<T>({&input}, p);
  return f.encoded.row(0);
}

// Embeddings of many neighborhoods, one row each.
template <typename T>
Matrix<T> embed_candidates(const std::vector<const EncodedNeighbors*>& inputs, const ScorerParams<T>& p) {
  return scorer_detail::forward<T>(inputs, p).encoded;
}

template <typename T>
ScoredCandidate score_pair(const RowVector<T>& candidate_embedding, std::size_t field_index, const ScorerParams<T>& p) {
  scorer_detail::check_field(p, field_index);
  if (static_cast<std::size_t>(candidate_embedding.size()) != p.dims.output_dim)
    throw ShapeError("candidate embedding has wrong dimension");
  ScoredCandidate s;
  s.logit = scorer_detail::logit_of<T>(candidate_embedding, field_index, p);
  s.score = logistic(s.logit);
  return s;
}

// Mean binary cross-entropy over the batch.
template <typename T>
double batch_loss(const std::vector<ScorerExample>& batch, const ScorerParams<T>& p) {
  if (batch.empty()) throw DataError("empty-batch", "batch_loss needs a non-empty batch");
  std::vector<const EncodedNeighbors*> inputs;
  for (const auto& e : batch) {
    scorer_detail::check_field(p, e.field_index);
    inputs.push_back(e.input);
  }
  auto f = scorer_detail::forward<T>(inputs, p);
  double total = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const RowVector<T> enc = f.encoded.row(static_cast<Eigen::Index>(b));
    total += sigmoid_cross_entropy(scorer_detail::logit_of<T>(enc, batch[b].field_index, p), batch[b].label);
  }
  return total / static_cast<double>(batch.size());
}

template <typename T>
struct LossAndGradient {
  double loss = 0;
  ScorerParams<T> gradient;
};

// Exact gradient of batch_loss with respect to every tensor.
template <typename T>
LossAndGradient<T> batch_gradient(const std::vector<ScorerExample>& batch, const ScorerParams<T>& p) {
  if (batch.empty()) throw DataError("empty-batch", "batch_gradient needs a non-empty batch");
  std::vector<const EncodedNeighbors*> inputs;
  for (const auto& e : batch) {
    scorer_detail::check_field(p, e.field_index);
    inputs.push_back(e.input);
  }
  const Eigen::Index d_w = static_cast<Eigen::Index>(p.dims.token_dim);
  const Eigen::Index d_in = static_cast<Eigen::Index>(p.dims.input_dim());
  const double inv_c = 1.0 / std::sqrt(static_cast<double>(p.dims.output_dim));
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_in)));
  const auto batch_size = static_cast<Eigen::Index>(batch.size());

  auto f = scorer_detail::forward<T>(inputs, p);
  LossAndGradient<T> out;
  out.gradient = ScorerParams<T>::zeros(p.dims, p.vocab_size(), p.num_fields());
  auto& g = out.gradient;

  // Head: logits -> d encoded, field embeddings, bias.
  Matrix<T> d_encoded(batch_size, static_cast<Eigen::Index>(p.dims.output_dim));
  double total = 0;
  for (Eigen::Index b = 0; b < batch_size; ++b) {
    const auto& e = batch[static_cast<std::size_t>(b)];
    const auto fi = static_cast<Eigen::Index>(e.field_index);
    const RowVector<T> enc = f.encoded.row(b);
    const double z = scorer_detail::logit_of<T>(enc, e.field_index, p);
    total += sigmoid_cross_entropy(z, e.label);
    const double dz = (logistic(z) - e.label) / static_cast<double>(batch.size());
    d_encoded.row(b) = p.field_embeddings.row(fi) * static_cast<T>(dz * inv_c);
    g.field_embeddings.row(fi) += enc * static_cast<T>(dz * inv_c);
    g.field_bias(fi, 0) += static_cast<T>(dz);
  }
  out.loss = total / static_cast<double>(batch.size());

  g.output_projection.noalias() = f.pooled.transpose() * d_encoded;
  const Matrix<T> d_pooled = d_encoded * p.output_projection.transpose();

  const Eigen::Index rows = f.offsets.back();
  Matrix<T> dq = Matrix<T>::Zero(rows, d_in);
  Matrix<T> dk = Matrix<T>::Zero(rows, d_in);
  Matrix<T> dv = Matrix<T>::Zero(rows, d_in);
  for (Eigen::Index b = 0; b < batch_size; ++b) {
    const Eigen::Index off = f.offsets[static_cast<std::size_t>(b)];
    const Eigen::Index n = f.offsets[static_cast<std::size_t>(b) + 1] - off;
    if (n == 0) continue;
    const Matrix<T>& a = f.attention[static_cast<std::size_t>(b)];
    const T inv_n = static_cast<T>(1) / static_cast<T>(n);
    const RowVector<T> dm = d_pooled.row(b);
    // H = A V with every row of dH equal to dm / n.
    dv.middleRows(off, n).noalias() = (a.colwise().sum().transpose() * inv_n) * dm;
    const RowVector<T> u = (f.v.middleRows(off, n) * dm.transpose()).transpose() * inv_n;  // dA[i, j] = u_j
    Matrix<T> ds(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const T mean_u = a.row(i).dot(u);
      ds.row(i) = (a.row(i).array() * (u.array() - mean_u)).matrix();
    }
    ds *= scale;
    dq.middleRows(off, n).noalias() = ds * f.k.middleRows(off, n);
    dk.middleRows(off, n).noalias() = ds.transpose() * f.q.middleRows(off, n);
  }
  if (rows > 0) {
    g.query.noalias() = f.x.transpose() * dq;
    g.key.noalias() = f.x.transpose() * dk;
    g.value.noalias() = f.x.transpose() * dv;
    Matrix<T> dx = dq * p.query.transpose();
    dx.noalias() += dk * p.key.transpose();
    dx.noalias() += dv * p.value.transpose();

    Matrix<T> pos(rows, 3);
    for (std::size_t b = 0; b < inputs.size(); ++b) {
      const auto& in = *inputs[b];
      for (std::size_t i = 0; i < in.size(); ++i) {
        const Eigen::Index r = f.offsets[b] + static_cast<Eigen::Index>(i);
        g.token_embeddings.row(in.token_ids[i]) += dx.row(r).head(d_w);
        for (int c = 0; c < 3; ++c) pos(r, c) = static_cast<T>(in.positions[i][static_cast<std::size_t>(c)]);
      }
    }
    g.pos_projection.noalias() = pos.transpose() * dx.rightCols(d_in - d_w);
  }
  g.token_embeddings.row(Vocab::kPad).setZero();
  return out;
}

}  // namespace formfactor
