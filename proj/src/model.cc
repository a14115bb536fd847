/*
 * Copyright 2026 The PhishLens Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "phishlens/model.h"

#include <cmath>
#include <string>

#include "phishlens/error.h"

namespace phishlens {

struct LayerCache {
  Matrix input;
  Matrix query, key, value;
  std::vector<Matrix> probabilities;  // one L x L matrix per head
  Matrix context;
  Matrix attention_dropout;
  Matrix norm1_hat;
  Eigen::VectorXd norm1_inv_std;
  Matrix hidden1;
  Matrix ffn_pre, ffn_act;
  Matrix ffn_dropout;
  Matrix norm2_hat;
  Eigen::VectorXd norm2_inv_std;
};

struct ItemCache {
  std::vector<TokenId> ids;  // empty when the pass started from embeddings
  std::vector<int> mask;
  Matrix embedding_dropout;
  std::vector<LayerCache> layers;
  Matrix cls;
  Matrix pre_head_pre;
  Matrix pre_head_dropout;
  Matrix pre_head_out;
};

struct ActivationCache {
  const ModelParameters* params = nullptr;
  std::uint64_t generation = 0;
  std::vector<ItemCache> items;
};

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double Gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double GeluDerivative(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Matrix Affine(const Matrix& x, const Matrix& weight, const Matrix& bias) {
  Matrix y = x * weight;
  y.rowwise() += bias.row(0);
  return y;
}

void SoftmaxRowsInPlace(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double max = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - max).exp();
    m.row(r) /= m.row(r).sum();
  }
}

// Inverted dropout. Leaves `mask` empty when inactive.
void Dropout(Matrix& x, Matrix& mask, double rate, bool train_mode, Rng* rng) {
  mask.resize(0, 0);
  if (!train_mode || rate <= 0.0) return;
  if (rng == nullptr) {
    throw Error(ErrorKind::kInvalidArgument,
                "train-mode forward with dropout needs a random generator");
  }
  const double keep = 1.0 - rate;
  mask.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng->Uniform() < keep ? 1.0 / keep : 0.0;
  }
  x.array() *= mask.array();
}

void DropoutBackward(Matrix& grad, const Matrix& mask) {
  if (mask.size() != 0) grad.array() *= mask.array();
}

Matrix LayerNorm(const Matrix& x, const Matrix& scale, const Matrix& shift,
                 Matrix& x_hat, Eigen::VectorXd& inv_std) {
  const double n = static_cast<double>(x.cols());
  x_hat.resize(x.rows(), x.cols());
  inv_std.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const Eigen::RowVectorXd centered = x.row(r).array() - mean;
    const double var = centered.squaredNorm() / n;
    inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    x_hat.row(r) = centered * inv_std(r);
  }
  Matrix y = x_hat.array().rowwise() * scale.row(0).array();
  y.rowwise() += shift.row(0);
  return y;
}

Matrix LayerNormBackward(const Matrix& grad_out, const Matrix& x_hat,
                         const Eigen::VectorXd& inv_std, const Matrix& scale,
                         Matrix& grad_scale, Matrix& grad_shift) {
  const double n = static_cast<double>(x_hat.cols());
  grad_scale.row(0) += (grad_out.array() * x_hat.array()).colwise().sum().matrix();
  grad_shift.row(0) += grad_out.colwise().sum();
  const Matrix grad_hat = grad_out.array().rowwise() * scale.row(0).array();
  Matrix grad_in(grad_out.rows(), grad_out.cols());
  for (Eigen::Index r = 0; r < grad_out.rows(); ++r) {
    const double sum = grad_hat.row(r).sum();
    const double dot = grad_hat.row(r).dot(x_hat.row(r));
    grad_in.row(r) = (inv_std(r) / n) *
                     (n * grad_hat.row(r).array() - sum - x_hat.row(r).array() * dot);
  }
  return grad_in;
}

void AccumulateAffine(const Matrix& input, const Matrix& grad_out,
                      Matrix& grad_weight, Matrix& grad_bias) {
  grad_weight.noalias() += input.transpose() * grad_out;
  grad_bias.row(0) += grad_out.colwise().sum();
}

Matrix LayerForward(const LayerTensors& t, const ModelConfig& config,
                    const Matrix& x, const std::vector<int>& mask,
                    bool train_mode, Rng* rng, LayerCache& cache) {
  const auto len = x.rows();
  const auto head_dim = static_cast<Eigen::Index>(config.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  cache.input = x;
  cache.query = Affine(x, t.query_weight, t.query_bias);
  cache.key = Affine(x, t.key_weight, t.key_bias);
  cache.value = Affine(x, t.value_weight, t.value_bias);

  Eigen::RowVectorXd mask_bias(len);
  for (Eigen::Index j = 0; j < len; ++j) {
    mask_bias(j) = mask[static_cast<std::size_t>(j)] != 0 ? 0.0 : kMaskedScore;
  }

  cache.context.resize(len, x.cols());
  cache.probabilities.resize(config.num_heads);
  for (std::size_t h = 0; h < config.num_heads; ++h) {
    const auto col = static_cast<Eigen::Index>(h) * head_dim;
    Matrix scores = cache.query.middleCols(col, head_dim) *
                    cache.key.middleCols(col, head_dim).transpose() * scale;
    scores.rowwise() += mask_bias;
    SoftmaxRowsInPlace(scores);
    cache.context.middleCols(col, head_dim) =
        scores * cache.value.middleCols(col, head_dim);
    cache.probabilities[h] = std::move(scores);
  }

  Matrix attention = Affine(cache.context, t.output_weight, t.output_bias);
  Dropout(attention, cache.attention_dropout, config.dropout_rate, train_mode, rng);
  cache.hidden1 = LayerNorm(x + attention, t.attention_norm_scale,
                            t.attention_norm_shift, cache.norm1_hat,
                            cache.norm1_inv_std);

  cache.ffn_pre = Affine(cache.hidden1, t.ffn_in_weight, t.ffn_in_bias);
  cache.ffn_act = cache.ffn_pre.unaryExpr(&Gelu);
  Matrix ffn = Affine(cache.ffn_act, t.ffn_out_weight, t.ffn_out_bias);
  Dropout(ffn, cache.ffn_dropout, config.dropout_rate, train_mode, rng);
  return LayerNorm(cache.hidden1 + ffn, t.ffn_norm_scale, t.ffn_norm_shift,
                   cache.norm2_hat, cache.norm2_inv_std);
}

// Returns the gradient with respect to the layer input.
Matrix LayerBackward(const LayerTensors& t, const ModelConfig& config,
                     const LayerCache& cache, const Matrix& grad_out,
                     LayerTensors& g) {
  const auto head_dim = static_cast<Eigen::Index>(config.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  const Matrix grad_residual2 =
      LayerNormBackward(grad_out, cache.norm2_hat, cache.norm2_inv_std,
                        t.ffn_norm_scale, g.ffn_norm_scale, g.ffn_norm_shift);
  Matrix grad_hidden1 = grad_residual2;
  Matrix grad_ffn = grad_residual2;
  DropoutBackward(grad_ffn, cache.ffn_dropout);
  AccumulateAffine(cache.ffn_act, grad_ffn, g.ffn_out_weight, g.ffn_out_bias);
  Matrix grad_act = grad_ffn * t.ffn_out_weight.transpose();
  const Matrix grad_pre =
      grad_act.array() * cache.ffn_pre.unaryExpr(&GeluDerivative).array();
  AccumulateAffine(cache.hidden1, grad_pre, g.ffn_in_weight, g.ffn_in_bias);
  grad_hidden1.noalias() += grad_pre * t.ffn_in_weight.transpose();

  const Matrix grad_residual1 = LayerNormBackward(
      grad_hidden1, cache.norm1_hat, cache.norm1_inv_std,
      t.attention_norm_scale, g.attention_norm_scale, g.attention_norm_shift);
  Matrix grad_input = grad_residual1;
  Matrix grad_attention = grad_residual1;
  DropoutBackward(grad_attention, cache.attention_dropout);
  AccumulateAffine(cache.context, grad_attention, g.output_weight, g.output_bias);
  const Matrix grad_context = grad_attention * t.output_weight.transpose();

  Matrix grad_query(cache.query.rows(), cache.query.cols());
  Matrix grad_key(cache.key.rows(), cache.key.cols());
  Matrix grad_value(cache.value.rows(), cache.value.cols());
  for (std::size_t h = 0; h < config.num_heads; ++h) {
    const auto col = static_cast<Eigen::Index>(h) * head_dim;
    const Matrix& probs = cache.probabilities[h];
    const auto grad_ctx_h = grad_context.middleCols(col, head_dim);
    const Matrix grad_probs =
        grad_ctx_h * cache.value.middleCols(col, head_dim).transpose();
    grad_value.middleCols(col, head_dim) = probs.transpose() * grad_ctx_h;
    const Eigen::VectorXd row_dot =
        (grad_probs.array() * probs.array()).rowwise().sum();
    const Matrix grad_scores =
        probs.array() * (grad_probs.colwise() - row_dot).array();
    grad_query.middleCols(col, head_dim) =
        grad_scores * cache.key.middleCols(col, head_dim) * scale;
    grad_key.middleCols(col, head_dim) =
        grad_scores.transpose() * cache.query.middleCols(col, head_dim) * scale;
  }
  AccumulateAffine(cache.input, grad_query, g.query_weight, g.query_bias);
  AccumulateAffine(cache.input, grad_key, g.key_weight, g.key_bias);
  AccumulateAffine(cache.input, grad_value, g.value_weight, g.value_bias);
  grad_input.noalias() += grad_query * t.query_weight.transpose();
  grad_input.noalias() += grad_key * t.key_weight.transpose();
  grad_input.noalias() += grad_value * t.value_weight.transpose();
  return grad_input;
}

void CheckSameShape(const Matrix& a, const Matrix& b, std::string_view name) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::kShapeMismatch,
                "tensor " + std::string(name) + " has shape " +
                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    ", expected " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()));
  }
}

}  // namespace

ModelConfig ModelConfig::FullScale() { return ModelConfig{}; }

ModelConfig ModelConfig::Toy() {
  ModelConfig c;
  c.vocab_size = 120;
  c.max_positions = 32;
  c.hidden_dim = 16;
  c.num_heads = 2;
  c.num_layers = 1;
  c.ffn_dim = 32;
  return c;
}

void ModelConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorKind::kConfig, "invalid model config: " + what);
  };
  if (vocab_size == 0) fail("vocab_size must be positive");
  if (max_positions == 0) fail("max_positions must be positive");
  if (hidden_dim == 0 || num_heads == 0) fail("hidden_dim and num_heads must be positive");
  if (hidden_dim % num_heads != 0) {
    fail("hidden_dim " + std::to_string(hidden_dim) +
         " is not divisible by num_heads " + std::to_string(num_heads));
  }
  if (ffn_dim == 0) fail("ffn_dim must be positive");
  if (num_classes != 2) fail("num_classes must be 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
}

nlohmann::json ModelConfig::ToJson() const {
  return {{"vocab_size", vocab_size}, {"max_positions", max_positions},
          {"hidden_dim", hidden_dim}, {"num_heads", num_heads},
          {"num_layers", num_layers}, {"ffn_dim", ffn_dim},
          {"num_classes", num_classes}, {"dropout_rate", dropout_rate}};
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("preset")) {
    const std::string preset = j.at("preset").get<std::string>();
    if (preset == "full") {
      c = FullScale();
    } else if (preset == "toy") {
      c = Toy();
    } else {
      throw Error(ErrorKind::kConfig, "unknown model preset '" + preset + "'");
    }
  }
  try {
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_positions = j.value("max_positions", c.max_positions);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.num_heads = j.value("num_heads", c.num_heads);
    c.num_layers = j.value("num_layers", c.num_layers);
    c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("model config: ") + e.what());
  }
  return c;
}

std::size_t ParameterCount(const ModelConfig& c) {
  const std::size_t h = c.hidden_dim;
  const std::size_t per_layer = 4 * (h * h + h)                      // q, k, v, o
                                + (h * c.ffn_dim + c.ffn_dim)       // ffn in
                                + (c.ffn_dim * h + h)               // ffn out
                                + 4 * h;                            // two norms
  return c.vocab_size * h + c.max_positions * h + c.num_layers * per_layer +
         (h * h + h) + (h * c.num_classes + c.num_classes);
}

void ModelTensors::ForEach(const Visitor& visit) {
  visit("token_embeddings", TensorRole::kWeight, token_embeddings);
  visit("position_embeddings", TensorRole::kWeight, position_embeddings);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    LayerTensors& l = layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    visit(p + "query.weight", TensorRole::kWeight, l.query_weight);
    visit(p + "query.bias", TensorRole::kBias, l.query_bias);
    visit(p + "key.weight", TensorRole::kWeight, l.key_weight);
    visit(p + "key.bias", TensorRole::kBias, l.key_bias);
    visit(p + "value.weight", TensorRole::kWeight, l.value_weight);
    visit(p + "value.bias", TensorRole::kBias, l.value_bias);
    visit(p + "output.weight", TensorRole::kWeight, l.output_weight);
    visit(p + "output.bias", TensorRole::kBias, l.output_bias);
    visit(p + "attention_norm.scale", TensorRole::kNorm, l.attention_norm_scale);
    visit(p + "attention_norm.shift", TensorRole::kNorm, l.attention_norm_shift);
    visit(p + "ffn_in.weight", TensorRole::kWeight, l.ffn_in_weight);
    visit(p + "ffn_in.bias", TensorRole::kBias, l.ffn_in_bias);
    visit(p + "ffn_out.weight", TensorRole::kWeight, l.ffn_out_weight);
    visit(p + "ffn_out.bias", TensorRole::kBias, l.ffn_out_bias);
    visit(p + "ffn_norm.scale", TensorRole::kNorm, l.ffn_norm_scale);
    visit(p + "ffn_norm.shift", TensorRole::kNorm, l.ffn_norm_shift);
  }
  visit("pre_head.weight", TensorRole::kWeight, pre_head_weight);
  visit("pre_head.bias", TensorRole::kBias, pre_head_bias);
  visit("head.weight", TensorRole::kWeight, head_weight);
  visit("head.bias", TensorRole::kBias, head_bias);
}

void ModelTensors::ForEach(const ConstVisitor& visit) const {
  const_cast<ModelTensors*>(this)->ForEach(
      [&](std::string_view name, TensorRole role, Matrix& t) {
        visit(name, role, t);
      });
}

ModelTensors ModelTensors::ZerosLike(const ModelTensors& other) {
  ModelTensors out = other;
  out.ForEach([](std::string_view, TensorRole, Matrix& t) { t.setZero(); });
  return out;
}

ModelTensors ModelTensors::Zeros(const ModelConfig& c) {
  const auto h = static_cast<Eigen::Index>(c.hidden_dim);
  const auto f = static_cast<Eigen::Index>(c.ffn_dim);
  ModelTensors t;
  t.token_embeddings = Matrix::Zero(static_cast<Eigen::Index>(c.vocab_size), h);
  t.position_embeddings = Matrix::Zero(static_cast<Eigen::Index>(c.max_positions), h);
  t.layers.resize(c.num_layers);
  for (LayerTensors& l : t.layers) {
    for (Matrix* w : {&l.query_weight, &l.key_weight, &l.value_weight, &l.output_weight}) {
      *w = Matrix::Zero(h, h);
    }
    for (Matrix* b : {&l.query_bias, &l.key_bias, &l.value_bias, &l.output_bias,
                      &l.attention_norm_scale, &l.attention_norm_shift,
                      &l.ffn_out_bias, &l.ffn_norm_scale, &l.ffn_norm_shift}) {
      *b = Matrix::Zero(1, h);
    }
    l.ffn_in_weight = Matrix::Zero(h, f);
    l.ffn_in_bias = Matrix::Zero(1, f);
    l.ffn_out_weight = Matrix::Zero(f, h);
  }
  t.pre_head_weight = Matrix::Zero(h, h);
  t.pre_head_bias = Matrix::Zero(1, h);
  t.head_weight = Matrix::Zero(h, static_cast<Eigen::Index>(c.num_classes));
  t.head_bias = Matrix::Zero(1, static_cast<Eigen::Index>(c.num_classes));
  return t;
}

std::size_t ModelTensors::NumScalars() const {
  std::size_t n = 0;
  ForEach([&](std::string_view, TensorRole, const Matrix& t) {
    n += static_cast<std::size_t>(t.size());
  });
  return n;
}

ModelParameters InitParameters(const ModelConfig& config, std::uint64_t seed) {
  config.Validate();
  ModelParameters params{config, ModelTensors::Zeros(config), 0};
  Rng rng(seed);
  params.tensors.ForEach([&](std::string_view name, TensorRole role, Matrix& t) {
    switch (role) {
      case TensorRole::kWeight:
        for (Eigen::Index i = 0; i < t.size(); ++i) {
          t.data()[i] = rng.TruncatedNormal(kInitStddev);
        }
        break;
      case TensorRole::kBias:
        t.setZero();
        break;
      case TensorRole::kNorm:
        if (name.ends_with(".scale")) {
          t.setOnes();
        } else {
          t.setZero();
        }
        break;
    }
  });
  return params;
}

Matrix Embed(const ModelParameters& params, const TokenSequence& sequence) {
  const std::size_t len = sequence.input_ids.size();
  if (len > params.config.max_positions) {
    throw Error(ErrorKind::kInvalidArgument,
                "sequence length " + std::to_string(len) +
                    " exceeds max_positions " +
                    std::to_string(params.config.max_positions));
  }
  Matrix e(static_cast<Eigen::Index>(len),
           static_cast<Eigen::Index>(params.config.hidden_dim));
  for (std::size_t i = 0; i < len; ++i) {
    const TokenId id = sequence.input_ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= params.config.vocab_size) {
      throw Error(ErrorKind::kInvalidArgument,
                  "token id " + std::to_string(id) + " outside model vocabulary");
    }
    const auto row = static_cast<Eigen::Index>(i);
    e.row(row) = params.tensors.token_embeddings.row(id) +
                 params.tensors.position_embeddings.row(row);
  }
  return e;
}

Eigen::RowVectorXd Softmax(const Eigen::RowVectorXd& logits) {
  Matrix m = logits;
  SoftmaxRowsInPlace(m);
  return m.row(0);
}

ForwardOutput ForwardEmbedded(const ModelParameters& params,
                              std::span<const Matrix> embeddings,
                              std::span<const std::vector<int>> masks,
                              bool train_mode, Rng* dropout_rng) {
  const ModelConfig& config = params.config;
  if (embeddings.size() != masks.size()) {
    throw Error(ErrorKind::kInvalidArgument, "embeddings and masks differ in count");
  }
  auto cache = std::make_shared<ActivationCache>();
  cache->params = &params;
  cache->generation = params.generation;
  cache->items.resize(embeddings.size());

  ForwardOutput out;
  out.logits.resize(static_cast<Eigen::Index>(embeddings.size()),
                    static_cast<Eigen::Index>(config.num_classes));
  for (std::size_t b = 0; b < embeddings.size(); ++b) {
    const Matrix& input = embeddings[b];
    if (static_cast<std::size_t>(input.rows()) > config.max_positions ||
        static_cast<std::size_t>(input.cols()) != config.hidden_dim ||
        masks[b].size() != static_cast<std::size_t>(input.rows())) {
      throw Error(ErrorKind::kInvalidArgument,
                  "embedding shape does not match the model or mask");
    }
    ItemCache& item = cache->items[b];
    item.mask = masks[b];
    Matrix x = input;
    Dropout(x, item.embedding_dropout, config.dropout_rate, train_mode, dropout_rng);
    item.layers.resize(config.num_layers);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
      x = LayerForward(params.tensors.layers[l], config, x, item.mask,
                       train_mode, dropout_rng, item.layers[l]);
    }
    item.cls = x.topRows(1);
    item.pre_head_pre =
        Affine(item.cls, params.tensors.pre_head_weight, params.tensors.pre_head_bias);
    item.pre_head_out = item.pre_head_pre.cwiseMax(0.0);
    Dropout(item.pre_head_out, item.pre_head_dropout, config.dropout_rate,
            train_mode, dropout_rng);
    out.logits.row(static_cast<Eigen::Index>(b)) =
        Affine(item.pre_head_out, params.tensors.head_weight, params.tensors.head_bias)
            .row(0);
  }
  out.probabilities = out.logits;
  SoftmaxRowsInPlace(out.probabilities);
  out.cache = std::move(cache);
  return out;
}

ForwardOutput Forward(const ModelParameters& params,
                      std::span<const TokenSequence> batch, bool train_mode,
                      Rng* dropout_rng) {
  std::vector<Matrix> embeddings;
  std::vector<std::vector<int>> masks;
  embeddings.reserve(batch.size());
  masks.reserve(batch.size());
  for (const TokenSequence& seq : batch) {
    if (!batch.empty() && seq.input_ids.size() != batch.front().input_ids.size()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "sequences in a batch must share one length");
    }
    embeddings.push_back(Embed(params, seq));
    masks.push_back(seq.attention_mask);
  }
  ForwardOutput out = ForwardEmbedded(params, embeddings, masks, train_mode, dropout_rng);
  auto cache = std::const_pointer_cast<ActivationCache>(out.cache);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    cache->items[b].ids = batch[b].input_ids;
  }
  return out;
}

double CrossEntropyLoss(const ForwardOutput& output,
                        std::span<const ClassId> labels) {
  if (labels.size() != output.batch_size()) {
    throw Error(ErrorKind::kInvalidArgument, "label count differs from batch size");
  }
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const ClassId y = labels[b];
    if (y < 0 || y >= static_cast<ClassId>(output.logits.cols())) {
      throw Error(ErrorKind::kInvalidArgument,
                  "label " + std::to_string(y) + " outside {0, 1}");
    }
    const auto row = output.logits.row(static_cast<Eigen::Index>(b));
    const double max = row.maxCoeff();
    const double log_sum = max + std::log((row.array() - max).exp().sum());
    total += log_sum - row(y);
  }
  return total / static_cast<double>(labels.size());
}

BackwardResult BackwardFromLogits(const ModelParameters& params,
                                  const ForwardOutput& output,
                                  const Matrix& logit_gradients,
                                  bool embedding_gradients_only) {
  const ActivationCache* cache = output.cache.get();
  if (cache == nullptr) {
    throw Error(ErrorKind::kStaleCache, "forward output carries no activation cache");
  }
  if (cache->params != &params || cache->generation != params.generation) {
    throw Error(ErrorKind::kStaleCache,
                "activation cache was produced by different parameters");
  }
  if (logit_gradients.rows() != output.logits.rows() ||
      logit_gradients.cols() != output.logits.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "logit gradient shape differs from logits");
  }
  const ModelConfig& config = params.config;
  const ModelTensors& t = params.tensors;
  BackwardResult result;
  if (embedding_gradients_only) {
    ModelTensors shell;
    shell.layers = t.layers;
    shell.pre_head_weight = t.pre_head_weight;
    shell.pre_head_bias = t.pre_head_bias;
    shell.head_weight = t.head_weight;
    shell.head_bias = t.head_bias;
    result.gradients.tensors = ModelTensors::ZerosLike(shell);
  } else {
    result.gradients.tensors = ModelTensors::ZerosLike(t);
  }
  ModelTensors& g = result.gradients.tensors;

  for (std::size_t b = 0; b < cache->items.size(); ++b) {
    const ItemCache& item = cache->items[b];
    const Matrix grad_logits = logit_gradients.row(static_cast<Eigen::Index>(b));
    AccumulateAffine(item.pre_head_out, grad_logits, g.head_weight, g.head_bias);
    Matrix grad_pre_head = grad_logits * t.head_weight.transpose();
    DropoutBackward(grad_pre_head, item.pre_head_dropout);
    grad_pre_head.array() *= (item.pre_head_pre.array() > 0.0).cast<double>();
    AccumulateAffine(item.cls, grad_pre_head, g.pre_head_weight, g.pre_head_bias);

    const Eigen::Index len = static_cast<Eigen::Index>(item.mask.size());
    Matrix grad_x = Matrix::Zero(len, static_cast<Eigen::Index>(config.hidden_dim));
    grad_x.row(0) = grad_pre_head * t.pre_head_weight.transpose();
    for (std::size_t l = config.num_layers; l-- > 0;) {
      grad_x = LayerBackward(t.layers[l], config, item.layers[l], grad_x, g.layers[l]);
    }
    DropoutBackward(grad_x, item.embedding_dropout);
    if (!item.ids.empty() && !embedding_gradients_only) {
      for (Eigen::Index i = 0; i < len; ++i) {
        g.token_embeddings.row(item.ids[static_cast<std::size_t>(i)]) += grad_x.row(i);
      }
      g.position_embeddings.topRows(len) += grad_x;
    }
    result.embedding_gradients.push_back(std::move(grad_x));
  }
  return result;
}

GradientSet Backward(const ModelParameters& params,
                     std::span<const TokenSequence> batch,
                     std::span<const ClassId> labels,
                     const ForwardOutput& output) {
  const ActivationCache* cache = output.cache.get();
  if (cache == nullptr) {
    throw Error(ErrorKind::kStaleCache, "forward output carries no activation cache");
  }
  if (batch.size() != cache->items.size() || labels.size() != batch.size()) {
    throw Error(ErrorKind::kStaleCache, "batch differs from the cached forward pass");
  }
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].input_ids != cache->items[b].ids) {
      throw Error(ErrorKind::kStaleCache, "batch differs from the cached forward pass");
    }
  }
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  Matrix grad_logits = output.probabilities;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const ClassId y = labels[b];
    if (y < 0 || y >= static_cast<ClassId>(grad_logits.cols())) {
      throw Error(ErrorKind::kInvalidArgument,
                  "label " + std::to_string(y) + " outside {0, 1}");
    }
    grad_logits(static_cast<Eigen::Index>(b), y) -= 1.0;
  }
  grad_logits *= inv_batch;
  return BackwardFromLogits(params, output, grad_logits).gradients;
}

const Matrix& AttentionProbabilities(const ForwardOutput& output,
                                     std::size_t item, std::size_t layer,
                                     std::size_t head) {
  if (!output.cache || item >= output.cache->items.size() ||
      layer >= output.cache->items[item].layers.size() ||
      head >= output.cache->items[item].layers[layer].probabilities.size()) {
    throw Error(ErrorKind::kInvalidArgument, "attention index out of range");
  }
  return output.cache->items[item].layers[layer].probabilities[head];
}

void CheckSameShapes(const ModelTensors& actual, const ModelTensors& expected) {
  std::vector<const Matrix*> actual_list;
  actual.ForEach([&](std::string_view, TensorRole, const Matrix& m) {
    actual_list.push_back(&m);
  });
  std::size_t i = 0;
  expected.ForEach([&](std::string_view name, TensorRole, const Matrix& m) {
    if (i >= actual_list.size()) {
      throw Error(ErrorKind::kShapeMismatch, "missing tensor " + std::string(name));
    }
    CheckSameShape(*actual_list[i++], m, name);
  });
  if (i != actual_list.size()) {
    throw Error(ErrorKind::kShapeMismatch, "unexpected extra tensors");
  }
}

}  // namespace phishlens
