#include "savir/model/savirt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "savir/error.hpp"

namespace savir::model {

namespace {

constexpr int kRowTriplets = 10;

// Panel indices of triplet t (rows 0..9, columns 10..19).
std::array<int, 3> triplet_panels(int t) {
  const bool column = t >= kRowTriplets;
  const int local = column ? t - kRowTriplets : t;
  if (!column) {
    if (local == 0) return {0, 1, 2};
    if (local == 1) return {3, 4, 5};
    return {6, 7, 8 + (local - 2)};
  }
  if (local == 0) return {0, 3, 6};
  if (local == 1) return {1, 4, 7};
  return {2, 5, 8 + (local - 2)};
}

// Local triplet indices of pair p: (1,2), (1,3a), (2,3a).
std::array<int, 2> pair_triplets(int p) {
  if (p == 0) return {0, 1};
  if (p <= kChoices) return {0, 2 + (p - 1)};
  return {1, 2 + (p - 1 - kChoices)};
}

}  // namespace

template <typename T>
SavirModel<T>::SavirModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int d = config_.d_model;
  int in = 1;
  for (int s = 0; s < kBackboneStages; ++s) {
    const int out = s + 1 < kBackboneStages ? config_.backbone_channels[static_cast<std::size_t>(s)] : d;
    convs_.emplace_back("backbone.conv" + std::to_string(s), in, out);
    convs_.back().init(rng);
    in = out;
  }
  positional_ = Param<T>("tokens.positional", config_.tokens_per_image(), d);
  positional_.value = positional_.value.unaryExpr([&](T) { return static_cast<T>(rng.normal(0.0, 0.02)); });

  const int inner = config_.heads * config_.resolved_head_dim();
  for (int l = 0; l < config_.depth; ++l) {
    const std::string p = "transformer." + std::to_string(l);
    Block b{LayerNorm<T>(p + ".ln1", d),
            Linear<T>(p + ".qkv", d, 3 * inner),
            Linear<T>(p + ".proj", inner, d),
            LayerNorm<T>(p + ".ln2", d),
            Linear<T>(p + ".fc1", d, config_.resolved_mlp_hidden()),
            Linear<T>(p + ".fc2", config_.resolved_mlp_hidden(), d)};
    for (Linear<T>* lin : {&b.qkv, &b.proj, &b.fc1, &b.fc2}) lin->init(rng);
    blocks_.push_back(std::move(b));
  }

  if (config_.context_blind) {
    const int h = config_.resolved_blind_hidden();
    blind_.emplace_back("blind.0", 2 * d, h);
    blind_.emplace_back("blind.1", h, 1);
    for (auto& lin : blind_) lin.init(rng);
    return;
  }
  const int dr = config_.resolved_relation_dim();
  const int ph = config_.resolved_phi_hidden();
  const int sh = config_.resolved_psi_hidden();
  phi_.emplace_back("relation.phi.0", 3 * d, ph);
  phi_.emplace_back("relation.phi.1", ph, dr);
  psi_.emplace_back("shared.psi.0", 2 * dr, sh);
  psi_.emplace_back("shared.psi.1", sh, sh);
  psi_.emplace_back("shared.psi.2", sh, sh);
  psi_.emplace_back("shared.psi.3", sh, dr);
  for (auto& lin : phi_) lin.init(rng);
  for (auto& lin : psi_) lin.init(rng);
}

template <typename T>
Scores<T> SavirModel<T>::forward(std::span<const std::uint8_t> pixels) const {
  ForwardTape<T> tape;
  return forward(pixels, tape, nullptr);
}

template <typename T>
Scores<T> SavirModel<T>::forward(std::span<const std::uint8_t> pixels, ForwardTape<T>& tape, Rng* dropout_rng) const {
  const int side = config_.image_size;
  const std::size_t plane = static_cast<std::size_t>(side) * static_cast<std::size_t>(side);
  if (pixels.size() != plane * kPanels) {
    throw ConfigError("puzzle has " + std::to_string(pixels.size()) + " pixels, model expects 16 panels of " +
                      std::to_string(side) + "x" + std::to_string(side));
  }
  const int count = config_.context_blind ? kChoices : kPanels;
  const std::size_t first = config_.context_blind ? 8 * plane : 0;
  tape.images.resize(1, static_cast<Eigen::Index>(count * plane));
  for (std::size_t i = 0; i < count * plane; ++i) {
    tape.images(0, static_cast<Eigen::Index>(i)) = static_cast<T>(pixels[first + i]) / T(255);
  }
  const Matrix<T> features = backbone_forward(tape.images, count, tape.backbone);
  tape.tokens = tokenize(features);
  tape.attended = transformer_forward(tape.tokens, tape.layers);

  if (config_.context_blind) {
    const int tokens = config_.tokens_per_image();
    const int d = config_.d_model;
    auto& b = tape.blind;
    b.pooled.resize(kChoices, d);
    for (int a = 0; a < kChoices; ++a) b.pooled.row(a) = tape.attended.block(a * tokens, 0, tokens, d).colwise().mean();
    b.input.resize(kChoices, 2 * d);
    b.input.leftCols(d) = b.pooled;
    b.input.rightCols(d).rowwise() = b.pooled.colwise().mean();
    b.hidden_pre = blind_[0].forward(b.input);
    b.hidden = gelu(b.hidden_pre);
    const Matrix<T> logits = blind_[1].forward(b.hidden);
    for (int a = 0; a < kChoices; ++a) tape.scores[static_cast<std::size_t>(a)] = logits(a, 0);
    return tape.scores;
  }

  const Matrix<T> relations = relation_forward(tape.attended, tape.relations);
  const Matrix<T> fused = shared_rule_forward(relations, tape.shared, dropout_rng);
  tape.scores = score(fused);
  return tape.scores;
}

template <typename T>
Matrix<T> SavirModel<T>::backbone_forward(const Matrix<T>& images, int count, BackboneTape<T>& tape) const {
  tape.images = count;
  tape.cols.resize(convs_.size());
  tape.pre.resize(convs_.size());
  tape.post.resize(convs_.size());
  int side = config_.image_size;
  const Matrix<T>* x = &images;
  for (std::size_t s = 0; s < convs_.size(); ++s) {
    tape.pre[s] = convs_[s].forward(*x, count, side, tape.cols[s]);
    tape.post[s] = gelu(tape.pre[s]);
    x = &tape.post[s];
    side = Conv2d<T>::output_side(side);
  }
  return tape.post.back();
}

template <typename T>
Matrix<T> SavirModel<T>::tokenize(const Matrix<T>& features) const {
  const int tokens = config_.tokens_per_image();
  const auto images = features.cols() / tokens;
  Matrix<T> x = features.transpose();
  for (Eigen::Index n = 0; n < images; ++n) x.block(n * tokens, 0, tokens, x.cols()) += positional_.value;
  return x;
}

template <typename T>
Matrix<T> SavirModel<T>::transformer_forward(const Matrix<T>& tokens, std::vector<TransformerLayerTape<T>>& tape) const {
  const Eigen::Index rows = tokens.rows();
  const int heads = config_.heads;
  const int dh = config_.resolved_head_dim();
  const int inner = heads * dh;
  const Eigen::Index group = config_.joint_attention ? rows : config_.tokens_per_image();
  const Eigen::Index groups = rows / group;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  tape.resize(blocks_.size());
  Matrix<T> x = tokens;
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    auto& lt = tape[l];
    lt.input = x;
    lt.normed1 = b.ln1.forward(x, lt.ln1);
    lt.qkv = b.qkv.forward(lt.normed1);
    lt.mixed = Matrix<T>::Zero(rows, inner);
    lt.attention.resize(static_cast<std::size_t>(groups * heads));
    for (Eigen::Index g = 0; g < groups; ++g) {
      for (int h = 0; h < heads; ++h) {
        const auto q = lt.qkv.block(g * group, h * dh, group, dh);
        const auto k = lt.qkv.block(g * group, inner + h * dh, group, dh);
        const auto v = lt.qkv.block(g * group, 2 * inner + h * dh, group, dh);
        Matrix<T>& a = lt.attention[static_cast<std::size_t>(g * heads + h)];
        a.noalias() = (q * k.transpose()) * scale;
        softmax_rows(a);
        lt.mixed.block(g * group, h * dh, group, dh).noalias() = a * v;
      }
    }
    lt.after_attention = x + b.proj.forward(lt.mixed);
    lt.normed2 = b.ln2.forward(lt.after_attention, lt.ln2);
    lt.hidden_pre = b.fc1.forward(lt.normed2);
    lt.hidden = gelu(lt.hidden_pre);
    x = lt.after_attention + b.fc2.forward(lt.hidden);
  }
  return x;
}

template <typename T>
Matrix<T> SavirModel<T>::mlp_forward(const std::vector<Linear<T>>& layers, const Matrix<T>& x, MlpTape<T>& tape,
                                     double dropout, Rng* rng) const {
  tape.inputs.clear();
  tape.pre.clear();
  tape.dropout_mask.resize(0, 0);
  Matrix<T> h = x;
  const std::size_t last = layers.size() - 1;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i == last && dropout > 0.0 && rng != nullptr) {
      const T keep_scale = static_cast<T>(1.0 / (1.0 - dropout));
      tape.dropout_mask = h.unaryExpr([&](T) { return rng->bernoulli(dropout) ? T(0) : keep_scale; });
      h = h.cwiseProduct(tape.dropout_mask);
    }
    tape.inputs.push_back(h);
    Matrix<T> y = layers[i].forward(h);
    if (i == last) return y;
    h = gelu(y);
    tape.pre.push_back(std::move(y));
  }
  return h;
}

template <typename T>
Matrix<T> SavirModel<T>::mlp_backward(std::vector<Linear<T>>& layers, const MlpTape<T>& tape, const Matrix<T>& dy) {
  Matrix<T> d = dy;
  const std::size_t last = layers.size() - 1;
  for (std::size_t i = layers.size(); i-- > 0;) {
    d = layers[i].backward(tape.inputs[i], d);
    if (i == last && tape.dropout_mask.size() > 0) d = d.cwiseProduct(tape.dropout_mask);
    if (i > 0) d = gelu_backward(tape.pre[i - 1], d);
  }
  return d;
}

template <typename T>
Matrix<T> SavirModel<T>::relation_forward(const Matrix<T>& attended, RelationTape<T>& tape) const {
  const int tokens = config_.tokens_per_image();
  const int d = config_.d_model;
  const int triplets = triplet_count();
  tape.input.resize(static_cast<Eigen::Index>(triplets) * tokens, 3 * d);
  for (int t = 0; t < triplets; ++t) {
    const auto panels = triplet_panels(t);
    for (int j = 0; j < 3; ++j) {
      tape.input.block(t * tokens, j * d, tokens, d) = attended.block(panels[static_cast<std::size_t>(j)] * tokens, 0, tokens, d);
    }
  }
  tape.output = mlp_forward(phi_, tape.input, tape.phi, 0.0, nullptr);
  return tape.output;
}

template <typename T>
Matrix<T> SavirModel<T>::shared_rule_forward(const Matrix<T>& relations, SharedRuleTape<T>& tape, Rng* dropout_rng) const {
  const int tokens = config_.tokens_per_image();
  const int dr = config_.resolved_relation_dim();
  auto gather = [&](int triplet_offset, Matrix<T>& input) {
    input.resize(static_cast<Eigen::Index>(kPairCount) * tokens, 2 * dr);
    for (int p = 0; p < kPairCount; ++p) {
      const auto [i, j] = pair_triplets(p);
      input.block(p * tokens, 0, tokens, dr) = relations.block((triplet_offset + i) * tokens, 0, tokens, dr);
      input.block(p * tokens, dr, tokens, dr) = relations.block((triplet_offset + j) * tokens, 0, tokens, dr);
    }
  };
  gather(0, tape.row_input);
  tape.row_output = mlp_forward(psi_, tape.row_input, tape.row_psi, config_.dropout, dropout_rng);
  tape.fused = Matrix<T>::Zero(kPairCount, 2 * dr);
  for (int p = 0; p < kPairCount; ++p) {
    tape.fused.row(p).head(dr) = tape.row_output.block(p * tokens, 0, tokens, dr).colwise().mean();
  }
  if (config_.use_columns) {
    gather(kRowTriplets, tape.col_input);
    tape.col_output = mlp_forward(psi_, tape.col_input, tape.col_psi, config_.dropout, dropout_rng);
    for (int p = 0; p < kPairCount; ++p) {
      tape.fused.row(p).tail(dr) = tape.col_output.block(p * tokens, 0, tokens, dr).colwise().mean();
    }
  } else {
    tape.col_input.resize(0, 0);
    tape.col_output.resize(0, 0);
  }
  return tape.fused;
}

template <typename T>
Scores<T> SavirModel<T>::score(const Matrix<T>& fused) {
  Scores<T> s{};
  const auto principal = fused.row(0);
  for (int a = 0; a < kChoices; ++a) {
    const RowVector<T> choice = T(0.5) * (fused.row(1 + a) + fused.row(1 + kChoices + a));
    s[static_cast<std::size_t>(a)] = principal.dot(choice);
  }
  return s;
}

template <typename T>
void SavirModel<T>::backward(const ForwardTape<T>& tape, const Scores<T>& dscores) {
  const int tokens = config_.tokens_per_image();
  const int d = config_.d_model;
  Matrix<T> dattended = Matrix<T>::Zero(tape.attended.rows(), tape.attended.cols());

  if (config_.context_blind) {
    const auto& b = tape.blind;
    Matrix<T> dlogits(kChoices, 1);
    for (int a = 0; a < kChoices; ++a) dlogits(a, 0) = dscores[static_cast<std::size_t>(a)];
    const Matrix<T> dhidden = blind_[1].backward(b.hidden, dlogits);
    const Matrix<T> dinput = blind_[0].backward(b.input, gelu_backward(b.hidden_pre, dhidden));
    Matrix<T> dpooled = dinput.leftCols(d);
    const RowVector<T> dmean = dinput.rightCols(d).colwise().sum() / T(kChoices);
    dpooled.rowwise() += dmean;
    for (int a = 0; a < kChoices; ++a) {
      dattended.block(a * tokens, 0, tokens, d).rowwise() = dpooled.row(a) / static_cast<T>(tokens);
    }
  } else {
    const int dr = config_.resolved_relation_dim();
    const Matrix<T>& fused = tape.shared.fused;
    Matrix<T> dfused = Matrix<T>::Zero(fused.rows(), fused.cols());
    for (int a = 0; a < kChoices; ++a) {
      const T g = dscores[static_cast<std::size_t>(a)];
      dfused.row(0) += g * T(0.5) * (fused.row(1 + a) + fused.row(1 + kChoices + a));
      dfused.row(1 + a) += g * T(0.5) * fused.row(0);
      dfused.row(1 + kChoices + a) += g * T(0.5) * fused.row(0);
    }

    Matrix<T> drelations = Matrix<T>::Zero(tape.relations.output.rows(), tape.relations.output.cols());
    auto through_psi = [&](int half, int triplet_offset, const MlpTape<T>& psi_tape) {
      Matrix<T> dout(static_cast<Eigen::Index>(kPairCount) * tokens, dr);
      for (int p = 0; p < kPairCount; ++p) {
        dout.block(p * tokens, 0, tokens, dr).rowwise() = dfused.row(p).segment(half * dr, dr) / static_cast<T>(tokens);
      }
      const Matrix<T> din = mlp_backward(psi_, psi_tape, dout);
      for (int p = 0; p < kPairCount; ++p) {
        const auto [i, j] = pair_triplets(p);
        drelations.block((triplet_offset + i) * tokens, 0, tokens, dr) += din.block(p * tokens, 0, tokens, dr);
        drelations.block((triplet_offset + j) * tokens, 0, tokens, dr) += din.block(p * tokens, dr, tokens, dr);
      }
    };
    through_psi(0, 0, tape.shared.row_psi);
    if (config_.use_columns) through_psi(1, kRowTriplets, tape.shared.col_psi);

    const Matrix<T> dphi_in = mlp_backward(phi_, tape.relations.phi, drelations);
    for (int t = 0; t < triplet_count(); ++t) {
      const auto panels = triplet_panels(t);
      for (int j = 0; j < 3; ++j) {
        dattended.block(panels[static_cast<std::size_t>(j)] * tokens, 0, tokens, d) += dphi_in.block(t * tokens, j * d, tokens, d);
      }
    }
  }

  const Matrix<T> dtokens = transformer_backward(tape.layers, std::move(dattended));
  const Eigen::Index images = dtokens.rows() / tokens;
  for (Eigen::Index n = 0; n < images; ++n) positional_.grad += dtokens.block(n * tokens, 0, tokens, d);
  backbone_backward(tape.backbone, dtokens.transpose());
}

template <typename T>
Matrix<T> SavirModel<T>::transformer_backward(const std::vector<TransformerLayerTape<T>>& tape, Matrix<T> dy) {
  const int heads = config_.heads;
  const int dh = config_.resolved_head_dim();
  const int inner = heads * dh;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  for (std::size_t l = blocks_.size(); l-- > 0;) {
    Block& b = blocks_[l];
    const auto& lt = tape[l];
    const Eigen::Index rows = lt.input.rows();
    const Eigen::Index group = config_.joint_attention ? rows : config_.tokens_per_image();
    const Eigen::Index groups = rows / group;

    Matrix<T> dafter = dy;
    const Matrix<T> dhidden = b.fc2.backward(lt.hidden, dy);
    const Matrix<T> dnormed2 = b.fc1.backward(lt.normed2, gelu_backward(lt.hidden_pre, dhidden));
    dafter += b.ln2.backward(dnormed2, lt.ln2);

    const Matrix<T> dmixed = b.proj.backward(lt.mixed, dafter);
    Matrix<T> dqkv = Matrix<T>::Zero(rows, 3 * inner);
    for (Eigen::Index g = 0; g < groups; ++g) {
      for (int h = 0; h < heads; ++h) {
        const Matrix<T>& a = lt.attention[static_cast<std::size_t>(g * heads + h)];
        const auto q = lt.qkv.block(g * group, h * dh, group, dh);
        const auto k = lt.qkv.block(g * group, inner + h * dh, group, dh);
        const auto v = lt.qkv.block(g * group, 2 * inner + h * dh, group, dh);
        const auto dout = dmixed.block(g * group, h * dh, group, dh);
        const Matrix<T> da = dout * v.transpose();
        dqkv.block(g * group, 2 * inner + h * dh, group, dh).noalias() = a.transpose() * dout;
        const ColVector<T> row_dot = da.cwiseProduct(a).rowwise().sum();
        const Matrix<T> ds = a.cwiseProduct(da.colwise() - row_dot) * scale;
        dqkv.block(g * group, h * dh, group, dh).noalias() = ds * k;
        dqkv.block(g * group, inner + h * dh, group, dh).noalias() = ds.transpose() * q;
      }
    }
    const Matrix<T> dnormed1 = b.qkv.backward(lt.normed1, dqkv);
    dy = dafter + b.ln1.backward(dnormed1, lt.ln1);
  }
  return dy;
}

template <typename T>
void SavirModel<T>::backbone_backward(const BackboneTape<T>& tape, Matrix<T> dfeatures) {
  std::vector<int> sides(convs_.size());
  int side = config_.image_size;
  for (std::size_t s = 0; s < convs_.size(); ++s) {
    sides[s] = side;
    side = Conv2d<T>::output_side(side);
  }
  Matrix<T> d = std::move(dfeatures);
  for (std::size_t s = convs_.size(); s-- > 0;) {
    const Matrix<T> dpre = gelu_backward(tape.pre[s], d);
    d = convs_[s].backward(tape.cols[s], dpre, tape.images, sides[s], s > 0);
  }
}

template <typename T>
std::vector<Param<T>*> SavirModel<T>::parameters() {
  std::vector<Param<T>*> out;
  for (auto& c : convs_) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  out.push_back(&positional_);
  for (auto& b : blocks_) {
    for (Param<T>* p : {&b.ln1.gamma, &b.ln1.beta, &b.qkv.weight, &b.qkv.bias, &b.proj.weight, &b.proj.bias,
                        &b.ln2.gamma, &b.ln2.beta, &b.fc1.weight, &b.fc1.bias, &b.fc2.weight, &b.fc2.bias}) {
      out.push_back(p);
    }
  }
  for (auto* group : {&phi_, &psi_, &blind_}) {
    for (auto& lin : *group) {
      out.push_back(&lin.weight);
      out.push_back(&lin.bias);
    }
  }
  return out;
}

template <typename T>
std::vector<const Param<T>*> SavirModel<T>::parameters() const {
  auto mutable_params = const_cast<SavirModel<T>*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

template <typename T>
std::size_t SavirModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

template <typename T>
void SavirModel<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.setZero();
}

template <typename T>
Scores<T> softmax(const Scores<T>& scores) {
  const T max = *std::ranges::max_element(scores);
  Scores<T> p{};
  T sum = 0;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    p[a] = std::exp(scores[a] - max);
    sum += p[a];
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <typename T>
T cross_entropy(const Scores<T>& scores, int label) {
  const T max = *std::ranges::max_element(scores);
  T sum = 0;
  for (T s : scores) sum += std::exp(s - max);
  return max + std::log(sum) - scores[static_cast<std::size_t>(label)];
}

template <typename T>
Scores<T> cross_entropy_grad(const Scores<T>& scores, int label) {
  Scores<T> g = softmax(scores);
  g[static_cast<std::size_t>(label)] -= T(1);
  return g;
}

template <typename T>
T score_margin(const Scores<T>& scores, int label) {
  T best_other = -std::numeric_limits<T>::infinity();
  for (int a = 0; a < kChoices; ++a) {
    if (a != label) best_other = std::max(best_other, scores[static_cast<std::size_t>(a)]);
  }
  return scores[static_cast<std::size_t>(label)] - best_other;
}

template class SavirModel<float>;
template class SavirModel<double>;
template float cross_entropy<float>(const Scores<float>&, int);
template double cross_entropy<double>(const Scores<double>&, int);
template Scores<float> cross_entropy_grad<float>(const Scores<float>&, int);
template Scores<double> cross_entropy_grad<double>(const Scores<double>&, int);
template Scores<float> softmax<float>(const Scores<float>&);
template Scores<double> softmax<double>(const Scores<double>&);
template float score_margin<float>(const Scores<float>&, int);
template double score_margin<double>(const Scores<double>&, int);

}  // namespace savir::model
