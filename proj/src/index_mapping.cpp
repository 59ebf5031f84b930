#include "embedlab/embedding.hpp"

#include <cmath>
#include <limits>

namespace embedlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> iota_from_one(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i + 1;
  return v;
}

// Mutable per-layer pieces of a general presentation, rebuilt into the
// public types at the end.
struct PresentationBuilder {
  NetShape narrow;
  std::vector<std::vector<std::size_t>> maps;  // 0..L
  std::vector<Matrix> alpha_w;                 // 1..L, index 0 unused
  std::vector<Vector> alpha_b;
  std::vector<Vector> beta;  // 0..L
  EffectiveBiases b_star;

  explicit PresentationBuilder(const NetShape& shape) : narrow(shape) {
    const std::size_t depth = shape.depth();
    maps.resize(depth + 1);
    beta.resize(depth + 1);
    alpha_w.resize(depth + 1);
    alpha_b.resize(depth + 1);
    for (std::size_t l = 0; l <= depth; ++l) {
      maps[l] = iota_from_one(shape.width(l));
      beta[l] = Vector::Ones(static_cast<Eigen::Index>(shape.width(l)));
    }
    for (std::size_t l = 1; l <= depth; ++l) {
      alpha_w[l] = Matrix::Ones(shape.width(l), shape.width(l - 1));
      alpha_b[l] = Vector::Zero(shape.width(l));
    }
  }

  std::size_t width(std::size_t l) const { return maps[l].size(); }

  void check_layer(std::size_t l) const {
    if (l < 1 || l + 1 >= maps.size())
      throw EmbeddingError("layer " + std::to_string(l) + " is not a hidden layer (1.." +
                           std::to_string(maps.size() - 2) + ")");
  }

  void add_null(std::size_t l, double value) {
    check_layer(l);
    const auto j = static_cast<Eigen::Index>(width(l));
    maps[l].push_back(0);
    alpha_w[l].conservativeResize(j + 1, Eigen::NoChange);
    alpha_w[l].row(j).setZero();
    alpha_b[l].conservativeResize(j + 1);
    alpha_b[l][j] = value;
    alpha_w[l + 1].conservativeResize(Eigen::NoChange, j + 1);
    alpha_w[l + 1].col(j).setZero();
    beta[l].conservativeResize(j + 1);
    beta[l][j] = kNaN;
    b_star.values[{l, static_cast<std::size_t>(j)}] = value;
  }

  void add_split(std::size_t l, std::size_t neuron, double a) {
    check_layer(l);
    if (neuron < 1 || neuron > width(l))
      throw EmbeddingError("neuron " + std::to_string(neuron) + " out of range 1.." +
                           std::to_string(width(l)) + " in layer " + std::to_string(l));
    const auto src = static_cast<Eigen::Index>(neuron - 1);
    const auto j = static_cast<Eigen::Index>(width(l));
    const std::size_t target = maps[l][neuron - 1];
    maps[l].push_back(target);
    alpha_w[l].conservativeResize(j + 1, Eigen::NoChange);
    alpha_w[l].row(j) = alpha_w[l].row(src);
    alpha_b[l].conservativeResize(j + 1);
    alpha_b[l][j] = alpha_b[l][src];
    alpha_w[l + 1].conservativeResize(Eigen::NoChange, j + 1);
    alpha_w[l + 1].col(j) = a * alpha_w[l + 1].col(src);
    alpha_w[l + 1].col(src) *= (1.0 - a);
    beta[l].conservativeResize(j + 1);
    if (target == 0) {
      beta[l][j] = kNaN;
      b_star.values[{l, static_cast<std::size_t>(j)}] =
          b_star.at(l, static_cast<std::size_t>(src));
    } else {
      beta[l][j] = a * beta[l][src];
      beta[l][src] *= (1.0 - a);
    }
  }

  GeneralEmbedding build() const {
    const std::size_t depth = narrow.depth();
    std::vector<Layer> layers;
    for (std::size_t l = 1; l <= depth; ++l) layers.push_back({alpha_w[l], alpha_b[l]});
    return {IndexMapping(narrow, maps), AlphaSpec{ParamTuple(std::move(layers))},
            BetaCertificate{beta}, b_star};
  }
};

}  // namespace

IndexMapping::IndexMapping(NetShape narrow, std::vector<std::vector<std::size_t>> maps)
    : narrow_(std::move(narrow)), maps_(std::move(maps)) {
  const std::size_t depth = narrow_.depth();
  if (maps_.size() != depth + 1)
    throw EmbeddingError("index mapping needs " + std::to_string(depth + 1) + " layers, got " +
                         std::to_string(maps_.size()));
  for (std::size_t l : {std::size_t{0}, depth}) {
    if (maps_[l] != iota_from_one(narrow_.width(l)))
      throw EmbeddingError("index mapping of boundary layer " + std::to_string(l) +
                           " must be the identity");
  }
  std::vector<std::size_t> wide_widths;
  groups_.resize(depth + 1);
  for (std::size_t l = 0; l <= depth; ++l) {
    const std::size_t m = narrow_.width(l);
    groups_[l].assign(m + 1, {});
    for (std::size_t j = 0; j < maps_[l].size(); ++j) {
      const std::size_t s = maps_[l][j];
      if (s > m)
        throw EmbeddingError("index mapping layer " + std::to_string(l) + " entry " +
                             std::to_string(j + 1) + " = " + std::to_string(s) +
                             " exceeds narrow width " + std::to_string(m));
      groups_[l][s].push_back(j);
    }
    for (std::size_t s = 1; s <= m; ++s)
      if (groups_[l][s].empty())
        throw EmbeddingError("index mapping is not total: narrow neuron " + std::to_string(s) +
                             " of layer " + std::to_string(l) + " has no preimage");
    wide_widths.push_back(maps_[l].size());
  }
  wide_ = NetShape(std::move(wide_widths));
}

IndexMapping IndexMapping::identity(const NetShape& narrow) {
  std::vector<std::vector<std::size_t>> maps;
  for (std::size_t w : narrow.widths()) maps.push_back(iota_from_one(w));
  return IndexMapping(narrow, std::move(maps));
}

IndexMapping IndexMapping::threefold(const NetShape& narrow) {
  std::vector<std::vector<std::size_t>> maps;
  const std::size_t depth = narrow.depth();
  for (std::size_t l = 0; l <= depth; ++l) {
    std::vector<std::size_t> base = iota_from_one(narrow.width(l));
    if (l == 0 || l == depth) {
      maps.push_back(base);
      continue;
    }
    std::vector<std::size_t> tripled;
    for (int copy = 0; copy < 3; ++copy) tripled.insert(tripled.end(), base.begin(), base.end());
    maps.push_back(std::move(tripled));
  }
  return IndexMapping(narrow, std::move(maps));
}

std::size_t IndexMapping::null_count() const {
  std::size_t n = 0;
  for (std::size_t l = 1; l < depth(); ++l) n += groups_[l][0].size();
  return n;
}

double EffectiveBiases::at(std::size_t l, std::size_t j) const {
  auto it = values.find({l, j});
  if (it == values.end())
    throw MissingCertificateError("no effective bias for null neuron " + std::to_string(j + 1) +
                                  " of layer " + std::to_string(l));
  return it->second;
}

GeneralEmbedding present_identity(const NetShape& narrow) {
  return PresentationBuilder(narrow).build();
}

GeneralEmbedding present_null(const NetShape& narrow, std::size_t layer, double alpha) {
  PresentationBuilder b(narrow);
  b.add_null(layer, alpha);
  return b.build();
}

GeneralEmbedding present_split(const NetShape& narrow, std::size_t layer, std::size_t neuron,
                               double alpha) {
  PresentationBuilder b(narrow);
  b.add_split(layer, neuron, alpha);
  return b.build();
}

GeneralEmbedding present_steps(const NetShape& narrow, std::span<const EmbeddingStep> steps) {
  PresentationBuilder b(narrow);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const EmbeddingStep& st = steps[k];
    try {
      if (st.kind == EmbeddingStep::Kind::Null)
        b.add_null(st.layer, st.alpha);
      else
        b.add_split(st.layer, st.neuron, st.alpha);
    } catch (const EmbeddingError& e) {
      throw StepError(k, e.what());
    }
  }
  return b.build();
}

GeneralEmbedding present_threefold(const NetShape& narrow) {
  const std::size_t depth = narrow.depth();
  IndexMapping mapping = IndexMapping::threefold(narrow);
  const NetShape& wide = mapping.wide();

  std::vector<Layer> layers;
  for (std::size_t l = 1; l <= depth; ++l) {
    const std::size_t m = narrow.width(l);
    const std::size_t prev = narrow.width(l - 1);
    Matrix a = Matrix::Zero(wide.width(l), wide.width(l - 1));
    if (l == 1) {
      a.setOnes();
    } else if (l < depth) {
      for (std::size_t p = 0; p < 3; ++p) a.block(p * m, p * prev, m, prev).setOnes();
    } else {
      a.block(0, 0, m, prev).setOnes();
      a.block(0, prev, m, prev).setOnes();
      a.block(0, 2 * prev, m, prev).setConstant(-1.0);
    }
    layers.push_back({a, Vector::Zero(wide.width(l))});
  }

  BetaCertificate beta;
  for (std::size_t l = 0; l <= depth; ++l) {
    Vector b = Vector::Ones(static_cast<Eigen::Index>(wide.width(l)));
    if (l > 0 && l < depth) {
      const auto m = static_cast<Eigen::Index>(narrow.width(l));
      b.segment(2 * m, m).setConstant(-1.0);
    }
    beta.layers.push_back(b);
  }
  return {std::move(mapping), AlphaSpec{ParamTuple(std::move(layers))}, std::move(beta), {}};
}

std::vector<std::size_t> threefold_hidden_positions(const NetShape& narrow, std::size_t copy) {
  if (copy > 2) throw EmbeddingError("three-fold copy index must be 0, 1 or 2");
  const NetShape wide = IndexMapping::threefold(narrow).wide();
  std::vector<std::size_t> pos;
  pos.reserve(narrow.hidden_param_count());
  for (std::size_t l = 1; l < narrow.depth(); ++l) {
    const std::size_t m = narrow.width(l);
    const std::size_t prev = narrow.width(l - 1);
    const std::size_t wide_cols = wide.width(l - 1);
    const std::size_t row0 = copy * m;
    const std::size_t col0 = l == 1 ? 0 : copy * prev;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < prev; ++j)
        pos.push_back(wide.layer_offset(l) + (row0 + i) * wide_cols + col0 + j);
    for (std::size_t i = 0; i < m; ++i) pos.push_back(wide.bias_offset(l) + row0 + i);
  }
  return pos;
}

std::vector<std::size_t> threefold_output_weight_positions(const NetShape& narrow,
                                                           std::size_t copy) {
  if (copy > 2) throw EmbeddingError("three-fold copy index must be 0, 1 or 2");
  const NetShape wide = IndexMapping::threefold(narrow).wide();
  const std::size_t depth = narrow.depth();
  const std::size_t prev = narrow.width(depth - 1);
  const std::size_t wide_cols = wide.width(depth - 1);
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < narrow.width(depth); ++i)
    for (std::size_t j = 0; j < prev; ++j)
      pos.push_back(wide.layer_offset(depth) + i * wide_cols + copy * prev + j);
  return pos;
}

}  // namespace embedlab
