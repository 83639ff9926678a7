#include "fewshot/metric_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "byte_io.hpp"
#include "fewshot/error.hpp"

namespace fewshot {

namespace {

constexpr char kHeadMagic[4] = {'P', 'H', 'D', '1'};

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
std::vector<double> project_impl(const ProjectionHead& head, std::span<const T> x) {
  if (x.size() != head.in_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "projection expects length " + std::to_string(head.in_dim()) + ", got " +
                    std::to_string(x.size()));
  }
  std::vector<double> y(head.out_dim(), 0.0);
  const auto w = head.weights();
  for (std::size_t r = 0; r < head.out_dim(); ++r) {
    const double* row = w.data() + r * head.in_dim();
    double s = head.has_bias() ? head.bias()[r] : 0.0;
    for (std::size_t c = 0; c < head.in_dim(); ++c) s += row[c] * static_cast<double>(x[c]);
    y[r] = s;
  }
  return y;
}

void check_temperature(const ClassifierConfig& config) {
  if (!(config.temperature > 0.0) || !std::isfinite(config.temperature)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be positive and finite");
  }
}

}  // namespace

ProjectionHead::ProjectionHead(std::size_t out_dim, std::size_t in_dim, bool with_bias)
    : out_dim_(out_dim),
      in_dim_(in_dim),
      has_bias_(with_bias),
      weights_(out_dim * in_dim, 0.0),
      bias_(with_bias ? out_dim : 0, 0.0) {
  if (out_dim == 0 || in_dim == 0) {
    throw Error(ErrorCode::kInvalidArgument, "projection head dimensions must be positive");
  }
}

ProjectionHead ProjectionHead::identity(std::size_t in_dim, std::size_t out_dim, bool with_bias) {
  ProjectionHead head(out_dim, in_dim, with_bias);
  for (std::size_t i = 0; i < std::min(in_dim, out_dim); ++i) head.weight(i, i) = 1.0;
  return head;
}

void ProjectionHead::check_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(weights_.begin(), weights_.end(), finite) ||
      !std::all_of(bias_.begin(), bias_.end(), finite)) {
    throw Error(ErrorCode::kNonFiniteValue, "projection head has non-finite parameters");
  }
}

std::string encode_head(const ProjectionHead& head) {
  detail::ByteWriter w;
  w.raw(kHeadMagic, sizeof(kHeadMagic));
  w.integer(static_cast<std::uint32_t>(head.out_dim()));
  w.integer(static_cast<std::uint32_t>(head.in_dim()));
  w.integer(static_cast<std::uint8_t>(head.has_bias() ? 1 : 0));
  for (double v : head.weights()) w.f64(v);
  for (double v : head.bias()) w.f64(v);
  return w.take();
}

ProjectionHead decode_head(std::string_view bytes) {
  if (bytes.size() < sizeof(kHeadMagic) ||
      std::memcmp(bytes.data(), kHeadMagic, sizeof(kHeadMagic)) != 0) {
    throw Error(ErrorCode::kCorruptHeader, "missing PHD1 magic");
  }
  detail::ByteReader r(bytes.substr(sizeof(kHeadMagic)));
  const auto out_dim = r.integer<std::uint32_t>();
  const auto in_dim = r.integer<std::uint32_t>();
  const auto has_bias = r.integer<std::uint8_t>();
  if (has_bias > 1) throw Error(ErrorCode::kCorruptHeader, "invalid has_bias flag");
  const std::uint64_t expected =
      8ULL * (static_cast<std::uint64_t>(out_dim) * in_dim + (has_bias ? out_dim : 0));
  if (out_dim == 0 || in_dim == 0 || r.remaining() != expected) {
    throw Error(ErrorCode::kCorruptHeader, "head payload size does not match its dimensions");
  }
  ProjectionHead head(out_dim, in_dim, has_bias == 1);
  for (double& v : head.weights()) v = r.f64();
  for (double& v : head.bias()) v = r.f64();
  head.check_finite();
  return head;
}

void save_head(const ProjectionHead& head, const std::filesystem::path& path) {
  head.check_finite();
  detail::write_file(path, encode_head(head));
}

ProjectionHead load_head(const std::filesystem::path& path) {
  return decode_head(detail::read_file(path));
}

std::vector<double> project(const ProjectionHead& head, std::span<const double> x) {
  return project_impl(head, x);
}

std::vector<double> project(const ProjectionHead& head, std::span<const float> x) {
  return project_impl(head, x);
}

std::vector<double> normalized(std::span<const double> x) {
  const double norm = std::sqrt(dot(x, x));
  if (norm == 0.0) throw Error(ErrorCode::kDegenerateVector, "zero-norm vector");
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v /= norm;
  return out;
}

PrototypeSet::PrototypeSet(std::size_t dim, std::vector<double> means)
    : dim_(dim), means_(std::move(means)) {
  if (dim_ == 0 || means_.size() % dim_ != 0) {
    throw Error(ErrorCode::kInvalidArgument, "prototype buffer is not a whole number of vectors");
  }
  units_.assign(means_.size(), 0.0);
  degenerate_.assign(size(), false);
  for (std::size_t n = 0; n < size(); ++n) {
    const auto m = mean(n);
    const double norm = std::sqrt(dot(m, m));
    if (norm == 0.0) {
      degenerate_[n] = true;
      continue;
    }
    for (std::size_t i = 0; i < dim_; ++i) units_[n * dim_ + i] = m[i] / norm;
  }
}

std::span<const double> PrototypeSet::unit(std::size_t slot) const {
  if (degenerate_[slot]) {
    throw Error(ErrorCode::kDegenerateVector, "prototype " + std::to_string(slot) + " has zero norm");
  }
  return std::span<const double>(units_).subspan(slot * dim_, dim_);
}

PrototypeSet compute_prototypes(const Episode& episode, std::size_t dim, const EmbeddingFn& embed) {
  const std::size_t n_way = episode.n_way();
  std::vector<double> sums(n_way * dim, 0.0);
  std::vector<std::size_t> counts(n_way, 0);
  for (const auto& entry : episode.support) {
    const auto z = embed(*entry.record);
    if (z.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, "support embedding has wrong dimension");
    }
    double* acc = sums.data() + entry.slot * dim;
    for (std::size_t i = 0; i < dim; ++i) acc[i] += z[i];
    ++counts[entry.slot];
  }
  for (std::size_t n = 0; n < n_way; ++n) {
    if (counts[n] == 0) {
      throw Error(ErrorCode::kInvalidArgument, "slot " + std::to_string(n) + " has no support");
    }
    const double inv = 1.0 / static_cast<double>(counts[n]);
    for (std::size_t i = 0; i < dim; ++i) sums[n * dim + i] *= inv;
  }
  return PrototypeSet(dim, std::move(sums));
}

PrototypeSet compute_prototypes(const Episode& episode, const ProjectionHead& head) {
  std::vector<double> scratch;
  return compute_prototypes(episode, head.out_dim(),
                            [&](const EmbeddingRecord& r) -> std::span<const double> {
                              scratch = project(head, std::span<const float>(r.vector));
                              return scratch;
                            });
}

std::vector<double> score_unit(std::span<const double> unit_query, const PrototypeSet& prototypes,
                               const ClassifierConfig& config) {
  check_temperature(config);
  if (unit_query.size() != prototypes.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "query and prototypes differ in dimension");
  }
  std::vector<double> scores(prototypes.size());
  for (std::size_t n = 0; n < prototypes.size(); ++n) {
    scores[n] = dot(unit_query, prototypes.unit(n)) / config.temperature;
  }
  return scores;
}

std::vector<double> score(std::span<const double> query, const PrototypeSet& prototypes,
                          const ClassifierConfig& config) {
  return score_unit(normalized(query), prototypes, config);
}

std::uint32_t predict_unit(std::span<const double> unit_query, const PrototypeSet& prototypes,
                           const ClassifierConfig& config) {
  check_temperature(config);
  if (unit_query.size() != prototypes.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "query and prototypes differ in dimension");
  }
  std::uint32_t best = 0;
  double best_score = 0.0;
  for (std::uint32_t n = 0; n < prototypes.size(); ++n) {
    const double s = dot(unit_query, prototypes.unit(n)) / config.temperature;
    if (n == 0 || s > best_score) {
      best = n;
      best_score = s;
    }
  }
  return best;
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.begin(), scores.end());
  if (p.empty()) return p;
  const double top = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& v : p) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

std::uint32_t argmax_slot(std::span<const double> scores) {
  std::uint32_t best = 0;
  for (std::uint32_t n = 1; n < scores.size(); ++n) {
    if (scores[n] > scores[best]) best = n;
  }
  return best;
}

Classification classify(std::span<const double> query, const PrototypeSet& prototypes,
                        const ClassifierConfig& config) {
  const auto scores = score(query, prototypes, config);
  return {argmax_slot(scores), softmax(scores)};
}

}  // namespace fewshot
