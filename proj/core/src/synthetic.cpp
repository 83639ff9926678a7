#include "fewshot/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "fewshot/error.hpp"

namespace fewshot {

namespace {

std::string padded(std::string_view prefix, std::size_t value, std::size_t width) {
  std::string digits = std::to_string(value);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return std::string(prefix) + digits;
}

std::size_t digit_count(std::size_t n) { return std::to_string(n > 0 ? n - 1 : 0).size(); }

/// Orthonormalizes `count` Gaussian vectors of length `dim` (count <= dim).
std::vector<std::vector<double>> orthonormal_vectors(std::size_t count, std::size_t dim, Rng& rng) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < count) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis) {
      double proj = 0.0;
      for (std::size_t i = 0; i < dim; ++i) proj += v[i] * b[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * b[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-9) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace

std::vector<double> random_orthogonal(std::size_t dim, Rng& rng) {
  const auto basis = orthonormal_vectors(dim, dim, rng);
  std::vector<double> m(dim * dim);
  for (std::size_t c = 0; c < dim; ++c) {
    for (std::size_t r = 0; r < dim; ++r) m[r * dim + c] = basis[c][r];
  }
  return m;
}

DatasetManifest generate_gaussian_clusters(const SyntheticSpec& spec) {
  if (spec.classes == 0 || spec.samples_per_class == 0 || spec.dim == 0) {
    throw Error(ErrorCode::kInvalidArgument, "classes, samples_per_class and dim must be positive");
  }
  if (spec.train_fraction < 0.0 || spec.validation_fraction < 0.0 ||
      spec.train_fraction + spec.validation_fraction > 1.0 + 1e-12) {
    throw Error(ErrorCode::kInvalidArgument,
                "split fractions must be non-negative and sum to at most 1");
  }
  if (spec.separation < 0.0 || spec.noise < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "separation and noise must be non-negative");
  }

  Rng rng(derive_seed(spec.seed, 0));
  std::vector<std::vector<double>> directions;
  if (spec.classes <= spec.dim) {
    directions = orthonormal_vectors(spec.classes, spec.dim, rng);
  } else {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      directions.push_back(orthonormal_vectors(1, spec.dim, rng).front());
    }
  }

  const std::size_t total = spec.classes * spec.samples_per_class;
  std::vector<std::uint32_t> labels(total);
  for (std::size_t i = 0; i < total; ++i) {
    labels[i] = static_cast<std::uint32_t>(i / spec.samples_per_class);
  }
  std::vector<std::vector<float>> points(total, std::vector<float>(spec.dim));
  for (std::size_t i = 0; i < total; ++i) {
    const auto& dir = directions[labels[i]];
    for (std::size_t d = 0; d < spec.dim; ++d) {
      points[i][d] = static_cast<float>(spec.separation * dir[d] + spec.noise * rng.normal());
    }
  }
  if (spec.shuffle_labels) rng.shuffle(std::span<std::uint32_t>(labels));

  DatasetManifest m;
  m.dimension = static_cast<std::uint32_t>(spec.dim);
  const std::size_t width = digit_count(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) m.class_table.push_back(padded("class", c, width));

  const auto n_train = static_cast<std::size_t>(
      std::floor(spec.train_fraction * static_cast<double>(spec.samples_per_class)));
  const auto n_val = static_cast<std::size_t>(
      std::floor(spec.validation_fraction * static_cast<double>(spec.samples_per_class)));
  const std::size_t id_width = digit_count(spec.samples_per_class);
  std::vector<std::size_t> seen(spec.classes, 0);
  m.records.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const std::uint32_t label = labels[i];
    const std::size_t rank = seen[label]++;
    EmbeddingRecord r;
    r.sample_id = m.class_table[label] + "-" + padded("", rank, id_width);
    r.split = rank < n_train ? Split::kTrain
                             : (rank < n_train + n_val ? Split::kValidation : Split::kTest);
    r.domain = "synthetic";
    r.label = label;
    r.vector = std::move(points[i]);
    m.records.push_back(std::move(r));
  }
  return m;
}

RotatedClusters generate_rotated_clusters(const RotatedClusterSpec& spec) {
  if (spec.dim < 3 || spec.base_classes == 0 || spec.samples_per_class == 0) {
    throw Error(ErrorCode::kInvalidArgument, "rotated clusters need dim >= 3 and positive sizes");
  }
  Rng rng(derive_seed(spec.seed, 1));
  RotatedClusters out;
  out.mixing = random_orthogonal(spec.dim, rng);

  DatasetManifest& m = out.manifest;
  m.dimension = static_cast<std::uint32_t>(spec.dim);
  const std::size_t total_classes = spec.base_classes + spec.novel_classes;
  std::vector<double> latent(spec.dim);
  for (std::size_t c = 0; c < total_classes; ++c) {
    const bool novel = c >= spec.base_classes;
    const std::size_t k = novel ? c - spec.base_classes : c;
    const std::size_t of = novel ? spec.novel_classes : spec.base_classes;
    // Novel classes sit half a step away from the base angles.
    const double angle = 2.0 * std::numbers::pi * (static_cast<double>(k) + (novel ? 0.5 : 0.0)) /
                         static_cast<double>(of);
    const std::string name = padded(novel ? "novel" : "base", k, digit_count(of));
    m.class_table.push_back(name);
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      latent[0] = spec.radius * std::cos(angle) + spec.signal_noise * rng.normal();
      latent[1] = spec.radius * std::sin(angle) + spec.signal_noise * rng.normal();
      for (std::size_t d = 2; d < spec.dim; ++d) latent[d] = spec.nuisance_noise * rng.normal();
      EmbeddingRecord r;
      r.sample_id = name + "-" + padded("", s, digit_count(spec.samples_per_class));
      r.split = novel ? Split::kTest : Split::kTrain;
      r.domain = "rotated";
      r.label = static_cast<std::uint32_t>(c);
      r.vector.resize(spec.dim);
      for (std::size_t i = 0; i < spec.dim; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < spec.dim; ++j) v += out.mixing[i * spec.dim + j] * latent[j];
        r.vector[i] = static_cast<float>(v);
      }
      m.records.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace fewshot
