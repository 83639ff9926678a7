#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fewshot/embedding_store.hpp"
#include "fewshot/random.hpp"

namespace fewshot {

/// Isotropic Gaussian clusters. Class centers sit at distance `separation`
/// from the origin along orthonormal directions (random unit directions once
/// classes > dim); samples add N(0, noise^2) per component.
struct SyntheticSpec {
  std::size_t classes = 8;
  std::size_t samples_per_class = 100;
  std::size_t dim = 16;
  double separation = 10.0;
  double noise = 1.0;
  /// Per class, the first fraction is tagged train, the next validation and
  /// the remainder test.
  double train_fraction = 0.6;
  double validation_fraction = 0.2;
  /// Randomly permutes labels across all records after generation.
  bool shuffle_labels = false;
  std::uint64_t seed = 0;
};

DatasetManifest generate_gaussian_clusters(const SyntheticSpec& spec);

/// Classes that live on a circle in a 2-D signal plane, padded with
/// high-variance nuisance dimensions and mixed by a random orthogonal
/// matrix. Raw cosine similarity is dominated by the nuisance; projecting
/// back onto the signal plane recovers the classes. Base classes are tagged
/// train, novel classes (at interleaved angles) test.
struct RotatedClusterSpec {
  std::size_t base_classes = 16;
  std::size_t novel_classes = 8;
  std::size_t samples_per_class = 100;
  std::size_t dim = 16;
  double radius = 1.0;
  double signal_noise = 0.15;
  double nuisance_noise = 1.0;
  std::uint64_t seed = 0;
};

struct RotatedClusters {
  DatasetManifest manifest;
  /// Row-major dim x dim orthogonal matrix: stored vector = mixing * latent.
  std::vector<double> mixing;
};

RotatedClusters generate_rotated_clusters(const RotatedClusterSpec& spec);

/// Uniformly random orthogonal matrix (Gram-Schmidt on Gaussian columns),
/// row-major.
std::vector<double> random_orthogonal(std::size_t dim, Rng& rng);

}  // namespace fewshot
