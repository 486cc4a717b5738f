#ifndef NEURON_DISSECT_TESTS_FIXTURE_HPP
#define NEURON_DISSECT_TESTS_FIXTURE_HPP

// Tiny end-to-end fixture: 6 probe images, 4 concepts, 2 layers x 3 neurons.
// Layer 0 neurons fire on the color images, layer 1 on the dog/car images.

#include <filesystem>
#include <string>
#include <vector>

#include "neuron_dissect/neuron_dissect.hpp"

namespace fixture {

namespace nd = neuron_dissect;

inline const std::vector<std::string> kConcepts = {"green", "red", "dog", "car"};

inline const std::vector<std::string> kImageIds = {
    "green_1", "green_2", "red_1", "dog_1", "dog_2", "car_1"};

inline const std::vector<double> kComplexity = {0.2, 0.25, 0.3, 0.6, 0.7, 0.8};

inline nd::EmbeddingMatrix text_embeddings() {
  return nd::EmbeddingMatrix(4, 4, {1, 0, 0, 0,
                                    0, 1, 0, 0,
                                    0, 0, 1, 0,
                                    0, 0, 0, 1});
}

inline nd::EmbeddingMatrix image_embeddings() {
  return nd::EmbeddingMatrix(6, 4, {1.0f, 0.2f, 0.1f, 0.0f,
                                    0.9f, 0.1f, 0.2f, 0.1f,
                                    0.2f, 1.0f, 0.0f, 0.1f,
                                    0.1f, 0.0f, 1.0f, 0.2f,
                                    0.0f, 0.2f, 0.9f, 0.1f,
                                    0.1f, 0.1f, 0.2f, 1.0f});
}

inline std::vector<nd::ActivationTable> layers() {
  return {
      nd::ActivationTable(3, 6, {3.0f, 2.5f, 0.1f, 0.2f, 0.1f, 0.3f,
                                 0.5f, 0.2f, 4.0f, 0.1f, 0.3f, 0.2f,
                                 2.0f, 3.0f, 0.5f, 0.1f, 0.2f, 0.1f}),
      nd::ActivationTable(3, 6, {0.1f, 0.2f, 0.1f, 3.0f, 2.8f, 0.5f,
                                 0.2f, 0.1f, 0.3f, 0.4f, 0.6f, 3.0f,
                                 0.3f, 0.1f, 0.2f, 2.5f, 3.1f, 0.2f}),
  };
}

inline nd::SoftWpmiParams params() {
  nd::SoftWpmiParams p;
  p.top_k = 2;
  return p;
}

inline std::string concepts_text() {
  std::string s;
  for (const auto& c : kConcepts) s += c + "\n";
  return s;
}

inline nd::ImageManifest manifest() {
  std::vector<std::optional<double>> c(kComplexity.begin(), kComplexity.end());
  return nd::ImageManifest(kImageIds, c);
}

/// Writes the fixture inputs into `dir` and returns a dissect config for them.
inline nd::DissectConfig write(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nd::write_tensor(dir / "image_embeddings.ndt", image_embeddings());
  nd::write_tensor(dir / "text_embeddings.ndt", text_embeddings());
  nd::write_file_atomic(dir / "concepts.txt", concepts_text());
  nd::write_file_atomic(dir / "manifest.csv", nd::format_manifest(manifest()));
  nd::write_file_atomic(dir / "categories.csv",
                        "word,category\n"
                        "green,Colors\n"
                        "red,Colors\n"
                        "dog,Natural elements and organisms\n"
                        "car,Objects and machines\n");
  nd::DissectConfig cfg;
  cfg.image_embeddings = dir / "image_embeddings.ndt";
  cfg.text_embeddings = dir / "text_embeddings.ndt";
  cfg.concepts = dir / "concepts.txt";
  cfg.manifest = dir / "manifest.csv";
  const auto ls = layers();
  for (std::size_t l = 0; l < ls.size(); ++l) {
    const auto path = dir / ("layer_" + std::to_string(l) + ".ndt");
    nd::write_tensor(path, ls[l]);
    cfg.activations.push_back(path);
  }
  cfg.params = params();
  return cfg;
}

/// Config pointing at an already-written fixture directory.
inline nd::DissectConfig config_for(const std::filesystem::path& dir) {
  nd::DissectConfig cfg;
  cfg.image_embeddings = dir / "image_embeddings.ndt";
  cfg.text_embeddings = dir / "text_embeddings.ndt";
  cfg.concepts = dir / "concepts.txt";
  cfg.manifest = dir / "manifest.csv";
  cfg.activations = {dir / "layer_0.ndt", dir / "layer_1.ndt"};
  cfg.params = params();
  return cfg;
}

}  // namespace fixture

#endif  // NEURON_DISSECT_TESTS_FIXTURE_HPP
