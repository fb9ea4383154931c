#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dirlink/models.hpp"
#include "dirlink/splits.hpp"
#include "dirlink/training.hpp"

namespace dirlink {

/// Experiment description. Text form is `key = value` lines under optional
/// `[section]` headers; list values are comma separated.
///
///   [data]      dataset, feature_file, features, random_dim
///   [model]     model, decoder, hidden, embedding, mlp_layers, k, digae_layers,
///               alpha, beta, decoder_hidden
///   [training]  loss, lr, wd, max_epochs, patience, negatives
///   [run]       seeds, out, workers
///
/// Grid-able keys (model, decoder, mlp_layers, k, digae_layers, alpha, beta,
/// loss, lr, wd) accept lists; the grid is their Cartesian product.
struct ExperimentConfig {
  std::string dataset;
  std::string feature_file;
  FeatureMode features = FeatureMode::degrees;
  std::size_t random_dim = 64;

  std::vector<EncoderKind> models{EncoderKind::sdgae};
  std::vector<DecoderKind> decoders{DecoderKind::inner};
  std::size_t hidden = 64;
  std::size_t embedding = 64;
  std::vector<std::size_t> mlp_layers{2};
  std::vector<std::size_t> k{5};
  std::vector<std::size_t> digae_layers{2};
  std::vector<double> alpha{0.5};
  std::vector<double> beta{0.5};
  std::size_t decoder_hidden = 64;

  std::vector<LossKind> losses{LossKind::bce};
  std::vector<double> lr{0.01};
  std::vector<double> wd{0.0};
  std::size_t max_epochs = 2000;
  std::size_t patience = 200;
  NegativeStrategy negatives = NegativeStrategy::per_run;

  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string out = "out";
  std::size_t workers = 1;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

const char* to_string(FeatureMode m);
FeatureMode parse_feature_mode(const std::string& s);

/// Throws ParseError with the line number on unknown keys or bad values.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize(const ExperimentConfig& cfg);

/// Applies one `key = value` assignment (section-free key); throws std::invalid_argument.
void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Cartesian product of the grid-able lists. Settings that do not apply to an
/// encoder (k for DiGAE, alpha for SDGAE, ...) are not expanded for it.
std::vector<TrainConfig> expand_grid(const ExperimentConfig& cfg);

/// Defaults for the CLI seed list: 0..count-1.
std::vector<std::uint64_t> default_seeds(std::size_t count = 10);

}  // namespace dirlink
