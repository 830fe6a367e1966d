#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "tppkit/model.hpp"

namespace tpp {

struct TrainConfig {
  double lr = 1e-3;
  int max_epochs = 100;
  int patience = 10;    // epochs without validation improvement before stopping
  int batch_size = 16;  // sequences per optimizer step
  std::uint64_t seed = 0;
  std::string log_path;  // optional CSV: epoch,train_loss,val_loss,wall_seconds

  void validate() const {
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  }
};

struct TrainResult {
  ParamStore params;                // best-validation weights (final epoch for tcgan)
  std::vector<double> train_curve;  // per-event mean loss by epoch
  std::vector<double> val_curve;
  int best_epoch = -1;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_run = 0;
  bool aborted = false;  // stopped on a non-finite loss; params hold the last good weights
};

TrainResult train_model(const ModelConfig& cfg, const Dataset& train, const Dataset& val,
                        const LogNormStats& stats, const TrainConfig& tc);

struct GridPoint {
  double lr = 1e-3;
  int embed_dim = 32;
  int layers = 1;
};

struct GridCell {
  GridPoint point;
  double val_loss = std::numeric_limits<double>::infinity();
  bool aborted = false;
};

struct GridResult {
  GridPoint best;
  TrainResult best_run;
  std::vector<GridCell> cells;
};

// Trains one model per (lr, embed_dim, layers) combination and keeps the run
// with the lowest validation loss. log_path, when set, receives one CSV row
// per cell: lr,embed_dim,layers,val_loss,aborted.
GridResult grid_search(ModelConfig base, const Dataset& train, const Dataset& val,
                       const LogNormStats& stats, TrainConfig tc, const std::vector<double>& lrs,
                       const std::vector<int>& dims, const std::vector<int>& layer_counts,
                       const std::string& log_path = "");

struct SeedStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (0 for a single seed)
  std::vector<double> values;
};

SeedStats run_seeds(const std::vector<std::uint64_t>& seeds,
                    const std::function<double(std::uint64_t)>& fn);

}  // namespace tpp
