#ifndef CORAL_CONFIG_HPP
#define CORAL_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace coral {

// Every tunable in one place. Line-oriented `key = value` files override the
// defaults; unknown keys are rejected with the offending key named.
struct Config {
  uint64_t seed = 7;
  int threads = 1;

  // elevation grid
  int grid_cells_x = 80;
  int grid_cells_y = 80;
  double grid_resolution = 0.5;  // m per cell

  // elevation mapping
  double map_sigma0 = 0.01;      // m, range noise floor
  double map_range_k = 1e-4;     // variance growth with squared range
  double map_gate_sigma = 3.0;   // Mahalanobis acceptance gate
  int map_outlier_limit = 3;     // consecutive rejections before reinit
  double map_clear_margin = 0.2; // m above the ray before a cell is cleared
  double map_window_half = 5.0;  // render window: sensor z +/- this

  // camera (render size doubles as the network's visual input size)
  int camera_width = 112;
  int camera_height = 112;
  double camera_fov_deg = 58.0;
  double camera_pitch_deg = 25.0;  // downward tilt of the optical axis

  // network
  double net_width = 1.0;  // one of 1, 0.5, 0.25, 0.125
  std::string net_fusion = "concat";      // sum | concat
  std::string net_depth = "four";         // first | four
  std::string net_modality = "fusion";    // fusion | vision_only | structure_only
  int net_clusters = 64;
  int net_descriptor = 256;
  int net_fpn_width = 64;    // scaled by net_width
  int net_merge_width = 256; // scaled by net_width
  int net_mlp_layers = 1;

  // loss
  double loss_alpha = 0.5;
  double loss_beta = 0.2;
  std::string loss_second_term = "negstar_negatives";  // | anchor_negstar

  // training
  int train_positives = 2;
  int train_negatives = 18;
  double train_lr = 1e-4;
  int train_epochs = 20;
  int train_stage1_epochs = 2;
  int train_max_steps = 0;      // 0 = epochs decide
  int train_lr_halve_every = 5; // epochs
  std::string train_runs;       // comma list of run ids to mine from; empty = all
  int train_checkpoint_every = 0;  // epochs; 0 = final only

  // tuple mining
  double mine_positive_radius = 10.0;   // m
  double mine_positive_heading = 30.0;  // deg
  double mine_negative_radius = 50.0;   // m

  // retrieval evaluation
  double eval_radius = 25.0;  // m
  double eval_percent = 1.0;
  int eval_query_run = -1;    // restrict queries to one run; -1 = all runs

  // synthetic data generation
  int data_places = 20;
  int data_revisits = 2;
  double data_place_spacing = 65.0;  // m
  double data_pos_jitter = 4.5;      // m, per revisit
  double data_heading_jitter = 14.0; // deg, per revisit
  std::string data_run_gains;        // comma list, cycled per run; empty = 1.0
  double data_dropout = 0.05;        // per-run point dropout fraction
  int data_lidar_rings = 40;
  int data_lidar_azimuths = 240;
  double data_lidar_max_range = 30.0;
  double data_noise_sigma = 0.01;    // m, simulated range noise
  double data_sensor_height = 1.6;   // m above terrain

  void apply_preset(const std::string& name);  // "desk" or "paper"
  void set(const std::string& key, const std::string& value);
  void load_file(const std::string& path);
  void validate() const;

  std::vector<int> train_run_list() const;
  std::vector<double> run_gain_list() const;
};

}  // namespace coral

#endif
