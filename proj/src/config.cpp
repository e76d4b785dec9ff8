#include "coral/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "coral/error.hpp"

namespace coral {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw_usage("config key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw_usage("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const uint64_t r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw_usage("config key '" + key + "' expects an unsigned integer, got '" +
                v + "'");
  }
}

}  // namespace

void Config::apply_preset(const std::string& name) {
  if (name == "paper") {
    grid_cells_x = grid_cells_y = 80;
    grid_resolution = 0.5;
    camera_width = camera_height = 112;
    net_width = 1.0;
    net_clusters = 64;
    net_descriptor = 256;
    loss_alpha = 0.5;
    loss_beta = 0.2;
    train_positives = 2;
    train_negatives = 18;
    data_lidar_rings = 76;
    data_lidar_azimuths = 360;
    data_lidar_max_range = 40.0;
  } else if (name == "desk") {
    grid_cells_x = grid_cells_y = 40;
    grid_resolution = 0.5;
    camera_width = camera_height = 56;
    net_width = 0.125;
    net_clusters = 8;
    net_descriptor = 256;
    // two revisits give each place a single positive partner
    train_positives = 1;
    train_negatives = 10;
    train_lr = 1e-3;
    data_lidar_rings = 38;
    data_lidar_azimuths = 240;
    data_lidar_max_range = 16.0;
  } else {
    throw_usage("unknown preset '" + name + "' (expected desk or paper)");
  }
}

void Config::set(const std::string& key, const std::string& value) {
  using Setter = std::function<void(Config&, const std::string&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"seed", [](Config& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
      {"threads", [](Config& c, const std::string& k, const std::string& v) { c.threads = to_int(k, v); }},
      {"grid.cells_x", [](Config& c, const std::string& k, const std::string& v) { c.grid_cells_x = to_int(k, v); }},
      {"grid.cells_y", [](Config& c, const std::string& k, const std::string& v) { c.grid_cells_y = to_int(k, v); }},
      {"grid.resolution", [](Config& c, const std::string& k, const std::string& v) { c.grid_resolution = to_double(k, v); }},
      {"map.sigma0", [](Config& c, const std::string& k, const std::string& v) { c.map_sigma0 = to_double(k, v); }},
      {"map.range_k", [](Config& c, const std::string& k, const std::string& v) { c.map_range_k = to_double(k, v); }},
      {"map.gate_sigma", [](Config& c, const std::string& k, const std::string& v) { c.map_gate_sigma = to_double(k, v); }},
      {"map.outlier_limit", [](Config& c, const std::string& k, const std::string& v) { c.map_outlier_limit = to_int(k, v); }},
      {"map.clear_margin", [](Config& c, const std::string& k, const std::string& v) { c.map_clear_margin = to_double(k, v); }},
      {"map.window_half", [](Config& c, const std::string& k, const std::string& v) { c.map_window_half = to_double(k, v); }},
      {"camera.width", [](Config& c, const std::string& k, const std::string& v) { c.camera_width = to_int(k, v); }},
      {"camera.height", [](Config& c, const std::string& k, const std::string& v) { c.camera_height = to_int(k, v); }},
      {"camera.fov_deg", [](Config& c, const std::string& k, const std::string& v) { c.camera_fov_deg = to_double(k, v); }},
      {"camera.pitch_deg", [](Config& c, const std::string& k, const std::string& v) { c.camera_pitch_deg = to_double(k, v); }},
      {"net.width", [](Config& c, const std::string& k, const std::string& v) { c.net_width = to_double(k, v); }},
      {"net.fusion", [](Config& c, const std::string&, const std::string& v) { c.net_fusion = v; }},
      {"net.depth", [](Config& c, const std::string&, const std::string& v) { c.net_depth = v; }},
      {"net.modality", [](Config& c, const std::string&, const std::string& v) { c.net_modality = v; }},
      {"net.clusters", [](Config& c, const std::string& k, const std::string& v) { c.net_clusters = to_int(k, v); }},
      {"net.descriptor", [](Config& c, const std::string& k, const std::string& v) { c.net_descriptor = to_int(k, v); }},
      {"net.fpn_width", [](Config& c, const std::string& k, const std::string& v) { c.net_fpn_width = to_int(k, v); }},
      {"net.merge_width", [](Config& c, const std::string& k, const std::string& v) { c.net_merge_width = to_int(k, v); }},
      {"net.mlp_layers", [](Config& c, const std::string& k, const std::string& v) { c.net_mlp_layers = to_int(k, v); }},
      {"loss.alpha", [](Config& c, const std::string& k, const std::string& v) { c.loss_alpha = to_double(k, v); }},
      {"loss.beta", [](Config& c, const std::string& k, const std::string& v) { c.loss_beta = to_double(k, v); }},
      {"loss.second_term", [](Config& c, const std::string&, const std::string& v) { c.loss_second_term = v; }},
      {"train.positives", [](Config& c, const std::string& k, const std::string& v) { c.train_positives = to_int(k, v); }},
      {"train.negatives", [](Config& c, const std::string& k, const std::string& v) { c.train_negatives = to_int(k, v); }},
      {"train.lr", [](Config& c, const std::string& k, const std::string& v) { c.train_lr = to_double(k, v); }},
      {"train.epochs", [](Config& c, const std::string& k, const std::string& v) { c.train_epochs = to_int(k, v); }},
      {"train.stage1_epochs", [](Config& c, const std::string& k, const std::string& v) { c.train_stage1_epochs = to_int(k, v); }},
      {"train.max_steps", [](Config& c, const std::string& k, const std::string& v) { c.train_max_steps = to_int(k, v); }},
      {"train.lr_halve_every", [](Config& c, const std::string& k, const std::string& v) { c.train_lr_halve_every = to_int(k, v); }},
      {"train.runs", [](Config& c, const std::string&, const std::string& v) { c.train_runs = v; }},
      {"train.checkpoint_every", [](Config& c, const std::string& k, const std::string& v) { c.train_checkpoint_every = to_int(k, v); }},
      {"mine.positive_radius", [](Config& c, const std::string& k, const std::string& v) { c.mine_positive_radius = to_double(k, v); }},
      {"mine.positive_heading", [](Config& c, const std::string& k, const std::string& v) { c.mine_positive_heading = to_double(k, v); }},
      {"mine.negative_radius", [](Config& c, const std::string& k, const std::string& v) { c.mine_negative_radius = to_double(k, v); }},
      {"eval.radius", [](Config& c, const std::string& k, const std::string& v) { c.eval_radius = to_double(k, v); }},
      {"eval.percent", [](Config& c, const std::string& k, const std::string& v) { c.eval_percent = to_double(k, v); }},
      {"eval.query_run", [](Config& c, const std::string& k, const std::string& v) { c.eval_query_run = to_int(k, v); }},
      {"data.places", [](Config& c, const std::string& k, const std::string& v) { c.data_places = to_int(k, v); }},
      {"data.revisits", [](Config& c, const std::string& k, const std::string& v) { c.data_revisits = to_int(k, v); }},
      {"data.place_spacing", [](Config& c, const std::string& k, const std::string& v) { c.data_place_spacing = to_double(k, v); }},
      {"data.pos_jitter", [](Config& c, const std::string& k, const std::string& v) { c.data_pos_jitter = to_double(k, v); }},
      {"data.heading_jitter", [](Config& c, const std::string& k, const std::string& v) { c.data_heading_jitter = to_double(k, v); }},
      {"data.run_gains", [](Config& c, const std::string&, const std::string& v) { c.data_run_gains = v; }},
      {"data.dropout", [](Config& c, const std::string& k, const std::string& v) { c.data_dropout = to_double(k, v); }},
      {"data.lidar_rings", [](Config& c, const std::string& k, const std::string& v) { c.data_lidar_rings = to_int(k, v); }},
      {"data.lidar_azimuths", [](Config& c, const std::string& k, const std::string& v) { c.data_lidar_azimuths = to_int(k, v); }},
      {"data.lidar_max_range", [](Config& c, const std::string& k, const std::string& v) { c.data_lidar_max_range = to_double(k, v); }},
      {"data.noise_sigma", [](Config& c, const std::string& k, const std::string& v) { c.data_noise_sigma = to_double(k, v); }},
      {"data.sensor_height", [](Config& c, const std::string& k, const std::string& v) { c.data_sensor_height = to_double(k, v); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw_usage("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_usage("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw_usage("config line " + std::to_string(lineno) + " in " + path +
                  " is not 'key = value'");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate();
}

void Config::validate() const {
  auto is_one_of = [](const std::string& v, std::initializer_list<const char*> opts) {
    return std::any_of(opts.begin(), opts.end(),
                       [&](const char* o) { return v == o; });
  };
  const double w = net_width;
  if (!(std::abs(w - 1.0) < 1e-12 || std::abs(w - 0.5) < 1e-12 ||
        std::abs(w - 0.25) < 1e-12 || std::abs(w - 0.125) < 1e-12))
    throw_usage("net.width must be one of 1, 0.5, 0.25, 0.125");
  if (!is_one_of(net_fusion, {"sum", "concat"}))
    throw_usage("net.fusion must be sum or concat");
  if (!is_one_of(net_depth, {"first", "four"}))
    throw_usage("net.depth must be first or four");
  if (!is_one_of(net_modality, {"fusion", "vision_only", "structure_only"}))
    throw_usage("net.modality must be fusion, vision_only or structure_only");
  if (!is_one_of(loss_second_term, {"negstar_negatives", "anchor_negstar"}))
    throw_usage("loss.second_term must be negstar_negatives or anchor_negstar");
  if (net_clusters < 1) throw_usage("net.clusters must be >= 1");
  if (net_descriptor < 1) throw_usage("net.descriptor must be >= 1");
  if (!(loss_alpha > 0.0) || !(loss_beta > 0.0))
    throw_usage("loss margins must be > 0");
  if (grid_cells_x < 1 || grid_cells_y < 1 || !(grid_resolution > 0))
    throw_usage("invalid grid dimensions");
  if (threads < 1) throw_usage("threads must be >= 1");
  if (train_positives < 1 || train_negatives < 1)
    throw_usage("tuple counts must be >= 1");
}

std::vector<int> Config::train_run_list() const {
  std::vector<int> out;
  for (const auto& s : split_csv(train_runs)) out.push_back(to_int("train.runs", s));
  return out;
}

std::vector<double> Config::run_gain_list() const {
  std::vector<double> out;
  for (const auto& s : split_csv(data_run_gains))
    out.push_back(to_double("data.run_gains", s));
  if (out.empty()) out.push_back(1.0);
  return out;
}

}  // namespace coral
