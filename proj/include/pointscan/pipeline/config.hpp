#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "pointscan/core/error.hpp"
#include "pointscan/geometry/ordering.hpp"
#include "pointscan/importance/importance.hpp"

namespace pointscan {

// Every knob of the classifier pipeline. JSON configs may set any subset of
// the keys; unknown keys are rejected so typos fail loudly instead of
// silently training the wrong model.
struct ModelConfig {
  std::size_t num_classes = 4;
  std::size_t groups = 256;
  std::size_t group_size = 16;
  std::size_t transformer_layers = 4;
  std::size_t mamba_layers = 12;
  std::size_t channel = 384;
  std::size_t heads = 6;
  std::size_t state_dim = 16;
  std::size_t conv_width = 4;
  std::size_t expand = 2;
  std::size_t dt_rank = 0;  // 0 resolves to ceil(channel / 16)
  std::size_t proj_hidden = 128;
  std::size_t proj_dim = 256;
  std::size_t head_hidden = 256;
  double head_dropout = 0.5;
  std::string ordering = "bio";
  std::string pooling = "iap";
  int curve_bits = 10;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double temperature = 1.0;
  double lr = 3e-4;
  double lr_min = 1e-6;
  double weight_decay = 0.05;
  std::size_t batch_size = 32;
  std::size_t epochs = 300;
  std::size_t warmup_epochs = 10;
  std::uint64_t seed = 0;
  bool aug_scale = true;
  bool aug_translate = true;
  bool aug_rotate = false;

  std::size_t resolved_dt_rank() const {
    return dt_rank == 0 ? (channel + 15) / 16 : dt_rank;
  }

  std::size_t inner_dim() const { return expand * channel; }

  void validate() const {
    if (num_classes < 2)
      throw ConfigError("num_classes must be at least 2");
    if (groups == 0 || group_size == 0)
      throw ConfigError("groups and group_size must be positive");
    if (channel == 0) throw ConfigError("channel must be positive");
    if (heads == 0 || channel % heads != 0)
      throw ConfigError("channel " + std::to_string(channel) +
                        " must divide evenly into " + std::to_string(heads) +
                        " heads");
    if (state_dim == 0 || conv_width == 0 || expand == 0)
      throw ConfigError("state_dim, conv_width and expand must be positive");
    if (proj_hidden == 0 || proj_dim == 0 || head_hidden == 0)
      throw ConfigError("projection and head widths must be positive");
    if (head_dropout < 0.0 || head_dropout >= 1.0)
      throw ConfigError("head_dropout must lie in [0, 1)");
    parse_order_strategy(ordering);
    parse_pool_strategy(pooling);
    if (curve_bits < 1 || curve_bits > 21)
      throw ConfigError("curve_bits must lie in [1, 21]");
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0))
      throw ConfigError("loss weights must be non-negative");
    if (!(temperature > 0.0))
      throw ConfigError("temperature must be positive");
    if (!(lr > 0.0) || !(lr_min >= 0.0) || lr_min > lr)
      throw ConfigError("need lr > 0 and 0 <= lr_min <= lr");
    if (!(weight_decay >= 0.0))
      throw ConfigError("weight_decay must be non-negative");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (warmup_epochs > epochs)
      throw ConfigError("warmup_epochs cannot exceed epochs");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["num_classes"] = num_classes;
    j["groups"] = groups;
    j["group_size"] = group_size;
    j["transformer_layers"] = transformer_layers;
    j["mamba_layers"] = mamba_layers;
    j["channel"] = channel;
    j["heads"] = heads;
    j["state_dim"] = state_dim;
    j["conv_width"] = conv_width;
    j["expand"] = expand;
    j["dt_rank"] = dt_rank;
    j["proj_hidden"] = proj_hidden;
    j["proj_dim"] = proj_dim;
    j["head_hidden"] = head_hidden;
    j["head_dropout"] = head_dropout;
    j["ordering"] = ordering;
    j["pooling"] = pooling;
    j["curve_bits"] = curve_bits;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["gamma"] = gamma;
    j["temperature"] = temperature;
    j["lr"] = lr;
    j["lr_min"] = lr_min;
    j["weight_decay"] = weight_decay;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["warmup_epochs"] = warmup_epochs;
    j["seed"] = seed;
    j["aug_scale"] = aug_scale;
    j["aug_translate"] = aug_translate;
    j["aug_rotate"] = aug_rotate;
    return j;
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ModelConfig c;
    for (const auto& [key, value] : j.items()) {
      if (key == "num_classes") c.num_classes = as_count(value, key);
      else if (key == "groups") c.groups = as_count(value, key);
      else if (key == "group_size") c.group_size = as_count(value, key);
      else if (key == "transformer_layers") c.transformer_layers = as_count(value, key);
      else if (key == "mamba_layers") c.mamba_layers = as_count(value, key);
      else if (key == "channel") c.channel = as_count(value, key);
      else if (key == "heads") c.heads = as_count(value, key);
      else if (key == "state_dim") c.state_dim = as_count(value, key);
      else if (key == "conv_width") c.conv_width = as_count(value, key);
      else if (key == "expand") c.expand = as_count(value, key);
      else if (key == "dt_rank") c.dt_rank = as_count(value, key);
      else if (key == "proj_hidden") c.proj_hidden = as_count(value, key);
      else if (key == "proj_dim") c.proj_dim = as_count(value, key);
      else if (key == "head_hidden") c.head_hidden = as_count(value, key);
      else if (key == "head_dropout") c.head_dropout = as_number(value, key);
      else if (key == "ordering") c.ordering = as_string(value, key);
      else if (key == "pooling") c.pooling = as_string(value, key);
      else if (key == "curve_bits") c.curve_bits = int(as_count(value, key));
      else if (key == "alpha") c.alpha = as_number(value, key);
      else if (key == "beta") c.beta = as_number(value, key);
      else if (key == "gamma") c.gamma = as_number(value, key);
      else if (key == "temperature") c.temperature = as_number(value, key);
      else if (key == "lr") c.lr = as_number(value, key);
      else if (key == "lr_min") c.lr_min = as_number(value, key);
      else if (key == "weight_decay") c.weight_decay = as_number(value, key);
      else if (key == "batch_size") c.batch_size = as_count(value, key);
      else if (key == "epochs") c.epochs = as_count(value, key);
      else if (key == "warmup_epochs") c.warmup_epochs = as_count(value, key);
      else if (key == "seed") c.seed = as_seed(value, key);
      else if (key == "aug_scale") c.aug_scale = as_flag(value, key);
      else if (key == "aug_translate") c.aug_translate = as_flag(value, key);
      else if (key == "aug_rotate") c.aug_rotate = as_flag(value, key);
      else throw ConfigError("unknown config key '" + key + "'");
    }
    return c;
  }

  static ModelConfig from_text(const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config parse: ") + e.what());
    }
    return from_json(j);
  }

  static ModelConfig load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
  }

 private:
  static std::size_t as_count(const nlohmann::json& v, const std::string& k) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
      throw ConfigError("config key '" + k + "' must be an integer");
    if (v.is_number_integer() && v.get<long long>() < 0)
      throw ConfigError("config key '" + k + "' must be non-negative");
    return v.get<std::size_t>();
  }

  static std::uint64_t as_seed(const nlohmann::json& v, const std::string& k) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
      throw ConfigError("config key '" + k + "' must be an integer");
    if (v.is_number_integer() && v.get<long long>() < 0)
      throw ConfigError("config key '" + k + "' must be non-negative");
    return v.get<std::uint64_t>();
  }

  static double as_number(const nlohmann::json& v, const std::string& k) {
    if (!v.is_number())
      throw ConfigError("config key '" + k + "' must be a number");
    return v.get<double>();
  }

  static std::string as_string(const nlohmann::json& v, const std::string& k) {
    if (!v.is_string())
      throw ConfigError("config key '" + k + "' must be a string");
    return v.get<std::string>();
  }

  static bool as_flag(const nlohmann::json& v, const std::string& k) {
    if (!v.is_boolean())
      throw ConfigError("config key '" + k + "' must be a boolean");
    return v.get<bool>();
  }
};

}  // namespace pointscan
