#include "livechat/cli/run_config.hpp"

#include <fstream>

#include "livechat/common/errors.hpp"

namespace livechat::cli {

model::ModelConfig RunConfig::model_for_corpus(std::size_t corpus_d_frame) const {
  model::ModelConfig m = model;
  if (m.d_frame == 0) {
    m.d_frame = corpus_d_frame;
  } else if (m.d_frame != corpus_d_frame) {
    throw ConfigError("config d_frame=" + std::to_string(m.d_frame) + " but the corpus has d_frame=" +
                      std::to_string(corpus_d_frame));
  }
  m.validate();
  return m;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j = model::config_to_json(c.model);
  j["context_comments_eval"] = c.context_comments_eval;
  const nlohmann::json train = train::train_config_to_json(c.train);
  for (auto& [key, value] : train.items()) j[key] = value;
  j["init_std"] = c.init_std;
  j["corpus"] = c.corpus;
  j["vocab"] = c.vocab;
  j["checkpoint"] = c.checkpoint;
  j["out_dir"] = c.out_dir;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  nlohmann::json merged = run_config_to_json(RunConfig{});
  for (auto& [key, value] : j.items()) {
    if (!merged.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    const auto& def = merged[key];
    const bool ok = def.is_boolean()          ? value.is_boolean()
                    : def.is_number_integer() ? value.is_number_integer() && value.get<long long>() >= 0
                    : def.is_number()         ? value.is_number()
                                              : value.is_string();
    if (!ok) throw ConfigError("config key '" + key + "' has the wrong type: " + value.dump());
    merged[key] = value;
  }
  RunConfig c;
  const std::size_t d_frame = merged.at("d_frame").get<std::size_t>();
  merged["d_frame"] = d_frame == 0 ? 1 : d_frame;
  try {
    c.model = model::config_from_json(merged);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.model.d_frame = d_frame;
  c.context_comments_eval = merged.at("context_comments_eval").get<std::size_t>();
  if (c.context_comments_eval == 0) throw ConfigError("context_comments_eval must be >= 1");
  c.train.lr = merged.at("lr").get<double>();
  c.train.batch_size = merged.at("batch_size").get<std::size_t>();
  c.train.epochs_pretrain = merged.at("epochs_pretrain").get<std::size_t>();
  c.train.epochs_train = merged.at("epochs_train").get<std::size_t>();
  c.train.p_mask = merged.at("p_mask").get<double>();
  c.train.augmentation = merged.at("augmentation").get<bool>();
  c.train.seed = merged.at("seed").get<std::uint64_t>();
  c.train.grad_clip = merged.at("grad_clip").get<double>();
  c.train.validate();
  c.init_std = merged.at("init_std").get<double>();
  if (!(c.init_std > 0.0)) throw ConfigError("init_std must be positive");
  c.corpus = merged.at("corpus").get<std::string>();
  c.vocab = merged.at("vocab").get<std::string>();
  c.checkpoint = merged.at("checkpoint").get<std::string>();
  c.out_dir = merged.at("out_dir").get<std::string>();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments) {
  if (assignments.empty()) return;
  nlohmann::json j = run_config_to_json(config);
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + a + "' is not key=value");
    const std::string key = a.substr(0, eq), text = a.substr(eq + 1);
    if (!j.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    j[key] = value;
  }
  config = run_config_from_json(j);
}

}  // namespace livechat::cli
