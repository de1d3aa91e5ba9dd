#include "gacfas/config.hpp"

#include <numbers>
#include <set>

#include "gacfas/io.hpp"
#include "json.hpp"

namespace gacfas {

using nlohmann::json;

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw ConfigError(ConfigErrorKind::invalid_value, what);
  };
  try {
    model.validate();
    optimizer.validate();
    for (const auto& d : domains) d.validate();
  } catch (const ContractError& e) {
    fail(e.what());
  }
  if (model.input_dim() != 2) fail("model.layer_sizes: input dim must be 2 for two-moons data");
  if (domains.empty()) fail("data.domains: need at least one domain");
  if (held_out && *held_out >= domains.size()) fail("data.held_out: index out of range");
  if (held_out && domains.size() < 2) fail("data.held_out: need at least two domains");
  if (steps < 1) fail("steps must be >= 1");
  if (per_domain_batch < 1) fail("per_domain_batch must be >= 1");
  for (const auto& d : domains) {
    if (per_domain_batch > d.n_samples) fail("per_domain_batch exceeds a domain's n_samples");
  }
  if (eval_every < 1) fail("eval_every must be >= 1");
  if (steps % eval_every != 0) fail("eval_every must divide steps");
  if (eval_window < 1) fail("eval_window must be >= 1");
  if (eval_window > num_evaluations()) {
    fail("eval_window (" + std::to_string(eval_window) + ") exceeds the number of evaluations (" +
         std::to_string(num_evaluations()) + ")");
  }
  if (seeds.empty()) fail("seeds: need at least one seed");
  if (diagnostics_every < 1) fail("diagnostics_every must be >= 1");
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  const double deg = std::numbers::pi / 180.0;
  for (int i = 0; i < 4; ++i) {
    DomainSpec d;
    d.rotation = 20.0 * i * deg;
    d.noise_sigma = 0.15;
    d.n_samples = 2000;
    d.seed = 101 + static_cast<std::uint64_t>(i);
    cfg.domains.push_back(d);
  }
  return cfg;
}

namespace {

json to_json(const ExperimentConfig& cfg) {
  json domains = json::array();
  for (const auto& d : cfg.domains) {
    domains.push_back({{"rotation", d.rotation},
                       {"translation", {d.translation[0], d.translation[1]}},
                       {"noise_sigma", d.noise_sigma},
                       {"n_samples", d.n_samples},
                       {"seed", d.seed}});
  }
  const auto& o = cfg.optimizer;
  json j;
  j["model"] = {{"layer_sizes", cfg.model.layer_sizes},
                {"activation", cfg.model.activation == Activation::relu ? "relu" : "tanh"}};
  j["data"] = {{"domains", domains}};
  j["data"]["held_out"] = cfg.held_out ? json(*cfg.held_out) : json("all");
  j["optimizer"] = {{"mode", to_string(o.mode)},
                    {"eta0", o.eta0},
                    {"rho", o.rho},
                    {"gamma", o.gamma},
                    {"weight_decay", o.weight_decay},
                    {"zero_grad_eps", o.zero_grad_eps},
                    {"surrogate_gap", o.compute_surrogate_gap},
                    {"schedule",
                     {{"kind", to_string(o.schedule.kind)},
                      {"period_epochs", o.schedule.period_epochs},
                      {"factor", o.schedule.factor}}}};
  j["steps"] = cfg.steps;
  j["per_domain_batch"] = cfg.per_domain_batch;
  j["eval_every"] = cfg.eval_every;
  j["eval_window"] = cfg.eval_window;
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  j["diagnostics_every"] = cfg.diagnostics_every;
  j["steps_per_epoch"] = cfg.steps_per_epoch;
  return j;
}

/// Reads the keys it is asked for and rejects whatever is left over.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(ConfigErrorKind::invalid_value, label() + ": expected an object");
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(ConfigErrorKind::invalid_value, qualified(key) + ": " + e.what());
    }
  }

  const json* child(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) {
        throw ConfigError(ConfigErrorKind::unknown_key, "unknown key '" + qualified(key) + "'");
      }
    }
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
auto wrap_contract(Fn&& fn) {
  try {
    return fn();
  } catch (const ContractError& e) {
    throw ConfigError(ConfigErrorKind::invalid_value, e.what());
  }
}

DomainSpec read_domain(const json& j, const std::string& path) {
  StrictObject o(j, path);
  DomainSpec d;
  std::vector<double> translation{0.0, 0.0};
  o.read("rotation", d.rotation);
  o.read("translation", translation);
  o.read("noise_sigma", d.noise_sigma);
  o.read("n_samples", d.n_samples);
  o.read("seed", d.seed);
  o.finish();
  if (translation.size() != 2) {
    throw ConfigError(ConfigErrorKind::invalid_value, path + ".translation: expected 2 values");
  }
  d.translation = {translation[0], translation[1]};
  return d;
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig cfg = default_config();
  StrictObject root(j, "");

  if (const json* m = root.child("model")) {
    StrictObject o(*m, "model");
    std::string act = cfg.model.activation == Activation::relu ? "relu" : "tanh";
    o.read("layer_sizes", cfg.model.layer_sizes);
    o.read("activation", act);
    o.finish();
    if (act == "relu") {
      cfg.model.activation = Activation::relu;
    } else if (act == "tanh") {
      cfg.model.activation = Activation::tanh;
    } else {
      throw ConfigError(ConfigErrorKind::invalid_value,
                        "model.activation: expected relu or tanh, got '" + act + "'");
    }
  }

  if (const json* d = root.child("data")) {
    StrictObject o(*d, "data");
    if (const json* list = o.child("domains")) {
      if (!list->is_array()) {
        throw ConfigError(ConfigErrorKind::invalid_value, "data.domains: expected an array");
      }
      cfg.domains.clear();
      for (std::size_t i = 0; i < list->size(); ++i) {
        cfg.domains.push_back(read_domain((*list)[i], "data.domains[" + std::to_string(i) + "]"));
      }
    }
    if (const json* h = o.child("held_out")) {
      if (h->is_string() && h->get<std::string>() == "all") {
        cfg.held_out.reset();
      } else if (h->is_number_unsigned()) {
        cfg.held_out = h->get<std::size_t>();
      } else {
        throw ConfigError(ConfigErrorKind::invalid_value,
                          "data.held_out: expected a domain index or \"all\"");
      }
    }
    o.finish();
  }

  if (const json* opt = root.child("optimizer")) {
    StrictObject o(*opt, "optimizer");
    auto& oc = cfg.optimizer;
    std::string mode = to_string(oc.mode);
    o.read("mode", mode);
    oc.mode = wrap_contract([&] { return parse_optimizer_mode(mode); });
    o.read("eta0", oc.eta0);
    o.read("rho", oc.rho);
    o.read("gamma", oc.gamma);
    o.read("weight_decay", oc.weight_decay);
    o.read("zero_grad_eps", oc.zero_grad_eps);
    o.read("surrogate_gap", oc.compute_surrogate_gap);
    if (const json* s = o.child("schedule")) {
      StrictObject so(*s, "optimizer.schedule");
      std::string kind = to_string(oc.schedule.kind);
      so.read("kind", kind);
      oc.schedule.kind = wrap_contract([&] { return parse_schedule_kind(kind); });
      so.read("period_epochs", oc.schedule.period_epochs);
      so.read("factor", oc.schedule.factor);
      so.finish();
    }
    o.finish();
  }

  root.read("steps", cfg.steps);
  root.read("per_domain_batch", cfg.per_domain_batch);
  root.read("eval_every", cfg.eval_every);
  root.read("eval_window", cfg.eval_window);
  root.read("seeds", cfg.seeds);
  root.read("output_dir", cfg.output_dir);
  root.read("diagnostics_every", cfg.diagnostics_every);
  root.read("steps_per_epoch", cfg.steps_per_epoch);
  root.finish();

  cfg.validate();
  return cfg;
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte);
    throw ConfigError(ConfigErrorKind::parse_error, "parse error at line " + std::to_string(line) +
                                                        ", column " + std::to_string(col) + ": " +
                                                        e.what());
  }
  return from_json(j);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError(ConfigErrorKind::missing_file, "config file not found: " + path.string());
  }
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(ConfigErrorKind::missing_file, e.what());
  }
  return parse_config(text);
}

}  // namespace gacfas
