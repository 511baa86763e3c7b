#include "sdgd/config.hpp"

#include <fstream>
#include <functional>
#include <limits>

#include "sdgd/errors.hpp"

namespace sdgd {

using nlohmann::json;

namespace {

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::uint64_t as_u64(const json& v, const std::string& key) { return as_count(v, key); }

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

template <class Parse>
auto with_key(const std::string& key, Parse parse) {
  try {
    return parse();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.find('\'' + key + '\'') != std::string::npos) throw;
    throw ConfigError("config key '" + key + "': " + what);
  }
}

struct Field {
  std::string key;
  std::function<void(const json&, TrainConfig&)> set;
  std::function<json(const TrainConfig&)> get;
};

#define SDGD_COUNT(name, member)                                                         \
  Field {                                                                                \
    name, [](const json& v, TrainConfig& c) { c.member = as_count(v, name); },            \
        [](const TrainConfig& c) { return json(c.member); }                              \
  }
#define SDGD_SEED(name, member)                                                          \
  Field {                                                                                \
    name, [](const json& v, TrainConfig& c) { c.member = as_u64(v, name); },              \
        [](const TrainConfig& c) { return json(c.member); }                              \
  }
#define SDGD_REAL(name, member)                                                          \
  Field {                                                                                \
    name, [](const json& v, TrainConfig& c) { c.member = as_real(v, name); },             \
        [](const TrainConfig& c) { return json(c.member); }                              \
  }
#define SDGD_BOOL(name, member)                                                          \
  Field {                                                                                \
    name, [](const json& v, TrainConfig& c) { c.member = as_bool(v, name); },             \
        [](const TrainConfig& c) { return json(c.member); }                              \
  }
#define SDGD_STRING(name, member)                                                        \
  Field {                                                                                \
    name, [](const json& v, TrainConfig& c) { c.member = as_string(v, name); },           \
        [](const TrainConfig& c) { return json(c.member); }                              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"problem",
       [](const json& v, TrainConfig& c) {
         c.problem = with_key("problem", [&] { return problem_kind_from_string(as_string(v, "problem")); });
       },
       [](const TrainConfig& c) { return json(to_string(c.problem)); }},
      SDGD_COUNT("d", d),
      SDGD_SEED("problem_seed", problem_seed),
      SDGD_SEED("model_seed", model_seed),
      SDGD_SEED("data_seed", data_seed),
      {"hidden",
       [](const json& v, TrainConfig& c) {
         if (!v.is_array()) throw ConfigError("config key 'hidden' must be an array of layer widths");
         std::vector<std::size_t> widths;
         for (std::size_t k = 0; k < v.size(); ++k) {
           widths.push_back(as_count(v[k], "hidden[" + std::to_string(k) + "]"));
         }
         c.hidden = widths;
       },
       [](const TrainConfig& c) { return json(c.hidden); }},
      {"activation",
       [](const json& v, TrainConfig& c) {
         c.activation = with_key("activation", [&] {
           try {
             return activation_from_string(as_string(v, "activation"));
           } catch (const ConfigError&) {
             throw;
           } catch (const Error& e) {
             throw ConfigError(e.what());
           }
         });
       },
       [](const TrainConfig& c) { return json(to_string(c.activation)); }},
      SDGD_BOOL("bias", bias),
      {"algorithm",
       [](const json& v, TrainConfig& c) {
         c.algorithm = with_key("algorithm", [&] { return algorithm_from_string(as_string(v, "algorithm")); });
       },
       [](const TrainConfig& c) { return json(to_string(c.algorithm)); }},
      SDGD_COUNT("batch_points", batch_points),
      SDGD_COUNT("backward_dims", backward_dims),
      SDGD_COUNT("forward_dims", forward_dims),
      SDGD_BOOL("replacement", replacement),
      SDGD_COUNT("accumulation", accumulation),
      SDGD_COUNT("epochs", epochs),
      SDGD_REAL("lr", lr),
      {"schedule",
       [](const json& v, TrainConfig& c) {
         c.schedule = with_key("schedule", [&] { return schedule_from_string(as_string(v, "schedule")); });
       },
       [](const TrainConfig& c) { return json(to_string(c.schedule)); }},
      SDGD_REAL("decay", decay),
      SDGD_BOOL("adversarial.enabled", adversarial.enabled),
      SDGD_COUNT("adversarial.steps", adversarial.steps),
      SDGD_REAL("adversarial.step_size", adversarial.step_size),
      SDGD_COUNT("adversarial.dims", adversarial.dims),
      SDGD_COUNT("test_points", test_points),
      SDGD_COUNT("reference_samples", reference_samples),
      SDGD_COUNT("monitor_points", monitor_points),
      SDGD_COUNT("eval_interval", eval_interval),
      SDGD_COUNT("workers", workers),
      SDGD_STRING("output_dir", output_dir),
      SDGD_STRING("metrics_file", metrics_file),
      SDGD_STRING("checkpoint_file", checkpoint_file),
  };
  return table;
}

#undef SDGD_COUNT
#undef SDGD_SEED
#undef SDGD_REAL
#undef SDGD_BOOL
#undef SDGD_STRING

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

bool is_group(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key.rfind(key + ".", 0) == 0) return true;
  }
  return false;
}

void apply(const json& node, const std::string& prefix, TrainConfig& c) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (const Field* f = find_field(key)) {
      f->set(it.value(), c);
    } else if (is_group(key)) {
      if (!it.value().is_object()) throw ConfigError("config key '" + key + "' must be an object");
      apply(it.value(), key, c);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

void set_path(json& doc, const std::string& path, const json& value) {
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed override key '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    json& child = (*node)[part];
    if (child.is_null()) child = json::object();
    if (!child.is_object()) throw ConfigError("override '" + path + "' descends into a non-object");
    node = &child;
    start = dot + 1;
  }
}

}  // namespace

TrainConfig config_from_json(const json& doc, const std::vector<std::string>& overrides) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  json merged = doc;
  for (const std::string& o : overrides) {
    const std::size_t eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' must look like key=value");
    const std::string key = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    set_path(merged, key, value);
  }
  TrainConfig c;
  apply(merged, "", c);
  return c;
}

TrainConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
  }
  return config_from_json(doc, overrides);
}

json config_to_json(const TrainConfig& config) {
  json doc = json::object();
  for (const Field& f : fields()) set_path(doc, f.key, f.get(config));
  return doc;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace sdgd
