#include "szo/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>

#include "szo/cli/csv.hpp"

namespace szo::cli {

namespace {

constexpr std::uint64_t kInitTag = 0x494E4954;  // "INIT"
constexpr std::uint64_t kDataStream = 0x44415441;  // "DATA"
constexpr std::uint64_t kQuadStream = 0x51554144;  // "QUAD"

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad(const std::string& where, std::string_view key,
                      const std::string& what) {
  throw ConfigError(where + ": " + std::string(key) + ": " + what);
}

struct Parser {
  const std::string& where;
  std::string_view key;

  std::uint64_t u64(std::string_view v) const {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
      bad(where, key, "expected a non-negative integer, got '" + std::string(v) + "'");
    }
    return out;
  }
  std::size_t size(std::string_view v, std::size_t min = 0) const {
    const auto x = u64(v);
    if (x < min) bad(where, key, "must be >= " + std::to_string(min));
    return static_cast<std::size_t>(x);
  }
  double real(std::string_view v) const {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() ||
        !std::isfinite(out)) {
      bad(where, key, "expected a finite number, got '" + std::string(v) + "'");
    }
    return out;
  }
  double positive(std::string_view v) const {
    const double x = real(v);
    if (!(x > 0.0)) bad(where, key, "must be > 0");
    return x;
  }
  double nonnegative(std::string_view v) const {
    const double x = real(v);
    if (!(x >= 0.0)) bad(where, key, "must be >= 0");
    return x;
  }
  bool boolean(std::string_view v) const {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad(where, key, "expected true/false, got '" + std::string(v) + "'");
  }
  std::vector<std::string_view> list(std::string_view v) const {
    std::vector<std::string_view> items;
    while (true) {
      const auto comma = v.find(',');
      const auto item = trim(v.substr(0, comma));
      if (item.empty()) bad(where, key, "empty list entry");
      items.push_back(item);
      if (comma == std::string_view::npos) break;
      v.remove_prefix(comma + 1);
    }
    return items;
  }
};

template <typename T>
std::string join(const std::vector<T>& items,
                 const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ',';
    out += fmt(items[i]);
  }
  return out;
}

std::string fmt_size(const std::size_t& v) { return std::to_string(v); }
std::string fmt_u64(const std::uint64_t& v) { return std::to_string(v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }

using Setter = std::function<void(ExperimentConfig&, const Parser&, std::string_view)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Entry {
  std::string key;
  Setter set;
  Getter get;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table{
      {"objective",
       [](auto& c, const Parser& p, auto v) {
         static const std::vector<std::string_view> known{
             "blobs_mlp", "blobs_logistic", "sparse_quadratic", "mnist_mlp",
             "mnist_logistic"};
         if (std::find(known.begin(), known.end(), v) == known.end()) {
           bad(p.where, p.key, "unknown objective '" + std::string(v) + "'");
         }
         c.objective = std::string(v);
       },
       [](const auto& c) { return c.objective; }},
      {"hidden",
       [](auto& c, const Parser& p, auto v) {
         c.hidden.clear();
         if (v == "none") return;
         for (auto item : p.list(v)) c.hidden.push_back(p.size(item, 1));
       },
       [](const auto& c) {
         return c.hidden.empty() ? std::string("none")
                                 : join<std::size_t>(c.hidden, fmt_size);
       }},
      {"l2", [](auto& c, const Parser& p, auto v) { c.l2 = p.nonnegative(v); },
       [](const auto& c) { return format_double(c.l2); }},
      {"data_seed", [](auto& c, const Parser& p, auto v) { c.data_seed = p.u64(v); },
       [](const auto& c) { return std::to_string(c.data_seed); }},
      {"blobs_classes",
       [](auto& c, const Parser& p, auto v) { c.blobs_classes = p.size(v, 2); },
       [](const auto& c) { return std::to_string(c.blobs_classes); }},
      {"blobs_dims", [](auto& c, const Parser& p, auto v) { c.blobs_dims = p.size(v, 1); },
       [](const auto& c) { return std::to_string(c.blobs_dims); }},
      {"blobs_per_class",
       [](auto& c, const Parser& p, auto v) { c.blobs_per_class = p.size(v, 5); },
       [](const auto& c) { return std::to_string(c.blobs_per_class); }},
      {"blobs_spread",
       [](auto& c, const Parser& p, auto v) { c.blobs_spread = p.nonnegative(v); },
       [](const auto& c) { return format_double(c.blobs_spread); }},
      {"quad_dim", [](auto& c, const Parser& p, auto v) { c.quad_dim = p.size(v, 1); },
       [](const auto& c) { return std::to_string(c.quad_dim); }},
      {"quad_active", [](auto& c, const Parser& p, auto v) { c.quad_active = p.size(v, 1); },
       [](const auto& c) { return std::to_string(c.quad_active); }},
      {"quad_scale", [](auto& c, const Parser& p, auto v) { c.quad_scale = p.positive(v); },
       [](const auto& c) { return format_double(c.quad_scale); }},
      {"quad_offset", [](auto& c, const Parser& p, auto v) { c.quad_offset = p.real(v); },
       [](const auto& c) { return format_double(c.quad_offset); }},
      {"data_dir", [](auto& c, const Parser&, auto v) { c.data_dir = std::string(v); },
       [](const auto& c) { return c.data_dir; }},
      {"mnist_pool", [](auto& c, const Parser& p, auto v) { c.mnist_pool = p.boolean(v); },
       [](const auto& c) { return fmt_bool(c.mnist_pool); }},
      {"variant",
       [](auto& c, const Parser& p, auto v) {
         try {
           c.opt.variant = parse_variant(v);
         } catch (const DomainError& e) {
           bad(p.where, p.key, e.what());
         }
       },
       [](const auto& c) { return std::string(to_string(c.opt.variant)); }},
      {"variants",
       [](auto& c, const Parser& p, auto v) {
         c.variants.clear();
         for (auto item : p.list(v)) {
           try {
             c.variants.push_back(parse_variant(item));
           } catch (const DomainError& e) {
             bad(p.where, p.key, e.what());
           }
         }
       },
       [](const auto& c) {
         return join<Variant>(c.variants, [](const Variant& v) {
           return std::string(to_string(v));
         });
       }},
      {"estimator",
       [](auto& c, const Parser& p, auto v) {
         try {
           c.opt.kind = parse_estimator_kind(v);
         } catch (const DomainError& e) {
           bad(p.where, p.key, e.what());
         }
       },
       [](const auto& c) { return std::string(to_string(c.opt.kind)); }},
      {"mu", [](auto& c, const Parser& p, auto v) { c.opt.mu = p.positive(v); },
       [](const auto& c) { return format_double(c.opt.mu); }},
      {"k", [](auto& c, const Parser& p, auto v) { c.opt.k = p.size(v, 1); },
       [](const auto& c) { return std::to_string(c.opt.k); }},
      {"learning_rate",
       [](auto& c, const Parser& p, auto v) { c.opt.learning_rate = p.positive(v); },
       [](const auto& c) { return format_double(c.opt.learning_rate); }},
      {"theory_mode",
       [](auto& c, const Parser& p, auto v) { c.opt.theory_mode = p.boolean(v); },
       [](const auto& c) { return fmt_bool(c.opt.theory_mode); }},
      {"lipschitz",
       [](auto& c, const Parser& p, auto v) {
         if (v == "auto") {
           c.opt.lipschitz.reset();
         } else {
           c.opt.lipschitz = p.positive(v);
         }
       },
       [](const auto& c) {
         return c.opt.lipschitz ? format_double(*c.opt.lipschitz) : std::string("auto");
       }},
      {"lipschitz_init",
       [](auto& c, const Parser& p, auto v) { c.opt.lipschitz_init = p.positive(v); },
       [](const auto& c) { return format_double(c.opt.lipschitz_init); }},
      {"interval_epochs",
       [](auto& c, const Parser& p, auto v) { c.interval_epochs = p.positive(v); },
       [](const auto& c) { return format_double(c.interval_epochs); }},
      {"interval_steps",
       [](auto& c, const Parser& p, auto v) {
         if (v == "auto") {
           c.interval_steps.reset();
         } else {
           c.interval_steps = p.size(v, 1);
         }
       },
       [](const auto& c) {
         return c.interval_steps ? std::to_string(*c.interval_steps) : std::string("auto");
       }},
      {"keep_fraction",
       [](auto& c, const Parser& p, auto v) {
         const double x = p.real(v);
         if (!(x > 0.0 && x <= 1.0)) bad(p.where, p.key, "must lie in (0, 1]");
         c.opt.schedule.keep_fraction = x;
       },
       [](const auto& c) { return format_double(c.opt.schedule.keep_fraction); }},
      {"max_events",
       [](auto& c, const Parser& p, auto v) { c.opt.schedule.max_events = p.size(v); },
       [](const auto& c) { return std::to_string(c.opt.schedule.max_events); }},
      {"random_candidates",
       [](auto& c, const Parser& p, auto v) { c.opt.random_candidates = p.size(v, 1); },
       [](const auto& c) { return std::to_string(c.opt.random_candidates); }},
      {"batch_size",
       [](auto& c, const Parser& p, auto v) { c.opt.batch_size = p.size(v, 1); },
       [](const auto& c) { return std::to_string(c.opt.batch_size); }},
      {"epochs", [](auto& c, const Parser& p, auto v) { c.epochs = p.size(v); },
       [](const auto& c) { return std::to_string(c.epochs); }},
      {"steps",
       [](auto& c, const Parser& p, auto v) {
         if (v == "auto") {
           c.steps.reset();
         } else {
           c.steps = p.size(v);
         }
       },
       [](const auto& c) { return c.steps ? std::to_string(*c.steps) : std::string("auto"); }},
      {"seeds",
       [](auto& c, const Parser& p, auto v) {
         c.seeds.clear();
         for (auto item : p.list(v)) c.seeds.push_back(p.u64(item));
       },
       [](const auto& c) { return join<std::uint64_t>(c.seeds, fmt_u64); }},
      {"diagnostics",
       [](auto& c, const Parser& p, auto v) { c.opt.diagnostics = p.boolean(v); },
       [](const auto& c) { return fmt_bool(c.opt.diagnostics); }},
      {"eval_interval",
       [](auto& c, const Parser& p, auto v) { c.opt.eval_interval = p.size(v); },
       [](const auto& c) { return std::to_string(c.opt.eval_interval); }},
      {"neighbor_interval",
       [](auto& c, const Parser& p, auto v) { c.opt.neighbor_interval = p.size(v); },
       [](const auto& c) { return std::to_string(c.opt.neighbor_interval); }},
      {"neighbor_samples",
       [](auto& c, const Parser& p, auto v) { c.opt.neighbor_samples = p.size(v, 1); },
       [](const auto& c) { return std::to_string(c.opt.neighbor_samples); }},
      {"neighbor_half_range",
       [](auto& c, const Parser& p, auto v) { c.opt.neighbor_half_range = p.positive(v); },
       [](const auto& c) { return format_double(c.opt.neighbor_half_range); }},
      {"threads",
       [](auto& c, const Parser& p, auto v) {
         c.opt.threads = static_cast<unsigned>(p.size(v, 1));
       },
       [](const auto& c) { return std::to_string(c.opt.threads); }},
      {"grad_hist_interval",
       [](auto& c, const Parser& p, auto v) { c.grad_hist_interval = p.size(v); },
       [](const auto& c) { return std::to_string(c.grad_hist_interval); }},
      {"grad_hist_bins",
       [](auto& c, const Parser& p, auto v) { c.grad_hist_bins = p.size(v, 1); },
       [](const auto& c) { return std::to_string(c.grad_hist_bins); }},
      {"out", [](auto& c, const Parser& p, auto v) {
         if (v.empty()) bad(p.where, p.key, "empty value");
         c.out = std::string(v);
       },
       [](const auto& c) { return c.out; }},
  };
  return table;
}

const Entry* find_entry(std::string_view key) {
  for (const auto& e : entries()) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void set_value(ExperimentConfig& cfg, std::string_view key,
               std::string_view value, const std::string& where) {
  const Entry* e = find_entry(key);
  if (e == nullptr) bad(where, key, "unknown key");
  if (value.empty() && key != "data_dir") bad(where, key, "empty value");
  e->set(cfg, Parser{where, key}, value);
}

ExperimentConfig parse_config(std::string_view text, const std::string& source,
                              ExperimentConfig base) {
  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where + ": expected 'key = value', got '" +
                        std::string(line) + "'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": missing key before '='");
    set_value(base, key, trim(line.substr(eq + 1)), where);
  }
  return base;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return parse_config(text, path);
}

void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("--set " + std::string(assignment) + ": expected key=value");
  }
  set_value(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)),
            "--set");
}

std::shared_ptr<const Objective> make_objective(const ExperimentConfig& cfg,
                                                std::uint64_t seed) {
  if (cfg.objective == "sparse_quadratic") {
    if (cfg.quad_active > cfg.quad_dim) {
      throw ConfigError("quad_active: exceeds quad_dim");
    }
    std::vector<std::size_t> idx(cfg.quad_dim);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    RngStream rng(cfg.data_seed, kQuadStream);
    shuffle_in_place(idx, rng);
    idx.resize(cfg.quad_active);
    std::sort(idx.begin(), idx.end());
    return std::make_shared<QuadraticObjective>(sparse_quadratic_objective(
        cfg.quad_dim, idx, cfg.quad_scale, cfg.quad_offset));
  }

  std::shared_ptr<const Dataset> data;
  if (cfg.objective.rfind("blobs_", 0) == 0) {
    RngStream rng(cfg.data_seed, kDataStream);
    data = std::make_shared<const Dataset>(synth_blobs(
        rng, cfg.blobs_classes, cfg.blobs_dims, cfg.blobs_per_class, cfg.blobs_spread));
  } else {
    std::string dir = cfg.data_dir;
    if (dir.empty()) {
      const char* env = std::getenv("SZO_DATA_DIR");
      if (env != nullptr) dir = env;
    }
    if (dir.empty()) {
      throw ConfigError("data_dir: " + cfg.objective +
                        " needs data_dir or SZO_DATA_DIR");
    }
    data = std::make_shared<const Dataset>(load_mnist(dir, cfg.mnist_pool));
  }

  if (cfg.objective.ends_with("_logistic")) {
    return std::make_shared<LogisticObjective>(data, data->num_classes, cfg.l2);
  }
  std::vector<std::size_t> sizes{data->num_features};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(data->num_classes);
  RngStream init(mix_seed(seed, kInitTag), 0);
  return mlp_objective(sizes, data, init);
}

void resolve(ExperimentConfig& cfg, const Objective& objective) {
  const std::size_t per_epoch = steps_per_epoch(objective, cfg.opt.batch_size);
  if (!cfg.interval_steps) {
    const double steps = std::round(cfg.interval_epochs * static_cast<double>(per_epoch));
    cfg.interval_steps = std::max<std::size_t>(1, static_cast<std::size_t>(steps));
  }
  if (!cfg.steps) cfg.steps = cfg.epochs * per_epoch;
}

OptConfig run_config(const ExperimentConfig& cfg, const Objective& objective,
                     std::uint64_t seed) {
  ExperimentConfig resolved = cfg;
  resolve(resolved, objective);
  OptConfig c = resolved.opt;
  c.schedule.interval_steps = *resolved.interval_steps;
  c.total_steps = *resolved.steps;
  c.seed = seed;
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::string manifest_text(const ExperimentConfig& cfg, const std::string& version) {
  std::string out = "# szo " + version + "\n";
  for (const auto& e : entries()) {
    const std::string value = e.get(cfg);
    out += e.key;
    out += value.empty() ? " =" : " = " + value;
    out += '\n';
  }
  return out;
}

}  // namespace szo::cli
