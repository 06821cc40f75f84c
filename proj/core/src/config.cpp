#include "mpforge/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <fmt/format.h>

#include "mpforge/error.hpp"
#include "mpforge/rng.hpp"

namespace mpforge {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& msg) {
  fail(ErrorKind::invalid_config, key + ": " + msg, key);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool looks_numeric(std::string_view s) {
  if (s.empty()) return false;
  double v;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

class ValueParser {
 public:
  ValueParser(std::string_view text, std::string key) : s_(text), key_(std::move(key)) {}

  ConfigValue parse_all() {
    ConfigValue v = value();
    skip_ws();
    if (pos_ != s_.size()) bad(key_, "trailing characters after value");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  ConfigValue value() {
    skip_ws();
    if (pos_ >= s_.size()) bad(key_, "missing value");
    if (s_[pos_] == '"') return quoted();
    if (s_[pos_] == '[') return list();
    std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
    std::string_view tok = s_.substr(start, pos_ - start);
    ConfigValue v;
    v.text = std::string(tok);
    if (tok == "true" || tok == "false") {
      v.kind = ConfigValue::Kind::boolean;
    } else if (looks_numeric(tok)) {
      v.kind = ConfigValue::Kind::number;
    } else {
      bad(key_, "unquoted value '" + v.text + "'");
    }
    return v;
  }

  ConfigValue quoted() {
    ++pos_;
    ConfigValue v;
    v.kind = ConfigValue::Kind::string;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
      v.text.push_back(s_[pos_++]);
    }
    if (pos_ >= s_.size()) bad(key_, "unterminated string");
    ++pos_;
    return v;
  }

  ConfigValue list() {
    ++pos_;
    ConfigValue v;
    v.kind = ConfigValue::Kind::list;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return v;
    }
    for (;;) {
      v.items.push_back(value());
      skip_ws();
      if (pos_ >= s_.size()) bad(key_, "unterminated list");
      if (s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      if (s_[pos_] != ',') bad(key_, "expected ',' in list");
      ++pos_;
    }
  }

  std::string_view s_;
  std::string key_;
  std::size_t pos_ = 0;
};

std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

// typed readers

const ConfigValue& expect_kind(const std::string& key, const ConfigValue& v, ConfigValue::Kind kind, const char* what) {
  if (v.kind != kind) bad(key, std::string("expected ") + what);
  return v;
}

double as_double(const std::string& key, const ConfigValue& v) {
  expect_kind(key, v, ConfigValue::Kind::number, "a number");
  double out = 0.0;
  std::from_chars(v.text.data(), v.text.data() + v.text.size(), out);
  return out;
}

template <typename Int>
Int as_int(const std::string& key, const ConfigValue& v) {
  expect_kind(key, v, ConfigValue::Kind::number, "an integer");
  Int out{};
  auto [ptr, ec] = std::from_chars(v.text.data(), v.text.data() + v.text.size(), out);
  if (ec != std::errc() || ptr != v.text.data() + v.text.size()) bad(key, "expected an integer, got '" + v.text + "'");
  return out;
}

std::string as_string(const std::string& key, const ConfigValue& v) {
  return expect_kind(key, v, ConfigValue::Kind::string, "a quoted string").text;
}

bool as_bool(const std::string& key, const ConfigValue& v) {
  return expect_kind(key, v, ConfigValue::Kind::boolean, "true or false").text == "true";
}

const std::vector<ConfigValue>& as_list(const std::string& key, const ConfigValue& v) {
  return expect_kind(key, v, ConfigValue::Kind::list, "a list").items;
}

std::string amp_init_name(AmpInit a) { return a == AmpInit::ones ? "ones" : "standard"; }

AmpInit amp_init_from(const std::string& key, const std::string& s) {
  if (s == "standard") return AmpInit::standard;
  if (s == "ones") return AmpInit::ones;
  bad(key, "unknown AMP init '" + s + "'");
}

const std::set<std::string> kAlgorithms{"amp", "vamp", "gvamp", "general-gvamp", "general-vamp"};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

template <typename T>
std::string list_text(const std::vector<T>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, std::string>)
      out += quote(xs[i]);
    else
      out += fmt::format("{}", xs[i]);
  }
  return out + "]";
}

}  // namespace

FlatConfig parse_flat_config(std::string_view text) {
  FlatConfig out;
  int lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(strip_comment(text.substr(start, end - start)));
    ++lineno;
    start = end + 1;
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorKind::invalid_config, fmt::format("line {}: expected 'key = value'", lineno));
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) fail(ErrorKind::invalid_config, fmt::format("line {}: empty key", lineno));
    for (char c : key)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'))
        fail(ErrorKind::invalid_config, fmt::format("line {}: bad character in key '{}'", lineno, key), key);
    if (out.count(key)) bad(key, "duplicate key");
    out[key] = ValueParser(trim(line.substr(eq + 1)), key).parse_all();
    if (end == text.size()) break;
  }
  return out;
}

ExperimentConfig experiment_from_flat(const FlatConfig& flat) {
  ExperimentConfig c;
  // the density is attached once the prior kind is known
  std::vector<double> density;
  bool has_density = false;
  for (const auto& [key, v] : flat) {
    try {
      if (key == "model.prior.kind") c.model.prior.kind = prior_kind_from_string(as_string(key, v));
      else if (key == "model.prior.tau_x") c.model.prior.tau_x = as_double(key, v);
      else if (key == "model.prior.rho") c.model.prior.rho = as_double(key, v);
      else if (key == "model.prior.density") {
        has_density = true;
        for (const auto& item : as_list(key, v)) density.push_back(as_double(key, item));
      } else if (key == "model.channel.kind") c.model.channel.kind = channel_kind_from_string(as_string(key, v));
      else if (key == "model.channel.tau_w") c.model.channel.tau_w = as_double(key, v);
      else if (key == "model.sv.kind") c.model.law.kind = sv_law_kind_from_string(as_string(key, v));
      else if (key == "model.sv.s_max") c.model.law.s_max = as_double(key, v);
      else if (key == "model.sv.value") c.model.law.value = as_double(key, v);
      else if (key == "model.sv.mass") c.model.law.mass = as_double(key, v);
      else if (key == "model.sv.kappa") c.model.law.kappa = as_double(key, v);
      else if (key == "model.delta") c.model.delta = as_double(key, v);
      else if (key == "model.matrix_mode") c.model.mode = matrix_mode_from_string(as_string(key, v));
      else if (key == "algorithm") c.algorithm = as_string(key, v);
      else if (key == "sizes") {
        c.sizes.clear();
        for (const auto& item : as_list(key, v)) c.sizes.push_back(as_int<std::int64_t>(key, item));
      } else if (key == "trials") c.trials = as_int<int>(key, v);
      else if (key == "iterations") c.iterations = as_int<int>(key, v);
      else if (key == "seed") c.seed = as_int<std::uint64_t>(key, v);
      else if (key == "functionals") {
        c.functionals.clear();
        for (const auto& item : as_list(key, v)) c.functionals.push_back(as_string(key, item));
      } else if (key == "epsilons") {
        c.epsilons.clear();
        for (const auto& item : as_list(key, v)) c.epsilons.push_back(as_double(key, item));
      } else if (key == "solver.t_min") c.solver.t_min = as_double(key, v);
      else if (key == "solver.t_max") c.solver.t_max = as_double(key, v);
      else if (key == "solver.gamma_min") c.solver.gamma_min = as_double(key, v);
      else if (key == "solver.gamma_max") c.solver.gamma_max = as_double(key, v);
      else if (key == "solver.tau_min") c.solver.tau_min = as_double(key, v);
      else if (key == "solver.tau_max") c.solver.tau_max = as_double(key, v);
      else if (key == "solver.stop_eps1") c.solver.stop_eps1 = as_double(key, v);
      else if (key == "solver.stop_eps2") c.solver.stop_eps2 = as_double(key, v);
      else if (key == "solver.stop_change_eps") c.solver.stop_change_eps = as_double(key, v);
      else if (key == "solver.gamma10") c.solver.gamma10 = as_double(key, v);
      else if (key == "solver.tau10") c.solver.tau10 = as_double(key, v);
      else if (key == "solver.init") c.solver.init = init_mode_from_string(as_string(key, v));
      else if (key == "solver.init_variance") c.solver.init_variance = as_double(key, v);
      else if (key == "solver.amp_init") c.solver.amp_init = amp_init_from(key, as_string(key, v));
      else if (key == "solver.keep_iterates") c.solver.keep_iterates = as_bool(key, v);
      else if (key == "se.nodes") c.se_nodes = as_int<int>(key, v);
      else if (key == "se.mc_samples") c.mc_samples = as_int<std::int64_t>(key, v);
      else if (key == "se.replicates") c.replicates = as_int<int>(key, v);
      else if (key == "se.literal") c.se_literal = as_bool(key, v);
      else if (key == "output.dir") c.output_dir = as_string(key, v);
      else bad(key, "unknown key");
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::invalid_config && e.field() == key) throw;
      bad(key, e.what());
    }
  }
  if (has_density) {
    if (c.model.prior.kind != PriorKind::grid) bad("model.prior.density", "only grid priors take a density");
    c.model.prior.density = std::move(density);
  }
  return c;
}

ExperimentConfig parse_experiment_config(std::string_view text) {
  ExperimentConfig c = experiment_from_flat(parse_flat_config(text));
  validate_config(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io_error, "cannot read config '" + path + "'", "--config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::string out;
  auto line = [&out](std::string_view key, const std::string& value) { out += fmt::format("{} = {}\n", key, value); };
  auto num = [](double v) { return fmt::format("{}", v); };
  line("algorithm", quote(c.algorithm));
  line("seed", fmt::format("{}", c.seed));
  line("sizes", list_text(c.sizes));
  line("trials", fmt::format("{}", c.trials));
  line("iterations", fmt::format("{}", c.iterations));
  line("functionals", list_text(c.functionals));
  line("epsilons", list_text(c.epsilons));
  line("model.delta", num(c.model.delta));
  line("model.matrix_mode", quote(std::string(to_string(c.model.mode))));
  line("model.prior.kind", quote(std::string(to_string(c.model.prior.kind))));
  line("model.prior.tau_x", num(c.model.prior.tau_x));
  line("model.prior.rho", num(c.model.prior.rho));
  if (c.model.prior.kind == PriorKind::grid) line("model.prior.density", list_text(c.model.prior.density));
  line("model.channel.kind", quote(std::string(to_string(c.model.channel.kind))));
  line("model.channel.tau_w", num(c.model.channel.tau_w));
  line("model.sv.kind", quote(std::string(to_string(c.model.law.kind))));
  line("model.sv.s_max", num(c.model.law.s_max));
  line("model.sv.value", num(c.model.law.value));
  line("model.sv.mass", num(c.model.law.mass));
  line("model.sv.kappa", num(c.model.law.kappa));
  line("solver.t_min", num(c.solver.t_min));
  line("solver.t_max", num(c.solver.t_max));
  line("solver.gamma_min", num(c.solver.gamma_min));
  line("solver.gamma_max", num(c.solver.gamma_max));
  line("solver.tau_min", num(c.solver.tau_min));
  line("solver.tau_max", num(c.solver.tau_max));
  line("solver.stop_eps1", num(c.solver.stop_eps1));
  line("solver.stop_eps2", num(c.solver.stop_eps2));
  line("solver.stop_change_eps", num(c.solver.stop_change_eps));
  line("solver.gamma10", num(c.solver.gamma10));
  line("solver.tau10", num(c.solver.tau10));
  line("solver.init", quote(std::string(to_string(c.solver.init))));
  line("solver.init_variance", num(c.solver.init_variance));
  line("solver.amp_init", quote(amp_init_name(c.solver.amp_init)));
  line("solver.keep_iterates", c.solver.keep_iterates ? "true" : "false");
  line("se.nodes", fmt::format("{}", c.se_nodes));
  line("se.mc_samples", fmt::format("{}", c.mc_samples));
  line("se.replicates", fmt::format("{}", c.replicates));
  line("se.literal", c.se_literal ? "true" : "false");
  line("output.dir", quote(c.output_dir));
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.output_dir = "-";  // where results go does not change them
  return fmt::format("{:016x}", fnv1a64(serialize_config(c)));
}

void validate_config(const ExperimentConfig& c) {
  if (!kAlgorithms.count(c.algorithm)) bad("algorithm", "unknown algorithm '" + c.algorithm + "'");
  try {
    c.model.validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::invalid_config) throw;
    fail(ErrorKind::invalid_config, e.what(), e.field().empty() ? "model" : e.field());
  }
  SolverConfig s = c.solver;
  s.max_iters = c.iterations;
  s.validate();
  if (c.sizes.empty()) bad("sizes", "at least one size is required");
  for (auto n : c.sizes)
    if (n < 2) bad("sizes", "sizes must be at least 2");
  if (c.trials < 1) bad("trials", "must be positive");
  if (c.iterations < 1) bad("iterations", "must be positive");
  if (c.se_nodes < 2 || c.se_nodes > 256) bad("se.nodes", "must lie in [2, 256]");
  if (c.replicates < 2) bad("se.replicates", "must be at least 2");
  if (c.mc_samples < 100LL * c.replicates) bad("se.mc_samples", "need at least 100 samples per replicate");
  for (double e : c.epsilons)
    if (!(e >= 0.0)) bad("epsilons", "must be non-negative");
  const auto all = builtin_functionals();
  for (const auto& f : c.functionals) (void)find_functional(all, f);
  if (c.output_dir.empty()) bad("output.dir", "must not be empty");
  bool gvamp_family = c.algorithm == "gvamp" || c.algorithm == "general-gvamp";
  if (!gvamp_family && c.model.channel.kind != ChannelKind::awgn)
    bad("model.channel.kind", c.algorithm + " needs the awgn channel");
}

HarnessConfig harness_config(const ExperimentConfig& c, int workers) {
  HarnessConfig h;
  h.model = c.model;
  h.algorithm = c.algorithm;
  h.sizes.assign(c.sizes.begin(), c.sizes.end());
  h.trials = c.trials;
  h.iterations = c.iterations;
  h.solver = c.solver;
  h.functionals = c.functionals;
  h.seed = c.seed;
  h.workers = workers;
  h.se_opts = se_options(c);
  h.gp_opts = general_se_options(c);
  return h;
}

SEOptions se_options(const ExperimentConfig& c) {
  SEOptions o;
  o.nodes = c.se_nodes;
  o.literal = c.se_literal;
  return o;
}

GeneralSeOptions general_se_options(const ExperimentConfig& c) {
  GeneralSeOptions o;
  o.mc_samples = static_cast<std::size_t>(c.mc_samples);
  o.replicates = c.replicates;
  o.seed = c.seed;
  o.literal = c.se_literal;
  return o;
}

}  // namespace mpforge
