#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "app.hpp"

namespace magnon::app {

using json = nlohmann::ordered_json;

namespace {

// Typed access to one JSON object; remembers which keys were read so that
// the rest can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw config_error(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  Section child(const std::string& key) { return Section(raw(key), qualified(key)); }

  void number(const std::string& key, double& out, bool required = false) {
    if (!present(key, required)) return;
    const auto& v = raw(key);
    if (!v.is_number()) throw config_error(qualified(key) + " must be a number");
    out = v.get<double>();
  }

  void integer(const std::string& key, int& out, bool required = false) {
    if (!present(key, required)) return;
    const auto& v = raw(key);
    if (!v.is_number_integer()) throw config_error(qualified(key) + " must be an integer");
    out = v.get<int>();
  }

  void integer(const std::string& key, std::optional<int>& out) {
    if (!present(key, false)) return;
    int value = 0;
    integer(key, value);
    out = value;
  }

  void boolean(const std::string& key, bool& out) {
    if (!present(key, false)) return;
    const auto& v = raw(key);
    if (!v.is_boolean()) throw config_error(qualified(key) + " must be true or false");
    out = v.get<bool>();
  }

  void text(const std::string& key, std::string& out, bool required = false) {
    if (!present(key, required)) return;
    const auto& v = raw(key);
    if (!v.is_string()) throw config_error(qualified(key) + " must be a string");
    out = v.get<std::string>();
  }

  void numbers(const std::string& key, std::vector<double>& out, bool required = false) {
    if (!present(key, required)) return;
    const auto& v = raw(key);
    if (!v.is_array()) throw config_error(qualified(key) + " must be an array of numbers");
    out.clear();
    for (const auto& x : v) {
      if (!x.is_number()) throw config_error(qualified(key) + " must be an array of numbers");
      out.push_back(x.get<double>());
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw config_error("unknown key " + qualified(key));
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  bool present(const std::string& key, bool required) const {
    if (j_.contains(key)) return true;
    if (required) throw config_error("missing required field " + qualified(key));
    return false;
  }
  std::string where() const { return path_.empty() ? "document" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

EffectiveParams<double> read_model(Section s) {
  EffectiveParams<double> p;
  s.number("omega_a", p.omega_a, true);
  s.number("omega_b", p.omega_b, true);
  s.number("omega_m", p.omega_m, true);
  s.number("g_m", p.g_m, true);
  s.number("g_c", p.g_c, true);
  s.number("j_a", p.j_a, true);
  s.finish();
  return p;
}

FullModelParams<double> read_full(Section s) {
  FullModelParams<double> p;
  s.number("omega_a_prime", p.omega_a_prime, true);
  s.number("omega_b_prime", p.omega_b_prime, true);
  s.number("omega_m", p.omega_m, true);
  s.number("delta_1", p.delta_1, true);
  s.number("delta_2", p.delta_2, true);
  s.number("Omega", p.Omega, true);
  s.number("g_mb", p.g_mb, true);
  s.number("g_cb", p.g_cb, true);
  s.number("g_ca", p.g_ca, true);
  s.number("j_a", p.j_a, true);
  s.finish();
  return p;
}

json model_json(const EffectiveParams<double>& p) {
  return {{"omega_a", p.omega_a}, {"omega_b", p.omega_b}, {"omega_m", p.omega_m},
          {"g_m", p.g_m},         {"g_c", p.g_c},         {"j_a", p.j_a}};
}

json full_json(const FullModelParams<double>& p) {
  return {{"omega_a_prime", p.omega_a_prime}, {"omega_b_prime", p.omega_b_prime}, {"omega_m", p.omega_m},
          {"delta_1", p.delta_1},             {"delta_2", p.delta_2},             {"Omega", p.Omega},
          {"g_mb", p.g_mb},                   {"g_cb", p.g_cb},                   {"g_ca", p.g_ca},
          {"j_a", p.j_a}};
}

TimeSpec read_times(Section s) {
  TimeSpec t;
  if (s.has("samples")) {
    s.numbers("samples", t.samples);
  } else if (s.has("windows")) {
    auto w = s.child("windows");
    w.numbers("centres", t.centres, true);
    w.number("width", t.width, true);
    w.number("step", t.step, true);
    w.finish();
  } else {
    double start = 0, end = 0;
    s.number("t_start", start);
    s.number("t_end", end, true);
    t.t_start = start;
    t.t_end = end;
    s.integer("n_steps", t.n_steps);
  }
  s.finish();
  return t;
}

json times_json(const TimeSpec& t) {
  if (!t.samples.empty()) return {{"samples", t.samples}};
  if (!t.centres.empty()) return {{"windows", {{"centres", t.centres}, {"width", t.width}, {"step", t.step}}}};
  json j{{"t_start", t.t_start.value_or(0)}, {"t_end", t.t_end.value_or(0)}};
  if (t.n_steps) j["n_steps"] = *t.n_steps;
  return j;
}

bool needs_times(const ExperimentConfig& c) {
  switch (c.kind) {
    case ExperimentKind::Closed:
    case ExperimentKind::Envelope: return true;
    case ExperimentKind::Opensys: return !c.open.controlled;
    default: return false;
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw config_error(message);
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Closed: return "closed";
    case ExperimentKind::Envelope: return "envelope";
    case ExperimentKind::Control: return "control";
    case ExperimentKind::Opensys: return "opensys";
    case ExperimentKind::Validate: return "validate";
  }
  return "?";
}

ExperimentKind kind_from_string(const std::string& name) {
  for (auto k : {ExperimentKind::Closed, ExperimentKind::Envelope, ExperimentKind::Control, ExperimentKind::Opensys,
                 ExperimentKind::Validate})
    if (to_string(k) == name) return k;
  throw config_error("unknown experiment kind '" + name + "'");
}

TimeGrid TimeSpec::grid() const {
  if (!uniform()) throw config_error("this experiment needs a uniform time grid (t_start, t_end, n_steps)");
  return TimeGrid(t_start.value_or(0), *t_end, n_steps.value_or(1));
}

std::vector<double> TimeSpec::times() const {
  if (uniform()) return grid().times();
  if (!samples.empty()) return samples;
  std::vector<double> out;
  const auto per_window = static_cast<std::size_t>(std::llround(width / step));
  for (double c : centres)
    for (std::size_t i = 0; i < per_window; ++i) out.push_back(c + static_cast<double>(i) * step);
  return out;
}

void ExperimentConfig::validate_fields() const {
  try {
    if (full_model) {
      require(kind == ExperimentKind::Closed, "full_model is only supported for closed runs");
      full_model->validate();
    } else {
      model.validate();
    }
    validate.full.validate();
    bath.validate();
  } catch (const model_error& e) {
    throw config_error(e.what());
  } catch (const opensys_error& e) {
    throw config_error(e.what());
  }

  if (needs_times(*this)) {
    const int kinds = int(times.uniform()) + int(!times.samples.empty()) + int(!times.centres.empty());
    require(kinds == 1, "times must give exactly one of t_end, samples or windows");
    if (times.uniform()) {
      require(*times.t_end > times.t_start.value_or(0), "times.t_end must exceed times.t_start");
      require(times.n_steps.value_or(1) > 0, "times.n_steps must be positive");
    }
    for (std::size_t i = 0; i < times.samples.size(); ++i) {
      require(std::isfinite(times.samples[i]) && times.samples[i] >= 0, "times.samples must be finite and non-negative");
      require(i == 0 || times.samples[i] > times.samples[i - 1], "times.samples must be strictly increasing");
    }
    if (!times.centres.empty()) {
      require(times.width > 0 && times.step > 0 && times.step <= times.width, "times.windows needs 0 < step <= width");
      for (double c : times.centres) require(std::isfinite(c) && c >= 0, "times.windows.centres must be non-negative");
    }
    if (kind == ExperimentKind::Opensys) require(times.uniform(), "opensys runs need a uniform time grid");
  }

  const auto& layout = full_model ? BasisLayout::full() : BasisLayout::effective();
  const auto& labels = layout.labels();
  require(std::find(labels.begin(), labels.end(), initial) != labels.end(), "initial must name a basis state, got '" + initial + "'");

  require(!control.total_times.empty(), "control.total_times must not be empty");
  for (double t : control.total_times) require(std::isfinite(t) && t > 0, "control.total_times must be positive");
  require(control.steps_per_unit > 0, "control.steps_per_unit must be positive");
  require(control.lambda[0] > 0 && control.lambda[1] > 0, "control.lambda must be positive");
  require(control.lambda_decay > 0 && control.lambda_decay <= 1, "control.lambda_decay must be in (0, 1]");
  require(control.lambda_min > 0, "control.lambda_min must be positive");
  require(control.flattop_rise >= 0, "control.flattop_rise must be non-negative");
  require(control.stop.j_target >= 0, "control.j_target must be non-negative");
  require(control.stop.lower_bound < control.stop.upper_bound, "control.lower_bound must be below control.upper_bound");
  require(control.stop.max_iterations >= 0, "control.max_iterations must be non-negative");

  require(open.substeps > 0, "open.substeps must be positive");
  require(open.trajectories >= 0, "open.trajectories must be non-negative");
  require(open.positivity_tolerance >= 0, "open.positivity_tolerance must be non-negative");
  require(!(open.trajectories > 0 && open.controlled), "open.trajectories is not supported with open.controlled");
  require(open.trajectories == 0 || seed.has_value(), "a seed is required when open.trajectories > 0");

  require(validate.update_sign == 1.0 || validate.update_sign == -1.0, "validate.update_sign must be 1 or -1");
  require(validate.adiabatic_horizon > 0, "validate.adiabatic_horizon must be positive");
  require(validate.adiabatic_steps > 0, "validate.adiabatic_steps must be positive");
  require(threads >= 1, "threads must be at least 1");
}

json ExperimentConfig::to_json() const {
  json j;
  j["kind"] = to_string(kind);
  if (full_model) j["full_model"] = full_json(*full_model);
  else j["model"] = model_json(model);
  j["initial"] = initial;
  if (needs_times(*this)) j["times"] = times_json(times);
  j["bath"] = {{"gamma", bath.gamma}, {"lambda_a", bath.lambda_a}, {"lambda_b", bath.lambda_b}, {"markov", bath.markov}};
  j["control"] = {{"total_times", control.total_times},
                  {"steps_per_unit", control.steps_per_unit},
                  {"guess", control.guess},
                  {"lambda", control.lambda},
                  {"lambda_decay", control.lambda_decay},
                  {"lambda_min", control.lambda_min},
                  {"flattop_rise", control.flattop_rise},
                  {"j_target", control.stop.j_target},
                  {"lower_bound", control.stop.lower_bound},
                  {"upper_bound", control.stop.upper_bound},
                  {"max_iterations", control.stop.max_iterations},
                  {"sequential", control.sequential}};
  j["open"] = {{"substeps", open.substeps},
               {"trajectories", open.trajectories},
               {"positivity_tolerance", open.positivity_tolerance},
               {"check_positivity", open.check_positivity},
               {"controlled", open.controlled}};
  j["validate"] = {{"update_sign", validate.update_sign},
                   {"full_model", full_json(validate.full)},
                   {"adiabatic_horizon", validate.adiabatic_horizon},
                   {"adiabatic_steps", validate.adiabatic_steps}};
  if (seed) j["seed"] = *seed;
  j["threads"] = threads;
  return j;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin, const Overrides& overrides) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    // The message carries the line and column.
    throw config_error(origin + ": " + e.what());
  }

  try {
    ExperimentConfig c;
    Section s(doc, "");
    std::string kind;
    s.text("kind", kind, true);
    c.kind = kind_from_string(kind);

    if (s.has("full_model")) c.full_model = read_full(s.child("full_model"));
    if (s.has("model")) c.model = read_model(s.child("model"));
    else if (!c.full_model && c.kind != ExperimentKind::Validate) throw config_error("missing required field model");
    s.text("initial", c.initial);

    if (s.has("bath")) {
      auto b = s.child("bath");
      b.number("gamma", c.bath.gamma);
      b.number("lambda_a", c.bath.lambda_a);
      b.number("lambda_b", c.bath.lambda_b);
      b.boolean("markov", c.bath.markov);
      b.finish();
    }
    if (s.has("control")) {
      auto k = s.child("control");
      k.numbers("total_times", c.control.total_times);
      k.number("steps_per_unit", c.control.steps_per_unit);
      k.number("guess", c.control.guess);
      if (k.has("lambda")) {
        std::vector<double> lambda;
        k.numbers("lambda", lambda);
        if (lambda.size() != kNumControls) throw config_error("control.lambda needs one value per control");
        c.control.lambda = {lambda[0], lambda[1]};
      }
      k.number("lambda_decay", c.control.lambda_decay);
      k.number("lambda_min", c.control.lambda_min);
      k.number("flattop_rise", c.control.flattop_rise);
      k.number("j_target", c.control.stop.j_target);
      k.number("lower_bound", c.control.stop.lower_bound);
      k.number("upper_bound", c.control.stop.upper_bound);
      k.integer("max_iterations", c.control.stop.max_iterations);
      k.boolean("sequential", c.control.sequential);
      k.finish();
    }
    if (s.has("open")) {
      auto o = s.child("open");
      o.integer("substeps", c.open.substeps);
      o.integer("trajectories", c.open.trajectories);
      o.number("positivity_tolerance", c.open.positivity_tolerance);
      o.boolean("check_positivity", c.open.check_positivity);
      o.boolean("controlled", c.open.controlled);
      o.finish();
    }
    if (s.has("validate")) {
      auto v = s.child("validate");
      v.number("update_sign", c.validate.update_sign);
      if (v.has("full_model")) c.validate.full = read_full(v.child("full_model"));
      v.number("adiabatic_horizon", c.validate.adiabatic_horizon);
      v.integer("adiabatic_steps", c.validate.adiabatic_steps);
      v.finish();
    }
    if (s.has("seed")) {
      const auto& v = s.raw("seed");
      if (!v.is_number_unsigned()) throw config_error("seed must be a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    }
    s.integer("threads", c.threads);

    if (needs_times(c)) {
      if (!s.has("times")) throw config_error("missing required field times");
    }
    if (s.has("times")) c.times = read_times(s.child("times"));
    s.finish();

    if (overrides.seed) c.seed = overrides.seed;
    if (overrides.threads) c.threads = *overrides.threads;
    c.validate_fields();
    if (needs_times(c) && c.times.uniform() && !c.times.n_steps) {
      const auto h = c.full_model ? build_full_hamiltonian(*c.full_model) : build_effective_hamiltonian(c.model);
      c.times.n_steps = default_step_count(h.matrix, c.times.t_start.value_or(0), *c.times.t_end);
    }
    return c;
  } catch (const config_error& e) {
    throw config_error(origin + ": " + e.what());
  } catch (const model_error& e) {
    throw config_error(origin + ": " + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string(), overrides);
}

}  // namespace magnon::app
