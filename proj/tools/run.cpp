#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <thread>

#include "app.hpp"
#include "magnon/entanglement.hpp"

#ifndef MAGNON_VERSION
#define MAGNON_VERSION "0.0.0"
#endif

namespace magnon::app {

using json = nlohmann::ordered_json;

const char* version() { return MAGNON_VERSION; }

namespace {

ResultTable make_table(const ExperimentConfig& config, std::string name, std::vector<std::string> columns) {
  ResultTable t;
  t.name = std::move(name);
  t.columns = std::move(columns);
  t.metadata = {{"magnon", version()}, {"kind", to_string(config.kind)}, {"config", config.to_json().dump()}};
  return t;
}

std::string time_label(double total_time) { return "T" + format_number(total_time); }

// Runs job(i) for i in [0, n) on up to `threads` workers; results keep index
// order and the first failure (by index) is rethrown.
template <typename Result, typename Job>
std::vector<Result> fan_out(int n, int threads, Job job) {
  std::vector<Result> results(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        results[static_cast<std::size_t>(i)] = job(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::min(threads, n); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

ControlProblem control_problem(const ExperimentConfig& config, double total_time) {
  const auto& s = config.control;
  auto problem = ControlProblem::bell_state(config.model, total_time,
                                            static_cast<int>(std::lround(s.steps_per_unit * total_time)));
  problem.guess = s.guess;
  problem.lambda = s.lambda;
  problem.lambda_decay = s.lambda_decay;
  problem.lambda_min = s.lambda_min;
  problem.stop = s.stop;
  problem.sequential = s.sequential;
  if (s.flattop_rise > 0) {
    const auto shape = flattop_shape(0, total_time, s.flattop_rise);
    problem.shape = {shape, shape};
  }
  return problem;
}

void run_closed(const ExperimentConfig& config, ExperimentResult& out) {
  const auto h = config.full_model ? build_full_hamiltonian(*config.full_model) : build_effective_hamiltonian(config.model);
  const auto& layout = config.full_model ? BasisLayout::full() : BasisLayout::effective();
  const auto psi0 = StateVector::basis_state(layout, config.initial);
  const auto times = config.times.times();
  const auto tr = sample_constant(h, psi0, times);

  std::vector<std::string> columns{"t", "C", "p1_re", "p1_im", "p2_re", "p2_im", "norm_error"};
  const bool analytic = !config.full_model && config.initial == "m1";
  if (analytic) columns.insert(columns.end(), {"p1_analytic_re", "p1_analytic_im"});
  auto table = make_table(config, "closed", columns);
  double max_c = 0, max_norm_error = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto& psi = tr.states[i];
    const auto p1 = psi["m1"], p2 = psi["m2"];
    const double c = concurrence_pure(p1, p2);
    const double norm_error = std::abs(psi.amplitudes.norm() - 1);
    std::vector<double> row{times[i], c, p1.real(), p1.imag(), p2.real(), p2.imag(), norm_error};
    if (analytic) {
      const auto a = analytic_magnon_amplitudes(config.model, times[i]).first;
      row.insert(row.end(), {a.real(), a.imag()});
    }
    table.add_row(std::move(row));
    max_c = std::max(max_c, c);
    max_norm_error = std::max(max_norm_error, norm_error);
  }
  out.summary["samples"] = times.size();
  out.summary["max_concurrence"] = max_c;
  out.summary["final_concurrence"] = table.rows.back()[1];
  out.summary["max_norm_error"] = max_norm_error;
  out.tables.push_back(std::move(table));
}

void run_envelope(const ExperimentConfig& config, ExperimentResult& out) {
  const auto h = build_effective_hamiltonian(config.model);
  const auto psi0 = StateVector::basis_state(BasisLayout::effective(), config.initial);
  const auto times = config.times.times();
  const auto tr = sample_constant(h, psi0, times);

  auto table = make_table(config, "envelope", {"t", "C", "ev_active", "Phi"});
  std::array<bool, 4> seen{};
  double overshoot = -1;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double c = concurrence_pure(tr.states[i]["m1"], tr.states[i]["m2"]);
    const auto s = envelope_sample(config.model, times[i]);
    for (std::size_t b = 0; b < 4; ++b) seen[b] = seen[b] || s.active[b];
    overshoot = std::max(overshoot, c - s.upper());
    table.add_row({times[i], c, s.upper(), s.Phi});
  }
  out.summary["samples"] = times.size();
  out.summary["branches_seen"] = seen;
  out.summary["max_excess_over_envelope"] = overshoot;
  out.tables.push_back(std::move(table));
}

struct ControlRun {
  double total_time = 0;
  ControlProblem problem;
  ControlResult result;
};

std::vector<ControlRun> optimize_all(const ExperimentConfig& config) {
  const auto& times = config.control.total_times;
  return fan_out<ControlRun>(static_cast<int>(times.size()), config.threads, [&](int i) {
    const double total_time = times[static_cast<std::size_t>(i)];
    ControlRun run{total_time, control_problem(config, total_time), {}};
    run.result = krotov_optimize(run.problem);
    return run;
  });
}

json control_summary(const ControlRun& run) {
  const auto& r = run.result;
  double lo = r.fields.values[0].minCoeff(), hi = r.fields.values[0].maxCoeff();
  for (int l = 1; l < kNumControls; ++l) {
    lo = std::min(lo, r.fields.values[l].minCoeff());
    hi = std::max(hi, r.fields.values[l].maxCoeff());
  }
  return {{"total_time", run.total_time},   {"final_concurrence", r.final_concurrence},
          {"final_j_t", r.final_j_t},       {"iterations", r.iterations},
          {"termination", to_string(r.termination)}, {"field_min", lo},
          {"field_max", hi}};
}

void run_control(const ExperimentConfig& config, ExperimentResult& out) {
  json runs = json::array();
  for (const auto& run : optimize_all(config)) {
    const auto label = time_label(run.total_time);
    auto fields = make_table(config, "control_" + label, {"t", "f1", "f2"});
    const auto& f = run.result.fields;
    for (int k = 0; k < f.cells(); ++k) fields.add_row({f.grid.time(k), f.values[0](k), f.values[1](k)});
    auto history = make_table(config, "history_" + label, {"iteration", "J_T", "J"});
    for (std::size_t i = 0; i < run.result.j_t_history.size(); ++i)
      history.add_row({static_cast<double>(i), run.result.j_t_history[i], run.result.j_history[i]});
    out.tables.push_back(std::move(fields));
    out.tables.push_back(std::move(history));
    runs.push_back(control_summary(run));
  }
  out.summary["runs"] = runs;
}

OpenOptions open_options(const ExperimentConfig& config) {
  OpenOptions o;
  o.substeps = config.open.substeps;
  o.positivity_tolerance = config.open.positivity_tolerance;
  o.check_positivity = config.open.check_positivity;
  o.record_o = false;
  return o;
}

void run_opensys(const ExperimentConfig& config, ExperimentResult& out) {
  const auto options = open_options(config);
  if (config.open.controlled) {
    json runs = json::array();
    for (const auto& run : optimize_all(config)) {
      const auto dyn = controlled_open_dynamics(run.problem, run.result.fields, config.bath, options);
      auto table = make_table(config, "open_" + time_label(run.total_time),
                              {"t", "C", "fidelity", "trace_error", "min_eigenvalue"});
      for (std::size_t k = 0; k < dyn.times.size(); ++k)
        table.add_row({dyn.times[k], dyn.concurrence[k], dyn.fidelity[k], dyn.trace_error[k], dyn.min_eigenvalue[k]});
      auto summary = control_summary(run);
      summary["closed_concurrence"] = run.result.final_concurrence;
      summary["final_concurrence"] = dyn.concurrence.back();
      summary["final_fidelity"] = dyn.fidelity.back();
      out.tables.push_back(std::move(table));
      runs.push_back(summary);
    }
    out.summary["runs"] = runs;
    return;
  }

  const auto h = open_hamiltonian(config.model);
  const auto lowering = lowering_operators(config.bath);
  const auto psi0 = to_open_layout(StateVector::basis_state(BasisLayout::effective(), config.initial));
  const auto grid = config.times.grid();
  const auto me = propagate_master_equation(h, lowering, config.bath, DensityMatrix::pure(psi0), grid, options);

  auto table = make_table(config, "master", {"t", "C", "vacuum", "trace_error", "min_eigenvalue"});
  double max_trace_error = 0, min_eigenvalue = 0;
  for (std::size_t k = 0; k < me.times.size(); ++k) {
    const double c = magnon_concurrence(me.states[k]);
    table.add_row({me.times[k], c, me.states[k].matrix(0, 0).real(), me.trace_error[k], me.min_eigenvalue[k]});
    max_trace_error = std::max(max_trace_error, me.trace_error[k]);
    min_eigenvalue = std::min(min_eigenvalue, me.min_eigenvalue[k]);
  }
  out.summary["final_concurrence"] = table.rows.back()[1];
  out.summary["max_trace_error"] = max_trace_error;
  if (config.open.check_positivity) out.summary["min_eigenvalue"] = min_eigenvalue;
  out.tables.push_back(std::move(table));

  if (config.open.trajectories > 0) {
    QsdOptions q;
    q.substeps = config.open.substeps;
    q.threads = config.threads;
    const auto ens =
        propagate_qsd_trajectories(h, lowering, config.bath, psi0, grid, config.open.trajectories, *config.seed, q);
    auto qsd = make_table(config, "qsd", {"t", "C", "C_se", "vacuum", "vacuum_se"});
    for (std::size_t k = 0; k < ens.times.size(); ++k)
      qsd.add_row({ens.times[k], ens.concurrence[k], ens.concurrence_error[k], ens.mean[k].matrix(0, 0).real(),
                   ens.standard_error[k](0, 0)});
    out.summary["trajectories"] = ens.trajectories;
    out.summary["qsd_final_concurrence"] = ens.concurrence.back();
    out.tables.push_back(std::move(qsd));
  }
}

void run_validate(const ExperimentConfig& config, ExperimentResult& out) {
  json checks = json::array();
  bool all = true;
  for (const auto& c : validate_suite(config)) {
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"observed", c.observed}, {"tolerance", c.tolerance},
                      {"detail", c.detail}, {"values", c.values}});
    all = all && c.passed;
  }
  out.summary["passed"] = all;
  out.summary["checks"] = checks;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate_fields();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult out;
  out.summary["kind"] = to_string(config.kind);
  out.summary["version"] = version();
  try {
    switch (config.kind) {
      case ExperimentKind::Closed: run_closed(config, out); break;
      case ExperimentKind::Envelope: run_envelope(config, out); break;
      case ExperimentKind::Control: run_control(config, out); break;
      case ExperimentKind::Opensys: run_opensys(config, out); break;
      case ExperimentKind::Validate: run_validate(config, out); break;
    }
  } catch (const config_error&) {
    throw;
  } catch (const std::exception& e) {
    throw experiment_error(to_string(config.kind) + " experiment failed: " + e.what());
  }
  out.summary["tables"] = json::array();
  for (const auto& t : out.tables) out.summary["tables"].push_back(t.name + ".csv");
  out.summary["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.summary["config"] = config.to_json();
  return out;
}

std::vector<std::filesystem::path> write_result(const ExperimentResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& t : result.tables) {
    written.push_back(out_dir / (t.name + ".csv"));
    write_table(t, written.back());
  }
  written.push_back(out_dir / "summary.json");
  std::ofstream summary(written.back());
  if (!summary) throw std::runtime_error("cannot write " + written.back().string());
  summary << result.summary.dump(2) << "\n";
  return written;
}

}  // namespace magnon::app
