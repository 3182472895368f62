#include "szo/cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "szo/cli/config.hpp"
#include "szo/cli/csv.hpp"
#include "szo/cli/svg.hpp"
#include "szo/optimizer.hpp"
#include "szo/theorylab.hpp"

#ifndef SZO_VERSION
#define SZO_VERSION "unknown"
#endif

namespace szo::cli {

namespace fs = std::filesystem;

const char* version() { return SZO_VERSION; }

namespace {

ExperimentConfig load_experiment(const RunOptions& options) {
  ExperimentConfig cfg =
      options.config_path.empty() ? ExperimentConfig{} : load_config(options.config_path);
  for (const auto& o : options.overrides) apply_override(cfg, o);
  if (options.seed) cfg.seeds = {*options.seed};
  if (options.out) cfg.out = *options.out;
  return cfg;
}

struct SeedOutcome {
  RunRecord record;
  bool failed = false;
};

// Runs one seed and writes run_<tag>.csv plus the final (or failure)
// checkpoint. `tag` is the seed, prefixed by the variant for compare.
SeedOutcome execute_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                         const std::string& tag) {
  const auto objective = make_objective(cfg, seed);
  const OptConfig oc = run_config(cfg, *objective, seed);
  const fs::path dir(cfg.out);

  std::vector<HistogramRow> histograms;
  szo::RunOptions ro;
  if (cfg.grad_hist_interval > 0) {
    ro.observer = [&](const OptState& s, const StepInfo&) {
      if (s.step % cfg.grad_hist_interval != 0) return;
      const Batch batch = batch_for_step(*objective, oc, s.step - 1);
      histograms.push_back(
          {s.step, grad_histogram(objective->true_grad(s.w.values(), batch),
                                  cfg.grad_hist_bins)});
    };
  }

  SeedOutcome outcome;
  try {
    RunResult result = run(oc, *objective, ro);
    checkpoint_save(result.final_state, (dir / ("final_checkpoint_" + tag)).string());
    outcome.record = std::move(result.record);
    std::cerr << "run " << tag << ": " << oc.total_steps << " steps, train_loss "
              << format_double(outcome.record.rows.back().train_loss) << "\n";
  } catch (const RunAborted& e) {
    const auto path = (dir / ("failed_checkpoint_" + tag)).string();
    checkpoint_save(e.state(), path);
    std::cerr << "run " << tag << ": numeric failure: " << e.what()
              << "\ncheckpoint written to " << path << "\n";
    outcome.record = e.partial();
    outcome.failed = true;
  }
  write_text((dir / ("run_" + tag + ".csv")).string(), run_csv(outcome.record));
  if (!histograms.empty()) {
    write_text((dir / ("grad_hist_" + tag + ".csv")).string(),
               histogram_csv(histograms));
  }
  return outcome;
}

void write_manifest(const ExperimentConfig& cfg) {
  ExperimentConfig resolved = cfg;
  resolve(resolved, *make_objective(cfg, cfg.seeds.front()));
  write_text((fs::path(cfg.out) / "manifest").string(), manifest_text(resolved, version()));
}

template <typename Body>
int guarded(const char* command, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "szo " << command << ": config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "szo " << command << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "szo " << command << ": " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace

int cmd_run(const RunOptions& options) {
  return guarded("run", [&] {
    const ExperimentConfig cfg = load_experiment(options);
    fs::create_directories(cfg.out);
    write_manifest(cfg);
    bool failed = false;
    for (auto seed : cfg.seeds) {
      failed |= execute_seed(cfg, seed, std::to_string(seed)).failed;
    }
    return failed ? kExitNumeric : kExitOk;
  });
}

int cmd_compare(const RunOptions& options) {
  return guarded("compare", [&] {
    ExperimentConfig cfg = load_experiment(options);
    if (!options.variants.empty()) {
      std::string joined;
      for (const auto& v : options.variants) joined += (joined.empty() ? "" : ",") + v;
      set_value(cfg, "variants", joined, "--variants");
    }
    if (cfg.variants.size() < 2) {
      throw ConfigError("variants: compare needs at least two variants");
    }
    fs::create_directories(cfg.out);
    write_manifest(cfg);

    bool failed = false;
    std::vector<VariantRuns> all;
    for (Variant v : cfg.variants) {
      ExperimentConfig vc = cfg;
      vc.opt.variant = v;
      VariantRuns runs{std::string(to_string(v)), {}};
      for (auto seed : cfg.seeds) {
        auto outcome = execute_seed(vc, seed, runs.name + "_" + std::to_string(seed));
        failed |= outcome.failed;
        runs.runs.push_back(std::move(outcome.record));
      }
      all.push_back(std::move(runs));
    }
    write_text((fs::path(cfg.out) / "compare.csv").string(), compare_csv(all, 0.99));
    return failed ? kExitNumeric : kExitOk;
  });
}

namespace {

struct ReportRow {
  std::string check;
  std::string params;
  double value = 0.0;
  double reference = 0.0;
  double standard_error = std::nan("");
  std::string status;  // pass, fail, warn
  bool in_regime = true;
};

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "check,params,value,reference,standard_error,status,in_regime\n";
  for (const auto& r : rows) {
    out += r.check + ',' + r.params + ',' + format_double(r.value) + ',' +
           format_double(r.reference) + ',' +
           (std::isnan(r.standard_error) ? std::string() : format_double(r.standard_error)) +
           ',' + r.status + ',' + (r.in_regime ? "yes" : "no") + '\n';
  }
  return out;
}

Mask leading(std::size_t n, std::size_t k) {
  Mask m = Mask::zeros(n);
  for (std::size_t i = 0; i < k; ++i) m.set(i, true);
  return m;
}

constexpr std::uint64_t kTheoryTag = 0x54484559;  // "THEY"

}  // namespace

int cmd_verify_theory(const TheoryOptions& options) {
  return guarded("verify-theory", [&] {
    if (options.samples < 1) throw ConfigError("--samples: must be >= 1");
    const std::uint64_t master = mix_seed(options.seed, kTheoryTag);
    std::vector<ReportRow> rows;
    auto warn_se = [&](const ReportRow& r) {
      std::cerr << "warning: " << r.check << " " << r.params
                << ": standard error undefined with " << options.samples
                << " sample(s)\n";
    };

    // Norm moments of the masked perturbation.
    std::uint64_t stream = 0;
    for (double p : {2.0, 3.0, 4.0, 6.0}) {
      for (std::size_t nbar : {1, 10, 50, 100}) {
        RngStream rng(master, stream++);
        const auto m = mc_norm_moment(100, leading(100, nbar), p, options.samples, rng);
        const std::string params = "n=100 nbar=" + std::to_string(nbar) +
                                   " p=" + format_double(p);
        ReportRow bound{"moment_bound", params, m.estimate, m.bound,
                        m.standard_error, m.violation ? "fail" : "pass", true};
        if (std::isnan(m.standard_error)) {
          bound.status = "warn";
          warn_se(bound);
        }
        rows.push_back(bound);
        if (std::fmod(p, 2.0) == 0.0) {
          const double exact = exact_even_moment(nbar, static_cast<unsigned>(p));
          ReportRow ex{"moment_exact", params, m.estimate, exact, m.standard_error,
                       "pass", true};
          if (std::isnan(m.standard_error)) {
            ex.status = "warn";
          } else if (std::abs(m.estimate - exact) > 5.0 * m.standard_error) {
            ex.status = "fail";
          }
          rows.push_back(ex);
        }
      }
    }

    // Unbiasedness of the masked estimators on a diagonal quadratic.
    const std::size_t n = 20;
    RngStream setup(master, 1000);
    std::vector<double> diag(n);
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) {
      diag[i] = setup.uniform(0.5, 2.0);
      b[i] = setup.uniform(-1.0, 1.0);
    }
    const auto quad = QuadraticObjective::diagonal(diag, b);
    const auto w = sample_std_normal(setup, n);
    for (EstimatorKind kind : {EstimatorKind::TwoPoint, EstimatorKind::TwoSided}) {
      for (std::size_t nbar : {5, 10, 20}) {
        const auto r = mc_unbiasedness(quad, w, leading(n, nbar), 0.05, kind,
                                       options.samples, RngStream(master, stream++));
        ReportRow row{"unbiased", "n=20 nbar=" + std::to_string(nbar) + " kind=" +
                                      std::string(to_string(kind)),
                      r.max_deviation_se, 5.0, std::nan(""), "pass", true};
        if (!r.masked_exactly_zero) {
          row.status = "fail";
        } else if (std::isnan(r.max_deviation_se)) {
          row.status = "warn";
          warn_se(row);
        } else if (!(r.max_deviation_se < 5.0)) {
          row.status = "fail";
        }
        rows.push_back(row);
      }
    }

    // Projected gradient inequality on a sparse quadratic whose gradient
    // lives on the first 5 coordinates. A small mu keeps the smoothing term
    // from hiding a misaligned mask.
    const std::vector<std::size_t> support{0, 1, 2, 3, 4};
    const auto sparse = sparse_quadratic_objective(n, support, 1.0, 1.0);
    for (std::size_t nbar : {5, 10, 20}) {
      const auto c = check_lemma3(sparse, w, leading(n, nbar), 0.001, 1.0);
      rows.push_back({"projected_grad",
                      "aligned nbar=" + std::to_string(nbar) + " mu=0.001", c.lhs,
                      c.rhs, std::nan(""), c.holds ? "pass" : "fail", true});
    }
    if (options.show_counterexample) {
      Mask off = Mask::ones(n);
      for (auto i : support) off.set(i, false);
      const auto c = check_lemma3(sparse, w, off, 0.001, 1.0);
      rows.push_back({"projected_grad", "misaligned nbar=15 mu=0.001", c.lhs, c.rhs,
                      std::nan(""), c.holds ? "pass" : "fail", false});
    }

    // Step size and bound arithmetic.
    rows.push_back({"theory_lr", "nbar=4 L=1", theory_lr(4, 1.0), 1.0 / 32.0,
                    std::nan(""), theory_lr(4, 1.0) == 1.0 / 32.0 ? "pass" : "fail",
                    true});
    std::size_t violations = 0;
    for (double nhat : {1.0, 5.0, 20.0, 100.0}) {
      for (double l : {0.5, 1.0, 4.0}) {
        for (double mu : {0.001, 0.01, 0.1}) {
          for (std::size_t t : {10, 100, 1000}) {
            const double base = theorem1_bound(nhat, l, 1.0, t, mu);
            if (!(theorem1_bound(nhat * 2, l, 1.0, t, mu) > base)) ++violations;
            if (!(theorem1_bound(nhat, l * 2, 1.0, t, mu) > base)) ++violations;
            if (!(theorem1_bound(nhat, l, 1.0, t, mu * 2) > base)) ++violations;
            if (!(theorem1_bound(nhat, l, 1.0, t * 2, mu) < base)) ++violations;
          }
        }
      }
    }
    rows.push_back({"bound_monotone", "grid=144", static_cast<double>(violations), 0.0,
                    std::nan(""), violations == 0 ? "pass" : "fail", true});

    // Average squared gradient norm along a theory-step run against the bound.
    {
      OptConfig oc;
      oc.theory_mode = true;
      oc.k = 1;
      oc.mu = 0.05;
      oc.seed = options.seed;
      oc.diagnostics = false;
      const std::size_t iterations = 500;
      OptState s = init_state(oc, ParamVector(w));
      double sum = 0.0;
      for (std::size_t t = 0; t <= iterations; ++t) {
        const auto g = quad.true_grad(s.w.values(), {});
        double sq = 0.0;
        for (double v : g) sq += v * v;
        sum += sq;
        if (t < iterations) opt_step(s, quad, {}, oc);
      }
      const double avg = sum / static_cast<double>(iterations + 1);
      const double gap = quad.eval(w, {}) - quad.minimum_value();
      const double bound =
          theorem1_bound(static_cast<double>(n), quad.lambda_max(), gap, iterations, 0.05);
      rows.push_back({"descent_bound", "n=20 T=500", avg, bound, std::nan(""),
                      avg <= bound ? "pass" : "fail", true});
    }

    fs::create_directories(options.out);
    const auto path = (fs::path(options.out) / "theory_report.csv").string();
    write_text(path, report_csv(rows));

    std::size_t failures = 0;
    for (const auto& r : rows) {
      if (r.in_regime && r.status == "fail") {
        if (failures == 0) std::cerr << "verify-theory: in-regime failures:\n";
        std::cerr << "  " << r.check << " " << r.params << " value="
                  << format_double(r.value) << " reference="
                  << format_double(r.reference) << "\n";
        ++failures;
      }
    }
    std::cerr << "verify-theory: " << rows.size() << " checks, " << failures
              << " in-regime failure(s); report " << path << "\n";
    return failures == 0 ? kExitOk : kExitTheory;
  });
}

int cmd_plot(const PlotOptions& options) {
  return guarded("plot", [&]() -> int {
    const CsvTable table = read_csv(options.csv);
    if (table.rows.empty()) throw FormatError(options.csv + ": no data rows");
    const auto step_col = table.column("step");
    if (!step_col) throw FormatError(options.csv + ": missing column 'step'");
    if (options.columns.empty()) throw ConfigError("--columns: nothing to plot");

    auto parse = [&](const std::string& cell) -> std::optional<double> {
      if (cell.empty()) return std::nullopt;
      try {
        return std::stod(cell);
      } catch (const std::exception&) {
        throw FormatError(options.csv + ": not a number: '" + cell + "'");
      }
    };

    std::vector<Series> series;
    for (const auto& name : options.columns) {
      const auto col = table.column(name);
      if (!col) throw FormatError(options.csv + ": missing column '" + name + "'");
      Series s{name, {}};
      for (const auto& row : table.rows) {
        const auto x = parse(row[*step_col]);
        const auto y = parse(row[*col]);
        if (x && y && std::isfinite(*y)) s.points.emplace_back(*x, *y);
      }
      series.push_back(std::move(s));
    }

    TopAxis top;
    bool use_top = false;
    if (options.sparsity_axis) {
      std::optional<std::size_t> col;
      if (!options.sparsity_column.empty()) {
        col = table.column(options.sparsity_column);
      } else {
        col = table.column("sparsity");
        for (std::size_t i = 0; !col && i < table.header.size(); ++i) {
          if (table.header[i].rfind("sparsity_", 0) == 0) col = i;
        }
      }
      if (!col) throw FormatError(options.csv + ": no sparsity column for the top axis");
      top.title = "sparsity (" + table.header[*col] + ")";
      constexpr std::size_t kTicks = 6;
      for (std::size_t i = 0; i < kTicks; ++i) {
        const std::size_t r = i * (table.rows.size() - 1) / (kTicks - 1);
        const auto x = parse(table.rows[r][*step_col]);
        const auto sp = parse(table.rows[r][*col]);
        if (!x || !sp) continue;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", *sp);
        top.ticks.emplace_back(*x, buf);
        if (i > 0 && r == 0) break;
      }
      use_top = true;
    }

    std::string out = options.out;
    if (out.empty()) out = fs::path(options.csv).replace_extension(".svg").string();
    write_text(out, line_chart_svg(series, "step", use_top ? &top : nullptr));
    std::cerr << "plot: wrote " << out << "\n";
    return kExitOk;
  });
}

}  // namespace szo::cli
