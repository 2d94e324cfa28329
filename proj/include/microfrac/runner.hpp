#ifndef MICROFRAC_RUNNER_HPP
#define MICROFRAC_RUNNER_HPP

#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include "microfrac/config.hpp"
#include "microfrac/downscale.hpp"
#include "microfrac/io.hpp"
#include "microfrac/lookup.hpp"
#include "microfrac/macro.hpp"

namespace microfrac {

struct RunOptions {
  std::string out_dir_override; // from --out
  int threads = 1;
  bool verbose = false;
};

namespace detail {

inline std::filesystem::path ensure_out_dir(const RunConfig& cfg, const RunOptions& opts) {
  const std::filesystem::path dir =
      opts.out_dir_override.empty() ? cfg.out_dir : opts.out_dir_override;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
  return dir;
}

inline std::string cache_file_name(const TableMetadata& m) {
  std::ostringstream os;
  os << "table_" << to_string(m.shape) << "_f" << m.f << "_Em" << m.phases.E_m << "_num"
     << m.phases.nu_m << "_Ei" << m.phases.E_i << "_nui" << m.phases.nu_i << "_K" << m.phases.K
     << "_n" << m.cell_n << "_" << to_string(m.phases.g_variant) << ".csv";
  return os.str();
}

/// Load a cached table if its metadata matches, otherwise build and cache it.
inline DamageLookup cached_table(const TableMetadata& meta, int n_samples,
                                 const std::filesystem::path& cache_dir, bool verbose) {
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  if (ec) throw IoError("cannot create table cache directory '" + cache_dir.string() + "'");
  const auto path = cache_dir / cache_file_name(meta);
  if (std::filesystem::exists(path)) {
    if (verbose) std::cerr << "[table] reuse " << path.string() << "\n";
    return load_table(path, meta);
  }
  if (verbose) std::cerr << "[table] build " << path.string() << "\n";
  InclusionSpec inc{meta.shape, meta.f};
  DamageLookup table = DamageLookup::build(inc, meta.cell_n, meta.phases, n_samples);
  table.save(path);
  return table;
}

inline std::string strain_tag(double h22) {
  std::ostringstream os;
  os << h22;
  std::string s = os.str();
  for (char& c : s)
    if (c == '.') c = 'p';
  return s;
}

} // namespace detail

/// homogenize: off-line sweep of the cell problem over the damage grid;
/// writes the look-up table CSV.
inline int run_homogenize(const RunConfig& cfg, const RunOptions& opts) {
  cfg.validate_for(Scenario::homogenize);
  const auto out = detail::ensure_out_dir(cfg, opts);
  auto table_path = cfg.table_path.empty() ? out / "table.csv"
                                           : std::filesystem::path(cfg.table_path);
  const DamageLookup table = DamageLookup::build(cfg.inclusion, cfg.cell_n, cfg.phases,
                                                 cfg.n_samples);
  table.save(table_path);
  const auto c0 = table.eval(0.0).C;
  std::cout << "table written: " << table_path.string() << " (" << table.n_samples()
            << " samples)\n";
  std::cout << "C(0) [MPa]: C1111=" << c0(0, 0) << " C1122=" << c0(0, 1) << " C1212=" << c0(2, 2)
            << "\n";
  return 0;
}

struct SolveArtifacts {
  std::vector<StepRecord> records;
  MacroState state;
  bool completed = false;
};

/// Shared solve pipeline: build mesh, load table, run the schedule, write the
/// requested snapshots through the step callback.
inline SolveArtifacts solve_pipeline(const RunConfig& cfg, const DamageLookup& table,
                                     const std::filesystem::path& out, const RunOptions& opts,
                                     const std::string& curve_name) {
  const Quad4Mesh mesh = build_specimen_mesh(cfg.nx, cfg.ny, cfg.L, cfg.notch_spec());
  MacroProblem problem(mesh, table, cfg.solver_config());

  std::set<double> pending(cfg.snapshot_strains.begin(), cfg.snapshot_strains.end());
  SolveArtifacts art;
  art.state = problem.initial_state();
  art.records = problem.run_load_schedule(art.state, [&](const StepRecord& rec,
                                                         const MacroState& st) {
    if (opts.verbose)
      std::cerr << "[step " << rec.step << "] delta=" << rec.delta << " T22=" << rec.t22
                << " max_d=" << rec.max_d << " iters=" << rec.newton_iters << "\n";
    for (auto it = pending.begin(); it != pending.end();) {
      if (rec.h22 >= *it - 1e-12) {
        const auto path =
            out / (cfg.field_prefix + "_H" + detail::strain_tag(*it) + ".vtk");
        std::ostringstream note;
        note << "macro field at H22=" << rec.h22;
        write_field(mesh, st.u, st.d, path, note.str());
        it = pending.erase(it);
      } else {
        ++it;
      }
    }
  });

  art.completed = !art.records.empty() && art.records.back().converged &&
                  std::abs(art.state.delta - cfg.solver_config().load_schedule.back()) < 1e-12;
  write_curve(art.records, out / curve_name);
  write_field(mesh, art.state.u, art.state.d, out / (cfg.field_prefix + "_final.vtk"),
              "macro field at end of schedule");
  return art;
}

/// solve: prescribed-displacement schedule on the homogenized specimen.
inline int run_solve(const RunConfig& cfg, const RunOptions& opts) {
  cfg.validate_for(Scenario::solve);
  const auto out = detail::ensure_out_dir(cfg, opts);
  const DamageLookup table = load_table(cfg.resolved_table_path(), cfg.table_metadata());
  const SolveArtifacts art = solve_pipeline(cfg, table, out, opts, cfg.curve_name);
  double peak = 0.0;
  for (const auto& r : art.records)
    if (r.converged) peak = std::max(peak, r.t22);
  std::cout << "curve written: " << (out / cfg.curve_name).string() << " ("
            << art.records.size() << " steps, peak T22=" << peak << " MPa)\n";
  if (!art.completed) {
    std::cerr << "solve: schedule terminated early (bisection exhausted); partial results "
                 "written\n";
    return 2;
  }
  return 0;
}

/// downscale: run the schedule, then reconstruct the micro field at the
/// configured macro point from the converged state.
inline int run_downscale(const RunConfig& cfg, const RunOptions& opts) {
  cfg.validate_for(Scenario::downscale);
  const auto out = detail::ensure_out_dir(cfg, opts);
  const DamageLookup table = load_table(cfg.resolved_table_path(), cfg.table_metadata());
  const SolveArtifacts art = solve_pipeline(cfg, table, out, opts, cfg.curve_name);
  if (!art.completed) {
    std::cerr << "downscale: macro schedule did not complete; no reconstruction\n";
    return 2;
  }
  const Quad4Mesh mesh = build_specimen_mesh(cfg.nx, cfg.ny, cfg.L, cfg.notch_spec());
  const MicroField field = reconstruct(art.state, mesh, cfg.phases, cfg.inclusion, cfg.cell_n,
                                       *cfg.downscale_point, cfg.epsilon);
  const auto path = out / (cfg.field_prefix + "_micro.vtk");
  microfield_export(field, path);
  std::cout << "micro field written: " << path.string() << "\n";
  std::cout << "x=(" << field.x.x1 << "," << field.x.x2 << ") U1=" << field.U[0]
            << " U2=" << field.U[1] << " d=" << field.damage << "\n";
  if (!field.u_tilde_valid[0] || !field.u_tilde_valid[1])
    std::cout << "note: dimensionless component(s) unavailable where U_i = 0\n";
  return 0;
}

struct SweepCase {
  InclusionShape shape;
  double f;
  double ell;
  bool notched;
};

struct SweepResult {
  SweepCase c;
  bool ok = false;
  std::string error;
  double t22_max = 0.0;
  double h22_at_max = 0.0;
};

/// sweep: cross product of (shape, f, ell, notch) cases; tables are cached by
/// microstructure metadata and cases run concurrently up to opts.threads.
inline int run_sweep(const RunConfig& cfg, const RunOptions& opts) {
  cfg.validate_for(Scenario::sweep);
  const auto out = detail::ensure_out_dir(cfg, opts);
  const auto cache_dir = out / cfg.cache_dir;

  std::vector<SweepCase> cases;
  for (InclusionShape shape : cfg.shape_list)
    for (double f : cfg.f_list)
      for (double ell : cfg.ell_list)
        for (int notched : cfg.notch_list) cases.push_back({shape, f, ell, notched != 0});

  // Build each distinct table once, serially, before the concurrent phase.
  std::map<std::string, DamageLookup> tables;
  for (const auto& c : cases) {
    TableMetadata meta = cfg.table_metadata();
    meta.shape = c.shape;
    meta.f = c.f;
    const std::string key = detail::cache_file_name(meta);
    if (!tables.count(key))
      tables.emplace(key, detail::cached_table(meta, cfg.n_samples, cache_dir, opts.verbose));
  }

  std::vector<SweepResult> results(cases.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cases.size()) return;
      const SweepCase& c = cases[i];
      SweepResult& res = results[i];
      res.c = c;
      try {
        RunConfig local = cfg;
        local.inclusion = {c.shape, c.f};
        local.ell = c.ell;
        local.notched = c.notched;
        TableMetadata meta = local.table_metadata();
        const DamageLookup& table = tables.at(detail::cache_file_name(meta));

        std::ostringstream tag;
        tag << to_string(c.shape) << "_f" << c.f << "_l" << c.ell
            << (c.notched ? "_notched" : "_plain");
        RunOptions quiet = opts;
        quiet.verbose = false;
        const SolveArtifacts art =
            solve_pipeline(local, table, out, quiet, "curve_" + tag.str() + ".csv");
        bool any = false;
        for (const auto& r : art.records) {
          if (!r.converged) continue;
          any = true;
          if (r.t22 > res.t22_max) {
            res.t22_max = r.t22;
            res.h22_at_max = r.h22;
          }
        }
        if (!any) throw NumericError("no converged steps");
        res.ok = true;
      } catch (const std::exception& e) {
        res.error = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(cases.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::ofstream summary(out / cfg.sweep_summary);
  if (!summary) throw IoError("run_sweep: cannot open summary file");
  summary << "shape,f,ell_mm,notched,T22_max_MPa,H22_at_max\n";
  bool any_failed = false;
  for (const auto& r : results) {
    if (!r.ok) {
      any_failed = true;
      std::cerr << "sweep case failed (" << to_string(r.c.shape) << ", f=" << r.c.f
                << ", ell=" << r.c.ell << ", notched=" << r.c.notched << "): " << r.error << "\n";
      continue;
    }
    summary << to_string(r.c.shape) << ',' << detail::full_precision(r.c.f) << ','
            << detail::full_precision(r.c.ell) << ',' << (r.c.notched ? 1 : 0) << ','
            << detail::full_precision(r.t22_max) << ',' << detail::full_precision(r.h22_at_max)
            << "\n";
  }
  std::cout << "sweep summary written: " << (out / cfg.sweep_summary).string() << " ("
            << results.size() << " cases)\n";
  return any_failed ? 2 : 0;
}

} // namespace microfrac

#endif
