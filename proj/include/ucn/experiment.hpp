#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "ucn/baselines.hpp"
#include "ucn/solver.hpp"

namespace ucn {

inline double dbm_to_watts(double dbm) {
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

constexpr double kNatsToBits = 1.4426950408889634;  // 1 / ln 2

/// A full sweep: trials x transmit powers x cluster sizes x methods.
struct ExperimentSpec {
  NetworkConfig base;              // template; powers filled per sweep point
  std::vector<double> power_dbm;
  std::vector<int> bsc_list;
  std::vector<std::string> methods = {"rcg", "mrt"};
  int trials = 1;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  bool trajectory = false;
  int threads = 1;
  bool record_timing = true;

  void validate() const {
    if (power_dbm.empty()) throw ConfigError("power_dbm sweep must be nonempty");
    if (bsc_list.empty()) throw ConfigError("bsc sweep must be nonempty");
    if (methods.empty()) throw ConfigError("methods must be nonempty");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    for (const auto& m : methods)
      if (m != "rcg" && !parse_baseline(m))
        throw ConfigError("unknown method '" + m + "'");
    for (int bsc : bsc_list)
      if (bsc < 1 || bsc > base.num_bs)
        throw ConfigError("bsc sweep value out of range");
  }
};

/// Realizes the config template for one sweep cell.
inline NetworkConfig make_cell_config(const ExperimentSpec& spec,
                                      double power_dbm, int bsc) {
  NetworkConfig cfg = spec.base;
  cfg.bs_power = RVec::Constant(cfg.num_bs, dbm_to_watts(power_dbm));
  cfg.cluster_size = bsc;
  cfg.validate();
  return cfg;
}

struct ResultRow {
  int trial = 0;
  std::uint64_t seed = 0;      // per-trial channel seed
  double power_dbm = 0.0;
  int bsc = 0;
  std::string method;
  int outer_iter = 0;
  double wsr_bits = 0.0;
  double grad_norm = 0.0;      // Riemannian gradient norm at the output
  int inner_iters = 0;         // total phi evaluations over the whole run
  double wall_ms = 0.0;
  std::string status = "ok";
};

/// Rows that carry a usable wsr value (failures are kept in the CSV
/// but excluded from means).
inline bool row_counts_toward_means(const std::string& status) {
  return status != "infeasible" && status != "config_error" &&
         status != "error";
}

struct TrajectoryRow {
  int trial = 0;
  std::uint64_t seed = 0;
  double power_dbm = 0.0;
  int bsc = 0;
  std::string method;
  IterationRecord rec;
};

// ---------------------------------------------------------------------------
// Flat key-value config files.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

template <typename T>
T parse_number(const std::string& tok, int line) {
  std::size_t pos = 0;
  T v{};
  try {
    if constexpr (std::is_same_v<T, double>) v = std::stod(tok, &pos);
    else if constexpr (std::is_same_v<T, std::uint64_t>) v = std::stoull(tok, &pos);
    else v = static_cast<T>(std::stol(tok, &pos));
  } catch (const std::exception&) {
    throw ParseError("cannot parse number '" + tok + "'", line);
  }
  if (pos != tok.size())
    throw ParseError("trailing characters in number '" + tok + "'", line);
  return v;
}

}  // namespace detail

/// Reads the flat key-value experiment format ('key = value', '#'
/// comments). Unknown keys are an error; see the README for the schema.
inline ExperimentSpec load_experiment_spec(std::istream& is) {
  ExperimentSpec spec;
  NetworkConfig& cfg = spec.base;
  int streams_per_ut = 1;
  double noise_dbm = 0.0;
  bool have_noise = false;
  std::vector<double> weights;

  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected 'key = value'", line_no);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (val.empty()) throw ParseError("empty value for '" + key + "'", line_no);

    auto as_int = [&] { return detail::parse_number<int>(val, line_no); };
    auto as_double = [&] { return detail::parse_number<double>(val, line_no); };

    if (key == "num_bs") cfg.num_bs = as_int();
    else if (key == "num_ut") cfg.num_ut = as_int();
    else if (key == "mt") cfg.mt = as_int();
    else if (key == "mr") cfg.mr = as_int();
    else if (key == "streams") streams_per_ut = as_int();
    else if (key == "noise_dbm") { noise_dbm = as_double(); have_noise = true; }
    else if (key == "weights") {
      if (val != "ones")
        for (const auto& t : detail::split_list(val))
          weights.push_back(detail::parse_number<double>(t, line_no));
    } else if (key == "power_dbm") {
      for (const auto& t : detail::split_list(val))
        spec.power_dbm.push_back(detail::parse_number<double>(t, line_no));
    } else if (key == "bsc") {
      for (const auto& t : detail::split_list(val))
        spec.bsc_list.push_back(detail::parse_number<int>(t, line_no));
    } else if (key == "methods") {
      spec.methods = detail::split_list(val);
    } else if (key == "trials") spec.trials = as_int();
    else if (key == "seed") spec.seed = detail::parse_number<std::uint64_t>(val, line_no);
    else if (key == "max_outer") cfg.solver.max_outer = as_int();
    else if (key == "max_inner") cfg.solver.max_inner = as_int();
    else if (key == "grad_tol") cfg.solver.grad_tol = as_double();
    else if (key == "alpha0") cfg.solver.alpha0 = as_double();
    else if (key == "r") cfg.solver.r = as_double();
    else if (key == "c") cfg.solver.c = as_double();
    else if (key == "out_dir") spec.out_dir = val;
    else if (key == "threads") spec.threads = as_int();
    else if (key == "record_timing") spec.record_timing = (val == "1" || val == "true");
    else if (key == "pl_d0") cfg.pathloss_ref_m = as_double();
    else if (key == "pl_gamma") cfg.pathloss_exp = as_double();
    else if (key == "area_radius_m") cfg.area_radius_m = as_double();
    else throw ParseError("unknown key '" + key + "'", line_no);
  }

  if (!have_noise) throw ParseError("missing required key 'noise_dbm'", line_no);
  cfg.noise_power = dbm_to_watts(noise_dbm);
  cfg.streams = IVec::Constant(std::max(cfg.num_ut, 1), streams_per_ut);
  if (weights.empty()) {
    cfg.weights = RVec::Ones(std::max(cfg.num_ut, 1));
  } else {
    if (static_cast<int>(weights.size()) != cfg.num_ut)
      throw ParseError("weights list must have num_ut entries", line_no);
    cfg.weights = Eigen::Map<RVec>(weights.data(), weights.size());
  }
  // Sweep values supply the powers; fill a placeholder so validate() of
  // realized cells is the single gate.
  cfg.bs_power = RVec::Ones(std::max(cfg.num_bs, 1));
  cfg.cluster_size = spec.bsc_list.empty() ? 1 : spec.bsc_list.front();
  return spec;
}

inline ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file '" + path + "'");
  return load_experiment_spec(f);
}

// ---------------------------------------------------------------------------
// Sweep execution.
// ---------------------------------------------------------------------------

namespace detail {

struct JobOutput {
  ResultRow row;
  std::vector<TrajectoryRow> traj;
};

inline JobOutput run_job(const ExperimentSpec& spec, int trial,
                         double power_dbm, int bsc,
                         const std::string& method) {
  JobOutput out;
  ResultRow& row = out.row;
  row.trial = trial;
  row.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(trial));
  row.power_dbm = power_dbm;
  row.bsc = bsc;
  row.method = method;

  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  try {
    const NetworkConfig cfg = make_cell_config(spec, power_dbm, bsc);
    const ChannelSet channels = generate_channels(cfg, row.seed);
    const ClusterMap cluster = select_clusters(channels, bsc);

    if (method == "rcg") {
      const Precoder p0 = mrt_precoder(channels, cluster, cfg);
      SolveResult res = rcg_solve(channels, cluster, cfg, p0, cfg.solver);
      const auto& rows = res.trace.rows;
      row.outer_iter = static_cast<int>(rows.size());
      row.wsr_bits = (rows.empty() ? res.trace.wsr_initial_nats
                                   : rows.back().wsr_nats) *
                     kNatsToBits;
      row.grad_norm = res.trace.final_grad_norm;
      row.inner_iters = res.trace.total_inner();
      row.status = to_string(res.trace.reason);
      if (spec.trajectory)
        for (const auto& r : rows)
          out.traj.push_back(
              {trial, row.seed, power_dbm, bsc, method, r});
    } else {
      const Precoder p =
          linear_baseline(*parse_baseline(method), channels, cluster, cfg);
      const ChannelStack hs = make_channel_stack(channels);
      const ObjectiveCache cache = build_cache(hs, cfg, cluster, p);
      row.wsr_bits = wsr(cache, cfg) * kNatsToBits;
      const TangentVector eg = euclidean_gradient(hs, cfg, cluster, cache);
      row.grad_norm = norm(riemannian_gradient(cfg, cluster, p, eg).xi);
      row.status = "ok";
    }
  } catch (const BaselineInfeasibleError&) {
    row.status = "infeasible";
    row.wsr_bits = 0.0;
  } catch (const ConfigError&) {
    // An individual sweep cell can be dimensionally impossible (say
    // d > B_sc * Mt for the smallest cluster size) while the rest of
    // the sweep is fine; record it and keep going.
    row.status = "config_error";
    row.wsr_bits = 0.0;
  } catch (const Error&) {
    row.status = "error";
    row.wsr_bits = 0.0;
  }
  row.wall_ms =
      std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  if (!spec.record_timing) {
    row.wall_ms = 0.0;
    for (auto& t : out.traj) t.rec.wall_ms = 0.0;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trend report over a results CSV.
// ---------------------------------------------------------------------------

struct TrendReport {
  struct Cell {
    double power_dbm = 0.0;
    int bsc = 0;
    std::string method;
    int n = 0;                 // feasible rows
    double mean_wsr_bits = 0.0;
    long total_outer = 0;
    long total_inner = 0;
  };
  std::vector<Cell> cells;   // in file order of first appearance
  long total_outer = 0;
  long total_inner = 0;

  double mean_inner_per_outer() const {
    return total_outer ? static_cast<double>(total_inner) / total_outer : 0.0;
  }
};

/// Parses a results.csv and aggregates per-sweep-cell means. Malformed
/// rows raise ParseError carrying the offending line number.
inline TrendReport report_trends(const std::string& results_csv_path) {
  std::ifstream f(results_csv_path);
  if (!f) throw IoError("cannot open '" + results_csv_path + "'");
  std::string line;
  int line_no = 1;
  if (!std::getline(f, line)) throw ParseError("missing CSV header", line_no);

  struct Acc {
    int n = 0;
    double wsr = 0.0;
    long outer = 0, inner = 0;
    std::size_t order = 0;
  };
  std::map<std::tuple<double, int, std::string>, Acc> groups;
  std::size_t order = 0;
  TrendReport rep;

  while (std::getline(f, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else
        cur.push_back(ch);
    }
    fields.push_back(cur);
    if (fields.size() != 11)
      throw ParseError("expected 11 comma-separated fields", line_no);
    const double power = detail::parse_number<double>(fields[2], line_no);
    const int bsc = detail::parse_number<int>(fields[3], line_no);
    const std::string& method = fields[4];
    const int outer = detail::parse_number<int>(fields[5], line_no);
    const double wsr_bits = detail::parse_number<double>(fields[6], line_no);
    const int inner = detail::parse_number<int>(fields[8], line_no);
    const std::string& status = fields[10];

    auto it = groups.find({power, bsc, method});
    if (it == groups.end()) {
      it = groups.emplace(std::tuple{power, bsc, method}, Acc{}).first;
      it->second.order = order++;
    }
    Acc& acc = it->second;
    if (row_counts_toward_means(status)) {
      ++acc.n;
      acc.wsr += wsr_bits;
    }
    acc.outer += outer;
    acc.inner += inner;
    rep.total_outer += outer;
    rep.total_inner += inner;
  }

  rep.cells.resize(groups.size());
  for (const auto& [key, acc] : groups) {
    TrendReport::Cell cell;
    cell.power_dbm = std::get<0>(key);
    cell.bsc = std::get<1>(key);
    cell.method = std::get<2>(key);
    cell.n = acc.n;
    cell.mean_wsr_bits = acc.n ? acc.wsr / acc.n : 0.0;
    cell.total_outer = acc.outer;
    cell.total_inner = acc.inner;
    rep.cells[acc.order] = std::move(cell);
  }
  return rep;
}

/// Per-cell means plus pairwise method deltas and the line search cost.
inline std::string to_text(const TrendReport& rep) {
  std::ostringstream os;
  os << "sweep cells (mean wsr over feasible trials):\n";
  for (const auto& c : rep.cells)
    os << "  P=" << c.power_dbm << " dBm  B_sc=" << c.bsc << "  " << c.method
       << ": mean_wsr_bits=" << c.mean_wsr_bits << "  (n=" << c.n << ")\n";

  os << "pairwise method deltas (mean wsr, row minus column):\n";
  for (std::size_t a = 0; a < rep.cells.size(); ++a)
    for (std::size_t b = a + 1; b < rep.cells.size(); ++b) {
      const auto& ca = rep.cells[a];
      const auto& cb = rep.cells[b];
      if (ca.power_dbm == cb.power_dbm && ca.bsc == cb.bsc)
        os << "  P=" << ca.power_dbm << " dBm  B_sc=" << ca.bsc << "  "
           << ca.method << " - " << cb.method << " = "
           << ca.mean_wsr_bits - cb.mean_wsr_bits << "\n";
    }

  if (rep.total_outer == 0)
    os << "mean inner iterations per outer: 0 (zero iterations recorded)\n";
  else
    os << "mean inner iterations per outer: " << rep.mean_inner_per_outer()
       << " over " << rep.total_outer << " outer iterations\n";
  return os.str();
}

struct ExperimentOutput {
  std::string results_path;
  std::string summary_path;
  std::vector<std::string> trajectory_paths;
  std::vector<ResultRow> rows;
  std::string report_text;
};

/// Runs the sweep. One result row per (trial, power, bsc, method) job,
/// executed in parallel when spec.threads > 1; outputs are written in
/// canonical job order, so the CSV bytes never depend on scheduling.
inline ExperimentOutput run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(spec.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + spec.out_dir + "'");

  struct JobKey {
    int trial, pi, bi, mi;
  };
  std::vector<JobKey> jobs;
  for (int t = 0; t < spec.trials; ++t)
    for (std::size_t pi = 0; pi < spec.power_dbm.size(); ++pi)
      for (std::size_t bi = 0; bi < spec.bsc_list.size(); ++bi)
        for (std::size_t mi = 0; mi < spec.methods.size(); ++mi)
          jobs.push_back({t, static_cast<int>(pi), static_cast<int>(bi),
                          static_cast<int>(mi)});

  std::vector<detail::JobOutput> outputs(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const JobKey& key = jobs[j];
      outputs[j] = detail::run_job(spec, key.trial, spec.power_dbm[key.pi],
                                   spec.bsc_list[key.bi], spec.methods[key.mi]);
    }
  };
  if (spec.threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < spec.threads - 1; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
  }

  ExperimentOutput out;
  out.rows.reserve(outputs.size());
  for (const auto& o : outputs) out.rows.push_back(o.row);

  // results.csv
  out.results_path = (fs::path(spec.out_dir) / "results.csv").string();
  {
    std::ofstream f(out.results_path, std::ios::trunc);
    if (!f) throw IoError("cannot write '" + out.results_path + "'");
    f << "trial,seed,power_dbm,bsc,method,outer_iter,wsr_bits,grad_norm,"
         "inner_iters,wall_ms,status\n";
    for (const auto& r : out.rows)
      f << r.trial << ',' << r.seed << ',' << detail::fmt17(r.power_dbm) << ','
        << r.bsc << ',' << r.method << ',' << r.outer_iter << ','
        << detail::fmt17(r.wsr_bits) << ',' << detail::fmt17(r.grad_norm)
        << ',' << r.inner_iters << ',' << detail::fmt17(r.wall_ms) << ','
        << r.status << '\n';
  }

  // summary.csv: mean final wsr per sweep cell over the feasible trials.
  out.summary_path = (fs::path(spec.out_dir) / "summary.csv").string();
  {
    std::ofstream f(out.summary_path, std::ios::trunc);
    if (!f) throw IoError("cannot write '" + out.summary_path + "'");
    f << "power_dbm,bsc,method,trials,mean_wsr_bits\n";
    for (std::size_t pi = 0; pi < spec.power_dbm.size(); ++pi)
      for (std::size_t bi = 0; bi < spec.bsc_list.size(); ++bi)
        for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
          int n = 0;
          double acc = 0.0;
          for (const auto& r : out.rows)
            if (r.power_dbm == spec.power_dbm[pi] &&
                r.bsc == spec.bsc_list[bi] && r.method == spec.methods[mi] &&
                row_counts_toward_means(r.status)) {
              ++n;
              acc += r.wsr_bits;
            }
          f << detail::fmt17(spec.power_dbm[pi]) << ',' << spec.bsc_list[bi]
            << ',' << spec.methods[mi] << ',' << n << ','
            << detail::fmt17(n ? acc / n : 0.0) << '\n';
        }
  }

  // One trajectory file per method when enabled (header-only for
  // closed-form methods).
  if (spec.trajectory) {
    for (const auto& m : spec.methods) {
      const std::string path =
          (fs::path(spec.out_dir) / ("trajectory_" + m + ".csv")).string();
      std::ofstream f(path, std::ios::trunc);
      if (!f) throw IoError("cannot write '" + path + "'");
      f << "trial,seed,power_dbm,bsc,method,iter,f,wsr_bits,grad_norm,beta,"
           "alpha,inner_iters,wall_ms\n";
      for (const auto& o : outputs)
        for (const auto& t : o.traj)
          if (t.method == m)
            f << t.trial << ',' << t.seed << ',' << detail::fmt17(t.power_dbm)
              << ',' << t.bsc << ',' << t.method << ',' << t.rec.iter << ','
              << detail::fmt17(t.rec.f) << ','
              << detail::fmt17(t.rec.wsr_nats * kNatsToBits) << ','
              << detail::fmt17(t.rec.grad_norm) << ','
              << detail::fmt17(t.rec.beta) << ',' << detail::fmt17(t.rec.alpha)
              << ',' << t.rec.inner_iters << ','
              << detail::fmt17(t.rec.wall_ms) << '\n';
      out.trajectory_paths.push_back(path);
    }
  }

  out.report_text = to_text(report_trends(out.results_path));
  return out;
}

}  // namespace ucn
