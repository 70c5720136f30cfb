#include "cli.hpp"

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spamm/error.hpp"
#include "spamm/frechet.hpp"
#include "spamm/io.hpp"
#include "spamm/precond.hpp"
#include "spamm/spamm.hpp"
#include "spamm/sqrt_iter.hpp"

namespace spamm::cli {

namespace {

namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDiverged = 2;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

HierMatrix load(const std::string &path, std::size_t block_size) {
  return build(io::read_matrix_market(path), block_size);
}

struct GenArgs {
  std::string out;
  io::SyntheticSpec spec;
  std::string ordering = "natural";
  std::string surgery = "spectral";
  double kappa = 0.0;
};

int run_gen(const GenArgs &a) {
  io::SyntheticSpec spec = a.spec;
  spec.ordering = io::ordering_from_string(a.ordering);
  spec.surgery = io::surgery_from_string(a.surgery);
  if (a.kappa > 0.0)
    spec.target_condition = a.kappa;
  io::write_matrix_market(io::gen_decay(spec), a.out);
  std::cout << "wrote " << a.out << " (n = " << spec.n << ")\n";
  return kOk;
}

struct MultiplyArgs {
  std::string a, b, out = "product.mtx", volumes, volume_format = "csv";
  double tau = 0.0;
  std::size_t block_size = HierMatrix::kDefaultBlockSize;
};

int run_multiply(const MultiplyArgs &m) {
  const HierMatrix a = load(m.a, m.block_size);
  const HierMatrix b = load(m.b, m.block_size);
  VolumeLog log;
  const MultiplyResult r =
      multiply(a, b, m.tau, m.volumes.empty() ? nullptr : &log);
  io::write_matrix_market(to_dense(r.product), m.out, false);
  if (!m.volumes.empty())
    io::export_volumes(log, m.volumes, io::volume_format_from_string(m.volume_format));
  std::cout << "leaf products " << r.stats.leaf_products_performed << " of "
            << r.stats.leaf_products_possible << " (volume fraction "
            << fmt(r.stats.volume_fraction()) << ")\nwrote " << m.out << '\n';
  return kOk;
}

struct IterArgs {
  std::string input;
  std::string mode = "dual";
  double tau = 0.0;
  double tau_s = -1.0;
  std::size_t block_size = HierMatrix::kDefaultBlockSize;
  std::size_t max_iter = 100;
  double tol = 1e-10;
  bool scale = true;

  IterationConfig config() const {
    IterationConfig c;
    c.mode = channel_from_string(mode);
    c.tau = tau;
    if (tau_s >= 0.0)
      c.tau_s = tau_s;
    c.block_size = block_size;
    c.max_iter = max_iter;
    c.convergence_tol = tol;
    c.scaling_enabled = scale;
    c.validate();
    return c;
  }

  std::map<std::string, std::string> echo() const {
    const IterationConfig c = config();
    return {{"input", input},
            {"mode", mode},
            {"tau", fmt(c.tau)},
            {"tau_s", fmt(c.sensitive_tau())},
            {"block_size", std::to_string(block_size)},
            {"max_iter", std::to_string(max_iter)},
            {"tol", fmt(tol)},
            {"scaling", scale ? "on" : "off"},
            {"workers", std::to_string(worker_count())}};
  }
};

void add_iter_options(CLI::App *cmd, IterArgs &a) {
  cmd->add_option("input", a.input, "Matrix Market file")->required();
  cmd->add_option("--mode", a.mode, "dual or single")
      ->check(CLI::IsMember({"dual", "single"}));
  cmd->add_option("--tau", a.tau, "SpAMM threshold")->check(CLI::NonNegativeNumber);
  cmd->add_option("--tau-s", a.tau_s,
                  "sensitive threshold for the y product (default tau/100)");
  cmd->add_option("--block-size", a.block_size, "leaf block size")
      ->check(CLI::Range(1, 64));
  cmd->add_option("--max-iter", a.max_iter)->check(CLI::PositiveNumber);
  cmd->add_option("--tol", a.tol, "trace-error tolerance")->check(CLI::PositiveNumber);
  cmd->add_flag("--scale,!--no-scale", a.scale, "sigmoidal scaling (default on)");
}

struct SqrtArgs {
  IterArgs it;
  std::string history, manifest, out_inv_sqrt, out_sqrt, volumes_dir = "volumes";
  std::size_t volumes_every = 0;
};

int run_sqrt(const SqrtArgs &a) {
  const IterationConfig cfg = a.it.config();
  const HierMatrix s = load(a.it.input, cfg.block_size);

  io::RunManifest man;
  man.config = a.it.echo();
  StepObserver observer;
  if (a.volumes_every > 0) {
    observer = [&](const IterationState &st) {
      if (st.k % a.volumes_every != 0)
        return;
      // Re-evaluate the x product with logging on.
      VolumeLog log;
      if (cfg.mode == Channel::dual)
        multiply(st.y, st.z, cfg.tau, &log);
      else
        multiply(transpose(st.z), st.y, cfg.tau, &log);
      char name[32];
      std::snprintf(name, sizeof name, "x_%04zu.csv", st.k);
      const fs::path path = fs::path(a.volumes_dir) / name;
      io::export_volumes(log, path);
      man.outputs["volumes_" + std::to_string(st.k)] = path.string();
    };
  }
  const IterationResult r = run(s, cfg, observer);
  man.history = r.history;

  if (!a.out_inv_sqrt.empty()) {
    io::write_matrix_market(to_dense(r.inv_sqrt), a.out_inv_sqrt, false);
    man.outputs["inv_sqrt"] = a.out_inv_sqrt;
  }
  if (!a.out_sqrt.empty()) {
    io::write_matrix_market(to_dense(r.sqrt), a.out_sqrt, false);
    man.outputs["sqrt"] = a.out_sqrt;
  }
  if (!a.history.empty()) {
    io::export_history(man, a.history);
    man.outputs["history"] = a.history;
  }
  if (!a.manifest.empty())
    io::write_manifest_json(man, a.manifest);

  std::cout << "status " << to_string(r.status) << " iterations " << r.iterations
            << " t " << fmt(r.history.back().t) << '\n';
  if (r.status == RunStatus::diverged) {
    std::cerr << "error: iteration diverged\n";
    return kDiverged;
  }
  if (r.status == RunStatus::max_iter)
    std::cerr << "warning: no convergence within " << cfg.max_iter
              << " iterations\n";
  return kOk;
}

struct PrecondArgs {
  std::string input, slices_dir;
  std::vector<double> mu_ladder{0.1, 0.01, 0.001};
  double tau0 = 0.1;
  double tau_apply = 0.01;
  double tau_s = -1.0;
  std::size_t block_size = HierMatrix::kDefaultBlockSize;
  std::size_t max_iter = 100;
  std::size_t dense_cap = 512;
};

int run_precond(const PrecondArgs &a) {
  for (std::size_t i = 1; i < a.mu_ladder.size(); ++i)
    if (!(a.mu_ladder[i] < a.mu_ladder[i - 1]))
      throw InvalidArgument("--mu-ladder must be strictly decreasing");
  const DenseMatrix dense = io::read_matrix_market(a.input);
  const HierMatrix s = build(dense, a.block_size);
  IterationConfig cfg;
  cfg.block_size = a.block_size;
  cfg.max_iter = a.max_iter;
  if (a.tau_s >= 0.0)
    cfg.tau_s = a.tau_s;
  precond::ProductRepresentation rep;
  rep.target = a.input;
  const bool report = static_cast<std::size_t>(dense.rows()) <= a.dense_cap;
  auto condition = [](const DenseMatrix &m) {
    const Eigen::VectorXd l =
        Eigen::SelfAdjointEigenSolver<DenseMatrix>(m, Eigen::EigenvaluesOnly)
            .eigenvalues();
    return l.maxCoeff() / l.minCoeff();
  };
  if (report)
    std::cout << "condition 0 " << fmt(condition(dense)) << '\n';
  for (double mu : a.mu_ladder) {
    try {
      rep = precond::extend(rep, s, mu, a.tau0, a.tau_apply, cfg);
    } catch (const DivergenceError &e) {
      std::cerr << "error: " << e.what() << '\n';
      if (!rep.empty())
        io::save_representation(rep, a.slices_dir);
      return kDiverged;
    }
    const precond::Slice &sl = rep.slices.back();
    std::cout << "slice " << rep.slices.size() << " mu " << fmt(mu) << " status "
              << to_string(sl.status) << " iterations " << sl.iterations;
    if (report)
      std::cout << " condition "
                << fmt(condition(precond::dense_congruence(rep, dense)));
    std::cout << '\n';
  }
  io::save_representation(rep, a.slices_dir);
  std::cout << "wrote " << rep.slices.size() << " slices to " << a.slices_dir << '\n';
  return kOk;
}

struct AnalyzeArgs {
  IterArgs it;
  std::size_t steps = 60;
  std::size_t dense_cap = 512;
  std::string out;
};

int run_analyze(const AnalyzeArgs &a) {
  const IterationConfig cfg = a.it.config();
  const HierMatrix s = load(a.it.input, cfg.block_size);
  frechet::FlowOptions opts;
  opts.dense_cap = a.dense_cap;
  const frechet::ErrorFlow flow = frechet::track_error_flow(s, cfg, a.steps, opts);
  if (!a.out.empty()) {
    if (fs::path(a.out).has_parent_path())
      fs::create_directories(fs::path(a.out).parent_path());
    std::FILE *f = std::fopen(a.out.c_str(), "w");
    if (!f)
      throw IoError("cannot write " + a.out);
    std::fprintf(f, "k,t_approx,t_reference,alpha,eps,dy,dz,dx,dz_bound,z_norm,"
                    "deriv_y,deriv_z,limit_gap_y,limit_gap_z\n");
    for (const auto &r : flow.records)
      std::fprintf(f, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                      "%.17g,%.17g,%.17g,%.17g\n",
                   r.k, r.t_approx, r.t_reference, r.alpha, r.eps, r.dy, r.dz,
                   r.dx, r.dz_bound, r.z_norm, r.deriv_y, r.deriv_z,
                   r.limit_gap_y, r.limit_gap_z);
    if (std::fclose(f) != 0)
      throw IoError("write failed for " + a.out);
  }
  const auto &last = flow.records.back();
  std::cout << "status " << to_string(flow.status) << " steps " << last.k
            << " relative dz " << fmt(last.z_norm > 0 ? last.dz / last.z_norm : 0.0)
            << " bifurcated " << (flow.bifurcated ? "yes" : "no");
  if (flow.bifurcation_step)
    std::cout << " at k = " << *flow.bifurcation_step;
  std::cout << '\n';
  return flow.status == RunStatus::diverged ? kDiverged : kOk;
}

struct CheckArgs {
  std::string input, slices_dir;
  double tau = 0.0;
  std::size_t block_size = HierMatrix::kDefaultBlockSize;
};

int run_check(const CheckArgs &a) {
  const HierMatrix s = load(a.input, a.block_size);
  const precond::ProductRepresentation rep =
      io::load_representation(a.slices_dir, a.block_size);
  std::cout << "slices " << rep.slices.size() << " residual "
            << fmt(precond::congruence_check(rep, s, a.tau)) << '\n';
  return kOk;
}

} // namespace

int cli_main(int argc, char **argv) {
  CLI::App app{"Sparse approximate matrix multiply and Newton-Schulz tools"};
  app.require_subcommand(1);
  bool serial = false;
  std::size_t threads = 0;
  app.add_flag("--serial", serial, "single worker, bitwise reproducible");
  app.add_option("--threads", threads, "worker count (overrides SPAMM_THREADS)");

  GenArgs gen;
  auto *g = app.add_subcommand("gen", "write a synthetic decay matrix");
  g->add_option("-o,--out", gen.out, "output Matrix Market file")->required();
  g->add_option("--n", gen.spec.n)->check(CLI::PositiveNumber);
  g->add_option("--dim", gen.spec.lattice_dim, "lattice dimension")
      ->check(CLI::Range(1, 3));
  g->add_option("--gamma", gen.spec.decay_rate, "decay rate")
      ->check(CLI::PositiveNumber);
  g->add_option("--shift", gen.spec.diagonal_shift, "diagonal shift");
  g->add_option("--ordering", gen.ordering)->check(CLI::IsMember({"natural", "morton"}));
  g->add_option("--kappa", gen.kappa, "target condition number");
  g->add_option("--surgery", gen.surgery)->check(CLI::IsMember({"spectral", "graded"}));
  g->add_option("--seed", gen.spec.seed);

  MultiplyArgs mul;
  auto *m = app.add_subcommand("multiply", "SpAMM product of two matrices");
  m->add_option("a", mul.a)->required();
  m->add_option("b", mul.b)->required();
  m->add_option("-o,--out", mul.out);
  m->add_option("--tau", mul.tau)->check(CLI::NonNegativeNumber);
  m->add_option("--block-size", mul.block_size)->check(CLI::Range(1, 64));
  m->add_option("--volumes", mul.volumes, "write the product volume log");
  m->add_option("--volume-format", mul.volume_format)->check(CLI::IsMember({"csv", "vtk"}));

  SqrtArgs sq;
  auto *q = app.add_subcommand("sqrt", "Newton-Schulz square root iteration");
  add_iter_options(q, sq.it);
  q->add_option("--history", sq.history, "history CSV");
  q->add_option("--manifest", sq.manifest, "run manifest JSON");
  q->add_option("--out-inv-sqrt", sq.out_inv_sqrt);
  q->add_option("--out-sqrt", sq.out_sqrt);
  q->add_option("--volumes-every", sq.volumes_every,
                "log the x product volume every k steps");
  q->add_option("--volumes-dir", sq.volumes_dir);

  PrecondArgs pc;
  auto *p = app.add_subcommand("precond", "build regularized slices");
  p->add_option("input", pc.input)->required();
  p->add_option("--mu-ladder", pc.mu_ladder, "strictly decreasing shifts")
      ->delimiter(',');
  p->add_option("--tau0", pc.tau0)->check(CLI::NonNegativeNumber);
  p->add_option("--tau-apply", pc.tau_apply)->check(CLI::NonNegativeNumber);
  p->add_option("--tau-s", pc.tau_s);
  p->add_option("--block-size", pc.block_size)->check(CLI::Range(1, 64));
  p->add_option("--max-iter", pc.max_iter)->check(CLI::PositiveNumber);
  p->add_option("--dense-cap", pc.dense_cap, "largest n for condition reports");
  p->add_option("--slices-dir", pc.slices_dir)->required();

  AnalyzeArgs an;
  auto *z = app.add_subcommand("analyze", "error-flow tracking against a dense reference");
  add_iter_options(z, an.it);
  z->add_option("--steps", an.steps)->check(CLI::PositiveNumber);
  z->add_option("--dense-cap", an.dense_cap);
  z->add_option("-o,--out", an.out, "per-step CSV");

  CheckArgs ck;
  auto *c = app.add_subcommand("check", "congruence residual of a representation");
  c->add_option("input", ck.input)->required();
  c->add_option("--slices-dir", ck.slices_dir)->required();
  c->add_option("--tau", ck.tau)->check(CLI::NonNegativeNumber);
  c->add_option("--block-size", ck.block_size)->check(CLI::Range(1, 64));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }

  const std::size_t saved_workers = worker_count();
  if (serial)
    set_worker_count(1);
  else if (threads > 0)
    set_worker_count(threads);
  int code = kOk;
  try {
    if (*g)
      code = run_gen(gen);
    else if (*m)
      code = run_multiply(mul);
    else if (*q)
      code = run_sqrt(sq);
    else if (*p)
      code = run_precond(pc);
    else if (*z)
      code = run_analyze(an);
    else
      code = run_check(ck);
  } catch (const DivergenceError &e) {
    std::cerr << "error: " << e.what() << '\n';
    code = kDiverged;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    code = kUsage;
  }
  set_worker_count(saved_workers);
  return code;
}

} // namespace spamm::cli
