// Command-line driver: solve / generate / verify / bench.
//
// Every option is a key=value pair shared with the config-file format;
// --config loads a file first, explicit flags override it in order.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "knadi/knadi.hpp"

namespace {

using knadi::Mat;
using knadi::SpMat;

using Pending = std::vector<std::pair<std::string, std::string>>;

struct CommandArgs {
    std::string config_path;
    Pending pending;
};

void add_value_key(CLI::App* cmd, CommandArgs& args, const std::string& flag, const std::string& key,
                   const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&args, key](const std::string& v) { args.pending.emplace_back(key, v); }, help);
}

void add_bool_key(CLI::App* cmd, CommandArgs& args, const std::string& flag, const std::string& key,
                  const std::string& help) {
    cmd->add_flag_function(
        flag, [&args, key](std::int64_t) { args.pending.emplace_back(key, "1"); }, help);
}

void add_config_flag(CLI::App* cmd, CommandArgs& args) {
    cmd->add_option("--config", args.config_path, "key=value config file, applied before flags");
}

void add_matrix_keys(CLI::App* cmd, CommandArgs& args) {
    add_value_key(cmd, args, "--m", "m", "mass matrix M (Matrix Market)");
    add_value_key(cmd, args, "--a", "a", "system matrix A (Matrix Market)");
    add_value_key(cmd, args, "--g", "g", "constraint matrix G (optional)");
    add_value_key(cmd, args, "--b", "b", "input matrix B");
    add_value_key(cmd, args, "--c", "c", "output matrix C");
    add_value_key(cmd, args, "--alpha", "alpha", "output weight alpha > 0");
}

void add_solver_keys(CLI::App* cmd, CommandArgs& args) {
    add_value_key(cmd, args, "--tol-newton", "tol_newton", "outer relative residual tolerance");
    add_value_key(cmd, args, "--max-newton", "max_newton", "Newton step cap");
    add_value_key(cmd, args, "--eta-bar", "eta_bar", "forcing ceiling in (0,1)");
    add_value_key(cmd, args, "--beta", "beta", "sufficient-decrease constant");
    add_value_key(cmd, args, "--forcing", "forcing", "quadratic|constant");
    add_value_key(cmd, args, "--eta-constant", "eta_constant", "forcing value when constant");
    add_value_key(cmd, args, "--line-search", "line_search", "armijo|polymin|none");
    add_value_key(cmd, args, "--max-backtracks", "max_backtracks", "Armijo halving cap");
    add_value_key(cmd, args, "--shifts", "shifts", "heuristic|adaptive");
    add_value_key(cmd, args, "--k-plus", "k_plus", "Arnoldi steps, large Ritz values");
    add_value_key(cmd, args, "--k-minus", "k_minus", "Arnoldi steps, small Ritz values");
    add_value_key(cmd, args, "--n-shifts", "n_shifts", "heuristic shift count");
    add_value_key(cmd, args, "--pool-cap", "pool_cap", "candidate pool cap");
    add_value_key(cmd, args, "--adaptive-r-max", "adaptive_r_max", "adaptive shifts per call");
    add_value_key(cmd, args, "--shift-seed", "shift_seed", "Arnoldi start-vector seed");
    add_bool_key(cmd, args, "--exact-start", "exact_start", "tight inner solves on early steps");
    add_value_key(cmd, args, "--exact-start-tol", "exact_start_tol", "inner tolerance for exact start");
    add_value_key(cmd, args, "--exact-start-switch", "exact_start_switch",
                  "relative residual at which exact start disengages");
    add_value_key(cmd, args, "--adi-norm", "adi_norm", "spectral|frobenius");
    add_value_key(cmd, args, "--newton-norm", "newton_norm", "spectral|frobenius");
    add_value_key(cmd, args, "--adi-max-steps", "adi_max_steps", "inner step cap");
    add_value_key(cmd, args, "--adi-growth-cap", "adi_growth_cap", "divergence guard factor");
    add_bool_key(cmd, args, "--track-solution", "track_solution", "accumulate the solution factor Z");
    add_bool_key(cmd, args, "--compress", "compress", "rank-truncate factors each step");
    add_value_key(cmd, args, "--compress-tol", "compress_tol", "relative truncation threshold");
    add_value_key(cmd, args, "--fixed-adi-tol", "fixed_adi_tol", "fixed relative inner tolerance");
    add_bool_key(cmd, args, "--explicit-residual", "explicit_residual",
                 "recompute the outer residual densely each step");
    add_value_key(cmd, args, "--dense-cap", "dense_cap", "size limit for dense reference paths");
}

void add_problem_keys(CLI::App* cmd, CommandArgs& args) {
    add_value_key(cmd, args, "--family", "family", "stokes2d|random_sparse|diagonal|scalar");
    add_value_key(cmd, args, "--nx", "nx", "stokes2d cells in x");
    add_value_key(cmd, args, "--ny", "ny", "stokes2d cells in y");
    add_value_key(cmd, args, "--viscosity", "viscosity", "stokes2d viscosity");
    add_value_key(cmd, args, "--n-v", "n_v", "random_sparse velocity dimension");
    add_value_key(cmd, args, "--n-p", "n_p", "random_sparse constraint dimension");
    add_value_key(cmd, args, "--density", "density", "random_sparse fill ratio");
    add_bool_key(cmd, args, "--unstable", "unstable", "shift the spectrum across the axis");
    add_value_key(cmd, args, "--mu", "mu", "instability shift, requires mu > 1/2");
    add_value_key(cmd, args, "--n", "n", "diagonal family dimension");
    add_value_key(cmd, args, "--seed", "seed", "generator seed");
    add_value_key(cmd, args, "--n-u", "n_u", "input count");
    add_value_key(cmd, args, "--n-y", "n_y", "output count");
}

knadi::RunConfig build_config(const CommandArgs& args) {
    knadi::RunConfig rc;
    if (!args.config_path.empty()) knadi::apply_config_file(rc, args.config_path);
    for (const auto& kv : args.pending) knadi::apply_config_value(rc, kv.first, kv.second);
    return rc;
}

SpMat load_sparse(const std::string& path, const char* what) {
    if (path.empty()) throw knadi::InvalidSpec(std::string("missing path for ") + what);
    return knadi::read_matrix_market(path).to_sparse();
}

Mat load_dense(const std::string& path, const char* what) {
    if (path.empty()) throw knadi::InvalidSpec(std::string("missing path for ") + what);
    return knadi::read_matrix_market(path).to_dense();
}

knadi::DaeSystem load_system(const knadi::RunConfig& rc) {
    SpMat M = load_sparse(rc.m_path, "M");
    SpMat A = load_sparse(rc.a_path, "A");
    SpMat G = rc.g_path.empty() ? SpMat(M.rows(), 0) : load_sparse(rc.g_path, "G");
    Mat B = load_dense(rc.b_path, "B");
    Mat C = load_dense(rc.c_path, "C");
    knadi::DaeSystem sys(std::move(M), std::move(A), std::move(G), std::move(B), std::move(C), rc.alpha);
    knadi::require_valid(sys);
    return sys;
}

Mat starting_feedback(const knadi::RunConfig& rc, const knadi::DaeSystem& sys, bool default_auto) {
    if (!rc.k0_path.empty()) {
        Mat K0 = load_dense(rc.k0_path, "K0");
        if (K0.rows() != sys.n_v || K0.cols() != sys.n_u)
            throw knadi::DimensionMismatch("K0 must be n_v x n_u");
        return K0;
    }
    if (rc.auto_k0 || default_auto) return knadi::initial_feedback(sys, rc.solver.dense_cap);
    return Mat::Zero(sys.n_v, sys.n_u);
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw knadi::ParseError(path + ": cannot open for writing");
    out << body;
}

int run_solve(const CommandArgs& args) {
    knadi::RunConfig rc = build_config(args);
    knadi::DaeSystem sys = load_system(rc);
    Mat K0 = starting_feedback(rc, sys, false);
    if (!rc.out_z.empty()) rc.solver.track_solution = true;

    knadi::NewtonResult res = knadi::newton_solve(sys, K0, rc.solver);

    knadi::write_matrix_market(rc.out_k, res.K);
    if (!rc.out_z.empty() && res.Z) knadi::write_matrix_market(rc.out_z, res.Z->Z);
    const std::string csv = res.log.to_csv();
    if (rc.out_log.empty()) std::fputs(csv.c_str(), stdout);
    else write_text(rc.out_log, csv);
    std::printf("converged: %d Newton steps, relative residual %.6e, K -> %s\n", res.iterations,
                res.rel_residual, rc.out_k.c_str());
    return 0;
}

int run_generate(const CommandArgs& args) {
    knadi::RunConfig rc = build_config(args);
    knadi::DaeSystem sys = knadi::generate(rc.problem);
    Mat K0 = knadi::initial_feedback(sys, rc.solver.dense_cap);

    namespace fs = std::filesystem;
    fs::create_directories(rc.out_dir);
    auto joined = [&](const char* name) { return (fs::path(rc.out_dir) / name).string(); };

    knadi::write_matrix_market(joined("M.mtx"), sys.M);
    knadi::write_matrix_market(joined("A.mtx"), sys.A);
    if (sys.n_p > 0) knadi::write_matrix_market(joined("G.mtx"), sys.G);
    knadi::write_matrix_market(joined("B.mtx"), sys.B);
    knadi::write_matrix_market(joined("C.mtx"), sys.C);
    knadi::write_matrix_market(joined("K0.mtx"), K0);

    std::string cfg;
    cfg += "# generated problem instance\n";
    cfg += "m = " + joined("M.mtx") + "\n";
    cfg += "a = " + joined("A.mtx") + "\n";
    if (sys.n_p > 0) cfg += "g = " + joined("G.mtx") + "\n";
    cfg += "b = " + joined("B.mtx") + "\n";
    cfg += "c = " + joined("C.mtx") + "\n";
    cfg += "k0 = " + joined("K0.mtx") + "\n";
    char line[64];
    std::snprintf(line, sizeof(line), "alpha = %.17g\n", sys.alpha);
    cfg += line;
    write_text(joined("problem.cfg"), cfg);

    std::printf("wrote instance (n_v=%d n_p=%d n_u=%d n_y=%d) to %s\n", sys.n_v, sys.n_p, sys.n_u,
                sys.n_y, rc.out_dir.c_str());
    return 0;
}

int run_verify(const CommandArgs& args, const std::string& k_path, const std::string& z_path) {
    knadi::RunConfig rc = build_config(args);
    knadi::DaeSystem sys = load_system(rc);
    Mat K = load_dense(k_path, "K");
    if (K.rows() != sys.n_v || K.cols() != sys.n_u)
        throw knadi::DimensionMismatch("K must be n_v x n_u");

    const std::vector<knadi::Complex> eigs =
        knadi::pencil_eigenvalues(sys, K, rc.solver.dense_cap);
    double max_re = -std::numeric_limits<double>::infinity();
    knadi::Complex worst(0, 0);
    for (const auto& z : eigs)
        if (z.real() > max_re) { max_re = z.real(); worst = z; }
    std::printf("closed-loop pencil: %zu finite eigenvalues, spectral abscissa %.6e\n", eigs.size(),
                max_re);
    if (!(max_re < 0.0)) {
        std::printf("not stabilizing: eigenvalue %.6e %+.6ei in the closed right half-plane\n",
                    worst.real(), worst.imag());
        return 2;
    }

    knadi::DenseProjectedSystem proj = knadi::build_theta(sys);
    knadi::CareResult ref = knadi::dense_care_solve(proj, K);
    const double denom = std::max(ref.K.norm(), 1e-300);
    std::printf("relative feedback error vs dense reference: %.6e\n", (K - ref.K).norm() / denom);

    if (!z_path.empty()) {
        Mat Z = load_dense(z_path, "Z");
        if (Z.rows() != sys.n_v) throw knadi::DimensionMismatch("Z must have n_v rows");
        Mat X = Z * Z.transpose();
        knadi::ProjectorContext ctx(sys);
        Mat PiCt = ctx.apply_pi(Mat(knadi::scaled_output(sys).transpose()));
        const double r0 = (PiCt * PiCt.transpose()).norm();
        const double rnorm = knadi::dense_velocity_residual(sys, X, rc.solver.dense_cap).norm();
        std::printf("relative residual of Z factor: %.6e\n", rnorm / std::max(r0, 1e-300));
    }
    return 0;
}

int run_bench(const CommandArgs& args) {
    knadi::RunConfig rc = build_config(args);
    knadi::DaeSystem sys = rc.m_path.empty() ? knadi::generate(rc.problem) : load_system(rc);
    Mat K0 = starting_feedback(rc, sys, true);

    const std::vector<knadi::BenchRow> rows =
        knadi::run_bench(sys, K0, rc.setups, rc.solver.tol_newton, rc.solver.dense_cap);
    const std::string csv = knadi::bench_csv(rows);
    if (rc.out_log.empty()) std::fputs(csv.c_str(), stdout);
    else {
        write_text(rc.out_log, csv);
        std::printf("wrote %zu rows to %s\n", rows.size(), rc.out_log.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feedback stabilization for index-2 DAE systems"};
    app.require_subcommand(1);

    CommandArgs solve_args, gen_args, verify_args, bench_args;
    std::string k_path, z_path;

    CLI::App* solve = app.add_subcommand("solve", "compute the stabilizing feedback K");
    add_config_flag(solve, solve_args);
    add_matrix_keys(solve, solve_args);
    add_value_key(solve, solve_args, "--k0", "k0", "starting feedback (Matrix Market, dense)");
    add_bool_key(solve, solve_args, "--auto-k0", "auto_k0", "derive a stabilizing start densely");
    add_value_key(solve, solve_args, "--out-k", "out_k", "output path for K");
    add_value_key(solve, solve_args, "--out-z", "out_z", "output path for the solution factor Z");
    add_value_key(solve, solve_args, "--out-log", "out_log", "output path for the convergence CSV");
    add_solver_keys(solve, solve_args);

    CLI::App* gen = app.add_subcommand("generate", "write a generated problem instance");
    add_config_flag(gen, gen_args);
    add_problem_keys(gen, gen_args);
    add_value_key(gen, gen_args, "--alpha", "alpha", "output weight alpha > 0");
    add_value_key(gen, gen_args, "--out-dir", "out_dir", "target directory");
    add_value_key(gen, gen_args, "--dense-cap", "dense_cap", "size limit for dense reference paths");

    CLI::App* verify = app.add_subcommand("verify", "certify a feedback matrix");
    add_config_flag(verify, verify_args);
    add_matrix_keys(verify, verify_args);
    verify->add_option("--k", k_path, "feedback matrix to certify")->required();
    verify->add_option("--z", z_path, "optional solution factor to check");
    add_value_key(verify, verify_args, "--dense-cap", "dense_cap", "size limit for dense checks");

    CLI::App* bench = app.add_subcommand("bench", "run the setup ablation and emit CSV");
    add_config_flag(bench, bench_args);
    add_matrix_keys(bench, bench_args);
    add_problem_keys(bench, bench_args);
    add_value_key(bench, bench_args, "--k0", "k0", "starting feedback (Matrix Market, dense)");
    add_value_key(bench, bench_args, "--setups", "setups", "comma list from i,ii,iii,iv,v");
    add_value_key(bench, bench_args, "--out-log", "out_log", "output path for the CSV");
    add_value_key(bench, bench_args, "--tol-newton", "tol_newton", "outer tolerance for all setups");
    add_value_key(bench, bench_args, "--dense-cap", "dense_cap", "size limit for dense checks");

    try {
        app.parse(argc, argv);
        if (solve->parsed()) return run_solve(solve_args);
        if (gen->parsed()) return run_generate(gen_args);
        if (verify->parsed()) return run_verify(verify_args, k_path, z_path);
        if (bench->parsed()) return run_bench(bench_args);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const knadi::NotStabilizing& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.kind(), e.what());
        return 2;
    } catch (const knadi::Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
