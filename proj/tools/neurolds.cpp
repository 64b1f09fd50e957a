#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "neurolds/bench.hpp"
#include "neurolds/discrepancy.hpp"
#include "neurolds/mlp.hpp"
#include "neurolds/parallel.hpp"
#include "neurolds/point_io.hpp"
#include "neurolds/rng.hpp"
#include "neurolds/rrt.hpp"
#include "neurolds/seqcore.hpp"
#include "neurolds/trainer.hpp"

using namespace neurolds;

namespace {

// Writes to `path`, or stdout when path is empty or "-".
void with_output(const std::string& path, const std::function<void(std::ostream&)>& body) {
    if (path.empty() || path == "-") {
        body(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    body(out);
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void emit_points(const std::string& path, const PointBuffer& pts) {
    if (path.empty() || path == "-") {
        write_points_csv(std::cout, pts);
    } else {
        save_points(path, pts);
    }
}

struct Shared {
    int threads = 1;
    bool deterministic = false;
    std::uint64_t seed = 0;
};

struct SeqFlags {
    std::string kind;
    std::optional<std::size_t> dim;  // neural: the model's dimension, otherwise 1
    std::uint64_t burn_in = 0;
    std::string model;
    std::string directions;
};

void add_seq_flags(CLI::App* cmd, SeqFlags& f, bool with_dim = true) {
    cmd->add_option("--kind", f.kind, "vdc | halton | sobol | sobol-scrambled | uniform | neural")
        ->required()
        ->check(CLI::IsMember({"vdc", "halton", "sobol", "sobol-scrambled", "uniform", "neural"}));
    if (with_dim) cmd->add_option("--dim", f.dim, "dimension")->check(CLI::PositiveNumber);
    cmd->add_option("--burn-in", f.burn_in, "raw indices skipped before the first point");
    cmd->add_option("--model", f.model, "model file (neural kind)");
    cmd->add_option("--directions", f.directions, "Joe-Kuo direction-number file (sobol kinds)");
}

// Holds an externally loaded direction table for the lifetime of the command.
std::optional<DirectionTable> g_table;

SequenceSpec make_spec(const SeqFlags& f, const Shared& shared) {
    SequenceSpec spec;
    spec.kind = parse_sequence_kind(f.kind);
    spec.burn_in = f.burn_in;
    if (spec.randomized()) spec.seed = shared.seed;
    if (!f.model.empty()) spec.model_path = f.model;
    if (f.dim) {
        spec.dim = *f.dim;
    } else if (spec.kind == SequenceKind::neural && spec.model_path) {
        spec.dim = load_model(*spec.model_path).output_dim();
    }
    if (!f.directions.empty()) {
        g_table = DirectionTable::from_file(f.directions);
        spec.table = &*g_table;
    }
    return spec;
}

std::vector<KernelFamily> parse_kernels(const std::vector<std::string>& names) {
    std::vector<KernelFamily> out;
    for (const auto& n : names) {
        if (n == "all") {
            out.assign(std::begin(kAllFamilies), std::end(kAllFamilies));
        } else {
            out.push_back(parse_kernel_family(n));
        }
    }
    return out;
}

constexpr const char* kSchemas = R"(CSV outputs:
  generate     one point per row, no header (.bin extension: binary NLDP format)
  disc         N,<kernel>...    discrepancy of every prefix (or only P=N with --final)
  train        model file + <model>.meta sidecar; log stage,epoch,loss,lr,seconds
  scramble     one point per row, no header
  integrate    N,abs_error      (N,estimate without a reference)
  sensitivity  param,S1,ST
  plan         source,width,success_pct; --tree writes node,parent,q1..qd
Exit codes: 0 success, 1 runtime error, 2 usage error.
Sub-seeds are derived as split_seed(seed, k) = mix64(seed ^ mix64(k + 0x632be59bd9b4e019)).)";

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural low-discrepancy sequences: generation, evaluation, training and benchmarks"};
    app.footer(kSchemas);
    app.name("neurolds");
    app.require_subcommand(1);
    app.fallthrough();

    Shared shared;
    app.add_option("--threads", shared.threads, "worker threads (default 1)")->check(CLI::PositiveNumber);
    app.add_flag("--deterministic", shared.deterministic,
                 "fixed-order reductions regardless of thread count (implied with one thread)");
    app.add_option("--seed", shared.seed, "master seed for every randomized component");

    std::function<void()> action;

    // generate ---------------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "write points of a sequence");
    SeqFlags gen_seq;
    std::size_t gen_n = 0;
    std::string gen_out;
    add_seq_flags(gen, gen_seq);
    gen->add_option("--n", gen_n, "number of points")->required()->check(CLI::PositiveNumber);
    gen->add_option("-o,--output", gen_out, "output file (.csv or .bin); stdout when omitted");
    gen->callback([&] {
        action = [&] {
            GenerateInfo info;
            const PointBuffer pts = generate(make_spec(gen_seq, shared), gen_n, &info);
            if (info.beyond_training_length) {
                std::cerr << "warning: indices beyond the model's training length were evaluated\n";
            }
            emit_points(gen_out, pts);
        };
    });

    // disc -------------------------------------------------------------------
    auto* disc = app.add_subcommand("disc", "discrepancy of every prefix of a point file");
    std::string disc_in, disc_out;
    std::vector<std::string> disc_kernels{"sym"};
    std::vector<double> disc_gamma;
    bool disc_final = false, disc_squared = false;
    disc->add_option("-i,--input", disc_in, "point file (.csv or .bin)")->required();
    disc->add_option("--kernel", disc_kernels, "star | ext | per | ctr | sym | asd | all")
        ->delimiter(',')
        ->check(CLI::IsMember({"star", "ext", "per", "ctr", "sym", "asd", "all"}));
    disc->add_option("--gamma", disc_gamma, "product weights, comma separated")->delimiter(',')->check(CLI::PositiveNumber);
    disc->add_flag("--final", disc_final, "only the full set (P = N)");
    disc->add_flag("--squared", disc_squared, "report squared discrepancies");
    disc->add_option("-o,--output", disc_out, "CSV output; stdout when omitted");
    disc->callback([&] {
        action = [&] {
            const PointBuffer pts = load_points(disc_in);
            const auto fams = parse_kernels(disc_kernels);
            std::vector<std::vector<double>> cols;
            for (KernelFamily f : fams) {
                const KernelSpec spec{f, disc_gamma};
                cols.push_back(disc_squared ? discrepancy_squared_all_prefixes(spec, pts)
                                            : discrepancy_all_prefixes(spec, pts));
            }
            with_output(disc_out, [&](std::ostream& out) {
                out.precision(17);
                out << 'N';
                for (KernelFamily f : fams) out << ',' << to_string(f);
                out << '\n';
                for (std::size_t p = disc_final ? pts.size() - 1 : 0; p < pts.size(); ++p) {
                    out << p + 1;
                    for (const auto& c : cols) out << ',' << c[p];
                    out << '\n';
                }
            });
        };
    });

    // train ------------------------------------------------------------------
    auto* train = app.add_subcommand("train", "pretrain then fine-tune a sequence model");
    std::string train_config, train_out, train_log;
    std::optional<std::size_t> t_dim, t_n, t_hidden, t_layers, t_bands, t_pre_epochs, t_fine_epochs, t_ckpt_every;
    std::optional<double> t_pre_lr, t_fine_lr, t_ratio;
    std::optional<std::string> t_loss, t_weights, t_reference, t_ckpt;
    std::optional<std::uint64_t> t_burn_in;
    std::vector<double> t_gamma;
    train->add_option("--config", train_config, "key: value configuration file");
    train->add_option("--dim", t_dim, "point dimension")->check(CLI::PositiveNumber);
    train->add_option("--n", t_n, "training length N")->check(CLI::PositiveNumber);
    train->add_option("--hidden", t_hidden, "hidden width H")->check(CLI::PositiveNumber);
    train->add_option("--layers", t_layers, "number of affine layers L")->check(CLI::PositiveNumber);
    train->add_option("--bands", t_bands, "encoding bands K")->check(CLI::PositiveNumber);
    train->add_option("--pretrain-lr", t_pre_lr, "pretraining learning rate")->check(CLI::PositiveNumber);
    train->add_option("--pretrain-epochs", t_pre_epochs, "pretraining epochs");
    train->add_option("--finetune-lr", t_fine_lr, "fine-tuning learning rate")->check(CLI::PositiveNumber);
    train->add_option("--finetune-epochs", t_fine_epochs, "fine-tuning epochs")->check(CLI::PositiveNumber);
    train->add_option("--final-lr-ratio", t_ratio, "final / initial learning rate")->check(CLI::Range(0.0, 1.0));
    train->add_option("--loss", t_loss, "discrepancy family of the fine-tuning loss (selects its defaults)")
        ->check(CLI::IsMember({"star", "ext", "per", "ctr", "sym", "asd"}));
    train->add_option("--gamma", t_gamma, "product weights, comma separated")->delimiter(',')->check(CLI::PositiveNumber);
    train->add_option("--prefix-weights", t_weights, "uniform | length-proportional")
        ->check(CLI::IsMember({"uniform", "length-proportional"}));
    train->add_option("--reference", t_reference, "pretraining reference: sobol | halton")
        ->check(CLI::IsMember({"sobol", "halton"}));
    train->add_option("--burn-in", t_burn_in, "reference burn-in");
    train->add_option("--checkpoint", t_ckpt, "checkpoint model path");
    train->add_option("--checkpoint-every", t_ckpt_every, "epochs between checkpoints");
    train->add_option("-o,--output", train_out, "model file")->required();
    train->add_option("--log", train_log, "log CSV (default <output>.log.csv)");
    train->callback([&] {
        action = [&] {
            TrainConfig cfg = train_config.empty() ? TrainConfig::defaults_for(t_loss ? parse_kernel_family(*t_loss)
                                                                                       : KernelFamily::sym)
                                                   : load_train_config(train_config);
            if (t_loss && !train_config.empty()) cfg.loss = parse_kernel_family(*t_loss);
            if (t_dim) cfg.dim = *t_dim;
            if (t_n) cfg.n_points = *t_n;
            if (t_hidden) cfg.hidden = *t_hidden;
            if (t_layers) cfg.layers = *t_layers;
            if (t_bands) cfg.bands = *t_bands;
            if (t_pre_lr) cfg.pretrain_lr = *t_pre_lr;
            if (t_pre_epochs) cfg.pretrain_epochs = *t_pre_epochs;
            if (t_fine_lr) cfg.finetune_lr = *t_fine_lr;
            if (t_fine_epochs) cfg.finetune_epochs = *t_fine_epochs;
            if (t_ratio) cfg.final_lr_ratio = *t_ratio;
            if (!t_gamma.empty()) cfg.gamma = t_gamma;
            if (t_weights) cfg.prefix_weights.scheme = parse_weight_scheme(*t_weights);
            if (t_reference) cfg.reference = parse_sequence_kind(*t_reference);
            if (t_burn_in) cfg.burn_in = *t_burn_in;
            if (t_ckpt) cfg.checkpoint_path = *t_ckpt;
            if (t_ckpt_every) cfg.checkpoint_every = *t_ckpt_every;
            if (app.count("--seed")) cfg.seed = shared.seed;

            const std::string log_path = train_log.empty() ? train_out + ".log.csv" : train_log;
            try {
                TrainResult res = train_full(cfg);
                for (const auto& w : res.log.warnings) std::cerr << "warning: " << w << '\n';
                save_model(train_out, res.model);
                res.log.save_csv(log_path);
                std::cerr << "final prefix loss " << res.loss << '\n';
            } catch (const TrainingError& err) {
                const std::string fallback = train_out + ".last-good";
                save_model(fallback, err.last_good);
                err.log.save_csv(log_path);
                throw std::runtime_error(std::string(err.what()) + "; last good model written to " + fallback);
            }
        };
    });

    // scramble ---------------------------------------------------------------
    auto* scr = app.add_subcommand("scramble", "Owen-scrambled Sobol' points, or scramble an existing point file");
    std::size_t scr_dim = 1, scr_n = 0;
    std::uint64_t scr_burn = 0;
    std::string scr_in, scr_out;
    scr->add_option("--dim", scr_dim, "dimension")->check(CLI::PositiveNumber);
    scr->add_option("--n", scr_n, "number of points (ignored with --input)");
    scr->add_option("--burn-in", scr_burn, "raw Sobol' indices skipped");
    scr->add_option("-i,--input", scr_in, "points to scramble (coordinates truncated to 32 bits)");
    scr->add_option("-o,--output", scr_out, "output file; stdout when omitted");
    scr->callback([&] {
        action = [&] {
            PointBuffer pts;
            if (!scr_in.empty()) {
                const PointBuffer raw_pts = load_points(scr_in);
                if (!raw_pts.in_unit_cube()) throw std::runtime_error("input points must lie in [0,1]");
                std::vector<std::uint32_t> raw;
                for (double x : raw_pts.coords()) {
                    raw.push_back(static_cast<std::uint32_t>(std::min(std::ldexp(x, kSobolBits), 4294967295.0)));
                }
                pts = owen_scramble(raw, raw_pts.dim(), shared.seed);
            } else {
                if (scr_n < 1) throw CLI::ValidationError("--n", "required without --input");
                SequenceSpec spec;
                spec.kind = SequenceKind::sobol_scrambled;
                spec.dim = scr_dim;
                spec.burn_in = scr_burn;
                spec.seed = shared.seed;
                pts = generate(spec, scr_n);
            }
            emit_points(scr_out, pts);
        };
    });

    // integrate --------------------------------------------------------------
    auto* integ = app.add_subcommand("integrate", "QMC error study of a test integrand");
    SeqFlags int_seq;
    std::string int_fn = "borehole", int_out;
    std::size_t int_n = 500, int_dim = 2, int_ref_samples = kBoreholeReferenceSamples;
    std::optional<double> int_ref;
    bool int_mc_ref = false;
    std::uint64_t int_ref_seed = kBoreholeReferenceSeed;
    std::vector<std::size_t> int_ckpts = default_checkpoints();
    add_seq_flags(integ, int_seq, false);
    integ->add_option("--integrand", int_fn, "borehole | product")->check(CLI::IsMember({"borehole", "product"}));
    integ->add_option("--dim", int_dim, "dimension of the product integrand");
    integ->add_option("--n", int_n, "number of points")->check(CLI::PositiveNumber);
    integ->add_option("--reference", int_ref, "exact or reference integral value");
    integ->add_flag("--mc-reference", int_mc_ref, "compute the Borehole reference by plain Monte Carlo");
    integ->add_option("--reference-seed", int_ref_seed, "seed of the Monte Carlo reference");
    integ->add_option("--reference-samples", int_ref_samples, "samples of the Monte Carlo reference");
    integ->add_option("--checkpoints", int_ckpts, "N values reported, comma separated")->delimiter(',');
    integ->add_option("-o,--output", int_out, "CSV output; stdout when omitted");
    integ->callback([&] {
        action = [&] {
            Integrand f;
            std::optional<double> ref = int_ref;
            if (int_fn == "borehole") {
                int_seq.dim = 8;
                f = [](std::span<const double> u) { return borehole(u); };
                if (int_mc_ref && !ref) ref = borehole_reference(int_ref_seed, int_ref_samples);
            } else {
                int_seq.dim = int_dim;
                f = [](std::span<const double> u) {
                    double p = 1.0;
                    for (double x : u) p *= x;
                    return p;
                };
                if (!ref) ref = std::ldexp(1.0, -static_cast<int>(int_dim));
            }
            const IntegrationResult res = integrate(make_spec(int_seq, shared), f, int_n, ref, int_ckpts);
            with_output(int_out, [&](std::ostream& out) { write_error_csv(out, res); });
            std::cerr.precision(17);
            std::cerr << "estimate " << res.estimate;
            if (ref) std::cerr << " reference " << *ref;
            std::cerr << '\n';
        };
    });

    // sensitivity ------------------------------------------------------------
    auto* sens = app.add_subcommand("sensitivity", "Saltelli/Jansen Sobol' indices and derived product weights");
    std::string sens_fn = "borehole", sens_out, sens_weights;
    std::size_t sens_base = 8192;
    double sens_floor = 1e-3;
    sens->add_option("--function", sens_fn, "borehole")->check(CLI::IsMember({"borehole"}));
    sens->add_option("--base-n", sens_base, "base sample size")->check(CLI::PositiveNumber);
    sens->add_option("--floor", sens_floor, "weight floor")->check(CLI::PositiveNumber);
    sens->add_option("--weights", sens_weights, "also write the weight vector (one line, comma separated)");
    sens->add_option("-o,--output", sens_out, "CSV output; stdout when omitted");
    sens->callback([&] {
        action = [&] {
            const SensitivityResult res =
                sensitivity([](std::span<const double> u) { return borehole(u); }, 8, sens_base, shared.seed);
            const std::vector<std::string> names(BoreholeSpec::names.begin(), BoreholeSpec::names.end());
            with_output(sens_out, [&](std::ostream& out) { write_sensitivity_csv(out, res, names); });
            if (!sens_weights.empty()) {
                const auto g = weights_from_sensitivity(res, sens_floor);
                with_output(sens_weights, [&](std::ostream& out) {
                    out.precision(6);
                    for (std::size_t i = 0; i < g.size(); ++i) out << (i ? "," : "") << g[i];
                    out << '\n';
                });
            }
        };
    });

    // plan -------------------------------------------------------------------
    auto* plan = app.add_subcommand("plan", "RRT success rates for the chain-in-tunnel task");
    std::vector<std::string> plan_sources{"sobol", "halton", "uniform"};
    std::string plan_model, plan_out, plan_tree;
    SweepConfig sweep;
    std::uint64_t plan_burn = 128;
    plan->add_option("--sources", plan_sources, "sequence kinds, comma separated")->delimiter(',');
    plan->add_option("--model", plan_model, "model file for the neural source");
    plan->add_option("--widths", sweep.widths, "passage widths, comma separated")->delimiter(',');
    plan->add_option("--reps", sweep.reps, "repetitions per cell")->check(CLI::PositiveNumber);
    plan->add_option("--iterations", sweep.max_iterations, "RRT iterations K")->check(CLI::PositiveNumber);
    plan->add_option("--step", sweep.step, "RRT step size")->check(CLI::PositiveNumber);
    plan->add_option("--goal-tol", sweep.env.goal_tolerance, "goal radius in configuration space");
    plan->add_option("--sequences", sweep.sequences_per_source, "precomputed sequences per source");
    plan->add_option("--burn-in", plan_burn, "burn-in of deterministic sources");
    plan->add_option("--tree", plan_tree, "dump the tree of the first source, first width, first repetition");
    plan->add_option("-o,--output", plan_out, "CSV output; stdout when omitted");
    plan->callback([&] {
        action = [&] {
            sweep.seed = shared.seed;
            std::vector<SweepSource> sources;
            for (std::size_t i = 0; i < plan_sources.size(); ++i) {
                SequenceSpec spec;
                spec.kind = parse_sequence_kind(plan_sources[i]);
                spec.dim = sweep.env.joints;
                if (spec.randomized()) {
                    spec.seed = split_seed(shared.seed, 100 + i);
                } else {
                    spec.burn_in = plan_burn;
                }
                if (spec.kind == SequenceKind::neural) {
                    if (plan_model.empty()) throw std::runtime_error("neural source requires --model");
                    spec.model_path = plan_model;
                    spec.burn_in = 0;
                }
                sources.push_back({plan_sources[i], spec});
            }
            const auto cells = success_rate(sweep, sources);
            with_output(plan_out, [&](std::ostream& out) { write_success_csv(out, cells); });
            if (!plan_tree.empty() && !sources.empty()) {
                ChainEnvParams p = sweep.env;
                p.width = sweep.widths.front();
                p.rotation = sweep_rotation(sweep, 0);
                const ChainEnv env(p);
                RrtConfig rc;
                rc.max_iterations = sweep.max_iterations;
                rc.step = sweep.step;
                const RrtResult r = rrt_plan(env, rc, sweep_samples(sources.front().spec, 0, sweep.max_iterations));
                with_output(plan_tree, [&](std::ostream& out) { write_tree_csv(out, r.tree); });
            }
        };
    });

    if (argc <= 1) {
        std::cerr << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    set_thread_count(shared.threads);
    set_deterministic(shared.deterministic || shared.threads == 1);
    try {
        if (action) action();
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
