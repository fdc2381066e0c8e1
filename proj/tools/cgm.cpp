// Command-line driver: data generation, training, sampling, estimation,
// phase diagrams, evaluation and gradient checks.

#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>

#include "cgm/experiments/commands.hpp"

namespace {

using cgm::experiments::CommandOptions;

int run(int (*fn)(const CommandOptions &, std::ostream &), const CommandOptions &o) {
    try {
        return fn(o, std::cerr);
    } catch (const cgm::NumericalError &e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const cgm::ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const cgm::ParseError &e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const cgm::InvalidArgument &e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return 2;
    } catch (const cgm::NoDataError &e) {
        std::cerr << "no data: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace

int main(int argc, char **argv) {
#if defined(__GLIBC__)
    // Tape tensors are allocated and freed every step; keep them off mmap.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    CLI::App app{"Conditional generative models of quantum ground states"};
    app.require_subcommand(1);
    CommandOptions o;
    std::uint64_t seed = 0;

    auto common = [&](CLI::App *sub) {
        sub->add_option("--config", o.config, "experiment config (JSON)");
        sub->add_option("--seed", seed, "override the config seed")
            ->each([&](const std::string &) { o.seed = seed; });
        sub->add_flag("--deterministic", o.deterministic,
                      "bit-exact mode (always on: all reductions are single-threaded)");
        sub->add_option("--out", o.out, "output file or directory");
    };
    auto data_opts = [&](CLI::App *sub) {
        sub->add_option("--data", o.data, "dataset file(s)");
        sub->add_option("--systems", o.systems, "all | train | val | test | id,id,...");
    };

    auto *gen = app.add_subcommand("gen-data", "sample systems, prepare states, write datasets");
    common(gen);

    auto *train = app.add_subcommand("train", "fit the conditional model on the training split");
    common(train);
    data_opts(train);
    train->add_option("--checkpoint", o.checkpoint, "resume from this checkpoint");
    train->add_option("--until-epoch", o.until_epoch, "stop after this many epochs in total");

    auto *sample = app.add_subcommand("sample", "generate measurements from a checkpoint");
    common(sample);
    data_opts(sample);
    sample->add_option("--checkpoint", o.checkpoint, "trained model")->required();
    sample->add_option("--shots", o.shots, "samples per system");

    auto *est = app.add_subcommand("estimate", "shadow estimates (or exact values) as CSV");
    common(est);
    data_opts(est);
    est->add_option("--checkpoint", o.checkpoint, "estimate from model samples instead of data");
    est->add_option("--shots", o.shots, "model samples per system");
    est->add_option("--properties", o.properties, "comma list: correlation,renyi2");
    est->add_flag("--exact", o.exact, "exact values from the prepared states");

    auto *pd = app.add_subcommand("phase-diagram", "order parameters and phase labels per grid point");
    common(pd);
    data_opts(pd);
    pd->add_option("--checkpoint", o.checkpoint, "use model samples");
    pd->add_option("--shots", o.shots, "model samples per grid point");
    pd->add_flag("--exact", o.exact, "exact order parameters from the prepared states");
    pd->add_option("--baseline-t0", o.baseline_t0, "frozen-T baseline with this T0");
    pd->add_option("--format", o.format, "csv | png")->check(CLI::IsMember({"csv", "png"}));
    pd->add_flag("--chain-normalization", o.chain_normalization,
                 "divide 1D order parameters by the chain length");

    auto *ev = app.add_subcommand("evaluate", "RMSE of predictions against an oracle CSV");
    common(ev);
    ev->add_option("--pred", o.pred, "prediction CSV")->required();
    ev->add_option("--truth", o.truth, "oracle CSV")->required();

    auto *gc = app.add_subcommand("grad-check", "finite-difference gradient checks");
    common(gc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    using namespace cgm::experiments;
    if (*gen) {
        return run(cmd_gen_data, o);
    }
    if (*train) {
        return run(cmd_train, o);
    }
    if (*sample) {
        return run(cmd_sample, o);
    }
    if (*est) {
        return run(cmd_estimate, o);
    }
    if (*pd) {
        return run(cmd_phase_diagram, o);
    }
    if (*ev) {
        return run(cmd_evaluate, o);
    }
    return run(cmd_grad_check, o);
}
