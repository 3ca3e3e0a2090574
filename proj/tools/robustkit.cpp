// robustkit: train, attack and inspect small robust models from the shell.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "rt/attacks.hpp"
#include "rt/checkpoint.hpp"
#include "rt/config.hpp"
#include "rt/dataset.hpp"
#include "rt/distributed.hpp"
#include "rt/evaluation.hpp"
#include "rt/image_io.hpp"
#include "rt/representation.hpp"
#include "rt/timing.hpp"
#include "rt/training.hpp"

namespace fs = std::filesystem;
using namespace rt;

namespace {

// --out flag > config value; relative paths land under $ROBUSTKIT_OUT if set
fs::path resolve_out_dir(const std::string& flag_dir, const std::string& cfg_dir) {
    fs::path p = flag_dir.empty() ? cfg_dir : flag_dir;
    const char* root = std::getenv("ROBUSTKIT_OUT");
    if (root && *root && p.is_relative()) p = fs::path(root) / p;
    return p;
}

struct LoadedData {
    Dataset train;
    Dataset val;  // may be empty
};

LoadedData load_data(const DataConfig& d) {
    LoadedData out;
    if (d.source == DataConfig::Source::shapes) {
        out.train = generate_shapes(d.n, d.classes, d.size, d.noise, d.seed);
        if (d.val_n > 0) out.val = generate_shapes(d.val_n, d.classes, d.size, d.noise, d.val_seed);
    } else {
        out.train = load_dataset(d.path);
        if (!d.val_path.empty()) out.val = load_dataset(d.val_path);
    }
    return out;
}

void check_classes(const Dataset& d, const ModelConfig& m, const std::string& what) {
    if (d.classes != m.classes)
        throw std::runtime_error(what + " has " + std::to_string(d.classes) +
                                 " classes, model expects " + std::to_string(m.classes));
}

std::string fmt_acc(double a) {
    if (a < 0) return "-";
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.4f", a);
    return buf;
}

// prints progress and appends metrics.csv rows
MetricsHook make_hook(std::ofstream* csv) {
    return [csv](const EpochMetrics& em) {
        std::cout << "epoch " << em.epoch + 1 << " [" << em.split << "] loss="
                  << (em.loss < 0 ? std::string("-") : std::to_string(em.loss))
                  << " clean_acc=" << fmt_acc(em.clean_acc) << " adv_acc=" << fmt_acc(em.adv_acc)
                  << " (" << em.wall_time_s << "s)\n";
        if (csv && csv->is_open())
            *csv << em.epoch << "," << em.split << "," << em.loss << "," << em.clean_acc << ","
                 << em.adv_acc << "," << em.eps << "," << em.wall_time_s << "\n"
                 << std::flush;
    };
}

void write_run_outputs(const fs::path& dir, const RunConfig& cfg, const TrainResult& res) {
    fs::create_directories(dir / "checkpoints");
    {
        std::ofstream snap(dir / "config.ini");
        snap << serialize_config(cfg);
    }
    save_checkpoint(res.best_model, (dir / "checkpoints" / "best.rckpt").string());
    save_checkpoint(res.final_model, (dir / "checkpoints" / "last.rckpt").string());
    std::cout << "best epoch: " << (res.best_epoch < 0 ? std::string("none (no validation)")
                                                       : std::to_string(res.best_epoch + 1))
              << "\ncheckpoints: " << (dir / "checkpoints").string() << "\n";
}

Tensor load_seed_image(const std::string& data_path, int index, const ModelConfig& mc) {
    if (!data_path.empty()) {
        Dataset d = load_dataset(data_path);
        if (index < 0 || index >= d.size())
            throw std::runtime_error("sample index " + std::to_string(index) +
                                     " out of range [0," + std::to_string(d.size()) + ")");
        return d.sample(index);
    }
    std::vector<int> shape = mc.input_shape;
    return Tensor::full(shape, Scalar(0.5));
}

int run(int argc, char** argv) {
    CLI::App app{"robust training toolkit"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a procedural glyph dataset file");
    std::string gen_out = "data.rdset";
    int gen_n = 512, gen_classes = 4, gen_size = 12;
    double gen_noise = 0.05;
    uint64_t gen_seed = 1;
    gen->add_option("--out,-o", gen_out, "output .rdset path");
    gen->add_option("--n", gen_n, "sample count");
    gen->add_option("--classes", gen_classes, "class count (2..10)");
    gen->add_option("--size", gen_size, "image side (>= 8)");
    gen->add_option("--noise", gen_noise, "gaussian pixel noise sigma");
    gen->add_option("--seed", gen_seed, "generator seed");

    // shared train/eval options
    std::string config_path, out_flag, ckpt_path, data_flag;
    uint64_t seed_flag = 0;
    bool seed_given = false;

    auto* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("--config,-c", config_path, "ini config")->required();
    train->add_option("--out,-o", out_flag, "output directory (overrides [output] dir)");
    train->add_option("--seed", seed_flag, "override the training master seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* dist = app.add_subcommand("train-dist", "data-parallel training across workers");
    int workers = 2, port = 0;
    std::string transport_name = "inprocess";
    dist->add_option("--config,-c", config_path, "ini config")->required();
    dist->add_option("--out,-o", out_flag, "output directory (overrides [output] dir)");
    dist->add_option("--seed", seed_flag, "override the training master seed")
        ->each([&](const std::string&) { seed_given = true; });
    dist->add_option("--workers,-w", workers, "worker count");
    dist->add_option("--transport", transport_name, "inprocess or socket");
    dist->add_option("--port", port, "listen for external socket workers on this port");

    auto* worker = app.add_subcommand("worker", "serve one socket worker for train-dist --port");
    std::string host = "127.0.0.1";
    int wport = 0;
    worker->add_option("--config,-c", config_path, "the coordinator's config file")->required();
    worker->add_option("--host", host, "coordinator host");
    worker->add_option("--port", wport, "coordinator port")->required();
    worker->add_option("--seed", seed_flag, "override the training master seed (must match the coordinator)")
        ->each([&](const std::string&) { seed_given = true; });

    auto* eval = app.add_subcommand("eval", "clean and adversarial accuracy of a checkpoint");
    eval->add_option("--config,-c", config_path, "ini config (attack + data)")->required();
    eval->add_option("--checkpoint,-m", ckpt_path, "model checkpoint")->required();
    eval->add_option("--data", data_flag, "evaluate this .rdset instead of the config's validation data");

    auto* sweep = app.add_subcommand("sweep", "robustness curve over a list of eps values");
    std::string eps_list;
    std::string sweep_out = "curve.csv";
    sweep->add_option("--config,-c", config_path, "ini config (attack = sweep base)")->required();
    sweep->add_option("--checkpoint,-m", ckpt_path, "model checkpoint")->required();
    sweep->add_option("--eps", eps_list, "comma separated eps values")->required();
    sweep->add_option("--data", data_flag, "evaluate this .rdset instead of the config's validation data");
    sweep->add_option("--out,-o", sweep_out, "curve csv path");

    auto* viz = app.add_subcommand("viz-feature", "gradient-ascent image for one representation node");
    int viz_node = 0, viz_index = 0;
    VizRequest viz_req;
    std::string viz_out = "feature.pgm";
    viz->add_option("--checkpoint,-m", ckpt_path, "model checkpoint")->required();
    viz->add_option("--node", viz_node, "representation node index")->required();
    viz->add_option("--data", data_flag, "seed image dataset (default: flat gray)");
    viz->add_option("--index", viz_index, "seed sample index");
    viz->add_option("--steps", viz_req.steps, "ascent steps");
    viz->add_option("--step-size", viz_req.step_size, "step length");
    viz->add_option("--eps", viz_req.eps, "l2 budget around the seed (0 = unconstrained)");
    viz->add_option("--out,-o", viz_out, "output image");

    auto* interp_cmd = app.add_subcommand("interp", "image whose representation blends two samples");
    InterpRequest interp_req;
    int interp_i = 0, interp_j = 1;
    std::string interp_out = "interp.pgm";
    bool interp_diff = false;
    interp_cmd->add_option("--checkpoint,-m", ckpt_path, "model checkpoint")->required();
    interp_cmd->add_option("--data", data_flag, "sample dataset")->required();
    interp_cmd->add_option("--i", interp_i, "first sample index");
    interp_cmd->add_option("--j", interp_j, "second sample index");
    interp_cmd->add_option("--lambda", interp_req.lambda, "blend weight on the first sample");
    interp_cmd->add_option("--steps", interp_req.steps, "descent steps");
    interp_cmd->add_option("--step-size", interp_req.step_size, "step length");
    interp_cmd->add_flag("--difference", interp_diff, "target the feature difference instead of the blend");
    interp_cmd->add_option("--out,-o", interp_out, "output image");

    auto* target = app.add_subcommand("target-attack", "drive one sample toward a chosen class");
    PerturbationSpec tspec;
    tspec.norm = Norm::l2;
    std::string tnorm = "l2";
    int t_index = 0, t_class = 0;
    std::string t_out = "targeted.pgm";
    target->add_option("--checkpoint,-m", ckpt_path, "model checkpoint")->required();
    target->add_option("--data", data_flag, "sample dataset")->required();
    target->add_option("--index", t_index, "sample index");
    target->add_option("--target", t_class, "target class")->required();
    target->add_option("--eps", tspec.eps, "perturbation budget")->required();
    target->add_option("--steps", tspec.steps, "attack steps");
    target->add_option("--step-size", tspec.step_size, "step length (default rule when omitted)");
    target->add_option("--norm", tnorm, "l2 or linf");
    target->add_option("--restarts", tspec.restarts, "random restarts");
    target->add_flag("--rand-init", tspec.rand_init, "random start inside the ball");
    target->add_option("--seed", tspec.rng_seed, "attack seed");
    target->add_option("--out,-o", t_out, "output image");

    auto* est = app.add_subcommand("estimate-time", "measure batch cost and project total training time");
    int est_workers = 1, est_reps = 5, est_eval_steps = -1;
    uint64_t est_seed = 0;
    est->add_option("--config,-c", config_path, "ini config")->required();
    est->add_option("--workers,-w", est_workers, "worker count to model");
    est->add_option("--reps", est_reps, "timing repetitions per point (>= 3)");
    est->add_option("--eval-steps", est_eval_steps, "validation attack steps (default: the config attack's)");
    est->add_option("--seed", est_seed, "timing data seed");

    auto* info = app.add_subcommand("info", "describe a checkpoint, dataset, tensor or config file");
    std::string info_path;
    info->add_option("path", info_path, "file to describe")->required();

    CLI11_PARSE(app, argc, argv);

    if (*gen) {
        Dataset d = generate_shapes(gen_n, gen_classes, gen_size, gen_noise, gen_seed);
        save_dataset(d, gen_out);
        std::cout << "wrote " << gen_out << ": " << d.size() << " samples, "
                  << shape_str(d.sample_shape()) << ", " << d.classes << " classes\n";
        return 0;
    }

    if (*train || *dist) {
        RunConfig cfg = parse_config(config_path);
        if (seed_given) cfg.train.master_seed = seed_flag;
        LoadedData data = load_data(cfg.data);
        check_classes(data.train, cfg.model, "training data");
        Model model = build_model(cfg.model, cfg.model_seed);

        fs::path dir = resolve_out_dir(out_flag, cfg.output_dir);
        fs::create_directories(dir);
        std::ofstream csv(dir / "metrics.csv");
        csv << "epoch,split,loss,clean_acc,adv_acc,eps,wall_time_s\n";
        MetricsHook hook = make_hook(&csv);

        TrainResult res;
        if (*dist) {
            if (cfg.free_training)
                throw std::runtime_error("free training does not run distributed");
            if (port > 0) {
                std::cout << "waiting for " << workers << " workers on port " << port << "\n";
                res = distributed_train_listen(std::move(model), data.train, data.val, cfg.train,
                                               workers, port);
            } else {
                res = distributed_train(std::move(model), data.train, data.val, cfg.train, workers,
                                        parse_transport(transport_name));
            }
            for (const auto& em : res.history) hook(em);
        } else if (cfg.free_training) {
            res = train_free(std::move(model), data.train, data.val, cfg.train, cfg.replay, hook);
        } else {
            res = train_adversarial(std::move(model), data.train, data.val, cfg.train, hook);
        }
        write_run_outputs(dir, cfg, res);
        return 0;
    }

    if (*worker) {
        RunConfig cfg = parse_config(config_path);
        if (seed_given) cfg.train.master_seed = seed_flag;
        LoadedData data = load_data(cfg.data);
        Model model = build_model(cfg.model, cfg.model_seed);
        std::cout << "connecting to " << host << ":" << wport << "\n";
        run_socket_worker(host, wport, std::move(model), cfg.train, data.train);
        std::cout << "worker finished\n";
        return 0;
    }

    if (*eval) {
        RunConfig cfg = parse_config(config_path);
        Model m = load_checkpoint(ckpt_path);
        Dataset d;
        if (!data_flag.empty()) {
            d = load_dataset(data_flag);
        } else {
            LoadedData data = load_data(cfg.data);
            d = data.val.size() ? data.val : data.train;
        }
        check_classes(d, m.config, "evaluation data");
        const PerturbationSpec* spec = cfg.train.attack ? &*cfg.train.attack : nullptr;
        EvalResult r = evaluate(m, d, spec);
        std::cout << "n=" << r.n << " clean_acc=" << fmt_acc(r.clean_acc)
                  << " mean_clean_loss=" << r.mean_clean_loss;
        if (spec)
            std::cout << " adv_acc=" << fmt_acc(r.adv_acc) << " (" << norm_name(spec->norm)
                      << ", eps=" << spec->eps << ", steps=" << spec->steps << ", restarts="
                      << spec->restarts << ")";
        std::cout << "\n";
        return 0;
    }

    if (*sweep) {
        RunConfig cfg = parse_config(config_path);
        if (!cfg.train.attack)
            throw std::runtime_error("sweep needs an [attack] section in the config");
        Model m = load_checkpoint(ckpt_path);
        Dataset d;
        if (!data_flag.empty()) {
            d = load_dataset(data_flag);
        } else {
            LoadedData data = load_data(cfg.data);
            d = data.val.size() ? data.val : data.train;
        }
        check_classes(d, m.config, "evaluation data");
        std::vector<double> eps_values;
        std::stringstream ss(eps_list);
        std::string item;
        while (std::getline(ss, item, ',')) eps_values.push_back(std::stod(item));
        auto curve = eps_sweep(m, d, *cfg.train.attack, eps_values);
        write_curve_csv(curve, sweep_out);
        for (const auto& pt : curve)
            std::cout << "eps=" << pt.eps << " adv_acc=" << fmt_acc(pt.adv_acc) << "\n";
        std::cout << "wrote " << sweep_out << "\n";
        return 0;
    }

    if (*viz) {
        Model m = load_checkpoint(ckpt_path);
        viz_req.node = viz_node;
        Tensor seed = load_seed_image(data_flag, viz_index, m.config);
        VizResult r = feature_viz(m, seed, viz_req);
        write_image_file(r.image, viz_out);
        std::cout << "node " << viz_node << ": activation " << r.trace.front() << " -> "
                  << r.activation << " over " << r.trace.size() - 1 << " steps\nwrote " << viz_out
                  << "\n";
        return 0;
    }

    if (*interp_cmd) {
        Model m = load_checkpoint(ckpt_path);
        Dataset d = load_dataset(data_flag);
        interp_req.difference_target = interp_diff;
        InterpResult r = interpolate(m, d.sample(interp_i), d.sample(interp_j), interp_req);
        write_image_file(r.image, interp_out);
        std::cout << "residual " << r.trace.front() << " -> " << r.distance << "\nwrote "
                  << interp_out << "\n";
        return 0;
    }

    if (*target) {
        Model m = load_checkpoint(ckpt_path);
        Dataset d = load_dataset(data_flag);
        tspec.norm = parse_norm(tnorm);
        if (t_class < 0 || t_class >= m.config.classes)
            throw std::runtime_error("target class out of range");
        TargetedResult r = targeted_perturbation(m, d.sample(t_index), t_class, tspec);
        Tensor img = r.image;
        for (auto& v : img.data) v = std::min(std::max(v, Scalar(0)), Scalar(1));
        write_image_file(img, t_out);
        Tensor lg = logits(m, r.image);
        if (lg.rank() == 1) lg.shape = {1, lg.dim(0)};
        std::cout << "label " << d.labels[static_cast<size_t>(t_index)] << " -> predicted "
                  << argmax_rows(lg).at(0) << " (target " << t_class << ", "
                  << (r.success ? "hit" : "miss") << "), loss " << r.loss << ", |delta|_2 "
                  << r.delta.l2_norm() << "\nwrote " << t_out << "\n";
        return 0;
    }

    if (*est) {
        RunConfig cfg = parse_config(config_path);
        Model model = build_model(cfg.model, cfg.model_seed);
        int train_steps = cfg.train.attack ? cfg.train.attack->steps : 0;
        int eval_steps = est_eval_steps >= 0 ? est_eval_steps : train_steps;
        int pw = (cfg.train.batch + est_workers - 1) / est_workers;

        std::vector<BatchTiming> grid;
        grid.push_back(measure_batch_time(model, pw, train_steps, est_reps, est_seed));
        if (eval_steps != train_steps)
            grid.push_back(measure_batch_time(model, pw, eval_steps, est_reps, est_seed));

        std::cout << "steps,batch,workers,mean_s,std_s\n";
        for (const auto& t : grid)
            std::cout << t.steps << "," << t.batch << "," << est_workers << "," << t.mean_s << ","
                      << t.std_s << "\n";

        int64_t n_train = cfg.data.source == DataConfig::Source::shapes
                              ? cfg.data.n
                              : load_dataset(cfg.data.path).size();
        int64_t n_val = cfg.data.source == DataConfig::Source::shapes
                            ? cfg.data.val_n
                            : (cfg.data.val_path.empty() ? 0 : load_dataset(cfg.data.val_path).size());
        TimeEstimate e = estimate_total_time(grid, cfg.train.epochs, cfg.train.validation_cadence,
                                             n_train, n_val, cfg.train.batch, est_workers,
                                             train_steps, eval_steps);
        std::cout << "config,total_s,train_s,val_s\n";
        std::cout << "epochs=" << cfg.train.epochs << " batch=" << cfg.train.batch << " workers="
                  << est_workers << "," << e.total_s << "," << e.train_s << "," << e.val_s << "\n";
        std::cout << "train batches/epoch: " << e.train_batches_per_epoch
                  << ", validation epochs: " << e.validation_epochs << " x " << e.val_batches
                  << " batches (lower bound, communication excluded)\n";
        return 0;
    }

    if (*info) {
        std::ifstream f(info_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + info_path);
        char magic[6] = {};
        f.read(magic, 6);
        std::string tag(magic, magic + (f.gcount() > 0 ? f.gcount() : 0));
        if (tag.rfind("RCKPT", 0) == 0) {
            Model m = load_checkpoint(info_path);
            std::cout << info_path << ": checkpoint, "
                      << (m.config.kind == ModelConfig::Kind::mlp ? "mlp" : "rescnn") << " on "
                      << shape_str(m.config.input_shape) << ", " << m.config.classes
                      << " classes, " << m.parameter_count() << " scalars in " << m.params.size()
                      << " tensors\n";
            for (const auto& [name, t] : m.params)
                std::cout << "  " << name << " " << t.shape_str() << "\n";
        } else if (tag.rfind("RDSET", 0) == 0) {
            Dataset d = load_dataset(info_path);
            std::cout << info_path << ": dataset, " << d.size() << " samples of "
                      << shape_str(d.sample_shape()) << ", " << d.classes << " classes\n";
        } else if (tag.rfind("RTNSR", 0) == 0) {
            Tensor t = read_tensor_file(info_path);
            std::cout << info_path << ": tensor " << t.shape_str() << "\n";
        } else {
            RunConfig cfg = parse_config(info_path);
            std::cout << info_path << ": run config\n" << serialize_config(cfg);
        }
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
