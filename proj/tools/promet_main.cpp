#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "promet/episodes.hpp"
#include "promet/errors.hpp"
#include "promet/evaluation.hpp"
#include "promet/model.hpp"
#include "promet/synthetic.hpp"
#include "promet/training.hpp"

namespace {

using namespace promet;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("failed writing file: " + path);
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Option names that address the same value; a config key is considered
// explicitly overridden when either spelling appears on the command line.
std::string flag_alias(const std::string& key) {
    if (key == "N") return "way";
    if (key == "way") return "N";
    if (key == "K") return "shot";
    if (key == "shot") return "K";
    if (key == "query-K") return "query-shot";
    if (key == "query-shot") return "query-K";
    return "";
}

// Expands a subcommand's "--config FILE" into the file's key=value pairs,
// injected right after the subcommand name so explicit flags always win.
std::vector<std::string> expand_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    static const std::vector<std::string> subcommands = {"train",  "eval",
                                                        "sample", "ablate",
                                                        "export-embeddings", "synth"};
    std::size_t sub_pos = args.size();
    for (std::size_t i = 0; i < args.size() && sub_pos == args.size(); ++i) {
        for (const auto& name : subcommands) {
            if (args[i] == name) sub_pos = i;
        }
    }
    if (sub_pos == args.size()) return args;

    std::string config_path;
    for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        }
    }
    if (config_path.empty()) return args;

    auto given = [&](const std::string& name) {
        std::string flag = "--" + name;
        for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
            if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
        }
        return false;
    };

    std::istringstream in(read_file(config_path));
    std::string line;
    std::vector<std::string> injected;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError(config_path + " line " + std::to_string(line_no) +
                            ": expected key=value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
            value.back() == value.front()) {
            value = value.substr(1, value.size() - 2);
        }
        if (key.empty()) {
            throw DataError(config_path + " line " + std::to_string(line_no) + ": empty key");
        }
        if (key == "config") continue;
        std::string alias = flag_alias(key);
        if (given(key) || (!alias.empty() && given(alias))) continue;
        injected.push_back("--" + key);
        injected.push_back(value);
    }
    args.insert(args.begin() + sub_pos + 1, injected.begin(), injected.end());
    return args;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string timestamp_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct DataOpts {
    int label_column = -1;
    std::string annotations;
    std::vector<std::string> keep_labels;
};

void add_data_opts(CLI::App* cmd, DataOpts& opts) {
    cmd->add_option("--label-column", opts.label_column,
                    "Column holding the label (-1: last)");
    cmd->add_option("--annotations", opts.annotations,
                    "LABEL<TAB>text file overriding label annotations");
    cmd->add_option("--keep-labels", opts.keep_labels,
                    "Mask every entity label except these to O")
        ->delimiter(',');
}

Dataset load_dataset(const std::string& path, const DataOpts& opts,
                     nlohmann::json* fingerprint_out) {
    std::string text = read_file(path);
    if (fingerprint_out) {
        (*fingerprint_out)["path"] = path;
        (*fingerprint_out)["fnv1a64"] = hex64(fnv1a64(text));
    }
    Dataset d = parse_conll(text, opts.label_column);
    if (!opts.annotations.empty()) {
        apply_annotation_file(d.label_set, read_file(opts.annotations));
    }
    if (!opts.keep_labels.empty()) {
        std::vector<LabelId> keep;
        for (const auto& name : opts.keep_labels) {
            LabelId id = d.label_set.find(name);
            if (id < 0) throw DataError("--keep-labels names unknown label " + name);
            keep.push_back(id);
        }
        d = mask_labels(d, keep);
    }
    return d;
}

struct ModelOpts {
    int vocab_hash_dim = 65536;
    int hidden_dim = 64;
    int layer_count = 3;
    int gauss_dim = 128;
    double rho = 0.7;
    std::string variant = "option+label";
};

void add_model_opts(CLI::App* cmd, ModelOpts& opts) {
    cmd->add_option("--vocab-hash-dim", opts.vocab_hash_dim, "Embedding hash buckets");
    cmd->add_option("--hidden-dim", opts.hidden_dim, "Encoder width");
    cmd->add_option("--layers", opts.layer_count, "Encoder mixing layers");
    cmd->add_option("--gauss-dim", opts.gauss_dim, "Gaussian embedding dimension");
    cmd->add_option("--rho", opts.rho, "Fusion weight of the non-label prompt");
    cmd->add_option("--variant", opts.variant,
                    "Prompt variant: plain, option (A), label (B), plain+label "
                    "(plain+B), option+label (A+B)");
}

ModelConfig to_model_config(const ModelOpts& opts) {
    ModelConfig cfg;
    cfg.vocab_hash_dim = opts.vocab_hash_dim;
    cfg.hidden_dim = opts.hidden_dim;
    cfg.layer_count = opts.layer_count;
    cfg.gauss_dim = opts.gauss_dim;
    cfg.rho = opts.rho;
    cfg.variant = variant_from_string(opts.variant);
    validate_config(cfg);
    return cfg;
}

nlohmann::json model_config_json(const ModelConfig& cfg) {
    return {{"vocab_hash_dim", cfg.vocab_hash_dim}, {"hidden_dim", cfg.hidden_dim},
            {"layer_count", cfg.layer_count},       {"gauss_dim", cfg.gauss_dim},
            {"rho", cfg.rho},                       {"variant", variant_name(cfg.variant)}};
}

struct TrainHyperOpts {
    double lr = 3e-5;
    int steps = 10000;
    double warmup_frac = 0.10;
    double weight_decay = 0.01;
    std::string schedule = "constant";
    int way = 5;
    int shot = 1;
    int query_shot = 0;
};

void add_train_hyper_opts(CLI::App* cmd, TrainHyperOpts& opts) {
    cmd->add_option("--lr", opts.lr, "Peak learning rate");
    cmd->add_option("--steps", opts.steps, "Training steps (one episode each)");
    cmd->add_option("--warmup-frac", opts.warmup_frac, "Linear warmup fraction");
    cmd->add_option("--weight-decay", opts.weight_decay, "Decoupled weight decay");
    cmd->add_option("--schedule", opts.schedule, "Post-warmup schedule: constant | linear-decay");
    cmd->add_option("--N,--way", opts.way, "Entity types per episode");
    cmd->add_option("--K,--shot", opts.shot, "Support mentions per type (K..2K)");
    cmd->add_option("--query-K,--query-shot", opts.query_shot,
                    "Query mentions per type (0: same as K)");
}

TrainConfig to_train_config(const TrainHyperOpts& opts, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.lr = opts.lr;
    cfg.total_steps = opts.steps;
    cfg.warmup_frac = opts.warmup_frac;
    cfg.weight_decay = opts.weight_decay;
    if (opts.schedule == "constant") {
        cfg.schedule = LrSchedule::constant;
    } else if (opts.schedule == "linear-decay") {
        cfg.schedule = LrSchedule::linear_decay;
    } else {
        throw DataError("unknown schedule: " + opts.schedule);
    }
    cfg.way = opts.way;
    cfg.shot = opts.shot;
    cfg.query_shot = opts.query_shot;
    cfg.seed = seed;
    validate_train_config(cfg);
    return cfg;
}

nlohmann::json train_config_json(const TrainConfig& cfg) {
    return {{"lr", cfg.lr},
            {"total_steps", cfg.total_steps},
            {"warmup_frac", cfg.warmup_frac},
            {"weight_decay", cfg.weight_decay},
            {"beta1", cfg.beta1},
            {"beta2", cfg.beta2},
            {"adam_eps", cfg.adam_eps},
            {"schedule", cfg.schedule == LrSchedule::constant ? "constant" : "linear-decay"},
            {"way", cfg.way},
            {"shot", cfg.shot},
            {"query_shot", cfg.query_shot}};
}

std::vector<std::string> g_argv;

void write_manifest(const std::string& path, const std::string& command,
                    nlohmann::json config, nlohmann::json datasets,
                    std::vector<std::uint64_t> seeds, std::vector<std::string> artifacts) {
    nlohmann::json j;
    j["command"] = command;
    j["argv"] = g_argv;
    j["config"] = std::move(config);
    j["datasets"] = std::move(datasets);
    j["seeds"] = std::move(seeds);
    j["artifacts"] = std::move(artifacts);
    j["timestamp"] = timestamp_utc();
    write_file(path, j.dump(2) + "\n");
}

std::string format_csv_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// train ----------------------------------------------------------------

struct TrainCmd {
    std::string train_path;
    DataOpts data;
    ModelOpts model;
    TrainHyperOpts hyper;
    std::uint64_t seed = 0;
    std::int64_t init_seed = -1;
    std::string out = "model.ckpt";
    std::string log_path;
};

int run_train(const TrainCmd& cmd) {
    nlohmann::json train_fp;
    Dataset d = load_dataset(cmd.train_path, cmd.data, &train_fp);
    ModelConfig mcfg = to_model_config(cmd.model);
    TrainConfig tcfg = to_train_config(cmd.hyper, cmd.seed);
    std::uint64_t init_seed =
        cmd.init_seed >= 0 ? static_cast<std::uint64_t>(cmd.init_seed) : cmd.seed;

    ModelParams init = init_model(mcfg, init_seed);
    TrainResult result = train(d, tcfg, std::move(init));

    std::string log_path = cmd.log_path.empty() ? cmd.out + ".log.csv" : cmd.log_path;
    std::string manifest_path = cmd.out + ".manifest.json";
    save_checkpoint(result.params, cmd.out, manifest_path);

    std::string csv = "# manifest=" + manifest_path + "\nstep,loss,lr\n";
    for (const auto& entry : result.log) {
        csv += std::to_string(entry.step) + "," + format_csv_double(entry.loss) + "," +
               format_csv_double(entry.lr) + "\n";
    }
    write_file(log_path, csv);

    nlohmann::json config;
    config["model"] = model_config_json(mcfg);
    config["train"] = train_config_json(tcfg);
    config["init_seed"] = init_seed;
    write_manifest(manifest_path, "train", config, {{"train", train_fp}}, {tcfg.seed, init_seed},
                   {cmd.out, log_path});

    double final_loss = result.log.empty() ? 0.0 : result.log.back().loss;
    std::printf("trained %d steps, final loss %.6f, checkpoint %s\n", tcfg.total_steps,
                final_loss, cmd.out.c_str());
    return 0;
}

// eval -----------------------------------------------------------------

struct EvalCmd {
    std::string checkpoint;
    std::string test_path;
    DataOpts data;
    std::string protocol = "episode";
    int way = 5;
    int shot = 1;
    int query_shot = 0;
    int episodes = 5000;
    int runs = 10;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string out = "report.json";
};

int run_eval(const EvalCmd& cmd) {
    ModelParams m = load_checkpoint(cmd.checkpoint);
    nlohmann::json test_fp;
    Dataset d = load_dataset(cmd.test_path, cmd.data, &test_fp);

    EvalReport report;
    std::vector<std::uint64_t> seeds;
    if (cmd.protocol == "episode") {
        SamplerConfig sc{cmd.way, cmd.shot, cmd.query_shot > 0 ? cmd.query_shot : cmd.shot,
                         cmd.seed};
        auto episodes = sample_episodes(d, sc, cmd.episodes);
        for (const auto& ep : episodes) seeds.push_back(ep.seed);
        report = evaluate_episodes(m, episodes, d.label_set, cmd.jobs);
    } else if (cmd.protocol == "low-resource") {
        for (int r = 0; r < cmd.runs; ++r) {
            seeds.push_back(cmd.seed + static_cast<std::uint64_t>(r));
        }
        report = evaluate_low_resource(m, d, cmd.shot, seeds, cmd.jobs);
    } else {
        throw DataError("unknown protocol: " + cmd.protocol);
    }

    std::string manifest_path = cmd.out + ".manifest.json";
    nlohmann::json j = nlohmann::json::parse(report_to_json(report));
    j["protocol"] = cmd.protocol;
    j["manifest"] = manifest_path;
    write_file(cmd.out, j.dump(2) + "\n");

    nlohmann::json config;
    config["protocol"] = cmd.protocol;
    config["model"] = model_config_json(m.config);
    config["way"] = cmd.way;
    config["shot"] = cmd.shot;
    config["query_shot"] = cmd.query_shot;
    config["episodes"] = cmd.episodes;
    config["runs"] = cmd.runs;
    config["jobs"] = cmd.jobs;
    config["checkpoint"] = cmd.checkpoint;
    write_manifest(manifest_path, "eval", config, {{"test", test_fp}}, {cmd.seed}, {cmd.out});

    std::printf("%s protocol: mean F1 %.4f +- %.4f over %zu units\n", cmd.protocol.c_str(),
                report.mean_f1, report.std_f1, report.per_unit_f1.size());
    return 0;
}

// sample ---------------------------------------------------------------

struct SampleCmd {
    std::string data_path;
    DataOpts data;
    int way = 5;
    int shot = 1;
    int query_shot = 0;
    int count = 100;
    std::uint64_t seed = 0;
    std::string out = "episodes.jsonl";
};

int run_sample(const SampleCmd& cmd) {
    nlohmann::json data_fp;
    Dataset d = load_dataset(cmd.data_path, cmd.data, &data_fp);
    int query_shot = cmd.query_shot > 0 ? cmd.query_shot : cmd.shot;
    SamplerConfig sc{cmd.way, cmd.shot, query_shot, cmd.seed};
    auto episodes = sample_episodes(d, sc, cmd.count);

    std::vector<bool> valid;
    valid.reserve(episodes.size());
    int invalid = 0;
    for (const auto& ep : episodes) {
        bool ok = entity_set_valid(ep.support, d.label_set.size(), ep.target_labels, cmd.shot) &&
                  entity_set_valid(ep.query, d.label_set.size(), ep.target_labels, query_shot);
        valid.push_back(ok);
        invalid += !ok;
    }

    std::string manifest_path = cmd.out + ".manifest.json";
    std::string body = "# manifest=" + manifest_path + "\n" +
                       episodes_to_jsonl(episodes, d.label_set, &valid);
    write_file(cmd.out, body);

    nlohmann::json config{{"way", cmd.way}, {"shot", cmd.shot}, {"query_shot", query_shot},
                          {"count", cmd.count}};
    write_manifest(manifest_path, "sample", config, {{"data", data_fp}}, {cmd.seed}, {cmd.out});

    std::printf("sampled %zu episodes (%d failed validity) to %s\n", episodes.size(), invalid,
                cmd.out.c_str());
    return 0;
}

// ablate ---------------------------------------------------------------

struct AblateCmd {
    std::string train_path;
    std::string test_path;
    DataOpts data;
    ModelOpts model;
    TrainHyperOpts hyper;
    std::vector<std::string> variants{"plain", "option", "label", "plain+label", "option+label"};
    std::vector<double> rho_grid{0.3, 0.5, 0.7};
    int seeds = 3;
    std::uint64_t seed = 0;
    int episodes = 500;
    int jobs = 1;
    std::string out = "ablation.tsv";
};

int run_ablate(const AblateCmd& cmd) {
    if (cmd.seeds < 1) throw DataError("--seeds must be >= 1");
    if (cmd.rho_grid.empty()) throw DataError("--rho-grid must not be empty");
    nlohmann::json train_fp, test_fp;
    Dataset train_set = load_dataset(cmd.train_path, cmd.data, &train_fp);
    Dataset test_set = load_dataset(cmd.test_path, cmd.data, &test_fp);

    SamplerConfig eval_sampler{cmd.hyper.way, cmd.hyper.shot,
                               cmd.hyper.query_shot > 0 ? cmd.hyper.query_shot : cmd.hyper.shot,
                               cmd.seed};
    auto eval_episodes = sample_episodes(test_set, eval_sampler, cmd.episodes);

    std::string manifest_path = cmd.out + ".manifest.json";
    std::string table = "# manifest=" + manifest_path + "\nvariant\trho\tseeds\tmean_f1\tstd_f1\n";

    auto cell_stats = [&](PromptVariant variant, double rho) {
        std::vector<double> means;
        for (int s = 0; s < cmd.seeds; ++s) {
            std::uint64_t cell_seed = cmd.seed + static_cast<std::uint64_t>(s);
            ModelOpts mo = cmd.model;
            mo.variant = variant_name(variant);
            mo.rho = rho;
            ModelConfig mcfg = to_model_config(mo);
            TrainConfig tcfg = to_train_config(cmd.hyper, cell_seed);
            TrainResult result = train(train_set, tcfg, init_model(mcfg, cell_seed));
            EvalReport report =
                evaluate_episodes(result.params, eval_episodes, test_set.label_set, cmd.jobs);
            means.push_back(report.mean_f1);
        }
        double mean = 0.0;
        for (double v : means) mean += v;
        mean /= static_cast<double>(means.size());
        double var = 0.0;
        for (double v : means) var += (v - mean) * (v - mean);
        return std::pair<double, double>{mean, std::sqrt(var / static_cast<double>(means.size()))};
    };

    auto emit_row = [&](PromptVariant variant, double rho, std::pair<double, double> stats) {
        char row[128];
        std::snprintf(row, sizeof row, "%s\t%.1f\t%d\t%.6f\t%.6f\n", variant_name(variant), rho,
                      cmd.seeds, stats.first, stats.second);
        table += row;
    };

    for (const auto& name : cmd.variants) {
        PromptVariant variant = variant_from_string(name);
        if (variant_fuses(variant)) {
            for (double rho : cmd.rho_grid) emit_row(variant, rho, cell_stats(variant, rho));
        } else {
            // Single-prompt variants never consult rho, so one training pass
            // per seed fills that variant's whole row of the grid.
            std::pair<double, double> stats = cell_stats(variant, cmd.model.rho);
            for (double rho : cmd.rho_grid) emit_row(variant, rho, stats);
        }
    }
    write_file(cmd.out, table);

    nlohmann::json config;
    config["model"] = model_config_json(to_model_config(cmd.model));
    config["train"] = train_config_json(to_train_config(cmd.hyper, cmd.seed));
    config["variants"] = cmd.variants;
    config["rho_grid"] = cmd.rho_grid;
    config["seeds_per_cell"] = cmd.seeds;
    config["episodes"] = cmd.episodes;
    nlohmann::json datasets{{"train", train_fp}, {"test", test_fp}};
    write_manifest(manifest_path, "ablate", config, datasets, {cmd.seed}, {cmd.out});

    std::printf("ablation grid written to %s\n", cmd.out.c_str());
    return 0;
}

// export-embeddings ----------------------------------------------------

struct ExportCmd {
    std::string checkpoint;
    std::string data_path;
    DataOpts data;
    int way = 5;
    int shot = 1;
    int query_shot = 0;
    std::uint64_t seed = 0;
    double keep_o_frac = 1.0;
    std::string out = "embeddings.tsv";
};

int run_export(const ExportCmd& cmd) {
    ModelParams m = load_checkpoint(cmd.checkpoint);
    nlohmann::json data_fp;
    Dataset d = load_dataset(cmd.data_path, cmd.data, &data_fp);
    SamplerConfig sc{cmd.way, cmd.shot, cmd.query_shot > 0 ? cmd.query_shot : cmd.shot, cmd.seed};
    Episode ep = sample_episodes(d, sc, 1).at(0);

    std::string manifest_path = cmd.out + ".manifest.json";
    std::string tsv = "# manifest=" + manifest_path + "\n" +
                      export_embeddings(m, ep, d.label_set, cmd.keep_o_frac, cmd.seed);
    write_file(cmd.out, tsv);

    nlohmann::json config{{"way", cmd.way},
                          {"shot", cmd.shot},
                          {"keep_o_frac", cmd.keep_o_frac},
                          {"checkpoint", cmd.checkpoint},
                          {"model", model_config_json(m.config)}};
    write_manifest(manifest_path, "export-embeddings", config, {{"data", data_fp}}, {cmd.seed},
                   {cmd.out});

    std::printf("embeddings written to %s\n", cmd.out.c_str());
    return 0;
}

// synth ----------------------------------------------------------------

struct SynthCmd {
    SyntheticConfig cfg;
    std::string out = "synthetic.conll";
};

int run_synth(const SynthCmd& cmd) {
    Dataset d = make_synthetic_dataset(cmd.cfg);
    std::string manifest_path = cmd.out + ".manifest.json";
    std::string body = "-DOCSTART-\tmanifest=" + manifest_path + "\n\n" + to_conll(d);
    write_file(cmd.out, body);

    nlohmann::json config{{"sentences", cmd.cfg.sentences},
                          {"entity_types", cmd.cfg.entity_types},
                          {"suffixes_per_type", cmd.cfg.suffixes_per_type},
                          {"filler_words", cmd.cfg.filler_words},
                          {"min_sentence_len", cmd.cfg.min_sentence_len},
                          {"max_sentence_len", cmd.cfg.max_sentence_len},
                          {"min_mentions", cmd.cfg.min_mentions},
                          {"max_mentions", cmd.cfg.max_mentions},
                          {"two_token_frac", cmd.cfg.two_token_frac}};
    nlohmann::json fp;
    fp["path"] = cmd.out;
    fp["fnv1a64"] = hex64(fnv1a64(to_conll(d)));
    write_manifest(manifest_path, "synth", config, {{"generated", fp}}, {cmd.cfg.seed},
                   {cmd.out});

    std::printf("%d synthetic sentences written to %s\n", cmd.cfg.sentences, cmd.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    g_argv.assign(argv, argv + argc);

    CLI::App app{"Prompt-fused token metric learning for few-shot sequence labeling"};
    app.require_subcommand(1);

    TrainCmd train_cmd;
    auto* train_app = app.add_subcommand("train", "Meta-train a model on episodes");
    train_app->add_option("--train", train_cmd.train_path, "Training corpus (CoNLL columns)")
        ->required();
    add_data_opts(train_app, train_cmd.data);
    add_model_opts(train_app, train_cmd.model);
    add_train_hyper_opts(train_app, train_cmd.hyper);
    train_app->add_option("--seed", train_cmd.seed, "Episode sampling seed");
    train_app->add_option("--init-seed", train_cmd.init_seed,
                          "Parameter init seed (-1: use --seed)");
    train_app->add_option("--out", train_cmd.out, "Checkpoint path");
    train_app->add_option("--log", train_cmd.log_path, "Metric log CSV (default <out>.log.csv)");

    EvalCmd eval_cmd;
    auto* eval_app = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_app->add_option("--checkpoint", eval_cmd.checkpoint, "Model checkpoint")->required();
    eval_app->add_option("--test", eval_cmd.test_path, "Test corpus")->required();
    add_data_opts(eval_app, eval_cmd.data);
    eval_app->add_option("--protocol", eval_cmd.protocol, "episode | low-resource");
    eval_app->add_option("--N,--way", eval_cmd.way, "Entity types per episode");
    eval_app->add_option("--K,--shot", eval_cmd.shot, "Support mentions per type");
    eval_app->add_option("--query-K,--query-shot", eval_cmd.query_shot,
                         "Query mentions per type (0: same as K)");
    eval_app->add_option("--episodes", eval_cmd.episodes, "Episode count (episode protocol)");
    eval_app->add_option("--runs", eval_cmd.runs, "Support samplings (low-resource protocol)");
    eval_app->add_option("--seed", eval_cmd.seed, "Sampling seed");
    eval_app->add_option("--jobs", eval_cmd.jobs, "Parallel evaluation workers");
    eval_app->add_option("--out", eval_cmd.out, "Report path");

    SampleCmd sample_cmd;
    auto* sample_app = app.add_subcommand("sample", "Emit serialized episodes");
    sample_app->add_option("--data", sample_cmd.data_path, "Corpus to sample from")->required();
    add_data_opts(sample_app, sample_cmd.data);
    sample_app->add_option("--N,--way", sample_cmd.way, "Entity types per episode");
    sample_app->add_option("--K,--shot", sample_cmd.shot, "Support mentions per type");
    sample_app->add_option("--query-K,--query-shot", sample_cmd.query_shot,
                           "Query mentions per type (0: same as K)");
    sample_app->add_option("--count", sample_cmd.count, "Episode count");
    sample_app->add_option("--seed", sample_cmd.seed, "Sampling seed");
    sample_app->add_option("--out", sample_cmd.out, "Output JSONL path");

    AblateCmd ablate_cmd;
    auto* ablate_app = app.add_subcommand("ablate", "Train and evaluate the variant grid");
    ablate_app->add_option("--train", ablate_cmd.train_path, "Training corpus")->required();
    ablate_app->add_option("--test", ablate_cmd.test_path, "Evaluation corpus")->required();
    add_data_opts(ablate_app, ablate_cmd.data);
    add_model_opts(ablate_app, ablate_cmd.model);
    add_train_hyper_opts(ablate_app, ablate_cmd.hyper);
    ablate_app->add_option("--variants", ablate_cmd.variants, "Variants to sweep")->delimiter(',');
    ablate_app->add_option("--rho-grid", ablate_cmd.rho_grid, "Rho values for fused variants")
        ->delimiter(',');
    ablate_app->add_option("--seeds", ablate_cmd.seeds, "Seeds per cell (std over these)");
    ablate_app->add_option("--seed", ablate_cmd.seed, "Base seed");
    ablate_app->add_option("--episodes", ablate_cmd.episodes, "Shared evaluation episodes");
    ablate_app->add_option("--jobs", ablate_cmd.jobs, "Parallel evaluation workers");
    ablate_app->add_option("--out", ablate_cmd.out, "Output table path");

    ExportCmd export_cmd;
    auto* export_app =
        app.add_subcommand("export-embeddings", "Dump fused token representations");
    export_app->add_option("--checkpoint", export_cmd.checkpoint, "Model checkpoint")->required();
    export_app->add_option("--data", export_cmd.data_path, "Corpus to sample from")->required();
    add_data_opts(export_app, export_cmd.data);
    export_app->add_option("--N,--way", export_cmd.way, "Entity types per episode");
    export_app->add_option("--K,--shot", export_cmd.shot, "Support mentions per type");
    export_app->add_option("--query-K,--query-shot", export_cmd.query_shot,
                           "Query mentions per type (0: same as K)");
    export_app->add_option("--seed", export_cmd.seed, "Sampling seed");
    export_app->add_option("--keep-o-frac", export_cmd.keep_o_frac,
                           "Fraction of non-entity tokens to keep");
    export_app->add_option("--out", export_cmd.out, "Output TSV path");

    SynthCmd synth_cmd;
    auto* synth_app = app.add_subcommand("synth", "Generate a synthetic corpus");
    synth_app->add_option("--sentences", synth_cmd.cfg.sentences, "Sentence count");
    synth_app->add_option("--types", synth_cmd.cfg.entity_types, "Entity type count");
    synth_app->add_option("--suffixes", synth_cmd.cfg.suffixes_per_type,
                          "Entity words per type");
    synth_app->add_option("--filler-words", synth_cmd.cfg.filler_words, "Non-entity vocabulary");
    synth_app->add_option("--min-len", synth_cmd.cfg.min_sentence_len, "Shortest sentence");
    synth_app->add_option("--max-len", synth_cmd.cfg.max_sentence_len, "Longest sentence");
    synth_app->add_option("--min-mentions", synth_cmd.cfg.min_mentions, "Fewest mentions");
    synth_app->add_option("--max-mentions", synth_cmd.cfg.max_mentions, "Most mentions");
    synth_app->add_option("--two-token-frac", synth_cmd.cfg.two_token_frac,
                          "Fraction of two-token mentions");
    synth_app->add_option("--seed", synth_cmd.cfg.seed, "Generator seed");
    synth_app->add_option("--out", synth_cmd.out, "Output CoNLL path");

    static std::string config_path_display;
    for (auto* sub : {train_app, eval_app, sample_app, ablate_app, export_app, synth_app}) {
        sub->add_option("--config", config_path_display,
                        "Option defaults file (key=value lines); explicit flags win");
    }

    std::vector<std::string> args;
    try {
        args = expand_config_args(argc, argv);
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    std::reverse(args.begin(), args.end());

    try {
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train_app->parsed()) return run_train(train_cmd);
        if (eval_app->parsed()) return run_eval(eval_cmd);
        if (sample_app->parsed()) return run_sample(sample_cmd);
        if (ablate_app->parsed()) return run_ablate(ablate_cmd);
        if (export_app->parsed()) return run_export(export_cmd);
        if (synth_app->parsed()) return run_synth(synth_cmd);
        std::fprintf(stderr, "error: no subcommand\n");
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
