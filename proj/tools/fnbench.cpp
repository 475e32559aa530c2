#include "fnbench/baselines.hpp"
#include "fnbench/dataset_io.hpp"
#include "fnbench/errors.hpp"
#include "fnbench/graph.hpp"
#include "fnbench/model.hpp"
#include "fnbench/rng.hpp"
#include "fnbench/synth.hpp"
#include "fnbench/text.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

using namespace fnbench;

// ---------------------------------------------------------------------------
// --config <json>: values fill in flags the user did not pass explicitly.
// Handled by rewriting the argument list before CLI11 sees it, so explicit
// flags always win and CLI11 still validates the merged result.
// ---------------------------------------------------------------------------

bool flag_present(const std::vector<std::string>& args, const std::string& flag) {
    for (const std::string& a : args)
        if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
}

std::vector<std::string> merge_config_args(std::vector<std::string> args) {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size())
                throw validation_error("--config needs a file path");
            config_path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                       args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (config_path.empty()) return args;

    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw io_error("cannot open config " + config_path);
    nlohmann::json cfg;
    try {
        in >> cfg;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(config_path + ": " + e.what());
    }
    if (!cfg.is_object())
        throw validation_error(config_path + ": config must be a JSON object");

    for (const auto& [key, value] : cfg.items()) {
        const std::string flag = "--" + key;
        if (flag_present(args, flag)) continue; // explicit flag wins
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back(flag);
        } else if (value.is_string()) {
            args.push_back(flag);
            args.push_back(value.get<std::string>());
        } else if (value.is_number() || value.is_number_integer()) {
            args.push_back(flag);
            args.push_back(value.dump());
        } else {
            throw validation_error(config_path + ": key '" + key +
                                   "' must be a scalar");
        }
    }
    return args;
}

// ---------------------------------------------------------------------------

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", v * 100.0);
    return buf;
}

struct GenerateArgs {
    GenParams params;
    std::string attachment = "uniform";
    std::string out;
    std::string corpus; // optional paired bag-of-words corpus
};

void cmd_generate(const GenerateArgs& a) {
    GenParams p = a.params;
    p.attachment = attachment_from_string(a.attachment);
    const Dataset ds = generate_dataset(p);
    save_dataset(ds, a.out);
    write_generation_metadata(a.out, p, ds);
    if (!a.corpus.empty()) save_corpus_csv(a.corpus, root_sign_corpus(ds));
    std::cout << "generated " << ds.graphs.size() << " graphs (" << ds.fake_count()
              << " fake) nodes=" << ds.total_nodes() << " edges=" << ds.total_edges()
              << " -> " << a.out << "\n";
}

struct TrainGnnArgs {
    std::string data;
    std::string layer = "gcn";
    std::string out;
    std::string split_file;
    std::size_t epochs = 100;
    std::size_t batch = 128;
    double lr = 0.01;
    std::size_t hidden = 180;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t heads_final = 2;
    std::string gat_act = "elu";
    std::string sage_agg = "mean";
    bool gin_learn_eps = false;
    bool no_symmetrize = false;
    double train_frac = 0.8;
    std::size_t eval_batch = 512;
    std::uint64_t seed = 0;
    bool timing = false;
};

void cmd_train_gnn(const TrainGnnArgs& a) {
    const Dataset ds = load_dataset(a.data);

    Dataset train, test;
    if (!a.split_file.empty()) {
        std::tie(train, test) = split_dataset_by_file(ds, a.split_file);
    } else {
        std::tie(train, test) =
            split_dataset(ds, a.train_frac, derive_seed(a.seed, "split"));
    }

    ModelConfig cfg;
    cfg.type = layer_type_from_string(a.layer);
    cfg.hidden = a.hidden;
    cfg.layers = a.layers;
    cfg.heads = a.heads;
    cfg.heads_final = a.heads_final;
    cfg.gat_act = a.gat_act == "relu" ? GatActivation::relu : GatActivation::elu;
    cfg.sage_agg =
        a.sage_agg == "maxpool" ? SageAggregator::maxpool : SageAggregator::mean;
    cfg.gin_learn_eps = a.gin_learn_eps;
    cfg.symmetrize = !a.no_symmetrize;

    TrainOptions opt;
    opt.epochs = a.epochs;
    opt.batch_size = a.batch;
    opt.lr = a.lr;
    opt.seed = a.seed;
    opt.eval_batch = a.eval_batch;

    TrainReport report;
    train_gnn(cfg, train, test, opt, &report);
    report.config.emplace_back("data", a.data);

    const std::string out = a.out.empty() ? "train_" + a.layer + ".csv" : a.out;
    write_report_csv(out, report, a.timing);
    std::cout << "layer=" << a.layer
              << " train_acc=" << format_double(report.final_train_acc)
              << " test_acc=" << format_double(report.final_test_acc)
              << " elapsed=" << format_double(report.wall_seconds) << "s -> " << out
              << "\n";
}

struct TrainBaselineArgs {
    std::string corpus;
    std::string model = "logreg";
    std::string out;
    double train_frac = 0.8;
    std::size_t max_vocab = 0;
    std::uint64_t seed = 0;
    bool timing = false;
    // model hyperparameters
    std::size_t iters = 500;
    double lr = 0.1;
    double l2 = 1e-4;
    double lambda = 1e-4;
    std::size_t max_depth = 4;
    std::size_t min_samples_split = 2;
    std::size_t trees = 100;
    bool no_bootstrap = false;
    std::size_t mtry = 0;
};

void cmd_train_baseline(const TrainBaselineArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<CorpusDoc> docs = load_corpus_csv(a.corpus);
    if (docs.size() < 2)
        throw validation_error(a.corpus + ": need at least 2 documents");

    const auto [train_idx, test_idx] =
        split_indices(docs.size(), a.train_frac, derive_seed(a.seed, "split"));
    if (train_idx.empty() || test_idx.empty())
        throw validation_error("split leaves an empty train or test set");

    std::vector<std::string> train_texts;
    std::vector<int> train_y, test_y;
    train_texts.reserve(train_idx.size());
    for (const std::size_t i : train_idx) {
        train_texts.push_back(docs[i].text);
        train_y.push_back(docs[i].label);
    }
    std::vector<std::string> test_texts;
    test_texts.reserve(test_idx.size());
    for (const std::size_t i : test_idx) {
        test_texts.push_back(docs[i].text);
        test_y.push_back(docs[i].label);
    }

    // Vocabulary comes from the training split only; the test split is
    // vectorized against it.
    const Vocabulary vocab = fit_vocabulary(train_texts, a.max_vocab);
    const DocMatrix xtrain = vectorize_all(vocab, train_texts);
    const DocMatrix xtest = vectorize_all(vocab, test_texts);

    double train_acc = 0.0, test_acc = 0.0, train_loss = 0.0;
    if (a.model == "logreg") {
        const LogregOptions opt{a.lr, a.iters, a.l2};
        const LinearModel m = train_logreg(xtrain, train_y, opt);
        train_acc = accuracy(predict_all(m, xtrain), train_y);
        test_acc = accuracy(predict_all(m, xtest), test_y);
        train_loss = logreg_objective(m, xtrain, train_y, a.l2);
    } else if (a.model == "svm") {
        SvmOptions opt;
        opt.lambda = a.lambda;
        opt.iters = a.iters;
        const LinearModel m = train_svm(xtrain, train_y, opt);
        train_acc = accuracy(predict_all(m, xtrain), train_y);
        test_acc = accuracy(predict_all(m, xtest), test_y);
        train_loss = svm_objective(m, xtrain, train_y, opt.lambda);
    } else if (a.model == "dtree") {
        const TreeOptions opt{a.max_depth, a.min_samples_split};
        const DecisionTree m = train_decision_tree(xtrain, train_y, opt);
        train_acc = accuracy(predict_all(m, xtrain), train_y);
        test_acc = accuracy(predict_all(m, xtest), test_y);
        train_loss = 1.0 - train_acc; // misclassification rate
    } else if (a.model == "rforest") {
        ForestOptions opt;
        opt.n_trees = a.trees;
        opt.tree = TreeOptions{a.max_depth, a.min_samples_split};
        opt.bootstrap = !a.no_bootstrap;
        opt.mtry = a.mtry;
        opt.seed = a.seed;
        const RandomForest m = train_random_forest(xtrain, train_y, opt);
        train_acc = accuracy(predict_all(m, xtrain), train_y);
        test_acc = accuracy(predict_all(m, xtest), test_y);
        train_loss = 1.0 - train_acc;
    } else {
        throw validation_error("unknown baseline model '" + a.model + "'");
    }

    TrainReport report;
    report.rows.push_back({1, train_loss, train_acc, test_acc});
    report.final_train_acc = train_acc;
    report.final_test_acc = test_acc;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.config = {
        {"model", a.model},
        {"vocab", std::to_string(vocab.size())},
        {"seed", std::to_string(a.seed)},
        {"data", a.corpus},
    };
    const std::string out = a.out.empty() ? "baseline_" + a.model + ".csv" : a.out;
    write_report_csv(out, report, a.timing);
    std::cout << "model=" << a.model << " train_acc=" << format_double(train_acc)
              << " test_acc=" << format_double(test_acc) << " -> " << out << "\n";
}

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string out = "report.md";
    std::string curves_dir;
};

std::string config_value(const TrainReport& r, const std::string& key,
                         const std::string& fallback) {
    for (const auto& [k, v] : r.config)
        if (k == key) return v;
    return fallback;
}

void cmd_report(const ReportArgs& a) {
    struct Run {
        std::string model;
        std::string data;
        TrainReport report;
    };
    std::vector<Run> runs;
    std::vector<std::string> datasets; // first-appearance order
    for (const std::string& path : a.inputs) {
        Run run;
        run.report = read_report_csv(path);
        const std::string stem = std::filesystem::path(path).stem().string();
        run.model = config_value(run.report, "model", stem);
        run.data = config_value(run.report, "data", "default");
        if (std::find(datasets.begin(), datasets.end(), run.data) == datasets.end())
            datasets.push_back(run.data);
        runs.push_back(std::move(run));

        if (!a.curves_dir.empty()) {
            std::filesystem::create_directories(a.curves_dir);
            const std::string curve_path =
                (std::filesystem::path(a.curves_dir) /
                 (stem + "_curve.csv")).string();
            std::ofstream curve(curve_path, std::ios::binary);
            if (!curve) throw io_error("cannot open " + curve_path + " for writing");
            curve << "epoch,train_loss,train_acc,test_acc\n";
            for (const EpochRow& r : runs.back().report.rows)
                curve << r.epoch << ',' << format_double(r.train_loss) << ','
                      << format_double(r.train_acc) << ','
                      << format_double(r.test_acc) << '\n';
        }
    }

    // one row per model, a (train, test) accuracy column pair per dataset
    std::vector<std::string> models;
    for (const Run& r : runs)
        if (std::find(models.begin(), models.end(), r.model) == models.end())
            models.push_back(r.model);

    std::map<std::pair<std::string, std::string>, const TrainReport*> cell;
    for (const Run& r : runs) cell[{r.model, r.data}] = &r.report;

    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw io_error("cannot open " + a.out + " for writing");
    out << "| Model |";
    for (const std::string& ds : datasets)
        out << ' ' << ds << " Train Accuracy | " << ds << " Test Accuracy |";
    out << "\n|---|";
    for (std::size_t i = 0; i < datasets.size(); ++i) out << "---|---|";
    out << "\n";
    for (const std::string& model : models) {
        out << "| " << model << " |";
        for (const std::string& ds : datasets) {
            const auto it = cell.find({model, ds});
            if (it == cell.end()) {
                out << " - | - |";
            } else {
                out << ' ' << percent(it->second->final_train_acc) << " | "
                    << percent(it->second->final_test_acc) << " |";
            }
        }
        out << "\n";
    }
    if (!out.flush()) throw io_error("failed writing " + a.out);
    std::cout << "report with " << runs.size() << " runs -> " << a.out << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fake-news benchmark engine: synthetic propagation graphs, "
                 "GNN layers and classical text baselines"};
    app.require_subcommand(1);

    // Merged into the argument list ahead of parsing; registered here only so
    // each subcommand documents it.
    static const char* config_help =
        "JSON object of flag defaults; explicit flags win";
    static std::string config_sink;

    GenerateArgs gen;
    CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset");
    generate->add_option("--graphs", gen.params.num_graphs, "graph count")
        ->check(CLI::Range(std::size_t{2}, std::size_t{10'000'000}))
        ->capture_default_str();
    generate->add_option("--avg-nodes", gen.params.avg_nodes, "mean nodes per graph")
        ->check(CLI::Range(2.0, 1e6))
        ->capture_default_str();
    generate->add_option("--dim", gen.params.feature_dim, "feature dimension")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100'000}))
        ->capture_default_str();
    generate->add_option("--sep", gen.params.sep, "class separation delta")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    generate->add_option("--attachment", gen.attachment, "uniform | preferential")
        ->check(CLI::IsMember({"uniform", "preferential"}))
        ->capture_default_str();
    generate->add_flag("--structural-signal", gen.params.structural_signal,
                       "fake graphs attach preferentially");
    generate->add_option("--seed", gen.params.seed, "RNG seed")
        ->envname("FNBENCH_SEED");
    generate->add_option("--out", gen.out, "output JSONL path")->required();
    generate->add_option("--corpus", gen.corpus,
                         "also write a root-sign bag-of-words corpus CSV");
    generate->add_option("--config", config_sink, config_help);
    generate->callback([&] { cmd_generate(gen); });

    TrainGnnArgs tg;
    CLI::App* train_gnn_cmd =
        app.add_subcommand("train-gnn", "train a GNN on a JSONL dataset");
    train_gnn_cmd->add_option("--data", tg.data, "dataset JSONL path")->required();
    train_gnn_cmd->add_option("--layer", tg.layer, "layer type")
        ->check(CLI::IsMember({"gcn", "gat", "sage", "gin"}))
        ->capture_default_str();
    train_gnn_cmd->add_option("--epochs", tg.epochs, "training epochs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_gnn_cmd->add_option("--batch", tg.batch, "graphs per batch")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_gnn_cmd->add_option("--lr", tg.lr, "Adam learning rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_gnn_cmd->add_option("--hidden", tg.hidden, "hidden embedding size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_gnn_cmd->add_option("--layers", tg.layers, "message-passing layers")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_gnn_cmd->add_option("--heads", tg.heads, "GAT heads (non-final layers)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_gnn_cmd
        ->add_option("--heads-final", tg.heads_final, "GAT heads (final layer)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_gnn_cmd->add_option("--gat-act", tg.gat_act, "GAT output activation")
        ->check(CLI::IsMember({"elu", "relu"}))
        ->capture_default_str();
    train_gnn_cmd->add_option("--sage-agg", tg.sage_agg, "GraphSAGE aggregator")
        ->check(CLI::IsMember({"mean", "maxpool"}))
        ->capture_default_str();
    train_gnn_cmd->add_flag("--gin-learn-eps", tg.gin_learn_eps,
                            "train GIN epsilon");
    train_gnn_cmd->add_flag("--no-symmetrize", tg.no_symmetrize,
                            "message passing along stored edge direction only");
    train_gnn_cmd->add_option("--train-frac", tg.train_frac, "train split fraction")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    train_gnn_cmd->add_option("--split-file", tg.split_file,
                              "JSON {\"train\":[ids],\"test\":[ids]} override");
    train_gnn_cmd->add_option("--eval-batch", tg.eval_batch,
                              "graphs per evaluation batch")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_gnn_cmd->add_option("--seed", tg.seed, "RNG seed")->envname("FNBENCH_SEED");
    train_gnn_cmd->add_option("--out", tg.out,
                              "report CSV path (default train_<layer>.csv)");
    train_gnn_cmd->add_flag("--timing", tg.timing,
                            "record wall seconds in the report CSV");
    train_gnn_cmd->add_option("--config", config_sink, config_help);
    train_gnn_cmd->callback([&] { cmd_train_gnn(tg); });

    TrainBaselineArgs tb;
    CLI::App* train_baseline_cmd = app.add_subcommand(
        "train-baseline", "train a classical text baseline on a corpus CSV");
    train_baseline_cmd->add_option("--corpus", tb.corpus, "corpus CSV path")
        ->required();
    train_baseline_cmd->add_option("--model", tb.model, "baseline model")
        ->check(CLI::IsMember({"logreg", "svm", "dtree", "rforest"}))
        ->capture_default_str();
    train_baseline_cmd
        ->add_option("--train-frac", tb.train_frac, "train split fraction")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    train_baseline_cmd->add_option("--max-vocab", tb.max_vocab,
                                   "vocabulary cap (0 = unlimited)");
    train_baseline_cmd->add_option("--iters", tb.iters,
                                   "gradient iterations (logreg, svm)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_baseline_cmd->add_option("--lr", tb.lr, "logreg learning rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_baseline_cmd->add_option("--l2", tb.l2, "logreg l2 strength")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    train_baseline_cmd->add_option("--lambda", tb.lambda, "svm l2 strength")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    train_baseline_cmd->add_option("--max-depth", tb.max_depth, "tree depth cap")
        ->capture_default_str();
    train_baseline_cmd
        ->add_option("--min-samples-split", tb.min_samples_split,
                     "minimum samples to split a node")
        ->check(CLI::Range(std::size_t{2}, std::size_t{1'000'000}))
        ->capture_default_str();
    train_baseline_cmd->add_option("--trees", tb.trees, "forest size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_baseline_cmd->add_flag("--no-bootstrap", tb.no_bootstrap,
                                 "train every tree on the full training set");
    train_baseline_cmd->add_option(
        "--mtry", tb.mtry, "features per split (0 = floor(sqrt(vocab)))");
    train_baseline_cmd->add_option("--seed", tb.seed, "RNG seed")
        ->envname("FNBENCH_SEED");
    train_baseline_cmd->add_option(
        "--out", tb.out, "report CSV path (default baseline_<model>.csv)");
    train_baseline_cmd->add_flag("--timing", tb.timing,
                                 "record wall seconds in the report CSV");
    train_baseline_cmd->add_option("--config", config_sink, config_help);
    train_baseline_cmd->callback([&] { cmd_train_baseline(tb); });

    ReportArgs rp;
    CLI::App* report_cmd =
        app.add_subcommand("report", "merge run CSVs into a markdown table");
    report_cmd->add_option("inputs", rp.inputs, "TrainReport CSV files")
        ->required()
        ->expected(-1);
    report_cmd->add_option("--out", rp.out, "markdown output path")
        ->capture_default_str();
    report_cmd->add_option("--curves-dir", rp.curves_dir,
                           "directory for per-epoch curve pass-through CSVs");
    report_cmd->callback([&] { cmd_report(rp); });

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = merge_config_args(args);
        std::vector<const char*> cargs{argv[0]};
        for (const std::string& a : args) cargs.push_back(a.c_str());
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::Success& e) {
        return app.exit(e); // --help and friends
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const shape_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
