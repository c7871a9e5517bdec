// osrtool: open-set recognition on classifier activation vectors.
//
//   osrtool synth     --out-dir DIR [--spec FILE] [--seed N]
//   osrtool calibrate --embeddings FILE --labels FILE --model FILE [--alpha A] [--tail T] ...
//   osrtool predict   --model FILE --embeddings FILE [--epsilon E] [--method openmax|softmax]
//   osrtool evaluate  --model FILE --embeddings FILE --out-dir DIR [--epsilon E]
//   osrtool sweep     --embeddings FILE --labels FILE --out-dir DIR [--alphas ...] [--tails ...]
//
// Exit codes: 0 success, 1 computation error, 2 usage or validation error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <utility>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "osr/osr.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitCompute = 1;
constexpr int kExitUsage = 2;

struct RunConfig {
    std::string embeddings;
    std::string labels;
    std::string model;
    std::string out_dir;
    std::string spec;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> alpha;
    std::size_t tail = 20;
    double epsilon = 0.5;
    std::optional<double> softmax_epsilon;
    std::string weight_form = "cdf";
    std::string tau_mode = "zero";
    std::string method = "openmax";
    std::string split = "test";
    std::string select_on = "test";
    std::string alpha_round = "up";
    std::vector<std::size_t> alphas;
    std::vector<std::size_t> tails;
    std::vector<double> epsilons;
    std::vector<std::string> methods;
    unsigned threads = 1;
};

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw osr::ValidationError("cannot write " + path.string());
    out << content;
}

osr::WeightForm weight_form_of(const RunConfig& c) { return *osr::parse_weight_form(c.weight_form); }
osr::TauMode tau_mode_of(const RunConfig& c) { return *osr::parse_tau_mode(c.tau_mode); }

osr::Split split_of(const std::string& s) { return *osr::parse_split(s); }

std::vector<osr::EmbeddingRecord> records_for(const std::vector<osr::EmbeddingRecord>& all, const std::string& which) {
    if (which == "all")
        return all;
    return osr::split(all, split_of(which));
}

// Data files hold no timestamps, so identical inputs give identical bytes.
ordered_json echo(const std::string& command, const RunConfig& c) {
    ordered_json j;
    j["command"] = command;
    if (!c.embeddings.empty()) j["embeddings"] = c.embeddings;
    if (!c.labels.empty()) j["labels"] = c.labels;
    if (!c.model.empty()) j["model"] = c.model;
    if (command == "evaluate") {
        j["split"] = c.split;
        j["openmax_epsilon"] = c.epsilon;
        j["softmax_epsilon"] = c.softmax_epsilon.value_or(c.epsilon);
    }
    if (command == "sweep") {
        j["select_on"] = c.select_on;
        j["weight_form"] = c.weight_form;
        j["tau_mode"] = c.tau_mode;
        j["alpha_round"] = c.alpha_round;
    }
    return j;
}

int cmd_synth(const RunConfig& c) {
    osr::SynthSpec spec = osr::benchmark_spec();
    if (!c.spec.empty()) {
        std::ifstream in(c.spec);
        if (!in)
            throw osr::ValidationError("cannot open synthetic spec: " + c.spec);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw osr::ValidationError(std::string("malformed synthetic spec: ") + e.what());
        }
        spec = osr::synth_spec_from_json(j);
    }
    if (c.seed)
        spec.seed = *c.seed;
    const auto data = osr::generate(spec);
    const fs::path dir(c.out_dir);
    std::ostringstream emb, lab;
    osr::write_dataset(emb, data.records, data.labels);
    osr::write_label_map(lab, data.labels);
    write_file(dir / "embeddings.jsonl", emb.str());
    write_file(dir / "labels.json", lab.str());
    write_file(dir / "synth_spec.json", osr::synth_spec_to_json(spec).dump(2) + "\n");
    const auto& k = data.manifest.counts;
    std::cout << "wrote " << data.records.size() << " records (train " << k.train << ", eval " << k.eval
              << ", test " << k.test << ") for " << data.labels.size() << " known classes and "
              << data.manifest.uuc_names.size() << " unknown clusters to " << dir.string() << "\n";
    return 0;
}

int cmd_calibrate(const RunConfig& c) {
    const auto labels = osr::load_label_map(c.labels);
    const auto data = osr::load_dataset(c.embeddings, labels);
    const auto train = osr::split(data.records, osr::Split::train);
    const std::size_t alpha = c.alpha.value_or(labels.size());
    const auto model = osr::calibrate(labels, train, osr::closed_set_predictions(train),
                                      {alpha, c.tail, weight_form_of(c), tau_mode_of(c)});
    if (fs::path(c.model).has_parent_path())
        fs::create_directories(fs::path(c.model).parent_path());
    osr::save_model(c.model, model);

    std::printf("%-20s %8s %6s %12s %12s %12s\n", "class", "mav_n", "n_fit", "tau", "lambda", "kappa");
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const auto& w = model.weibulls()[k];
        std::printf("%-20s %8zu %6zu %12.6g %12.6g %12.6g\n", labels.names()[k].c_str(), model.mavs().counts[k],
                    w.n_fit, w.tau, w.lambda, w.kappa);
    }
    std::printf("alpha=%zu tail=%zu weight_form=%s -> %s\n", alpha, c.tail,
                std::string(osr::to_string(model.weight_form())).c_str(), c.model.c_str());
    return 0;
}

osr::OpenMaxModel load_model_checked(const RunConfig& c) {
    auto model = osr::load_model(c.model);
    if (!c.labels.empty() && !(osr::load_label_map(c.labels) == model.labels()))
        throw osr::ValidationError("label map " + c.labels + " does not match the model's classes");
    return model;
}

int cmd_predict(const RunConfig& c) {
    const auto model = load_model_checked(c);
    const auto data = osr::load_dataset(c.embeddings, model.labels());
    const auto records = records_for(data.records, c.split);
    const auto preds = c.method == "softmax" ? osr::predict_softmax(records, c.epsilon)
                                             : osr::predict_openmax(model, records, c.epsilon);
    std::ostringstream os;
    for (const auto& p : preds)
        os << osr::prediction_to_json(p, model.labels()).dump() << '\n';
    if (c.out_dir.empty())
        std::cout << os.str();
    else
        write_file(fs::path(c.out_dir) / "predictions.jsonl", os.str());
    return 0;
}

int cmd_evaluate(const RunConfig& c) {
    const auto model = load_model_checked(c);
    const auto& labels = model.labels();
    const auto data = osr::load_dataset(c.embeddings, labels);
    const auto records = records_for(data.records, c.split);
    if (records.empty())
        throw osr::ValidationError("no records in split '" + c.split + "'");
    const osr::EvaluationConfig cfg{c.softmax_epsilon.value_or(c.epsilon), c.epsilon};
    const auto e = osr::evaluate(model, records, cfg);

    ordered_json j;
    j["config"] = echo("evaluate", c);
    j["model"] = {{"alpha", model.alpha()},
                  {"tail_size", model.tail_size()},
                  {"weight_form", std::string(osr::to_string(model.weight_form()))}};
    const auto summary = osr::evaluation_to_json(e, labels);
    for (auto& [k, v] : summary.items())
        j[k] = v;

    std::ostringstream txt;
    txt << osr::render_accuracy_table(e) << '\n';
    const std::pair<const char*, const osr::EvalReport*> reports[] = {
        {"closed", &e.closed},
        {"softmax", &e.softmax},
        {"softmax-threshold", &e.softmax_threshold},
        {"openmax-threshold", &e.openmax_threshold}};
    const fs::path dir(c.out_dir);
    for (const auto& [name, r] : reports) {
        txt << "[" << name << "] accuracy " << osr::format_fixed(r->accuracy) << '\n'
            << osr::render_class_table(*r, labels) << '\n';
        write_file(dir / ("confusion_" + std::string(name) + ".csv"), osr::confusion_to_csv(r->confusion, labels));
    }
    write_file(dir / "report.json", j.dump(2) + "\n");
    write_file(dir / "report.txt", txt.str());
    std::cout << osr::render_accuracy_table(e);
    return 0;
}

int cmd_sweep(const RunConfig& c) {
    const auto labels = osr::load_label_map(c.labels);
    const auto data = osr::load_dataset(c.embeddings, labels);
    const auto train = osr::split(data.records, osr::Split::train);
    const auto target = osr::split(data.records, split_of(c.select_on));
    if (c.select_on == "test")
        std::cerr << "warning: hyperparameters are selected on test accuracy (oracle selection); "
                     "use --select-on eval for an unbiased choice\n";

    osr::SweepSpec spec = osr::default_sweep_spec(labels.size(), c.alpha_round == "up");
    if (!c.alphas.empty()) spec.alphas = c.alphas;
    if (!c.tails.empty()) spec.tails = c.tails;
    if (!c.epsilons.empty()) spec.epsilons = c.epsilons;
    if (!c.methods.empty()) {
        spec.methods.clear();
        for (const auto& m : c.methods)
            spec.methods.push_back(*osr::parse_method(m));
    }
    spec.weight_form = weight_form_of(c);
    spec.tau_mode = tau_mode_of(c);

    const auto result = osr::sweep(labels, train, osr::closed_set_predictions(train), target, spec, {c.threads});

    const fs::path dir(c.out_dir);
    write_file(dir / "sweep.csv", osr::sweep_to_csv(result));
    std::map<std::string, bool> written;
    for (const auto& r : result.rows) {
        if (!r.ok())
            continue;
        const std::string name = r.method == osr::Method::softmax_threshold
                                     ? std::string("softmax-threshold")
                                     : "openmax-threshold_a" + std::to_string(r.alpha) + "_t" + std::to_string(r.tail);
        if (written[name])
            continue;
        written[name] = true;
        write_file(dir / "curves" / (name + ".csv"),
                   osr::curve_to_csv(osr::threshold_curve(result, r.method, r.alpha, r.tail)));
    }
    ordered_json best;
    best["config"] = echo("sweep", c);
    best["calibrations"] = result.calibrations;
    best["best"] = osr::best_to_json(result);
    write_file(dir / "best.json", best.dump(2) + "\n");

    std::map<std::pair<std::size_t, std::size_t>, std::string> failures;
    for (const auto& r : result.rows)
        if (!r.ok())
            failures.emplace(std::pair{r.alpha, r.tail}, r.error);
    for (const auto& [key, what] : failures)
        std::cerr << "calibration failed for alpha=" << key.first << " tail=" << key.second << ": " << what << '\n';
    for (const auto& r : result.best) {
        std::cout << "best " << osr::to_string(r.method);
        if (r.method == osr::Method::openmax_threshold)
            std::cout << " alpha=" << r.alpha << " tail=" << r.tail;
        std::cout << " epsilon=" << osr::format_number(r.epsilon) << " accuracy=" << osr::format_fixed(*r.accuracy)
                  << '\n';
    }
    return result.best.empty() ? kExitCompute : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-set recognition for classifier activation vectors"};
    app.require_subcommand(1);
    RunConfig c;

    const std::vector<std::string> weight_forms{"cdf", "paper-literal"};
    const std::vector<std::string> tau_modes{"zero", "shift"};
    const std::vector<std::string> splits{"train", "eval", "test", "all"};

    auto* synth = app.add_subcommand("synth", "Generate a synthetic activation-vector benchmark");
    synth->add_option("--out-dir", c.out_dir, "Output directory")->required();
    synth->add_option("--spec", c.spec, "Cluster specification JSON (default: built-in 5-class benchmark)");
    synth->add_option("--seed", c.seed, "Override the generator seed");

    auto* cal = app.add_subcommand("calibrate", "Fit MAVs and per-class Weibull tails");
    cal->add_option("--embeddings", c.embeddings, "Embedding file (JSON lines)")->required();
    cal->add_option("--labels", c.labels, "Label map JSON")->required();
    cal->add_option("--model", c.model, "Output model file")->required();
    cal->add_option("--alpha", c.alpha, "Number of top classes to revise (default N)")->check(CLI::PositiveNumber);
    cal->add_option("--tail", c.tail, "Weibull tail size")->check(CLI::Range(2, 1 << 30));
    cal->add_option("--weight-form", c.weight_form)->check(CLI::IsMember(weight_forms));
    cal->add_option("--tau-mode", c.tau_mode, "Weibull location: zero or shift")->check(CLI::IsMember(tau_modes));

    auto* pred = app.add_subcommand("predict", "Score embeddings with a calibrated model");
    pred->add_option("--model", c.model)->required();
    pred->add_option("--embeddings", c.embeddings)->required();
    pred->add_option("--labels", c.labels, "Optional label map to check against the model");
    pred->add_option("--epsilon", c.epsilon, "Rejection threshold")->check(CLI::Range(0.0, 1.0));
    pred->add_option("--method", c.method)->check(CLI::IsMember({"openmax", "softmax"}));
    pred->add_option("--split", c.split)->check(CLI::IsMember(splits));
    pred->add_option("--out-dir", c.out_dir, "Write predictions.jsonl here instead of stdout");

    auto* eval = app.add_subcommand("evaluate", "Closed, softmax, softmax-threshold and OpenMax accuracies");
    eval->add_option("--model", c.model)->required();
    eval->add_option("--embeddings", c.embeddings)->required();
    eval->add_option("--labels", c.labels, "Optional label map to check against the model");
    eval->add_option("--out-dir", c.out_dir)->required();
    eval->add_option("--epsilon", c.epsilon, "OpenMax rejection threshold")->check(CLI::Range(0.0, 1.0));
    eval->add_option("--softmax-epsilon", c.softmax_epsilon, "Softmax threshold (default: --epsilon)")
        ->check(CLI::Range(0.0, 1.0));
    eval->add_option("--split", c.split)->check(CLI::IsMember(splits));

    auto* sw = app.add_subcommand("sweep", "Grid search over alpha, tail size and epsilon");
    sw->add_option("--embeddings", c.embeddings)->required();
    sw->add_option("--labels", c.labels)->required();
    sw->add_option("--out-dir", c.out_dir)->required();
    sw->add_option("--alphas", c.alphas, "Alpha grid (default ceil(N/2)..N)")->delimiter(',');
    sw->add_option("--tails", c.tails, "Tail grid (default 20,25,30,35,40)")->delimiter(',');
    sw->add_option("--epsilons", c.epsilons, "Epsilon grid (default 0.05..0.95 step 0.05)")->delimiter(',');
    sw->add_option("--methods", c.methods)->delimiter(',')->check(
        CLI::IsMember({"softmax-threshold", "openmax-threshold"}));
    sw->add_option("--weight-form", c.weight_form)->check(CLI::IsMember(weight_forms));
    sw->add_option("--tau-mode", c.tau_mode)->check(CLI::IsMember(tau_modes));
    sw->add_option("--select-on", c.select_on, "Split used for selection")->check(CLI::IsMember({"test", "eval"}));
    sw->add_option("--alpha-round", c.alpha_round, "Round N/2 up or down for the default alpha grid")
        ->check(CLI::IsMember({"up", "down"}));
    sw->add_option("--threads", c.threads, "Parallel calibration workers")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*synth) return cmd_synth(c);
        if (*cal) return cmd_calibrate(c);
        if (*pred) return cmd_predict(c);
        if (*eval) return cmd_evaluate(c);
        if (*sw) return cmd_sweep(c);
    } catch (const osr::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const osr::ComputeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitCompute;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitCompute;
    }
    return kExitUsage;
}
