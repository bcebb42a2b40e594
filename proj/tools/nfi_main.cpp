// nfi: flow ingestion, feature selection, Bayes-updating classification,
// sampling analysis and evaluation from the command line.

#include "nfi/classifier.hpp"
#include "nfi/error.hpp"
#include "nfi/eval.hpp"
#include "nfi/features.hpp"
#include "nfi/flow.hpp"
#include "nfi/labels.hpp"
#include "nfi/netflow_v5.hpp"
#include "nfi/pcap.hpp"
#include "nfi/sampling.hpp"
#include "nfi/selection.hpp"
#include "nfi/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path &path) {
    std::ifstream in{path};
    if (!in) {
        throw nfi::IoError{"cannot open " + path.string()};
    }
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw nfi::FormatError{path.string() + ": " + e.what()};
    }
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out{path, std::ios::binary};
    if (!out) {
        throw nfi::IoError{"cannot write " + path.string()};
    }
    out << text;
    if (!out) {
        throw nfi::IoError{"write failed for " + path.string()};
    }
}

void write_json(const fs::path &path, const json &doc) { write_text(path, doc.dump(2) + "\n"); }

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_model(const fs::path &path, const nfi::ClassifierModel &model) {
    json doc = nfi::to_json(model);
    doc["metadata"] = {{"written_at", utc_now()}};
    write_json(path, doc);
}

nfi::ClassifierModel read_model(const fs::path &path) {
    try {
        return nfi::model_from_json(read_json(path));
    } catch (const nfi::FormatError &e) {
        throw nfi::FormatError{path.string() + ": " + e.what()};
    }
}

// "7,8,pps" -> features; ids or names.
std::vector<nfi::Feature> parse_feature_list(const std::string &text) {
    std::vector<nfi::Feature> out;
    std::stringstream ss{text};
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) {
            continue;
        }
        if (const auto f = nfi::feature_from_name(tok)) {
            out.push_back(*f);
            continue;
        }
        try {
            std::size_t used = 0;
            const int id = std::stoi(tok, &used);
            if (used != tok.size()) {
                throw std::invalid_argument{tok};
            }
            out.push_back(nfi::feature_from_id(id));
        } catch (const std::logic_error &) {
            throw nfi::ContractViolation{"unknown feature '" + tok + "'"};
        }
    }
    if (out.empty()) {
        throw nfi::ContractViolation{"empty feature list"};
    }
    return out;
}

struct FeatureChoice {
    std::string selection_path;
    std::string feature_list;
    int bins = 10;
    double delta = 0.0;

    std::vector<nfi::Feature> resolve(const nfi::Dataset &train) const {
        if (!selection_path.empty()) {
            return nfi::selection_from_json(read_json(selection_path)).selected;
        }
        if (!feature_list.empty()) {
            return parse_feature_list(feature_list);
        }
        nfi::FcbfOptions opts;
        opts.bins = bins;
        opts.delta = delta;
        return nfi::fcbf_select(train, opts).selected;
    }
};

void add_feature_choice(CLI::App *cmd, FeatureChoice &fc) {
    auto *sel = cmd->add_option("--selection", fc.selection_path, "selection JSON from `nfi select`");
    auto *feat = cmd->add_option("--features", fc.feature_list, "comma-separated feature ids or names");
    sel->excludes(feat);
    cmd->add_option("--bins", fc.bins, "FCBF bins when selecting internally")->capture_default_str();
    cmd->add_option("--delta", fc.delta, "FCBF relevance threshold when selecting internally")->capture_default_str();
}

// ---- ingest ----

struct IngestArgs {
    std::string pcap;
    std::string netflow;
    std::string labels;
    std::string out;
    double inactive = 15.0;
    double active = 1800.0;
    double reorder = 1.0;
    long long label_tolerance_us = 1000;
    bool complete_only = false;
};

int run_ingest(const IngestArgs &a) {
    std::vector<nfi::FlowRecord> flows;
    if (!a.pcap.empty()) {
        const auto pr = nfi::read_pcap(a.pcap);
        nfi::AggregateOptions opts;
        opts.inactive_timeout_s = a.inactive;
        opts.active_timeout_s = a.active;
        opts.reorder_tolerance_s = a.reorder;
        auto agg = nfi::aggregate(pr.packets, opts);
        if (pr.skipped > 0) {
            std::cerr << "nfi: note: skipped " << pr.skipped << " of " << pr.frames
                      << " frames (not IPv4 TCP/UDP or truncated)\n";
        }
        if (agg.rejected_out_of_order > 0) {
            std::cerr << "nfi: warning: rejected " << agg.rejected_out_of_order
                      << " packets beyond the reorder tolerance\n";
        }
        flows = std::move(agg.flows);
    } else {
        flows = nfi::netflow_v5::read_file(a.netflow);
    }
    if (a.complete_only) {
        std::erase_if(flows, [](const nfi::FlowRecord &f) { return !f.complete; });
    }

    std::optional<nfi::LabelFile> labels;
    if (!a.labels.empty()) {
        if (fs::exists(a.labels)) {
            labels = nfi::load_labels(a.labels);
        } else {
            std::cerr << "nfi: warning: label file " << a.labels << " not found; writing unlabeled rows\n";
        }
    }

    std::vector<nfi::FeatureVector> rows;
    rows.reserve(flows.size());
    std::size_t unmatched = 0;
    for (const auto &f : flows) {
        nfi::FeatureVector v = nfi::featurize(f);
        if (labels) {
            v.label = labels->lookup(f.key, f.first_ts, a.label_tolerance_us);
            unmatched += v.label ? 0 : 1;
        }
        rows.push_back(std::move(v));
    }
    if (labels && unmatched > 0) {
        std::cerr << "nfi: warning: " << unmatched << " of " << rows.size() << " flows have no label\n";
    }
    nfi::write_dataset(a.out, nfi::Dataset::from_rows(std::move(rows)));
    std::cerr << "nfi: wrote " << flows.size() << " flows to " << a.out << "\n";
    return 0;
}

// ---- select / train / update / classify ----

int run_select(const std::string &dataset, const std::string &out, int bins, double delta) {
    nfi::FcbfOptions opts;
    opts.bins = bins;
    opts.delta = delta;
    const auto result = nfi::fcbf_select(nfi::read_dataset(dataset), opts);
    write_json(out, nfi::to_json(result));
    return 0;
}

int run_train(const std::string &dataset, const std::string &out, const FeatureChoice &fc) {
    const auto ds = nfi::read_dataset(dataset);
    const auto features = fc.resolve(ds);
    write_model(out, nfi::train(ds, features));
    return 0;
}

int run_update(const std::string &model_path, const std::string &dataset, const std::string &out) {
    std::error_code ec;
    if (model_path == out || (fs::exists(out) && fs::equivalent(model_path, out, ec))) {
        throw nfi::ContractViolation{"update writes a new model; --out must differ from --model"};
    }
    const auto model = read_model(model_path);
    write_model(out, nfi::update(model, nfi::read_dataset(dataset)));
    return 0;
}

int run_classify(const std::string &model_path, const std::string &dataset, const std::string &out) {
    const auto model = read_model(model_path);
    const auto ds = nfi::read_dataset(dataset);
    const auto predicted = nfi::predict(model, ds);
    std::ostringstream csv;
    csv << "row,label\n";
    std::size_t agree = 0;
    std::size_t labeled = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        csv << i << ',' << predicted[i] << '\n';
        if (ds.rows[i].label) {
            ++labeled;
            agree += *ds.rows[i].label == predicted[i] ? 1 : 0;
        }
    }
    write_text(out, csv.str());
    if (labeled > 0) {
        std::cerr << "nfi: agreement with dataset labels " << agree << "/" << labeled << "\n";
    }
    return 0;
}

// ---- sample-report ----

int run_sample_report(const std::string &pcap, const std::string &synth, const std::string &ratios,
                      int trials, std::uint64_t seed, const std::string &out_csv, const std::string &out_json) {
    const auto ratio_list = nfi::parse_ratio_list(ratios);
    if (trials < nfi::min_trials) {
        throw nfi::ContractViolation{"--trials must be at least " + std::to_string(nfi::min_trials)};
    }
    std::vector<std::vector<nfi::PacketRecord>> flows;
    if (!pcap.empty()) {
        const auto pr = nfi::read_pcap(pcap);
        nfi::AggregateOptions opts;
        opts.keep_packets = true;
        flows = nfi::aggregate(pr.packets, opts).flow_packets;
    } else {
        flows = nfi::synth_trace(nfi::load_synth_spec(synth)).flows;
    }
    const auto report = nfi::sampling_report(flows, ratio_list, seed, trials);
    std::ostringstream csv;
    nfi::write_report_csv(csv, report);
    if (!out_csv.empty()) {
        write_text(out_csv, csv.str());
    } else {
        std::cout << csv.str();
    }
    if (!out_json.empty()) {
        write_json(out_json, nfi::to_json(report));
    }
    return 0;
}

// ---- synth ----

int run_synth(const std::string &spec_path, std::optional<std::uint64_t> seed, const std::string &out_dataset,
              const std::string &out_pcap, const std::string &out_labels) {
    if (out_dataset.empty() && out_pcap.empty()) {
        throw nfi::ContractViolation{"synth needs --out-dataset and/or --out-pcap"};
    }
    if (!out_labels.empty() && out_pcap.empty()) {
        throw nfi::ContractViolation{"--out-labels goes with --out-pcap"};
    }
    auto spec = nfi::load_synth_spec(spec_path);
    if (seed) {
        spec.seed = *seed;
    }
    if (!out_dataset.empty()) {
        nfi::write_dataset(out_dataset, nfi::synth_dataset(spec));
    }
    if (!out_pcap.empty()) {
        const auto trace = nfi::synth_trace(spec);
        nfi::write_pcap(out_pcap, trace.packets);
        if (!out_labels.empty()) {
            nfi::write_labels(out_labels, trace.labels);
        }
    }
    return 0;
}

// ---- evaluate ----

// "NAME:P:R:OA"
nfi::SummaryRow parse_baseline(const std::string &text) {
    std::vector<std::string> parts;
    std::stringstream ss{text};
    std::string tok;
    while (std::getline(ss, tok, ':')) {
        parts.push_back(tok);
    }
    if (parts.size() != 4 || parts[0].empty()) {
        throw nfi::ContractViolation{"baseline must look like NAME:precision:recall:oa, got '" + text + "'"};
    }
    try {
        return nfi::baseline_row(parts[0], std::stod(parts[1]), std::stod(parts[2]), std::stod(parts[3]));
    } catch (const std::logic_error &) {
        throw nfi::ContractViolation{"baseline values must be numbers: '" + text + "'"};
    }
}

int run_evaluate(const std::string &dataset, int k, std::uint64_t seed, const std::string &report_path,
                 const std::string &summary_path, const FeatureChoice &fc, const std::vector<std::string> &baselines) {
    std::vector<nfi::SummaryRow> rows;
    for (const auto &b : baselines) {
        rows.push_back(parse_baseline(b));
    }
    const auto ds = nfi::read_dataset(dataset);
    const nfi::Pipeline pipeline = [&fc](const nfi::Dataset &train, const nfi::Dataset &test) {
        const auto model = nfi::train(train, fc.resolve(train));
        return nfi::predict(model, test);
    };
    const auto cv = nfi::kfold_cv(ds, k, seed, pipeline);
    rows.insert(rows.begin(), nfi::summary_row("NFI", cv));

    json doc = nfi::to_json(cv);
    doc["dataset"] = dataset;
    if (!report_path.empty()) {
        write_json(report_path, doc);
    }
    std::ostringstream csv;
    nfi::write_summary_csv(csv, rows);
    if (!summary_path.empty()) {
        write_text(summary_path, csv.str());
    }
    std::cout << csv.str();
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"nfi: NetFlow traffic identification with Bayes-updating classification"};
    app.require_subcommand(1);

    IngestArgs ingest;
    auto *c_ingest = app.add_subcommand("ingest", "pcap or NetFlow v5 -> labeled feature CSV");
    auto *o_pcap = c_ingest->add_option("--pcap", ingest.pcap, "pcap capture");
    auto *o_nf = c_ingest->add_option("--netflow", ingest.netflow, "NetFlow v5 datagram stream");
    o_pcap->excludes(o_nf);
    c_ingest->add_option("--labels", ingest.labels, "label CSV (ip_lo,port_lo,ip_hi,port_hi,proto,first_ts,label)");
    c_ingest->add_option("--out", ingest.out, "feature CSV")->required();
    c_ingest->add_option("--inactive-timeout", ingest.inactive, "seconds")->capture_default_str();
    c_ingest->add_option("--active-timeout", ingest.active, "seconds")->capture_default_str();
    c_ingest->add_option("--reorder-tolerance", ingest.reorder, "seconds")->capture_default_str();
    c_ingest->add_option("--label-tolerance-us", ingest.label_tolerance_us, "first_ts slack for label joins")
        ->capture_default_str();
    c_ingest->add_flag("--complete-only", ingest.complete_only, "keep only TCP flows with SYN and FIN seen");

    std::string sel_dataset, sel_out;
    int sel_bins = 10;
    double sel_delta = 0.0;
    auto *c_select = app.add_subcommand("select", "FCBF feature selection");
    c_select->add_option("--dataset", sel_dataset)->required();
    c_select->add_option("--out", sel_out, "selection JSON")->required();
    c_select->add_option("--bins", sel_bins)->capture_default_str();
    c_select->add_option("--delta", sel_delta)->capture_default_str();

    std::string tr_dataset, tr_out;
    FeatureChoice tr_fc;
    auto *c_train = app.add_subcommand("train", "train a model (selects features with FCBF unless given)");
    c_train->add_option("--dataset", tr_dataset)->required();
    c_train->add_option("--out", tr_out, "model JSON")->required();
    add_feature_choice(c_train, tr_fc);

    std::string up_model, up_dataset, up_out;
    auto *c_update = app.add_subcommand("update", "fold new labeled flows into a model, writing a new file");
    c_update->add_option("--model", up_model)->required();
    c_update->add_option("--dataset", up_dataset)->required();
    c_update->add_option("--out", up_out, "new model JSON")->required();

    std::string cl_model, cl_dataset, cl_out;
    auto *c_classify = app.add_subcommand("classify", "label flows with a model");
    c_classify->add_option("--model", cl_model)->required();
    c_classify->add_option("--dataset", cl_dataset)->required();
    c_classify->add_option("--out", cl_out, "labels CSV (row,label)")->required();

    std::string sr_pcap, sr_synth, sr_csv, sr_json;
    std::string sr_ratios = "1:128,1:256,1:512,1:1024";
    int sr_trials = 20000;
    std::uint64_t sr_seed = 1;
    auto *c_sample = app.add_subcommand("sample-report", "ADRE of flow metrics under packet sampling");
    auto *o_sp = c_sample->add_option("--pcap", sr_pcap);
    auto *o_ss = c_sample->add_option("--synth", sr_synth, "synth spec JSON");
    o_sp->excludes(o_ss);
    c_sample->add_option("--ratios", sr_ratios)->capture_default_str();
    c_sample->add_option("--trials", sr_trials)->capture_default_str();
    c_sample->add_option("--seed", sr_seed)->capture_default_str();
    c_sample->add_option("--out-csv", sr_csv, "metric,ratio,adre CSV (stdout if absent)");
    c_sample->add_option("--out-json", sr_json);

    std::string sy_spec, sy_dataset, sy_pcap, sy_labels;
    std::optional<std::uint64_t> sy_seed;
    auto *c_synth = app.add_subcommand("synth", "deterministic synthetic dataset and/or packet trace");
    c_synth->add_option("--spec", sy_spec)->required();
    c_synth->add_option("--seed", sy_seed, "overrides the spec seed");
    c_synth->add_option("--out-dataset", sy_dataset);
    c_synth->add_option("--out-pcap", sy_pcap);
    c_synth->add_option("--out-labels", sy_labels);

    std::string ev_dataset, ev_report, ev_summary;
    int ev_k = 10;
    std::uint64_t ev_seed = 1;
    FeatureChoice ev_fc;
    std::vector<std::string> ev_baselines;
    auto *c_eval = app.add_subcommand("evaluate", "stratified k-fold cross-validation of select+train+classify");
    c_eval->add_option("--dataset", ev_dataset)->required();
    c_eval->add_option("--k", ev_k)->capture_default_str();
    c_eval->add_option("--seed", ev_seed)->capture_default_str();
    c_eval->add_option("--report", ev_report, "JSON report with per-fold rows");
    c_eval->add_option("--summary", ev_summary, "algorithm,precision,recall,oa,f_measure CSV");
    c_eval->add_option("--baseline", ev_baselines, "extra row NAME:precision:recall:oa (repeatable)");
    add_feature_choice(c_eval, ev_fc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (c_ingest->parsed()) {
            if (ingest.pcap.empty() && ingest.netflow.empty()) {
                throw nfi::ContractViolation{"ingest needs --pcap or --netflow"};
            }
            return run_ingest(ingest);
        }
        if (c_select->parsed()) {
            return run_select(sel_dataset, sel_out, sel_bins, sel_delta);
        }
        if (c_train->parsed()) {
            return run_train(tr_dataset, tr_out, tr_fc);
        }
        if (c_update->parsed()) {
            return run_update(up_model, up_dataset, up_out);
        }
        if (c_classify->parsed()) {
            return run_classify(cl_model, cl_dataset, cl_out);
        }
        if (c_sample->parsed()) {
            if (sr_pcap.empty() && sr_synth.empty()) {
                throw nfi::ContractViolation{"sample-report needs --pcap or --synth"};
            }
            return run_sample_report(sr_pcap, sr_synth, sr_ratios, sr_trials, sr_seed, sr_csv, sr_json);
        }
        if (c_synth->parsed()) {
            return run_synth(sy_spec, sy_seed, sy_dataset, sy_pcap, sy_labels);
        }
        if (c_eval->parsed()) {
            return run_evaluate(ev_dataset, ev_k, ev_seed, ev_report, ev_summary, ev_fc, ev_baselines);
        }
    } catch (const nfi::Error &e) {
        std::cerr << "nfi: error: " << e.what() << "\n";
        return nfi::exit_code_for(e.kind());
    }
    return 0;
}
