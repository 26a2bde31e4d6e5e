// cdftn: desk-scale cross-domain face anti-spoofing experiments via
// cyclically disentangled feature translation.
//
// Subcommands: generate-data, train, synthesize, train-classifier,
// evaluate, report. Flag overrides win over the config file, which wins
// over built-in defaults. CDFTN_OUTPUT_ROOT re-roots relative output dirs.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "cdftn/pipeline.hpp"
#include "cdftn/rng.hpp"

namespace fs = std::filesystem;
using namespace cdftn;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string mode, variant, output_dir, source, targets;
    int64_t seed = -1;
    int stage1_epochs = -1, stage2_epochs = -1, batch_size = -1;
    double lr = -1.0;
    int64_t samples = -1;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("-c,--config", a.config_path, "experiment config (JSON)");
    cmd->add_option("--mode", a.mode, "SS2ST | SS2BT | SS2MT");
    cmd->add_option("--seed", a.seed, "master seed");
    cmd->add_option("-o,--output-dir", a.output_dir, "run directory");
    cmd->add_option("--source", a.source, "source domain, id=style_seed or id=path");
    cmd->add_option("--targets", a.targets, "targets, comma list of id=style_seed or id=path");
    cmd->add_option("--stage1-epochs", a.stage1_epochs, "stage-1 epochs");
    cmd->add_option("--stage2-epochs", a.stage2_epochs, "stage-2 epochs");
    cmd->add_option("--batch-size", a.batch_size, "stage-1 batch size");
    cmd->add_option("--lr", a.lr, "stage-1 learning rate");
    cmd->add_option("--samples", a.samples, "samples per domain");
    cmd->add_option("--variant", a.variant, "classifier variant R | L");
}

DomainConfig parse_domain(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos)
        throw CLI::ValidationError("domain must be id=style_seed or id=path, got '" + text + "'");
    DomainConfig d;
    d.domain_id = std::stoi(text.substr(0, eq));
    const std::string rest = text.substr(eq + 1);
    if (!rest.empty() && rest.find_first_not_of("0123456789") == std::string::npos) {
        d.synthetic = true;
        d.style_seed = std::stoll(rest);
    } else {
        d.synthetic = false;
        d.path = rest;
    }
    return d;
}

ExperimentConfig resolve_config(const CommonArgs& a) {
    nlohmann::json j;
    if (!a.config_path.empty()) {
        std::ifstream f(a.config_path);
        if (!f) throw CLI::ValidationError("cannot open config " + a.config_path);
        f >> j;
    }
    ExperimentConfig cfg = ExperimentConfig::from_json(j);
    if (!a.mode.empty()) cfg.mode = trainer::mode_from_name(a.mode);
    if (a.seed >= 0) {
        cfg.seed = static_cast<uint64_t>(a.seed);
        // keep derived stage seeds in sync unless the file pinned them
        if (!j.contains("stage1") || !j.at("stage1").contains("seed"))
            cfg.stage1.seed = mix_seed(cfg.seed, 0x57a6e1);
        if (!j.contains("stage2") || !j.at("stage2").contains("seed"))
            cfg.stage2.seed = mix_seed(cfg.seed, 0x57a6e2);
    }
    if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
    if (!a.source.empty()) cfg.source = parse_domain(a.source);
    if (!a.targets.empty()) {
        cfg.targets.clear();
        std::stringstream ss(a.targets);
        std::string item;
        while (std::getline(ss, item, ',')) cfg.targets.push_back(parse_domain(item));
    }
    if (a.stage1_epochs > 0) cfg.stage1.epochs = a.stage1_epochs;
    if (a.stage2_epochs > 0) cfg.stage2.epochs = a.stage2_epochs;
    if (a.batch_size > 0) cfg.stage1.batch_size = a.batch_size;
    if (a.lr > 0) cfg.stage1.learning_rate = a.lr;
    if (a.samples > 1) cfg.data.samples_per_domain = a.samples;
    if (!a.variant.empty())
        cfg.stage2.variant =
            a.variant == "L" ? nets::ClassifierVariant::L : nets::ClassifierVariant::R;
    cfg.validate();
    return cfg;
}

int cmd_generate_data(const CommonArgs& a) {
    const auto cfg = resolve_config(a);
    const std::string out = cfg.resolved_output_dir();
    std::vector<DomainConfig> all{cfg.source};
    all.insert(all.end(), cfg.targets.begin(), cfg.targets.end());
    for (const auto& dc : all) {
        if (!dc.synthetic) {
            std::cout << "domain " << dc.domain_id << ": ingested from " << dc.path
                      << ", nothing to generate\n";
            continue;
        }
        const auto spec = synthdomain::make_domain_spec(dc.domain_id, dc.style_seed);
        const int64_t base_seed = static_cast<int64_t>(
            mix_seed(cfg.seed, 0xDA7A, static_cast<uint64_t>(dc.domain_id)) & 0x7fffffff);
        auto ds = synthdomain::generate_dataset(spec, cfg.data.samples_per_domain,
                                                cfg.data.live_fraction, base_seed, cfg.shape);
        const std::string dir = out + "/data/domain_" + std::to_string(dc.domain_id);
        synthdomain::export_dataset(ds, dir);
        std::cout << "domain " << dc.domain_id << ": " << ds.live_count() << " live + "
                  << ds.spoof_count() << " spoof -> " << dir << "\n";
    }
    return 0;
}

int cmd_train(const CommonArgs& a, bool fresh) {
    const auto cfg = resolve_config(a);
    const std::string run_dir = cfg.resolved_output_dir();
    fs::create_directories(run_dir);
    cfg.save(run_dir + "/config.json");
    auto data = pipeline::prepare(cfg);
    const auto topo = cfg.topology();
    nets::ModelBundle bundle(cfg.shape, cfg.sizes, topo.ring_size(), cfg.stage2.variant,
                             mix_seed(cfg.seed, 0xB0D1));
    trainer::Stage1Trainer tr(bundle, cfg.stage1, topo);
    int start_epoch = 0;
    if (!fresh)
        start_epoch =
            pipeline::resume_from_checkpoints(run_dir, bundle, tr.optimizer(), cfg.stage1.epochs);
    if (start_epoch > 0)
        std::cout << "resuming from epoch checkpoint " << (start_epoch - 1) << "\n";
    if (start_epoch >= cfg.stage1.epochs) {
        std::cout << "stage 1 already complete (" << cfg.stage1.epochs << " epochs)\n";
    } else {
        tr.train(data.source_train, data.views, run_dir, start_epoch);
    }
    bundle.save(run_dir + "/ckpt/final");
    std::cout << "stage 1 done: " << run_dir << "/ckpt/final\n";
    return 0;
}

int cmd_synthesize(const CommonArgs& a, const std::string& checkpoint) {
    const auto cfg = resolve_config(a);
    const std::string run_dir = cfg.resolved_output_dir();
    const std::string ckpt = checkpoint.empty() ? run_dir + "/ckpt/final" : checkpoint;
    auto bundle = nets::ModelBundle::load(ckpt);
    auto data = pipeline::prepare(cfg);
    auto pseudo = trainer::synthesize_pseudo(bundle, data.source_train, data.views, data.slot_ids,
                                             cfg.synthesis_multiplicity);
    // pseudo-labeled images in the ingestion layout, one folder per target
    std::map<int, synthdomain::DatasetHandle> by_target;
    for (const auto& s : pseudo.data.samples) by_target[s.domain_id].samples.push_back(s);
    for (auto& [tid, handle] : by_target) {
        const std::string dir = run_dir + "/pseudo/target_" + std::to_string(tid);
        synthdomain::export_dataset(handle, dir);
        std::cout << "target " << tid << ": " << handle.size() << " pseudo-labeled images -> "
                  << dir << "\n";
    }
    std::ofstream prov(run_dir + "/pseudo/provenance.csv");
    prov << "index,source_index,target_domain,label\n";
    for (size_t i = 0; i < pseudo.provenance.size(); ++i)
        prov << i << "," << pseudo.provenance[i].first << "," << pseudo.provenance[i].second << ","
             << pseudo.data.samples[i].label << "\n";
    return 0;
}

int cmd_train_classifier(const CommonArgs& a, const std::string& checkpoint) {
    const auto cfg = resolve_config(a);
    const std::string run_dir = cfg.resolved_output_dir();
    const std::string ckpt = checkpoint.empty() ? run_dir + "/ckpt/final" : checkpoint;
    auto bundle = nets::ModelBundle::load(ckpt);
    auto data = pipeline::prepare(cfg);
    auto pseudo = trainer::synthesize_pseudo(bundle, data.source_train, data.views, data.slot_ids,
                                             cfg.synthesis_multiplicity);
    trainer::PseudoLabeledSet balanced;
    balanced.data = synthdomain::resample_balance(pseudo.data, mix_seed(cfg.seed, 0xBA1, 1));
    balanced.provenance = pseudo.provenance;
    trainer::train_stage2(bundle.classifier_m(), balanced, cfg.stage2,
                          run_dir + "/stage2_losses.csv");
    bundle.save(run_dir + "/ckpt/final");
    Rng m0_rng(mix_seed(cfg.seed, 0xB0D1, 0xBA5E));
    nets::ImageClassifier m0("cls_M0", cfg.shape, cfg.sizes, cfg.stage2.variant, m0_rng);
    trainer::train_classifier(m0, data.source_train, cfg.stage2,
                              run_dir + "/baseline_losses.csv");
    nets::save_image_classifier(run_dir + "/ckpt/baseline", m0, cfg.shape, cfg.sizes);
    std::cout << "classifier M and source-only baseline trained\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& a, const std::string& checkpoint) {
    const auto cfg = resolve_config(a);
    const std::string run_dir = cfg.resolved_output_dir();
    const std::string ckpt = checkpoint.empty() ? run_dir + "/ckpt/final" : checkpoint;
    auto bundle = nets::ModelBundle::load(ckpt);
    auto m0 = nets::load_image_classifier(run_dir + "/ckpt/baseline");
    auto data = pipeline::prepare(cfg);
    auto result = pipeline::write_eval_and_plots(cfg, bundle, *m0, data, run_dir);
    for (const auto& t : result.targets)
        std::cout << "target " << t.target_id << ": AUC " << t.model.auc << " HTER@EER "
                  << t.model.hter << " (baseline AUC " << t.baseline.auc << " HTER "
                  << t.baseline.hter << ")\n";
    std::cout << "report: " << run_dir << "/eval.csv\n";
    return 0;
}

int cmd_report(const CommonArgs& a) {
    const auto cfg = resolve_config(a);
    const std::string run_dir = cfg.resolved_output_dir();
    std::ifstream f(run_dir + "/eval.csv");
    if (f) {
        std::string line;
        while (std::getline(f, line)) std::cout << line << "\n";
    }
    const auto missing = pipeline::missing_artifacts(cfg, run_dir);
    if (missing.empty()) {
        std::cout << "run directory complete: " << run_dir << "\n";
        return 0;
    }
    std::cerr << "incomplete run, missing artifacts:\n";
    for (const auto& m : missing) std::cerr << "  " << m << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cyclically disentangled feature translation for cross-domain anti-spoofing"};
    app.require_subcommand(1);

    CommonArgs a;
    bool fresh = false;
    std::string checkpoint;

    auto* gen = app.add_subcommand("generate-data", "render synthetic domains to PNG folders");
    add_common(gen, a);
    auto* train = app.add_subcommand("train", "stage-1 disentangled translation training");
    add_common(train, a);
    train->add_flag("--fresh", fresh, "ignore existing epoch checkpoints");
    auto* synth = app.add_subcommand("synthesize", "emit pseudo-labeled images from a checkpoint");
    add_common(synth, a);
    synth->add_option("--checkpoint", checkpoint, "bundle checkpoint directory");
    auto* cls = app.add_subcommand("train-classifier",
                                   "stage-2 classifier on pseudo-labeled images (+ baseline)");
    add_common(cls, a);
    cls->add_option("--checkpoint", checkpoint, "bundle checkpoint directory");
    auto* ev = app.add_subcommand("evaluate", "score target test splits, write eval.csv + plots");
    add_common(ev, a);
    ev->add_option("--checkpoint", checkpoint, "bundle checkpoint directory");
    auto* rep = app.add_subcommand("report", "print eval rows and verify run completeness");
    add_common(rep, a);

    CLI11_PARSE(app, argc, argv);
    try {
        if (gen->parsed()) return cmd_generate_data(a);
        if (train->parsed()) return cmd_train(a, fresh);
        if (synth->parsed()) return cmd_synthesize(a, checkpoint);
        if (cls->parsed()) return cmd_train_classifier(a, checkpoint);
        if (ev->parsed()) return cmd_evaluate(a, checkpoint);
        if (rep->parsed()) return cmd_report(a);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
