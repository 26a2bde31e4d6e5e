#include "cdftn/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cdftn/eval.hpp"
#include "cdftn/plot.hpp"
#include "cdftn/rng.hpp"

namespace cdftn::pipeline {

namespace fs = std::filesystem;

namespace {

synthdomain::DatasetHandle build_domain_dataset(const ExperimentConfig& cfg,
                                                const DomainConfig& dc) {
    if (dc.synthetic) {
        const auto spec = synthdomain::make_domain_spec(dc.domain_id, dc.style_seed);
        const int64_t base_seed = static_cast<int64_t>(
            mix_seed(cfg.seed, 0xDA7A, static_cast<uint64_t>(dc.domain_id)) & 0x7fffffff);
        return synthdomain::generate_dataset(spec, cfg.data.samples_per_domain,
                                             cfg.data.live_fraction, base_seed, cfg.shape);
    }
    auto d = synthdomain::ingest_folder(dc.path, cfg.shape);
    d.assign_domain(dc.domain_id);
    return d;
}

eval::EvalReport report_for(const nets::ImageClassifier& m,
                            const synthdomain::DatasetHandle& test_set) {
    eval::ScoreSet ss;
    ss.scores = trainer::score_images(m, test_set);
    for (const auto& s : test_set.samples) ss.labels.push_back(s.label);
    return eval::evaluate_scores(ss);
}

// parse a loss-history CSV back into plottable series
bool read_loss_csv(const std::string& path, std::vector<std::string>& names,
                   std::vector<std::vector<double>>& series) {
    std::ifstream f(path);
    if (!f) return false;
    std::string line;
    if (!std::getline(f, line)) return false;
    names.clear();
    series.clear();
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) names.push_back(cell);
    if (names.size() < 2 || names.front() != "step") return false;
    names.erase(names.begin());
    series.resize(names.size());
    while (std::getline(f, line)) {
        std::stringstream ls(line);
        size_t col = 0;
        while (std::getline(ls, cell, ',')) {
            if (col > 0 && col <= series.size()) series[col - 1].push_back(std::stod(cell));
            ++col;
        }
    }
    return !series.empty() && !series.front().empty();
}

void plot_csv_losses(const std::string& csv_path, const std::string& png_path,
                     const std::string& title) {
    std::vector<std::string> names;
    std::vector<std::vector<double>> series;
    if (read_loss_csv(csv_path, names, series)) plot::line_chart(png_path, title, names, series);
}

}  // namespace

std::vector<DomainData> prepare_domains(const ExperimentConfig& cfg) {
    std::vector<DomainData> out;
    std::vector<DomainConfig> all{cfg.source};
    all.insert(all.end(), cfg.targets.begin(), cfg.targets.end());
    for (const auto& dc : all) {
        DomainData dd;
        dd.domain_id = dc.domain_id;
        auto full = build_domain_dataset(cfg, dc);
        auto [train, test] = synthdomain::split_train_test(
            full, cfg.data.test_fraction,
            mix_seed(cfg.seed, 0x5b117, static_cast<uint64_t>(dc.domain_id)));
        dd.train = std::move(train);
        dd.test = std::move(test);
        out.push_back(std::move(dd));
    }
    return out;
}

PreparedData prepare(const ExperimentConfig& cfg) {
    PreparedData p;
    p.domains = prepare_domains(cfg);
    p.source_train = synthdomain::resample_balance(p.domains[0].train, mix_seed(cfg.seed, 0xBA1, 0));
    if (cfg.mode == trainer::Mode::SS2MT) {
        for (size_t t = 0; t < cfg.targets.size(); ++t) {
            p.views.emplace_back(p.domains[t + 1].train);
            p.slot_ids.push_back(cfg.targets[t].domain_id);
        }
    } else {
        // SS2ST keeps its single target; SS2BT pools every target into one
        trainer::UnlabeledView pooled;
        for (size_t t = 0; t < cfg.targets.size(); ++t) pooled.append(p.domains[t + 1].train);
        p.views.push_back(std::move(pooled));
        p.slot_ids.push_back(cfg.mode == trainer::Mode::SS2BT && cfg.targets.size() > 1
                                 ? -2
                                 : cfg.targets[0].domain_id);
    }
    return p;
}

int resume_from_checkpoints(const std::string& run_dir, nets::ModelBundle& bundle,
                            Adam& optimizer, int epochs) {
    for (int e = epochs - 1; e >= 0; --e) {
        const std::string ckpt = run_dir + "/ckpt/epoch_" + std::to_string(e);
        if (fs::exists(ckpt + "/manifest.json")) {
            bundle.load_params(ckpt);
            optimizer.load_state(ckpt + "/optimizer.bin");
            return e + 1;
        }
    }
    return 0;
}

PipelineResult write_eval_and_plots(const ExperimentConfig& cfg, nets::ModelBundle& bundle,
                                    nets::ImageClassifier& m0, const PreparedData& data,
                                    const std::string& run_dir) {
    fs::create_directories(run_dir + "/plots");

    PipelineResult result;
    result.run_dir = run_dir;
    const std::string model_name =
        cfg.stage2.variant == nets::ClassifierVariant::R ? "CDFTN-R" : "CDFTN-L";
    std::ofstream ecsv(run_dir + "/eval.csv");
    ecsv << eval::report_csv_header() << "\n";
    for (size_t t = 0; t < cfg.targets.size(); ++t) {
        TargetReport rep;
        rep.target_id = cfg.targets[t].domain_id;
        rep.model = report_for(bundle.classifier_m(), data.domains[t + 1].test);
        rep.baseline = report_for(m0, data.domains[t + 1].test);
        ecsv << eval::report_csv_row(trainer::mode_name(cfg.mode),
                                     std::to_string(cfg.source.domain_id),
                                     std::to_string(rep.target_id), model_name, rep.model)
             << "\n";
        ecsv << eval::report_csv_row(trainer::mode_name(cfg.mode),
                                     std::to_string(cfg.source.domain_id),
                                     std::to_string(rep.target_id), "baseline", rep.baseline)
             << "\n";
        result.mean_auc_model += rep.model.auc;
        result.mean_auc_baseline += rep.baseline.auc;
        result.targets.push_back(rep);
    }
    ecsv.close();
    result.mean_auc_model /= static_cast<double>(result.targets.size());
    result.mean_auc_baseline /= static_cast<double>(result.targets.size());

    plot_csv_losses(run_dir + "/stage1_losses.csv", run_dir + "/plots/stage1_losses.png",
                    "stage 1 losses");
    plot_csv_losses(run_dir + "/stage2_losses.csv", run_dir + "/plots/stage2_losses.png",
                    "stage 2 losses");

    // liveness-latent scatter before and after translation (first target)
    {
        const int64_t cap = 150;
        std::vector<Tensor> src_imgs, tgt_imgs;
        std::vector<int> src_labels, tgt_labels;
        for (const auto& s : data.domains[0].test.samples) {
            if (static_cast<int64_t>(src_imgs.size()) >= cap) break;
            src_imgs.push_back(s.image);
            src_labels.push_back(s.label);
        }
        for (const auto& s : data.domains[1].test.samples) {
            if (static_cast<int64_t>(tgt_imgs.size()) >= cap) break;
            tgt_imgs.push_back(s.image);
            tgt_labels.push_back(s.label);
        }
        auto scatter = [&](const Tensor& a, const Tensor& b, const std::string& path,
                           const std::string& title) {
            const int64_t na = a.dim(0), nb = b.dim(0), d = a.dim(1);
            Tensor all({na + nb, d});
            std::copy_n(a.data(), na * d, all.data());
            std::copy_n(b.data(), nb * d, all.data() + na * d);
            auto pts = eval::project_2d(all);
            std::vector<int> colors, markers;
            for (int64_t i = 0; i < na; ++i) {
                colors.push_back(0);
                markers.push_back(src_labels[static_cast<size_t>(i)] == 1 ? 0 : 1);
            }
            for (int64_t i = 0; i < nb; ++i) {
                colors.push_back(1);
                markers.push_back(tgt_labels[static_cast<size_t>(i)] == 1 ? 0 : 1);
            }
            plot::scatter_2d(path, title, pts, colors, markers);
        };
        Tensor z_src = trainer::liveness_latents(bundle, 0, src_imgs);
        Tensor z_tgt = trainer::liveness_latents(bundle, 1, tgt_imgs);
        scatter(z_src, z_tgt, run_dir + "/plots/latents_before.png",
                "liveness features before translation");
        // translate the source test images into target style, then re-encode
        std::vector<Tensor> translated;
        for (size_t j = 0; j < src_imgs.size(); ++j) {
            Graph g;
            Tensor x({1, src_imgs[j].dim(0), src_imgs[j].dim(1), src_imgs[j].dim(2)});
            std::copy_n(src_imgs[j].data(), src_imgs[j].numel(), x.data());
            Tensor xc({1, 3, cfg.shape.H, cfg.shape.W});
            const auto& content = tgt_imgs[j % tgt_imgs.size()];
            std::copy_n(content.data(), content.numel(), xc.data());
            Var zl = bundle.enc_liveness(0).encode(g, g.input(x));
            Var zc = bundle.enc_content(1).encode(g, g.input(xc));
            Var xh = bundle.generator(1).generate(g, zl, zc);
            Tensor img({3, cfg.shape.H, cfg.shape.W});
            std::copy_n(xh->value.data(), img.numel(), img.data());
            translated.push_back(std::move(img));
        }
        Tensor z_trans = trainer::liveness_latents(bundle, 1, translated);
        scatter(z_trans, z_tgt, run_dir + "/plots/latents_after.png",
                "liveness features after translation");
    }

    // pseudo-image grid: source donors / synthesized / target content
    {
        const int cols = 8;
        const auto& view = data.views[0];
        const int64_t n_grid = std::min<int64_t>(cols, data.source_train.size());
        std::vector<int64_t> sidx, cidx;
        for (int64_t j = 0; j < n_grid; ++j) {
            sidx.push_back(j);
            cidx.push_back((j * cfg.synthesis_multiplicity) % view.size());
        }
        Graph g;
        Var zl = bundle.enc_liveness(0).encode(
            g, g.input(synthdomain::batch_images(data.source_train, sidx)));
        Var zc = bundle.enc_content(1).encode(g, g.input(view.batch(cidx)));
        Var xh = bundle.generator(1).generate(g, zl, zc);
        std::vector<Tensor> grid;
        for (int64_t j = 0; j < n_grid; ++j)
            grid.push_back(data.source_train.samples[static_cast<size_t>(j)].image);
        for (int64_t j = 0; j < n_grid; ++j) {
            Tensor img({3, cfg.shape.H, cfg.shape.W});
            std::copy_n(xh->value.data() + j * img.numel(), img.numel(), img.data());
            grid.push_back(std::move(img));
        }
        for (int64_t j = 0; j < n_grid; ++j) grid.push_back(view.image(cidx[static_cast<size_t>(j)]));
        plot::image_grid(run_dir + "/plots/pseudo_grid.png", grid, cols);
    }

    return result;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string run_dir = cfg.resolved_output_dir();
    fs::create_directories(run_dir);
    cfg.save(run_dir + "/config.json");

    auto data = prepare(cfg);
    const auto topo = cfg.topology();
    nets::ModelBundle bundle(cfg.shape, cfg.sizes, topo.ring_size(), cfg.stage2.variant,
                             mix_seed(cfg.seed, 0xB0D1));
    trainer::Stage1Trainer tr(bundle, cfg.stage1, topo);
    const int start_epoch =
        resume_from_checkpoints(run_dir, bundle, tr.optimizer(), cfg.stage1.epochs);
    tr.train(data.source_train, data.views, run_dir, start_epoch);

    // stage 2: freeze, synthesize, train M on pseudo-labeled images
    auto pseudo = trainer::synthesize_pseudo(bundle, data.source_train, data.views, data.slot_ids,
                                             cfg.synthesis_multiplicity);
    trainer::PseudoLabeledSet pseudo_bal;
    pseudo_bal.data = synthdomain::resample_balance(pseudo.data, mix_seed(cfg.seed, 0xBA1, 1));
    pseudo_bal.provenance = pseudo.provenance;
    trainer::train_stage2(bundle.classifier_m(), pseudo_bal, cfg.stage2,
                          run_dir + "/stage2_losses.csv");

    // source-only baseline M0: same architecture and training protocol, the
    // only difference is the training data
    Rng m0_rng(mix_seed(cfg.seed, 0xB0D1, 0xBA5E));
    nets::ImageClassifier m0("cls_M0", cfg.shape, cfg.sizes, cfg.stage2.variant, m0_rng);
    trainer::train_classifier(m0, data.source_train, cfg.stage2,
                              run_dir + "/baseline_losses.csv");

    bundle.save(run_dir + "/ckpt/final");
    nets::save_image_classifier(run_dir + "/ckpt/baseline", m0, cfg.shape, cfg.sizes);

    return write_eval_and_plots(cfg, bundle, m0, data, run_dir);
}

std::vector<std::string> run_manifest(const ExperimentConfig& cfg) {
    (void)cfg;
    return {"config.json",
            "stage1_losses.csv",
            "stage2_losses.csv",
            "baseline_losses.csv",
            "eval.csv",
            "ckpt/final/manifest.json",
            "ckpt/baseline/manifest.json",
            "plots/stage1_losses.png",
            "plots/stage2_losses.png",
            "plots/latents_before.png",
            "plots/latents_after.png",
            "plots/pseudo_grid.png"};
}

std::vector<std::string> missing_artifacts(const ExperimentConfig& cfg, const std::string& dir) {
    std::vector<std::string> missing;
    for (const auto& rel : run_manifest(cfg))
        if (!fs::exists(fs::path(dir) / rel)) missing.push_back(rel);
    return missing;
}

}  // namespace cdftn::pipeline
