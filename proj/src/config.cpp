#include "cdftn/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

namespace cdftn {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
    shape.validate();
    stage1.validate();
    stage2.validate();
    topology().validate();
    if (data.samples_per_domain < 2)
        throw std::invalid_argument("config: samples_per_domain must be >= 2");
    if (!(data.live_fraction > 0.0 && data.live_fraction < 1.0))
        throw std::invalid_argument("config: live_fraction must be in (0,1)");
    if (!(data.test_fraction >= 0.0 && data.test_fraction < 1.0))
        throw std::invalid_argument("config: test_fraction must be in [0,1)");
    if (synthesis_multiplicity < 1)
        throw std::invalid_argument("config: synthesis_multiplicity must be >= 1");
    std::set<int> ids{source.domain_id};
    for (const auto& t : targets)
        if (!ids.insert(t.domain_id).second)
            throw std::invalid_argument("config: duplicate domain id " +
                                        std::to_string(t.domain_id));
}

trainer::Topology ExperimentConfig::topology() const {
    trainer::Topology t;
    t.mode = mode;
    t.source = source.domain_id;
    for (const auto& tc : targets) t.targets.push_back(tc.domain_id);
    return t;
}

std::string ExperimentConfig::resolved_output_dir() const {
    const char* root = std::getenv("CDFTN_OUTPUT_ROOT");
    if (root && root[0] != '\0' && fs::path(output_dir).is_relative())
        return (fs::path(root) / output_dir).string();
    return output_dir;
}

namespace {

json domain_to_json(const DomainConfig& d) {
    json j;
    j["domain_id"] = d.domain_id;
    if (d.synthetic) {
        j["style_seed"] = d.style_seed;
    } else {
        j["path"] = d.path;
    }
    return j;
}

DomainConfig domain_from_json(const json& j) {
    DomainConfig d;
    d.domain_id = j.at("domain_id");
    if (j.contains("path")) {
        d.synthetic = false;
        d.path = j.at("path");
    } else {
        d.synthetic = true;
        d.style_seed = j.at("style_seed");
    }
    return d;
}

}  // namespace

json ExperimentConfig::to_json() const {
    json j;
    j["mode"] = trainer::mode_name(mode);
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    j["synthesis_multiplicity"] = synthesis_multiplicity;
    j["source"] = domain_to_json(source);
    j["targets"] = json::array();
    for (const auto& t : targets) j["targets"].push_back(domain_to_json(t));
    j["shape"] = {{"H", shape.H}, {"W", shape.W}, {"c_L", shape.c_L}, {"c_C", shape.c_C},
                  {"k", shape.k}};
    j["sizes"] = {{"enc_width", sizes.enc_width},   {"gen_width", sizes.gen_width},
                  {"disc_width", sizes.disc_width}, {"cls_width", sizes.cls_width},
                  {"embed_dim", sizes.embed_dim},   {"gen_res_blocks", sizes.gen_res_blocks}};
    j["data"] = {{"samples_per_domain", data.samples_per_domain},
                 {"live_fraction", data.live_fraction},
                 {"test_fraction", data.test_fraction}};
    j["stage1"] = {{"epochs", stage1.epochs},
                   {"batch_size", stage1.batch_size},
                   {"learning_rate", stage1.learning_rate},
                   {"betas", {stage1.beta1, stage1.beta2}},
                   {"lambdas", {stage1.weights.lambda1, stage1.weights.lambda2,
                                stage1.weights.lambda3, stage1.weights.lambda4,
                                stage1.weights.lambda5}},
                   {"seed", stage1.seed},
                   {"saturating_generator_loss", stage1.saturating_generator_loss}};
    j["stage2"] = {{"epochs", stage2.epochs},
                   {"batch_size", stage2.batch_size},
                   {"learning_rate", stage2.learning_rate},
                   {"betas", {stage2.beta1, stage2.beta2}},
                   {"alphas", {stage2.weights.alpha1, stage2.weights.alpha2,
                               stage2.weights.alpha3}},
                   {"variant", stage2.variant == nets::ClassifierVariant::R ? "R" : "L"},
                   {"triplet_margin", stage2.triplet_margin},
                   {"seed", stage2.seed}};
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    if (j.contains("mode")) c.mode = trainer::mode_from_name(j.at("mode"));
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir");
    if (j.contains("synthesis_multiplicity"))
        c.synthesis_multiplicity = j.at("synthesis_multiplicity");
    if (j.contains("source")) c.source = domain_from_json(j.at("source"));
    if (j.contains("targets")) {
        c.targets.clear();
        for (const auto& t : j.at("targets")) c.targets.push_back(domain_from_json(t));
    }
    if (j.contains("shape")) {
        const auto& s = j.at("shape");
        if (s.contains("H")) c.shape.H = s.at("H");
        if (s.contains("W")) c.shape.W = s.at("W");
        if (s.contains("c_L")) c.shape.c_L = s.at("c_L");
        if (s.contains("c_C")) c.shape.c_C = s.at("c_C");
        if (s.contains("k")) c.shape.k = s.at("k");
    }
    if (j.contains("sizes")) {
        const auto& s = j.at("sizes");
        if (s.contains("enc_width")) c.sizes.enc_width = s.at("enc_width");
        if (s.contains("gen_width")) c.sizes.gen_width = s.at("gen_width");
        if (s.contains("disc_width")) c.sizes.disc_width = s.at("disc_width");
        if (s.contains("cls_width")) c.sizes.cls_width = s.at("cls_width");
        if (s.contains("embed_dim")) c.sizes.embed_dim = s.at("embed_dim");
        if (s.contains("gen_res_blocks")) c.sizes.gen_res_blocks = s.at("gen_res_blocks");
    }
    if (j.contains("data")) {
        const auto& s = j.at("data");
        if (s.contains("samples_per_domain")) c.data.samples_per_domain = s.at("samples_per_domain");
        if (s.contains("live_fraction")) c.data.live_fraction = s.at("live_fraction");
        if (s.contains("test_fraction")) c.data.test_fraction = s.at("test_fraction");
    }
    if (j.contains("stage1")) {
        const auto& s = j.at("stage1");
        if (s.contains("epochs")) c.stage1.epochs = s.at("epochs");
        if (s.contains("batch_size")) c.stage1.batch_size = s.at("batch_size");
        if (s.contains("learning_rate")) c.stage1.learning_rate = s.at("learning_rate");
        if (s.contains("betas")) {
            c.stage1.beta1 = s.at("betas").at(0);
            c.stage1.beta2 = s.at("betas").at(1);
        }
        if (s.contains("lambdas")) {
            const auto& l = s.at("lambdas");
            c.stage1.weights.lambda1 = l.at(0);
            c.stage1.weights.lambda2 = l.at(1);
            c.stage1.weights.lambda3 = l.at(2);
            c.stage1.weights.lambda4 = l.at(3);
            c.stage1.weights.lambda5 = l.at(4);
        }
        if (s.contains("saturating_generator_loss"))
            c.stage1.saturating_generator_loss = s.at("saturating_generator_loss");
        if (s.contains("seed")) c.stage1.seed = s.at("seed").get<uint64_t>();
    }
    if (j.contains("stage2")) {
        const auto& s = j.at("stage2");
        if (s.contains("epochs")) c.stage2.epochs = s.at("epochs");
        if (s.contains("batch_size")) c.stage2.batch_size = s.at("batch_size");
        if (s.contains("learning_rate")) c.stage2.learning_rate = s.at("learning_rate");
        if (s.contains("betas")) {
            c.stage2.beta1 = s.at("betas").at(0);
            c.stage2.beta2 = s.at("betas").at(1);
        }
        if (s.contains("alphas")) {
            const auto& a = s.at("alphas");
            c.stage2.weights.alpha1 = a.at(0);
            c.stage2.weights.alpha2 = a.at(1);
            c.stage2.weights.alpha3 = a.at(2);
        }
        if (s.contains("variant"))
            c.stage2.variant = s.at("variant") == "L" ? nets::ClassifierVariant::L
                                                      : nets::ClassifierVariant::R;
        if (s.contains("triplet_margin")) c.stage2.triplet_margin = s.at("triplet_margin");
        if (s.contains("seed")) c.stage2.seed = s.at("seed").get<uint64_t>();
    }
    // stage seeds derive from the master seed unless given explicitly
    if (!j.contains("stage1") || !j.at("stage1").contains("seed"))
        c.stage1.seed = mix_seed(c.seed, 0x57a6e1);
    if (!j.contains("stage2") || !j.at("stage2").contains("seed"))
        c.stage2.seed = mix_seed(c.seed, 0x57a6e2);
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    json j;
    f >> j;
    return from_json(j);
}

void ExperimentConfig::save(const std::string& path) const {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("config: cannot write " + path);
    f << to_json().dump(2) << "\n";
}

}  // namespace cdftn
