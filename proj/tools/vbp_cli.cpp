#include <omp.h>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vbp/bench.hpp"
#include "vbp/imaging.hpp"
#include "vbp/inference.hpp"
#include "vbp/lrp.hpp"
#include "vbp/metrics.hpp"
#include "vbp/model_io.hpp"
#include "vbp/oracle_check.hpp"
#include "vbp/visualbackprop.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

vbp::Tensor load_input(const vbp::Model& model, const fs::path& image_path) {
    const vbp::Image img = vbp::load_image(image_path);
    const vbp::Tensor t = vbp::to_input_tensor(img);
    if (t.shape()[0] != model.input_shape[0] || t.shape()[1] != model.input_shape[1] ||
        t.shape()[2] != model.input_shape[2]) {
        std::ostringstream os;
        os << "image " << image_path.string() << " is " << t.shape()[0] << "x" << t.shape()[1]
           << "x" << t.shape()[2] << " (CxHxW), model expects " << model.input_shape[0] << "x"
           << model.input_shape[1] << "x" << model.input_shape[2];
        throw vbp::Error(os.str());
    }
    return t;
}

vbp::Image mask_to_image(const vbp::Tensor& mask) {
    vbp::Image img;
    img.height = mask.shape()[0];
    img.width = mask.shape()[1];
    img.channels = 1;
    img.pixels.resize(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        img.pixels[i] = static_cast<std::uint8_t>(
            std::min(255.0, std::floor(255.0 * mask[i] + 0.5)));
    return img;
}

vbp::Tensor compute_mask(const vbp::Model& model, const vbp::Tensor& input,
                         const std::string& method, float epsilon, int output_index) {
    if (method == "vbp") return vbp::visualbackprop(model, input).values;
    if (method == "lrp") {
        vbp::LrpConfig cfg;
        cfg.epsilon = epsilon;
        cfg.output_index = output_index;
        return vbp::lrp_relevance(model, input, cfg).mask.values;
    }
    throw vbp::Error("unknown method: " + method);
}

json optional_metric(std::optional<double> v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CNN inference and saliency visualization engine"};
    app.require_subcommand(1);

    // preset
    auto* cmd_preset = app.add_subcommand("preset", "generate a preset model on disk");
    std::string preset_name;
    std::uint64_t preset_seed = 0;
    std::string preset_out;
    cmd_preset->add_option("name", preset_name, "netsvf | nethvf | gtsdb | tiny")->required();
    cmd_preset->add_option("--seed", preset_seed, "weight seed");
    cmd_preset->add_option("--out", preset_out, "output directory")->required();

    // infer
    auto* cmd_infer = app.add_subcommand("infer", "run a forward pass, print outputs");
    std::string infer_model, infer_image;
    cmd_infer->add_option("model", infer_model, "model manifest path")->required();
    cmd_infer->add_option("image", infer_image, "input image (P5/P6 netpbm)")->required();

    // visualize
    auto* cmd_vis = app.add_subcommand("visualize", "write a saliency mask (and overlay)");
    std::string vis_model, vis_image, vis_method = "vbp", vis_out, vis_overlay;
    float vis_epsilon = 100.0f;
    int vis_output_index = -1;
    cmd_vis->add_option("model", vis_model)->required();
    cmd_vis->add_option("image", vis_image)->required();
    cmd_vis->add_option("--method", vis_method, "vbp | lrp");
    cmd_vis->add_option("--out", vis_out, "mask output (P5)")->required();
    cmd_vis->add_option("--overlay", vis_overlay, "red overlay output (P6)");
    cmd_vis->add_option("--epsilon", vis_epsilon, "lrp stabilizer");
    cmd_vis->add_option("--output-index", vis_output_index, "lrp output neuron (-1: argmax)");

    // compare
    auto* cmd_cmp = app.add_subcommand("compare", "similarity metrics between vbp and lrp masks");
    std::string cmp_model, cmp_image;
    float cmp_epsilon = 100.0f;
    cmd_cmp->add_option("model", cmp_model)->required();
    cmd_cmp->add_option("image", cmp_image)->required();
    cmd_cmp->add_option("--epsilon", cmp_epsilon, "lrp stabilizer");

    // bench
    auto* cmd_bench = app.add_subcommand("bench", "time mask computation, report JSON");
    std::string bench_model, bench_method = "vbp";
    int bench_runs = 10, bench_warmup = 2, bench_threads = omp_get_max_threads();
    cmd_bench->add_option("model", bench_model)->required();
    cmd_bench->add_option("--method", bench_method, "vbp | lrp");
    cmd_bench->add_option("--runs", bench_runs)->check(CLI::PositiveNumber);
    cmd_bench->add_option("--warmup", bench_warmup);
    cmd_bench->add_option("--threads", bench_threads)->check(CLI::PositiveNumber);

    // oracle-check
    auto* cmd_oracle = app.add_subcommand("oracle-check", "randomized flow-oracle verification");
    std::uint64_t oracle_seed = 1;
    int oracle_trials = 20;
    std::vector<int> oracle_max_size = {6, 6};
    cmd_oracle->add_option("--seed", oracle_seed);
    cmd_oracle->add_option("--trials", oracle_trials)->check(CLI::PositiveNumber);
    cmd_oracle->add_option("--max-size", oracle_max_size, "max input H W")->expected(2);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_bench) {
            omp_set_num_threads(bench_threads);
        } else {
            omp_set_num_threads(1);  // reproducible by default
        }

        if (*cmd_preset) {
            const vbp::Model m = vbp::preset(preset_name, preset_seed);
            fs::create_directories(preset_out);
            vbp::save_model(m, fs::path(preset_out) / "manifest.json");
        } else if (*cmd_infer) {
            const vbp::Model m = vbp::load_model(infer_model);
            const vbp::Tensor input = load_input(m, infer_image);
            const vbp::ForwardResult r = vbp::forward(m, input);
            std::cout << std::fixed << std::setprecision(6);
            for (float v : r.output) std::cout << v << "\n";
        } else if (*cmd_vis) {
            const vbp::Model m = vbp::load_model(vis_model);
            const vbp::Image img = vbp::load_image(vis_image);
            const vbp::Tensor input = load_input(m, vis_image);
            const vbp::Tensor mask = compute_mask(m, input, vis_method, vis_epsilon,
                                                  vis_output_index);
            vbp::save_image(mask_to_image(mask), vis_out);
            if (!vis_overlay.empty()) {
                if (img.channels != 1)
                    throw vbp::Error("--overlay requires a grayscale (P5) input image");
                vbp::save_image(vbp::overlay_red(img, mask), vis_overlay);
            }
        } else if (*cmd_cmp) {
            const vbp::Model m = vbp::load_model(cmp_model);
            const vbp::Tensor input = load_input(m, cmp_image);
            const vbp::Tensor a = compute_mask(m, input, "vbp", cmp_epsilon, -1);
            const vbp::Tensor b = compute_mask(m, input, "lrp", cmp_epsilon, -1);
            json j;
            j["pearson"] = optional_metric(vbp::pearson(a, b));
            j["spearman"] = optional_metric(vbp::spearman(a, b));
            j["jaccard_top5"] = vbp::jaccard_top5(a, b);
            std::cout << j.dump(2) << "\n";
        } else if (*cmd_bench) {
            const vbp::Model m = vbp::load_model(bench_model);
            vbp::Tensor input({m.input_shape[0], m.input_shape[1], m.input_shape[2]});
            for (std::size_t i = 0; i < input.size(); ++i)
                input[i] = static_cast<float>(vbp::seeded_unit(42, 0, i));
            const vbp::BenchReport r = vbp::run_bench(
                m, input, bench_method, bench_runs, bench_warmup, bench_threads,
                fs::path(bench_model).parent_path().filename().string());
            std::cout << vbp::bench_report_json(r) << "\n";
        } else if (*cmd_oracle) {
            const vbp::OracleCheckResult r = vbp::run_oracle_check(
                oracle_seed, oracle_trials, oracle_max_size[0], oracle_max_size[1]);
            json j;
            j["passed"] = r.passed;
            j["failed"] = r.failed;
            j["inconclusive"] = r.inconclusive;
            json trials = json::array();
            for (const auto& t : r.trials) {
                json tj;
                tj["index"] = t.index;
                tj["status"] = t.status;
                if (!t.detail.empty()) tj["detail"] = t.detail;
                tj["matched_variant"] = t.report.matched_variant;
                tj["ratio_mean"] = t.report.ratio_mean;
                tj["ratio_spread"] = t.report.ratio_spread;
                tj["pixels_evaluated"] = t.report.pixels_evaluated;
                trials.push_back(std::move(tj));
            }
            j["trials"] = std::move(trials);
            std::cout << j.dump(2) << "\n";
            return r.ok() ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
