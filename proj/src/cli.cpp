#include "fame/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fame/diffusion.hpp"
#include "fame/error.hpp"
#include "fame/ften.hpp"
#include "fame/metrics.hpp"

namespace fame {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kArtifactVersion = "1.0.0";

json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::io, "cannot open: " + path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::config, "bad JSON in " + path + ": " + e.what());
    }
    return j;
}

std::string digest_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::io, "cannot digest: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    const std::string bytes = buf.str();
    std::ostringstream hex;
    hex << std::hex << std::setfill('0') << std::setw(16) << fnv1a64(bytes);
    return hex.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorKind::io, "cannot open for write: " + path);
    f << text;
}

// Flag-over-file resolution for the editing pipeline. Prompt spec values
// seed the fusion parameters; config JSON overrides; CLI flags override both.
struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps;
    std::optional<double> alpha;
    std::optional<double> lambda;
    std::optional<double> mu;
    std::optional<double> tau;
    std::optional<double> rho;
    std::optional<double> guidance;
};

struct ResolvedRun {
    EditRequest request;
    std::string video_path;
    std::string region_path;
    std::string prompts_path;
};

RegionMap load_region_map(const std::string& path) {
    RegionMap rm = region_map_from_tensor(read_ften(path));
    const std::string sidecar = path + ".json";
    if (fs::exists(sidecar)) {
        const json j = load_json(sidecar);
        if (j.contains("labels") && j["labels"].get<int>() != rm.label_count()) {
            throw Error(ErrorKind::config, "region map sidecar label count mismatch");
        }
    }
    return rm;
}

EditRequest resolve_request(const json& cfg, const json& prompts, const CliOverrides& ovr) {
    EditRequest req;
    req.prompt_ref = prompts.value("ref", "");
    req.prompt_tar = prompts.value("tar", "");
    req.prompt_fair = prompts.value("fair", "");
    req.fusion.theta_p = prompts.value("theta_p", 0.35);
    req.fusion.lambda = prompts.value("lambda", 0.5);
    req.fusion.alpha = prompts.value("alpha", 0.5);
    if (prompts.contains("overrides")) {
        req.fusion.overrides = prompts["overrides"].get<std::vector<std::size_t>>();
    }

    req.steps = cfg.value("steps", std::size_t{50});
    req.schedule_steps = cfg.value("schedule_steps", std::size_t{50});
    req.beta_start = cfg.value("beta_start", 1e-4);
    req.beta_end = cfg.value("beta_end", 2e-2);
    req.guidance_w = cfg.value("guidance", 1.0);
    req.rho = cfg.value("rho", 0.5);
    req.seed = cfg.value("seed", std::uint64_t{13});
    req.text_dim = cfg.value("text_dim", std::size_t{0});
    req.self_cfg.lambda = cfg.value("lambda", 0.5);
    req.self_cfg.mu = cfg.value("mu", 0.2);
    req.self_cfg.tau = cfg.value("tau", 1.0);
    req.cross_cfg.lambda = cfg.value("cross_lambda", req.self_cfg.lambda);
    if (cfg.contains("theta_p")) req.fusion.theta_p = cfg["theta_p"].get<double>();
    if (cfg.contains("alpha")) req.fusion.alpha = cfg["alpha"].get<double>();
    if (cfg.contains("fuse_lambda")) req.fusion.lambda = cfg["fuse_lambda"].get<double>();

    if (ovr.seed) req.seed = *ovr.seed;
    if (ovr.steps) req.steps = *ovr.steps;
    if (ovr.alpha) req.fusion.alpha = *ovr.alpha;
    if (ovr.lambda) {
        req.self_cfg.lambda = *ovr.lambda;
        req.cross_cfg.lambda = *ovr.lambda;
    }
    if (ovr.mu) req.self_cfg.mu = *ovr.mu;
    if (ovr.tau) req.self_cfg.tau = *ovr.tau;
    if (ovr.rho) req.rho = *ovr.rho;
    if (ovr.guidance) req.guidance_w = *ovr.guidance;
    return req;
}

ResolvedRun resolve_run(const std::string& video, const std::string& prompts_path,
                        const std::string& config_path, const CliOverrides& ovr) {
    const json cfg = config_path.empty() ? json::object() : load_json(config_path);
    const std::string prompts_file =
        !prompts_path.empty() ? prompts_path : cfg.value("prompts", std::string{});
    if (prompts_file.empty()) throw Error(ErrorKind::config, "no prompt spec given");
    const json prompts = load_json(prompts_file);

    ResolvedRun run;
    run.request = resolve_request(cfg, prompts, ovr);
    run.prompts_path = prompts_file;
    run.video_path = !video.empty() ? video : cfg.value("video", std::string{});
    if (run.video_path.empty()) throw Error(ErrorKind::config, "no video given");
    run.region_path = cfg.value("region_map", std::string{});
    return run;
}

json request_to_json(const EditRequest& r) {
    json j;
    j["ref"] = r.prompt_ref;
    j["tar"] = r.prompt_tar;
    j["fair"] = r.prompt_fair;
    j["guidance"] = r.guidance_w;
    j["rho"] = r.rho;
    j["seed"] = r.seed;
    j["steps"] = r.steps;
    j["schedule_steps"] = r.schedule_steps;
    j["beta_start"] = r.beta_start;
    j["beta_end"] = r.beta_end;
    j["text_dim"] = r.text_dim;
    j["alpha"] = r.fusion.alpha;
    j["fuse_lambda"] = r.fusion.lambda;
    j["theta_p"] = r.fusion.theta_p;
    j["lambda"] = r.self_cfg.lambda;
    j["mu"] = r.self_cfg.mu;
    j["tau"] = r.self_cfg.tau;
    j["cross_lambda"] = r.cross_cfg.lambda;
    if (r.fusion.overrides) j["overrides"] = *r.fusion.overrides;
    return j;
}

void write_manifest(const std::string& out_dir, const ResolvedRun& run,
                    const std::vector<std::string>& outputs) {
    json m;
    m["artifact_version"] = kArtifactVersion;
    m["video"] = run.video_path;
    m["prompts"] = run.prompts_path;
    m["region_map"] = run.region_path;
    m["seed"] = run.request.seed;
    m["config"] = request_to_json(run.request);
    json digests = json::object();
    for (const auto& p : outputs) {
        digests[fs::path(p).filename().string()] = digest_file(p);
    }
    m["digests"] = digests;
    write_text(out_dir + "/manifest.json", m.dump(2));
}

RegionMap default_regions(const Tensor& z0) {
    return synth_region_map(z0.dim(0), z0.dim(1), RegionLayout::halves, 0);
}

int cmd_invert(const ResolvedRun& run0, const std::string& out_dir) {
    ResolvedRun run = run0;
    const Tensor z0 = read_ften(run.video_path);
    run.request.regions =
        run.region_path.empty() ? default_regions(z0) : load_region_map(run.region_path);
    const InvertResult result = invert(z0, run.request);

    fs::create_directories(out_dir + "/trajectory");
    fs::create_directories(out_dir + "/cache");
    std::vector<std::string> outputs;
    for (std::size_t t = 0; t < result.trajectory.size(); ++t) {
        const std::string p = out_dir + "/trajectory/z_" + std::to_string(t) + ".ften";
        write_ften(p, result.trajectory[t]);
        outputs.push_back(p);
    }
    result.cache.save(out_dir + "/cache");
    write_manifest(out_dir, run, outputs);
    return 0;
}

int cmd_edit(const ResolvedRun& run0, const std::string& out_dir) {
    ResolvedRun run = run0;
    const Tensor z0 = read_ften(run.video_path);
    run.request.regions =
        run.region_path.empty() ? default_regions(z0) : load_region_map(run.region_path);
    const EditResult result = edit(z0, run.request);

    fs::create_directories(out_dir + "/cache");
    const std::string latent_path = out_dir + "/edited.ften";
    const std::string frames_path = out_dir + "/frames.ften";
    write_ften(latent_path, result.latent);
    write_ften(frames_path, decode_frames(result.latent, run.request.seed));
    result.cache.save(out_dir + "/cache");
    write_manifest(out_dir, run, {latent_path, frames_path});
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& out_dir,
             const CliOverrides& ovr) {
    const json cfg = load_json(config_path);
    const std::string video = cfg.value("video", std::string{});
    if (video.empty()) throw Error(ErrorKind::config, "eval: no video given");
    const Tensor z0 = read_ften(video);

    const auto seeds = cfg.value("seeds", std::vector<std::uint64_t>{});
    if (seeds.empty()) throw Error(ErrorKind::config, "eval: empty trial list");
    if (!cfg.contains("professions") || cfg["professions"].empty()) {
        throw Error(ErrorKind::config, "eval: no professions configured");
    }

    BiasProbe probe = cfg.contains("probe_path")
                          ? BiasProbe{read_ften(cfg["probe_path"].get<std::string>()).data(),
                                      cfg.value("probe_label", std::string{"attribute"})}
                          : BiasProbe::seeded(z0.dim(3),
                                              cfg.value("probe_label", std::string{"attribute"}),
                                              cfg.value("probe_seed", std::uint64_t{99}));
    probe.validate();

    const json edit_cfg = cfg.value("edit", json::object());
    std::vector<FairnessReport> reports;
    for (const auto& prof : cfg["professions"]) {
        EditRequest req = resolve_request(edit_cfg, prof["prompts"], ovr);
        req.regions = edit_cfg.contains("region_map")
                          ? load_region_map(edit_cfg["region_map"].get<std::string>())
                          : default_regions(z0);
        reports.push_back(
            run_trials(z0, req, probe, seeds, prof.value("name", std::string{"unnamed"})));
    }

    fs::create_directories(out_dir);
    json all = json::array();
    for (const auto& r : reports) all.push_back(json::parse(report_to_json(r)));
    write_text(out_dir + "/report.json", all.dump(2));
    write_text(out_dir + "/report.csv", reports_to_csv(reports));
    return 0;
}

struct AblateRow {
    std::string setting;
    double alpha, lambda, mu;
    double alignment, consistency, intra_mass;
};

AblateRow run_ablate_point(const Tensor& z0, const EditRequest& base, const std::string& setting,
                           double alpha, double lambda, double mu) {
    EditRequest req = base;
    req.fusion.alpha = alpha;
    // Cumulative module gating: P = prompt debiasing, S = self modulation,
    // C = cross modulation.
    req.self_cfg.lambda = 0.0;
    req.self_cfg.mu = 0.0;
    req.cross_cfg.lambda = 0.0;
    if (setting.find('S') != std::string::npos) {
        req.self_cfg.lambda = lambda;
        req.self_cfg.mu = mu;
    }
    if (setting.find('C') != std::string::npos) req.cross_cfg.lambda = lambda;

    const EditResult result = edit(z0, req);
    const Tensor frames = decode_frames(result.latent, req.seed);
    const std::size_t d_text = req.text_dim == 0 ? z0.dim(3) : req.text_dim;
    std::uint64_t salt[2] = {req.seed, 1};
    const EmbeddingMatrix emb =
        debias_prompt(tokenize(req.prompt_tar), tokenize(req.prompt_fair), req.fusion, d_text,
                      fnv1a64(salt, sizeof(salt)));
    std::uint64_t psalt[2] = {req.seed, 4};
    const double align = prompt_alignment(frames, emb, fnv1a64(psalt, sizeof(psalt)));
    const double consist = frame_consistency(frames);
    const std::vector<double> masses =
        intra_region_mass(result.cache, build_region_indicator(req.regions));
    double mean_mass = 0.0;
    for (double m : masses) mean_mass += m;
    if (!masses.empty()) mean_mass /= static_cast<double>(masses.size());
    return AblateRow{setting, alpha, lambda, mu, align, consist, mean_mass};
}

int cmd_ablate(const std::string& config_path, const std::string& grid_path,
               const std::string& out_dir, const CliOverrides& ovr, unsigned jobs) {
    const json cfg = load_json(config_path);
    const json grid = grid_path.empty() ? json::object() : load_json(grid_path);

    const std::string video = cfg.value("video", std::string{});
    if (video.empty()) throw Error(ErrorKind::config, "ablate: no video given");
    const Tensor z0 = read_ften(video);
    const std::string prompts_file = cfg.value("prompts", std::string{});
    if (prompts_file.empty()) throw Error(ErrorKind::config, "ablate: no prompt spec given");
    EditRequest base = resolve_request(cfg, load_json(prompts_file), ovr);
    base.regions = cfg.contains("region_map")
                       ? load_region_map(cfg["region_map"].get<std::string>())
                       : default_regions(z0);

    const std::vector<std::string> default_rows = {"+P", "+P +S", "+P +S +C"};
    const auto rows = grid.value("rows", default_rows);
    const auto alphas = grid.value("alpha", std::vector<double>{base.fusion.alpha});
    const auto lambdas = grid.value("lambda", std::vector<double>{base.self_cfg.lambda});
    const auto mus = grid.value("mu", std::vector<double>{base.self_cfg.mu});
    for (const auto& r : rows) {
        if (r != "+P" && r != "+P +S" && r != "+P +S +C") {
            throw Error(ErrorKind::config, "ablate: unknown row tag: " + r);
        }
    }

    struct Point {
        std::string row;
        double alpha, lambda, mu;
    };
    std::vector<Point> points;
    for (const auto& r : rows)
        for (double a : alphas)
            for (double lm : lambdas)
                for (double m : mus) points.push_back({r, a, lm, m});

    if (const char* det = std::getenv("FAME_DETERMINISTIC"); det && std::string(det) == "1") {
        jobs = 1;
    }

    std::vector<AblateRow> results(points.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& p = points[i];
            results[i] = run_ablate_point(z0, base, p.row, p.alpha, p.lambda, p.mu);
        }
    } else {
        std::vector<std::future<AblateRow>> futures;
        futures.reserve(points.size());
        for (const auto& p : points) {
            futures.push_back(std::async(std::launch::async, [&, p] {
                return run_ablate_point(z0, base, p.row, p.alpha, p.lambda, p.mu);
            }));
        }
        for (std::size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
    }

    fs::create_directories(out_dir);
    json table = json::array();
    for (const auto& r : results) {
        json row;
        row["setting"] = r.setting;
        row["alpha"] = r.alpha;
        row["lambda"] = r.lambda;
        row["mu"] = r.mu;
        row["clip_t_proxy"] = r.alignment;
        row["clip_f_proxy"] = r.consistency;
        row["intra_region_mass"] = r.intra_mass;
        table.push_back(row);
    }
    write_text(out_dir + "/ablation.json", table.dump(2));
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"fairness-aware attention-modulated toy video editor"};
    app.require_subcommand(1);

    std::string video, prompts, config, out_dir, grid;
    unsigned jobs = 1;
    CliOverrides ovr;
    std::uint64_t seed_flag = 0;
    std::size_t steps_flag = 0;
    double alpha_flag = 0, lambda_flag = 0, mu_flag = 0, tau_flag = 0, rho_flag = 0,
           guidance_flag = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--video", video);
        cmd->add_option("--prompts", prompts);
        cmd->add_option("--config", config);
        cmd->add_option("--out", out_dir)->required();
        cmd->add_option("--jobs", jobs);
        cmd->add_option("--seed", seed_flag);
        cmd->add_option("--steps", steps_flag);
        cmd->add_option("--alpha", alpha_flag);
        cmd->add_option("--lambda", lambda_flag);
        cmd->add_option("--mu", mu_flag);
        cmd->add_option("--tau", tau_flag);
        cmd->add_option("--rho", rho_flag);
        cmd->add_option("--guidance", guidance_flag);
    };

    // Flags given on the command line become overrides once parsing is done.
    auto collect_overrides = [&](const CLI::App* cmd) {
        if (cmd->count("--seed")) ovr.seed = seed_flag;
        if (cmd->count("--steps")) ovr.steps = steps_flag;
        if (cmd->count("--alpha")) ovr.alpha = alpha_flag;
        if (cmd->count("--lambda")) ovr.lambda = lambda_flag;
        if (cmd->count("--mu")) ovr.mu = mu_flag;
        if (cmd->count("--tau")) ovr.tau = tau_flag;
        if (cmd->count("--rho")) ovr.rho = rho_flag;
        if (cmd->count("--guidance")) ovr.guidance = guidance_flag;
    };

    CLI::App* invert_cmd = app.add_subcommand("invert", "DDIM-invert a latent video");
    CLI::App* edit_cmd = app.add_subcommand("edit", "run the fairness-aware edit pipeline");
    CLI::App* eval_cmd = app.add_subcommand("eval", "run the fairness evaluation protocol");
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "cumulative-module ablation grid");
    add_common(invert_cmd);
    add_common(edit_cmd);
    add_common(eval_cmd);
    add_common(ablate_cmd);
    ablate_cmd->add_option("--grid", grid);

    std::vector<std::string> rargs(args.rbegin(), args.rend());
    try {
        app.parse(rargs);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << nlohmann::json{{"kind", "config"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }

    for (const CLI::App* cmd : {invert_cmd, edit_cmd, eval_cmd, ablate_cmd}) {
        if (cmd->parsed()) collect_overrides(cmd);
    }

    try {
        if (invert_cmd->parsed()) {
            return cmd_invert(resolve_run(video, prompts, config, ovr), out_dir);
        }
        if (edit_cmd->parsed()) {
            return cmd_edit(resolve_run(video, prompts, config, ovr), out_dir);
        }
        if (eval_cmd->parsed()) {
            if (config.empty()) throw Error(ErrorKind::config, "eval: --config is required");
            return cmd_eval(config, out_dir, ovr);
        }
        if (ablate_cmd->parsed()) {
            if (config.empty()) throw Error(ErrorKind::config, "ablate: --config is required");
            return cmd_ablate(config, grid, out_dir, ovr, jobs);
        }
    } catch (const Error& e) {
        err << nlohmann::json{{"kind", to_string(e.kind())}, {"message", e.what()}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << nlohmann::json{{"kind", "numeric"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace fame
