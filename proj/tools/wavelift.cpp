// wavelift command-line front end.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <wavelift/wavelift.hpp>

namespace wl = wavelift;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// key=value lines become --key=value tokens; '#' starts a comment.
std::vector<std::string> read_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
            throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected key=value");
        tokens.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
    }
    return tokens;
}

/// Splices config-file tokens in front of the command-line flags so that flags win.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    std::vector<std::string> file_tokens;
    for (std::size_t i = 1; i < args.size(); ++i) {
        std::string path;
        std::size_t erase = 0;
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            erase = 2;
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            erase = 1;
        }
        if (erase == 0) continue;
        auto t = read_config(path);
        file_tokens.insert(file_tokens.end(), t.begin(), t.end());
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + erase));
        --i;
    }
    std::size_t pos = 1;
    while (pos < args.size() && args[pos].rfind("-", 0) != 0) ++pos;
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(pos), file_tokens.begin(), file_tokens.end());
    return args;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
    std::vector<T> out;
    std::stringstream s(text);
    std::string cell;
    while (std::getline(s, cell, ',')) {
        cell = trim(cell);
        if (cell.empty()) continue;
        std::istringstream c(cell);
        T v{};
        if (!(c >> v) || !c.eof()) throw std::invalid_argument(std::string("bad entry '") + cell + "' in " + what);
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument(std::string(what) + " is empty");
    return out;
}

std::vector<wl::Annulus> parse_annuli(const std::string& text) {
    if (text.empty()) return wl::thin_ring_annuli();
    const auto r = parse_list<double>(text, "--rings");
    if (r.size() % 2 != 0) throw std::invalid_argument("--rings needs inner,outer pairs");
    std::vector<wl::Annulus> out;
    for (std::size_t i = 0; i < r.size(); i += 2) out.push_back({r[i], r[i + 1]});
    return out;
}

struct RunConfig {
    std::string mask, hierarchy, in, out, clean, data, design, contrast, report, statistic_out;
    std::string stage = "ai";
    int levels = 3;
    int depth = 0;
    int max_merge = 3;
    std::uint64_t seed = 1;
    bool normalize = false;
    double fit_tolerance = wl::LiftingTransform::kFitRankTolerance;
    double alpha = 0.05;
    double tau = 0.0;
    int realizations = 1;
    bool one_sided = false;
    unsigned threads = wl::default_threads();
    double tolerance = 0.0;

    // synthesize
    std::string kind = "wavelet";
    int level = 0;
    std::size_t voxel = 0;

    // experiments and data generation
    std::string alphas = "0.001,0.01,0.05,0.1";
    std::string level_list = "1,3";
    std::string families = "adapted,tensor_haar";
    std::string rings;
    int grid = 64;
    int trials = 10;
    double kappa = 64.0;
    double amplitude = 1.0;
    int time_points = 40;
    int block = 5;
    std::uint64_t signal_seed = 1;
    double width = 16.0;
    int thresholds = 40;
    int noise_realizations = 10;
    double snr = 5.0;
    double tau_sigmas = 5.0;
    int angle = 45;
    int dx = 0, dy = 0;
    std::string values_out, series_out, design_out, contrast_out;
    std::string basis = "adapted";
};

wl::TestSides sides(const RunConfig& c) { return c.one_sided ? wl::TestSides::One : wl::TestSides::Two; }

wl::HierarchyPtr hierarchy_for(const RunConfig& c, wl::DomainPtr d) {
    if (!c.hierarchy.empty()) return wl::load_hierarchy(c.hierarchy, std::move(d));
    return wl::build_hierarchy(std::move(d), c.levels, c.seed, c.max_merge);
}

wl::Volume load_values(const std::string& path, wl::DomainPtr d) {
    return wl::volume_from_grid(wl::read_vxl(path), std::move(d));
}

void add_hierarchy_options(CLI::App* s, RunConfig& c, bool mask_required = true) {
    auto* m = s->add_option("--mask", c.mask, "domain mask (.vxl, nonzero voxels)")->check(CLI::ExistingFile);
    if (mask_required) m->required();
    s->add_option("--hierarchy", c.hierarchy, "stored hierarchy; built from --levels/--seed when absent")
        ->check(CLI::ExistingFile);
    s->add_option("--levels", c.levels, "hierarchy levels")->check(CLI::Range(1, 64));
    s->add_option("--seed", c.seed, "root seed");
    s->add_option("--max-merge", c.max_merge, "largest merge group p")->check(CLI::Range(1, 1000));
}

void add_stage_options(CLI::App* s, RunConfig& c) {
    s->add_option("--stage", c.stage, "lifting stage")->check(CLI::IsMember({"lazy", "predict", "haar", "ai"}));
    s->add_option("--fit-tolerance", c.fit_tolerance, "relative eigenvalue cutoff of the P2 fits")
        ->check(CLI::Range(0.0, 0.999999));
}

// ---- subcommands ---------------------------------------------------------------

json run_build_hierarchy(const RunConfig& c) {
    auto d = wl::load_mask(c.mask);
    auto h = wl::build_hierarchy(d, c.levels, c.seed, c.max_merge);
    wl::save_hierarchy(c.out, *h);
    json levels = json::array();
    for (const auto& s : wl::coarsen_stats(*h)) levels.push_back(s.members);
    return {{"voxels", d->size()}, {"levels", h->levels()}, {"level_sizes", levels},
            {"hash", wl::hash_hex(wl::hierarchy_hash(*h))}, {"out", c.out}};
}

json run_fwd(const RunConfig& c) {
    auto d = wl::load_mask(c.mask);
    auto h = hierarchy_for(c, d);
    const wl::LiftingTransform t(h, wl::parse_stage(c.stage), c.fit_tolerance);
    const auto p = t.forward(load_values(c.in, d), c.depth, c.normalize);
    wl::save_pyramid(c.out, p);
    return {{"coefficients", p.size()}, {"top_level", p.top_level}, {"normalized", p.normalized},
            {"hash", wl::hash_hex(wl::hierarchy_hash(*h))}, {"out", c.out}};
}

json run_inv(const RunConfig& c) {
    auto d = wl::load_mask(c.mask);
    auto h = hierarchy_for(c, d);
    const auto p = wl::load_pyramid(c.in, h);
    const wl::LiftingTransform t(h, p.stage, c.fit_tolerance);
    const auto v = t.inverse(p);
    wl::save_volume(c.out, v);
    return {{"voxels", v.size()}, {"stage", wl::stage_name(p.stage)}, {"out", c.out}};
}

json run_synthesize(const RunConfig& c) {
    auto d = wl::load_mask(c.mask);
    const wl::LiftingTransform t(hierarchy_for(c, d), wl::parse_stage(c.stage), c.fit_tolerance);
    wl::BasisKind kind = wl::BasisKind::Wavelet;
    if (c.kind == "scaling") kind = wl::BasisKind::Scaling;
    if (c.kind == "dual-scaling") kind = wl::BasisKind::DualScaling;
    if (c.kind == "dual-wavelet") kind = wl::BasisKind::DualWavelet;
    const auto v = t.basis_function(c.level, c.voxel, kind, c.normalize);
    wl::save_volume(c.out, v);
    return {{"kind", c.kind}, {"level", c.level}, {"voxel", c.voxel}, {"norm", wl::l2_norm(*d, v.values)},
            {"out", c.out}};
}

json run_verify(const RunConfig& c, bool stage_given) {
    auto d = wl::load_mask(c.mask);
    auto h = hierarchy_for(c, d);
    std::vector<std::string> stages = stage_given ? std::vector<std::string>{c.stage}
                                                  : std::vector<std::string>{"lazy", "haar", "ai"};
    json per = json::object();
    bool ok = true;
    std::ofstream report;
    if (!c.report.empty()) {
        report.open(c.report);
        if (!report) throw std::runtime_error("cannot write " + c.report);
    }
    for (const auto& s : stages) {
        const wl::LiftingTransform t(h, wl::parse_stage(s), c.fit_tolerance);
        const auto r = wl::check_biorthogonality(t);
        per[s] = r.max_deviation();
        ok = ok && r.passed(c.tolerance);
        std::cerr << "stage " << s << '\n';
        wl::write_report_csv(std::cerr, r);
        if (report.is_open()) {
            report << "# stage " << s << '\n';
            wl::write_report_csv(report, r);
        }
    }
    return {{"voxels", d->size()}, {"levels", h->levels()}, {"max_deviation", per}, {"tolerance", c.tolerance},
            {"passed", ok}};
}

json run_denoise(const RunConfig& c) {
    auto d = wl::load_mask(c.mask);
    const auto noisy = load_values(c.in, d);
    wl::DenoiseConfig cfg;
    cfg.levels = c.levels;
    cfg.max_merge = c.max_merge;
    cfg.stage = wl::parse_stage(c.stage);
    cfg.tau = c.tau;
    cfg.fit_tolerance = c.fit_tolerance;
    cfg.threads = c.threads;
    std::optional<wl::Volume> clean;
    if (!c.clean.empty()) clean = load_values(c.clean, d);
    const auto r = clean ? wl::denoise_averaged(d, noisy.values, c.realizations, c.seed, cfg,
                                                std::span<const double>(clean->values))
                         : wl::denoise_averaged(d, noisy.values, c.realizations, c.seed, cfg);
    wl::save_volume(c.out, wl::Volume(d, r.estimate));
    json out{{"voxels", d->size()}, {"realizations", c.realizations}, {"tau", c.tau}, {"out", c.out}};
    if (clean) {
        out["snr_db"] = r.snr.back();
        out["snr_single_db"] = r.single_snr.front();
        out["snr_input_db"] = wl::snr_db(*d, clean->values, noisy.values);
    }
    return out;
}

json run_wspm(const RunConfig& c) {
    auto d = wl::load_mask(c.mask);
    const auto series = wl::load_series(c.data, d);
    wl::DesignMatrix x = wl::read_design_csv(fs::path(c.design));
    if (x.rank_deficient())
        std::cerr << "warning: design matrix is rank deficient (rank " << x.rank() << " of " << x.cols()
                  << " columns); using the pseudo-inverse\n";
    const wl::GlmModel model(std::move(x), wl::read_contrast_csv(fs::path(c.contrast)));
    const auto params = wl::compute_thresholds(c.alpha);
    const wl::WspmOptions opts{sides(c), c.threads};
    wl::ActivationMap m;
    if (c.basis == "tensor_haar") {
        m = wl::wspm_detect(wl::TensorHaar2D(d, c.levels), series.frames, model, params, opts);
    } else if (c.realizations > 1) {
        wl::RealizationConfig rc;
        rc.levels = c.levels;
        rc.max_merge = c.max_merge;
        rc.stage = wl::parse_stage(c.stage);
        rc.realizations = c.realizations;
        rc.base_seed = c.seed;
        rc.fit_tolerance = c.fit_tolerance;
        m = wl::wspm_detect_averaged(d, series.frames, model, params, rc, opts);
    } else {
        const wl::AdaptedBasis b(hierarchy_for(c, d), wl::parse_stage(c.stage), 0, c.fit_tolerance);
        m = wl::wspm_detect(b, series.frames, model, params, opts);
    }
    wl::VxlGrid g = wl::grid_for(*d, wl::VxlType::U8);
    for (std::size_t v = 0; v < d->size(); ++v) g.data[g.offset(d->voxel(v))] = m.detected[v] ? 1.0 : 0.0;
    wl::write_vxl(fs::path(c.out), g);
    if (!c.statistic_out.empty()) wl::save_volume(c.statistic_out, wl::Volume(d, m.statistic));
    return {{"voxels", d->size()},         {"time_points", series.time_points()}, {"dof", model.dof()},
            {"alpha", c.alpha},            {"tau_w", params.tau_w},               {"tau_s", params.tau_s},
            {"survivors", m.stats.survivors()}, {"detected", m.count()},          {"out", c.out}};
}

json run_diff(const std::string& a, const std::string& b, double tol) {
    const auto ga = wl::read_vxl(fs::path(a)), gb = wl::read_vxl(fs::path(b));
    if (ga.dims != gb.dims) return {{"same_shape", false}, {"within_tolerance", false}};
    double m = 0.0;
    for (std::size_t i = 0; i < ga.data.size(); ++i) m = std::max(m, std::abs(ga.data[i] - gb.data[i]));
    return {{"same_shape", true}, {"max_abs_diff", m}, {"tolerance", tol}, {"within_tolerance", m <= tol}};
}

json run_make_data(const RunConfig& c) {
    json out = json::object();
    if (!c.series_out.empty()) {
        wl::PhantomConfig pc;
        pc.grid = c.grid;
        pc.annuli = parse_annuli(c.rings);
        pc.kappa = c.kappa;
        pc.amplitude = c.amplitude;
        pc.time_points = c.time_points;
        pc.block = c.block;
        if (!c.rings.empty()) {
            pc.active.clear();
            for (std::size_t i = 1; i < pc.annuli.size(); i += 2) pc.active.push_back(static_cast<int>(i));
        }
        const auto p = wl::make_phantom(pc, c.seed);
        wl::save_series(c.series_out, wl::Series{p.domain, p.frames});
        const auto model = wl::block_design_model(c.time_points, c.block);
        if (!c.design_out.empty()) {
            std::ofstream f(c.design_out);
            wl::write_design_csv(f, model.design());
        }
        if (!c.contrast_out.empty()) std::ofstream(c.contrast_out) << "0,0,1\n";
        if (!c.mask.empty()) wl::save_mask(c.mask, *p.domain);
        std::size_t active = 0;
        for (char t : p.truth) active += t != 0;
        out["voxels"] = p.domain->size();
        out["active"] = active;
        return out;
    }
    const auto annuli = parse_annuli(c.rings);
    auto d = std::make_shared<const wl::Domain>(wl::make_ring_domain(annuli, c.grid));
    if (!c.mask.empty()) wl::save_mask(c.mask, *d);
    if (!c.values_out.empty()) {
        const auto v = c.kind == "smooth" ? wl::smooth_signal(*d, c.seed, {3, c.width, c.amplitude})
                                          : wl::gaussian_noise(d->size(), c.amplitude, c.seed);
        wl::save_volume(c.values_out, wl::Volume(d, v));
    }
    out["voxels"] = d->size();
    return out;
}

// ---- experiments ---------------------------------------------------------------

std::ofstream open_csv(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.precision(17);
    return f;
}

json run_roc(const RunConfig& c) {
    wl::RocConfig cfg;
    cfg.phantom.grid = c.grid;
    cfg.phantom.annuli = parse_annuli(c.rings);
    cfg.phantom.kappa = c.kappa;
    cfg.phantom.amplitude = c.amplitude;
    cfg.phantom.time_points = c.time_points;
    cfg.phantom.block = c.block;
    if (!c.rings.empty()) {
        cfg.phantom.active.clear();
        for (std::size_t i = 1; i < cfg.phantom.annuli.size(); i += 2) cfg.phantom.active.push_back(static_cast<int>(i));
    }
    cfg.alphas = parse_list<double>(c.alphas, "--alphas");
    cfg.levels = parse_list<int>(c.level_list, "--level-list");
    cfg.families.clear();
    for (const auto& f : parse_list<std::string>(c.families, "--families")) {
        if (f == "adapted")
            cfg.families.push_back(wl::BasisFamily::Adapted);
        else if (f == "tensor_haar")
            cfg.families.push_back(wl::BasisFamily::TensorHaar);
        else
            throw std::invalid_argument("unknown family '" + f + "' (adapted|tensor_haar)");
    }
    cfg.stage = wl::parse_stage(c.stage);
    cfg.max_merge = c.max_merge;
    cfg.fit_tolerance = c.fit_tolerance;
    cfg.trials = c.trials;
    cfg.seed = c.seed;
    cfg.wspm = {sides(c), c.threads};
    const auto rows = wl::roc_sweep(cfg);
    auto f = open_csv(c.out);
    wl::write_roc_csv(f, rows);
    return {{"rows", rows.size()}, {"trials", c.trials}, {"out", c.out}};
}

wl::DomainPtr experiment_domain(const RunConfig& c) {
    if (!c.mask.empty()) return wl::load_mask(c.mask);
    return std::make_shared<const wl::Domain>(wl::make_ring_domain(parse_annuli(c.rings), c.grid));
}

json run_sparsity(const RunConfig& c) {
    auto d = experiment_domain(c);
    const auto f = wl::smooth_signal(*d, c.signal_seed, {3, c.width, c.amplitude});
    const wl::CurveOptions opts{c.noise_realizations, c.seed + 1};
    auto csv = open_csv(c.out);
    csv << "basis,tau,error,survivors,noise_norm\n";
    auto emit = [&](const char* name, const auto& basis) {
        const auto taus = wl::quantile_thresholds(basis, f, c.thresholds);
        for (const auto& p : wl::approximation_curve(basis, f, taus, opts))
            csv << name << ',' << p.tau << ',' << p.error << ',' << p.survivors << ',' << p.noise_norm << '\n';
    };
    emit("adapted", wl::AdaptedBasis(hierarchy_for(c, d), wl::parse_stage(c.stage), 0, c.fit_tolerance));
    if (d->dim() == 2) emit("tensor_haar", wl::TensorHaar2D(d, c.levels));
    return {{"voxels", d->size()}, {"out", c.out}};
}

json run_averaging(const RunConfig& c) {
    auto d = experiment_domain(c);
    const auto f = wl::smooth_signal(*d, c.signal_seed, {3, c.width, c.amplitude});
    const double sigma = wl::sigma_for_snr(*d, f, c.snr);
    auto noisy = wl::gaussian_noise(d->size(), sigma, c.seed + 1);
    for (std::size_t v = 0; v < f.size(); ++v) noisy[v] += f[v];
    wl::DenoiseConfig cfg;
    cfg.levels = c.levels;
    cfg.max_merge = c.max_merge;
    cfg.stage = wl::parse_stage(c.stage);
    cfg.tau = c.tau_sigmas * sigma;
    cfg.fit_tolerance = c.fit_tolerance;
    cfg.threads = c.threads;
    const auto r = wl::denoise_averaged(d, noisy, c.realizations, c.seed + 2, cfg, std::span<const double>(f));
    auto csv = open_csv(c.out);
    csv << "realizations,snr_averaged,snr_single\n";
    for (std::size_t i = 0; i < r.snr.size(); ++i) csv << i + 1 << ',' << r.snr[i] << ',' << r.single_snr[i] << '\n';
    return {{"voxels", d->size()}, {"sigma", sigma}, {"snr_input_db", wl::snr_db(*d, f, noisy)},
            {"snr_single_db", r.single_snr.front()}, {"snr_averaged_db", r.snr.back()}, {"out", c.out}};
}

json run_invariance(const RunConfig& c) {
    const auto img = wl::disc_test_image(c.grid, c.signal_seed);
    wl::InvarianceConfig cfg;
    cfg.levels = c.levels;
    cfg.max_merge = c.max_merge;
    cfg.stage = wl::parse_stage(c.stage);
    cfg.angle_deg = c.angle;
    cfg.dx = c.dx;
    cfg.dy = c.dy;
    cfg.realizations = c.realizations;
    cfg.base_seed = c.seed;
    cfg.fit_tolerance = c.fit_tolerance;
    cfg.threads = c.threads;
    const auto r = wl::invariance_experiment(img, c.grid, cfg);
    auto csv = open_csv(c.out);
    csv << "subspace,single,averaged\n";
    for (std::size_t s = 0; s < r.subspaces.size(); ++s)
        csv << r.subspaces[s] << ',' << r.single[s] << ',' << r.averaged[s] << '\n';
    return {{"subspaces", r.subspaces.size()}, {"out", c.out}};
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args;
    try {
        args = expand_config(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    CLI::App app{"Randomized domain-adapted lifting wavelets and WSPM activation detection"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.fallthrough();
    RunConfig c;
    std::string config_path;
    app.add_option("--config", config_path, "key=value file mirroring the flags; flags override it");
    app.add_option("--threads", c.threads, "worker threads")->check(CLI::Range(1u, 1024u));

    auto* build = app.add_subcommand("build-hierarchy", "build and store a random grid hierarchy");
    add_hierarchy_options(build, c);
    build->add_option("--out", c.out, "hierarchy file")->required();

    auto* fwd = app.add_subcommand("fwd", "forward transform of a volume");
    add_hierarchy_options(fwd, c);
    add_stage_options(fwd, c);
    fwd->add_option("--in", c.in, "input volume (.vxl, f64)")->required()->check(CLI::ExistingFile);
    fwd->add_option("--out", c.out, "coefficient pyramid")->required();
    fwd->add_option("--depth", c.depth, "levels to transform (0: all)")->check(CLI::NonNegativeNumber);
    fwd->add_flag("--normalize", c.normalize, "unit-norm basis coefficients");

    auto* inv = app.add_subcommand("inv", "inverse transform of a coefficient pyramid");
    add_hierarchy_options(inv, c);
    inv->add_option("--fit-tolerance", c.fit_tolerance, "relative eigenvalue cutoff of the P2 fits")
        ->check(CLI::Range(0.0, 0.999999));
    inv->add_option("--in", c.in, "coefficient pyramid")->required()->check(CLI::ExistingFile);
    inv->add_option("--out", c.out, "reconstructed volume")->required();

    auto* synth = app.add_subcommand("synthesize", "write one basis or dual basis function");
    add_hierarchy_options(synth, c);
    add_stage_options(synth, c);
    synth->add_option("--kind", c.kind)->check(CLI::IsMember({"scaling", "wavelet", "dual-scaling", "dual-wavelet"}));
    synth->add_option("--level", c.level, "level j")->required();
    synth->add_option("--voxel", c.voxel, "finest voxel index naming the function")->required();
    synth->add_flag("--normalize", c.normalize, "unit L2 norm");
    synth->add_option("--out", c.out, "output volume")->required();

    auto* denoise = app.add_subcommand("denoise", "hard-threshold denoising averaged over hierarchies");
    add_hierarchy_options(denoise, c);
    add_stage_options(denoise, c);
    denoise->add_option("--in", c.in, "noisy volume")->required()->check(CLI::ExistingFile);
    denoise->add_option("--out", c.out, "denoised volume")->required();
    denoise->add_option("--tau", c.tau, "threshold on normalized detail coefficients")->check(CLI::NonNegativeNumber);
    denoise->add_option("--realizations", c.realizations, "hierarchies averaged (seeds seed, seed+1, ...)")
        ->check(CLI::PositiveNumber);
    denoise->add_option("--clean", c.clean, "reference volume for SNR")->check(CLI::ExistingFile);

    auto* verify = app.add_subcommand("verify", "biorthogonality report");
    add_hierarchy_options(verify, c);
    auto* verify_stage = verify->add_option("--stage", c.stage, "single stage (default: lazy, haar, ai)")
                             ->check(CLI::IsMember({"lazy", "predict", "haar", "ai"}));
    verify->add_option("--fit-tolerance", c.fit_tolerance)->check(CLI::Range(0.0, 0.999999));
    verify->add_option("--report", c.report, "CSV report file");
    c.tolerance = 1e-10;
    verify->add_option("--tol", c.tolerance, "pass tolerance");

    auto* wspm = app.add_subcommand("wspm", "wavelet-based statistical parametric mapping");
    add_hierarchy_options(wspm, c);
    add_stage_options(wspm, c);
    wspm->add_option("--data", c.data, "time series (.vxl, 4D f64)")->required()->check(CLI::ExistingFile);
    wspm->add_option("--design", c.design, "design matrix CSV")->required()->check(CLI::ExistingFile);
    wspm->add_option("--contrast", c.contrast, "contrast CSV")->required()->check(CLI::ExistingFile);
    wspm->add_option("--alpha", c.alpha, "significance level")->check(CLI::Range(1e-300, wl::max_wspm_alpha()));
    wspm->add_option("--out", c.out, "detection mask (.vxl, u8)")->required();
    wspm->add_option("--statistic-out", c.statistic_out, "detection statistic (.vxl, f64)");
    wspm->add_flag("--one-sided", c.one_sided, "one-sided coefficient and spatial tests");
    wspm->add_option("--realizations", c.realizations, "average the statistic over hierarchies")
        ->check(CLI::PositiveNumber);
    wspm->add_option("--basis", c.basis)->check(CLI::IsMember({"adapted", "tensor_haar"}));

    auto* diff = app.add_subcommand("diff-vol", "compare two .vxl files");
    std::string diff_a, diff_b;
    diff->add_option("a", diff_a)->required()->check(CLI::ExistingFile);
    diff->add_option("b", diff_b)->required()->check(CLI::ExistingFile);
    double diff_tol = 0.0;
    diff->add_option("--tol", diff_tol, "largest allowed absolute difference");

    auto* make = app.add_subcommand("make-data", "write a ring mask, a random volume or a phantom series");
    make->add_option("--mask", c.mask, "mask output");
    make->add_option("--grid", c.grid)->check(CLI::Range(1, 4096));
    make->add_option("--rings", c.rings, "inner,outer,... annuli (default: six thin rings)");
    make->add_option("--seed", c.seed);
    make->add_option("--values-out", c.values_out, "random volume on the mask");
    make->add_option("--kind", c.kind, "volume kind")->check(CLI::IsMember({"noise", "smooth"}));
    make->add_option("--width", c.width)->check(CLI::PositiveNumber);
    make->add_option("--amplitude", c.amplitude);
    make->add_option("--series-out", c.series_out, "phantom time series");
    make->add_option("--design-out", c.design_out);
    make->add_option("--contrast-out", c.contrast_out);
    make->add_option("--kappa", c.kappa);
    make->add_option("--time-points", c.time_points)->check(CLI::Range(4, 100000));
    make->add_option("--block", c.block)->check(CLI::PositiveNumber);

    auto* exp = app.add_subcommand("experiment", "experiment runners writing CSV");
    exp->require_subcommand(1);
    auto* roc = exp->add_subcommand("roc", "WSPM ROC sweep on the ring phantom");
    roc->add_option("--out", c.out, "CSV output")->required();
    roc->add_option("--alphas", c.alphas, "comma-separated significance levels");
    roc->add_option("--level-list", c.level_list, "comma-separated decomposition levels");
    roc->add_option("--families", c.families, "adapted,tensor_haar");
    roc->add_option("--trials", c.trials)->check(CLI::PositiveNumber);
    roc->add_option("--seed", c.seed);
    roc->add_option("--grid", c.grid)->check(CLI::Range(1, 4096));
    roc->add_option("--rings", c.rings, "inner,outer,... annuli; odd-numbered rings are active");
    roc->add_option("--kappa", c.kappa);
    roc->add_option("--amplitude", c.amplitude);
    roc->add_option("--time-points", c.time_points)->check(CLI::Range(4, 100000));
    roc->add_option("--block", c.block)->check(CLI::PositiveNumber);
    roc->add_option("--max-merge", c.max_merge)->check(CLI::Range(1, 1000));
    roc->add_flag("--one-sided", c.one_sided);
    add_stage_options(roc, c);

    auto* sparsity = exp->add_subcommand("sparsity", "approximation error and noise transfer curves");
    add_hierarchy_options(sparsity, c, false);
    add_stage_options(sparsity, c);
    sparsity->add_option("--out", c.out, "CSV output")->required();
    sparsity->add_option("--grid", c.grid)->check(CLI::Range(1, 4096));
    sparsity->add_option("--rings", c.rings);
    sparsity->add_option("--signal-seed", c.signal_seed);
    sparsity->add_option("--width", c.width)->check(CLI::PositiveNumber);
    sparsity->add_option("--amplitude", c.amplitude);
    sparsity->add_option("--thresholds", c.thresholds)->check(CLI::PositiveNumber);
    sparsity->add_option("--noise-realizations", c.noise_realizations)->check(CLI::NonNegativeNumber);

    auto* averaging = exp->add_subcommand("averaging", "SNR of hierarchy-averaged denoising");
    add_hierarchy_options(averaging, c, false);
    add_stage_options(averaging, c);
    averaging->add_option("--out", c.out, "CSV output")->required();
    averaging->add_option("--grid", c.grid)->check(CLI::Range(1, 4096));
    averaging->add_option("--rings", c.rings);
    averaging->add_option("--signal-seed", c.signal_seed);
    averaging->add_option("--width", c.width)->check(CLI::PositiveNumber);
    averaging->add_option("--amplitude", c.amplitude);
    averaging->add_option("--snr", c.snr, "input SNR in dB");
    averaging->add_option("--tau-sigmas", c.tau_sigmas, "threshold in noise standard deviations")
        ->check(CLI::NonNegativeNumber);
    averaging->add_option("--realizations", c.realizations)->check(CLI::PositiveNumber);

    auto* invariance = exp->add_subcommand("invariance", "rotation and shift invariance per subspace");
    invariance->add_option("--out", c.out, "CSV output")->required();
    invariance->add_option("--grid", c.grid)->check(CLI::Range(2, 4096));
    invariance->add_option("--signal-seed", c.signal_seed);
    invariance->add_option("--levels", c.levels)->check(CLI::Range(1, 64));
    invariance->add_option("--seed", c.seed);
    invariance->add_option("--max-merge", c.max_merge)->check(CLI::Range(1, 1000));
    invariance->add_option("--angle", c.angle, "multiple of 45 degrees");
    invariance->add_option("--dx", c.dx);
    invariance->add_option("--dy", c.dy);
    invariance->add_option("--realizations", c.realizations)->check(CLI::PositiveNumber);
    add_stage_options(invariance, c);

    std::vector<char*> cargv;
    for (auto& a : args) cargv.push_back(a.data());
    try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const CLI::App* ctx = &app;
        for (auto* s : {build, fwd, inv, synth, denoise, verify, wspm, diff, make, exp, roc, sparsity, averaging, invariance})
            if (s->parsed()) ctx = s;
        std::cerr << ctx->help();
        return 2;
    }

    json summary;
    std::string command;
    int code = 0;
    try {
        if (build->parsed()) {
            command = "build-hierarchy";
            summary = run_build_hierarchy(c);
        } else if (fwd->parsed()) {
            command = "fwd";
            summary = run_fwd(c);
        } else if (inv->parsed()) {
            command = "inv";
            summary = run_inv(c);
        } else if (synth->parsed()) {
            command = "synthesize";
            summary = run_synthesize(c);
        } else if (denoise->parsed()) {
            command = "denoise";
            summary = run_denoise(c);
        } else if (verify->parsed()) {
            command = "verify";
            summary = run_verify(c, verify_stage->count() > 0);
            code = summary["passed"].get<bool>() ? 0 : 1;
        } else if (wspm->parsed()) {
            command = "wspm";
            summary = run_wspm(c);
        } else if (diff->parsed()) {
            command = "diff-vol";
            summary = run_diff(diff_a, diff_b, diff_tol);
            code = summary["within_tolerance"].get<bool>() ? 0 : 1;
        } else if (make->parsed()) {
            command = "make-data";
            summary = run_make_data(c);
        } else if (roc->parsed()) {
            command = "experiment roc";
            summary = run_roc(c);
        } else if (sparsity->parsed()) {
            command = "experiment sparsity";
            summary = run_sparsity(c);
        } else if (averaging->parsed()) {
            command = "experiment averaging";
            summary = run_averaging(c);
        } else if (invariance->parsed()) {
            command = "experiment invariance";
            summary = run_invariance(c);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    summary["command"] = command;
    summary["status"] = code == 0 ? "ok" : "failed";
    std::cout << summary.dump() << '\n';
    return code;
}
