// slen: sentence-length random-walk models from the command line.
//
//   slen stats    corpus.txt
//   slen noise    corpus.txt --split random --seed 7
//   slen fit      corpus.txt --all --out-dir fits/
//   slen compare  corpus.txt --fitted fits/ --tolerance auto
//   slen mdl      corpus.txt --fitted fits/
//   slen sample   --model fits/1.k3.model --count 100000
//   slen validate --count 20000 --out-dir validation/
//
// Exit status: 0 ok, 1 bad input or usage, 2 numerical failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "slen/divergence.hpp"
#include "slen/error.hpp"
#include "slen/evidence.hpp"
#include "slen/fit.hpp"
#include "slen/histogram.hpp"
#include "slen/mdl.hpp"
#include "slen/model_io.hpp"
#include "slen/report.hpp"
#include "slen/sample.hpp"
#include "slen/validation.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace slen;

namespace {

struct InputOptions {
    std::string path;
    bool tsv = false;
    bool text = false;
    Length cutoff = kDefaultCutoff;
};

struct Corpus {
    LengthHistogram histogram{kDefaultCutoff};
    SkipTally skipped;
    std::optional<std::vector<Length>> stream; // record order, text input only
};

Corpus load_corpus(const InputOptions& in) {
    if (in.cutoff < 1) throw input_error("--cutoff must be >= 1");
    std::ifstream file;
    std::istream* src = &std::cin;
    if (in.path != "-") {
        file.open(in.path);
        if (!file) throw input_error("cannot open " + in.path);
        src = &file;
    }
    // TSV when asked for, or when the file name says so
    const bool tsv = in.tsv || (!in.text && fs::path(in.path).extension() == ".tsv");
    Corpus c;
    if (tsv) {
        Ingested g = ingest_tsv(*src, in.cutoff);
        c.histogram = std::move(g.histogram);
        c.skipped = g.skipped;
    } else {
        LengthStream s = read_text_lengths(*src, in.cutoff);
        c.histogram = histogram_of(s.lengths, in.cutoff);
        c.skipped = s.skipped;
        c.stream = std::move(s.lengths);
    }
    c.histogram.require_nonempty();
    return c;
}

void add_input(CLI::App* cmd, InputOptions& in) {
    cmd->add_option("input", in.path, "Corpus: one sentence per line, or length<TAB>count rows ('-' for stdin)")
        ->required();
    auto* tsv = cmd->add_flag("--tsv", in.tsv, "Input is a length<TAB>count histogram");
    cmd->add_flag("--text", in.text, "Input is raw text, one sentence per line")->excludes(tsv);
    cmd->add_option("--cutoff", in.cutoff, "Longest admitted sentence")->capture_default_str();
}

// Writes to <dir>/<name>, or to stdout when no directory was given.
class Sink {
public:
    explicit Sink(std::string dir) : dir_(std::move(dir)) {
        if (!dir_.empty()) fs::create_directories(dir_);
    }

    template <class F>
    void write(const std::string& name, F&& body) {
        if (dir_.empty()) {
            body(std::cout);
            return;
        }
        const fs::path p = fs::path(dir_) / name;
        std::ofstream out(p);
        if (!out) throw input_error("cannot write " + p.string());
        body(out);
        written_.push_back(p.string());
    }

    void manifest(json m) {
        if (dir_.empty()) return;
        m["outputs"] = written_;
        std::ofstream out(fs::path(dir_) / "manifest.json");
        out << m.dump(2) << '\n';
    }

private:
    std::string dir_;
    std::vector<std::string> written_;
};

std::string timestamp() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

json base_manifest(const std::string& command, const InputOptions* in) {
    json m;
    m["command"] = command;
    m["timestamp"] = timestamp();
    if (in) {
        m["input"] = in->path;
        m["cutoff"] = in->cutoff;
    }
    return m;
}

struct ToleranceChoice {
    Tolerance tol;
    std::string source; // measured | explicit
    std::optional<NoiseEstimate> noise;
};

// "auto" measures the inherent noise: first/second halves of a text stream,
// a seeded random split for histogram input (which has no record order).
ToleranceChoice resolve_tolerance(const std::string& text, const Corpus& c, std::uint64_t seed) {
    if (text == "auto") {
        NoiseEstimate e = c.stream ? inherent_noise(*c.stream, SplitKind::first_second)
                                   : inherent_noise(expand(c.histogram), SplitKind::random, seed);
        return {Tolerance(e.delta), "measured", e};
    }
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || *end != '\0' || !(v >= 0)) throw input_error("--tolerance must be 'auto' or a number >= 0");
    return {Tolerance(v), "explicit", std::nullopt};
}

std::vector<SampleSize> parse_grid(const std::vector<std::string>& items) {
    if (items.empty()) return default_n_grid();
    std::vector<SampleSize> out;
    for (const auto& s : items) out.push_back(parse_sample_size(s));
    return out;
}

// Fitted models from a directory of *.model files, ordered by id.
std::vector<FitAttempt> load_fits(const std::string& dir, const EmpiricalDistribution& data) {
    if (!fs::is_directory(dir)) throw input_error("not a directory: " + dir);
    std::vector<FitAttempt> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".model") continue;
        const MixtureModel m = load_model(entry.path().string());
        FitAttempt a;
        a.structure = m.structure();
        if (m.structure().min_valency() > data.max_length()) {
            a.error = "model " + m.id() + " cannot produce any observed length";
        } else {
            FitResult r;
            r.model = m;
            r.objective = gkl(data, mixture_pmf(m, data.max_length()));
            a.result = r;
        }
        out.push_back(std::move(a));
    }
    if (out.empty()) throw input_error("no .model files in " + dir);
    std::sort(out.begin(), out.end(),
              [](const FitAttempt& a, const FitAttempt& b) { return a.structure.id() < b.structure.id(); });
    return out;
}

json grid_json(const std::vector<SampleSize>& grid) {
    json g = json::array();
    for (const auto& n : grid) g.push_back(n.label());
    return g;
}

std::string fmt_seconds(double s) { return report::num(s); }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sentence-length models: random-walk return times, fitting, and model comparison"};
    app.require_subcommand(1);

    InputOptions in;
    std::string out_dir;
    std::uint64_t seed = 0;
    unsigned threads = 0;

    // stats
    auto* stats = app.add_subcommand("stats", "Summary statistics of a corpus");
    add_input(stats, in);

    // noise
    std::string split = "first";
    auto* noise = app.add_subcommand("noise", "Inherent noise from a half split");
    add_input(noise, in);
    noise->add_option("--split", split, "first (first/second half) or random")
        ->check(CLI::IsMember({"first", "random"}))
        ->capture_default_str();
    noise->add_option("--seed", seed, "Seed of the random split")->capture_default_str();

    // fit
    std::vector<std::string> model_ids;
    bool all_models = false;
    FitConfig fc;
    auto* fitc = app.add_subcommand("fit", "Fit model templates with Adagrad");
    add_input(fitc, in);
    auto* mopt = fitc->add_option("--model", model_ids, "Template id, e.g. 1.k3 or 2.k1-3 (repeatable)");
    fitc->add_flag("--all", all_models, "All 93 templates")->excludes(mopt);
    fitc->add_option("--eta", fc.learning_rate, "Initial learning rate")->capture_default_str();
    fitc->add_option("--fallback-eta", fc.fallback_rate, "Learning rate of the restart")->capture_default_str();
    fitc->add_option("--grad-tol", fc.grad_tol, "Stop when every gradient coordinate is within this")
        ->capture_default_str();
    fitc->add_option("--max-iters", fc.max_iters, "Iteration cap of the first run")->capture_default_str();
    fitc->add_option("--seed", seed, "Run seed (recorded in the manifest)")->capture_default_str();
    fitc->add_option("--threads", threads, "Worker threads (0 = all cores)");
    fitc->add_option("--out-dir", out_dir, "Directory for model files and objectives.tsv")->required();

    // compare
    std::string fitted, tolerance = "auto";
    std::vector<std::string> n_grid, exclude;
    auto* cmp = app.add_subcommand("compare", "Bayesian evidence comparison of fitted models");
    add_input(cmp, in);
    cmp->add_option("--fitted", fitted, "Directory of fitted .model files")->required();
    cmp->add_option("--tolerance", tolerance, "auto or a value in nats")->capture_default_str();
    cmp->add_option("--n-grid", n_grid, "Sample sizes, e.g. 1k 1M 1e9 inf");
    cmp->add_option("--exclude", exclude, "Model ids left out of the competition");
    cmp->add_option("--seed", seed, "Seed of the random split for histogram input");
    cmp->add_option("--out-dir", out_dir, "Write comparison.tsv and winners.tsv here instead of stdout");

    // mdl
    auto* mdl = app.add_subcommand("mdl", "Minimum description length comparison");
    add_input(mdl, in);
    mdl->add_option("--fitted", fitted, "Directory of fitted .model files")->required();
    mdl->add_option("--tolerance", tolerance, "auto or a value in nats")->capture_default_str();
    mdl->add_option("--exclude", exclude, "Model ids left out of the competition");
    mdl->add_option("--seed", seed, "Seed of the random split for histogram input");
    mdl->add_option("--out-dir", out_dir, "Write mdl.tsv here instead of stdout");

    // sample
    std::string model_file;
    std::uint64_t count = 0;
    auto* smp = app.add_subcommand("sample", "Draw return times from a model");
    smp->add_option("--model", model_file, "Model file")->required();
    smp->add_option("--count", count, "Number of walks")->required()->check(CLI::PositiveNumber);
    smp->add_option("--seed", seed, "Seed")->capture_default_str();
    smp->add_option("--out-dir", out_dir, "Write lengths.tsv here instead of stdout");

    // validate
    ValidationConfig vc;
    auto* val = app.add_subcommand("validate", "Synthetic end-to-end check with 1.k3 (p = 0.5, 0.25, 0.25)");
    val->add_option("--count", vc.count, "Total walks, split into halves for the noise")->capture_default_str();
    val->add_option("--seed", vc.seed, "Seed")->capture_default_str();
    val->add_option("--threads", vc.threads, "Worker threads (0 = all cores)");
    val->add_option("--out-dir", out_dir, "Directory for the report tables");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*stats) {
            const Corpus c = load_corpus(in);
            Sink sink("");
            sink.write("summary.tsv", [&](std::ostream& o) { report::summary_tsv(o, c.histogram, c.skipped); });
        } else if (*noise) {
            const Corpus c = load_corpus(in);
            NoiseEstimate e;
            if (split == "random")
                e = inherent_noise(c.stream ? *c.stream : expand(c.histogram), SplitKind::random, seed);
            else if (c.stream)
                e = inherent_noise(*c.stream, SplitKind::first_second);
            else
                throw input_error("histogram input has no record order; use --split random");
            report::noise_tsv(std::cout, e);
        } else if (*fitc) {
            if (!all_models && model_ids.empty()) throw input_error("give --model <id> or --all");
            const Corpus c = load_corpus(in);
            const EmpiricalDistribution data = empirical(c.histogram);
            std::vector<ModelStructure> templates;
            if (all_models) {
                templates = model_family();
            } else {
                for (const auto& id : model_ids) templates.push_back(parse_model_id(id));
            }
            fc.seed = seed;
            fc.validate();
            const auto fits = fit_all(data, templates, fc, threads);
            Sink sink(out_dir);
            for (const auto& f : fits)
                if (f.result)
                    sink.write(f.structure.id() + ".model", [&](std::ostream& o) { write_model(o, f.result->model); });
            sink.write("objectives.tsv", [&](std::ostream& o) { report::objectives_tsv(o, fits); });
            json m = base_manifest("fit", &in);
            m["seed"] = seed;
            m["eta"] = fc.learning_rate;
            m["fallback_eta"] = fc.fallback_rate;
            m["grad_tol"] = fc.grad_tol;
            m["max_iters"] = fc.max_iters;
            m["models"] = json::array();
            for (const auto& t : templates) m["models"].push_back(t.id());
            sink.manifest(m);
            bool numerical = false;
            for (const auto& f : fits)
                if (!f.result) {
                    std::cerr << "slen: " << f.structure.id() << ": " << f.error << '\n';
                    numerical = numerical || f.error.find("non-finite") != std::string::npos;
                }
            if (fits.size() == 1 && !fits.front().result) return numerical ? 2 : 1;
        } else if (*cmp || *mdl) {
            const Corpus c = load_corpus(in);
            const EmpiricalDistribution data = empirical(c.histogram);
            const auto fits = load_fits(fitted, data);
            const ToleranceChoice tc = resolve_tolerance(tolerance, c, seed);
            Sink sink(out_dir);
            json m = base_manifest(*cmp ? "compare" : "mdl", &in);
            m["fitted"] = fitted;
            m["seed"] = seed;
            m["tolerance"] = tc.tol.delta;
            m["tolerance_source"] = tc.source;
            m["exclude"] = exclude;
            if (tc.noise) m["noise_split"] = report::split_name(tc.noise->split);
            if (*cmp) {
                const auto grid = parse_grid(n_grid);
                const ComparisonReport r = compare(data, fits, tc.tol, grid, exclude);
                sink.write("comparison.tsv", [&](std::ostream& o) { report::comparison_tsv(o, r); });
                sink.write("winners.tsv", [&](std::ostream& o) { report::winners_tsv(o, r); });
                m["n_grid"] = grid_json(grid);
            } else {
                const MdlReport r = mdl_compare(data, fits, tc.tol, exclude);
                sink.write("mdl.tsv", [&](std::ostream& o) { report::mdl_tsv(o, r); });
            }
            sink.manifest(m);
        } else if (*smp) {
            const MixtureModel model = load_model(model_file);
            const LengthHistogram h = sample(model, count, seed);
            Sink sink(out_dir);
            sink.write("lengths.tsv", [&](std::ostream& o) {
                for (const auto& [x, n] : h.counts()) o << x << '\t' << n << '\n';
            });
            json m = base_manifest("sample", nullptr);
            m["model"] = model_file;
            m["count"] = count;
            m["seed"] = seed;
            sink.manifest(m);
        } else if (*val) {
            if (vc.count < 2) throw input_error("--count must be >= 2");
            const ValidationReport r = run_validation(vc);
            Sink sink(out_dir);
            sink.write("summary.tsv", [&](std::ostream& o) {
                o << "true_model\t" << r.true_id << "\ncount\t" << r.count << "\nrejected\t" << r.rejected
                  << "\nmean\t" << report::num(r.stats.mean) << "\nmax\t" << r.stats.max << "\nnoise\t"
                  << report::num(r.noise.delta) << "\nseconds_sampling\t" << fmt_seconds(r.seconds_sampling)
                  << "\nseconds_fitting\t" << fmt_seconds(r.seconds_fitting) << "\nseconds_scoring\t"
                  << fmt_seconds(r.seconds_scoring) << '\n';
            });
            sink.write("objectives.tsv", [&](std::ostream& o) { report::objectives_tsv(o, r.fits); });
            sink.write("winners.tsv", [&](std::ostream& o) {
                o << "# all models\n";
                report::winners_tsv(o, r.with_true);
                o << "# true model excluded\n";
                report::winners_tsv(o, r.without_true);
            });
            sink.write("comparison.tsv", [&](std::ostream& o) { report::comparison_tsv(o, r.with_true); });
            sink.write("mdl.tsv", [&](std::ostream& o) {
                report::mdl_tsv(o, r.mdl_with_true);
                o << "# true model excluded: winner\t"
                  << (r.mdl_without_true.winner ? *r.mdl_without_true.winner : "none") << '\n';
            });
            json m = base_manifest("validate", nullptr);
            m["count"] = vc.count;
            m["seed"] = vc.seed;
            m["tolerance"] = r.noise.delta;
            m["tolerance_source"] = "measured";
            m["n_grid"] = grid_json(vc.n_grid);
            sink.manifest(m);
        }
    } catch (const numerical_error& e) {
        std::cerr << "slen: numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "slen: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
