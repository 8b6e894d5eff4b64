// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "fgpan/aggregation.hpp"
#include "fgpan/crossmodal.hpp"
#include "fgpan/data_model.hpp"
#include "fgpan/metrics.hpp"
#include "fgpan/model.hpp"
#include "fgpan/prototypes.hpp"
#include "fgpan/training.hpp"
#include "fgpan/window_attention.hpp"
#include "support.hpp"

#include <Eigen/QR>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

using namespace fgpan;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* title, bool pass, const std::string& detail) {
    std::printf("%s criterion %d (%s): %s\n", pass ? "PASS" : "FAIL", id, title, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1 ---------------------------------------------------------------------------

void gradient_oracle() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::string worst_at;
    int instances = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (auto mode : {PositionalMode::sinusoidal, PositionalMode::learned_table}) {
            for (double lambda : {0.0, 1.0}) {
                ModelShape shape;
                shape.dim = 8;
                shape.window_size = 2;
                shape.heads = 2;
                shape.grid_rows = 4;
                shape.grid_cols = 4;
                shape.pos_mode = mode;
                const GradCheckInstance inst = make_gradcheck_instance(shape, 3, 6, 2, seed);
                const double err = finite_diff_check(inst.slides, inst.params, inst.prototypes, lambda, 1e-4);
                ++instances;
                if (err > worst) {
                    worst = err;
                    worst_at = fmt("seed=%d mode=%s lambda=%g", static_cast<int>(seed),
                                   std::string(to_string(mode)).c_str(), lambda);
                }
            }
        }
    }
    const double t = seconds_since(t0);
    report(1, "gradient oracle", worst <= 1e-5 && t < 60.0,
           fmt("%d instances, max_rel_error=%.3e (%s), tol 1e-5, %.2fs of 60s", instances, worst, worst_at.c_str(), t));
}

// 2 ---------------------------------------------------------------------------

void attention_oracle() {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + static_cast<int>(rng() % 8);
        const int k = 1 + static_cast<int>(rng() % 4);
        const AttentionHeadParams head = test::random_head(d, 2, rng);
        const Matrix f = test::random_matrix(k, d, rng);
        std::vector<GridCoord> cells{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
        std::shuffle(cells.begin(), cells.end(), rng);
        cells.resize(static_cast<std::size_t>(k));
        const Matrix out = attend_window(f, cells, head);
        const auto ref = test::dense_attention(f, cells, head);
        double num = 0.0, den = 0.0;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < d; ++j) {
                num = std::max(num, std::abs(out(i, j) - ref[i][j]));
                den = std::max(den, std::abs(ref[i][j]));
            }
        worst = std::max(worst, num / den);
    }
    report(2, "attention oracle equivalence", worst <= 1e-12,
           fmt("100 windows, k<=4, d<=8, max relative error %.3e, tol 1e-12", worst));
}

// 3 ---------------------------------------------------------------------------

void normalization_suite() {
    std::mt19937_64 rng(77);
    double worst_sum = 0.0, worst_hull = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        ModelShape shape;
        shape.dim = 4 * (1 + static_cast<int>(rng() % 3));
        shape.window_size = 1 + static_cast<int>(rng() % 3);
        shape.heads = 1 + static_cast<int>(rng() % 3);
        shape.grid_rows = shape.grid_cols = 6;
        shape.pos_mode = rng() % 2 ? PositionalMode::sinusoidal : PositionalMode::learned_table;
        const int classes = 2 + static_cast<int>(rng() % 5);
        const int m = 1 + static_cast<int>(rng() % 20);
        const GradCheckInstance inst = make_gradcheck_instance(shape, classes, m, 1, rng(), 0.5);
        const SlideRecord& slide = inst.slides.front();
        const SlideForward f = forward_slide(slide, inst.params, inst.prototypes);

        const WindowPartition part = partition_windows(slide, shape.window_size);
        const Matrix feats = slide.feature_matrix();
        for (const auto& w : part.windows) {
            for (const auto& head : inst.params.lwa.heads) {
                const AttentionCache c = attend_window_cached(gather_rows(feats, w.members), w.offsets, head);
                for (Eigen::Index i = 0; i < c.attention.rows(); ++i)
                    worst_sum = std::max(worst_sum, std::abs(c.attention.row(i).sum() - 1.0));
            }
        }
        worst_sum = std::max(worst_sum, std::abs(f.slide.alpha.sum() - 1.0));
        for (Eigen::Index i = 0; i < f.patch_probs.rows(); ++i)
            worst_sum = std::max(worst_sum, std::abs(f.patch_probs.row(i).sum() - 1.0));
        worst_sum = std::max(worst_sum, std::abs(f.slide.probs.sum() - 1.0));
        for (int c = 0; c < classes; ++c) {
            worst_hull = std::max(worst_hull, f.patch_probs.col(c).minCoeff() - f.slide.probs[c]);
            worst_hull = std::max(worst_hull, f.slide.probs[c] - f.patch_probs.col(c).maxCoeff());
        }
    }
    report(3, "normalization and convexity", worst_sum <= 1e-12 && worst_hull <= 1e-12,
           fmt("1000 instances, max |sum-1|=%.3e, max hull violation=%.3e, tol 1e-12", worst_sum, worst_hull));
}

// 4 ---------------------------------------------------------------------------

void ranking_invariance() {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> score(-1.0, 1.0);
    std::uniform_real_distribution<double> log_tau(std::log(0.01), std::log(10.0));
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int c = 2 + static_cast<int>(rng() % 15);
        Vector s(c);
        for (auto& x : s) x = score(rng);
        const Vector p = patch_probs(s, TemperatureParam{log_tau(rng)});
        Eigen::Index as, ap;
        s.maxCoeff(&as);
        p.maxCoeff(&ap);
        mismatches += as != ap;
    }
    report(4, "ranking invariance", mismatches == 0,
           fmt("1000 draws, tau in [0.01, 10], %d argmax mismatches", mismatches));
}

// 5, 6 ------------------------------------------------------------------------

double bacc_on(const std::vector<SlideRecord>& slides, const ModelParams& params, const PrototypeSet& set,
               const ForwardOptions& options) {
    std::vector<EvalRecord> records;
    for (const auto& s : slides) {
        const SlideForward f = forward_slide(s, params, set, options);
        records.push_back({s.slide_id, *s.label, f.slide.predicted, f.slide.probs});
    }
    return balanced_accuracy(records);
}

SyntheticConfig corpus_config(int classes, double sigma, std::uint64_t seed, const std::string& prefix) {
    SyntheticConfig cfg;
    cfg.classes = classes;
    cfg.slides_per_class = 10;
    cfg.patches_per_slide = 64;
    cfg.dim = 16;
    cfg.signal_fraction = 0.6;
    cfg.noise_sigma = sigma;
    cfg.seed = seed;
    cfg.id_prefix = prefix;
    return cfg;
}

struct ZeroShotRun {
    double closed_form = 0.0;
    double trained = 0.0;
};

/// Trains on the seen corpus and scores the unseen one. `coarse_blur` >= 0
/// swaps both prototype sets for their name-only counterparts.
ZeroShotRun zero_shot(double sigma, std::uint64_t seen_seed, std::uint64_t unseen_seed, double coarse_blur = -1.0) {
    const SyntheticCorpus seen = gen_synthetic(corpus_config(4, sigma, seen_seed, "seen"));
    const SyntheticCorpus unseen = gen_synthetic(corpus_config(3, sigma, unseen_seed, "unseen"));
    PrototypeSet seen_set = seen.prototypes, unseen_set = unseen.prototypes;
    if (coarse_blur >= 0.0) {
        seen_set = make_name_only_prototypes(seen_set, coarse_blur, seen_seed);
        unseen_set = make_name_only_prototypes(unseen_set, coarse_blur, unseen_seed);
    }
    seen_set = normalize_prototypes(seen_set);
    unseen_set = normalize_prototypes(unseen_set);

    TrainConfig cfg = desk_profile();
    cfg.seed = seen_seed;
    const TrainResult trained = train(seen.slides, cfg, seen_set, init_params(ModelShape{}, seen_seed));
    return {bacc_on(unseen.slides, trained.params, unseen_set, {false}),
            bacc_on(unseen.slides, trained.params, unseen_set, {true})};
}

void zero_shot_end_to_end() {
    const auto t0 = Clock::now();
    double worst = 1.0;
    std::string runs;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const ZeroShotRun r = zero_shot(0.05, seed, seed + 1);
        worst = std::min(worst, r.trained);
        runs += fmt("%s[seen %d/unseen %d] closed-form %.4f, trained %.4f", runs.empty() ? "" : "; ",
                    static_cast<int>(seed), static_cast<int>(seed + 1), r.closed_form, r.trained);
    }
    const double t = seconds_since(t0);
    report(5, "zero-shot synthetic end-to-end", worst >= 0.95 && t < 120.0,
           fmt("min bacc %.4f >= 0.95 over %s; %.2fs of 120s", worst, runs.c_str(), t));
}

void ablation_direction() {
    double fine_sum = 0.0, coarse_sum = 0.0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const double fine = zero_shot(0.3, seed, 1000 + seed).trained;
        const double coarse = zero_shot(0.3, seed, 1000 + seed, 2.0).trained;
        fine_sum += fine;
        coarse_sum += coarse;
        per_seed += fmt("%s%.3f/%.3f", per_seed.empty() ? "" : " ", fine, coarse);
    }
    report(6, "ablation direction", fine_sum > coarse_sum,
           fmt("mean bacc fine %.4f > coarse %.4f over 5 seeds (fine/coarse: %s)", fine_sum / 5, coarse_sum / 5,
               per_seed.c_str()));
}

// 7 ---------------------------------------------------------------------------

void prototype_distance() {
    std::mt19937_64 rng(7);
    double worst_orth = 0.0, worst_same = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 4 + static_cast<int>(rng() % 13);
        const int c = 2 + static_cast<int>(rng() % (d - 1));
        const Matrix q = Eigen::HouseholderQR<Matrix>(test::random_matrix(d, d, rng)).householderQ();
        PrototypeSet orth, same;
        orth.dim = same.dim = d;
        const Vector shared = test::random_vector(d, rng).normalized();
        for (int k = 0; k < c; ++k) {
            orth.prototypes.push_back({k, "o", "o", q.col(k)});
            same.prototypes.push_back({k, "s", "s", shared});
        }
        worst_orth = std::max(worst_orth, std::abs(interclass_distance(orth) - std::sqrt(2.0)));
        worst_same = std::max(worst_same, std::abs(interclass_distance(same)));
    }
    report(7, "prototype distance metric", worst_orth <= 1e-9 && worst_same <= 1e-9,
           fmt("50 sets: max |D - sqrt2| orthogonal %.3e, max |D| coincident %.3e, tol 1e-9", worst_orth, worst_same));
}

// 8 ---------------------------------------------------------------------------

void metrics_fixtures() {
    auto recs = [](const std::vector<int>& t, const std::vector<int>& p) {
        std::vector<EvalRecord> out;
        for (std::size_t i = 0; i < t.size(); ++i) out.push_back({"r", t[i], p[i], {}});
        return out;
    };
    std::vector<std::pair<std::string, double>> errors;
    auto expect = [&](const std::string& name, double got, double want) {
        errors.push_back({name, std::abs(got - want)});
    };
    expect("bacc perfect", balanced_accuracy(recs({0, 0, 1, 1, 1}, {0, 0, 1, 1, 1})), 1.0);
    expect("bacc [A,A,B,B,B]/[A,B,B,B,B]", balanced_accuracy(recs({0, 0, 1, 1, 1}, {0, 1, 1, 1, 1})), 0.75);
    const F1Scores perfect = f1_scores(recs({0, 1, 1}, {0, 1, 1}));
    expect("f1 macro perfect", perfect.macro, 1.0);
    expect("f1 weighted perfect", perfect.weighted, 1.0);
    const F1Scores f = f1_scores(recs({0, 0, 1}, {0, 1, 1}));
    expect("f1 class A", f.per_class[0], 2.0 / 3.0);
    expect("f1 class B", f.per_class[1], 2.0 / 3.0);
    expect("f1 macro", f.macro, 2.0 / 3.0);
    expect("f1 weighted", f.weighted, 2.0 / 3.0);
    expect("f1 never predicted", f1_scores(recs({0, 0, 1, 2}, {0, 0, 0, 0})).per_class[2], 0.0);
    expect("auc separated", auc_mann_whitney({0.9, 0.8}, {0.4, 0.3}), 1.0);
    expect("auc 2 of 4", auc_mann_whitney({0.9, 0.3}, {0.8, 0.4}), 0.5);
    expect("auc ties", auc_mann_whitney({0.6, 0.6}, {0.6, 0.6}), 0.5);
    const auto worst_it = std::max_element(errors.begin(), errors.end(),
                                           [](const auto& a, const auto& b) { return a.second < b.second; });
    const double worst = worst_it->second;
    const std::string worst_name = worst_it->first;
    report(8, "metrics validation", worst <= 1e-12,
           fmt("%d fixtures, max abs error %.3e (%s), tol 1e-12", static_cast<int>(errors.size()), worst,
               worst_name.c_str()));
}

// 9 ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool run_tool(const std::string& args) {
    const std::string cmd = std::string("\"") + FGPAN_TOOL + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
}

void determinism() {
    test::TempDir root("determinism");
    std::vector<std::string> digests;
    bool ok = true;
    int files = 0;
    for (const char* run : {"a", "b"}) {
        const fs::path dir = root.path() / run;
        const std::string data = (dir / "data").string();
        const std::string ckpt = (dir / "model.ckpt").string();
        const std::string pred = (dir / "pred.jsonl").string();
        ok = ok && run_tool("gen --out \"" + data + "\" --seed 9 --slides-per-class 4");
        ok = ok && run_tool("train --data \"" + data + "\" --out \"" + ckpt + "\" --seed 9 --iterations 40");
        ok = ok && run_tool("infer --data \"" + data + "\" --checkpoint \"" + ckpt + "\" --out \"" + pred + "\"");
        std::vector<fs::path> paths;
        for (const auto& e : fs::recursive_directory_iterator(dir))
            if (e.is_regular_file()) paths.push_back(fs::relative(e.path(), dir));
        std::sort(paths.begin(), paths.end());
        std::string all;
        for (const auto& p : paths) all += p.string() + "\n" + slurp(dir / p) + "\n";
        digests.push_back(all);
        files = static_cast<int>(paths.size());
    }
    const bool same = digests[0] == digests[1];
    report(9, "determinism", ok && same && files > 0,
           fmt("gen/train/infer in separate processes twice: %d files, %s", files,
               !ok ? "a command failed" : (same ? "byte-identical" : "outputs differ")));
}

}  // namespace

int main() {
    gradient_oracle();
    attention_oracle();
    normalization_suite();
    ranking_invariance();
    zero_shot_end_to_end();
    ablation_direction();
    prototype_distance();
    metrics_fixtures();
    determinism();
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
