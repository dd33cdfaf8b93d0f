#include "dace/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "dace/error.hpp"
#include "dace/format.hpp"
#include "dace/rng.hpp"
#include "dace/seq_env.hpp"
#include "dace/seq_policy.hpp"

#ifndef DACE_VERSION
#define DACE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace dace::harness {

namespace {

constexpr const char* kManifest = "manifest";
constexpr const char* kEffectiveConfig = "config.effective.toml";
constexpr const char* kPlotData = "plot_data.csv";
// Stream index reserved for evaluation sampling, away from the training streams.
constexpr std::uint64_t kEvalStream = 0x65766131ULL;

// Runs fn(0..count-1) on up to `jobs` threads. Each index is independent, so
// the results do not depend on the thread count. The first failure by index
// is rethrown after all workers finish.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn)
{
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(jobs, 1)));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    }
    return os;
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot read '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fnv_hex(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<TaskInstance> make_tasks(const TaskSpec& spec)
{
    std::map<int, double> mix;
    for (std::size_t i = 0; i < spec.tiers.size(); ++i) {
        mix[spec.tiers[i]] = spec.fractions[i];
    }
    return generate_tasks(spec.num_tasks, mix, spec.seed);
}

std::string seeds_text(const std::vector<std::uint64_t>& seeds)
{
    std::string s;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        s += (i ? "," : "") + std::to_string(seeds[i]);
    }
    return s;
}

// ---- artifact writers ------------------------------------------------------

void write_toy_traces(std::ostream& os, const toy::SweepResult& res)
{
    os << "alpha,sigma_r1,seed,iteration,mean,std,expected_reward,surrogate_loss\n";
    for (const auto& row : res.rows) {
        for (const auto& t : row.trace) {
            os << fmt6(row.alpha) << ',' << fmt6(row.sigma_r1) << ',' << row.seed << ',' << t.iteration << ','
               << fmt6(t.mean) << ',' << fmt6(t.stddev) << ',' << fmt6(t.expected_reward) << ','
               << fmt6(t.surrogate_loss) << '\n';
        }
    }
}

std::vector<std::string> run_toy_sweep(const ExperimentConfig& cfg, const fs::path& out, int jobs)
{
    const auto res = toy::fixed_strategy_sweep(cfg.sweep_alphas, cfg.sweep_widths, cfg.seeds, cfg.toy,
                                               cfg.landscape, jobs);
    {
        auto os = open_out(out / "sweep_rows.csv");
        toy::write_sweep_rows_csv(os, res);
    }
    {
        auto os = open_out(out / "sweep_report.csv");
        toy::write_sweep_cells_csv(os, res);
    }
    {
        auto os = open_out(out / "toy_traces.csv");
        write_toy_traces(os, res);
    }
    std::vector<std::string> files{"sweep_rows.csv", "sweep_report.csv", "toy_traces.csv"};
    bool any_failed = false;
    for (const auto& row : res.rows) {
        any_failed = any_failed || !row.ok;
    }
    if (any_failed) {
        auto os = open_out(out / "failures.csv");
        os << "alpha,sigma_r1,seed,error\n";
        for (const auto& row : res.rows) {
            if (!row.ok) {
                std::string msg = row.error;
                std::replace(msg.begin(), msg.end(), ',', ';');
                os << fmt6(row.alpha) << ',' << fmt6(row.sigma_r1) << ',' << row.seed << ',' << msg << '\n';
            }
        }
        files.push_back("failures.csv");
    }
    return files;
}

void write_eval(const fs::path& out, const std::vector<std::uint64_t>& seeds, const std::vector<EvalResult>& evals,
                int k)
{
    auto summary = open_out(out / "eval.csv");
    summary << "seed,samples_per_task,mean_at_k,pass_at_k\n";
    auto curve = open_out(out / "pass_curve.csv");
    curve << "seed,k,pass_at_k\n";
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        summary << seeds[i] << ',' << k << ',' << fmt6(evals[i].mean_at_k) << ',' << fmt6(evals[i].pass_at_k) << '\n';
        for (std::size_t j = 0; j < evals[i].pass_curve.size(); ++j) {
            curve << seeds[i] << ',' << j + 1 << ',' << fmt6(evals[i].pass_curve[j]) << '\n';
        }
    }
}

TrainResult train_to_csv(const TabularPolicy& init, const std::vector<TaskInstance>& tasks, const GrpoConfig& grpo,
                         const DaceConfig& dace_cfg, std::uint64_t seed, const fs::path& csv)
{
    auto os = open_out(csv);
    write_metrics_csv_header(os);
    os.flush();
    return train(init, tasks, grpo, dace_cfg, seed, [&os](const TrainingMetricsRecord& rec) {
        write_metrics_csv_row(os, rec);
        os.flush();
    });
}

std::vector<std::string> run_seq_train(const ExperimentConfig& cfg, const fs::path& out, int jobs)
{
    const auto tasks = make_tasks(cfg.tasks);
    {
        auto os = open_out(out / "tasks.tsv");
        write_tasks(os, tasks);
    }
    std::vector<std::string> files{"tasks.tsv"};
    std::vector<EvalResult> evals(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), jobs, [&](std::size_t i) {
        const std::uint64_t seed = cfg.seeds[i];
        const auto res = train_to_csv(TabularPolicy(cfg.temperature), tasks, cfg.grpo, cfg.dace, seed,
                                      out / ("metrics_seed" + std::to_string(seed) + ".csv"));
        auto ck = open_out(out / ("policy_seed" + std::to_string(seed) + ".ckpt"));
        write_checkpoint(ck, res.policy);
        evals[i] = evaluate(res.policy, tasks, cfg.eval_samples_per_task, derive_seed(seed, kEvalStream),
                            cfg.grpo.max_response_length);
    });
    for (auto seed : cfg.seeds) {
        files.push_back("metrics_seed" + std::to_string(seed) + ".csv");
        files.push_back("policy_seed" + std::to_string(seed) + ".ckpt");
    }
    write_eval(out, cfg.seeds, evals, cfg.eval_samples_per_task);
    files.push_back("eval.csv");
    files.push_back("pass_curve.csv");
    return files;
}

std::string beta_tag(double beta) { return fmt6(beta); }

std::vector<std::string> run_seq_ablate(const ExperimentConfig& cfg, const fs::path& out, int jobs)
{
    const auto tasks = make_tasks(cfg.tasks);
    {
        auto os = open_out(out / "tasks.tsv");
        write_tasks(os, tasks);
    }
    std::vector<std::string> files{"tasks.tsv"};

    const std::size_t nb = cfg.ablate_betas.size();
    const std::size_t ns = cfg.seeds.size();
    struct Summary {
        double entropy = 0.0;
        double length = 0.0;
        double certainty = 0.0;
        double final_external = 0.0;
    };
    std::vector<Summary> summaries(nb * ns);
    parallel_for(nb * ns, jobs, [&](std::size_t idx) {
        const double beta = cfg.ablate_betas[idx / ns];
        const std::uint64_t seed = cfg.seeds[idx % ns];
        DaceConfig d = cfg.dace;
        d.beta_threshold = beta;
        const auto res = train_to_csv(TabularPolicy(cfg.temperature), tasks, cfg.grpo, d, seed,
                                      out / ("metrics_beta" + beta_tag(beta) + "_seed" + std::to_string(seed) + ".csv"));
        Summary s;
        int n = 0;
        for (const auto& m : res.metrics) {
            if (m.step >= cfg.warmup_steps) {
                s.entropy += m.mean_step_entropy;
                s.length += m.mean_response_length;
                s.certainty += m.mean_raw_certainty;
                ++n;
            }
        }
        s.entropy /= n;
        s.length /= n;
        s.certainty /= n;
        s.final_external = res.metrics.back().mean_external_reward;
        summaries[idx] = s;
    });

    auto sum_os = open_out(out / "ablation_summary.csv");
    sum_os << "beta,seed,mean_step_entropy,mean_response_length,mean_raw_certainty,final_external_reward\n";
    auto rep_os = open_out(out / "ablation_report.csv");
    rep_os << "beta,median_step_entropy,median_response_length,median_raw_certainty\n";
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t m = v.size() / 2;
        return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    };
    for (std::size_t b = 0; b < nb; ++b) {
        std::vector<double> h, l, c;
        for (std::size_t s = 0; s < ns; ++s) {
            const auto& x = summaries[b * ns + s];
            sum_os << fmt6(cfg.ablate_betas[b]) << ',' << cfg.seeds[s] << ',' << fmt6(x.entropy) << ','
                   << fmt6(x.length) << ',' << fmt6(x.certainty) << ',' << fmt6(x.final_external) << '\n';
            files.push_back("metrics_beta" + beta_tag(cfg.ablate_betas[b]) + "_seed" + std::to_string(cfg.seeds[s]) +
                            ".csv");
            h.push_back(x.entropy);
            l.push_back(x.length);
            c.push_back(x.certainty);
        }
        rep_os << fmt6(cfg.ablate_betas[b]) << ',' << fmt6(median(h)) << ',' << fmt6(median(l)) << ','
               << fmt6(median(c)) << '\n';
    }
    files.push_back("ablation_summary.csv");
    files.push_back("ablation_report.csv");
    return files;
}

std::vector<std::string> run_seq_eval(const ExperimentConfig& cfg, const fs::path& out, int jobs)
{
    const auto tasks = make_tasks(cfg.tasks);
    std::ifstream in(cfg.checkpoint, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot read checkpoint '" + cfg.checkpoint + "'");
    }
    const TabularPolicy policy = read_checkpoint(in);
    std::vector<EvalResult> evals(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), jobs, [&](std::size_t i) {
        evals[i] = evaluate(policy, tasks, cfg.eval_samples_per_task, derive_seed(cfg.seeds[i], kEvalStream),
                            cfg.grpo.max_response_length);
    });
    write_eval(out, cfg.seeds, evals, cfg.eval_samples_per_task);
    return {"eval.csv", "pass_curve.csv"};
}

std::vector<std::string> run_impl(const ExperimentConfig& cfg, const fs::path& out, int jobs,
                                  const std::string& seed_source)
{
    cfg.validate();
    std::string checkpoint_hash;
    if (cfg.kind == ExperimentKind::SeqEval) {
        checkpoint_hash = fnv_hex(read_file(cfg.checkpoint));
    }
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        throw Error(ErrorCode::Io, "cannot create output directory '" + out.string() + "': " + ec.message());
    }

    std::vector<std::string> files;
    switch (cfg.kind) {
    case ExperimentKind::ToySweep: files = run_toy_sweep(cfg, out, jobs); break;
    case ExperimentKind::SeqTrain: files = run_seq_train(cfg, out, jobs); break;
    case ExperimentKind::SeqAblateBeta: files = run_seq_ablate(cfg, out, jobs); break;
    case ExperimentKind::SeqEval: files = run_seq_eval(cfg, out, jobs); break;
    }

    {
        auto os = open_out(out / kEffectiveConfig);
        os << to_toml(cfg);
    }
    files.push_back(kEffectiveConfig);

    auto os = open_out(out / kManifest);
    os << "kind=" << kind_name(cfg.kind) << '\n'
       << "config_hash=" << config_hash(cfg) << '\n'
       << "config_file=" << kEffectiveConfig << '\n'
       << "seeds=" << seeds_text(cfg.seeds) << '\n'
       << "seed_source=" << seed_source << '\n'
       << "code_version=" << code_version() << '\n';
    if (!checkpoint_hash.empty()) {
        os << "checkpoint_hash=" << checkpoint_hash << '\n';
    }
    std::string listing;
    for (std::size_t i = 0; i < files.size(); ++i) {
        listing += (i ? "," : "") + files[i];
    }
    os << "artifacts=" << listing << '\n';
    files.push_back(kManifest);
    return files;
}

std::map<std::string, std::string> read_manifest(const fs::path& run_dir)
{
    const fs::path path = run_dir / kManifest;
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::Io, "run directory '" + run_dir.string() + "' has no manifest");
    }
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::Parse, "corrupt manifest line '" + line + "'");
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char* key : {"kind", "config_hash", "config_file", "seeds"}) {
        if (!kv.contains(key)) {
            throw Error(ErrorCode::Parse, std::string("manifest is missing '") + key + "'");
        }
    }
    return kv;
}

// ---- plot data ---------------------------------------------------------------

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const
    {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw Error(ErrorCode::Parse, "CSV is missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    }
};

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    return out;
}

Table read_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot read '" + path.string() + "'");
    }
    Table t;
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorCode::Parse, "'" + path.string() + "' is empty");
    }
    t.header = split_csv(line);
    while (std::getline(in, line)) {
        if (!line.empty()) {
            t.rows.push_back(split_csv(line));
            if (t.rows.back().size() != t.header.size()) {
                throw Error(ErrorCode::Parse, "'" + path.string() + "' has a truncated row");
            }
        }
    }
    return t;
}

double num(const std::string& s)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::Parse, "bad number '" + s + "' in run CSV");
}

// Series of (x -> mean y) accumulated across files, keyed by (figure, series).
class PlotAccumulator {
public:
    void add(const std::string& figure, const std::string& series, long x, double y)
    {
        auto& cell = data_[{figure, series}][x];
        cell.first += y;
        cell.second += 1;
    }

    std::size_t write(std::ostream& os) const
    {
        os << "figure,series,x,y\n";
        std::size_t n = 0;
        for (const auto& [key, points] : data_) {
            for (const auto& [x, acc] : points) {
                os << key.first << ',' << key.second << ',' << x << ',' << fmt6(acc.first / acc.second) << '\n';
                ++n;
            }
        }
        return n;
    }

private:
    std::map<std::pair<std::string, std::string>, std::map<long, std::pair<double, int>>> data_;
};

void add_dynamics(PlotAccumulator& plot, const Table& t, const std::string& figure_prefix, const std::string& series)
{
    const auto step = t.column("step");
    const std::pair<const char*, const char*> metrics[] = {
        {"certainty", "mean_raw_certainty"}, {"entropy", "mean_step_entropy"}, {"length", "mean_response_length"}};
    for (const auto& row : t.rows) {
        const long x = static_cast<long>(num(row[step]));
        for (const auto& [name, col] : metrics) {
            const double y = num(row[t.column(col)]);
            if (figure_prefix.empty()) {
                plot.add("dynamics", name, x, y);
            } else {
                plot.add(figure_prefix + name, series, x, y);
            }
        }
    }
}

}  // namespace

std::string code_version() { return std::string("dace-lab ") + DACE_VERSION; }

std::vector<std::string> run(const ExperimentConfig& cfg, const fs::path& out_dir, const RunOptions& opts)
{
    ExperimentConfig eff = cfg;
    std::string source = "config";
    if (opts.master_seed) {
        // 53-bit seeds stay exact in any consumer that reads numbers as doubles.
        for (std::size_t i = 0; i < eff.seeds.size(); ++i) {
            eff.seeds[i] = derive_seed(*opts.master_seed, i) & ((1ULL << 53) - 1);
        }
        source = "master:" + std::to_string(*opts.master_seed);
    }
    return run_impl(eff, out_dir, opts.jobs, source);
}

std::vector<std::string> replay(const fs::path& run_dir, const fs::path& out_dir, int jobs)
{
    const auto manifest = read_manifest(run_dir);
    const ExperimentConfig cfg = load_config(run_dir / manifest.at("config_file"));
    if (config_hash(cfg) != manifest.at("config_hash")) {
        throw Error(ErrorCode::Parse, "effective config in '" + run_dir.string() + "' does not match its manifest hash");
    }
    if (manifest.contains("checkpoint_hash") && fnv_hex(read_file(cfg.checkpoint)) != manifest.at("checkpoint_hash")) {
        throw Error(ErrorCode::Parse, "checkpoint '" + cfg.checkpoint + "' changed since the recorded run");
    }
    const auto source = manifest.contains("seed_source") ? manifest.at("seed_source") : std::string("config");
    return run_impl(cfg, out_dir, jobs, source);
}

std::size_t emit_plot_data(const fs::path& run_dir)
{
    const auto manifest = read_manifest(run_dir);
    const auto kind = kind_from_name(manifest.at("kind"));
    if (!kind) {
        throw Error(ErrorCode::Parse, "manifest names unknown kind '" + manifest.at("kind") + "'");
    }
    const ExperimentConfig cfg = load_config(run_dir / manifest.at("config_file"));

    std::vector<std::string> needed;
    switch (*kind) {
    case ExperimentKind::ToySweep: needed = {"toy_traces.csv"}; break;
    case ExperimentKind::SeqTrain:
        for (auto s : cfg.seeds) {
            needed.push_back("metrics_seed" + std::to_string(s) + ".csv");
        }
        break;
    case ExperimentKind::SeqAblateBeta:
        for (double b : cfg.ablate_betas) {
            for (auto s : cfg.seeds) {
                needed.push_back("metrics_beta" + beta_tag(b) + "_seed" + std::to_string(s) + ".csv");
            }
        }
        break;
    case ExperimentKind::SeqEval: needed = {"pass_curve.csv"}; break;
    }
    std::string missing;
    for (const auto& f : needed) {
        if (!fs::exists(run_dir / f)) {
            missing += (missing.empty() ? "" : ", ") + f;
        }
    }
    if (!missing.empty()) {
        throw Error(ErrorCode::Io, "run '" + run_dir.string() + "' is incomplete; missing: " + missing);
    }

    PlotAccumulator plot;
    switch (*kind) {
    case ExperimentKind::ToySweep: {
        const Table t = read_csv(run_dir / needed[0]);
        const auto a = t.column("alpha"), w = t.column("sigma_r1"), it = t.column("iteration");
        const auto r = t.column("expected_reward"), sd = t.column("std");
        for (const auto& row : t.rows) {
            const long x = static_cast<long>(num(row[it]));
            plot.add("toy_reward_sigma_r1=" + row[w], "alpha=" + row[a], x, num(row[r]));
            plot.add("toy_std_sigma_r1=" + row[w], "alpha=" + row[a], x, num(row[sd]));
        }
        break;
    }
    case ExperimentKind::SeqTrain:
        for (const auto& f : needed) {
            add_dynamics(plot, read_csv(run_dir / f), "", "");
        }
        break;
    case ExperimentKind::SeqAblateBeta: {
        std::size_t i = 0;
        for (double b : cfg.ablate_betas) {
            for (std::size_t s = 0; s < cfg.seeds.size(); ++s, ++i) {
                add_dynamics(plot, read_csv(run_dir / needed[i]), "ablation_", "beta=" + beta_tag(b));
            }
        }
        break;
    }
    case ExperimentKind::SeqEval: {
        const Table t = read_csv(run_dir / needed[0]);
        const auto s = t.column("seed"), k = t.column("k"), p = t.column("pass_at_k");
        for (const auto& row : t.rows) {
            plot.add("pass_at_k", "seed=" + row[s], static_cast<long>(num(row[k])), num(row[p]));
        }
        break;
    }
    }
    auto os = open_out(run_dir / kPlotData);
    return plot.write(os);
}

}  // namespace dace::harness
