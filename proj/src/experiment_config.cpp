#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "dace/error.hpp"
#include "dace/format.hpp"
#include "dace/harness.hpp"
#include "dace/toml_lite.hpp"

namespace dace::harness {

namespace {

using toml::Value;

[[noreturn]] void type_error(const std::string& key, const Value& v, const char* wanted)
{
    throw Error(ErrorCode::Parse, "config line " + std::to_string(v.line) + ": '" + key + "' must be " + wanted +
                                      ", got " + v.type_name());
}

double as_double(const std::string& key, const Value& v)
{
    if (v.type == Value::Type::Float) {
        return v.number;
    }
    if (v.type == Value::Type::Int) {
        return static_cast<double>(v.integer);
    }
    type_error(key, v, "a number");
}

std::int64_t as_int(const std::string& key, const Value& v)
{
    if (v.type != Value::Type::Int) {
        type_error(key, v, "an integer");
    }
    return v.integer;
}

int as_int32(const std::string& key, const Value& v)
{
    const std::int64_t i = as_int(key, v);
    if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
        type_error(key, v, "a 32-bit integer");
    }
    return static_cast<int>(i);
}

std::uint64_t as_seed(const std::string& key, const Value& v)
{
    const std::int64_t i = as_int(key, v);
    if (i < 0) {
        type_error(key, v, "a non-negative integer");
    }
    return static_cast<std::uint64_t>(i);
}

bool as_bool(const std::string& key, const Value& v)
{
    if (v.type != Value::Type::Bool) {
        type_error(key, v, "a boolean");
    }
    return v.boolean;
}

std::string as_string(const std::string& key, const Value& v)
{
    if (v.type != Value::Type::String) {
        type_error(key, v, "a string");
    }
    return v.text;
}

template <class T, class F>
std::vector<T> as_list(const std::string& key, const Value& v, F element)
{
    if (v.type != Value::Type::Array) {
        type_error(key, v, "an array");
    }
    std::vector<T> out;
    for (const Value& item : v.items) {
        out.push_back(element(key, item));
    }
    return out;
}

// One entry per accepted key: how to store the value into the config.
using Setter = std::function<void(ExperimentConfig&, const std::string&, const Value&)>;

const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        t["kind"] = [](ExperimentConfig& c, const std::string& k, const Value& v) {
            const auto kind = kind_from_name(as_string(k, v));
            if (!kind) {
                throw Error(ErrorCode::Parse, "config line " + std::to_string(v.line) + ": unknown kind '" + v.text +
                                                  "' (expected toy-sweep, seq-train, seq-ablate-beta or seq-eval)");
            }
            c.kind = *kind;
        };
        t["seeds"] = [](ExperimentConfig& c, const std::string& k, const Value& v) {
            c.seeds = as_list<std::uint64_t>(k, v, as_seed);
        };

        t["toy.learning_rate"] = [](auto& c, auto& k, auto& v) { c.toy.learning_rate = as_double(k, v); };
        t["toy.clip_epsilon"] = [](auto& c, auto& k, auto& v) { c.toy.clip_epsilon = as_double(k, v); };
        t["toy.epochs_per_update"] = [](auto& c, auto& k, auto& v) { c.toy.epochs_per_update = as_int32(k, v); };
        t["toy.batch_size"] = [](auto& c, auto& k, auto& v) { c.toy.batch_size = as_int32(k, v); };
        t["toy.iterations"] = [](auto& c, auto& k, auto& v) { c.toy.iterations = as_int32(k, v); };
        t["toy.steps_per_iteration"] = [](auto& c, auto& k, auto& v) { c.toy.steps_per_iteration = as_int32(k, v); };
        t["toy.init_mean"] = [](auto& c, auto& k, auto& v) { c.toy.init_mean = as_double(k, v); };
        t["toy.init_std"] = [](auto& c, auto& k, auto& v) { c.toy.init_std = as_double(k, v); };
        t["toy.optimizer"] = [](ExperimentConfig& c, const std::string& k, const Value& v) {
            const std::string name = as_string(k, v);
            if (name == "sgd") {
                c.toy.optimizer = toy::ToyOptimizer::Sgd;
            } else if (name == "adam") {
                c.toy.optimizer = toy::ToyOptimizer::Adam;
            } else {
                type_error(k, v, "\"sgd\" or \"adam\"");
            }
        };
        t["landscape.mode_offset"] = [](auto& c, auto& k, auto& v) { c.landscape.mode_offset = as_double(k, v); };
        t["landscape.wide_width"] = [](auto& c, auto& k, auto& v) { c.landscape.wide_width = as_double(k, v); };
        t["sweep.alphas"] = [](auto& c, auto& k, auto& v) { c.sweep_alphas = as_list<double>(k, v, as_double); };
        t["sweep.widths"] = [](auto& c, auto& k, auto& v) { c.sweep_widths = as_list<double>(k, v, as_double); };

        t["tasks.num_tasks"] = [](auto& c, auto& k, auto& v) { c.tasks.num_tasks = as_int32(k, v); };
        t["tasks.tiers"] = [](auto& c, auto& k, auto& v) { c.tasks.tiers = as_list<int>(k, v, as_int32); };
        t["tasks.fractions"] = [](auto& c, auto& k, auto& v) { c.tasks.fractions = as_list<double>(k, v, as_double); };
        t["tasks.seed"] = [](auto& c, auto& k, auto& v) { c.tasks.seed = as_seed(k, v); };
        t["policy.temperature"] = [](auto& c, auto& k, auto& v) { c.temperature = as_double(k, v); };

        t["grpo.group_size"] = [](auto& c, auto& k, auto& v) { c.grpo.group_size = as_int32(k, v); };
        t["grpo.eps_low"] = [](auto& c, auto& k, auto& v) { c.grpo.eps_low = as_double(k, v); };
        t["grpo.eps_high"] = [](auto& c, auto& k, auto& v) { c.grpo.eps_high = as_double(k, v); };
        t["grpo.learning_rate"] = [](auto& c, auto& k, auto& v) { c.grpo.learning_rate = as_double(k, v); };
        t["grpo.epochs_per_batch"] = [](auto& c, auto& k, auto& v) { c.grpo.epochs_per_batch = as_int32(k, v); };
        t["grpo.tasks_per_batch"] = [](auto& c, auto& k, auto& v) { c.grpo.tasks_per_batch = as_int32(k, v); };
        t["grpo.std_floor"] = [](auto& c, auto& k, auto& v) { c.grpo.std_floor = as_double(k, v); };
        t["grpo.steps"] = [](auto& c, auto& k, auto& v) { c.grpo.steps = as_int32(k, v); };
        t["grpo.max_response_length"] = [](auto& c, auto& k, auto& v) {
            c.grpo.max_response_length = as_int32(k, v);
        };

        t["dace.alpha_scale"] = [](auto& c, auto& k, auto& v) { c.dace.alpha_scale = as_double(k, v); };
        t["dace.beta_threshold"] = [](auto& c, auto& k, auto& v) { c.dace.beta_threshold = as_double(k, v); };
        t["dace.hack_penalty_enabled"] = [](auto& c, auto& k, auto& v) {
            c.dace.hack_penalty_enabled = as_bool(k, v);
        };
        t["dace.intrinsic_enabled"] = [](auto& c, auto& k, auto& v) { c.dace.intrinsic_enabled = as_bool(k, v); };
        t["dace.certainty_sign"] = [](ExperimentConfig& c, const std::string& k, const Value& v) {
            const std::string name = as_string(k, v);
            if (name == "confidence") {
                c.dace.certainty_sign = CertaintySign::Confidence;
            } else if (name == "surprisal") {
                c.dace.certainty_sign = CertaintySign::Surprisal;
            } else {
                type_error(k, v, "\"confidence\" or \"surprisal\"");
            }
        };

        t["eval.samples_per_task"] = [](auto& c, auto& k, auto& v) { c.eval_samples_per_task = as_int32(k, v); };
        t["eval.checkpoint"] = [](auto& c, auto& k, auto& v) { c.checkpoint = as_string(k, v); };
        t["ablate.betas"] = [](auto& c, auto& k, auto& v) { c.ablate_betas = as_list<double>(k, v, as_double); };
        t["ablate.warmup_steps"] = [](auto& c, auto& k, auto& v) { c.warmup_steps = as_int32(k, v); };
        return t;
    }();
    return table;
}

std::string list_text(const std::vector<double>& xs)
{
    std::string out = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out += (i ? ", " : "") + fmt_exact(xs[i]);
    }
    return out + "]";
}

template <class T>
std::string int_list_text(const std::vector<T>& xs)
{
    std::string out = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out += (i ? ", " : "") + std::to_string(xs[i]);
    }
    return out + "]";
}

// fmt_exact may print an integral double as "1"; force a float literal so
// the value keeps its type on re-read.
std::string float_text(double x)
{
    std::string s = fmt_exact(x);
    if (s.find_first_of(".eEn") == std::string::npos) {
        s += ".0";
    }
    return s;
}

std::string quoted(const std::string& s)
{
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    return out + "\"";
}

}  // namespace

std::string_view kind_name(ExperimentKind kind)
{
    switch (kind) {
    case ExperimentKind::ToySweep: return "toy-sweep";
    case ExperimentKind::SeqTrain: return "seq-train";
    case ExperimentKind::SeqAblateBeta: return "seq-ablate-beta";
    case ExperimentKind::SeqEval: return "seq-eval";
    }
    return "?";
}

std::optional<ExperimentKind> kind_from_name(std::string_view name)
{
    for (auto k : {ExperimentKind::ToySweep, ExperimentKind::SeqTrain, ExperimentKind::SeqAblateBeta,
                   ExperimentKind::SeqEval}) {
        if (kind_name(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

void ExperimentConfig::validate() const
{
    require(!seeds.empty(), "config: seeds must not be empty");
    require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(),
            "config: seeds must be distinct");
    switch (kind) {
    case ExperimentKind::ToySweep:
        require(!sweep_alphas.empty() && !sweep_widths.empty(), "config: sweep grids must not be empty");
        toy.validate();
        for (double w : sweep_widths) {
            toy::RewardLandscapeConfig land = landscape;
            land.narrow_width = w;
            land.validate();
        }
        for (double a : sweep_alphas) {
            require(std::isfinite(a), "config: sweep alphas must be finite");
        }
        break;
    case ExperimentKind::SeqAblateBeta:
        require(!ablate_betas.empty(), "config: ablate.betas must not be empty");
        require(warmup_steps >= 0 && warmup_steps < grpo.steps, "config: ablate.warmup_steps must lie in [0, steps)");
        for (double b : ablate_betas) {
            DaceConfig d = dace;
            d.beta_threshold = b;
            d.validate();
        }
        [[fallthrough]];
    case ExperimentKind::SeqTrain:
    case ExperimentKind::SeqEval:
        require(tasks.num_tasks >= 1, "config: tasks.num_tasks must be >= 1");
        require(!tasks.tiers.empty() && tasks.tiers.size() == tasks.fractions.size(),
                "config: tasks.tiers and tasks.fractions must be nonempty and of equal length");
        require(std::set<int>(tasks.tiers.begin(), tasks.tiers.end()).size() == tasks.tiers.size(),
                "config: tasks.tiers must be distinct");
        {
            double total = 0.0;
            for (double f : tasks.fractions) {
                require(std::isfinite(f) && f >= 0.0, "config: tasks.fractions must be non-negative");
                total += f;
            }
            require(std::abs(total - 1.0) < 1e-9, "config: tasks.fractions must sum to 1");
        }
        require(std::isfinite(temperature) && temperature > 0.0, "config: policy.temperature must be > 0");
        require(eval_samples_per_task >= 1, "config: eval.samples_per_task must be >= 1");
        grpo.validate();
        dace.validate();
        if (kind == ExperimentKind::SeqEval) {
            require(!checkpoint.empty(), "config: seq-eval needs eval.checkpoint");
        }
        break;
    }
}

ExperimentConfig parse_config(std::string_view text, const std::vector<std::string>& overrides)
{
    toml::Document doc = toml::parse(text);
    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw Error(ErrorCode::Parse, "override '" + ov + "' is not of the form key=value");
        }
        const std::string key = ov.substr(0, eq);
        const std::string rhs = ov.substr(eq + 1);
        toml::Value v;
        try {
            v = toml::parse_value(rhs);
        } catch (const Error&) {
            // Bare words such as --set kind=seq-train read as strings.
            v.type = toml::Value::Type::String;
            v.text = rhs;
        }
        v.line = 0;
        doc[key] = v;
    }

    ExperimentConfig cfg;
    const auto& table = setters();
    for (const auto& [key, value] : doc) {
        const auto it = table.find(key);
        if (it == table.end()) {
            throw Error(ErrorCode::Parse, "config line " + std::to_string(value.line) + ": unknown key '" + key + "'");
        }
        it->second(cfg, key, value);
    }
    if (!doc.contains("kind")) {
        throw Error(ErrorCode::Parse, "config: missing required key 'kind'");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open config file '" + path.string() + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), overrides);
}

std::string to_toml(const ExperimentConfig& c)
{
    std::ostringstream os;
    os << "kind = " << quoted(std::string(kind_name(c.kind))) << '\n';
    os << "seeds = " << int_list_text(c.seeds) << "\n\n";

    os << "[toy]\n"
       << "learning_rate = " << float_text(c.toy.learning_rate) << '\n'
       << "clip_epsilon = " << float_text(c.toy.clip_epsilon) << '\n'
       << "epochs_per_update = " << c.toy.epochs_per_update << '\n'
       << "batch_size = " << c.toy.batch_size << '\n'
       << "iterations = " << c.toy.iterations << '\n'
       << "steps_per_iteration = " << c.toy.steps_per_iteration << '\n'
       << "init_mean = " << float_text(c.toy.init_mean) << '\n'
       << "init_std = " << float_text(c.toy.init_std) << '\n'
       << "optimizer = " << (c.toy.optimizer == toy::ToyOptimizer::Sgd ? "\"sgd\"" : "\"adam\"") << "\n\n";
    os << "[landscape]\n"
       << "mode_offset = " << float_text(c.landscape.mode_offset) << '\n'
       << "wide_width = " << float_text(c.landscape.wide_width) << "\n\n";
    os << "[sweep]\n"
       << "alphas = " << list_text(c.sweep_alphas) << '\n'
       << "widths = " << list_text(c.sweep_widths) << "\n\n";

    os << "[tasks]\n"
       << "num_tasks = " << c.tasks.num_tasks << '\n'
       << "tiers = " << int_list_text(c.tasks.tiers) << '\n'
       << "fractions = " << list_text(c.tasks.fractions) << '\n'
       << "seed = " << c.tasks.seed << "\n\n";
    os << "[policy]\n"
       << "temperature = " << float_text(c.temperature) << "\n\n";
    os << "[grpo]\n"
       << "group_size = " << c.grpo.group_size << '\n'
       << "eps_low = " << float_text(c.grpo.eps_low) << '\n'
       << "eps_high = " << float_text(c.grpo.eps_high) << '\n'
       << "learning_rate = " << float_text(c.grpo.learning_rate) << '\n'
       << "epochs_per_batch = " << c.grpo.epochs_per_batch << '\n'
       << "tasks_per_batch = " << c.grpo.tasks_per_batch << '\n'
       << "std_floor = " << float_text(c.grpo.std_floor) << '\n'
       << "steps = " << c.grpo.steps << '\n'
       << "max_response_length = " << c.grpo.max_response_length << "\n\n";
    os << "[dace]\n"
       << "alpha_scale = " << float_text(c.dace.alpha_scale) << '\n'
       << "beta_threshold = " << float_text(c.dace.beta_threshold) << '\n'
       << "hack_penalty_enabled = " << (c.dace.hack_penalty_enabled ? "true" : "false") << '\n'
       << "intrinsic_enabled = " << (c.dace.intrinsic_enabled ? "true" : "false") << '\n'
       << "certainty_sign = "
       << (c.dace.certainty_sign == CertaintySign::Confidence ? "\"confidence\"" : "\"surprisal\"") << "\n\n";
    os << "[eval]\n"
       << "samples_per_task = " << c.eval_samples_per_task << '\n'
       << "checkpoint = " << quoted(c.checkpoint) << "\n\n";
    os << "[ablate]\n"
       << "betas = " << list_text(c.ablate_betas) << '\n'
       << "warmup_steps = " << c.warmup_steps << '\n';
    return os.str();
}

std::string config_hash(const ExperimentConfig& cfg)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_toml(cfg)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace dace::harness
