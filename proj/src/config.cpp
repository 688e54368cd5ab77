#include "mcac/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "mcac/errors.hpp"

namespace mcac {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct Context {
    std::string key;
    std::string where;  // "line 3", "flag", or "default"

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError(key + ": " + what + " (" + where + ")");
    }
};

template <typename T>
T parse_integer(const std::string& v, const Context& ctx) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (v.empty() || ec != std::errc{} || ptr != end) {
        ctx.fail("expected an integer, got '" + v + "'");
    }
    return out;
}

double parse_real(const std::string& v, const Context& ctx) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (v.empty() || ec != std::errc{} || ptr != end || !std::isfinite(out)) {
        ctx.fail("expected a real number, got '" + v + "'");
    }
    return out;
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& v, const Context& ctx, F parse_one) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) ctx.fail("empty list element in '" + v + "'");
        out.push_back(parse_one(item, ctx));
    }
    if (out.empty()) ctx.fail("expected a comma-separated list");
    return out;
}

template <typename E, typename F>
E parse_enum(const std::string& v, const Context& ctx, F parse) {
    try {
        return parse(v);
    } catch (const ConfigError& e) {
        ctx.fail(e.what());
    }
}

using Setter = std::function<void(RunConfig&, const std::string&, const Context&)>;

struct KeySpec {
    std::string key;
    std::string default_value;
    Setter set;
};

void require(bool ok, const Context& ctx, const std::string& what) {
    if (!ok) ctx.fail(what);
}

const std::vector<KeySpec>& key_table() {
    using harness::AgentKind;
    static const std::vector<KeySpec> table = {
        {"scenario", "round_robin_sweep",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.scenario = parse_enum<harness::Scenario>(v, x, harness::parse_scenario);
         }},
        {"agent", "ac",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.agent = parse_enum<AgentKind>(v, x, harness::parse_agent);
         }},
        // Pattern defaults depend on the scenario; "auto" is resolved in finish().
        {"pattern", "auto",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.pattern.kind = parse_enum<PatternKind>(v, x, parse_pattern_kind);
         }},
        {"channels", "auto",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.pattern.n_channels = parse_integer<int>(v, x);
             require(c.spec.pattern.n_channels >= 2, x, "must be >= 2");
         }},
        {"subsets", "auto",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.pattern.n_subsets = parse_integer<int>(v, x);
             require(c.spec.pattern.n_subsets >= 1, x, "must be >= 1");
         }},
        {"p", "0.9",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.pattern.p = parse_real(v, x);
             require(c.spec.pattern.p >= 0.0 && c.spec.pattern.p <= 1.0, x, "must lie in [0,1]");
         }},
        {"order_seed", "1",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.pattern.order_seed = parse_integer<std::uint64_t>(v, x);
         }},
        {"second_order_seed", "2",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.second_order_seed = parse_integer<std::uint64_t>(v, x);
         }},
        {"channel_list", "16,32,64",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.channel_list = parse_list<int>(v, x, parse_integer<int>);
             for (int n : c.spec.channel_list) require(n >= 2, x, "channel counts must be >= 2");
         }},
        {"p_list", "0.75,0.8,0.85,0.9,0.95",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.p_list = parse_list<double>(v, x, parse_real);
             for (double p : c.spec.p_list) require(p >= 0.0 && p <= 1.0, x, "must lie in [0,1]");
         }},
        {"order_seeds", "1,2,3,4,5,6,7,8,9,10",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.order_seeds = parse_list<std::uint64_t>(v, x, parse_integer<std::uint64_t>);
         }},
        {"slots", "50000",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.slots = parse_integer<std::int64_t>(v, x);
             require(c.spec.slots >= 1, x, "must be >= 1");
         }},
        {"seeds", "5",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.n_seeds = parse_integer<int>(v, x);
             require(c.spec.n_seeds >= 1, x, "must be >= 1");
         }},
        // "auto" draws a base seed from system entropy; it is logged.
        {"seed", "auto",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.seed_base = parse_integer<std::uint64_t>(v, x);
         }},
        {"window_len", "500",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.window_len = parse_integer<int>(v, x);
             require(c.spec.window_len >= 1, x, "must be >= 1");
         }},
        {"eval_fraction", "0.2",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.eval_fraction = parse_real(v, x);
             require(c.spec.eval_fraction > 0.0 && c.spec.eval_fraction <= 1.0, x,
                     "must lie in (0,1]");
         }},
        {"pretrain_slots", "50000",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.pretrain_slots = parse_integer<std::int64_t>(v, x);
             require(c.spec.pretrain_slots >= 0, x, "must be >= 0");
         }},
        {"change_at", "500",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.change_at = parse_integer<std::int64_t>(v, x);
             require(c.spec.change_at >= 1, x, "must be >= 1");
         }},
        {"runtime_steps", "10000",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.runtime_steps = parse_integer<std::int64_t>(v, x);
             require(c.spec.runtime_steps >= 1, x, "must be >= 1");
         }},
        {"runtime_warmup", "1000",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.runtime_warmup = parse_integer<std::int64_t>(v, x);
             require(c.spec.runtime_warmup >= 0, x, "must be >= 0");
         }},
        {"threads", "0",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.threads = parse_integer<int>(v, x);
             require(c.spec.threads >= 0, x, "must be >= 0");
         }},
        {"out", "results", [](RunConfig& c, const std::string& v, const Context&) { c.out_dir = v; }},
        {"checkpoint", "",
         [](RunConfig& c, const std::string& v, const Context&) { c.checkpoint = v; }},
        {"load_checkpoint", "",
         [](RunConfig& c, const std::string& v, const Context&) { c.load_checkpoint = v; }},

        {"ac.window", "0",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.ac.window = parse_integer<int>(v, x);
             require(c.spec.settings.ac.window >= 0, x, "must be >= 0 (0 = N)");
         }},
        {"ac.gamma", "0.5",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.ac.gamma = parse_real(v, x);
             require(c.spec.settings.ac.gamma > 0.0 && c.spec.settings.ac.gamma < 1.0, x,
                     "must lie strictly inside (0,1)");
         }},
        {"ac.hidden", "200",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.ac.hidden_units = parse_integer<int>(v, x);
             require(c.spec.settings.ac.hidden_units >= 1, x, "must be >= 1");
         }},
        {"ac.actor_lr", "0.001",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.ac.actor_lr.base_rate = parse_real(v, x);
             require(c.spec.settings.ac.actor_lr.base_rate > 0.0, x, "must be > 0");
         }},
        {"ac.critic_lr", "0.005",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.ac.critic_lr.base_rate = parse_real(v, x);
             require(c.spec.settings.ac.critic_lr.base_rate > 0.0, x, "must be > 0");
         }},
        {"ac.lr_decay", "0.95",
         [](RunConfig& c, const std::string& v, const Context& x) {
             const double d = parse_real(v, x);
             require(d > 0.0 && d <= 1.0, x, "must lie in (0,1]");
             c.spec.settings.ac.actor_lr.decay_factor = d;
             c.spec.settings.ac.critic_lr.decay_factor = d;
         }},
        {"ac.lr_decay_interval", "5000",
         [](RunConfig& c, const std::string& v, const Context& x) {
             const auto d = parse_integer<std::int64_t>(v, x);
             require(d >= 1, x, "must be >= 1");
             c.spec.settings.ac.actor_lr.decay_interval = d;
             c.spec.settings.ac.critic_lr.decay_interval = d;
         }},
        {"ac.optimizer", "adam",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.ac.optimizer =
                 parse_enum<tinynet::OptimizerKind>(v, x, tinynet::parse_optimizer);
         }},
        {"ac.selection", "argmax",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.ac.selection = parse_enum<SelectionMode>(v, x, parse_selection_mode);
         }},

        {"dqn.window", "0",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.window = parse_integer<int>(v, x);
             require(c.spec.settings.dqn.window >= 0, x, "must be >= 0 (0 = N)");
         }},
        {"dqn.gamma", "0.5",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.gamma = parse_real(v, x);
             require(c.spec.settings.dqn.gamma > 0.0 && c.spec.settings.dqn.gamma < 1.0, x,
                     "must lie strictly inside (0,1)");
         }},
        {"dqn.hidden", "200,200",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.hidden_units = parse_list<int>(v, x, parse_integer<int>);
             for (int h : c.spec.settings.dqn.hidden_units) require(h >= 1, x, "must be >= 1");
         }},
        {"dqn.minibatch", "32",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.minibatch = parse_integer<std::size_t>(v, x);
             require(c.spec.settings.dqn.minibatch >= 1, x, "must be >= 1");
         }},
        {"dqn.buffer", "100000",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.buffer_capacity = parse_integer<std::size_t>(v, x);
             require(c.spec.settings.dqn.buffer_capacity >= 1, x, "must be >= 1");
         }},
        {"dqn.warmup", "500",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.warmup = parse_integer<std::size_t>(v, x);
         }},
        {"dqn.lr", "0.0005",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.lr.base_rate = parse_real(v, x);
             require(c.spec.settings.dqn.lr.base_rate > 0.0, x, "must be > 0");
         }},
        {"dqn.lr_decay", "0.95",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.lr.decay_factor = parse_real(v, x);
             require(c.spec.settings.dqn.lr.decay_factor > 0.0 &&
                         c.spec.settings.dqn.lr.decay_factor <= 1.0,
                     x, "must lie in (0,1]");
         }},
        {"dqn.lr_decay_interval", "5000",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.lr.decay_interval = parse_integer<std::int64_t>(v, x);
             require(c.spec.settings.dqn.lr.decay_interval >= 1, x, "must be >= 1");
         }},
        {"dqn.optimizer", "adam",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.optimizer =
                 parse_enum<tinynet::OptimizerKind>(v, x, tinynet::parse_optimizer);
         }},
        {"dqn.epsilon_start", "0.9",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.epsilon_start = parse_real(v, x);
         }},
        {"dqn.epsilon_end", "0.02",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.epsilon_end = parse_real(v, x);
         }},
        {"dqn.epsilon_decay_slots", "10000",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.epsilon_decay_slots = parse_integer<std::int64_t>(v, x);
         }},
        {"dqn.target_sync", "500",
         [](RunConfig& c, const std::string& v, const Context& x) {
             c.spec.settings.dqn.target_sync_period = parse_integer<std::int64_t>(v, x);
         }},
    };
    return table;
}

const KeySpec* find_key(const std::string& key) {
    for (const auto& k : key_table()) {
        if (k.key == key) return &k;
    }
    return nullptr;
}

void assign(std::map<std::string, std::pair<std::string, std::string>>& values,
            const std::string& key, const std::string& value, const std::string& where) {
    if (find_key(key) == nullptr) {
        throw ConfigError("unknown key '" + key + "' (" + where + ")");
    }
    values[key] = {value, where};
}

RunConfig finish(std::map<std::string, std::pair<std::string, std::string>> values) {
    // Scenario-dependent environment defaults.
    const bool time_varying = values["scenario"].first == "time_varying";
    auto fill_auto = [&](const std::string& key, const std::string& tv, const std::string& other) {
        auto& [v, where] = values[key];
        if (v == "auto") {
            v = time_varying ? tv : other;
            where = "default";
        }
    };
    fill_auto("pattern", "correlated_subsets", "round_robin");
    fill_auto("channels", "32", "16");
    fill_auto("subsets", "8", "1");

    RunConfig config;
    auto& seed = values["seed"];
    if (seed.first == "auto") {
        std::random_device rd;
        const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) | rd();
        seed = {std::to_string(s), "entropy"};
        config.seed_from_entropy = true;
    }
    for (const auto& k : key_table()) {
        const auto& [v, where] = values.at(k.key);
        k.set(config, v, Context{k.key, where});
        config.resolved[k.key] = v;
    }
    // Cross-key constraints surface as ConfigError from the modules.
    try {
        config.spec.validate();
        if (config.spec.scenario == harness::Scenario::TimeVarying ||
            config.spec.scenario == harness::Scenario::Train ||
            config.spec.scenario == harness::Scenario::ArbitraryOrders) {
            make_chain(config.spec.pattern);
        }
        auto ac = config.spec.settings.ac;
        ac.n_channels = config.spec.pattern.n_channels;
        ac.validate();
        auto dqn = config.spec.settings.dqn;
        dqn.n_channels = config.spec.pattern.n_channels;
        dqn.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    return config;
}

}  // namespace

harness::Metadata RunConfig::metadata() const {
    harness::Metadata meta;
    for (const auto& [k, v] : resolved) meta.emplace_back(k, v);
    meta.emplace_back("seed_source", seed_from_entropy ? "entropy" : "config");
    meta.emplace_back("final_statistic",
                      "mean reward over the last eval_fraction of training slots");
    return meta;
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("expected KEY=VALUE, got '" + text + "'");
    }
    return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

std::vector<std::pair<std::string, std::string>> config_defaults() {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : key_table()) out.emplace_back(k.key, k.default_value);
    return out;
}

RunConfig parse_config_text(const std::string& text, const Overrides& overrides) {
    std::map<std::string, std::pair<std::string, std::string>> values;
    for (const auto& k : key_table()) values[k.key] = {k.default_value, "default"};

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected KEY=VALUE, got '" + line + "' (" + where + ")");
        }
        assign(values, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
    }
    for (const auto& [k, v] : overrides) assign(values, k, v, "flag");
    return finish(std::move(values));
}

RunConfig parse_config(const std::optional<std::string>& path, const Overrides& overrides) {
    std::string text;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("cannot read config file '" + *path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    return parse_config_text(text, overrides);
}

}  // namespace mcac
