#include "mcac/checkpoint.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "mcac/errors.hpp"

namespace mcac {

namespace {

constexpr std::array<char, 8> kMagic{'M', 'C', 'A', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kTagAc = 0;
constexpr std::uint8_t kTagDqn = 1;

template <typename T>
void put(std::ostream& os, T value) {
    using U = std::make_unsigned_t<T>;
    const auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        os.put(static_cast<char>((u >> (8 * i)) & 0xff));
    }
}

template <typename T>
T get(std::istream& is) {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        const int c = is.get();
        if (c == std::char_traits<char>::eof()) throw CheckpointError("truncated checkpoint");
        u |= static_cast<U>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return static_cast<T>(u);
}

std::string real(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::string schedule(const tinynet::LrSchedule& s) {
    return real(s.base_rate) + "," + real(s.decay_factor) + "," + std::to_string(s.decay_interval);
}

using Fields = std::map<std::string, std::string>;

Fields parse_fields(const std::string& text) {
    Fields f;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw CheckpointError("malformed config line '" + line + "'");
        f[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return f;
}

const std::string& field(const Fields& f, const std::string& key) {
    const auto it = f.find(key);
    if (it == f.end()) throw CheckpointError("config is missing '" + key + "'");
    return it->second;
}

template <typename T>
T number(const Fields& f, const std::string& key) {
    const auto& v = field(f, key);
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw CheckpointError("bad value for '" + key + "': '" + v + "'");
    }
    return out;
}

std::vector<std::string> split(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

tinynet::LrSchedule parse_schedule(const Fields& f, const std::string& key) {
    const auto parts = split(field(f, key));
    if (parts.size() != 3) throw CheckpointError("bad schedule for '" + key + "'");
    Fields tmp{{"b", parts[0]}, {"d", parts[1]}, {"i", parts[2]}};
    return {number<double>(tmp, "b"), number<double>(tmp, "d"), number<std::int64_t>(tmp, "i")};
}

template <typename E, typename F>
E enum_field(const Fields& f, const std::string& key, F parse) {
    try {
        return parse(field(f, key));
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("bad value for '") + key + "': " + e.what());
    }
}

void write_header(std::ostream& os, std::uint8_t tag, const std::string& config) {
    os.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint8_t>(os, tag);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(config.size()));
    os.write(config.data(), static_cast<std::streamsize>(config.size()));
}

void write_state(std::ostream& os, std::int64_t steps, const ObservationWindow& w) {
    put<std::int64_t>(os, steps);
    const auto codes = w.codes();
    put<std::uint32_t>(os, static_cast<std::uint32_t>(codes.size()));
    for (auto c : codes) put<std::int16_t>(os, c);
}

ObservationWindow read_window(std::istream& is, int n_channels) {
    const auto m = get<std::uint32_t>(is);
    if (m == 0 || m > 1u << 20) throw CheckpointError("bad window length");
    std::vector<std::int16_t> codes(m);
    for (auto& c : codes) c = get<std::int16_t>(is);
    try {
        return ObservationWindow::from_codes(n_channels, codes);
    } catch (const Error& e) {
        throw CheckpointError(std::string("bad window codes: ") + e.what());
    }
}

void finish_write(std::ostream& os) {
    if (!os) throw CheckpointError("write failed");
}

template <typename Agent>
void save_file(const std::string& path, const Agent& agent) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open '" + path + "' for writing");
    save_checkpoint(os, agent);
    os.flush();
    finish_write(os);
}

}  // namespace

std::string encode_config(const AcAgentConfig& c) {
    std::ostringstream os;
    os << "n_channels=" << c.n_channels << '\n'
       << "window=" << c.window << '\n'
       << "gamma=" << real(c.gamma) << '\n'
       << "hidden_units=" << c.hidden_units << '\n'
       << "actor_lr=" << schedule(c.actor_lr) << '\n'
       << "critic_lr=" << schedule(c.critic_lr) << '\n'
       << "optimizer=" << tinynet::to_string(c.optimizer) << '\n'
       << "selection=" << to_string(c.selection) << '\n'
       << "init_seed=" << c.init_seed << '\n'
       << "action_seed=" << c.action_seed << '\n';
    return os.str();
}

std::string encode_config(const DqnConfig& c) {
    std::ostringstream os;
    os << "n_channels=" << c.n_channels << '\n'
       << "window=" << c.window << '\n'
       << "gamma=" << real(c.gamma) << '\n'
       << "hidden_units=";
    for (std::size_t i = 0; i < c.hidden_units.size(); ++i) {
        os << (i ? "," : "") << c.hidden_units[i];
    }
    os << '\n'
       << "minibatch=" << c.minibatch << '\n'
       << "buffer_capacity=" << c.buffer_capacity << '\n'
       << "warmup=" << c.warmup << '\n'
       << "lr=" << schedule(c.lr) << '\n'
       << "optimizer=" << tinynet::to_string(c.optimizer) << '\n'
       << "epsilon_start=" << real(c.epsilon_start) << '\n'
       << "epsilon_end=" << real(c.epsilon_end) << '\n'
       << "epsilon_decay_slots=" << c.epsilon_decay_slots << '\n'
       << "target_sync_period=" << c.target_sync_period << '\n'
       << "init_seed=" << c.init_seed << '\n'
       << "action_seed=" << c.action_seed << '\n'
       << "replay_seed=" << c.replay_seed << '\n';
    return os.str();
}

AcAgentConfig decode_ac_config(const std::string& text) {
    const auto f = parse_fields(text);
    AcAgentConfig c;
    c.n_channels = number<int>(f, "n_channels");
    c.window = number<int>(f, "window");
    c.gamma = number<double>(f, "gamma");
    c.hidden_units = number<int>(f, "hidden_units");
    c.actor_lr = parse_schedule(f, "actor_lr");
    c.critic_lr = parse_schedule(f, "critic_lr");
    c.optimizer = enum_field<tinynet::OptimizerKind>(f, "optimizer", tinynet::parse_optimizer);
    c.selection = enum_field<SelectionMode>(f, "selection", parse_selection_mode);
    c.init_seed = number<std::uint64_t>(f, "init_seed");
    c.action_seed = number<std::uint64_t>(f, "action_seed");
    return c;
}

DqnConfig decode_dqn_config(const std::string& text) {
    const auto f = parse_fields(text);
    DqnConfig c;
    c.n_channels = number<int>(f, "n_channels");
    c.window = number<int>(f, "window");
    c.gamma = number<double>(f, "gamma");
    c.hidden_units.clear();
    for (const auto& h : split(field(f, "hidden_units"))) {
        c.hidden_units.push_back(number<int>(Fields{{"h", h}}, "h"));
    }
    c.minibatch = number<std::size_t>(f, "minibatch");
    c.buffer_capacity = number<std::size_t>(f, "buffer_capacity");
    c.warmup = number<std::size_t>(f, "warmup");
    c.lr = parse_schedule(f, "lr");
    c.optimizer = enum_field<tinynet::OptimizerKind>(f, "optimizer", tinynet::parse_optimizer);
    c.epsilon_start = number<double>(f, "epsilon_start");
    c.epsilon_end = number<double>(f, "epsilon_end");
    c.epsilon_decay_slots = number<std::int64_t>(f, "epsilon_decay_slots");
    c.target_sync_period = number<std::int64_t>(f, "target_sync_period");
    c.init_seed = number<std::uint64_t>(f, "init_seed");
    c.action_seed = number<std::uint64_t>(f, "action_seed");
    c.replay_seed = number<std::uint64_t>(f, "replay_seed");
    return c;
}

void save_checkpoint(std::ostream& os, const AcAgent& agent) {
    write_header(os, kTagAc, encode_config(agent.config()));
    write_state(os, agent.step_counter(), agent.window());
    tinynet::write_mlp(os, agent.actor());
    tinynet::write_mlp(os, agent.critic());
    finish_write(os);
}

void save_checkpoint(std::ostream& os, const DqnAgent& agent) {
    write_header(os, kTagDqn, encode_config(agent.config()));
    write_state(os, agent.step_counter(), agent.window());
    tinynet::write_mlp(os, agent.qnet());
    tinynet::write_mlp(os, agent.target());
    finish_write(os);
}

void save_checkpoint(const std::string& path, const AcAgent& agent) { save_file(path, agent); }
void save_checkpoint(const std::string& path, const DqnAgent& agent) { save_file(path, agent); }

LoadedAgent load_checkpoint(std::istream& is) {
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (is.gcount() != static_cast<std::streamsize>(magic.size())) {
        throw CheckpointError("truncated checkpoint");
    }
    if (magic != kMagic) throw CheckpointError("not a checkpoint (bad magic)");
    const auto version = get<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    const auto tag = get<std::uint8_t>(is);
    if (tag != kTagAc && tag != kTagDqn) throw CheckpointError("unknown agent tag");
    const auto len = get<std::uint32_t>(is);
    if (len > 1u << 20) throw CheckpointError("config block too large");
    std::string text(len, '\0');
    is.read(text.data(), len);
    if (is.gcount() != static_cast<std::streamsize>(len)) throw CheckpointError("truncated checkpoint");

    const auto steps = get<std::int64_t>(is);
    if (steps < 0) throw CheckpointError("negative step counter");

    try {
        if (tag == kTagAc) {
            const auto config = decode_ac_config(text);
            config.validate();
            auto window = read_window(is, config.n_channels);
            auto actor = tinynet::read_mlp(is);
            auto critic = tinynet::read_mlp(is);
            AcAgent agent(config);
            agent.restore(std::move(actor), std::move(critic), steps, std::move(window));
            return agent;
        }
        const auto config = decode_dqn_config(text);
        config.validate();
        auto window = read_window(is, config.n_channels);
        auto qnet = tinynet::read_mlp(is);
        auto target = tinynet::read_mlp(is);
        DqnAgent agent(config);
        agent.restore(std::move(qnet), std::move(target), steps, std::move(window));
        return agent;
    } catch (const CheckpointError&) {
        throw;
    } catch (const Error& e) {
        throw CheckpointError(std::string("inconsistent checkpoint: ") + e.what());
    }
}

LoadedAgent load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open '" + path + "'");
    return load_checkpoint(is);
}

}  // namespace mcac
