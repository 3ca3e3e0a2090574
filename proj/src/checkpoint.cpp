#include "rt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rt {

namespace {

constexpr char kMagic[6] = {'R', 'C', 'K', 'P', 'T', '1'};

void read_exact(std::istream& in, void* dst, size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n) throw std::runtime_error("truncated checkpoint");
}

void put_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t get_u32(std::istream& in) {
    uint32_t v = 0;
    read_exact(in, &v, 4);
    return v;
}

std::string join(const std::vector<int>& xs, char sep) {
    std::string s;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) s += sep;
        s += std::to_string(xs[i]);
    }
    return s;
}

std::vector<int> split_ints(const std::string& s, char sep) {
    std::vector<int> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        size_t pos = 0;
        out.push_back(std::stoi(item, &pos));
        if (pos != item.size()) throw std::runtime_error("checkpoint header: bad integer '" + item + "'");
    }
    return out;
}

std::string arch_block(const ModelConfig& c) {
    std::ostringstream o;
    o << "kind=" << (c.kind == ModelConfig::Kind::mlp ? "mlp" : "rescnn") << "\n";
    o << "input=" << join(c.input_shape, 'x') << "\n";
    o << "hidden=" << join(c.hidden, ',') << "\n";
    o << "widths=" << join(c.widths, ',') << "\n";
    o << "blocks=" << c.blocks_per_stage << "\n";
    o << "classes=" << c.classes << "\n";
    return o.str();
}

ModelConfig parse_arch_block(const std::string& block) {
    ModelConfig c;
    std::stringstream in(block);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("checkpoint header: malformed line '" + line + "'");
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "kind") {
            if (val == "mlp") c.kind = ModelConfig::Kind::mlp;
            else if (val == "rescnn") c.kind = ModelConfig::Kind::rescnn;
            else throw std::runtime_error("checkpoint header: unknown model kind '" + val + "'");
        } else if (key == "input") c.input_shape = split_ints(val, 'x');
        else if (key == "hidden") c.hidden = split_ints(val, ',');
        else if (key == "widths") c.widths = split_ints(val, ',');
        else if (key == "blocks") c.blocks_per_stage = std::stoi(val);
        else if (key == "classes") c.classes = std::stoi(val);
        else throw std::runtime_error("checkpoint header: unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Model& m) {
    out.write(kMagic, 6);
    std::string arch = arch_block(m.config);
    put_u32(out, static_cast<uint32_t>(arch.size()));
    out.write(arch.data(), static_cast<std::streamsize>(arch.size()));
    put_u32(out, static_cast<uint32_t>(m.params.size()));
    for (const auto& [name, value] : m.params) {
        uint16_t len = static_cast<uint16_t>(name.size());
        out.write(reinterpret_cast<const char*>(&len), 2);
        out.write(name.data(), len);
        write_tensor(out, value);
    }
    if (!out) throw std::runtime_error("checkpoint write failed");
}

Model read_checkpoint(std::istream& in) {
    char magic[6];
    read_exact(in, magic, 6);
    if (std::memcmp(magic, kMagic, 5) != 0)
        throw std::runtime_error("not a checkpoint file (bad magic)");
    if (magic[5] != '1')
        throw std::runtime_error("unsupported checkpoint format version '" +
                                 std::string(1, magic[5]) +
                                 "' (regenerate the checkpoint with this build)");

    uint32_t arch_len = get_u32(in);
    if (arch_len > (1u << 20)) throw std::runtime_error("checkpoint header: implausible size");
    std::string arch(arch_len, '\0');
    read_exact(in, arch.data(), arch_len);
    ModelConfig cfg = parse_arch_block(arch);

    // skeleton pins the expected parameter names and shapes
    Model skeleton = build_model(cfg, 0);
    uint32_t count = get_u32(in);
    if (count != skeleton.params.size())
        throw std::runtime_error("checkpoint holds " + std::to_string(count) +
                                 " parameters, architecture expects " +
                                 std::to_string(skeleton.params.size()));

    Model m;
    m.config = cfg;
    m.params.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t len = 0;
        read_exact(in, &len, 2);
        std::string name(len, '\0');
        read_exact(in, name.data(), len);
        Tensor value = read_tensor(in, "checkpoint parameter '" + name + "'");
        const auto& [want_name, want_value] = skeleton.params[i];
        if (name != want_name)
            throw std::runtime_error("checkpoint parameter " + std::to_string(i) + " is '" + name +
                                     "', architecture expects '" + want_name + "'");
        if (!value.same_shape(want_value))
            throw std::runtime_error("checkpoint parameter '" + name + "' has shape " +
                                     value.shape_str() + ", architecture expects " +
                                     want_value.shape_str());
        m.params.emplace_back(std::move(name), std::move(value));
    }
    return m;
}

void save_checkpoint(const Model& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_checkpoint(out, m);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return read_checkpoint(in);
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

}  // namespace rt
