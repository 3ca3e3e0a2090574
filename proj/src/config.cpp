#include "rt/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rt {

void DataConfig::validate() const {
    if (source == Source::shapes) {
        if (n < 1) throw std::invalid_argument("data n must be >= 1");
        if (classes < 2 || classes > 10)
            throw std::invalid_argument("data classes must be in [2, 10]");
        if (size < 8) throw std::invalid_argument("data size must be >= 8");
        if (noise < 0) throw std::invalid_argument("data noise must be >= 0");
        if (val_n < 0) throw std::invalid_argument("data val_n must be >= 0");
    } else {
        if (path.empty()) throw std::invalid_argument("data source 'file' requires a path");
    }
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    data.validate();
    if (replay < 1) throw std::invalid_argument("replay must be >= 1");
    if (free_training && !train.attack)
        throw std::invalid_argument("free training requires an [attack] section");
    if (output_dir.empty()) throw std::invalid_argument("output dir must not be empty");
}

RunConfig default_run_config() {
    RunConfig c;
    c.model = ModelConfig::mlp_tiny({1, 12, 12}, 4);
    return c;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct Parser {
    const std::string& name;
    int line = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw std::runtime_error(name + ":" + std::to_string(line) + ": " + msg);
    }

    long long to_int(const std::string& v) const {
        try {
            size_t pos = 0;
            long long x = std::stoll(v, &pos);
            if (pos != v.size()) fail("expected an integer, got '" + v + "'");
            return x;
        } catch (const std::runtime_error&) {
            throw;
        } catch (const std::exception&) {
            fail("expected an integer, got '" + v + "'");
        }
    }

    uint64_t to_u64(const std::string& v) const {
        try {
            size_t pos = 0;
            unsigned long long x = std::stoull(v, &pos);
            if (pos != v.size() || v[0] == '-') fail("expected a nonnegative integer, got '" + v + "'");
            return x;
        } catch (const std::runtime_error&) {
            throw;
        } catch (const std::exception&) {
            fail("expected a nonnegative integer, got '" + v + "'");
        }
    }

    double to_double(const std::string& v) const {
        try {
            size_t pos = 0;
            double x = std::stod(v, &pos);
            if (pos != v.size()) fail("expected a number, got '" + v + "'");
            return x;
        } catch (const std::runtime_error&) {
            throw;
        } catch (const std::exception&) {
            fail("expected a number, got '" + v + "'");
        }
    }

    bool to_bool(const std::string& v) const {
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        fail("expected a boolean (true/false), got '" + v + "'");
    }

    std::vector<int> to_int_list(const std::string& v, char sep) const {
        std::vector<int> out;
        if (trim(v).empty()) return out;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, sep)) out.push_back(static_cast<int>(to_int(trim(item))));
        return out;
    }
};

std::string join(const std::vector<int>& xs, char sep) {
    std::string s;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) s += sep;
        s += std::to_string(xs[i]);
    }
    return s;
}

// shortest %g form that parses back to the same double
std::string format_double(double x) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, x);
        if (std::stod(buf) == x) break;
    }
    return buf;
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& name) {
    RunConfig cfg = default_run_config();
    Parser p{name};
    std::set<std::string> seen;
    std::string section;
    std::stringstream in(text);
    std::string raw;

    while (std::getline(in, raw)) {
        ++p.line;
        size_t cut = raw.find_first_of("#;");
        std::string s = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
        if (s.empty()) continue;

        if (s.front() == '[') {
            if (s.back() != ']') p.fail("unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section != "model" && section != "train" && section != "attack" &&
                section != "data" && section != "output")
                p.fail("unknown section [" + section +
                       "] (expected model, train, attack, data, or output)");
            if (section == "attack" && !cfg.train.attack) cfg.train.attack = PerturbationSpec{};
            continue;
        }

        size_t eq = s.find('=');
        if (eq == std::string::npos) p.fail("expected 'key = value', got '" + s + "'");
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        if (key.empty()) p.fail("empty key");
        if (section.empty()) p.fail("key '" + key + "' appears before any [section]");
        if (!seen.insert(section + "." + key).second)
            p.fail("duplicate key '" + key + "' in section [" + section + "]");

        if (section == "model") {
            if (key == "kind") {
                if (val == "mlp")
                    cfg.model.kind = ModelConfig::Kind::mlp;
                else if (val == "rescnn")
                    cfg.model.kind = ModelConfig::Kind::rescnn;
                else
                    p.fail("model kind must be one of: mlp, rescnn (got '" + val + "')");
            } else if (key == "input") {
                cfg.model.input_shape = p.to_int_list(val, 'x');
            } else if (key == "hidden") {
                cfg.model.hidden = p.to_int_list(val, ',');
            } else if (key == "widths") {
                cfg.model.widths = p.to_int_list(val, ',');
            } else if (key == "blocks") {
                cfg.model.blocks_per_stage = static_cast<int>(p.to_int(val));
            } else if (key == "classes") {
                cfg.model.classes = static_cast<int>(p.to_int(val));
            } else if (key == "seed") {
                cfg.model_seed = p.to_u64(val);
            } else {
                p.fail("unknown key '" + key + "' in section [model]");
            }
        } else if (section == "train") {
            if (key == "epochs") cfg.train.epochs = static_cast<int>(p.to_int(val));
            else if (key == "batch") cfg.train.batch = static_cast<int>(p.to_int(val));
            else if (key == "lr") cfg.train.lr = p.to_double(val);
            else if (key == "momentum") cfg.train.momentum = p.to_double(val);
            else if (key == "weight_decay") cfg.train.weight_decay = p.to_double(val);
            else if (key == "lr_decay_factor") cfg.train.lr_decay_factor = p.to_double(val);
            else if (key == "lr_decay_interval") cfg.train.lr_decay_interval = static_cast<int>(p.to_int(val));
            else if (key == "validation_cadence") cfg.train.validation_cadence = static_cast<int>(p.to_int(val));
            else if (key == "seed") cfg.train.master_seed = p.to_u64(val);
            else if (key == "free") cfg.free_training = p.to_bool(val);
            else if (key == "replay") cfg.replay = static_cast<int>(p.to_int(val));
            else p.fail("unknown key '" + key + "' in section [train]");
        } else if (section == "attack") {
            PerturbationSpec& a = *cfg.train.attack;
            if (key == "norm") {
                try {
                    a.norm = parse_norm(val);
                } catch (const std::exception& e) {
                    p.fail(e.what());
                }
            } else if (key == "eps") a.eps = p.to_double(val);
            else if (key == "step_size") a.step_size = p.to_double(val);
            else if (key == "steps") a.steps = static_cast<int>(p.to_int(val));
            else if (key == "rand_init") a.rand_init = p.to_bool(val);
            else if (key == "restarts") a.restarts = static_cast<int>(p.to_int(val));
            else if (key == "seed") a.rng_seed = p.to_u64(val);
            else p.fail("unknown key '" + key + "' in section [attack]");
        } else if (section == "data") {
            if (key == "source") {
                if (val == "shapes")
                    cfg.data.source = DataConfig::Source::shapes;
                else if (val == "file")
                    cfg.data.source = DataConfig::Source::file;
                else
                    p.fail("data source must be one of: shapes, file (got '" + val + "')");
            } else if (key == "n") cfg.data.n = static_cast<int>(p.to_int(val));
            else if (key == "classes") cfg.data.classes = static_cast<int>(p.to_int(val));
            else if (key == "size") cfg.data.size = static_cast<int>(p.to_int(val));
            else if (key == "noise") cfg.data.noise = p.to_double(val);
            else if (key == "seed") cfg.data.seed = p.to_u64(val);
            else if (key == "val_n") cfg.data.val_n = static_cast<int>(p.to_int(val));
            else if (key == "val_seed") cfg.data.val_seed = p.to_u64(val);
            else if (key == "path") cfg.data.path = val;
            else if (key == "val_path") cfg.data.val_path = val;
            else p.fail("unknown key '" + key + "' in section [data]");
        } else {  // output
            if (key == "dir") cfg.output_dir = val;
            else p.fail("unknown key '" + key + "' in section [output]");
        }
    }

    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error(name + ": " + e.what());
    }
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream out;
    out << "[model]\n";
    out << "kind = " << (c.model.kind == ModelConfig::Kind::mlp ? "mlp" : "rescnn") << "\n";
    out << "input = " << join(c.model.input_shape, 'x') << "\n";
    out << "hidden = " << join(c.model.hidden, ',') << "\n";
    out << "widths = " << join(c.model.widths, ',') << "\n";
    out << "blocks = " << c.model.blocks_per_stage << "\n";
    out << "classes = " << c.model.classes << "\n";
    out << "seed = " << c.model_seed << "\n";

    out << "\n[train]\n";
    out << "epochs = " << c.train.epochs << "\n";
    out << "batch = " << c.train.batch << "\n";
    out << "lr = " << format_double(c.train.lr) << "\n";
    out << "momentum = " << format_double(c.train.momentum) << "\n";
    out << "weight_decay = " << format_double(c.train.weight_decay) << "\n";
    out << "lr_decay_factor = " << format_double(c.train.lr_decay_factor) << "\n";
    out << "lr_decay_interval = " << c.train.lr_decay_interval << "\n";
    out << "validation_cadence = " << c.train.validation_cadence << "\n";
    out << "seed = " << c.train.master_seed << "\n";
    out << "free = " << (c.free_training ? "true" : "false") << "\n";
    out << "replay = " << c.replay << "\n";

    if (c.train.attack) {
        const PerturbationSpec& a = *c.train.attack;
        out << "\n[attack]\n";
        out << "norm = " << norm_name(a.norm) << "\n";
        out << "eps = " << format_double(a.eps) << "\n";
        out << "step_size = " << format_double(a.step_size) << "\n";
        out << "steps = " << a.steps << "\n";
        out << "rand_init = " << (a.rand_init ? "true" : "false") << "\n";
        out << "restarts = " << a.restarts << "\n";
        out << "seed = " << a.rng_seed << "\n";
    }

    out << "\n[data]\n";
    out << "source = " << (c.data.source == DataConfig::Source::shapes ? "shapes" : "file") << "\n";
    out << "n = " << c.data.n << "\n";
    out << "classes = " << c.data.classes << "\n";
    out << "size = " << c.data.size << "\n";
    out << "noise = " << format_double(c.data.noise) << "\n";
    out << "seed = " << c.data.seed << "\n";
    out << "val_n = " << c.data.val_n << "\n";
    out << "val_seed = " << c.data.val_seed << "\n";
    out << "path = " << c.data.path << "\n";
    out << "val_path = " << c.data.val_path << "\n";

    out << "\n[output]\n";
    out << "dir = " << c.output_dir << "\n";
    return out.str();
}

}  // namespace rt
