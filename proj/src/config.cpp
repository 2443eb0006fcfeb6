#include "ifd/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ifd {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

Config::Config() {
    auto def = [&](const char* key, Type type, const char* value) {
        values_[key] = Entry{type, value};
    };
    def("data.root", Type::String, "");
    def("data.train_manifest", Type::String, "train.tsv");
    def("data.query_manifest", Type::String, "query.tsv");
    def("data.gallery_manifest", Type::String, "gallery.tsv");
    def("data.vocab", Type::String, "");

    def("backbone.arch", Type::String, "small-conv");
    def("backbone.widths", Type::String, "16,32,64,64");
    def("backbone.output_stride", Type::Int, "8");
    def("backbone.ikt_kernel", Type::Int, "7");

    def("loss.tau", Type::Float, "0.1");
    def("loss.T", Type::Float, "0.5");
    def("loss.lambda", Type::Float, "1.0");

    def("sampler.mode", Type::String, "proportional-ras");
    def("sampler.P", Type::Int, "4");
    def("sampler.B", Type::Int, "4");
    def("sampler.seed", Type::Int, "1");

    def("train.phase1_epochs", Type::Int, "30");
    def("train.phase2_epochs", Type::Int, "60");
    def("train.lr", Type::Float, "3.5e-4");
    def("train.weight_decay", Type::Float, "0.0");
    def("train.seed", Type::Int, "0");
    def("train.freeze_attention", Type::Bool, "false");
    def("train.flip_augment", Type::Bool, "true");

    def("synth.num_identities", Type::Int, "8");
    def("synth.clothings_per_identity", Type::Int, "3");
    def("synth.images_per_appearance", Type::Int, "10");
    def("synth.height", Type::Int, "128");
    def("synth.width", Type::Int, "64");
    def("synth.sigma", Type::Float, "0.05");
    def("synth.rho", Type::Float, "1.0");
    def("synth.seed", Type::Int, "0");
}

const Config::Entry& Config::entry(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
        throw std::invalid_argument("config error: unknown key '" + key + "'");
    return it->second;
}

void Config::check_value(const std::string& key, Type type, const std::string& value) {
    try {
        std::size_t used = 0;
        switch (type) {
        case Type::Int: {
            (void)std::stoll(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
            break;
        }
        case Type::Float: {
            (void)std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
            break;
        }
        case Type::Bool:
            if (value != "true" && value != "false") throw std::invalid_argument(value);
            break;
        case Type::String:
            break;
        }
    } catch (const std::exception&) {
        const char* want = type == Type::Int ? "integer" : type == Type::Float ? "number" : "true|false";
        throw std::invalid_argument("config error: key '" + key + "' expects " + want + ", got '" +
                                    value + "'");
    }
}

void Config::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end())
        throw std::invalid_argument("config error: unknown key '" + key + "'");
    check_value(key, it->second.type, value);
    it->second.value = value;
}

void Config::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config error: cannot open config file " + path);
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config error: " + path + ":" + std::to_string(row) +
                                     ": expected 'key = value'");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

void Config::apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("config error: override '" + kv + "' is not key=value");
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

int Config::get_int(const std::string& key) const {
    return static_cast<int>(std::stoll(entry(key).value));
}
double Config::get_float(const std::string& key) const { return std::stod(entry(key).value); }
bool Config::get_bool(const std::string& key) const { return entry(key).value == "true"; }
const std::string& Config::get_string(const std::string& key) const { return entry(key).value; }

std::string Config::echo() const {
    std::ostringstream out;
    for (const auto& [key, e] : values_) out << key << " = " << e.value << "\n";
    return out.str();
}

std::string Config::hash() const {
    const std::string text = echo();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

LossConfig Config::loss_config() const {
    LossConfig c;
    c.tau = static_cast<float>(get_float("loss.tau"));
    c.T = static_cast<float>(get_float("loss.T"));
    c.lambda = static_cast<float>(get_float("loss.lambda"));
    c.validate();
    return c;
}

SamplerConfig Config::sampler_config() const {
    SamplerConfig c;
    c.P = get_int("sampler.P");
    c.B = get_int("sampler.B");
    c.mode = SamplerConfig::parse_mode(get_string("sampler.mode"));
    c.seed = static_cast<std::uint64_t>(get_int("sampler.seed"));
    c.validate();
    return c;
}

BackboneConfig Config::backbone_config() const {
    BackboneConfig c;
    c.arch = get_string("backbone.arch");
    c.widths = parse_int_list(get_string("backbone.widths"));
    c.output_stride = get_int("backbone.output_stride");
    c.ikt_kernel = get_int("backbone.ikt_kernel");
    c.validate();
    return c;
}

SynthConfig Config::synth_config() const {
    SynthConfig c;
    c.num_identities = get_int("synth.num_identities");
    c.clothings_per_identity = get_int("synth.clothings_per_identity");
    c.images_per_appearance = get_int("synth.images_per_appearance");
    c.height = get_int("synth.height");
    c.width = get_int("synth.width");
    c.sigma = static_cast<float>(get_float("synth.sigma"));
    c.rho = static_cast<float>(get_float("synth.rho"));
    c.seed = static_cast<std::uint64_t>(get_int("synth.seed"));
    c.validate();
    return c;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        out.push_back(std::stoi(t));
    }
    return out;
}

} // namespace ifd
