#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ifd/losses.hpp"
#include "ifd/network.hpp"
#include "ifd/sampler.hpp"
#include "ifd/synthdata.hpp"

namespace ifd {

// Flat configuration with dotted keys (sections data, backbone, loss,
// sampler, train, synth). Files hold `key = value` lines with '#' comments.
// Unknown keys are rejected; values are checked against the schema type.
class Config {
public:
    enum class Type { Int, Float, Bool, String };

    Config();  // all keys at their defaults

    void load_file(const std::string& path);
    void apply_override(const std::string& key_equals_value);  // "key=value"
    void set(const std::string& key, const std::string& value);

    int get_int(const std::string& key) const;
    double get_float(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    const std::string& get_string(const std::string& key) const;

    // Sorted `key = value` text; written into output directories and hashed
    // for run identification.
    std::string echo() const;
    std::string hash() const;  // FNV-1a 64 over echo(), hex

    LossConfig loss_config() const;
    SamplerConfig sampler_config() const;
    BackboneConfig backbone_config() const;
    SynthConfig synth_config() const;

private:
    struct Entry {
        Type type;
        std::string value;
    };
    std::map<std::string, Entry> values_;

    const Entry& entry(const std::string& key) const;
    static void check_value(const std::string& key, Type type, const std::string& value);
};

std::vector<int> parse_int_list(const std::string& csv);

} // namespace ifd
