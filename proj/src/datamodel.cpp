#include "ifd/datamodel.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ifd/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace ifd {

bool RegionVocabulary::has_code(int c) const {
    for (const auto& [name, code] : labels)
        if (code == c) return true;
    return false;
}

int RegionVocabulary::code(const std::string& name) const {
    auto it = labels.find(name);
    if (it == labels.end())
        throw std::invalid_argument("vocabulary: unknown region name '" + name + "'");
    return it->second;
}

void RegionVocabulary::validate() const {
    if (clothing_set.empty())
        throw std::invalid_argument("vocabulary: clothing set must be non-empty");
    if (clothing_set.size() >= labels.size())
        throw std::invalid_argument("vocabulary: clothing set must be a strict subset of the labels");
    for (int c : clothing_set)
        if (!has_code(c))
            throw std::invalid_argument("vocabulary: clothing code " + std::to_string(c) +
                                        " is not in the label map");
    for (const char* head : {"hair", "face"}) {
        auto it = labels.find(head);
        if (it != labels.end() && clothing_set.count(it->second))
            throw std::invalid_argument(std::string("vocabulary: head region '") + head +
                                        "' cannot be a clothing category");
    }
}

RegionVocabulary RegionVocabulary::default_vocabulary() {
    RegionVocabulary v;
    v.labels = {{"background", 0}, {"hair", 1},  {"face", 2},  {"upper-clothes", 3},
                {"pants", 4},      {"skirt", 5}, {"arms", 6},  {"legs", 7},
                {"shoes", 8}};
    v.clothing_set = {3, 4, 5};
    v.validate();
    return v;
}

RegionVocabulary RegionVocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load error: cannot open vocabulary " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load error: vocabulary " + path + ": " + e.what());
    }
    RegionVocabulary v;
    for (auto it = j.at("labels").begin(); it != j.at("labels").end(); ++it)
        v.labels[it.key()] = it.value().get<int>();
    for (const auto& name : j.at("clothing")) v.clothing_set.insert(v.code(name.get<std::string>()));
    v.validate();
    return v;
}

void RegionVocabulary::save(const std::string& path) const {
    nlohmann::json j;
    for (const auto& [name, code] : labels) j["labels"][name] = code;
    j["clothing"] = nlohmann::json::array();
    for (int c : clothing_set)
        for (const auto& [name, code] : labels)
            if (code == c) j["clothing"].push_back(name);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write error: cannot open " + path);
    out << j.dump(2) << "\n";
}

void DatasetIndex::add(Sample s) {
    const int pos = static_cast<int>(samples.size());
    by_identity[s.identity].push_back(pos);
    by_appearance[appearance_id(s.identity, s.clothing)].push_back(pos);
    samples.push_back(std::move(s));
}

void DatasetIndex::rebuild_buckets() {
    by_identity.clear();
    by_appearance.clear();
    for (int pos = 0; pos < static_cast<int>(samples.size()); ++pos) {
        by_identity[samples[pos].identity].push_back(pos);
        by_appearance[appearance_id(samples[pos].identity, samples[pos].clothing)].push_back(pos);
    }
}

std::vector<int> DatasetIndex::identities() const {
    std::vector<int> ids;
    ids.reserve(by_identity.size());
    for (const auto& [id, bucket] : by_identity) ids.push_back(id);
    return ids;
}

namespace {

int parse_label(const std::string& field, const std::string& what, int row) {
    try {
        std::size_t used = 0;
        const int value = std::stoi(field, &used);
        if (used != field.size() || value < 0) throw std::invalid_argument(field);
        return value;
    } catch (const std::exception&) {
        throw std::runtime_error("load error: manifest row " + std::to_string(row) + ": " + what +
                                 " '" + field + "' is not a non-negative integer");
    }
}

} // namespace

DatasetIndex load_manifest(const std::string& root_path, const std::string& manifest_path,
                           bool load_pixels) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("load error: cannot open manifest " + manifest_path);

    DatasetIndex index;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) fields.push_back(field);
        if (fields.size() != 5)
            throw std::runtime_error("load error: manifest row " + std::to_string(row) +
                                     ": expected 5 tab-separated fields, got " +
                                     std::to_string(fields.size()));
        Sample s;
        s.image_path = fields[0];
        s.parsing_path = fields[1];
        s.identity = parse_label(fields[2], "identity", row);
        s.clothing = parse_label(fields[3], "clothing", row);
        s.camera = parse_label(fields[4], "camera", row);

        const fs::path img = fs::path(root_path) / s.image_path;
        const fs::path prs = fs::path(root_path) / s.parsing_path;
        if (load_pixels) {
            if (!fs::exists(img))
                throw std::runtime_error("load error: manifest row " + std::to_string(row) +
                                         ": missing image file " + img.string());
            if (!fs::exists(prs))
                throw std::runtime_error("load error: manifest row " + std::to_string(row) +
                                         ": missing parsing file " + prs.string());
            s.image = read_ppm(img.string());
            s.parsing = read_pgm(prs.string());
            if (s.parsing.height != s.image.dim(1) || s.parsing.width != s.image.dim(2))
                throw std::runtime_error("validation error: manifest row " + std::to_string(row) +
                                         ": image is " + std::to_string(s.image.dim(1)) + "x" +
                                         std::to_string(s.image.dim(2)) + " but parsing is " +
                                         std::to_string(s.parsing.height) + "x" +
                                         std::to_string(s.parsing.width));
        }
        index.add(std::move(s));
    }
    return index;
}

DatasetIndex load_dataset(const std::string& root_path, const std::string& manifest_path) {
    return load_manifest(root_path, manifest_path, true);
}

void write_manifest(const DatasetIndex& index, const std::string& manifest_path) {
    std::ofstream out(manifest_path);
    if (!out) throw std::runtime_error("write error: cannot open " + manifest_path);
    out << "# image\tparsing\tidentity\tclothing\tcamera\n";
    for (const Sample& s : index.samples)
        out << s.image_path << "\t" << s.parsing_path << "\t" << s.identity << "\t" << s.clothing
            << "\t" << s.camera << "\n";
    if (!out) throw std::runtime_error("write error: failed writing " + manifest_path);
}

std::pair<DatasetIndex, DatasetIndex> split_query_gallery(const DatasetIndex& index,
                                                          const SplitRule& rule) {
    std::vector<char> to_query(index.size(), 0);
    switch (rule.kind) {
    case SplitRule::Kind::ByCamera:
        for (std::size_t i = 0; i < index.size(); ++i)
            to_query[i] = index.samples[i].camera == rule.query_camera;
        break;
    case SplitRule::Kind::AppearanceHoldout: {
        Rng rng(rule.seed);
        for (const auto& [app, bucket] : index.by_appearance) {
            std::vector<int> order = bucket;
            rng.shuffle(order);
            const int take = std::min<int>(rule.holdout, static_cast<int>(order.size()) - 1);
            for (int i = 0; i < take; ++i) to_query[order[i]] = 1;
        }
        break;
    }
    }

    DatasetIndex query, gallery;
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (to_query[i])
            query.add(index.samples[i]);
        else
            gallery.add(index.samples[i]);
    }
    for (const auto& [id, bucket] : query.by_identity)
        if (!gallery.by_identity.count(id))
            throw std::runtime_error("protocol error: identity " + std::to_string(id) +
                                     " is in the query split but absent from the gallery");
    return {std::move(query), std::move(gallery)};
}

} // namespace ifd
