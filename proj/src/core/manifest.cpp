#include "toothseg/core/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace toothseg {

namespace {

json record_to_json(const CaseRecord& r) {
    json j;
    j["case_id"] = r.case_id;
    j["image_path"] = r.image_path;
    j["landmarks_path"] = r.landmarks_path;
    j["lesion_mask_path"] = r.lesion_mask_path;
    if (r.cuboids_path) j["cuboids_path"] = *r.cuboids_path;
    json jaws = json::array();
    for (Jaw jw : r.jaw_label) jaws.push_back(jaw_name(jw));
    j["jaw_label"] = jaws;
    j["has_lesion"] = r.has_lesion;
    return j;
}

CaseRecord record_from_json(const json& j, const std::string& path, int line) {
    auto fail = [&](const std::string& msg) -> std::runtime_error {
        return std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
    };
    CaseRecord r;
    for (const char* key : {"case_id", "image_path", "landmarks_path", "lesion_mask_path",
                            "jaw_label", "has_lesion"})
        if (!j.contains(key)) throw fail(std::string("record missing ") + key);
    r.case_id = j.at("case_id").get<std::string>();
    r.image_path = j.at("image_path").get<std::string>();
    r.landmarks_path = j.at("landmarks_path").get<std::string>();
    r.lesion_mask_path = j.at("lesion_mask_path").get<std::string>();
    if (j.contains("cuboids_path")) r.cuboids_path = j.at("cuboids_path").get<std::string>();
    for (const auto& s : j.at("jaw_label")) {
        const std::string name = s.get<std::string>();
        if (name == "upper")
            r.jaw_label.push_back(Jaw::Upper);
        else if (name == "lower")
            r.jaw_label.push_back(Jaw::Lower);
        else
            throw fail("invalid jaw label '" + name + "'");
    }
    r.has_lesion = j.at("has_lesion").get<std::vector<bool>>();
    if (r.jaw_label.size() != r.has_lesion.size())
        throw fail("jaw_label / has_lesion length mismatch");
    return r;
}

}  // namespace

std::string resolve_path(const std::string& manifest_path, const std::string& record_path) {
    fs::path p(record_path);
    if (p.is_absolute()) return record_path;
    return (fs::path(manifest_path).parent_path() / p).string();
}

DatasetManifest load_manifest(const std::string& path, bool verify_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    DatasetManifest m;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        CaseRecord r = record_from_json(j, path, line_no);
        if (verify_paths) {
            for (const std::string& p :
                 {r.image_path, r.landmarks_path, r.lesion_mask_path,
                  r.cuboids_path.value_or(r.image_path)})
                if (!fs::exists(resolve_path(path, p)))
                    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                             ": referenced path does not exist: " + p);
        }
        m.cases.push_back(std::move(r));
    }
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open manifest for writing: " + path);
    for (const auto& r : manifest.cases) out << record_to_json(r).dump() << '\n';
    if (!out) throw std::runtime_error("manifest write failed: " + path);
}

}  // namespace toothseg
