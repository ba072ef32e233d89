#pragma once

#include <optional>
#include <string>
#include <vector>

#include "toothseg/core/landmarks.hpp"

namespace toothseg {

enum class Jaw { Upper, Lower };

inline const char* jaw_name(Jaw j) { return j == Jaw::Upper ? "upper" : "lower"; }

// One dataset case: paths are stored as written (usually relative to the
// manifest file) plus per-tooth jaw side and lesion flags.
struct CaseRecord {
    std::string case_id;
    std::string image_path;
    std::string landmarks_path;
    std::string lesion_mask_path;
    std::optional<std::string> cuboids_path;
    std::vector<Jaw> jaw_label;       // per tooth slot
    std::vector<bool> has_lesion;     // per tooth slot

    bool operator==(const CaseRecord& o) const = default;
};

struct DatasetManifest {
    std::vector<CaseRecord> cases;
    bool operator==(const DatasetManifest& o) const = default;
};

// JSON-lines, one record per case. When verify_paths is set, every referenced
// path must exist relative to the manifest's directory.
DatasetManifest load_manifest(const std::string& path, bool verify_paths = false);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

// Resolve a record path relative to the manifest location.
std::string resolve_path(const std::string& manifest_path, const std::string& record_path);

}  // namespace toothseg
