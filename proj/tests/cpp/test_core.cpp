#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "toothseg/core/io.hpp"
#include "toothseg/core/landmarks.hpp"
#include "toothseg/core/manifest.hpp"
#include "toothseg/nn/rng.hpp"

using namespace toothseg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("toothseg_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Volume3D random_volume(Index3 shape, Vec3d spacing, std::uint64_t seed) {
    Volume3D v(shape, spacing, {1.5, -2.0, 0.25});
    nn::Rng rng(seed);
    for (auto& x : v.data()) x = static_cast<float>(rng.uniform(-100.0, 100.0));
    return v;
}

}  // namespace

TEST_CASE("volume invariants") {
    CHECK_THROWS(Volume3D({0, 4, 4}, {1, 1, 1}));
    CHECK_THROWS(Volume3D({4, 4, 4}, {0.0, 1, 1}));
    CHECK_THROWS(Volume3D({4, 4, 4}, {1, 1, 1}, {0, 0, 0}, std::vector<float>(63, 0.0f)));
    Volume3D v({2, 3, 4}, {0.5, 0.5, 0.5});
    CHECK(v.numel() == 24);
    CHECK(v.index(1, 2, 3) == 1 + 2 * (2 + 3 * 3));
}

TEST_CASE("segmask rejects non-binary values") {
    Volume3D v({2, 2, 2}, {1, 1, 1});
    v.at(0, 0, 0) = 1.0f;
    CHECK_NOTHROW(SegMask{v});
    v.at(1, 0, 0) = 0.5f;
    CHECK_THROWS(SegMask{v});
}

TEST_CASE("volume IO round trip is bit-identical") {
    const auto dir = temp_dir("volio");
    const Volume3D v = random_volume({7, 5, 6}, {0.4, 0.5, 0.6}, 42);
    for (const std::string name : {"v.mha", "v.mhd", "v.f32raw"}) {
        const std::string path = (dir / name).string();
        save_volume(v, path);
        const Volume3D r = load_volume(path);
        CHECK(r.shape() == v.shape());
        CHECK(r.spacing() == v.spacing());
        CHECK(r.origin() == v.origin());
        CHECK(r.data() == v.data());  // bit identical
    }
}

TEST_CASE("volume IO reads spacing from file metadata") {
    const auto dir = temp_dir("volspacing");
    Volume3D v({4, 4, 4}, {0.4, 0.4, 0.4});
    const std::string path = (dir / "s.mha").string();
    save_volume(v, path);
    const Volume3D r = load_volume(path);
    CHECK(r.spacing() == Vec3d{0.4, 0.4, 0.4});
}

TEST_CASE("volume IO error paths") {
    const auto dir = temp_dir("volerr");
    CHECK_THROWS_WITH_AS(load_volume((dir / "nope.mha").string()),
                         doctest::Contains("does not exist"), std::runtime_error);

    // malformed header
    {
        std::ofstream out(dir / "bad.mha");
        out << "this is not a metaimage\n";
    }
    CHECK_THROWS(load_volume((dir / "bad.mha").string()));

    // spacing <= 0
    {
        std::ofstream out(dir / "zspace.mha", std::ios::binary);
        out << "ObjectType = Image\nNDims = 3\nDimSize = 1 1 1\nElementSpacing = 0 1 1\n"
            << "ElementType = MET_FLOAT\nElementDataFile = LOCAL\n";
        const float f = 0.0f;
        out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
    CHECK_THROWS_WITH_AS(load_volume((dir / "zspace.mha").string()),
                         doctest::Contains("spacing"), std::runtime_error);

    // overwrite replaces content
    const std::string path = (dir / "w.mha").string();
    save_volume(random_volume({3, 3, 3}, {1, 1, 1}, 1), path);
    const Volume3D v2 = random_volume({3, 3, 3}, {1, 1, 1}, 2);
    save_volume(v2, path);
    CHECK(load_volume(path).data() == v2.data());

    // unwritable directory
    CHECK_THROWS(save_volume(v2, "/nonexistent_dir_xyz/v.mha"));
}

TEST_CASE("landmark CSV round trip and sentinel handling") {
    const auto dir = temp_dir("lms");
    LandmarkSet lms(kToothCount, {64, 64, 32});
    lms.set_coord(0, {1.5, 2.5, 3.5});
    lms.set_coord(5, {10, 20, 30});
    lms.set_coord(31, {63, 63, 31});
    const std::string path = (dir / "lms.csv").string();
    save_landmarks(lms, path);
    const LandmarkSet r = load_landmarks(path);
    CHECK(r.count() == kToothCount);
    CHECK(r.same_coords(lms));
    CHECK(r.is_missing(1));
    CHECK(!r.is_missing(5));

    // row "5,-1,-1,-1" -> tooth 5 missing
    {
        std::ofstream out(dir / "m.csv");
        for (int i = 0; i < kToothCount; ++i) {
            if (i == 5)
                out << "5,-1,-1,-1\n";
            else
                out << i << ',' << i << ',' << i << ',' << i << '\n';
        }
    }
    const LandmarkSet m = load_landmarks((dir / "m.csv").string());
    CHECK(m.is_missing(5));
    CHECK(m.coord(6) == Vec3d{6, 6, 6});
}

TEST_CASE("landmark CSV error paths") {
    const auto dir = temp_dir("lmserr");
    {
        std::ofstream out(dir / "short.csv");
        for (int i = 0; i < 31; ++i) out << i << ",1,1,1\n";
    }
    CHECK_THROWS_WITH_AS(load_landmarks((dir / "short.csv").string()),
                         doctest::Contains("wrong row count"), std::runtime_error);
    {
        std::ofstream out(dir / "nan.csv");
        out << "0,a,b,c\n";
    }
    CHECK_THROWS_WITH_AS(load_landmarks((dir / "nan.csv").string(), 1),
                         doctest::Contains("non-numeric"), std::runtime_error);
}

TEST_CASE("landmark coordinates validate against the reference shape") {
    LandmarkSet lms(4, {10, 10, 10});
    CHECK_THROWS(lms.set_coord(0, {10, 0, 0}));
    CHECK_NOTHROW(lms.set_coord(0, {9.5, 0, 0}));
    lms.set_coord(1, kMissingLandmark);
    CHECK(lms.is_missing(1));
}

TEST_CASE("manifest JSONL round trip") {
    const auto dir = temp_dir("manifest");
    DatasetManifest m;
    for (int c = 0; c < 3; ++c) {
        CaseRecord r;
        r.case_id = "case" + std::to_string(c);
        r.image_path = r.case_id + "/image.mha";
        r.landmarks_path = r.case_id + "/landmarks.csv";
        r.lesion_mask_path = r.case_id + "/lesions.mha";
        if (c == 1) r.cuboids_path = r.case_id + "/cuboids.json";
        r.jaw_label.assign(kToothCount, Jaw::Upper);
        for (int i = kToothCount / 2; i < kToothCount; ++i) r.jaw_label[static_cast<std::size_t>(i)] = Jaw::Lower;
        r.has_lesion.assign(kToothCount, false);
        r.has_lesion[3] = true;
        m.cases.push_back(r);
    }
    const std::string path = (dir / "manifest.jsonl").string();
    save_manifest(m, path);
    CHECK(load_manifest(path) == m);

    // empty manifest file -> empty dataset
    {
        std::ofstream out(dir / "empty.jsonl");
    }
    CHECK(load_manifest((dir / "empty.jsonl").string()).cases.empty());

    // record missing lesion_mask_path -> schema error
    {
        std::ofstream out(dir / "bad.jsonl");
        out << R"({"case_id":"x","image_path":"a","landmarks_path":"b","jaw_label":[],"has_lesion":[]})"
            << '\n';
    }
    CHECK_THROWS_WITH_AS(load_manifest((dir / "bad.jsonl").string()),
                         doctest::Contains("lesion_mask_path"), std::runtime_error);

    // verify_paths rejects dangling references
    CHECK_THROWS_WITH_AS(load_manifest(path, /*verify_paths=*/true),
                         doctest::Contains("does not exist"), std::runtime_error);
}
