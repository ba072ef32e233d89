#include "toothseg/core/io.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace toothseg {

namespace {

std::string lower_ext(const std::string& path) {
    std::string e = fs::path(path).extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::array<double, 3> parse_triple(const std::string& v, const std::string& path) {
    std::stringstream ss(v);
    std::array<double, 3> out;
    for (int i = 0; i < 3; ++i)
        if (!(ss >> out[i])) throw std::runtime_error(path + ": malformed header value '" + v + "'");
    return out;
}

template <typename S>
std::vector<float> read_and_convert(std::istream& in, std::int64_t n, const std::string& path) {
    std::vector<S> raw(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(S)));
    if (!in) throw std::runtime_error(path + ": truncated voxel data");
    std::vector<float> out(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(raw[static_cast<std::size_t>(i)]);
    return out;
}

Volume3D load_metaimage(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open volume: " + path);
    std::map<std::string, std::string> header;
    std::string line;
    std::string data_file;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error(path + ": malformed header line '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        header[key] = val;
        if (key == "ElementDataFile") {
            data_file = val;
            break;  // header ends here; LOCAL data follows immediately
        }
    }
    if (data_file.empty()) throw std::runtime_error(path + ": missing ElementDataFile");
    if (header.count("ObjectType") && header["ObjectType"] != "Image")
        throw std::runtime_error(path + ": unsupported ObjectType " + header["ObjectType"]);
    if (header.count("NDims") && header["NDims"] != "3")
        throw std::runtime_error(path + ": only 3-D volumes are supported");
    if (header.count("CompressedData") && header["CompressedData"] == "True")
        throw std::runtime_error(path + ": compressed MetaImage not supported");
    if (header.count("ElementByteOrderMSB") && header["ElementByteOrderMSB"] == "True")
        throw std::runtime_error(path + ": big-endian MetaImage not supported");
    if (!header.count("DimSize")) throw std::runtime_error(path + ": missing DimSize");

    const auto dim = parse_triple(header["DimSize"], path);
    Index3 shape = {static_cast<std::int64_t>(dim[0]), static_cast<std::int64_t>(dim[1]),
                    static_cast<std::int64_t>(dim[2])};
    Vec3d spacing = {1, 1, 1};
    if (header.count("ElementSpacing"))
        spacing = parse_triple(header["ElementSpacing"], path);
    else if (header.count("ElementSize"))
        spacing = parse_triple(header["ElementSize"], path);
    for (double s : spacing)
        if (!(s > 0)) throw std::runtime_error(path + ": non-positive spacing in header");
    Vec3d origin = {0, 0, 0};
    if (header.count("Offset")) origin = parse_triple(header["Offset"], path);
    else if (header.count("Position")) origin = parse_triple(header["Position"], path);

    const std::string etype = header.count("ElementType") ? header["ElementType"] : "MET_FLOAT";
    const std::int64_t n = shape[0] * shape[1] * shape[2];

    std::ifstream ext;
    std::istream* src = &in;
    if (data_file != "LOCAL") {
        const fs::path raw_path = fs::path(path).parent_path() / data_file;
        ext.open(raw_path, std::ios::binary);
        if (!ext) throw std::runtime_error(path + ": cannot open data file " + raw_path.string());
        src = &ext;
    }

    std::vector<float> data;
    if (etype == "MET_FLOAT")
        data = read_and_convert<float>(*src, n, path);
    else if (etype == "MET_DOUBLE")
        data = read_and_convert<double>(*src, n, path);
    else if (etype == "MET_UCHAR")
        data = read_and_convert<std::uint8_t>(*src, n, path);
    else if (etype == "MET_SHORT")
        data = read_and_convert<std::int16_t>(*src, n, path);
    else if (etype == "MET_USHORT")
        data = read_and_convert<std::uint16_t>(*src, n, path);
    else
        throw std::runtime_error(path + ": unsupported ElementType " + etype);

    return Volume3D(shape, spacing, origin, std::move(data));
}

void save_metaimage(const Volume3D& v, const std::string& path, bool local) {
    std::string data_file = "LOCAL";
    if (!local) data_file = fs::path(path).stem().string() + ".raw";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open volume for writing: " + path);
    out << "ObjectType = Image\nNDims = 3\nBinaryData = True\nBinaryDataByteOrderMSB = False\n"
        << "CompressedData = False\n"
        << "DimSize = " << v.nx() << ' ' << v.ny() << ' ' << v.nz() << '\n';
    out.precision(17);
    out << "ElementSpacing = " << v.spacing()[0] << ' ' << v.spacing()[1] << ' ' << v.spacing()[2] << '\n'
        << "Offset = " << v.origin()[0] << ' ' << v.origin()[1] << ' ' << v.origin()[2] << '\n'
        << "ElementType = MET_FLOAT\nElementDataFile = " << data_file << '\n';
    if (local) {
        out.write(reinterpret_cast<const char*>(v.data().data()),
                  static_cast<std::streamsize>(v.data().size() * sizeof(float)));
        if (!out) throw std::runtime_error("volume write failed: " + path);
    } else {
        out.close();
        const fs::path raw_path = fs::path(path).parent_path() / data_file;
        std::ofstream raw(raw_path, std::ios::binary);
        if (!raw) throw std::runtime_error("cannot open data file for writing: " + raw_path.string());
        raw.write(reinterpret_cast<const char*>(v.data().data()),
                  static_cast<std::streamsize>(v.data().size() * sizeof(float)));
        if (!raw) throw std::runtime_error("volume write failed: " + raw_path.string());
    }
}

Volume3D load_f32raw(const std::string& path) {
    const std::string sidecar = path + ".json";
    std::ifstream meta_in(sidecar);
    if (!meta_in) throw std::runtime_error("missing sidecar: " + sidecar);
    json meta;
    try {
        meta = json::parse(meta_in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(sidecar + ": " + e.what());
    }
    const auto shape_v = meta.at("shape").get<std::vector<std::int64_t>>();
    const auto spacing_v = meta.at("spacing").get<std::vector<double>>();
    std::vector<double> origin_v = {0, 0, 0};
    if (meta.contains("origin")) origin_v = meta.at("origin").get<std::vector<double>>();
    if (shape_v.size() != 3 || spacing_v.size() != 3 || origin_v.size() != 3)
        throw std::runtime_error(sidecar + ": shape/spacing/origin must have 3 entries");
    for (double s : spacing_v)
        if (!(s > 0)) throw std::runtime_error(sidecar + ": non-positive spacing");
    Index3 shape = {shape_v[0], shape_v[1], shape_v[2]};
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open volume: " + path);
    const std::int64_t n = shape[0] * shape[1] * shape[2];
    std::vector<float> data = read_and_convert<float>(in, n, path);
    return Volume3D(shape, {spacing_v[0], spacing_v[1], spacing_v[2]},
                    {origin_v[0], origin_v[1], origin_v[2]}, std::move(data));
}

void save_f32raw(const Volume3D& v, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open volume for writing: " + path);
    out.write(reinterpret_cast<const char*>(v.data().data()),
              static_cast<std::streamsize>(v.data().size() * sizeof(float)));
    if (!out) throw std::runtime_error("volume write failed: " + path);
    json meta;
    meta["shape"] = std::vector<std::int64_t>{v.nx(), v.ny(), v.nz()};
    meta["spacing"] = std::vector<double>{v.spacing()[0], v.spacing()[1], v.spacing()[2]};
    meta["origin"] = std::vector<double>{v.origin()[0], v.origin()[1], v.origin()[2]};
    std::ofstream meta_out(path + ".json");
    if (!meta_out) throw std::runtime_error("cannot open sidecar for writing: " + path + ".json");
    meta_out << meta.dump(2) << '\n';
    if (!meta_out) throw std::runtime_error("sidecar write failed: " + path + ".json");
}

}  // namespace

Volume3D load_volume(const std::string& path) {
    if (!fs::exists(path)) throw std::runtime_error("volume file does not exist: " + path);
    const std::string ext = lower_ext(path);
    if (ext == ".mha" || ext == ".mhd") return load_metaimage(path);
    if (ext == ".f32raw") return load_f32raw(path);
    throw std::runtime_error("unsupported volume format: " + path);
}

void save_volume(const Volume3D& volume, const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".mha")
        save_metaimage(volume, path, /*local=*/true);
    else if (ext == ".mhd")
        save_metaimage(volume, path, /*local=*/false);
    else if (ext == ".f32raw")
        save_f32raw(volume, path);
    else
        throw std::runtime_error("unsupported volume format: " + path);
}

}  // namespace toothseg
