#include "toothseg/core/landmarks.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace toothseg {

void LandmarkSet::set_coord(int i, const Vec3d& c) {
    if (c == kMissingLandmark) {
        set_missing(i);
        return;
    }
    for (int a = 0; a < 3; ++a)
        if (c[a] < 0 || c[a] >= static_cast<double>(reference_shape_[a]))
            throw std::invalid_argument("landmark " + std::to_string(i) + " outside reference shape");
    coords_.at(static_cast<std::size_t>(i)) = c;
}

namespace {

double parse_number(const std::string& tok, const std::string& path) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": non-numeric field '" + tok + "'");
    }
}

}  // namespace

LandmarkSet load_landmarks(const std::string& path, int expected_count) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open landmark file: " + path);
    std::vector<Vec3d> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> fields;
        while (std::getline(ss, tok, ',')) fields.push_back(tok);
        if (fields.size() != 4)
            throw std::runtime_error(path + ": expected 4 comma-separated fields, got " +
                                     std::to_string(fields.size()));
        const double idx = parse_number(fields[0], path);
        if (idx != static_cast<double>(line_no))
            throw std::runtime_error(path + ": tooth_index " + fields[0] + " out of order (expected " +
                                     std::to_string(line_no) + ")");
        rows.push_back({parse_number(fields[1], path), parse_number(fields[2], path),
                        parse_number(fields[3], path)});
        ++line_no;
    }
    if (expected_count >= 0 && static_cast<int>(rows.size()) != expected_count)
        throw std::runtime_error(path + ": wrong row count " + std::to_string(rows.size()) +
                                 " (expected " + std::to_string(expected_count) + ")");
    if (rows.empty()) throw std::runtime_error(path + ": empty landmark file");

    // The CSV carries no reference shape; start with the smallest shape that
    // contains the data and let callers rebind it to the image shape.
    Index3 ref = {1, 1, 1};
    for (const auto& r : rows)
        if (r != kMissingLandmark)
            for (int a = 0; a < 3; ++a)
                if (r[a] >= static_cast<double>(ref[a])) ref[a] = static_cast<std::int64_t>(r[a]) + 1;
    LandmarkSet result(static_cast<int>(rows.size()), ref);
    for (int i = 0; i < result.count(); ++i)
        if (rows[static_cast<std::size_t>(i)] != kMissingLandmark)
            result.set_coord(i, rows[static_cast<std::size_t>(i)]);
    return result;
}

void save_landmarks(const LandmarkSet& lms, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open landmark file for writing: " + path);
    out.precision(17);
    for (int i = 0; i < lms.count(); ++i) {
        const Vec3d& c = lms.coord(i);
        out << i << ',' << c[0] << ',' << c[1] << ',' << c[2] << '\n';
    }
    if (!out) throw std::runtime_error("landmark write failed: " + path);
}

}  // namespace toothseg
