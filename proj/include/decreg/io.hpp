#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "decreg/correspondence.hpp"
#include "decreg/geometry.hpp"

namespace decreg {

namespace detail {

// Fixed-format float printing; keeps file output byte-deterministic.
inline std::string format_double(double v, int precision = 9) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

inline std::string format_coord(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.7f", v);
    return buf;
}

}  // namespace detail

// ---- ASCII "x y z" cloud format, optional "viewpoint x y z" header ----

inline void save_cloud_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    if (cloud.viewpoint) {
        out << "viewpoint " << detail::format_coord(cloud.viewpoint->x()) << ' '
            << detail::format_coord(cloud.viewpoint->y()) << ' '
            << detail::format_coord(cloud.viewpoint->z()) << '\n';
    }
    for (const auto& p : cloud.points) {
        out << detail::format_coord(p.x()) << ' ' << detail::format_coord(p.y()) << ' '
            << detail::format_coord(p.z()) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

inline PointCloud load_cloud_xyz(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    PointCloud cloud;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string first;
        ss >> first;
        if (first == "viewpoint") {
            Vec3 vp;
            if (!(ss >> vp.x() >> vp.y() >> vp.z())) {
                throw IoError(path.string() + ": bad viewpoint line " + std::to_string(line_no));
            }
            cloud.viewpoint = vp;
            continue;
        }
        Vec3 p;
        std::istringstream rest(line);
        if (!(rest >> p.x() >> p.y() >> p.z())) {
            throw IoError(path.string() + ": bad point line " + std::to_string(line_no));
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

// ---- binary little-endian PLY, float32 x/y/z (read only) ----

inline PointCloud load_cloud_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());

    std::string line;
    if (!std::getline(in, line) || (line != "ply" && line != "ply\r")) {
        throw IoError(path.string() + ": not a PLY file");
    }

    struct Property {
        std::string type;
        std::string name;
    };
    std::size_t vertex_count = 0;
    std::vector<Property> vertex_props;
    bool in_vertex_element = false;
    bool binary_le = false;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "format") {
            std::string fmt;
            ss >> fmt;
            binary_le = (fmt == "binary_little_endian");
        } else if (word == "element") {
            std::string name;
            std::size_t count;
            ss >> name >> count;
            in_vertex_element = (name == "vertex");
            if (in_vertex_element) vertex_count = count;
            else if (vertex_count > 0) break;  // vertex properties fully declared
        } else if (word == "property" && in_vertex_element) {
            Property p;
            ss >> p.type >> p.name;
            if (p.type == "list") throw IoError(path.string() + ": list vertex properties unsupported");
            vertex_props.push_back(p);
        } else if (word == "end_header") {
            break;
        }
    }
    if (!binary_le) throw IoError(path.string() + ": only binary_little_endian PLY is supported");
    if (vertex_count == 0) throw IoError(path.string() + ": no vertex element");

    auto type_size = [&](const std::string& t) -> std::size_t {
        if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
        if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
        if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" ||
            t == "float32") return 4;
        if (t == "double" || t == "float64" || t == "int64" || t == "uint64") return 8;
        throw IoError(path.string() + ": unknown PLY property type " + t);
    };

    std::size_t record_size = 0;
    std::ptrdiff_t off_x = -1, off_y = -1, off_z = -1;
    for (const auto& p : vertex_props) {
        if (p.name == "x" || p.name == "y" || p.name == "z") {
            if (p.type != "float" && p.type != "float32") {
                throw IoError(path.string() + ": coordinates must be float32");
            }
            if (p.name == "x") off_x = static_cast<std::ptrdiff_t>(record_size);
            if (p.name == "y") off_y = static_cast<std::ptrdiff_t>(record_size);
            if (p.name == "z") off_z = static_cast<std::ptrdiff_t>(record_size);
        }
        record_size += type_size(p.type);
    }
    if (off_x < 0 || off_y < 0 || off_z < 0) {
        throw IoError(path.string() + ": PLY misses x/y/z vertex properties");
    }

    PointCloud cloud;
    cloud.points.reserve(vertex_count);
    std::vector<char> record(record_size);
    for (std::size_t i = 0; i < vertex_count; ++i) {
        if (!in.read(record.data(), static_cast<std::streamsize>(record_size))) {
            throw IoError(path.string() + ": truncated vertex data");
        }
        float x, y, z;
        std::memcpy(&x, record.data() + off_x, 4);
        std::memcpy(&y, record.data() + off_y, 4);
        std::memcpy(&z, record.data() + off_z, 4);
        cloud.points.emplace_back(x, y, z);
    }
    return cloud;
}

// Dispatches on extension: ".ply" binary reader, anything else ASCII xyz.
inline PointCloud load_cloud(const std::filesystem::path& path) {
    if (path.extension() == ".ply") return load_cloud_ply(path);
    return load_cloud_xyz(path);
}

// ---- correspondence file: "px py pz qx qy qz" per line ----

inline void save_correspondences(const CorrespondenceSet& cs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& c : cs.items) {
        out << detail::format_coord(c.src.x()) << ' ' << detail::format_coord(c.src.y()) << ' '
            << detail::format_coord(c.src.z()) << ' ' << detail::format_coord(c.tgt.x()) << ' '
            << detail::format_coord(c.tgt.y()) << ' ' << detail::format_coord(c.tgt.z()) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

inline CorrespondenceSet load_correspondences(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    CorrespondenceSet cs;
    cs.provenance = path.filename().string();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Correspondence c;
        if (!(ss >> c.src.x() >> c.src.y() >> c.src.z() >> c.tgt.x() >> c.tgt.y() >> c.tgt.z())) {
            throw IoError(path.string() + ": bad correspondence line " + std::to_string(line_no));
        }
        cs.items.push_back(c);
    }
    return cs;
}

// ---- hypothesis file: 12 numbers per line, row-major R then t, rank order ----

inline void save_hypotheses(const std::vector<Hypothesis>& hyps,
                            const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& h : hyps) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out << detail::format_double(h.transform.rotation(r, c), 17) << ' ';
        out << detail::format_double(h.transform.translation.x(), 17) << ' '
            << detail::format_double(h.transform.translation.y(), 17) << ' '
            << detail::format_double(h.transform.translation.z(), 17) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<Hypothesis> load_hypotheses(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::vector<Hypothesis> hyps;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Hypothesis h;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                if (!(ss >> h.transform.rotation(r, c))) {
                    throw IoError(path.string() + ": bad hypothesis line " + std::to_string(line_no));
                }
        if (!(ss >> h.transform.translation.x() >> h.transform.translation.y() >>
              h.transform.translation.z())) {
            throw IoError(path.string() + ": bad hypothesis line " + std::to_string(line_no));
        }
        h.rank = static_cast<int>(hyps.size());
        hyps.push_back(h);
    }
    return hyps;
}

}  // namespace decreg
