#pragma once

// Minimal PLY loader shared by the point-cloud and mesh readers. Parses ascii
// and binary_little_endian files into per-element property columns (scalars
// widened to double, list properties kept as index vectors).

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sdfmap/core.hpp"

namespace sdfmap::ply {

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

inline Scalar scalar_from_name(const std::string& s, const std::string& path) {
    if (s == "char" || s == "int8") return Scalar::I8;
    if (s == "uchar" || s == "uint8") return Scalar::U8;
    if (s == "short" || s == "int16") return Scalar::I16;
    if (s == "ushort" || s == "uint16") return Scalar::U16;
    if (s == "int" || s == "int32") return Scalar::I32;
    if (s == "uint" || s == "uint32") return Scalar::U32;
    if (s == "float" || s == "float32") return Scalar::F32;
    if (s == "double" || s == "float64") return Scalar::F64;
    fail("%s: unsupported ply scalar type '%s'", path.c_str(), s.c_str());
}

inline std::size_t scalar_size(Scalar s) {
    switch (s) {
        case Scalar::I8: case Scalar::U8: return 1;
        case Scalar::I16: case Scalar::U16: return 2;
        case Scalar::I32: case Scalar::U32: case Scalar::F32: return 4;
        case Scalar::F64: return 8;
    }
    return 0;
}

struct Property {
    std::string name;
    bool is_list = false;
    Scalar type = Scalar::F32;   // item type for lists
    Scalar count_type = Scalar::U8;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> props;
    // column-major storage: scalar props widened to double, lists as rows
    std::vector<std::vector<double>> scalar_cols;               // parallel to scalar props
    std::vector<std::vector<std::vector<int64_t>>> list_cols;   // parallel to list props
    std::vector<int> col_of_prop;                               // prop index -> column index

    int find_scalar(const std::string& prop) const {
        int sc = 0;
        for (std::size_t i = 0; i < props.size(); ++i) {
            if (!props[i].is_list) {
                if (props[i].name == prop) return sc;
                ++sc;
            }
        }
        return -1;
    }
};

struct File {
    bool binary = false;
    std::vector<Element> elements;

    const Element* find(const std::string& name) const {
        for (const auto& e : elements)
            if (e.name == name) return &e;
        return nullptr;
    }
};

inline double read_binary_scalar(std::istream& in, Scalar t, const std::string& path) {
    unsigned char buf[8];
    std::size_t n = scalar_size(t);
    if (!in.read(reinterpret_cast<char*>(buf), std::streamsize(n)))
        fail("%s: truncated ply payload", path.c_str());
    switch (t) {
        case Scalar::I8: return double(int8_t(buf[0]));
        case Scalar::U8: return double(buf[0]);
        case Scalar::I16: { int16_t v; std::memcpy(&v, buf, 2); return v; }
        case Scalar::U16: { uint16_t v; std::memcpy(&v, buf, 2); return v; }
        case Scalar::I32: { int32_t v; std::memcpy(&v, buf, 4); return v; }
        case Scalar::U32: { uint32_t v; std::memcpy(&v, buf, 4); return v; }
        case Scalar::F32: { float v; std::memcpy(&v, buf, 4); return v; }
        case Scalar::F64: { double v; std::memcpy(&v, buf, 8); return v; }
    }
    return 0.0;
}

inline File read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("%s: cannot open", path.c_str());

    std::string line;
    if (!std::getline(in, line)) fail("%s: empty file", path.c_str());
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line != "ply") fail("%s: not a ply file", path.c_str());

    File f;
    bool have_format = false;
    while (std::getline(in, line)) {
        if (line.size() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok.empty()) continue;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") f.binary = false;
            else if (fmt == "binary_little_endian") f.binary = true;
            else fail("%s: unsupported ply format '%s'", path.c_str(), fmt.c_str());
            have_format = true;
        } else if (tok == "element") {
            Element e;
            ls >> e.name >> e.count;
            f.elements.push_back(std::move(e));
        } else if (tok == "property") {
            if (f.elements.empty()) fail("%s: property before element", path.c_str());
            Property p;
            std::string t1;
            ls >> t1;
            if (t1 == "list") {
                std::string ct, it;
                ls >> ct >> it >> p.name;
                p.is_list = true;
                p.count_type = scalar_from_name(ct, path);
                p.type = scalar_from_name(it, path);
            } else {
                p.type = scalar_from_name(t1, path);
                ls >> p.name;
            }
            f.elements.back().props.push_back(p);
        } else if (tok == "end_header") {
            break;
        } else {
            fail("%s: unrecognized header line '%s'", path.c_str(), line.c_str());
        }
    }
    if (!have_format) fail("%s: missing ply format line", path.c_str());

    for (auto& e : f.elements) {
        e.col_of_prop.resize(e.props.size());
        int sc = 0, lc = 0;
        for (std::size_t i = 0; i < e.props.size(); ++i) {
            if (e.props[i].is_list) {
                e.col_of_prop[i] = lc++;
            } else {
                e.col_of_prop[i] = sc++;
            }
        }
        e.scalar_cols.assign(sc, {});
        for (auto& c : e.scalar_cols) c.reserve(e.count);
        e.list_cols.assign(lc, {});
        for (auto& c : e.list_cols) c.reserve(e.count);
    }

    for (auto& e : f.elements) {
        for (std::size_t row = 0; row < e.count; ++row) {
            if (f.binary) {
                for (std::size_t i = 0; i < e.props.size(); ++i) {
                    const Property& p = e.props[i];
                    if (p.is_list) {
                        auto n = std::size_t(read_binary_scalar(in, p.count_type, path));
                        std::vector<int64_t> items(n);
                        for (std::size_t k = 0; k < n; ++k)
                            items[k] = int64_t(read_binary_scalar(in, p.type, path));
                        e.list_cols[e.col_of_prop[i]].push_back(std::move(items));
                    } else {
                        e.scalar_cols[e.col_of_prop[i]].push_back(read_binary_scalar(in, p.type, path));
                    }
                }
            } else {
                std::string row_line;
                do {
                    if (!std::getline(in, row_line)) fail("%s: truncated ply payload", path.c_str());
                } while (row_line.find_first_not_of(" \t\r\n") == std::string::npos);
                std::istringstream rs(row_line);
                for (std::size_t i = 0; i < e.props.size(); ++i) {
                    const Property& p = e.props[i];
                    if (p.is_list) {
                        std::size_t n = 0;
                        if (!(rs >> n)) fail("%s: malformed ply row", path.c_str());
                        std::vector<int64_t> items(n);
                        for (std::size_t k = 0; k < n; ++k)
                            if (!(rs >> items[k])) fail("%s: malformed ply row", path.c_str());
                        e.list_cols[e.col_of_prop[i]].push_back(std::move(items));
                    } else {
                        double v = 0;
                        if (!(rs >> v)) fail("%s: malformed ply row", path.c_str());
                        e.scalar_cols[e.col_of_prop[i]].push_back(v);
                    }
                }
            }
        }
    }
    return f;
}

inline void write_binary_scalar(std::ostream& out, Scalar t, double v) {
    switch (t) {
        case Scalar::I8: { int8_t b = int8_t(v); out.write(reinterpret_cast<char*>(&b), 1); break; }
        case Scalar::U8: { uint8_t b = uint8_t(v); out.write(reinterpret_cast<char*>(&b), 1); break; }
        case Scalar::I16: { int16_t b = int16_t(v); out.write(reinterpret_cast<char*>(&b), 2); break; }
        case Scalar::U16: { uint16_t b = uint16_t(v); out.write(reinterpret_cast<char*>(&b), 2); break; }
        case Scalar::I32: { int32_t b = int32_t(v); out.write(reinterpret_cast<char*>(&b), 4); break; }
        case Scalar::U32: { uint32_t b = uint32_t(v); out.write(reinterpret_cast<char*>(&b), 4); break; }
        case Scalar::F32: { float b = float(v); out.write(reinterpret_cast<char*>(&b), 4); break; }
        case Scalar::F64: { out.write(reinterpret_cast<const char*>(&v), 8); break; }
    }
}

}  // namespace sdfmap::ply
