#include "thermrom/io.hpp"

#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "thermrom/error.hpp"
#include "thermrom/parallel.hpp"

namespace thermrom {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[noreturn]] void fail_at(const std::filesystem::path& file, int line, const std::string& msg) {
    std::ostringstream s;
    s << file.string() << ':' << line << ": " << msg;
    throw ValidationError(s.str());
}

// ---------------------------------------------------------------------------
// Minimal structured-text reader for the model files: [section], [[section]]
// array entries, key = value with numbers, "strings", booleans and (nested)
// arrays. Close enough to TOML for the schema at hand, with positions kept
// for error messages.

struct Value {
    enum class Kind { Number, String, Boolean, Array };
    Kind kind = Kind::Number;
    double number = 0.0;
    std::string text;
    bool boolean = false;
    std::vector<Value> items;
    int line = 0;
};

struct Table {
    std::map<std::string, Value> entries;
    int line = 0;
};

struct Document {
    std::filesystem::path file;
    std::map<std::string, std::vector<Table>> sections;
};

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

Value parse_value(const Document& doc, std::string token, int line);

std::vector<Value> parse_array(const Document& doc, const std::string& inner, int line) {
    std::vector<Value> items;
    int depth = 0;
    bool quoted = false;
    std::string current;
    auto push = [&] {
        const std::string t = strip(current);
        if (!t.empty()) items.push_back(parse_value(doc, t, line));
        current.clear();
    };
    for (char c : inner) {
        if (quoted) {
            current += c;
            if (c == '"') quoted = false;
            continue;
        }
        if (c == '"') {
            quoted = true;
            current += c;
        } else if (c == '[') {
            ++depth;
            current += c;
        } else if (c == ']') {
            --depth;
            current += c;
        } else if (c == ',' && depth == 0) {
            push();
        } else {
            current += c;
        }
    }
    if (depth != 0 || quoted) fail_at(doc.file, line, "unbalanced array");
    push();
    return items;
}

Value parse_value(const Document& doc, std::string token, int line) {
    Value v;
    v.line = line;
    token = strip(token);
    if (token.empty()) fail_at(doc.file, line, "missing value");
    if (token.front() == '"') {
        if (token.size() < 2 || token.back() != '"')
            fail_at(doc.file, line, "unterminated string");
        v.kind = Value::Kind::String;
        v.text = token.substr(1, token.size() - 2);
        return v;
    }
    if (token.front() == '[') {
        if (token.back() != ']') fail_at(doc.file, line, "unterminated array");
        v.kind = Value::Kind::Array;
        v.items = parse_array(doc, token.substr(1, token.size() - 2), line);
        return v;
    }
    if (token == "true" || token == "false") {
        v.kind = Value::Kind::Boolean;
        v.boolean = token == "true";
        return v;
    }
    char* end = nullptr;
    v.number = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size())
        fail_at(doc.file, line, "cannot parse value '" + token + "'");
    v.kind = Value::Kind::Number;
    return v;
}

Document parse_document(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model file " + path.string());
    Document doc;
    doc.file = path;
    Table* current = nullptr;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        // comments start at an unquoted '#'
        bool quoted = false;
        for (std::size_t p = 0; p < raw.size(); ++p) {
            if (raw[p] == '"') quoted = !quoted;
            if (raw[p] == '#' && !quoted) {
                raw.resize(p);
                break;
            }
        }
        const std::string s = strip(raw);
        if (s.empty()) continue;
        if (s.front() == '[') {
            const bool array = s.size() > 1 && s[1] == '[';
            const std::string close = array ? "]]" : "]";
            if (s.size() < 2 * close.size() + 1 || s.substr(s.size() - close.size()) != close)
                fail_at(path, line, "malformed section header");
            const std::string name =
                strip(s.substr(close.size(), s.size() - 2 * close.size()));
            if (name.empty()) fail_at(path, line, "empty section name");
            auto& list = doc.sections[name];
            if (!array && !list.empty())
                fail_at(path, line, "duplicate section [" + name + "]");
            list.push_back(Table{{}, line});
            current = &list.back();
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) fail_at(path, line, "expected 'key = value'");
        if (!current) fail_at(path, line, "key outside any section");
        const std::string key = strip(s.substr(0, eq));
        if (key.empty()) fail_at(path, line, "empty key");
        if (current->entries.count(key)) fail_at(path, line, "duplicate key '" + key + "'");
        current->entries[key] = parse_value(doc, s.substr(eq + 1), line);
    }
    return doc;
}

// Schema helpers ------------------------------------------------------------

const Value* find(const Table& t, const std::string& key) {
    auto it = t.entries.find(key);
    return it == t.entries.end() ? nullptr : &it->second;
}

const Value& require(const Document& doc, const Table& t, const std::string& section,
                     const std::string& key) {
    const Value* v = find(t, key);
    if (!v) fail_at(doc.file, t.line, "[" + section + "] is missing key '" + key + "'");
    return *v;
}

double num(const Document& doc, const Table& t, const std::string& section,
           const std::string& key) {
    const Value& v = require(doc, t, section, key);
    if (v.kind != Value::Kind::Number) fail_at(doc.file, v.line, "'" + key + "' must be a number");
    return v.number;
}

int integer(const Document& doc, const Table& t, const std::string& section,
            const std::string& key) {
    const double d = num(doc, t, section, key);
    const int i = int(d);
    if (double(i) != d) fail_at(doc.file, find(t, key)->line, "'" + key + "' must be an integer");
    return i;
}

std::string text(const Document& doc, const Table& t, const std::string& section,
                 const std::string& key) {
    const Value& v = require(doc, t, section, key);
    if (v.kind != Value::Kind::String) fail_at(doc.file, v.line, "'" + key + "' must be a string");
    return v.text;
}

void reject_unknown(const Document& doc, const Table& t, const std::string& section,
                    const std::set<std::string>& allowed) {
    for (const auto& [key, value] : t.entries)
        if (!allowed.count(key))
            fail_at(doc.file, value.line, "unknown key '" + key + "' in [" + section + "]");
}

} // namespace

ModelFile read_model_file(const std::filesystem::path& path) {
    const Document doc = parse_document(path);
    ModelFile out;

    for (const auto& [name, tables] : doc.sections) {
        static const std::set<std::string> known = {
            "grid",          "layer",         "model",         "unit",
            "partition",     "boundary.xmin", "boundary.xmax", "boundary.ymin",
            "boundary.ymax", "boundary.zmin", "boundary.zmax"};
        if (!known.count(name))
            fail_at(path, tables.front().line, "unknown section [" + name + "]");
    }

    auto it = doc.sections.find("grid");
    if (it == doc.sections.end()) fail_at(path, 1, "missing [grid] section");
    {
        const Table& t = it->second.front();
        reject_unknown(doc, t, "grid", {"nx", "ny", "nz", "dx", "dy", "dz", "origin"});
        Grid3D& g = out.model.grid;
        g.nx = integer(doc, t, "grid", "nx");
        g.ny = integer(doc, t, "grid", "ny");
        g.nz = integer(doc, t, "grid", "nz");
        g.dx = num(doc, t, "grid", "dx");
        g.dy = num(doc, t, "grid", "dy");
        g.dz = num(doc, t, "grid", "dz");
        if (const Value* v = find(t, "origin")) {
            if (v->kind != Value::Kind::Array || v->items.size() != 3)
                fail_at(path, v->line, "'origin' must be an array of three numbers");
            for (int a = 0; a < 3; ++a) {
                if (v->items[a].kind != Value::Kind::Number)
                    fail_at(path, v->line, "'origin' must be an array of three numbers");
                g.origin[a] = v->items[a].number;
            }
        }
    }

    it = doc.sections.find("layer");
    if (it == doc.sections.end()) fail_at(path, 1, "missing [[layer]] sections");
    for (const Table& t : it->second) {
        reject_unknown(doc, t, "layer", {"cells", "rho", "c", "k"});
        MaterialLayer l;
        l.cells = integer(doc, t, "layer", "cells");
        l.rho = num(doc, t, "layer", "rho");
        l.c_heat = num(doc, t, "layer", "c");
        l.k_cond = num(doc, t, "layer", "k");
        out.model.layers.push_back(l);
    }

    for (Face f : {Face::XMin, Face::XMax, Face::YMin, Face::YMax, Face::ZMin, Face::ZMax}) {
        const std::string section = std::string("boundary.") + face_name(f);
        auto bit = doc.sections.find(section);
        if (bit == doc.sections.end()) continue;  // absent face stays adiabatic
        const Table& t = bit->second.front();
        reject_unknown(doc, t, section, {"type", "h", "t_ambient"});
        const std::string type = text(doc, t, section, "type");
        FaceBc& bc = out.model.boundary.at(f);
        if (type == "adiabatic") {
            bc = FaceBc{};
        } else if (type == "robin") {
            bc.robin = true;
            bc.h = num(doc, t, section, "h");
            bc.t_ambient = num(doc, t, section, "t_ambient");
        } else {
            fail_at(path, t.line, "boundary type must be \"robin\" or \"adiabatic\"");
        }
    }

    it = doc.sections.find("model");
    if (it == doc.sections.end()) fail_at(path, 1, "missing [model] section");
    {
        const Table& t = it->second.front();
        reject_unknown(doc, t, "model", {"device_layer"});
        out.model.device_layer = integer(doc, t, "model", "device_layer");
    }

    it = doc.sections.find("unit");
    if (it != doc.sections.end()) {
        for (const Table& t : it->second) {
            reject_unknown(doc, t, "unit", {"name", "x0", "y0", "width", "height", "powered"});
            FunctionalUnit u;
            u.name = text(doc, t, "unit", "name");
            u.x0 = num(doc, t, "unit", "x0");
            u.y0 = num(doc, t, "unit", "y0");
            u.width = num(doc, t, "unit", "width");
            u.height = num(doc, t, "unit", "height");
            if (const Value* v = find(t, "powered")) {
                if (v->kind != Value::Kind::Boolean)
                    fail_at(path, v->line, "'powered' must be true or false");
                u.powered = v->boolean;
            }
            out.model.units.push_back(std::move(u));
        }
    }

    it = doc.sections.find("partition");
    if (it != doc.sections.end()) {
        const Table& t = it->second.front();
        reject_unknown(doc, t, "partition", {"grouping", "groups"});
        const std::string grouping = text(doc, t, "partition", "grouping");
        if (grouping == "per-unit") {
            out.grouping = Grouping::per_unit();
        } else if (grouping == "grouped") {
            const Value& v = require(doc, t, "partition", "groups");
            if (v.kind != Value::Kind::Array)
                fail_at(path, v.line, "'groups' must be an array of arrays of unit names");
            std::vector<std::vector<std::string>> groups;
            for (const Value& g : v.items) {
                if (g.kind != Value::Kind::Array)
                    fail_at(path, v.line, "'groups' must be an array of arrays of unit names");
                std::vector<std::string> group;
                for (const Value& m : g.items) {
                    if (m.kind != Value::Kind::String)
                        fail_at(path, v.line, "group members must be unit names");
                    group.push_back(m.text);
                }
                groups.push_back(std::move(group));
            }
            out.grouping = Grouping::grouped(std::move(groups));
        } else {
            fail_at(path, t.line, "grouping must be \"per-unit\" or \"grouped\"");
        }
    }

    try {
        out.model.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return out;
}

void write_model_file(const std::filesystem::path& path, const ChipModel& model,
                      const Grouping& grouping) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write model file " + path.string());
    const Grid3D& g = model.grid;
    os << "[grid]\n";
    os << "nx = " << g.nx << "\nny = " << g.ny << "\nnz = " << g.nz << '\n';
    os << "dx = " << fmt(g.dx) << "\ndy = " << fmt(g.dy) << "\ndz = " << fmt(g.dz) << '\n';
    os << "origin = [" << fmt(g.origin[0]) << ", " << fmt(g.origin[1]) << ", "
       << fmt(g.origin[2]) << "]\n";
    for (const MaterialLayer& l : model.layers) {
        os << "\n[[layer]]\n";
        os << "cells = " << l.cells << "\nrho = " << fmt(l.rho) << "\nc = " << fmt(l.c_heat)
           << "\nk = " << fmt(l.k_cond) << '\n';
    }
    for (Face f : {Face::XMin, Face::XMax, Face::YMin, Face::YMax, Face::ZMin, Face::ZMax}) {
        const FaceBc& bc = model.boundary.at(f);
        if (!bc.robin) continue;
        os << "\n[boundary." << face_name(f) << "]\n";
        os << "type = \"robin\"\nh = " << fmt(bc.h) << "\nt_ambient = " << fmt(bc.t_ambient)
           << '\n';
    }
    os << "\n[model]\ndevice_layer = " << model.device_layer << '\n';
    for (const FunctionalUnit& u : model.units) {
        os << "\n[[unit]]\n";
        os << "name = \"" << u.name << "\"\n";
        os << "x0 = " << fmt(u.x0) << "\ny0 = " << fmt(u.y0) << '\n';
        os << "width = " << fmt(u.width) << "\nheight = " << fmt(u.height) << '\n';
        if (!u.powered) os << "powered = false\n";
    }
    os << "\n[partition]\n";
    if (grouping.kind == Grouping::Kind::PerUnit) {
        os << "grouping = \"per-unit\"\n";
    } else {
        os << "grouping = \"grouped\"\ngroups = [";
        for (std::size_t g2 = 0; g2 < grouping.groups.size(); ++g2) {
            if (g2) os << ", ";
            os << '[';
            for (std::size_t m = 0; m < grouping.groups[g2].size(); ++m) {
                if (m) os << ", ";
                os << '"' << grouping.groups[g2][m] << '"';
            }
            os << ']';
        }
        os << "]\n";
    }
    if (!os) throw ValidationError("failed writing model file " + path.string());
}

// Power traces ---------------------------------------------------------------

PowerTrace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open trace file " + path.string());
    std::string line;
    int lineno = 0;

    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s) {
            if (c == ',') {
                out.push_back(strip(cur));
                cur.clear();
            } else
                cur += c;
        }
        out.push_back(strip(cur));
        return out;
    };

    if (!std::getline(in, line)) fail_at(path, 1, "empty trace file");
    ++lineno;
    std::vector<std::string> header = split(line);
    if (header.size() < 2 || header[0] != "t")
        fail_at(path, 1, "trace header must be 't,<block_id>,...'");

    PowerTrace trace;
    trace.block_ids.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    std::vector<double> times;
    while (std::getline(in, line)) {
        ++lineno;
        if (strip(line).empty()) continue;
        const std::vector<std::string> cols = split(line);
        if (cols.size() != header.size())
            fail_at(path, lineno, "expected " + std::to_string(header.size()) + " columns");
        std::vector<double> row(cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c) {
            char* end = nullptr;
            row[c] = std::strtod(cols[c].c_str(), &end);
            if (end != cols[c].c_str() + cols[c].size())
                fail_at(path, lineno, "cannot parse number '" + cols[c] + "'");
        }
        times.push_back(row[0]);
        row.erase(row.begin());
        rows.push_back(std::move(row));
    }
    if (rows.empty()) fail_at(path, lineno, "trace has no steps");

    trace.time_step = times[0];
    if (trace.time_step <= 0.0) fail_at(path, 2, "first timestamp must be positive (it is dt)");
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double expected = double(k + 1) * trace.time_step;
        if (std::abs(times[k] - expected) > 1e-9 * std::max(1.0, expected))
            fail_at(path, int(k + 2), "time column must advance uniformly by dt");
    }

    trace.powers.resize(Eigen::Index(rows.size()), Eigen::Index(trace.block_ids.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            trace.powers(Eigen::Index(r), Eigen::Index(c)) = rows[r][c];
    try {
        trace.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return trace;
}

void write_trace_csv(const std::filesystem::path& path, const PowerTrace& trace) {
    trace.validate();
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write trace file " + path.string());
    os << 't';
    for (const std::string& id : trace.block_ids) os << ',' << id;
    os << '\n';
    for (int k = 0; k < trace.n_steps(); ++k) {
        os << fmt((k + 1) * trace.time_step);
        for (Eigen::Index c = 0; c < trace.powers.cols(); ++c)
            os << ',' << fmt(trace.powers(k, c));
        os << '\n';
    }
    if (!os) throw ValidationError("failed writing trace file " + path.string());
}

// Field dumps ----------------------------------------------------------------

void write_field(const std::filesystem::path& base, const ThermalField& field) {
    const std::filesystem::path data = base.string() + ".f64";
    const std::filesystem::path hdr = base.string() + ".hdr";
    std::ofstream os(data, std::ios::binary);
    if (!os) throw ValidationError("cannot write field file " + data.string());
    os.write(reinterpret_cast<const char*>(field.values.data()),
             std::streamsize(sizeof(double)) * field.values.size());
    if (!os) throw ValidationError("failed writing field file " + data.string());

    std::ofstream hs(hdr);
    if (!hs) throw ValidationError("cannot write field header " + hdr.string());
    const Grid3D& g = field.grid;
    hs << "nx " << g.nx << "\nny " << g.ny << "\nnz " << g.nz << '\n';
    hs << "dx " << fmt(g.dx) << "\ndy " << fmt(g.dy) << "\ndz " << fmt(g.dz) << '\n';
    hs << "timestamp " << fmt(field.timestamp) << '\n';
    if (!hs) throw ValidationError("failed writing field header " + hdr.string());
}

ThermalField read_field(const std::filesystem::path& base) {
    const std::filesystem::path data = base.string() + ".f64";
    const std::filesystem::path hdr = base.string() + ".hdr";

    std::ifstream hs(hdr);
    if (!hs) throw ValidationError("cannot open field header " + hdr.string());
    ThermalField field;
    Grid3D& g = field.grid;
    std::string key;
    int lineno = 0;
    std::string line;
    std::map<std::string, std::string> kv;
    while (std::getline(hs, line)) {
        ++lineno;
        if (strip(line).empty()) continue;
        std::istringstream ss(line);
        std::string value;
        if (!(ss >> key >> value)) fail_at(hdr, lineno, "expected 'key value'");
        kv[key] = value;
    }
    auto geti = [&](const char* k) {
        auto it = kv.find(k);
        if (it == kv.end()) fail_at(hdr, 1, std::string("missing '") + k + "'");
        return std::stoi(it->second);
    };
    auto getd = [&](const char* k) {
        auto it = kv.find(k);
        if (it == kv.end()) fail_at(hdr, 1, std::string("missing '") + k + "'");
        return std::strtod(it->second.c_str(), nullptr);
    };
    g.nx = geti("nx");
    g.ny = geti("ny");
    g.nz = geti("nz");
    g.dx = getd("dx");
    g.dy = getd("dy");
    g.dz = getd("dz");
    field.timestamp = getd("timestamp");
    // dumps may hold single-layer slices, so only positivity is required here
    if (g.nx < 1 || g.ny < 1 || g.nz < 1 || g.dx <= 0.0 || g.dy <= 0.0 || g.dz <= 0.0)
        fail_at(hdr, 1, "invalid grid dimensions");

    std::ifstream is(data, std::ios::binary);
    if (!is) throw ValidationError("cannot open field file " + data.string());
    is.seekg(0, std::ios::end);
    const std::int64_t bytes = is.tellg();
    if (bytes != std::int64_t(sizeof(double)) * g.cell_count())
        throw ValidationError("field file " + data.string() + " does not match its header");
    is.seekg(0);
    field.values.resize(g.cell_count());
    is.read(reinterpret_cast<char*>(field.values.data()), bytes);
    if (!is) throw ValidationError("failed reading field file " + data.string());
    return field;
}

// Library files ---------------------------------------------------------------

namespace {

constexpr char block_magic[8] = {'T', 'R', 'B', 'L', 'O', 'C', 'K', '1'};

void write_exact(std::ofstream& os, const void* p, std::size_t bytes) {
    os.write(reinterpret_cast<const char*>(p), std::streamsize(bytes));
}

void read_exact(std::ifstream& is, void* p, std::size_t bytes,
                const std::filesystem::path& path) {
    is.read(reinterpret_cast<char*>(p), std::streamsize(bytes));
    if (!is) throw ValidationError("corrupt library block file " + path.string());
}

void save_block(const std::filesystem::path& path, const BlockRom& block) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot write library block file " + path.string());
    write_exact(os, block_magic, sizeof block_magic);
    const PodBasis& b = block.basis;
    const RomSystem& r = block.rom;
    const std::int64_t head[9] = {b.modes.rows(),
                                  b.modes.cols(),
                                  b.n_snapshots,
                                  b.spectrum.size(),
                                  b.domain ? 1 : 0,
                                  b.domain ? b.domain->i0 : 0,
                                  b.domain ? b.domain->j0 : 0,
                                  b.domain ? b.domain->nx : 0,
                                  b.domain ? b.domain->ny : 0};
    write_exact(os, head, sizeof head);
    write_exact(os, b.spectrum.data(), sizeof(double) * b.spectrum.size());
    write_exact(os, b.eigenvalues.data(), sizeof(double) * b.eigenvalues.size());
    write_exact(os, b.modes.data(), sizeof(double) * b.modes.size());
    write_exact(os, r.capacitance.data(), sizeof(double) * r.capacitance.size());
    write_exact(os, r.conductance.data(), sizeof(double) * r.conductance.size());
    write_exact(os, r.boundary_source.data(), sizeof(double) * r.boundary_source.size());
    write_exact(os, r.power_projection.data(), sizeof(double) * r.power_projection.size());
    if (!os) throw ValidationError("failed writing library block file " + path.string());
}

BlockRom load_block(const std::filesystem::path& path, const std::string& hsb_id) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open library block file " + path.string());
    char magic[8];
    read_exact(is, magic, sizeof magic, path);
    if (std::memcmp(magic, block_magic, sizeof magic) != 0)
        throw ValidationError("not a library block file: " + path.string());
    std::int64_t head[9];
    read_exact(is, head, sizeof head, path);
    const std::int64_t rows = head[0], modes = head[1];
    if (rows <= 0 || modes <= 0 || head[3] < modes)
        throw ValidationError("corrupt library block file " + path.string());

    BlockRom block;
    PodBasis& b = block.basis;
    b.hsb_id = hsb_id;
    b.n_snapshots = int(head[2]);
    b.spectrum.resize(head[3]);
    b.eigenvalues.resize(modes);
    b.modes.resize(rows, modes);
    if (head[4]) b.domain = DomainBox{int(head[5]), int(head[6]), int(head[7]), int(head[8])};
    read_exact(is, b.spectrum.data(), sizeof(double) * b.spectrum.size(), path);
    read_exact(is, b.eigenvalues.data(), sizeof(double) * b.eigenvalues.size(), path);
    read_exact(is, b.modes.data(), sizeof(double) * b.modes.size(), path);

    RomSystem& r = block.rom;
    r.hsb_id = hsb_id;
    r.capacitance.resize(modes, modes);
    r.conductance.resize(modes, modes);
    r.boundary_source.resize(modes);
    r.power_projection.resize(modes);
    read_exact(is, r.capacitance.data(), sizeof(double) * r.capacitance.size(), path);
    read_exact(is, r.conductance.data(), sizeof(double) * r.conductance.size(), path);
    read_exact(is, r.boundary_source.data(), sizeof(double) * r.boundary_source.size(), path);
    read_exact(is, r.power_projection.data(), sizeof(double) * r.power_projection.size(), path);
    return block;
}

std::string hash_hex(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

json grid_json(const Grid3D& g) {
    return json{{"nx", g.nx}, {"ny", g.ny},      {"nz", g.nz},
                {"dx", g.dx}, {"dy", g.dy},      {"dz", g.dz},
                {"origin", {g.origin[0], g.origin[1], g.origin[2]}}};
}

Grid3D grid_from_json(const json& j) {
    Grid3D g;
    g.nx = j.at("nx").get<int>();
    g.ny = j.at("ny").get<int>();
    g.nz = j.at("nz").get<int>();
    g.dx = j.at("dx").get<double>();
    g.dy = j.at("dy").get<double>();
    g.dz = j.at("dz").get<double>();
    const auto& o = j.at("origin");
    g.origin = {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()};
    return g;
}

json training_json(const TrainingConfig& cfg) {
    // jobs is runtime-only: it cannot change the trained result
    return json{{"n_steps", cfg.n_steps},
                {"hold_steps", cfg.hold_steps},
                {"p_max", cfg.p_max},
                {"seed", cfg.seed},
                {"time_step", cfg.time_step},
                {"sample_every", cfg.sample_every},
                {"max_modes", cfg.max_modes},
                {"linear_tolerance", cfg.linear_tolerance}};
}

std::string block_file_name(std::size_t index, const std::string& id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "block_%03zu_", index);
    std::string name = buf;
    for (char c : id) name += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return name + ".bin";
}

json read_manifest(const std::filesystem::path& dir) {
    const std::filesystem::path path = dir / "manifest.json";
    std::ifstream is(path);
    if (!is) throw ValidationError("no library manifest at " + path.string());
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ValidationError("unreadable library manifest " + path.string() + ": " + e.what());
    }
    return j;
}

void write_manifest(const std::filesystem::path& dir, const json& j) {
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / "manifest.json");
    if (!os) throw ValidationError("cannot write manifest in " + dir.string());
    os << j.dump(2) << '\n';
    if (!os) throw ValidationError("failed writing manifest in " + dir.string());
}

json ensemble_manifest(const Ensemble& ens, const HsbPartition& part, const TrainingConfig& cfg) {
    json blocks = json::array();
    for (std::size_t n = 0; n < part.size(); ++n)
        blocks.push_back({{"id", part.blocks[n].id},
                          {"file", block_file_name(n, part.blocks[n].id)},
                          {"area_fraction", part.area_fractions[n]}});
    return json{{"format", 1},
                {"kind", "ensemble"},
                {"partition_hash", hash_hex(ens.partition_hash)},
                {"ambient", ens.ambient},
                {"grid", grid_json(ens.grid)},
                {"training", training_json(cfg)},
                {"blocks", blocks}};
}

void check_manifest_matches(const json& have, const json& want, const std::filesystem::path& dir,
                            const char* expected_kind) {
    if (have.value("kind", "") != expected_kind)
        throw ValidationError("library at " + dir.string() + " is of kind '" +
                              have.value("kind", "?") + "', expected '" + expected_kind + "'");
    for (const char* key : {"format", "partition_hash", "grid", "training", "ambient"}) {
        if (!have.contains(key) || have.at(key) != want.at(key))
            throw ValidationError(
                "library at " + dir.string() +
                " was built from a different model, partition or training setup (mismatch at '" +
                key + "'); delete the directory or pass a different one");
    }
}

} // namespace

void save_ensemble_library(const std::filesystem::path& dir, const Ensemble& ens,
                           const HsbPartition& part, const TrainingConfig& cfg) {
    if (ens.blocks.empty()) throw ValidationError("refusing to save an empty library");
    if (part.hash() != ens.partition_hash)
        throw ValidationError("save: library does not belong to this partition");
    std::filesystem::create_directories(dir);
    for (std::size_t n = 0; n < ens.blocks.size(); ++n)
        save_block(dir / block_file_name(n, ens.blocks[n].basis.hsb_id), ens.blocks[n]);
    write_manifest(dir, ensemble_manifest(ens, part, cfg));
}

Ensemble load_ensemble_library(const std::filesystem::path& dir, const HsbPartition& part) {
    const json manifest = read_manifest(dir);
    if (manifest.value("kind", "") != "ensemble")
        throw ValidationError("library at " + dir.string() + " is not an ensemble library");
    if (manifest.value("partition_hash", "") != hash_hex(part.hash()))
        throw ValidationError("library at " + dir.string() +
                              " was trained for a different partition; retrain it for this model");

    Ensemble ens;
    ens.grid = grid_from_json(manifest.at("grid"));
    ens.ambient = manifest.at("ambient").get<double>();
    ens.partition_hash = part.hash();
    const json& blocks = manifest.at("blocks");
    if (blocks.size() != part.size())
        throw ValidationError("library at " + dir.string() + " has a different block count");
    for (std::size_t n = 0; n < part.size(); ++n) {
        const std::string id = blocks.at(n).at("id").get<std::string>();
        if (id != part.blocks[n].id)
            throw ValidationError("library block order mismatch at " + dir.string());
        ens.blocks.push_back(load_block(dir / blocks.at(n).at("file").get<std::string>(), id));
    }
    return ens;
}

Ensemble ensure_ensemble_library(const std::filesystem::path& dir, const ChipModel& model,
                                 const HsbPartition& part, const TrainingConfig& cfg) {
    cfg.validate();
    Ensemble ens;
    ens.grid = model.grid;
    ens.ambient = model.ambient();
    ens.partition_hash = part.hash();
    ens.blocks.resize(part.size());

    const json want = ensemble_manifest(ens, part, cfg);
    if (std::filesystem::exists(dir / "manifest.json")) {
        check_manifest_matches(read_manifest(dir), want, dir, "ensemble");
    } else {
        write_manifest(dir, want);
    }

    std::vector<std::size_t> missing;
    for (std::size_t n = 0; n < part.size(); ++n) {
        const std::filesystem::path file = dir / block_file_name(n, part.blocks[n].id);
        if (std::filesystem::exists(file))
            ens.blocks[n] = load_block(file, part.blocks[n].id);
        else
            missing.push_back(n);
    }
    if (!missing.empty()) {
        const ThermalOperator op = assemble_operator(model);
        parallel_for(missing.size(), cfg.jobs, [&](std::size_t m) {
            const std::size_t n = missing[m];
            ens.blocks[n] = train_ensemble_block(model, part, op, cfg, n);
            save_block(dir / block_file_name(n, part.blocks[n].id), ens.blocks[n]);
        });
    }
    return ens;
}

namespace {

json table_json(const ThermalLengthTable& table) {
    json entries = json::array();
    for (const ThermalLengthEntry& e : table.entries)
        entries.push_back({{"block_width", e.block_width},
                           {"aspect", e.aspect},
                           {"thickness", e.thickness},
                           {"lambda_th", e.lambda_th}});
    return json{{"decay_threshold", table.decay_threshold}, {"entries", entries}};
}

json local_manifest_base(const LocalEnsemble& ens, const HsbPartition& part,
                         const TrainingConfig& cfg, const ThermalLengthTable& table) {
    json classes = json::array();
    for (std::size_t c = 0; c < ens.classes.size(); ++c) {
        const GenericBlockClass& cls = ens.classes[c];
        json members = json::array();
        for (const MemberPlacement& m : cls.members) {
            const int n = part.index_of(m.hsb_id);
            if (n < 0) throw ValidationError("manifest: member is not a partition block");
            members.push_back({{"id", m.hsb_id},
                               {"di", m.di},
                               {"dj", m.dj},
                               {"area_fraction", part.area_fractions[n]}});
        }
        classes.push_back({{"class_id", cls.class_id},
                           {"file", block_file_name(c, cls.class_id)},
                           {"box", {cls.canonical.box.i0, cls.canonical.box.j0,
                                    cls.canonical.box.nx, cls.canonical.box.ny}},
                           {"clipped", {cls.canonical.clipped[0], cls.canonical.clipped[1],
                                        cls.canonical.clipped[2], cls.canonical.clipped[3]}},
                           {"members", members}});
    }
    return json{{"format", 1},
                {"kind", "local"},
                {"partition_hash", hash_hex(ens.partition_hash)},
                {"ambient", ens.ambient},
                {"grid", grid_json(ens.grid)},
                {"training", training_json(cfg)},
                {"truncation_multiple", ens.truncation_multiple},
                {"length_table", table_json(table)},
                {"classes", classes}};
}

} // namespace

void save_local_library(const std::filesystem::path& dir, const LocalEnsemble& ens,
                        const HsbPartition& part, const TrainingConfig& cfg,
                        const ThermalLengthTable& table) {
    if (ens.class_roms.empty()) throw ValidationError("refusing to save an empty library");
    if (part.hash() != ens.partition_hash)
        throw ValidationError("save: library does not belong to this partition");
    std::filesystem::create_directories(dir);
    for (std::size_t c = 0; c < ens.classes.size(); ++c)
        save_block(dir / block_file_name(c, ens.classes[c].class_id), ens.class_roms[c]);
    write_manifest(dir, local_manifest_base(ens, part, cfg, table));
}

LocalEnsemble load_local_library(const std::filesystem::path& dir, const HsbPartition& part) {
    const json manifest = read_manifest(dir);
    if (manifest.value("kind", "") != "local")
        throw ValidationError("library at " + dir.string() + " is not a local-ensemble library");
    if (manifest.value("partition_hash", "") != hash_hex(part.hash()))
        throw ValidationError("library at " + dir.string() +
                              " was trained for a different partition; retrain it for this model");

    LocalEnsemble ens;
    ens.grid = grid_from_json(manifest.at("grid"));
    ens.ambient = manifest.at("ambient").get<double>();
    ens.partition_hash = part.hash();
    ens.truncation_multiple = manifest.at("truncation_multiple").get<double>();
    ens.block_class.assign(part.size(), -1);
    ens.block_box.resize(part.size());

    for (const json& jc : manifest.at("classes")) {
        GenericBlockClass cls;
        cls.class_id = jc.at("class_id").get<std::string>();
        const json& box = jc.at("box");
        cls.canonical.box = {box.at(0).get<int>(), box.at(1).get<int>(), box.at(2).get<int>(),
                             box.at(3).get<int>()};
        const json& clipped = jc.at("clipped");
        for (int a = 0; a < 4; ++a) cls.canonical.clipped[a] = clipped.at(a).get<bool>();
        for (const json& jm : jc.at("members")) {
            MemberPlacement m{jm.at("id").get<std::string>(), jm.at("di").get<int>(),
                              jm.at("dj").get<int>()};
            const int n = part.index_of(m.hsb_id);
            if (n < 0)
                throw ValidationError("library member '" + m.hsb_id +
                                      "' is not a block of this partition");
            ens.block_class[n] = int(ens.classes.size());
            DomainBox b = cls.canonical.box;
            b.i0 += m.di;
            b.j0 += m.dj;
            ens.block_box[n] = b;
            cls.members.push_back(std::move(m));
        }
        cls.canonical.hsb_id = cls.members.front().hsb_id;
        ens.class_roms.push_back(
            load_block(dir / jc.at("file").get<std::string>(), cls.canonical.hsb_id));
        ens.classes.push_back(std::move(cls));
    }
    for (int c : ens.block_class)
        if (c < 0)
            throw ValidationError("library at " + dir.string() +
                                  " does not cover every partition block");
    return ens;
}

LocalEnsemble ensure_local_library(const std::filesystem::path& dir, const ChipModel& model,
                                   const HsbPartition& part, const ThermalLengthTable& table,
                                   const TrainingConfig& cfg, double multiple) {
    cfg.validate();
    LocalEnsemble ens;
    ens.grid = model.grid;
    ens.ambient = model.ambient();
    ens.partition_hash = part.hash();
    ens.truncation_multiple = multiple;
    ens.classes = classify_generic_blocks(model, part, table, multiple);
    ens.class_roms.resize(ens.classes.size());
    ens.block_class.assign(part.size(), -1);
    ens.block_box.resize(part.size());
    std::vector<std::size_t> canonical_index(ens.classes.size());
    for (std::size_t c = 0; c < ens.classes.size(); ++c) {
        const GenericBlockClass& cls = ens.classes[c];
        for (const MemberPlacement& m : cls.members) {
            const int n = part.index_of(m.hsb_id);
            ens.block_class[n] = int(c);
            DomainBox b = cls.canonical.box;
            b.i0 += m.di;
            b.j0 += m.dj;
            ens.block_box[n] = b;
        }
        canonical_index[c] = std::size_t(part.index_of(cls.members.front().hsb_id));
    }

    const json want = local_manifest_base(ens, part, cfg, table);
    if (std::filesystem::exists(dir / "manifest.json")) {
        const json have = read_manifest(dir);
        check_manifest_matches(have, want, dir, "local");
        if (have.at("classes") != want.at("classes") ||
            have.at("truncation_multiple") != want.at("truncation_multiple") ||
            have.at("length_table") != want.at("length_table"))
            throw ValidationError("library at " + dir.string() +
                                  " was built with a different truncation setup; delete the "
                                  "directory or pass a different one");
    } else {
        write_manifest(dir, want);
    }

    std::vector<std::size_t> missing;
    for (std::size_t c = 0; c < ens.classes.size(); ++c) {
        const std::filesystem::path file = dir / block_file_name(c, ens.classes[c].class_id);
        if (std::filesystem::exists(file))
            ens.class_roms[c] = load_block(file, ens.classes[c].canonical.hsb_id);
        else
            missing.push_back(c);
    }
    parallel_for(missing.size(), cfg.jobs, [&](std::size_t m) {
        const std::size_t c = missing[m];
        const std::size_t n = canonical_index[c];
        ens.class_roms[c] =
            train_truncated(model, part, n, ens.classes[c].canonical, cfg, cfg.seed + n);
        save_block(dir / block_file_name(c, ens.classes[c].class_id), ens.class_roms[c]);
    });
    return ens;
}

LibrarySpectrum library_spectrum(const std::filesystem::path& dir) {
    const json manifest = read_manifest(dir);
    const std::string kind = manifest.value("kind", "");
    std::vector<PodBasis> bases;
    std::vector<double> weights;
    if (kind == "ensemble") {
        for (const json& b : manifest.at("blocks")) {
            BlockRom block = load_block(dir / b.at("file").get<std::string>(),
                                        b.at("id").get<std::string>());
            bases.push_back(std::move(block.basis));
            weights.push_back(b.at("area_fraction").get<double>());
        }
    } else if (kind == "local") {
        for (const json& c : manifest.at("classes")) {
            BlockRom block = load_block(dir / c.at("file").get<std::string>(),
                                        c.at("class_id").get<std::string>());
            for (const json& m : c.at("members")) {
                bases.push_back(block.basis);  // members share their class spectrum
                weights.push_back(m.at("area_fraction").get<double>());
            }
        }
    } else {
        throw ValidationError("library at " + dir.string() + " has unknown kind '" + kind + "'");
    }
    LibrarySpectrum out;
    out.min_modes = bases.empty() ? 0 : bases.front().mode_count();
    std::vector<const PodBasis*> ptrs;
    int length = 0;
    for (const PodBasis& b : bases) {
        ptrs.push_back(&b);
        length = std::max(length, int(b.spectrum.size()));
        out.n_snapshots = std::max(out.n_snapshots, b.n_snapshots);
        out.min_modes = std::min(out.min_modes, b.mode_count());
    }
    out.equivalent = equivalent_spectrum(ptrs, weights, length);
    return out;
}

std::string library_kind(const std::filesystem::path& dir) {
    const json manifest = read_manifest(dir);
    const std::string kind = manifest.value("kind", "");
    if (kind != "ensemble" && kind != "local")
        throw ValidationError("library at " + dir.string() + " has unknown kind '" + kind + "'");
    return kind;
}

void write_length_table(const std::filesystem::path& path, const ThermalLengthTable& table) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write length table " + path.string());
    os << "# decay_threshold " << fmt(table.decay_threshold) << '\n';
    os << "block_width,aspect,thickness,lambda_th\n";
    for (const ThermalLengthEntry& e : table.entries)
        os << fmt(e.block_width) << ',' << fmt(e.aspect) << ',' << fmt(e.thickness) << ','
           << fmt(e.lambda_th) << '\n';
    if (!os) throw ValidationError("failed writing length table " + path.string());
}

ThermalLengthTable read_length_table(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open length table " + path.string());
    ThermalLengthTable table;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string s = strip(line);
        if (s.empty()) continue;
        if (s.front() == '#') {
            std::istringstream ss(s.substr(1));
            std::string key;
            double v;
            if (ss >> key >> v && key == "decay_threshold") table.decay_threshold = v;
            continue;
        }
        if (s.rfind("block_width", 0) == 0) continue;  // header row
        std::istringstream ss(s);
        ThermalLengthEntry e;
        char comma;
        if (!(ss >> e.block_width >> comma >> e.aspect >> comma >> e.thickness >> comma >>
              e.lambda_th))
            fail_at(path, lineno, "expected 'block_width,aspect,thickness,lambda_th'");
        table.entries.push_back(e);
    }
    if (table.entries.empty()) throw ValidationError("length table " + path.string() + " is empty");
    return table;
}

} // namespace thermrom
