#include "aniso/specio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aniso/errors.hpp"

namespace aniso {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw SchemaError(path + ": " + what);
}

void requireObject(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

void checkKeys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known) fail(path, "unknown key \"" + item.key() + "\"");
    }
}

const json* findKey(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

const json& getKey(const json& obj, const char* key, const std::string& path) {
    const json* p = findKey(obj, key);
    if (!p) fail(path, std::string("missing required key \"") + key + "\"");
    return *p;
}

long long asInt(const json& j, const std::string& path) {
    if (j.is_number_integer() || j.is_number_unsigned()) return j.get<long long>();
    fail(path, "expected an integer");
}

std::uint64_t asSeed(const json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer()) {
        long long v = j.get<long long>();
        if (v < 0) fail(path, "seed must be non-negative");
        return static_cast<std::uint64_t>(v);
    }
    fail(path, "expected an integer seed");
}

double asNumber(const json& j, const std::string& path) {
    if (j.is_number()) return j.get<double>();
    fail(path, "expected a number");
}

std::string asString(const json& j, const std::string& path) {
    if (j.is_string()) return j.get<std::string>();
    fail(path, "expected a string");
}

bool asBool(const json& j, const std::string& path) {
    if (j.is_boolean()) return j.get<bool>();
    fail(path, "expected a boolean");
}

Expr parseEntry(const std::string& text, int n, int m, const std::string& path) {
    try {
        return parseExpr(text, n, m);
    } catch (const ParseError& e) {
        fail(path, "bad expression \"" + text + "\": " + e.what());
    }
}

ExprGrid parseGrid2D(const json& j, int rows, int cols, int n, int m, const std::string& path) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows)
        fail(path, "expected an array of " + std::to_string(rows) + " rows");
    ExprGrid grid(rows);
    for (int r = 0; r < rows; ++r) {
        const json& row = j[r];
        std::string rpath = path + "[" + std::to_string(r) + "]";
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            fail(rpath, "expected an array of " + std::to_string(cols) + " entries");
        grid[r].resize(cols);
        for (int c = 0; c < cols; ++c) {
            std::string epath = rpath + "[" + std::to_string(c) + "]";
            grid[r][c] = parseEntry(asString(row[c], epath), n, m, epath);
        }
    }
    return grid;
}

std::vector<Expr> parseFlat(const json& j, std::size_t size, int n, int m, const std::string& path) {
    if (!j.is_array() || j.size() != size)
        fail(path, "expected an array of " + std::to_string(size) + " expression strings");
    std::vector<Expr> out(size);
    for (std::size_t k = 0; k < size; ++k) {
        std::string epath = path + "[" + std::to_string(k) + "]";
        out[k] = parseEntry(asString(j[k], epath), n, m, epath);
    }
    return out;
}

GeometrySpec parseGeometry(const json& j, const std::string& path) {
    requireObject(j, path);
    checkKeys(j, path, {"n", "m", "form", "g", "h", "N", "lagrangian", "G"});
    GeometrySpec spec;
    long long n = asInt(getKey(j, "n", path), path + ".n");
    long long m = asInt(getKey(j, "m", path), path + ".m");
    if (n < 1 || n > 8 || m < 1 || m > 8) fail(path, "dimensions must lie in 1..8");
    spec.shape = {static_cast<int>(n), static_cast<int>(m)};
    int ni = spec.shape.n, mi = spec.shape.m, d = spec.shape.d();

    std::string form = asString(getKey(j, "form", path), path + ".form");
    auto forbid = [&](const char* key) {
        if (findKey(j, key))
            fail(path, std::string("key \"") + key + "\" is not allowed for form \"" + form + "\"");
    };
    if (form == "blocks") {
        spec.form = MetricForm::Blocks;
        spec.g = parseGrid2D(getKey(j, "g", path), ni, ni, ni, mi, path + ".g");
        spec.h = parseGrid2D(getKey(j, "h", path), mi, mi, ni, mi, path + ".h");
        if (const json* N = findKey(j, "N"))
            spec.N = parseGrid2D(*N, ni, mi, ni, mi, path + ".N");
        forbid("lagrangian");
        forbid("G");
    } else if (form == "lagrangian") {
        spec.form = MetricForm::Lagrangian;
        std::string lpath = path + ".lagrangian";
        spec.lagrangian = parseEntry(asString(getKey(j, "lagrangian", path), lpath), ni, mi, lpath);
        if (const json* N = findKey(j, "N"))
            spec.N = parseGrid2D(*N, ni, mi, ni, mi, path + ".N");
        forbid("g");
        forbid("h");
        forbid("G");
    } else if (form == "full_metric") {
        spec.form = MetricForm::FullMetric;
        spec.G = parseGrid2D(getKey(j, "G", path), d, d, ni, mi, path + ".G");
        forbid("g");
        forbid("h");
        forbid("N");
        forbid("lagrangian");
    } else {
        fail(path + ".form", "expected \"blocks\", \"lagrangian\" or \"full_metric\"");
    }
    if (spec.N.empty() && spec.form != MetricForm::FullMetric) {
        spec.N.assign(ni, std::vector<Expr>(mi));
        for (int i = 0; i < ni; ++i)
            for (int a = 0; a < mi; ++a) spec.N[i][a] = exprConst(0.0, ni, mi);
    }
    return spec;
}

ConnSection parseConnection(const json& j, const Shape& shape, const std::string& path) {
    requireObject(j, path);
    checkKeys(j, path, {"kind", "Lh", "Lv", "Ch", "Cv"});
    ConnSection conn;
    conn.kind = kindFromName(asString(getKey(j, "kind", path), path + ".kind"));
    int n = shape.n, m = shape.m;
    if (conn.kind == ConnKind::Custom) {
        std::size_t n3 = static_cast<std::size_t>(n) * n * n;
        std::size_t m2n = static_cast<std::size_t>(m) * m * n;
        std::size_t n2m = static_cast<std::size_t>(n) * n * m;
        std::size_t m3 = static_cast<std::size_t>(m) * m * m;
        conn.grids.Lh = parseFlat(getKey(j, "Lh", path), n3, n, m, path + ".Lh");
        conn.grids.Lv = parseFlat(getKey(j, "Lv", path), m2n, n, m, path + ".Lv");
        conn.grids.Ch = parseFlat(getKey(j, "Ch", path), n2m, n, m, path + ".Ch");
        conn.grids.Cv = parseFlat(getKey(j, "Cv", path), m3, n, m, path + ".Cv");
    } else {
        for (const char* key : {"Lh", "Lv", "Ch", "Cv"})
            if (findKey(j, key))
                fail(path, std::string("key \"") + key + "\" requires kind \"custom\"");
    }
    return conn;
}

MatterField parseField(const json& j, const Shape& shape, bool* checked, const std::string& path) {
    requireObject(j, path);
    checkKeys(j, path, {"kind", "mass", "components", "check"});
    MatterField f;
    std::string kind = asString(getKey(j, "kind", path), path + ".kind");
    if (kind == "scalar")
        f.kind = FieldKind::Scalar;
    else if (kind == "covector")
        f.kind = FieldKind::Covector;
    else
        fail(path + ".kind", "expected \"scalar\" or \"covector\"");
    f.mass = asNumber(getKey(j, "mass", path), path + ".mass");
    if (!(f.mass >= 0.0)) fail(path + ".mass", "mass must be non-negative");
    const json& comps = getKey(j, "components", path);
    if (!comps.is_array() || comps.empty())
        fail(path + ".components", "expected a non-empty array of expression strings");
    std::size_t count = comps.size();
    if (f.kind == FieldKind::Covector && count % static_cast<std::size_t>(shape.d()) != 0)
        fail(path + ".components",
             "covector component count must be a multiple of " + std::to_string(shape.d()));
    f.components = parseFlat(comps, count, shape.n, shape.m, path + ".components");
    *checked = false;
    if (const json* c = findKey(j, "check")) *checked = asBool(*c, path + ".check");
    return f;
}

NamapSection parseNamap(const json& j, const Shape& shape, const std::string& path) {
    requireObject(j, path);
    checkKeys(j, path,
              {"class", "P", "Q", "K", "psi", "b", "a", "sigma", "F", "phi", "q", "sigma_sym",
               "nu", "mu"});
    NamapSection sec;
    sec.present = true;
    long long cls = asInt(getKey(j, "class", path), path + ".class");
    if (cls < 0 || cls > 3) fail(path + ".class", "class must be 0, 1, 2 or 3");
    sec.cls = static_cast<int>(cls);
    int n = shape.n, m = shape.m;
    std::size_t d = static_cast<std::size_t>(shape.d());
    sec.data.n = n;
    sec.data.m = m;
    auto grab = [&](const char* key, std::vector<Expr>* dst, std::size_t size) {
        if (const json* g = findKey(j, key)) *dst = parseFlat(*g, size, n, m, path + "." + key);
    };
    grab("P", &sec.data.P, d * d * d);
    grab("Q", &sec.data.Q, d * d * d);
    grab("K", &sec.data.K, d * d * d);
    grab("psi", &sec.data.psi, d);
    grab("b", &sec.data.b, d);
    grab("a", &sec.data.a, d * d);
    grab("sigma", &sec.data.sigma, d);
    grab("F", &sec.data.F, d * d);
    grab("phi", &sec.data.phi, d);
    grab("q", &sec.data.q, d);
    grab("sigma_sym", &sec.data.sigmaSym, d * d);
    grab("mu", &sec.data.mu, d);
    if (const json* nu = findKey(j, "nu")) {
        if (sec.cls == 2)
            sec.data.nu = parseFlat(*nu, d, n, m, path + ".nu");
        else if (sec.cls == 3)
            sec.data.nu = parseFlat(*nu, 1, n, m, path + ".nu");
        else
            fail(path + ".nu", "nu is only meaningful for classes 2 and 3");
    }
    return sec;
}

RunSection parseRun(const json& j, const Shape& shape, const std::string& path) {
    requireObject(j, path);
    checkKeys(j, path, {"points", "count", "box", "seed", "tolerance"});
    RunSection run;
    if (const json* pts = findKey(j, "points")) {
        if (findKey(j, "count") || findKey(j, "box"))
            fail(path, "explicit points exclude \"count\" and \"box\"");
        if (!pts->is_array() || pts->empty())
            fail(path + ".points", "expected a non-empty array of points");
        for (std::size_t k = 0; k < pts->size(); ++k) {
            const json& pt = (*pts)[k];
            std::string ppath = path + ".points[" + std::to_string(k) + "]";
            if (!pt.is_array() || static_cast<int>(pt.size()) != shape.d())
                fail(ppath, "expected " + std::to_string(shape.d()) + " coordinates");
            Point p(shape.d());
            for (int c = 0; c < shape.d(); ++c)
                p[c] = asNumber(pt[c], ppath + "[" + std::to_string(c) + "]");
            run.points.push_back(std::move(p));
        }
    } else {
        if (const json* c = findKey(j, "count")) {
            long long v = asInt(*c, path + ".count");
            if (v < 1 || v > 1000) fail(path + ".count", "count must lie in 1..1000");
            run.count = static_cast<int>(v);
        }
        if (const json* b = findKey(j, "box")) {
            if (!b->is_array() || b->size() != 2)
                fail(path + ".box", "expected [low, high]");
            run.lo = asNumber((*b)[0], path + ".box[0]");
            run.hi = asNumber((*b)[1], path + ".box[1]");
            if (!(run.lo < run.hi)) fail(path + ".box", "low bound must be below high bound");
        }
    }
    if (const json* s = findKey(j, "seed")) run.seed = asSeed(*s, path + ".seed");
    if (const json* t = findKey(j, "tolerance")) {
        run.tolerance = asNumber(*t, path + ".tolerance");
        if (!(run.tolerance > 0.0)) fail(path + ".tolerance", "tolerance must be positive");
    }
    return run;
}

} // namespace

SpecFile parseSpec(const std::string& jsonText) {
    json j = json::parse(jsonText, nullptr, false);
    if (j.is_discarded()) throw SchemaError("top level: not valid JSON");
    requireObject(j, "top level");
    checkKeys(j, "top level",
              {"version", "geometry", "geometry_underlined", "connection", "fields", "namap",
               "run"});
    SpecFile spec;
    long long version = asInt(getKey(j, "version", "top level"), "version");
    if (version != kSpecVersion)
        fail("version", "unsupported version " + std::to_string(version) + " (expected " +
                            std::to_string(kSpecVersion) + ")");
    spec.version = static_cast<int>(version);
    spec.geometry = parseGeometry(getKey(j, "geometry", "top level"), "geometry");
    const Shape shape = spec.geometry.shape;
    if (const json* u = findKey(j, "geometry_underlined")) {
        spec.hasUnderlined = true;
        spec.underlined = parseGeometry(*u, "geometry_underlined");
        if (!(spec.underlined.shape == shape))
            fail("geometry_underlined", "dimensions must match the main geometry");
    }
    if (const json* c = findKey(j, "connection"))
        spec.connection = parseConnection(*c, shape, "connection");
    if (const json* f = findKey(j, "fields")) {
        if (!f->is_array()) fail("fields", "expected an array");
        for (std::size_t k = 0; k < f->size(); ++k) {
            bool checked = false;
            spec.fields.push_back(
                parseField((*f)[k], shape, &checked, "fields[" + std::to_string(k) + "]"));
            spec.fieldChecked.push_back(checked);
        }
    }
    if (const json* nm = findKey(j, "namap")) spec.namap = parseNamap(*nm, shape, "namap");
    if (const json* r = findKey(j, "run")) spec.run = parseRun(*r, shape, "run");
    return spec;
}

SpecFile loadSpec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot read job file \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parseSpec(buf.str());
}

std::string kindName(ConnKind kind) {
    switch (kind) {
        case ConnKind::Berwald: return "berwald";
        case ConnKind::Canonical: return "canonical";
        case ConnKind::ChristoffelD: return "christoffel";
        case ConnKind::Custom: return "custom";
    }
    return "?";
}

ConnKind kindFromName(const std::string& name) {
    if (name == "berwald") return ConnKind::Berwald;
    if (name == "canonical") return ConnKind::Canonical;
    if (name == "christoffel") return ConnKind::ChristoffelD;
    if (name == "custom") return ConnKind::Custom;
    throw SchemaError("connection kind: expected \"berwald\", \"canonical\", \"christoffel\" or "
                      "\"custom\", got \"" +
                      name + "\"");
}

std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void escapeTo(const std::string& s, std::string& out) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
}

bool isScalar(const ordered_json& j) {
    return !j.is_object() && !j.is_array();
}

void scalarJson(const ordered_json& j, std::string& out) {
    if (j.is_string()) {
        escapeTo(j.get<std::string>(), out);
    } else if (j.is_boolean()) {
        out += j.get<bool>() ? "true" : "false";
    } else if (j.is_number_float()) {
        double v = j.get<double>();
        if (std::isfinite(v)) {
            out += fmt17(v);
        } else {
            escapeTo(fmt17(v), out);  // keep the document parseable
        }
    } else if (j.is_number_unsigned()) {
        out += std::to_string(j.get<std::uint64_t>());
    } else if (j.is_number_integer()) {
        out += std::to_string(j.get<long long>());
    } else {
        out += "null";
    }
}

void renderJsonNode(const ordered_json& j, int indent, std::string& out) {
    const std::string pad(indent, ' ');
    const std::string padIn(indent + 2, ' ');
    if (j.is_object()) {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (const auto& item : j.items()) {
            if (!first) out += ",\n";
            first = false;
            out += padIn;
            escapeTo(item.key(), out);
            out += ": ";
            renderJsonNode(item.value(), indent + 2, out);
        }
        out += "\n" + pad + "}";
    } else if (j.is_array()) {
        if (j.empty()) {
            out += "[]";
            return;
        }
        bool simple = true;
        for (const auto& e : j)
            if (!isScalar(e)) {
                simple = false;
                break;
            }
        if (simple) {
            out += "[";
            for (std::size_t k = 0; k < j.size(); ++k) {
                if (k) out += ", ";
                scalarJson(j[k], out);
            }
            out += "]";
        } else {
            out += "[\n";
            for (std::size_t k = 0; k < j.size(); ++k) {
                if (k) out += ",\n";
                out += padIn;
                renderJsonNode(j[k], indent + 2, out);
            }
            out += "\n" + pad + "]";
        }
    } else {
        scalarJson(j, out);
    }
}

std::string scalarText(const ordered_json& j) {
    if (j.is_string()) return j.get<std::string>();
    std::string s;
    scalarJson(j, s);
    return s;
}

void renderTextNode(const ordered_json& j, int indent, std::string& out) {
    const std::string pad(indent, ' ');
    if (j.is_object()) {
        for (const auto& item : j.items()) {
            const ordered_json& v = item.value();
            if (isScalar(v)) {
                out += pad + item.key() + ": " + scalarText(v) + "\n";
            } else if (v.is_array() && [&v] {
                           for (const auto& e : v)
                               if (!isScalar(e)) return false;
                           return true;
                       }()) {
                out += pad + item.key() + ": [";
                for (std::size_t k = 0; k < v.size(); ++k) {
                    if (k) out += ", ";
                    out += scalarText(v[k]);
                }
                out += "]\n";
            } else {
                out += pad + item.key() + ":\n";
                renderTextNode(v, indent + 2, out);
            }
        }
    } else if (j.is_array()) {
        for (std::size_t k = 0; k < j.size(); ++k) {
            const ordered_json& v = j[k];
            if (isScalar(v)) {
                out += pad + "[" + std::to_string(k) + "]: " + scalarText(v) + "\n";
            } else if (v.is_array() && [&v] {
                           for (const auto& e : v)
                               if (!isScalar(e)) return false;
                           return true;
                       }()) {
                out += pad + "[" + std::to_string(k) + "]: [";
                for (std::size_t c = 0; c < v.size(); ++c) {
                    if (c) out += ", ";
                    out += scalarText(v[c]);
                }
                out += "]\n";
            } else {
                out += pad + "[" + std::to_string(k) + "]:\n";
                renderTextNode(v, indent + 2, out);
            }
        }
    } else {
        out += pad + scalarText(j) + "\n";
    }
}

} // namespace

std::string renderJsonReport(const ordered_json& report) {
    std::string out;
    renderJsonNode(report, 0, out);
    out += "\n";
    return out;
}

std::string renderTextReport(const ordered_json& report) {
    std::string out;
    renderTextNode(report, 0, out);
    return out;
}

std::size_t countNonFinite(const ordered_json& node) {
    if (node.is_number_float()) return std::isfinite(node.get<double>()) ? 0 : 1;
    std::size_t total = 0;
    if (node.is_object() || node.is_array())
        for (const auto& child : node) total += countNonFinite(child);
    return total;
}

} // namespace aniso
