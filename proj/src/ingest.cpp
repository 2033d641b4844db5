#include "riskgrid/ingest.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace riskgrid {

namespace {

bool parse_double(std::string_view s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

bool parse_i64(std::string_view s, std::int64_t& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

template <typename RecordFn>
ParseStats parse_lines(const std::string& path, RecordFn&& per_line) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    ParseStats stats;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view sv = strip_cr(line);
        if (sv.empty()) continue;
        if (per_line(sv))
            ++stats.parsed;
        else
            ++stats.malformed;
    }
    if (stats.malformed * 2 > stats.parsed + stats.malformed)
        throw IngestError("corrupt input: " + path + " (" + std::to_string(stats.malformed) +
                          " malformed of " + std::to_string(stats.parsed + stats.malformed) +
                          " lines)");
    return stats;
}

}  // namespace

ParseStats parse_gps(const std::string& path, const std::function<void(const GpsPoint&)>& sink) {
    return parse_lines(path, [&](std::string_view sv) {
        auto f = split_csv(sv);
        if (f.size() != 4) return false;
        GpsPoint p;
        p.taxi_id.assign(f[0].begin(), f[0].end());
        if (p.taxi_id.empty()) return false;
        if (!parse_i64(f[1], p.timestamp) || p.timestamp < 0) return false;
        if (!parse_double(f[2], p.lat) || !parse_double(f[3], p.lon)) return false;
        sink(p);
        return true;
    });
}

ParseStats parse_poi(const std::string& path, int n_categories,
                     const std::function<void(const PoiRecord&)>& sink) {
    return parse_lines(path, [&](std::string_view sv) {
        auto f = split_csv(sv);
        if (f.size() != 3) return false;
        PoiRecord p;
        std::int64_t cat = 0;
        if (!parse_double(f[0], p.lat) || !parse_double(f[1], p.lon)) return false;
        if (!parse_i64(f[2], cat) || cat < 0 || cat >= n_categories) return false;
        p.category = static_cast<int>(cat);
        sink(p);
        return true;
    });
}

ParseStats parse_accidents(const std::string& path,
                           const std::function<void(const AccidentRecord&)>& sink) {
    return parse_lines(path, [&](std::string_view sv) {
        auto f = split_csv(sv);
        if (f.size() != 3 && f.size() != 4) return false;
        AccidentRecord a;
        if (!parse_double(f[0], a.lat) || !parse_double(f[1], a.lon)) return false;
        if (!parse_i64(f[2], a.timestamp)) return false;
        if (f.size() == 4) {
            if (!parse_double(f[3], a.severity) || !(a.severity > 0.0)) return false;
        } else {
            a.severity = 1.0;
        }
        sink(a);
        return true;
    });
}

std::vector<GpsPoint> read_gps(const std::string& path, ParseStats* stats) {
    std::vector<GpsPoint> out;
    ParseStats s = parse_gps(path, [&](const GpsPoint& p) { out.push_back(p); });
    if (stats) *stats = s;
    return out;
}

std::vector<PoiRecord> read_poi(const std::string& path, int n_categories, ParseStats* stats) {
    std::vector<PoiRecord> out;
    ParseStats s = parse_poi(path, n_categories, [&](const PoiRecord& p) { out.push_back(p); });
    if (stats) *stats = s;
    return out;
}

std::vector<AccidentRecord> read_accidents(const std::string& path, ParseStats* stats) {
    std::vector<AccidentRecord> out;
    ParseStats s = parse_accidents(path, [&](const AccidentRecord& a) { out.push_back(a); });
    if (stats) *stats = s;
    return out;
}

// ---------------------------------------------------------------------------
// OSM XML subset parser
// ---------------------------------------------------------------------------

namespace {

struct XmlTag {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attrs;
    bool closing = false;       // </name>
    bool self_closing = false;  // <name ... />
};

class XmlScanner {
public:
    XmlScanner(std::string text, std::string path)
        : text_(std::move(text)), path_(std::move(path)) {}

    // Next element tag, skipping text, comments, and processing instructions.
    std::optional<XmlTag> next() {
        while (pos_ < text_.size()) {
            char c = advance();
            if (c != '<') continue;
            if (peek_is("!--")) {
                skip_until("-->");
                continue;
            }
            if (pos_ < text_.size() && (text_[pos_] == '?' || text_[pos_] == '!')) {
                skip_until(">");
                continue;
            }
            return read_tag();
        }
        return std::nullopt;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw IngestError(path_ + ":" + std::to_string(line_) + ": XML error: " + what);
    }

    int line() const { return line_; }

private:
    char advance() {
        char c = text_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }

    bool peek_is(std::string_view s) const { return text_.compare(pos_, s.size(), s) == 0; }

    void skip_until(std::string_view end) {
        size_t found = text_.find(end, pos_);
        if (found == std::string::npos) fail("unterminated markup");
        for (size_t i = pos_; i < found + end.size(); ++i)
            if (text_[i] == '\n') ++line_;
        pos_ = found + end.size();
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            advance();
    }

    XmlTag read_tag() {
        XmlTag tag;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '/') {
            tag.closing = true;
            advance();
        }
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
                text_[pos_] == ':' || text_[pos_] == '-'))
            tag.name.push_back(advance());
        if (tag.name.empty()) fail("expected element name");

        while (true) {
            skip_ws();
            if (pos_ >= text_.size()) fail("unexpected end of file inside tag");
            if (text_[pos_] == '>') {
                advance();
                return tag;
            }
            if (text_[pos_] == '/') {
                advance();
                skip_ws();
                if (pos_ >= text_.size() || text_[pos_] != '>') fail("malformed self-closing tag");
                advance();
                tag.self_closing = true;
                return tag;
            }
            if (tag.closing) fail("attributes on closing tag");
            // attribute
            std::string key;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
                    text_[pos_] == ':' || text_[pos_] == '-'))
                key.push_back(advance());
            if (key.empty()) fail("expected attribute name");
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != '=') fail("expected '=' after attribute");
            advance();
            skip_ws();
            if (pos_ >= text_.size() || (text_[pos_] != '"' && text_[pos_] != '\''))
                fail("expected quoted attribute value");
            char quote = advance();
            std::string value;
            while (pos_ < text_.size() && text_[pos_] != quote) value.push_back(advance());
            if (pos_ >= text_.size()) fail("unterminated attribute value");
            advance();
            tag.attrs.emplace_back(std::move(key), std::move(value));
        }
    }

    std::string text_;
    std::string path_;
    size_t pos_ = 0;
    int line_ = 1;
};

const std::string* find_attr(const XmlTag& tag, std::string_view key) {
    for (const auto& [k, v] : tag.attrs)
        if (k == key) return &v;
    return nullptr;
}

}  // namespace

OsmGraph parse_osm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    XmlScanner scanner(buf.str(), path);

    OsmGraph graph;
    std::vector<std::pair<std::int64_t, OsmWay>> pending_ways;

    std::optional<XmlTag> tag;
    int skip_depth = 0;  // inside an unrecognized element
    std::optional<OsmWay> current_way;
    std::int64_t current_way_id = 0;
    bool way_ok = false;

    while ((tag = scanner.next())) {
        if (skip_depth > 0) {
            if (tag->closing)
                --skip_depth;
            else if (!tag->self_closing)
                ++skip_depth;
            continue;
        }
        if (tag->closing) {
            if (tag->name == "way" && current_way) {
                if (way_ok)
                    pending_ways.emplace_back(current_way_id, std::move(*current_way));
                else
                    ++graph.dropped_ways;
                current_way.reset();
            }
            continue;
        }
        if (tag->name == "node") {
            const std::string* id = find_attr(*tag, "id");
            const std::string* lat = find_attr(*tag, "lat");
            const std::string* lon = find_attr(*tag, "lon");
            std::int64_t nid = 0;
            double la = 0.0, lo = 0.0;
            if (id && lat && lon && parse_i64(*id, nid) && parse_double(*lat, la) &&
                parse_double(*lon, lo))
                graph.nodes[nid] = {la, lo};
            if (!tag->self_closing) ++skip_depth;  // ignore children of <node>
        } else if (tag->name == "way") {
            if (current_way) scanner.fail("nested <way>");
            const std::string* id = find_attr(*tag, "id");
            way_ok = id && parse_i64(*id, current_way_id);
            if (tag->self_closing)
                ++graph.dropped_ways;  // a way without nodes
            else
                current_way.emplace();
        } else if (tag->name == "nd" && current_way) {
            const std::string* ref = find_attr(*tag, "ref");
            std::int64_t r = 0;
            if (ref && parse_i64(*ref, r))
                current_way->node_refs.push_back(r);
            else
                way_ok = false;
            if (!tag->self_closing) ++skip_depth;
        } else if (tag->name == "tag" && current_way) {
            const std::string* k = find_attr(*tag, "k");
            const std::string* v = find_attr(*tag, "v");
            if (k && v && *k == "highway") current_way->highway = *v;
            if (!tag->self_closing) ++skip_depth;
        } else if (tag->name == "osm") {
            // the document root wraps everything we care about
        } else {
            // relations and anything else are ignored wholesale
            if (!tag->self_closing) ++skip_depth;
        }
    }
    if (current_way) scanner.fail("unterminated <way>");

    for (auto& [id, way] : pending_ways) {
        bool resolvable = way.node_refs.size() >= 2;
        for (std::int64_t ref : way.node_refs)
            if (!graph.nodes.count(ref)) {
                resolvable = false;
                break;
            }
        if (resolvable)
            graph.ways.emplace(id, std::move(way));
        else
            ++graph.dropped_ways;
    }
    return graph;
}

// ---------------------------------------------------------------------------
// Tiles and externally computed image vectors
// ---------------------------------------------------------------------------

std::unordered_map<std::int64_t, ImageTile> load_tiles(const std::string& dir,
                                                       const RegionGrid& grid, int min_size,
                                                       TileLoadStats* stats) {
    namespace fs = std::filesystem;
    TileLoadStats local;
    std::unordered_map<std::int64_t, ImageTile> tiles;
    if (!fs::is_directory(dir)) throw IngestError("tile directory missing: " + dir);

    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());

    for (const auto& p : entries) {
        std::string stem = p.stem().string();
        size_t sep = stem.find('_');
        std::int64_t row = 0, col = 0;
        if (sep == std::string::npos || !parse_i64(stem.substr(0, sep), row) ||
            !parse_i64(stem.substr(sep + 1), col)) {
            ++local.skipped;
            continue;
        }
        CellId id{static_cast<int>(row), static_cast<int>(col)};
        if (!grid.contains(id)) {
            ++local.skipped;
            continue;
        }
        try {
            GrayImage img = read_png_gray(p.string());
            if (img.height < min_size || img.width < min_size) {
                ++local.skipped;
                continue;
            }
            tiles.emplace(grid.linear(id), ImageTile{id, std::move(img)});
            ++local.loaded;
        } catch (const ImageError&) {
            ++local.skipped;
        }
    }
    if (stats) *stats = local;
    return tiles;
}

CnnVectors load_cnn_vectors(const std::string& path, const RegionGrid& grid, int dim) {
    CnnVectors out = zero_cnn_vectors(grid, dim);
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = strip_cr(line);
        if (sv.empty()) continue;
        auto f = split_csv(sv);
        if (static_cast<int>(f.size()) != dim + 2)
            throw IngestError(path + ":" + std::to_string(lineno) +
                              ": dimension mismatch (expected " + std::to_string(dim) +
                              " values)");
        std::int64_t row = 0, col = 0;
        if (!parse_i64(f[0], row) || !parse_i64(f[1], col))
            throw IngestError(path + ":" + std::to_string(lineno) + ": bad cell index");
        CellId id{static_cast<int>(row), static_cast<int>(col)};
        if (!grid.contains(id)) continue;
        std::vector<double> v(dim);
        for (int i = 0; i < dim; ++i)
            if (!parse_double(f[i + 2], v[i]))
                throw IngestError(path + ":" + std::to_string(lineno) + ": bad value");
        std::int64_t lin = grid.linear(id);
        out.values[lin] = std::move(v);
        out.present[lin] = true;
    }
    return out;
}

CnnVectors zero_cnn_vectors(const RegionGrid& grid, int dim) {
    CnnVectors out;
    out.dim = dim;
    out.values.assign(grid.n_cells(), std::vector<double>(dim, 0.0));
    out.present.assign(grid.n_cells(), false);
    return out;
}

}  // namespace riskgrid
