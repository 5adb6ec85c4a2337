// SPDX-License-Identifier: Apache-2.0
#include "cxrfuse/dataset.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "cxrfuse/errors.hpp"

namespace cxrfuse {

DataFormat data_format_from_name(const std::string& name) {
    if (name == "jsonl") return DataFormat::Jsonl;
    if (name == "csv") return DataFormat::Csv;
    throw ConfigError("unknown format '" + name + "' (expected jsonl or csv)");
}

std::string read_text(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + file.string());
    out << text;
    if (!out) throw DataError("write failed for " + file.string());
}

std::vector<nlohmann::json> read_jsonl(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot read " + file.string());
    std::vector<nlohmann::json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            rows.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

void write_jsonl(const fs::path& file, const std::vector<nlohmann::json>& rows) {
    std::string text;
    for (const auto& r : rows) {
        text += r.dump();
        text += '\n';
    }
    write_text(file, text);
}

nlohmann::json read_json(const fs::path& file) {
    const std::string text = read_text(file);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(file.string() + ": " + e.what());
    }
}

void write_json(const fs::path& file, const nlohmann::json& j) { write_text(file, j.dump(2) + "\n"); }

// CSV ------------------------------------------------------------------------

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (quoted) throw DataError("unterminated quoted CSV field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

namespace {

const std::array<const char*, 14> kRawColumns = {"sample_id", "acuity",      "o2sat",      "heart_rate",
                                                 "resp_rate", "sbp",         "dbp",        "temperature_celsius",
                                                 "gender",    "ethnicity",   "chief_complaint", "icd_title",
                                                 "report",    "image_ref"};

std::string number(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw DataError("cannot format number");
    return std::string(buf, end);
}

double parse_number(const std::string& s, const std::string& column, std::size_t line) {
    double x = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && *b == ' ') ++b;
    auto [ptr, ec] = std::from_chars(b, e, x);
    if (ec != std::errc{} || ptr != e) {
        throw DataError("CSV line " + std::to_string(line) + ": column '" + column + "' is not a number: '" + s + "'");
    }
    return x;
}

}  // namespace

void write_raw_records(const fs::path& file, const std::vector<RawRecord>& records, DataFormat format) {
    if (format == DataFormat::Jsonl) {
        std::vector<nlohmann::json> rows;
        rows.reserve(records.size());
        for (const auto& r : records) rows.push_back(raw_to_json(r));
        write_jsonl(file, rows);
        return;
    }
    std::string text;
    for (std::size_t c = 0; c < kRawColumns.size(); ++c) {
        if (c) text += ',';
        text += kRawColumns[c];
    }
    text += '\n';
    for (const auto& r : records) {
        const std::array<std::string, 14> f = {r.sample_id,      number(r.acuity),  number(r.o2sat),
                                               number(r.heart_rate), number(r.resp_rate), number(r.sbp),
                                               number(r.dbp),    number(r.temperature_celsius), r.gender,
                                               r.ethnicity,      r.chief_complaint, r.icd_title,
                                               r.report,         r.image_ref};
        for (std::size_t c = 0; c < f.size(); ++c) {
            if (c) text += ',';
            text += csv_field(f[c]);
        }
        text += '\n';
    }
    write_text(file, text);
}

std::vector<RawRecord> read_raw_records(const fs::path& file) {
    std::vector<RawRecord> records;
    if (file.extension() == ".csv") {
        const auto rows = parse_csv(read_text(file));
        if (rows.empty()) return records;
        std::map<std::string, std::size_t> col;
        for (std::size_t c = 0; c < rows[0].size(); ++c) col[rows[0][c]] = c;
        for (const char* name : kRawColumns) {
            if (std::string(name) == "image_ref") continue;
            if (!col.count(name)) throw DataError(file.string() + ": missing CSV column '" + name + "'");
        }
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& row = rows[i];
            auto get = [&](const char* name) -> std::string {
                auto it = col.find(name);
                if (it == col.end()) return {};
                if (it->second >= row.size()) throw DataError("CSV line " + std::to_string(i + 1) + " is short");
                return row[it->second];
            };
            auto num = [&](const char* name) { return parse_number(get(name), name, i + 1); };
            RawRecord r;
            r.sample_id = get("sample_id");
            r.acuity = num("acuity");
            r.o2sat = num("o2sat");
            r.heart_rate = num("heart_rate");
            r.resp_rate = num("resp_rate");
            r.sbp = num("sbp");
            r.dbp = num("dbp");
            r.temperature_celsius = num("temperature_celsius");
            r.gender = get("gender");
            r.ethnicity = get("ethnicity");
            r.chief_complaint = get("chief_complaint");
            r.icd_title = get("icd_title");
            r.report = get("report");
            r.image_ref = get("image_ref");
            if (r.image_ref.empty()) r.image_ref = r.sample_id;
            records.push_back(std::move(r));
        }
    } else {
        for (const auto& j : read_jsonl(file)) records.push_back(raw_from_json(j));
    }
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.sample_id).second) throw DataError("duplicate sample_id '" + r.sample_id + "'");
    }
    return records;
}

void write_image_features(const fs::path& file, const ImageTable& images) {
    std::vector<nlohmann::json> rows;
    rows.reserve(images.size());
    for (const auto& [id, f] : images) rows.push_back({{"sample_id", id}, {"features", f}});
    write_jsonl(file, rows);
}

ImageTable read_image_features(const fs::path& file) {
    ImageTable t;
    for (const auto& j : read_jsonl(file)) {
        try {
            t[j.at("sample_id").get<std::string>()] = j.at("features").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(file.string() + ": malformed image feature row: " + e.what());
        }
    }
    return t;
}

void write_planted(const fs::path& file, const std::map<std::string, std::vector<PlantedSpan>>& planted) {
    std::vector<nlohmann::json> rows;
    for (const auto& [id, spans] : planted) {
        nlohmann::json js = nlohmann::json::array();
        for (const auto& s : spans) js.push_back({{"slot", s.slot}, {"offset", s.offset}, {"tokens", s.tokens}});
        rows.push_back({{"sample_id", id}, {"spans", js}});
    }
    write_jsonl(file, rows);
}

std::map<std::string, std::vector<PlantedSpan>> read_planted(const fs::path& file) {
    std::map<std::string, std::vector<PlantedSpan>> out;
    for (const auto& j : read_jsonl(file)) {
        std::vector<PlantedSpan> spans;
        for (const auto& s : j.at("spans")) {
            spans.push_back({s.at("slot").get<std::string>(), s.at("offset").get<std::size_t>(),
                             s.at("tokens").get<std::vector<std::string>>()});
        }
        out[j.at("sample_id").get<std::string>()] = std::move(spans);
    }
    return out;
}

nlohmann::json patient_to_json(const PatientRecord& r, const std::string& image_ref) {
    nlohmann::json scalars = nlohmann::json::object();
    const auto a = r.scalars.as_array();
    for (std::size_t i = 0; i < kScalarCount; ++i) scalars[kScalarNames[i]] = a[i];
    return {{"sample_id", r.sample_id},   {"split", r.split},         {"scalars", scalars},
            {"ethnicity", r.ethnicity},   {"chief_ids", r.chief_ids}, {"icd_ids", r.icd_ids},
            {"report_ids", r.report_ids}, {"report_text", r.report_text}, {"image_ref", image_ref}};
}

PatientRecord patient_from_json(const nlohmann::json& j, const ImageTable& images) {
    PatientRecord r;
    try {
        r.sample_id = j.at("sample_id").get<std::string>();
        r.split = j.value("split", "");
        std::array<double, kScalarCount> a{};
        for (std::size_t i = 0; i < kScalarCount; ++i) a[i] = j.at("scalars").at(kScalarNames[i]).get<double>();
        r.scalars = ScalarFeatures::from_array(a);
        r.ethnicity = j.at("ethnicity").get<int>();
        r.chief_ids = j.at("chief_ids").get<std::vector<std::size_t>>();
        r.icd_ids = j.at("icd_ids").get<std::vector<std::size_t>>();
        r.report_ids = j.at("report_ids").get<std::vector<std::size_t>>();
        r.report_text = j.value("report_text", "");
        const std::string ref = j.value("image_ref", r.sample_id);
        auto it = images.find(ref);
        if (it == images.end()) throw DataError("record '" + r.sample_id + "' references missing image '" + ref + "'");
        r.image = it->second;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed patient record: " + std::string(e.what()));
    }
    return r;
}

void write_generated(const fs::path& file, const std::vector<GeneratedReport>& reports) {
    std::vector<nlohmann::json> rows;
    for (const auto& g : reports) {
        rows.push_back({{"sample_id", g.sample_id}, {"generated", g.generated}, {"reference", g.reference}});
    }
    write_jsonl(file, rows);
}

std::vector<GeneratedReport> read_generated(const fs::path& file) {
    std::vector<GeneratedReport> out;
    for (const auto& j : read_jsonl(file)) {
        try {
            out.push_back({j.at("sample_id").get<std::string>(), j.at("generated").get<std::string>(),
                           j.at("reference").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw DataError(file.string() + ": malformed generated row: " + e.what());
        }
    }
    return out;
}

// Hashing ----------------------------------------------------------------------

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const char* data, std::size_t n) {
        if (EVP_DigestUpdate(ctx_, data, n) != 1) throw Error("SHA-256 update failed");
    }
    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_, md, &len) != 1) throw Error("SHA-256 final failed");
        static const char* digits = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out += digits[md[i] >> 4];
            out += digits[md[i] & 0xf];
        }
        return out;
    }

private:
    EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::string sha256_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot read " + file.string());
    Sha256 h;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

nlohmann::json DatasetManifest::to_json() const {
    nlohmann::json f = nlohmann::json::object();
    for (const auto& [name, e] : files) f[name] = {{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}};
    return {{"format", "cxrfuse-manifest"}, {"version", 1},      {"kind", kind},
            {"files", f},                   {"splits", splits},  {"info", info},
            {"content_hash", content_hash}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        if (j.at("format") != "cxrfuse-manifest") throw DataError("not a cxrfuse manifest");
        m.kind = j.at("kind").get<std::string>();
        for (const auto& [name, e] : j.at("files").items()) {
            m.files[name] = {e.at("path").get<std::string>(), e.at("sha256").get<std::string>(),
                             e.at("bytes").get<std::size_t>()};
        }
        m.splits = j.value("splits", std::map<std::string, std::size_t>{});
        m.info = j.value("info", nlohmann::json::object());
        m.content_hash = j.at("content_hash").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

namespace {

std::string combined_hash(const std::map<std::string, ManifestEntry>& files) {
    std::string joined;
    for (const auto& [name, e] : files) joined += name + '\0' + e.sha256 + '\n';
    return sha256_hex(joined);
}

}  // namespace

DatasetManifest write_manifest(const fs::path& dir, const std::string& kind,
                               const std::map<std::string, std::string>& files,
                               const std::map<std::string, std::size_t>& splits, const nlohmann::json& info) {
    DatasetManifest m;
    m.kind = kind;
    m.splits = splits;
    m.info = info;
    for (const auto& [name, rel] : files) {
        const fs::path p = dir / rel;
        m.files[name] = {rel, sha256_file(p), static_cast<std::size_t>(fs::file_size(p))};
    }
    m.content_hash = combined_hash(m.files);
    write_json(dir / "manifest.json", m.to_json());
    return m;
}

DatasetManifest verify_manifest(const fs::path& dir) {
    const DatasetManifest m = DatasetManifest::from_json(read_json(dir / "manifest.json"));
    for (const auto& [name, e] : m.files) {
        const fs::path p = dir / e.path;
        if (!fs::exists(p)) throw DataError("manifest file '" + name + "' is missing: " + p.string());
        if (sha256_file(p) != e.sha256) throw DataError("manifest hash mismatch for '" + name + "' (" + p.string() + ")");
    }
    if (combined_hash(m.files) != m.content_hash) throw DataError("manifest content hash mismatch in " + dir.string());
    return m;
}

}  // namespace cxrfuse
