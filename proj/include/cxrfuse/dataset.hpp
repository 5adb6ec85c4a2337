// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxrfuse/preprocess.hpp"
#include "cxrfuse/records.hpp"
#include "cxrfuse/synthetic.hpp"

namespace cxrfuse {

namespace fs = std::filesystem;

enum class DataFormat { Jsonl, Csv };
DataFormat data_format_from_name(const std::string& name);

// Line-oriented JSON ------------------------------------------------------

std::vector<nlohmann::json> read_jsonl(const fs::path& file);
void write_jsonl(const fs::path& file, const std::vector<nlohmann::json>& rows);
nlohmann::json read_json(const fs::path& file);
/// Pretty-printed with a trailing newline.
void write_json(const fs::path& file, const nlohmann::json& j);
void write_text(const fs::path& file, const std::string& text);
std::string read_text(const fs::path& file);

// Raw records --------------------------------------------------------------

/// RFC 4180 fields; quoted fields may hold commas, quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
std::string csv_field(const std::string& value);

void write_raw_records(const fs::path& file, const std::vector<RawRecord>& records, DataFormat format);
/// Format chosen by extension (.csv or anything else as JSONL). Duplicate sample ids are a DataError.
std::vector<RawRecord> read_raw_records(const fs::path& file);

using ImageTable = std::map<std::string, std::vector<double>>;
/// {"sample_id": .., "features": [..]} per line.
void write_image_features(const fs::path& file, const ImageTable& images);
ImageTable read_image_features(const fs::path& file);

void write_planted(const fs::path& file, const std::map<std::string, std::vector<PlantedSpan>>& planted);
std::map<std::string, std::vector<PlantedSpan>> read_planted(const fs::path& file);

// Model-ready records ------------------------------------------------------

/// The image is stored by reference to keep record files small.
nlohmann::json patient_to_json(const PatientRecord& r, const std::string& image_ref);
PatientRecord patient_from_json(const nlohmann::json& j, const ImageTable& images);

// Generated reports --------------------------------------------------------

struct GeneratedReport {
    std::string sample_id;
    std::string generated;
    std::string reference;

    friend bool operator==(const GeneratedReport&, const GeneratedReport&) = default;
};
void write_generated(const fs::path& file, const std::vector<GeneratedReport>& reports);
std::vector<GeneratedReport> read_generated(const fs::path& file);

// Manifest -----------------------------------------------------------------

/// Hex SHA-256 of a byte string or a file.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& file);

struct ManifestEntry {
    std::string path;  // relative to the manifest directory
    std::string sha256;
    std::size_t bytes = 0;
};

struct DatasetManifest {
    std::string kind;
    std::map<std::string, ManifestEntry> files;
    std::map<std::string, std::size_t> splits;
    nlohmann::json info = nlohmann::json::object();
    /// SHA-256 over the sorted (name, file hash) pairs.
    std::string content_hash;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);
};

/// Hashes `files` (name -> path under `dir`) and writes dir/manifest.json.
DatasetManifest write_manifest(const fs::path& dir, const std::string& kind,
                               const std::map<std::string, std::string>& files,
                               const std::map<std::string, std::size_t>& splits = {},
                               const nlohmann::json& info = nlohmann::json::object());
/// Reads dir/manifest.json and re-hashes every listed file; DataError on any mismatch.
DatasetManifest verify_manifest(const fs::path& dir);

}  // namespace cxrfuse
