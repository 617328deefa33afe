#include "curate/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>

#include "curate/error.hpp"
#include "curate/parallel.hpp"
#include "curate/text.hpp"
#include "json.hpp"

namespace curate {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

const Document* Corpus::find(std::string_view doc_id) const {
  auto i = index_of(doc_id);
  return i == std::string_view::npos ? nullptr : &documents[i];
}

Document* Corpus::find(std::string_view doc_id) {
  auto i = index_of(doc_id);
  return i == std::string_view::npos ? nullptr : &documents[i];
}

std::size_t Corpus::index_of(std::string_view doc_id) const {
  auto it = std::lower_bound(documents.begin(), documents.end(), doc_id,
                             [](const Document& d, std::string_view id) { return d.doc_id < id; });
  if (it == documents.end() || it->doc_id != doc_id) return std::string_view::npos;
  return static_cast<std::size_t>(it - documents.begin());
}

void Corpus::sort() {
  std::sort(documents.begin(), documents.end(),
            [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
}

std::string normalize_text(std::string_view raw) {
  if (auto bad = text::find_invalid_utf8(raw); bad != std::string_view::npos)
    throw RejectedRecord("invalid_utf8", "invalid UTF-8 at byte " + std::to_string(bad), bad);

  const std::string composed = text::nfc(raw);

  std::string lf;
  lf.reserve(composed.size());
  for (std::size_t i = 0; i < composed.size(); ++i) {
    if (composed[i] == '\r' && i + 1 < composed.size() && composed[i + 1] == '\n') continue;
    lf.push_back(composed[i]);
  }

  std::string collapsed;
  collapsed.reserve(lf.size());
  std::size_t blank_run = 0;
  std::size_t pos = 0;
  bool first = true;
  while (pos <= lf.size()) {
    std::size_t nl = lf.find('\n', pos);
    if (nl == std::string::npos) nl = lf.size();
    std::string_view line(lf.data() + pos, nl - pos);
    blank_run = text::is_blank(line) ? blank_run + 1 : 0;
    if (blank_run <= 2) {
      if (!first) collapsed.push_back('\n');
      collapsed.append(line);
      first = false;
    }
    pos = nl + 1;
  }

  return text::nfc(text::trim(collapsed));
}

std::string extract_domain(std::string_view url) {
  std::string_view rest = url;
  if (auto scheme = rest.find("://"); scheme != std::string_view::npos) rest = rest.substr(scheme + 3);
  else if (rest.starts_with("//")) rest = rest.substr(2);
  rest = rest.substr(0, rest.find_first_of("/?#"));
  if (auto at = rest.rfind('@'); at != std::string_view::npos) rest = rest.substr(at + 1);
  if (rest.starts_with('[')) {
    rest = rest.substr(0, rest.find(']') == std::string_view::npos ? rest.size() : rest.find(']') + 1);
  } else if (auto colon = rest.find(':'); colon != std::string_view::npos) {
    rest = rest.substr(0, colon);
  }
  std::string host = text::to_lower(rest);
  while (!host.empty() && host.back() == '.') host.pop_back();
  if (host.starts_with("www.")) host.erase(0, 4);
  return host;
}

namespace {

bool read_int(std::string_view s, std::size_t& pos, std::size_t digits, int& out) {
  if (pos + digits > s.size()) return false;
  int v = 0;
  for (std::size_t i = 0; i < digits; ++i) {
    char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  pos += digits;
  out = v;
  return true;
}

bool expect(std::string_view s, std::size_t& pos, char c) {
  if (pos >= s.size() || s[pos] != c) return false;
  ++pos;
  return true;
}

}  // namespace

Timestamp parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  auto fail = [&] { return std::invalid_argument("not an ISO-8601 timestamp: " + std::string(s)); };
  std::size_t pos = 0;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!read_int(s, pos, 4, y) || !expect(s, pos, '-') || !read_int(s, pos, 2, mo) || !expect(s, pos, '-') ||
      !read_int(s, pos, 2, d))
    throw fail();
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == 't' || s[pos] == ' ')) {
    ++pos;
    if (!read_int(s, pos, 2, h) || !expect(s, pos, ':') || !read_int(s, pos, 2, mi)) throw fail();
    if (pos < s.size() && s[pos] == ':') {
      ++pos;
      if (!read_int(s, pos, 2, sec)) throw fail();
      if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
        ++pos;
        std::size_t digits = 0;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos, ++digits;
        if (digits == 0) throw fail();
      }
    }
  }
  int offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' || s[pos] == 'z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int sign = s[pos] == '-' ? -1 : 1;
      ++pos;
      int oh = 0, om = 0;
      if (!read_int(s, pos, 2, oh)) throw fail();
      if (pos < s.size() && s[pos] == ':') ++pos;
      if (!read_int(s, pos, 2, om)) throw fail();
      offset_minutes = sign * (oh * 60 + om);
    }
  }
  if (pos != s.size()) throw fail();
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) throw fail();
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} - minutes{offset_minutes};
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string make_doc_id(const Hash128& content_hash, std::string_view url, Timestamp crawl_time) {
  std::string fetch_key(url);
  fetch_key.push_back('\x1f');
  fetch_key += std::to_string(crawl_time.time_since_epoch().count());
  return content_hash.hex() + "-" + hex64(hash64(fetch_key));
}

namespace {

std::string required_string(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) throw RejectedRecord("missing_field", std::string("missing ") + field);
  if (!it->is_string()) throw RejectedRecord("bad_field", std::string(field) + " must be a string");
  return it->get<std::string>();
}

Timestamp crawl_time_of(const json& obj) {
  auto it = obj.find("crawl_time");
  if (it == obj.end() || it->is_null()) throw RejectedRecord("missing_field", "missing crawl_time");
  if (it->is_number_integer()) return Timestamp{std::chrono::seconds{it->get<std::int64_t>()}};
  if (!it->is_string()) throw RejectedRecord("bad_crawl_time", "crawl_time must be an ISO-8601 string");
  try {
    return parse_iso8601(it->get_ref<const std::string&>());
  } catch (const std::invalid_argument& e) {
    throw RejectedRecord("bad_crawl_time", e.what());
  }
}

}  // namespace

Document ingest_record(std::string_view line) {
  if (auto bad = text::find_invalid_utf8(line); bad != std::string_view::npos)
    throw RejectedRecord("invalid_utf8", "invalid UTF-8 at byte " + std::to_string(bad), bad);
  json obj = json::parse(line.begin(), line.end(), nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) throw RejectedRecord("invalid_json", "record is not a JSON object");

  Document doc;
  doc.url = required_string(obj, "url");
  std::string raw_text = required_string(obj, "text");
  doc.crawl_time = crawl_time_of(obj);
  doc.snapshot_id = required_string(obj, "snapshot_id");
  if (auto it = obj.find("language"); it != obj.end() && it->is_string() && !it->get_ref<const std::string&>().empty())
    doc.language = it->get<std::string>();

  doc.text = normalize_text(raw_text);
  if (doc.text.empty()) throw RejectedRecord("empty_text", "text is empty after normalisation");
  doc.domain = extract_domain(doc.url);
  if (doc.domain.empty()) throw RejectedRecord("bad_url", "no host in url");
  doc.content_hash = hash128(doc.text);
  doc.doc_id = make_doc_id(doc.content_hash, doc.url, doc.crawl_time);
  return doc;
}

std::size_t IngestReport::rejected() const {
  std::size_t n = 0;
  for (const auto& [_, c] : rejects) n += c;
  return n;
}

IngestResult ingest_lines(std::span<const std::string> lines, unsigned workers) {
  std::vector<std::variant<Document, std::string>> parsed(lines.size());
  parallel_for(lines.size(), workers, [&](std::size_t i) {
    try {
      parsed[i] = ingest_record(lines[i]);
    } catch (const RejectedRecord& r) {
      parsed[i] = r.reason();
    }
  });

  IngestResult result;
  result.report.lines = lines.size();
  std::vector<std::pair<Document*, std::size_t>> accepted;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (auto* doc = std::get_if<Document>(&parsed[i])) accepted.emplace_back(doc, i);
    else ++result.report.rejects[std::get<std::string>(parsed[i])];
  }
  std::sort(accepted.begin(), accepted.end(), [](const auto& a, const auto& b) {
    return a.first->doc_id != b.first->doc_id ? a.first->doc_id < b.first->doc_id : a.second < b.second;
  });
  result.corpus.documents.reserve(accepted.size());
  for (auto& [doc, _] : accepted) {
    if (!result.corpus.documents.empty() && result.corpus.documents.back().doc_id == doc->doc_id) {
      ++result.report.rejects["duplicate_doc_id"];
      continue;
    }
    result.corpus.documents.push_back(std::move(*doc));
  }
  result.report.accepted = result.corpus.documents.size();
  return result;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

IngestResult ingest_files(std::span<const fs::path> files, unsigned workers) {
  std::vector<std::string> lines;
  std::string sources;
  for (const auto& f : files) {
    auto part = read_lines(f);
    lines.insert(lines.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    if (!sources.empty()) sources += ",";
    sources += f.filename().string();
  }
  auto result = ingest_lines(lines, workers);
  result.corpus.provenance["source"] = sources;
  return result;
}

std::string document_to_json(const Document& doc) {
  ordered_json j;
  j["doc_id"] = doc.doc_id;
  j["url"] = doc.url;
  j["crawl_time"] = format_iso8601(doc.crawl_time);
  j["language"] = doc.language;
  j["snapshot_id"] = doc.snapshot_id;
  j["domain"] = doc.domain;
  j["content_hash"] = doc.content_hash.hex();
  j["text"] = doc.text;
  j["extra"] = doc.extra;
  return j.dump();
}

Document document_from_json(std::string_view line) {
  json j = json::parse(line);
  Document doc;
  doc.doc_id = j.at("doc_id").get<std::string>();
  doc.url = j.at("url").get<std::string>();
  doc.crawl_time = parse_iso8601(j.at("crawl_time").get<std::string>());
  doc.language = j.value("language", std::string("und"));
  doc.snapshot_id = j.at("snapshot_id").get<std::string>();
  doc.domain = j.at("domain").get<std::string>();
  doc.content_hash = Hash128::from_hex(j.at("content_hash").get<std::string>());
  doc.text = j.at("text").get<std::string>();
  if (auto it = j.find("extra"); it != j.end()) doc.extra = it->get<std::map<std::string, std::string>>();
  return doc;
}

std::vector<fs::path> write_corpus(const fs::path& dir, const Corpus& corpus, std::size_t docs_per_shard) {
  fs::create_directories(dir);
  docs_per_shard = std::max<std::size_t>(1, docs_per_shard);
  std::vector<fs::path> shards;
  const std::size_t n = corpus.documents.size();
  const std::size_t shard_count = std::max<std::size_t>(1, (n + docs_per_shard - 1) / docs_per_shard);
  for (std::size_t s = 0; s < shard_count; ++s) {
    std::string body;
    for (std::size_t i = s * docs_per_shard; i < std::min(n, (s + 1) * docs_per_shard); ++i) {
      body += document_to_json(corpus.documents[i]);
      body.push_back('\n');
    }
    char name[48];
    std::snprintf(name, sizeof name, "corpus-%05zu.jsonl", s);
    write_file(dir / name, body);
    shards.push_back(dir / name);
  }
  return shards;
}

Corpus read_corpus(std::span<const fs::path> shards) {
  Corpus corpus;
  for (const auto& shard : shards)
    for (const auto& line : read_lines(shard))
      if (!line.empty()) corpus.documents.push_back(document_from_json(line));
  corpus.sort();
  return corpus;
}

std::vector<fs::path> corpus_shards(const fs::path& dir) {
  std::vector<fs::path> shards;
  if (!fs::is_directory(dir)) return shards;
  for (const auto& entry : fs::directory_iterator(dir)) {
    auto name = entry.path().filename().string();
    if (name.starts_with("corpus-") && name.ends_with(".jsonl")) shards.push_back(entry.path());
  }
  std::sort(shards.begin(), shards.end());
  return shards;
}

std::string ingest_report_to_json(const IngestReport& report, const std::map<std::string, std::string>& provenance) {
  ordered_json j;
  j["lines"] = report.lines;
  j["accepted"] = report.accepted;
  j["rejected"] = report.rejected();
  j["rejects"] = report.rejects;
  j["provenance"] = provenance;
  return j.dump(2) + "\n";
}

IngestReport ingest_report_from_json(std::string_view text) {
  json j = json::parse(text);
  IngestReport r;
  r.lines = j.at("lines").get<std::size_t>();
  r.accepted = j.at("accepted").get<std::size_t>();
  r.rejects = j.at("rejects").get<std::map<std::string, std::size_t>>();
  return r;
}

}  // namespace curate
