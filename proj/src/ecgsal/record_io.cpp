#include "ecgsal/record_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ecgsal/error.hpp"

namespace ecgsal::record_io {

namespace {

constexpr int kSkip = 59;
constexpr int kNum = 60;
constexpr int kSub = 61;
constexpr int kChn = 62;
constexpr int kAux = 63;
constexpr int kMaxDelta = 1023;

// Index = MIT annotation code. ' ' marks unassigned codes.
constexpr std::string_view kCodeSymbols =
    " NLRaVFJASEj/Q~ | sT*D\"=pB^t+u?![]en@xf()r        ";

constexpr bool kBeatCodes[] = {
    false, true,  true,  true,  true,  true,  true,  true,  true,  true,   // 0-9
    true,  true,  true,  true,  false, false, false, false, false, false,  // 10-19
    false, false, false, false, false, true,  false, false, false, false,  // 20-29
    true,  false, false, false, true,  true,  false, true,  true,  false,  // 30-39
    false, true,  false, false, false, false, false, false, false, false,  // 40-49
};

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

// Leading numeric prefix of tokens like "360/1000(0)" or "200(1024)/mV".
std::string_view numeric_prefix(std::string_view s) {
  std::size_t n = 0;
  while (n < s.size() && (std::isdigit(static_cast<unsigned char>(s[n])) || s[n] == '.' || s[n] == '-' || s[n] == '+' ||
                          s[n] == 'e' || s[n] == 'E')) {
    ++n;
  }
  return s.substr(0, n);
}

LeadInfo parse_signal_line(const std::vector<std::string>& tok, std::size_t line_no) {
  const auto malformed = [&](const std::string& what) -> Error {
    return Error(ErrorCode::MalformedHeader, "signal line " + std::to_string(line_no) + ": " + what);
  };
  if (tok.size() < 2) throw malformed("expected file name and format");
  LeadInfo lead;
  lead.file_name = tok[0];

  const std::string& fmt = tok[1];
  const std::size_t mod = fmt.find_first_of("x:+");
  if (!parse_number(std::string_view(fmt).substr(0, mod), lead.format)) throw malformed("bad format '" + fmt + "'");
  if (lead.format != kFormat212) {
    fail(ErrorCode::UnsupportedFormat, "format " + std::to_string(lead.format) + " (only 212 is supported)");
  }
  if (mod != std::string::npos) {
    int value = 0;
    const std::string_view rest = std::string_view(fmt).substr(mod + 1);
    if (fmt[mod] == 'x') fail(ErrorCode::UnsupportedFormat, "multi-frequency signal '" + fmt + "'");
    if (!parse_number(numeric_prefix(rest), value)) throw malformed("bad format modifier '" + fmt + "'");
    if (value != 0) fail(ErrorCode::UnsupportedFormat, "skew/byte offset '" + fmt + "'");
  }

  bool explicit_baseline = false;
  if (tok.size() > 2) {
    const std::string& g = tok[2];
    if (!parse_number(numeric_prefix(g), lead.gain)) throw malformed("bad gain '" + g + "'");
    if (lead.gain == 0.0) lead.gain = 200.0;  // WFDB: 0 means uncalibrated, use default
    if (lead.gain < 0.0) throw malformed("negative gain");
    if (auto open = g.find('('); open != std::string::npos) {
      const auto close = g.find(')', open);
      if (close == std::string::npos || !parse_number(std::string_view(g).substr(open + 1, close - open - 1), lead.baseline)) {
        throw malformed("bad baseline in '" + g + "'");
      }
      explicit_baseline = true;
    }
  }
  if (tok.size() > 3 && !parse_number(tok[3], lead.adc_resolution)) throw malformed("bad adc resolution");
  if (tok.size() > 4 && !parse_number(tok[4], lead.adc_zero)) throw malformed("bad adc zero");
  if (!explicit_baseline) lead.baseline = lead.adc_zero;
  for (std::size_t i = 8; i < tok.size(); ++i) {
    if (!lead.lead_name.empty()) lead.lead_name += ' ';
    lead.lead_name += tok[i];
  }
  return lead;
}

}  // namespace

RecordHeader parse_header(std::string_view text) {
  std::vector<std::vector<std::string>> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto tok = split_ws(line);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    lines.push_back(std::move(tok));
  }
  if (lines.empty()) fail(ErrorCode::MalformedHeader, "missing record line");

  const auto& rec = lines[0];
  if (rec.size() < 2) fail(ErrorCode::MalformedHeader, "record line needs name and signal count");
  RecordHeader header;
  header.record_id = rec[0];
  if (header.record_id.find('/') != std::string::npos) {
    fail(ErrorCode::UnsupportedFormat, "multi-segment record '" + header.record_id + "'");
  }
  if (!parse_number(rec[1], header.n_leads)) fail(ErrorCode::MalformedHeader, "bad signal count '" + rec[1] + "'");
  if (header.n_leads != kLeads) {
    fail(ErrorCode::LeadCountMismatch, "record declares " + std::to_string(header.n_leads) + " leads, expected 2");
  }
  header.fs = 250.0;
  if (rec.size() > 2 && !parse_number(numeric_prefix(rec[2]), header.fs)) {
    fail(ErrorCode::MalformedHeader, "bad sampling frequency '" + rec[2] + "'");
  }
  if (header.fs <= 0.0) fail(ErrorCode::MalformedHeader, "non-positive sampling frequency");
  if (rec.size() < 4 || !parse_number(rec[3], header.n_samples)) {
    fail(ErrorCode::MalformedHeader, "record line lacks a sample count");
  }

  if (lines.size() < 1 + static_cast<std::size_t>(header.n_leads)) {
    fail(ErrorCode::MalformedHeader, "expected " + std::to_string(header.n_leads) + " signal lines");
  }
  for (int i = 0; i < header.n_leads; ++i) header.leads.push_back(parse_signal_line(lines[1 + i], 1 + i));
  if (header.leads[0].file_name != header.leads[1].file_name) {
    fail(ErrorCode::UnsupportedFormat, "leads stored in separate files");
  }
  return header;
}

Samples212 decode_format212(std::span<const std::uint8_t> bytes, std::size_t n_samples_per_lead) {
  const std::size_t needed = 3 * n_samples_per_lead;
  if (bytes.size() < needed) {
    fail(ErrorCode::TruncatedSignal,
         "need " + std::to_string(needed) + " bytes for " + std::to_string(n_samples_per_lead) + " samples, have " +
             std::to_string(bytes.size()));
  }
  Samples212 out;
  out[0].resize(n_samples_per_lead);
  out[1].resize(n_samples_per_lead);
  const auto sign_extend = [](std::int32_t v) { return (v & 0x800) ? v - 0x1000 : v; };
  for (std::size_t i = 0; i < n_samples_per_lead; ++i) {
    const std::uint8_t b0 = bytes[3 * i];
    const std::uint8_t b1 = bytes[3 * i + 1];
    const std::uint8_t b2 = bytes[3 * i + 2];
    out[0][i] = sign_extend(((b1 & 0x0F) << 8) | b0);
    out[1][i] = sign_extend(((b1 & 0xF0) << 4) | b2);
  }
  return out;
}

std::vector<std::uint8_t> encode_format212(std::span<const std::int32_t> lead0, std::span<const std::int32_t> lead1) {
  if (lead0.size() != lead1.size()) fail(ErrorCode::LengthMismatch, "lead lengths differ");
  std::vector<std::uint8_t> out;
  out.reserve(3 * lead0.size());
  for (std::size_t i = 0; i < lead0.size(); ++i) {
    if (lead0[i] < -2048 || lead0[i] > 2047 || lead1[i] < -2048 || lead1[i] > 2047) {
      fail(ErrorCode::InvalidArgument, "sample outside 12-bit range at index " + std::to_string(i));
    }
    const auto a = static_cast<std::uint32_t>(lead0[i]) & 0xFFF;
    const auto b = static_cast<std::uint32_t>(lead1[i]) & 0xFFF;
    out.push_back(static_cast<std::uint8_t>(a & 0xFF));
    out.push_back(static_cast<std::uint8_t>(((a >> 8) & 0x0F) | ((b >> 4) & 0xF0)));
    out.push_back(static_cast<std::uint8_t>(b & 0xFF));
  }
  return out;
}

std::vector<double> to_physical(std::span<const std::int32_t> adc, double gain, double baseline) {
  if (gain == 0.0) fail(ErrorCode::ZeroGain, "gain must be non-zero");
  std::vector<double> out(adc.size());
  for (std::size_t i = 0; i < adc.size(); ++i) out[i] = (static_cast<double>(adc[i]) - baseline) / gain;
  return out;
}

char code_to_symbol(int code) noexcept {
  if (code < 0 || code >= static_cast<int>(kCodeSymbols.size())) return ' ';
  return kCodeSymbols[static_cast<std::size_t>(code)];
}

std::optional<int> symbol_to_code(char symbol) noexcept {
  if (symbol == ' ') return std::nullopt;
  const auto pos = kCodeSymbols.find(symbol);
  if (pos == std::string_view::npos) return std::nullopt;
  return static_cast<int>(pos);
}

bool is_beat_code(int code) noexcept {
  return code >= 0 && code < static_cast<int>(std::size(kBeatCodes)) && kBeatCodes[code];
}

std::vector<Annotation> read_annotations(std::span<const std::uint8_t> bytes) {
  std::vector<Annotation> out;
  std::int64_t time = 0;
  std::size_t pos = 0;
  const auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) fail(ErrorCode::MalformedAnnotationStream, "stream ends without terminator");
  };
  while (true) {
    need(2);
    const unsigned word = bytes[pos] | (bytes[pos + 1] << 8);
    pos += 2;
    const int code = static_cast<int>(word >> 10);
    const int field = static_cast<int>(word & 0x3FF);
    if (code == 0 && field == 0) break;
    switch (code) {
      case kSkip: {
        need(4);
        // PDP-11 long: high 16-bit word first, each word little-endian.
        const std::uint32_t hi = bytes[pos] | (bytes[pos + 1] << 8);
        const std::uint32_t lo = bytes[pos + 2] | (bytes[pos + 3] << 8);
        pos += 4;
        time += static_cast<std::int32_t>((hi << 16) | lo);
        break;
      }
      case kNum:
      case kSub:
      case kChn:
        break;
      case kAux: {
        const std::size_t len = static_cast<std::size_t>(field);
        need(len + (len & 1));
        if (!out.empty()) out.back().aux.assign(reinterpret_cast<const char*>(bytes.data() + pos), len);
        pos += len + (len & 1);
        break;
      }
      default: {
        time += field;
        if (time < 0) fail(ErrorCode::MalformedAnnotationStream, "negative sample index");
        Annotation a;
        a.sample_index = static_cast<std::size_t>(time);
        a.code = code;
        a.symbol = code_to_symbol(code);
        a.is_beat = is_beat_code(code);
        out.push_back(std::move(a));
        break;
      }
    }
    if (time < 0) fail(ErrorCode::MalformedAnnotationStream, "negative sample index");
  }
  return out;
}

std::vector<std::uint8_t> encode_annotations(std::span<const Annotation> annotations) {
  std::vector<std::uint8_t> out;
  const auto put_word = [&](unsigned code, unsigned field) {
    const unsigned w = (code << 10) | (field & 0x3FF);
    out.push_back(static_cast<std::uint8_t>(w & 0xFF));
    out.push_back(static_cast<std::uint8_t>(w >> 8));
  };
  std::int64_t prev = 0;
  for (const auto& a : annotations) {
    if (a.code < 1 || a.code > 49) fail(ErrorCode::InvalidArgument, "annotation code out of range");
    const std::int64_t delta = static_cast<std::int64_t>(a.sample_index) - prev;
    if (delta < 0 || delta > kMaxDelta) {
      put_word(kSkip, 0);
      const auto d = static_cast<std::uint32_t>(static_cast<std::int32_t>(delta));
      out.push_back(static_cast<std::uint8_t>((d >> 16) & 0xFF));
      out.push_back(static_cast<std::uint8_t>((d >> 24) & 0xFF));
      out.push_back(static_cast<std::uint8_t>(d & 0xFF));
      out.push_back(static_cast<std::uint8_t>((d >> 8) & 0xFF));
      put_word(static_cast<unsigned>(a.code), 0);
    } else {
      put_word(static_cast<unsigned>(a.code), static_cast<unsigned>(delta));
    }
    if (!a.aux.empty()) {
      if (a.aux.size() > 255) fail(ErrorCode::InvalidArgument, "aux string too long");
      put_word(kAux, static_cast<unsigned>(a.aux.size()));
      out.insert(out.end(), a.aux.begin(), a.aux.end());
      if (a.aux.size() & 1) out.push_back(0);
    }
    prev = static_cast<std::int64_t>(a.sample_index);
  }
  put_word(0, 0);
  return out;
}

std::optional<BeatClass> map_symbol(char symbol) {
  const auto code = symbol_to_code(symbol);
  if (!code || !is_beat_code(*code)) fail(ErrorCode::NonBeatSymbol, std::string("'") + symbol + "' is not a beat code");
  return class_from_symbol(symbol);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

EcgRecord load_record(const std::filesystem::path& dir, const std::string& record_id) {
  const auto hea = read_file_bytes(dir / (record_id + ".hea"));
  EcgRecord rec;
  rec.header = parse_header(std::string_view(reinterpret_cast<const char*>(hea.data()), hea.size()));
  if (rec.header.record_id != record_id) {
    fail(ErrorCode::MalformedHeader, "header names record '" + rec.header.record_id + "', expected '" + record_id + "'");
  }
  const auto dat = read_file_bytes(dir / rec.header.leads[0].file_name);
  const auto adc = decode_format212(dat, rec.header.n_samples);
  for (int l = 0; l < kLeads; ++l) {
    const auto& lead = rec.header.leads[static_cast<std::size_t>(l)];
    rec.signal[static_cast<std::size_t>(l)] = to_physical(adc[static_cast<std::size_t>(l)], lead.gain, lead.baseline);
  }
  rec.annotations = read_annotations(read_file_bytes(dir / (record_id + ".atr")));
  for (const auto& a : rec.annotations) {
    if (a.sample_index >= rec.header.n_samples) {
      fail(ErrorCode::MalformedAnnotationStream,
           "record " + record_id + ": annotation at " + std::to_string(a.sample_index) + " beyond signal end");
    }
  }
  return rec;
}

std::vector<std::string> list_records(const std::filesystem::path& dir) {
  std::vector<std::string> ids;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".hea") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

nlohmann::json record_to_json(const EcgRecord& record) {
  nlohmann::json j;
  j["record_id"] = record.header.record_id;
  j["n_leads"] = record.header.n_leads;
  j["fs"] = record.header.fs;
  j["n_samples"] = record.header.n_samples;
  j["leads"] = nlohmann::json::array();
  for (std::size_t l = 0; l < record.header.leads.size(); ++l) {
    const auto& lead = record.header.leads[l];
    j["leads"].push_back({{"name", lead.lead_name},
                          {"gain", lead.gain},
                          {"baseline", lead.baseline},
                          {"mv", record.signal[l]}});
  }
  j["annotations"] = nlohmann::json::array();
  for (const auto& a : record.annotations) {
    nlohmann::json ja{{"sample", a.sample_index}, {"symbol", std::string(1, a.symbol)}, {"is_beat", a.is_beat}};
    if (!a.aux.empty()) ja["aux"] = a.aux;
    j["annotations"].push_back(std::move(ja));
  }
  return j;
}

}  // namespace ecgsal::record_io
