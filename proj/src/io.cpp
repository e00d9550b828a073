#include "hdn/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <system_error>

#include "hdn/error.hpp"

namespace hdn::io {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Writes next to the target and renames, so a failed write never leaves a
// partial file at `path`.
void write_file_atomic(const fs::path& path, const std::string& bytes) {
    fs::path tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(ErrorKind::Io, "short write to " + path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorKind::Io, "cannot move output into place at " + path.string());
    }
}

// Cursor over a netpbm-style header: whitespace separated tokens, '#' comments.
class HeaderReader {
public:
    HeaderReader(const std::string& data, std::string format) : data_(data), format_(std::move(format)) {}

    std::string token(const char* field) {
        skip_space_and_comments();
        std::size_t start = pos_;
        while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
        if (start == pos_) fail(field, "missing");
        return data_.substr(start, pos_ - start);
    }

    std::size_t dimension(const char* field) {
        std::string tok = token(field);
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (ec != std::errc() || ptr != tok.data() + tok.size() || value == 0) {
            fail(field, "expected a positive integer, got '" + tok + "'");
        }
        return value;
    }

    double real(const char* field) {
        std::string tok = token(field);
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(value)) {
            fail(field, "expected a real number, got '" + tok + "'");
        }
        return value;
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t payload_offset(const char* field) {
        if (pos_ >= data_.size() || !std::isspace(static_cast<unsigned char>(data_[pos_]))) {
            fail(field, "missing separator before raster data");
        }
        return pos_ + 1;
    }

    [[noreturn]] void fail(const char* field, const std::string& what) const {
        throw Error(ErrorKind::Format, format_ + " " + field + ": " + what);
    }

private:
    void skip_space_and_comments() {
        while (pos_ < data_.size()) {
            if (std::isspace(static_cast<unsigned char>(data_[pos_]))) {
                ++pos_;
            } else if (data_[pos_] == '#') {
                while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::string& data_;
    std::string format_;
    std::size_t pos_ = 0;
};

float decode_float(const char* bytes, bool little_endian) {
    std::uint32_t raw = 0;
    std::memcpy(&raw, bytes, sizeof raw);
    const bool host_little = std::endian::native == std::endian::little;
    if (little_endian != host_little) raw = __builtin_bswap32(raw);
    return std::bit_cast<float>(raw);
}

void append_float_le(std::string& out, float value) {
    std::uint32_t raw = std::bit_cast<std::uint32_t>(value);
    if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap32(raw);
    char bytes[4];
    std::memcpy(bytes, &raw, sizeof bytes);
    out.append(bytes, sizeof bytes);
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool is_nan_token(const std::string& tok) {
    if (tok.size() != 3) return false;
    std::string lower = tok;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return lower == "nan";
}

}  // namespace

DepthMap read_pfm(const fs::path& path) {
    const std::string data = read_file(path);
    HeaderReader header(data, "PFM");
    const std::string magic = header.token("magic");
    if (magic == "PF") header.fail("magic", "color PFM ('PF') is not supported, expected 'Pf'");
    if (magic != "Pf") header.fail("magic", "expected 'Pf', got '" + magic + "'");
    const std::size_t width = header.dimension("width");
    const std::size_t height = header.dimension("height");
    const double scale = header.real("scale");
    if (scale == 0.0) header.fail("scale", "must be nonzero");
    const std::size_t offset = header.payload_offset("scale");

    const std::size_t count = width * height;
    if (data.size() - offset < count * 4) {
        header.fail("payload", "truncated: expected " + std::to_string(count * 4) + " bytes, found " +
                                   std::to_string(data.size() - offset));
    }
    const bool little = scale < 0.0;
    std::vector<double> values(count);
    for (std::size_t file_row = 0; file_row < height; ++file_row) {
        const std::size_t row = height - 1 - file_row;
        for (std::size_t col = 0; col < width; ++col) {
            const char* p = data.data() + offset + 4 * (file_row * width + col);
            values[linearize(row, col, width)] = static_cast<double>(decode_float(p, little));
        }
    }
    return DepthMap(height, width, std::move(values));
}

void write_pfm(const DepthMap& map, const fs::path& path) {
    std::string out = "Pf\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n-1.0\n";
    out.reserve(out.size() + map.size() * 4);
    for (std::size_t file_row = 0; file_row < map.height(); ++file_row) {
        const std::size_t row = map.height() - 1 - file_row;
        for (std::size_t col = 0; col < map.width(); ++col) {
            append_float_le(out, static_cast<float>(map.at(row, col)));
        }
    }
    write_file_atomic(path, out);
}

Mask read_mask(const fs::path& path, std::size_t* height_out, std::size_t* width_out) {
    const std::string data = read_file(path);
    HeaderReader header(data, "PGM");
    const std::string magic = header.token("magic");
    if (magic != "P5") header.fail("magic", "expected 'P5', got '" + magic + "'");
    const std::size_t width = header.dimension("width");
    const std::size_t height = header.dimension("height");
    const std::size_t maxval = header.dimension("maxval");
    if (maxval != 255) header.fail("maxval", "expected 255, got " + std::to_string(maxval));
    const std::size_t offset = header.payload_offset("maxval");
    const std::size_t count = width * height;
    if (data.size() - offset < count) {
        header.fail("payload", "truncated: expected " + std::to_string(count) + " bytes, found " +
                                   std::to_string(data.size() - offset));
    }
    Mask mask(count);
    for (std::size_t i = 0; i < count; ++i) {
        mask[i] = data[offset + i] != 0 ? 1 : 0;
    }
    if (height_out) *height_out = height;
    if (width_out) *width_out = width;
    return mask;
}

void write_mask(const Mask& mask, std::size_t height, std::size_t width, const fs::path& path) {
    if (mask.size() != height * width || height == 0 || width == 0) {
        throw Error(ErrorKind::Shape, "mask size does not match " + std::to_string(height) + "x" +
                                          std::to_string(width));
    }
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    for (std::uint8_t v : mask) out.push_back(v != 0 ? static_cast<char>(0xFF) : '\0');
    write_file_atomic(path, out);
}

DepthMap read_csv_map(const fs::path& path) {
    const std::string data = read_file(path);
    std::vector<double> values;
    Mask valid;
    std::size_t width = 0;
    std::size_t height = 0;

    std::istringstream lines(data);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> pending_blank;
    while (std::getline(lines, line)) {
        ++line_no;
        if (trim(line).empty()) {
            pending_blank.push_back(line);
            continue;
        }
        if (!pending_blank.empty()) {
            throw Error(ErrorKind::Format, "CSV row " + std::to_string(line_no - 1) + ": blank line inside the grid");
        }
        std::size_t cols = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string tok = trim(std::string_view(line).substr(
                start, comma == std::string::npos ? std::string::npos : comma - start));
            if (is_nan_token(tok)) {
                values.push_back(0.0);
                valid.push_back(0);
            } else {
                double v = 0.0;
                auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
                if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
                    throw Error(ErrorKind::Format, "CSV row " + std::to_string(line_no) + ", column " +
                                                       std::to_string(cols + 1) + ": bad value '" + tok + "'");
                }
                values.push_back(v);
                valid.push_back(1);
            }
            ++cols;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (height == 0) {
            width = cols;
        } else if (cols != width) {
            throw Error(ErrorKind::Format, "CSV row " + std::to_string(line_no) + ": expected " +
                                               std::to_string(width) + " columns, got " + std::to_string(cols));
        }
        ++height;
    }
    if (height == 0) throw Error(ErrorKind::Format, "CSV file " + path.string() + " has no rows");
    return DepthMap(height, width, std::move(values), std::move(valid));
}

void write_csv_map(const DepthMap& map, const fs::path& path) {
    std::ostringstream out;
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t r = 0; r < map.height(); ++r) {
        for (std::size_t c = 0; c < map.width(); ++c) {
            if (c > 0) out << ',';
            const std::size_t i = linearize(r, c, map.width());
            if (map.is_valid(i)) {
                out << map[i];
            } else {
                out << "nan";
            }
        }
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

DepthMap read_map(const fs::path& path, const std::optional<fs::path>& mask_path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    DepthMap map = [&] {
        if (ext == ".pfm") return read_pfm(path);
        if (ext == ".csv") return read_csv_map(path);
        throw Error(ErrorKind::Format, "unsupported extension '" + ext + "' for " + path.string() +
                                           " (expected .pfm or .csv)");
    }();
    if (!mask_path) return map;
    std::size_t h = 0;
    std::size_t w = 0;
    Mask mask = read_mask(*mask_path, &h, &w);
    if (h != map.height() || w != map.width()) {
        throw Error(ErrorKind::Shape, "mask " + mask_path->string() + " is " + std::to_string(h) + "x" +
                                          std::to_string(w) + " but values are " +
                                          std::to_string(map.height()) + "x" + std::to_string(map.width()));
    }
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = (mask[i] != 0 && map.is_valid(i)) ? 1 : 0;
    }
    return map.with_mask(std::move(mask));
}

}  // namespace hdn::io
