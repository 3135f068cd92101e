#include "focus/image.hpp"

#include "focus/error.hpp"
#include "focus/util.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace focus {

std::optional<cv::Mat> try_decode_image(const std::filesystem::path& path) {
    std::string bytes;
    try {
        bytes = read_file(path);
    } catch (const Error&) {
        return std::nullopt;
    }
    if (bytes.empty()) return std::nullopt;
    std::vector<std::uint8_t> buf(bytes.begin(), bytes.end());
    cv::Mat img;
    try {
        img = cv::imdecode(buf, cv::IMREAD_COLOR);
    } catch (const cv::Exception&) {
        return std::nullopt;
    }
    if (img.empty() || img.type() != CV_8UC3) return std::nullopt;
    return img;
}

cv::Mat resize_and_center_crop(const cv::Mat& src, int width, int height) {
    if (src.cols == width && src.rows == height) return src.clone();

    const double scale = std::max(static_cast<double>(width) / src.cols,
                                  static_cast<double>(height) / src.rows);
    const int rw = std::max(width, static_cast<int>(std::lround(src.cols * scale)));
    const int rh = std::max(height, static_cast<int>(std::lround(src.rows * scale)));

    cv::Mat resized;
    if (rw == src.cols && rh == src.rows) {
        resized = src;
    } else {
        // The bit-exact variant keeps composed mosaics identical across CPUs.
        cv::resize(src, resized, cv::Size(rw, rh), 0, 0, cv::INTER_LINEAR_EXACT);
    }
    const int x0 = (rw - width) / 2;
    const int y0 = (rh - height) / 2;
    return resized(cv::Rect(x0, y0, width, height)).clone();
}

namespace {

void put_u32_be(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v >> 24));
    out.push_back(static_cast<char>(v >> 16));
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v));
}

std::uint32_t get_u32_be(std::string_view s, std::size_t at) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 3]));
}

std::string text_chunk(std::string_view keyword, std::string_view value) {
    std::string body = "tEXt";
    body.append(keyword);
    body.push_back('\0');
    body.append(value);
    std::string chunk;
    put_u32_be(chunk, static_cast<std::uint32_t>(body.size() - 4));
    chunk += body;
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    put_u32_be(chunk, static_cast<std::uint32_t>(crc));
    return chunk;
}

}  // namespace

std::string encode_png(const cv::Mat& bgr,
                       std::initializer_list<std::pair<std::string_view, std::string_view>> text) {
    if (bgr.type() != CV_8UC3) throw std::invalid_argument("encode_png expects 8-bit BGR");
    std::vector<std::uint8_t> buf;
    const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imencode(".png", bgr, buf, params)) throw data_error("PNG encoding failed");
    std::string png(buf.begin(), buf.end());
    if (text.size() == 0) return png;

    // IEND is always the trailing 12 bytes of an encoder-produced PNG.
    const std::size_t iend = png.size() - 12;
    std::string chunks;
    for (const auto& [k, v] : text) chunks += text_chunk(k, v);
    png.insert(iend, chunks);
    return png;
}

void write_png(const std::filesystem::path& path, const cv::Mat& bgr,
               std::initializer_list<std::pair<std::string_view, std::string_view>> text) {
    write_file_atomic(path, encode_png(bgr, text));
}

std::optional<std::string> png_text(std::string_view png, std::string_view keyword) {
    std::size_t at = 8;
    while (at + 12 <= png.size()) {
        const std::uint32_t len = get_u32_be(png, at);
        if (at + 12 + len > png.size()) break;
        const std::string_view type = png.substr(at + 4, 4);
        if (type == "tEXt") {
            const std::string_view body = png.substr(at + 8, len);
            const auto nul = body.find('\0');
            if (nul != std::string_view::npos && body.substr(0, nul) == keyword)
                return std::string(body.substr(nul + 1));
        }
        if (type == "IEND") break;
        at += 12 + len;
    }
    return std::nullopt;
}

}  // namespace focus
