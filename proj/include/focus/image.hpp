#pragma once

#include <opencv2/core.hpp>

#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace focus {

// Decodes PNG/JPEG into 8-bit 3-channel BGR (OpenCV channel order).
// Returns nullopt when the file cannot be decoded.
std::optional<cv::Mat> try_decode_image(const std::filesystem::path& path);

// Resizes so the source covers a width x height window (for square windows:
// shorter side equals the window side), bilinear, then crops the centered
// window. Sources that already match are copied untouched.
cv::Mat resize_and_center_crop(const cv::Mat& src, int width, int height);

// 8-bit RGB PNG bytes (no alpha). Optional tEXt chunks are inserted before IEND.
std::string encode_png(const cv::Mat& bgr,
                       std::initializer_list<std::pair<std::string_view, std::string_view>> text = {});

void write_png(const std::filesystem::path& path, const cv::Mat& bgr,
               std::initializer_list<std::pair<std::string_view, std::string_view>> text = {});

// Reads a tEXt chunk value from PNG bytes; nullopt if absent.
std::optional<std::string> png_text(std::string_view png, std::string_view keyword);

}  // namespace focus
