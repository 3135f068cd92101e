#pragma once

#include "focus/dataset_index.hpp"
#include "focus/mosaic.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace test {

namespace fs = std::filesystem;

// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("focus_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

// Solid image whose color encodes (class_index, image_index), so quadrant
// provenance can be read back from composed mosaics.
inline cv::Mat tagged_image(int width, int height, int class_index, int image_index) {
    return cv::Mat(height, width, CV_8UC3,
                   cv::Scalar(10 + 20 * (class_index % 12), 10 + 2 * (image_index % 120), 200));
}

inline void write_image(const fs::path& path, const cv::Mat& img) {
    fs::create_directories(path.parent_path());
    cv::imwrite(path.string(), img);
}

inline void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
}

// root/<class>/img_<k>.png for every class.
inline void make_dataset(const fs::path& root, const std::vector<std::string>& classes, int per_class, int size = 8) {
    for (std::size_t c = 0; c < classes.size(); ++c) {
        for (int k = 0; k < per_class; ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "img_%03d.png", k);
            write_image(root / classes[c] / name, tagged_image(size, size, static_cast<int>(c), k));
        }
    }
}

inline std::vector<std::string> class_names(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back("class" + std::to_string(i));
    return out;
}

// Index over synthetic records that never touches the disk.
inline focus::DatasetIndex memory_index(const std::vector<std::string>& classes, int eval_per_class,
                                        int train_per_class = 0) {
    std::vector<focus::ImageRecord> records;
    for (const auto& c : classes) {
        for (int k = 0; k < eval_per_class + train_per_class; ++k) {
            const std::string file = "img_" + std::to_string(k) + ".png";
            records.push_back({c + "/" + file, fs::path(c) / file, c,
                               k < train_per_class ? focus::Split::train : focus::Split::eval});
        }
    }
    return focus::DatasetIndex("/nonexistent", std::move(records));
}

// A valid spec with the given geometry and layout; image ids are placeholders.
inline focus::MosaicSpec make_spec(focus::Layout layout, int width, int height, const std::string& id = "m",
                                   focus::MosaicMode mode = focus::MosaicMode::standard) {
    focus::MosaicSpec s;
    s.id = id;
    s.target_class = "t";
    s.layout = layout;
    s.width = width;
    s.height = height;
    s.mode = mode;
    int t = 0, o = 0;
    for (auto q : focus::kQuadrants) {
        auto& src = s.quadrants[static_cast<std::size_t>(q)];
        if (focus::is_target(layout, q)) {
            src = {"t/" + std::to_string(t++), "t"};
        } else {
            src = {"o/" + std::to_string(o++), "o"};
        }
    }
    return s;
}

}  // namespace test
