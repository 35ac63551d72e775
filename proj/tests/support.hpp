#pragma once

// Shared test fixtures: temp directories, placeholder images, synthetic
// manifests/exemplar files, and scripted oracle rulesets.

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "soc/backend.hpp"
#include "soc/dataset.hpp"
#include "soc/registry.hpp"
#include "soc/registry_data.hpp"

namespace soctest {

namespace fs = std::filesystem;

// 1x1 transparent PNG.
inline const std::vector<std::uint8_t>& tiny_png() {
  static const std::vector<std::uint8_t> bytes = {
      0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d,
      0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01,
      0x08, 0x06, 0x00, 0x00, 0x00, 0x1f, 0x15, 0xc4, 0x89, 0x00, 0x00, 0x00,
      0x0d, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x62, 0x00, 0x01, 0x00, 0x00,
      0x05, 0x00, 0x01, 0x0d, 0x0a, 0x2d, 0xb4, 0x00, 0x00, 0x00, 0x00, 0x49,
      0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
  return bytes;
}

inline fs::path make_temp_dir(const std::string& prefix) {
  static std::atomic<int> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       (prefix + "." + std::to_string(::getpid()) + "." +
                        std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

inline void write_png(const fs::path& path, std::uint8_t salt = 0) {
  auto bytes = tiny_png();
  bytes.push_back(salt);  // trailing bytes make each image distinct
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

struct LabeledFrame {
  std::string frame_id;
  std::array<int, 3> labels;
};

/// 12 synthetic frames with a mix of label triples; every criterion has
/// positives and negatives.
inline std::vector<LabeledFrame> fixture_frames() {
  return {
      {"f01", {1, 1, 1}}, {"f02", {0, 0, 0}}, {"f03", {1, 0, 1}},
      {"f04", {0, 1, 0}}, {"f05", {1, 1, 0}}, {"f06", {0, 0, 1}},
      {"f07", {1, 0, 0}}, {"f08", {0, 1, 1}}, {"f09", {1, 1, 1}},
      {"f10", {0, 0, 0}}, {"f11", {1, 1, 0}}, {"f12", {0, 0, 1}},
  };
}

inline std::vector<LabeledFrame> exemplar_frames() {
  return {
      {"e000", {0, 0, 0}},
      {"e111", {1, 1, 1}},
      {"e110", {1, 1, 0}},
      {"e001", {0, 0, 1}},
  };
}

/// Writes manifest.csv, exemplars.json, and placeholder images under `dir`.
struct Fixture {
  fs::path dir;
  fs::path manifest_path;
  fs::path exemplars_path;
  soc::CheckRegistry registry;
};

inline Fixture write_fixture(const std::string& prefix = "soc_fixture") {
  Fixture fx;
  fx.dir = make_temp_dir(prefix);
  fx.registry = soc::default_cvs_registry();
  fs::create_directories(fx.dir / "images");

  fx.manifest_path = fx.dir / "manifest.csv";
  {
    std::ofstream out(fx.manifest_path);
    out << "frame_id,image_ref,split,y1,y2,y3\n";
    std::uint8_t salt = 0;
    for (const auto& f : fixture_frames()) {
      const fs::path img = fx.dir / "images" / (f.frame_id + ".png");
      write_png(img, salt++);
      out << f.frame_id << "," << img.string() << ",test," << f.labels[0]
          << "," << f.labels[1] << "," << f.labels[2] << "\n";
    }
  }

  fx.exemplars_path = fx.dir / "exemplars.json";
  {
    nlohmann::json exemplars = nlohmann::json::array();
    std::uint8_t salt = 100;
    for (const auto& e : exemplar_frames()) {
      const fs::path img = fx.dir / "images" / (e.frame_id + ".png");
      write_png(img, salt++);
      nlohmann::json answers;
      for (const auto& crit : fx.registry.criteria) {
        const int y = e.labels[static_cast<std::size_t>(crit.criterion_id - 1)];
        for (const auto& ch : crit.checks)
          answers[ch.check_id] = {
              {"verdict", y ? "yes" : "no"},
              {"justification",
               std::string(y ? "evidence clearly seen in " : "evidence missing in ") +
                   e.frame_id}};
      }
      exemplars.push_back({{"frame_id", e.frame_id},
                           {"image_ref", img.string()},
                           {"labels", {e.labels[0], e.labels[1], e.labels[2]}},
                           {"check_answers", answers}});
    }
    std::ofstream out(fx.exemplars_path);
    out << nlohmann::json{{"exemplars", exemplars}}.dump(2) << "\n";
  }
  return fx;
}

/// Oracle ruleset where every check verdict matches the frame label and every
/// confidence equals the label, except (frame, check) pairs listed in
/// `flipped` which answer wrong.
inline soc::OracleRuleset perfect_ruleset(
    const std::vector<LabeledFrame>& frames, const soc::CheckRegistry& registry,
    const std::set<std::pair<std::string, std::string>>& flipped = {}) {
  soc::OracleRuleset ruleset;
  for (const auto& f : frames) {
    for (const auto& crit : registry.criteria) {
      const int y = f.labels[static_cast<std::size_t>(crit.criterion_id - 1)];
      ruleset.confidences[{f.frame_id, crit.criterion_id}] = y ? 0.9 : 0.1;
      for (const auto& ch : crit.checks) {
        const bool flip = flipped.count({f.frame_id, ch.check_id}) > 0;
        const int v = flip ? 1 - y : y;
        ruleset.check_verdicts[{f.frame_id, ch.check_id}] = v ? "yes" : "no";
      }
    }
  }
  return ruleset;
}

}  // namespace soctest
