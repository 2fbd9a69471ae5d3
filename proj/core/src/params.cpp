#include "patchtriage/params.hpp"

#include <bit>
#include <fstream>

namespace patchtriage {

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* ext) {
  std::filesystem::path p = stem;
  p += ext;
  return p;
}

}  // namespace

void save_params(const ModelParams& params, const std::filesystem::path& stem, const nlohmann::json& metadata) {
  const auto bin_path = with_suffix(stem, ".bin");
  const auto json_path = with_suffix(stem, ".json");
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot write " + bin_path.string());
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    const auto& t = params[i];
    tensors.push_back({{"name", t.name},
                       {"shape", t.shape},
                       {"offset", offset},
                       {"count", t.values.size()},
                       {"regularized", t.regularized}});
    for (float v : t.values) {
      const std::uint32_t u = std::bit_cast<std::uint32_t>(v);
      const unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                                  static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
      bin.write(reinterpret_cast<const char*>(b), 4);
    }
    offset += t.values.size();
  }
  if (!bin) throw IoError("failed writing " + bin_path.string());
  std::ofstream js(json_path);
  if (!js) throw IoError("cannot write " + json_path.string());
  nlohmann::json manifest{{"format", "patchtriage-params-v1"}, {"tensors", tensors}, {"metadata", metadata}};
  js << manifest.dump(2) << '\n';
}

LoadedParams load_params(const std::filesystem::path& stem) {
  const auto bin_path = with_suffix(stem, ".bin");
  const auto json_path = with_suffix(stem, ".json");
  std::ifstream js(json_path);
  if (!js) throw IoError("cannot open " + json_path.string());
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed parameter manifest " + json_path.string() + ": " + e.what());
  }
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + bin_path.string());
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  LoadedParams out;
  out.metadata = manifest.value("metadata", nlohmann::json::object());
  for (const auto& t : manifest.at("tensors")) {
    auto& dst = out.params.add(t.at("name").get<std::string>(), t.at("shape").get<std::vector<std::size_t>>(),
                               t.value("regularized", false));
    const auto offset = t.at("offset").get<std::size_t>();
    if (t.at("count").get<std::size_t>() != dst.values.size()) {
      throw IoError("parameter manifest count disagrees with shape for " + dst.name);
    }
    if ((offset + dst.values.size()) * 4 > raw.size()) throw IoError("parameter file " + bin_path.string() + " is truncated");
    for (std::size_t i = 0; i < dst.values.size(); ++i) {
      const unsigned char* b = raw.data() + (offset + i) * 4;
      const std::uint32_t u = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                              (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
      dst.values[i] = std::bit_cast<float>(u);
    }
  }
  return out;
}

}  // namespace patchtriage
