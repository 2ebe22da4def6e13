#pragma once

#include <atomic>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "faceswap/error.hpp"
#include "faceswap/file_io.hpp"
#include "faceswap/model.hpp"

namespace faceswap {

// Model file layout:
//   "FF3DMM01"
//   u32 LE metadata length, JSON {N, Ks, Ke, T, convention}
//   f32 LE: mean (3N), shape basis (3N*Ks, column-major), expression
//           basis (3N*Ke, column-major), sigma (Ke)
//   u32 LE: triangles (3T)
inline constexpr char kModelMagic[8] = {'F', 'F', '3', 'D', 'M', 'M', '0', '1'};

namespace io_detail {

class Reader {
 public:
  explicit Reader(const std::vector<char>& buf) : buf_(buf) {}

  void need(std::size_t n, const char* what) const {
    if (buf_.size() - pos_ < n)
      fail(ErrorCode::kParseTruncated, std::string("file ends inside ") + what);
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f32(const char* what) { return static_cast<double>(std::bit_cast<float>(u32(what))); }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  const std::vector<char>& buf_;
  std::size_t pos_ = 0;
};

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f32(std::string& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

}  // namespace io_detail

inline std::string serialize_model(const MorphableModel& model) {
  model.validate();
  using io_detail::put_f32;
  using io_detail::put_u32;
  const nlohmann::json meta = {{"N", model.vertex_count()},
                               {"Ks", model.shape_dim()},
                               {"Ke", model.expr_dim()},
                               {"T", model.triangles.size()},
                               {"convention", model.convention}};
  const std::string meta_text = meta.dump();
  std::string out(kModelMagic, sizeof(kModelMagic));
  put_u32(out, static_cast<std::uint32_t>(meta_text.size()));
  out += meta_text;
  for (Eigen::Index i = 0; i < model.mean_shape.size(); ++i) put_f32(out, model.mean_shape[i]);
  for (Eigen::Index c = 0; c < model.shape_basis.cols(); ++c)
    for (Eigen::Index r = 0; r < model.shape_basis.rows(); ++r) put_f32(out, model.shape_basis(r, c));
  for (Eigen::Index c = 0; c < model.expr_basis.cols(); ++c)
    for (Eigen::Index r = 0; r < model.expr_basis.rows(); ++r) put_f32(out, model.expr_basis(r, c));
  for (Eigen::Index i = 0; i < model.expr_sigma.size(); ++i) put_f32(out, model.expr_sigma[i]);
  for (const auto& t : model.triangles)
    for (auto idx : t) put_u32(out, idx);
  return out;
}

inline MorphableModel parse_model(const std::vector<char>& buf) {
  io_detail::Reader in(buf);
  if (buf.size() < sizeof(kModelMagic) ||
      std::memcmp(buf.data(), kModelMagic, sizeof(kModelMagic)) != 0)
    fail(ErrorCode::kParseMalformedHeader, "missing FF3DMM01 magic");
  in.bytes(sizeof(kModelMagic), "magic");
  const auto meta_len = in.u32("metadata length");
  const auto meta_text = in.bytes(meta_len, "metadata");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseMalformedHeader, std::string("metadata is not JSON: ") + e.what());
  }
  std::int64_t n = 0, ks = 0, ke = 0, tri = 0;
  std::string convention;
  try {
    n = meta.at("N").get<std::int64_t>();
    ks = meta.at("Ks").get<std::int64_t>();
    ke = meta.at("Ke").get<std::int64_t>();
    tri = meta.value("T", std::int64_t{0});
    convention = meta.value("convention", std::string("ibug68"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseMalformedHeader, std::string("metadata fields: ") + e.what());
  }
  constexpr std::int64_t kLimit = std::int64_t{1} << 28;
  if (n <= 0 || ks <= 0 || ke <= 0 || tri < 0 || n > kLimit || ks > 4096 || ke > 4096 || tri > kLimit)
    fail(ErrorCode::kParseDimensionMismatch,
         "implausible dimensions N=" + std::to_string(n) + " Ks=" + std::to_string(ks) +
             " Ke=" + std::to_string(ke) + " T=" + std::to_string(tri));
  const auto rows = static_cast<std::size_t>(3 * n);
  const std::size_t expected = 4 * (rows * (1 + static_cast<std::size_t>(ks + ke)) +
                                    static_cast<std::size_t>(ke) + 3 * static_cast<std::size_t>(tri));
  if (in.remaining() < expected)
    fail(ErrorCode::kParseTruncated, "payload has " + std::to_string(in.remaining()) +
                                         " bytes, dimensions require " + std::to_string(expected));
  if (in.remaining() > expected)
    fail(ErrorCode::kParseDimensionMismatch,
         std::to_string(in.remaining() - expected) + " trailing bytes after payload");

  MorphableModel m;
  m.convention = convention;
  m.mean_shape.resize(3 * n);
  for (Eigen::Index i = 0; i < 3 * n; ++i) m.mean_shape[i] = in.f32("mean shape");
  m.shape_basis.resize(3 * n, ks);
  for (Eigen::Index c = 0; c < ks; ++c)
    for (Eigen::Index r = 0; r < 3 * n; ++r) m.shape_basis(r, c) = in.f32("shape basis");
  m.expr_basis.resize(3 * n, ke);
  for (Eigen::Index c = 0; c < ke; ++c)
    for (Eigen::Index r = 0; r < 3 * n; ++r) m.expr_basis(r, c) = in.f32("expression basis");
  m.expr_sigma.resize(ke);
  for (Eigen::Index j = 0; j < ke; ++j) {
    m.expr_sigma[j] = in.f32("sigma");
    if (!(m.expr_sigma[j] > 0.0))
      fail(ErrorCode::kParseDimensionMismatch, "sigma " + std::to_string(j) + " is not positive");
  }
  m.triangles.resize(static_cast<std::size_t>(tri));
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    for (auto& idx : m.triangles[t]) {
      idx = in.u32("triangles");
      if (idx >= static_cast<std::uint64_t>(n))
        fail(ErrorCode::kParseInvalidTriangle, "triangle " + std::to_string(t) +
                                                   " references vertex " + std::to_string(idx) +
                                                   " >= N=" + std::to_string(n));
    }
  }
  return m;
}

inline MorphableModel load_model(const std::filesystem::path& path) {
  return parse_model(read_file(path));
}

inline void save_model(const MorphableModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(model));
}

/// One vertex index per line; line i is landmark i.
inline LandmarkMapping load_mapping(const std::filesystem::path& path,
                                    std::string convention = "ibug68") {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  LandmarkMapping mapping;
  mapping.convention = std::move(convention);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long v = -1;
    std::string rest;
    if (!(ls >> v) || v < 0 || v > 0xffffffffLL || (ls >> rest))
      fail(ErrorCode::kParseMalformedHeader,
           path.string() + ":" + std::to_string(lineno) + ": expected a vertex index");
    mapping.vertex_indices.push_back(static_cast<std::uint32_t>(v));
  }
  return mapping;
}

inline void save_mapping(const LandmarkMapping& mapping, const std::filesystem::path& path) {
  std::string text;
  for (auto v : mapping.vertex_indices) text += std::to_string(v) + "\n";
  write_file_atomic(path, text);
}

}  // namespace faceswap
