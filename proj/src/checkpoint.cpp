// Checkpoint layout (little-endian, version 1):
//   char[8]  magic "ADVGCKPT"
//   uint32   version
//   uint32   reserved (0)
//   uint64   n, C, H, |F|
//   float64  T
//   float64  W0[C*H]   row-major
//   float64  W1[H*|F|] row-major
#include "advgraph/errors.hpp"
#include "advgraph/gcn.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace advgraph {

namespace {

constexpr std::array<char, 8> kMagic = {'A', 'D', 'V', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw IoError("truncated checkpoint " + path.string());
  return value;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) put<double>(out, m(i, j));
}

Matrix get_matrix(std::istream& in, std::uint64_t rows, std::uint64_t cols,
                  const std::filesystem::path& path) {
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>(in, path);
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& p) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, 0);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(p.num_nodes));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(p.input_dim()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(p.hidden_dim()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(p.num_classes()));
  put<double>(out, p.temperature);
  put_matrix(out, p.w0);
  put_matrix(out, p.w1);
  if (!out) throw IoError("failed writing " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw IoError(path.string() + " is not a model checkpoint");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  get<std::uint32_t>(in, path);
  ModelParams p;
  p.num_nodes = static_cast<Index>(get<std::uint64_t>(in, path));
  const auto c = get<std::uint64_t>(in, path);
  const auto h = get<std::uint64_t>(in, path);
  const auto f = get<std::uint64_t>(in, path);
  p.temperature = get<double>(in, path);
  p.w0 = get_matrix(in, c, h, path);
  p.w1 = get_matrix(in, h, f, path);
  return p;
}

}  // namespace advgraph
