#include "mimic/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

namespace mimic {
namespace {

constexpr std::array<char, 8> kMagic = {'M', 'I', 'M', 'I', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kMaxRank = 8;

template <typename U>
void put_le(std::ostream& os, U value) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw LoadError("checkpoint: truncated file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

void put_string(std::ostream& os, const std::string& s) {
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is, std::uint32_t limit) {
  const auto n = get_le<std::uint32_t>(is);
  if (n > limit) throw LoadError("checkpoint: string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw LoadError("checkpoint: truncated file");
  return s;
}

}  // namespace

const TensorRecord* Checkpoint::find(std::string_view name) const {
  for (const TensorRecord& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void Checkpoint::write(std::ostream& os) const {
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kCheckpointFormatVersion);
  put_string(os, metadata.dump());
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const TensorRecord& t : tensors) {
    expects(static_cast<Index>(t.values.size()) == t.rows * t.cols, "checkpoint: tensor " + t.name + " has a bad size");
    put_string(os, t.name);
    put_le<std::uint32_t>(os, 2);
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(t.rows));
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(t.cols));
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(t.values.size()));
    put_le<std::uint8_t>(os, t.droppable ? 1 : 0);
  }
  for (const TensorRecord& t : tensors)
    for (float v : t.values) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
}

Checkpoint Checkpoint::read(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw LoadError("checkpoint: not a MIMICKPT file");
  const auto version = get_le<std::uint32_t>(is);
  if (version != kCheckpointFormatVersion) {
    throw LoadError("checkpoint: unsupported format version " + std::to_string(version));
  }
  Checkpoint ckpt;
  try {
    ckpt.metadata = nlohmann::json::parse(get_string(is, 1u << 26));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  const auto count = get_le<std::uint32_t>(is);
  ckpt.tensors.resize(count);
  for (TensorRecord& t : ckpt.tensors) {
    t.name = get_string(is, 4096);
    const auto rank = get_le<std::uint32_t>(is);
    if (rank == 0 || rank > kMaxRank) throw LoadError("checkpoint: tensor " + t.name + " has bad rank");
    std::vector<std::uint64_t> dims(rank);
    for (auto& d : dims) d = get_le<std::uint64_t>(is);
    const auto elements = get_le<std::uint64_t>(is);
    std::uint64_t product = 1;
    for (auto d : dims) product *= d;
    if (product != elements) throw LoadError("checkpoint: tensor " + t.name + " dims disagree with its count");
    // Higher ranks are stored flattened as rows × (product of trailing dims).
    t.rows = static_cast<Index>(dims[0]);
    t.cols = static_cast<Index>(dims[0] == 0 ? 0 : elements / dims[0]);
    t.droppable = get_le<std::uint8_t>(is) != 0;
    t.values.resize(static_cast<std::size_t>(elements));
  }
  for (TensorRecord& t : ckpt.tensors)
    for (float& v : t.values) v = std::bit_cast<float>(get_le<std::uint32_t>(is));
  return ckpt;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write(os);
  if (!os) throw IoError("failed writing " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint " + path);
  return read(is);
}

}  // namespace mimic
